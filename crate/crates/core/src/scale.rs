//! Rational downscale factors ("precoding modes").

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::Error;

/// Exact rational downscale ratio `num / den`. Values above one shrink the
/// frame; `1/1` is native resolution.
///
/// Always stored in lowest terms, so derived equality and hashing agree with
/// numeric equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScaleFactor {
    num: u32,
    den: u32,
}

impl ScaleFactor {
    pub const ONE: ScaleFactor = ScaleFactor { num: 1, den: 1 };

    pub fn new(num: u32, den: u32) -> Result<Self, Error> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidScale);
        }
        let g = gcd(num, den);
        Ok(ScaleFactor {
            num: num / g,
            den: den / g,
        })
    }

    pub const fn num(self) -> u32 {
        self.num
    }

    pub const fn den(self) -> u32 {
        self.den
    }

    pub fn is_native(self) -> bool {
        self.num == self.den
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Output length for an input length: `round(len · den / num)`, half up,
    /// never below one.
    pub fn apply(self, len: usize) -> usize {
        let n = u64::from(self.num);
        let d = u64::from(self.den);
        let out = (2 * len as u64 * d + n) / (2 * n);
        out.max(1) as usize
    }

    /// Output geometry for a `width × height` input.
    pub fn apply_dims(self, width: usize, height: usize) -> (usize, usize) {
        (self.apply(width), self.apply(height))
    }

    /// Ratio `self / prev`.
    pub fn ratio_to(self, prev: ScaleFactor) -> ScaleFactor {
        let num = u64::from(self.num) * u64::from(prev.den);
        let den = u64::from(self.den) * u64::from(prev.num);
        let g = gcd64(num, den);
        ScaleFactor {
            num: (num / g) as u32,
            den: (den / g) as u32,
        }
    }
}

impl Ord for ScaleFactor {
    fn cmp(&self, other: &Self) -> Ordering {
        (u64::from(self.num) * u64::from(other.den)).cmp(&(u64::from(other.num) * u64::from(self.den)))
    }
}

impl PartialOrd for ScaleFactor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for ScaleFactor {
    type Err = Error;

    /// Accepts `"3/2"` or a bare integer such as `"2"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let num = n.parse::<u32>().map_err(|_| Error::InvalidScale)?;
        let den = d.parse::<u32>().map_err(|_| Error::InvalidScale)?;
        ScaleFactor::new(num, den)
    }
}

const fn sf(num: u32, den: u32) -> ScaleFactor {
    ScaleFactor { num, den }
}

/// The eight learned downscale factors, ascending.
pub const CANONICAL_SCALES: [ScaleFactor; 8] = [
    sf(5, 4),
    sf(4, 3),
    sf(3, 2),
    sf(2, 1),
    sf(5, 2),
    sf(3, 1),
    sf(4, 1),
    sf(6, 1),
];

/// Native resolution followed by [`CANONICAL_SCALES`].
pub const ALL_MODES: [ScaleFactor; 9] = [
    sf(1, 1),
    sf(5, 4),
    sf(4, 3),
    sf(3, 2),
    sf(2, 1),
    sf(5, 2),
    sf(3, 1),
    sf(4, 1),
    sf(6, 1),
];

/// Partition of the canonical scales into the three precoding streams.
pub const STREAM_SCALES: [&[ScaleFactor]; 3] = [
    &[sf(4, 3), sf(2, 1), sf(4, 1)],
    &[sf(3, 2), sf(3, 1), sf(6, 1)],
    &[sf(5, 4), sf(5, 2)],
];

pub fn is_canonical(s: ScaleFactor) -> bool {
    ALL_MODES.contains(&s)
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn gcd64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_lowest_terms() {
        let s = ScaleFactor::new(6, 4).unwrap();
        assert_eq!((s.num(), s.den()), (3, 2));
        assert_eq!(s, "3/2".parse().unwrap());
        assert_eq!(ScaleFactor::new(4, 4).unwrap(), ScaleFactor::ONE);
        assert!(ScaleFactor::new(0, 1).is_err());
        assert!("x/2".parse::<ScaleFactor>().is_err());
    }

    #[test]
    fn output_dimensions() {
        let s = |t: &str| t.parse::<ScaleFactor>().unwrap();
        assert_eq!(s("3/2").apply_dims(1920, 1080), (1280, 720));
        assert_eq!(s("6").apply_dims(1920, 1080), (320, 180));
        assert_eq!(s("5/4").apply_dims(1920, 1080), (1536, 864));
        assert_eq!(s("4/3").apply_dims(1920, 1080), (1440, 810));
        // half rounds up
        assert_eq!(s("2").apply_dims(121, 97), (61, 49));
        assert_eq!(s("6").apply(5), 1);
    }

    #[test]
    fn ordering_and_ratios() {
        let mut v = ALL_MODES;
        v.reverse();
        v.sort();
        assert_eq!(v, ALL_MODES);
        let r = sf(2, 1).ratio_to(sf(4, 3));
        assert_eq!(r, sf(3, 2));
        assert_eq!(sf(5, 2).ratio_to(sf(5, 4)), sf(2, 1));
        assert_eq!(sf(5, 4).to_string(), "5/4");
    }
}
