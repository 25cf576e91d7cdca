//! Separable linear resamplers for rational scale factors.
//!
//! Sample positions follow the half-pixel-centre convention: output sample
//! `j` of a length-`out` axis sits at source coordinate
//! `(j + 0.5) · in / out − 0.5`. When shrinking, the kernel support is
//! stretched by `in / out` so the filter also acts as the anti-alias
//! low-pass. Source samples past either edge repeat the edge sample.
//! Weights of every output sample are normalised to sum to one.

use alloc::vec::Vec;

use crate::frame::{chroma_dims, PlanarFrame, Plane};
use crate::scale::ScaleFactor;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterKind {
    Bilinear,
    /// Keys cubic convolution with sharpness `a`.
    Bicubic { a: f32 },
    Lanczos { taps: u32 },
}

impl FilterKind {
    pub const BICUBIC: FilterKind = FilterKind::Bicubic { a: -0.75 };
    pub const LANCZOS3: FilterKind = FilterKind::Lanczos { taps: 3 };

    /// Kernel half-width at unit scale.
    pub fn support(self) -> f64 {
        match self {
            FilterKind::Bilinear => 1.0,
            FilterKind::Bicubic { .. } => 2.0,
            FilterKind::Lanczos { taps } => f64::from(taps),
        }
    }

    pub fn kernel(self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            FilterKind::Bilinear => (1.0 - ax).max(0.0),
            FilterKind::Bicubic { a } => {
                let a = f64::from(a);
                if ax < 1.0 {
                    ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0
                } else if ax < 2.0 {
                    ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a
                } else {
                    0.0
                }
            }
            FilterKind::Lanczos { taps } => {
                let n = f64::from(taps);
                if ax < 1e-12 {
                    1.0
                } else if ax < n {
                    let px = core::f64::consts::PI * ax;
                    n * libm::sin(px) * libm::sin(px / n) / (px * px)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Bilinear => "bilinear",
            FilterKind::Bicubic { .. } => "bicubic",
            FilterKind::Lanczos { .. } => "lanczos",
        }
    }
}

impl core::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bilinear" => Ok(FilterKind::Bilinear),
            "bicubic" => Ok(FilterKind::BICUBIC),
            "lanczos" | "lanczos3" => Ok(FilterKind::LANCZOS3),
            _ => Err(Error::InvalidArgument("unknown filter (bilinear|bicubic|lanczos)")),
        }
    }
}

/// Arithmetic used by [`resize_plane`]. Only `Float32` carries bit-exactness
/// guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Float32,
    Fixed8,
}

/// Per-output tap lists for one axis.
#[derive(Debug, Clone)]
pub struct AxisWeights {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f32>,
}

impl AxisWeights {
    pub fn new(in_len: usize, out_len: usize, filter: FilterKind) -> Self {
        let ratio = in_len as f64 / out_len as f64;
        let stretch = ratio.max(1.0);
        let support = filter.support() * stretch;
        let last = in_len as i64 - 1;

        let mut offsets = Vec::with_capacity(out_len + 1);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        let mut raw = Vec::new();
        offsets.push(0);
        for j in 0..out_len {
            let center = (j as f64 + 0.5) * ratio - 0.5;
            let lo = libm::floor(center - support) as i64;
            let hi = libm::ceil(center + support) as i64;
            raw.clear();
            let mut sum = 0.0;
            for i in lo..=hi {
                let w = filter.kernel((i as f64 - center) / stretch);
                if w != 0.0 {
                    raw.push((i.clamp(0, last) as usize, w));
                    sum += w;
                }
            }
            for &(i, w) in &raw {
                indices.push(i);
                weights.push((w / sum) as f32);
            }
            offsets.push(indices.len());
        }
        AxisWeights {
            offsets,
            indices,
            weights,
        }
    }

    pub fn out_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `(source index, weight)` pairs of output sample `j`.
    pub fn taps(&self, j: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let r = self.offsets[j]..self.offsets[j + 1];
        self.indices[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }
}

/// Resize a row-major `f32` plane. Rows first, then columns; an axis whose
/// length does not change is passed through untouched.
pub fn resize_f32(
    src: &[f32],
    width: usize,
    height: usize,
    target_w: usize,
    target_h: usize,
    filter: FilterKind,
) -> Result<Vec<f32>, Error> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::ZeroSizedTarget);
    }
    if src.len() != width * height || width == 0 || height == 0 {
        return Err(Error::ShapeMismatch("source plane length != width * height"));
    }
    let rows = if target_w == width {
        src.to_vec()
    } else {
        let wx = AxisWeights::new(width, target_w, filter);
        let mut out = Vec::with_capacity(target_w * height);
        for row in src.chunks_exact(width) {
            for j in 0..target_w {
                let mut acc = 0.0f32;
                for (i, w) in wx.taps(j) {
                    acc += row[i] * w;
                }
                out.push(acc);
            }
        }
        out
    };
    if target_h == height {
        return Ok(rows);
    }
    let wy = AxisWeights::new(height, target_h, filter);
    let mut out = alloc::vec![0.0f32; target_w * target_h];
    for (j, dst) in out.chunks_exact_mut(target_w).enumerate() {
        for (i, w) in wy.taps(j) {
            let src_row = &rows[i * target_w..(i + 1) * target_w];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += s * w;
            }
        }
    }
    Ok(out)
}

/// Round half away from zero and saturate to `u8`.
#[inline]
pub fn quantize(v: f32) -> u8 {
    libm::roundf(v).clamp(0.0, 255.0) as u8
}

pub fn resize_plane(
    plane: &Plane,
    target_w: usize,
    target_h: usize,
    filter: FilterKind,
    precision: Precision,
) -> Result<Plane, Error> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::ZeroSizedTarget);
    }
    let data = match precision {
        Precision::Float32 => {
            let src: Vec<f32> = plane.data.iter().map(|&v| f32::from(v)).collect();
            resize_f32(&src, plane.width, plane.height, target_w, target_h, filter)?
                .into_iter()
                .map(quantize)
                .collect()
        }
        Precision::Fixed8 => resize_fixed8(plane, target_w, target_h, filter),
    };
    Plane::new(target_w, target_h, data)
}

/// Weights quantised to 1/256 with the sum forced to exactly 256.
fn fixed_weights(axis: &AxisWeights) -> Vec<i32> {
    let mut q: Vec<i32> = axis.weights.iter().map(|&w| libm::roundf(w * 256.0) as i32).collect();
    for j in 0..axis.out_len() {
        let r = axis.offsets[j]..axis.offsets[j + 1];
        let sum: i32 = q[r.clone()].iter().sum();
        let peak = r
            .clone()
            .max_by_key(|&k| q[k])
            .expect("every output sample has at least one tap");
        q[peak] += 256 - sum;
    }
    q
}

fn resize_fixed8(plane: &Plane, target_w: usize, target_h: usize, filter: FilterKind) -> Vec<u8> {
    let (w, h) = plane.dims();
    let wx = AxisWeights::new(w, target_w, filter);
    let wy = AxisWeights::new(h, target_h, filter);
    let qx = fixed_weights(&wx);
    let qy = fixed_weights(&wy);

    // rows carry 8 extra fractional bits into the column pass
    let mut rows = alloc::vec![0i32; target_w * h];
    for y in 0..h {
        let src = plane.row(y);
        for j in 0..target_w {
            let mut acc = 0i32;
            for k in wx.offsets[j]..wx.offsets[j + 1] {
                acc += i32::from(src[wx.indices[k]]) * qx[k];
            }
            rows[y * target_w + j] = acc;
        }
    }
    let mut out = alloc::vec![0u8; target_w * target_h];
    for j in 0..target_h {
        for x in 0..target_w {
            let mut acc = 0i64;
            for k in wy.offsets[j]..wy.offsets[j + 1] {
                acc += i64::from(rows[wy.indices[k] * target_w + x]) * i64::from(qy[k]);
            }
            let v = (acc + (1 << 15)) >> 16;
            out[j * target_w + x] = v.clamp(0, 255) as u8;
        }
    }
    out
}

/// Shrink a frame by `s ≥ 1`: luma with `luma_filter`, both chroma planes
/// with `chroma_filter`, keeping the 4:2:0 relationship.
pub fn downscale_frame(
    frame: &PlanarFrame,
    s: ScaleFactor,
    luma_filter: FilterKind,
    chroma_filter: FilterKind,
) -> Result<PlanarFrame, Error> {
    if s < ScaleFactor::ONE {
        return Err(Error::InvalidArgument("downscale factor must be >= 1"));
    }
    if s.is_native() {
        return Ok(frame.clone());
    }
    let (tw, th) = s.apply_dims(frame.width, frame.height);
    let y = resize_plane(&frame.y, tw, th, luma_filter, Precision::Float32)?;
    let (cb, cr) = resize_chroma(frame, tw, th, chroma_filter)?;
    PlanarFrame::from_planes(y, cb, cr, frame.range)
}

/// Chroma planes resized to the 4:2:0 companions of a `luma_w × luma_h` frame.
pub fn resize_chroma(
    frame: &PlanarFrame,
    luma_w: usize,
    luma_h: usize,
    filter: FilterKind,
) -> Result<(Plane, Plane), Error> {
    let (cw, ch) = chroma_dims(luma_w, luma_h);
    Ok((
        resize_plane(&frame.cb, cw, ch, filter, Precision::Float32)?,
        resize_plane(&frame.cr, cw, ch, filter, Precision::Float32)?,
    ))
}

/// Enlarge all three planes with one filter to `target_w × target_h` luma.
pub fn upscale_frame(
    frame: &PlanarFrame,
    target_w: usize,
    target_h: usize,
    filter: FilterKind,
) -> Result<PlanarFrame, Error> {
    if target_w < frame.width || target_h < frame.height {
        return Err(Error::InvalidArgument("upscale target smaller than source"));
    }
    if (target_w, target_h) == frame.dims() {
        return Ok(frame.clone());
    }
    let y = resize_plane(&frame.y, target_w, target_h, filter, Precision::Float32)?;
    let (cb, cr) = resize_chroma(frame, target_w, target_h, filter)?;
    PlanarFrame::from_planes(y, cb, cr, frame.range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const FILTERS: [FilterKind; 3] = [FilterKind::Bilinear, FilterKind::BICUBIC, FilterKind::LANCZOS3];

    #[test]
    fn two_by_two_bilinear_average() {
        let p = Plane::new(2, 2, vec![10, 20, 30, 40]).unwrap();
        let out = resize_plane(&p, 1, 1, FilterKind::Bilinear, Precision::Float32).unwrap();
        assert_eq!(out.data, [25]);
    }

    #[test]
    fn constant_planes_stay_constant() {
        let p = Plane::filled(13, 7, 77);
        for f in FILTERS {
            for (tw, th) in [(1, 1), (5, 3), (13, 7), (40, 21), (26, 14)] {
                for prec in [Precision::Float32, Precision::Fixed8] {
                    let out = resize_plane(&p, tw, th, f, prec).unwrap();
                    assert!(out.data.iter().all(|&v| v == 77), "{f:?} {tw}x{th} {prec:?}");
                }
            }
        }
    }

    #[test]
    fn zero_target_rejected() {
        let p = Plane::filled(4, 4, 0);
        assert_eq!(
            resize_plane(&p, 0, 2, FilterKind::Bilinear, Precision::Float32),
            Err(Error::ZeroSizedTarget)
        );
    }

    #[test]
    fn kernel_values() {
        let b = FilterKind::BICUBIC;
        assert_eq!(b.kernel(0.0), 1.0);
        assert!(b.kernel(1.0).abs() < 1e-12);
        assert!(b.kernel(2.0).abs() < 1e-12);
        assert!(b.kernel(1.5) < 0.0);
        let l = FilterKind::LANCZOS3;
        assert!(l.kernel(1.0).abs() < 1e-12);
        assert!(l.kernel(3.0).abs() < 1e-12);
        assert_eq!(FilterKind::Bilinear.kernel(0.25), 0.75);
    }

    #[test]
    fn partition_of_unity() {
        for f in FILTERS {
            for (i, o) in [(10, 3), (7, 7), (3, 10), (1920, 1280), (97, 49), (1, 5)] {
                let ax = AxisWeights::new(i, o, f);
                for j in 0..o {
                    let s: f64 = ax.taps(j).map(|(_, w)| f64::from(w)).sum();
                    assert!((s - 1.0).abs() < 1e-6, "{f:?} {i}->{o} j={j} sum={s}");
                }
            }
        }
    }

    #[test]
    fn frame_geometry() {
        let f = PlanarFrame::filled(1920, 1080, 100, 128);
        let s: ScaleFactor = "3/2".parse().unwrap();
        let d = downscale_frame(&f, s, FilterKind::Bilinear, FilterKind::BICUBIC).unwrap();
        assert_eq!(d.dims(), (1280, 720));
        assert_eq!(d.cb.dims(), (640, 360));
        let d = downscale_frame(&f, "6".parse().unwrap(), FilterKind::Bilinear, FilterKind::BICUBIC)
            .unwrap();
        assert_eq!(d.dims(), (320, 180));
        let u = upscale_frame(&d, 1920, 1080, FilterKind::Bilinear).unwrap();
        assert_eq!(u, f);
        let same = downscale_frame(&f, ScaleFactor::ONE, FilterKind::Bilinear, FilterKind::BICUBIC)
            .unwrap();
        assert_eq!(same, f);
        assert!(upscale_frame(&f, 100, 100, FilterKind::Bilinear).is_err());
    }

    #[test]
    fn fixed8_tracks_float_path() {
        let data: Vec<u8> = (0..15 * 9).map(|i| ((i * 37) % 251) as u8).collect();
        let p = Plane::new(15, 9, data).unwrap();
        for f in FILTERS {
            let a = resize_plane(&p, 10, 6, f, Precision::Float32).unwrap();
            let b = resize_plane(&p, 10, 6, f, Precision::Fixed8).unwrap();
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((i16::from(*x) - i16::from(*y)).abs() <= 2);
            }
        }
    }
}
