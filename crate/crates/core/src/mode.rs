//! Rate-distortion pruning rules of the per-GOP mode selection.
//!
//! The codec-facing half (encoding, decoding, measuring) lives in the std
//! crate; everything here is pure bookkeeping over measured points.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::scale::ScaleFactor;
use crate::Error;

/// One measured operating point. `handle` refers to the precoded GOP that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint<H> {
    pub rate: f64,
    pub distortion: f64,
    pub handle: H,
    pub scale: ScaleFactor,
}

impl<H> RdPoint<H> {
    pub fn summary(&self) -> RdSummary {
        RdSummary {
            rate: self.rate,
            distortion: self.distortion,
            scale: self.scale,
        }
    }
}

/// Handle-free copy of an [`RdPoint`] for logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdSummary {
    pub rate: f64,
    pub distortion: f64,
    pub scale: ScaleFactor,
}

/// Rate ascending; equal rates by distortion ascending, then larger scale
/// first.
pub fn rd_order<H>(a: &RdPoint<H>, b: &RdPoint<H>) -> Ordering {
    a.rate
        .total_cmp(&b.rate)
        .then(a.distortion.total_cmp(&b.distortion))
        .then(b.scale.cmp(&a.scale))
}

/// Keep the lowest-rate point, then every point whose distortion is strictly
/// below all distortions kept before it. Output is rate-ascending with
/// strictly decreasing distortion.
pub fn prune_monotone<H>(mut points: Vec<RdPoint<H>>) -> Result<Vec<RdPoint<H>>, Error> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    points.sort_by(rd_order);
    let mut kept: Vec<RdPoint<H>> = Vec::with_capacity(points.len());
    for p in points {
        match kept.last() {
            Some(last) if p.distortion >= last.distortion => {}
            _ => kept.push(p),
        }
    }
    Ok(kept)
}

/// Lower convex hull of a rate-sorted, distortion-decreasing list. Lists of
/// two points or fewer come back unchanged; otherwise endpoints stay and an
/// interior point survives only if strictly below the chord joining its hull
/// neighbours.
pub fn lower_convex_hull<H>(points: Vec<RdPoint<H>>) -> Vec<RdPoint<H>> {
    if points.len() <= 2 {
        return points;
    }
    let mut hull: Vec<RdPoint<H>> = Vec::with_capacity(points.len());
    for p in points {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // b is kept iff (Db − Da)(Rp − Ra) < (Dp − Da)(Rb − Ra)
            let lhs = (b.distortion - a.distortion) * (p.rate - a.rate);
            let rhs = (p.distortion - a.distortion) * (b.rate - a.rate);
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Common CBR target: arithmetic mean of the survivors' rates.
pub fn cbr_rate<H>(survivors: &[RdPoint<H>]) -> Result<f64, Error> {
    if survivors.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(survivors.iter().map(|p| p.rate).sum::<f64>() / survivors.len() as f64)
}

/// Index of the minimum-distortion point; ties go to the larger scale.
pub fn argmin_distortion<H>(points: &[RdPoint<H>]) -> Option<usize> {
    (0..points.len()).min_by(|&i, &j| {
        points[i]
            .distortion
            .total_cmp(&points[j].distortion)
            .then(points[j].scale.cmp(&points[i].scale))
    })
}

/// Every stage of one selection, for diagnostics and manifests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageLog {
    pub all_points: Vec<RdSummary>,
    pub after_monotone: Vec<RdSummary>,
    pub after_hull: Vec<RdSummary>,
    pub cbr_rate: f64,
    pub remapped_points: Vec<RdSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecision<H> {
    pub selected: ScaleFactor,
    pub selected_handle: H,
    pub stage_log: StageLog,
}

/// Pure part of the selection: prune measured points and report the hull
/// survivors with their common CBR rate.
pub fn prune<H>(points: Vec<RdPoint<H>>) -> Result<(Vec<RdPoint<H>>, StageLog), Error> {
    let all_points = points.iter().map(RdPoint::summary).collect();
    let monotone = prune_monotone(points)?;
    let after_monotone = monotone.iter().map(RdPoint::summary).collect();
    let hull = lower_convex_hull(monotone);
    let log = StageLog {
        all_points,
        after_monotone,
        after_hull: hull.iter().map(RdPoint::summary).collect(),
        cbr_rate: cbr_rate(&hull)?,
        remapped_points: Vec::new(),
    };
    Ok((hull, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<RdPoint<()>> {
        v.iter()
            .enumerate()
            .map(|(i, &(rate, distortion))| RdPoint {
                rate,
                distortion,
                handle: (),
                scale: ScaleFactor::new(i as u32 + 1, 1).unwrap(),
            })
            .collect()
    }

    fn rd(v: &[RdPoint<()>]) -> Vec<(f64, f64)> {
        v.iter().map(|p| (p.rate, p.distortion)).collect()
    }

    #[test]
    fn four_point_walkthrough() {
        let m = prune_monotone(pts(&[(300.0, 9.0), (100.0, 10.0), (400.0, 5.0), (200.0, 8.0)])).unwrap();
        assert_eq!(rd(&m), [(100.0, 10.0), (200.0, 8.0), (400.0, 5.0)]);
        let h = lower_convex_hull(m);
        assert_eq!(rd(&h), [(100.0, 10.0), (200.0, 8.0), (400.0, 5.0)]);
    }

    #[test]
    fn hull_drops_point_above_chord() {
        let h = lower_convex_hull(pts(&[(100.0, 10.0), (200.0, 9.5), (400.0, 5.0)]));
        assert_eq!(rd(&h), [(100.0, 10.0), (400.0, 5.0)]);
    }

    #[test]
    fn small_inputs_pass_through() {
        assert_eq!(rd(&prune_monotone(pts(&[(5.0, 1.0)])).unwrap()), [(5.0, 1.0)]);
        let two = pts(&[(1.0, 9.0), (2.0, 8.9)]);
        assert_eq!(rd(&lower_convex_hull(two.clone())), rd(&two));
        let dec = pts(&[(1.0, 9.0), (2.0, 7.0), (3.0, 6.0)]);
        assert_eq!(rd(&prune_monotone(dec.clone()).unwrap()), rd(&dec));
        assert!(prune_monotone(Vec::<RdPoint<()>>::new()).is_err());
    }

    #[test]
    fn collinear_interior_point_removed() {
        let h = lower_convex_hull(pts(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]));
        assert_eq!(rd(&h), [(1.0, 3.0), (3.0, 1.0)]);
    }

    #[test]
    fn equal_rates_keep_lowest_distortion() {
        let m = prune_monotone(pts(&[(100.0, 7.0), (100.0, 5.0), (200.0, 5.0)])).unwrap();
        assert_eq!(rd(&m), [(100.0, 5.0)]);
    }

    #[test]
    fn tie_breaks_to_larger_scale() {
        let v = pts(&[(1.0, 4.0), (2.0, 4.0), (3.0, 5.0)]);
        assert_eq!(argmin_distortion(&v), Some(1));
        assert_eq!(cbr_rate(&v).unwrap(), 2.0);
    }
}
