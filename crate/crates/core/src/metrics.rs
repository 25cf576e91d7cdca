//! MSE/PSNR over YUV planes and Bjontegaard deltas.

use alloc::vec::Vec;

use crate::frame::{PlanarFrame, Plane};
use crate::Error;

/// PSNR reported for a channel with zero error.
pub const PSNR_CAP_DB: f64 = 100.0;

pub fn plane_mse(a: &Plane, b: &Plane) -> Result<f64, Error> {
    if a.dims() != b.dims() {
        return Err(Error::GeometryMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    if a.data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sse: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    Ok(sse as f64 / a.data.len() as f64)
}

/// `10·log10(255² / mse)`, capped.
pub fn psnr_from_mse(mse: f64, cap: f64) -> f64 {
    if mse <= 0.0 {
        return cap;
    }
    (10.0 * libm::log10(255.0 * 255.0 / mse)).min(cap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameQuality {
    pub mse_y: f64,
    pub mse_cb: f64,
    pub mse_cr: f64,
    /// Arithmetic mean of the three channel PSNRs.
    pub psnr_avg: f64,
}

impl FrameQuality {
    /// Equal-weight mean of the three channel MSEs.
    pub fn mse_avg(&self) -> f64 {
        (self.mse_y + self.mse_cb + self.mse_cr) / 3.0
    }
}

pub fn frame_psnr(a: &PlanarFrame, b: &PlanarFrame) -> Result<FrameQuality, Error> {
    frame_psnr_capped(a, b, PSNR_CAP_DB)
}

pub fn frame_psnr_capped(a: &PlanarFrame, b: &PlanarFrame, cap: f64) -> Result<FrameQuality, Error> {
    if a.dims() != b.dims() {
        return Err(Error::GeometryMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    let mse_y = plane_mse(&a.y, &b.y)?;
    let mse_cb = plane_mse(&a.cb, &b.cb)?;
    let mse_cr = plane_mse(&a.cr, &b.cr)?;
    let psnr_avg = (psnr_from_mse(mse_y, cap) + psnr_from_mse(mse_cb, cap) + psnr_from_mse(mse_cr, cap)) / 3.0;
    Ok(FrameQuality {
        mse_y,
        mse_cb,
        mse_cr,
        psnr_avg,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub per_frame: Vec<FrameQuality>,
    /// Mean of per-frame PSNRs.
    pub sequence_psnr: f64,
    pub sequence_vmaf: Option<f64>,
}

pub fn sequence_quality(reference: &[PlanarFrame], distorted: &[PlanarFrame]) -> Result<QualityReport, Error> {
    if reference.len() != distorted.len() {
        return Err(Error::ShapeMismatch("frame counts differ"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_frame = reference
        .iter()
        .zip(distorted)
        .map(|(a, b)| frame_psnr(a, b))
        .collect::<Result<Vec<_>, _>>()?;
    let sequence_psnr = per_frame.iter().map(|q| q.psnr_avg).sum::<f64>() / per_frame.len() as f64;
    Ok(QualityReport {
        per_frame,
        sequence_psnr,
        sequence_vmaf: None,
    })
}

/// Distortion used during mode selection: mean over frames of the
/// equal-weight YUV MSE.
pub fn sequence_mse(reference: &[PlanarFrame], distorted: &[PlanarFrame]) -> Result<f64, Error> {
    let q = sequence_quality(reference, distorted)?;
    Ok(q.per_frame.iter().map(FrameQuality::mse_avg).sum::<f64>() / q.per_frame.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QualityKind {
    #[default]
    Psnr,
    Vmaf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub rate: f64,
    pub quality: f64,
}

/// Rate/quality curve of one codec configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    pub points: Vec<CurvePoint>,
    pub kind: QualityKind,
}

impl RdCurve {
    pub fn new(points: Vec<CurvePoint>, kind: QualityKind) -> Self {
        RdCurve { points, kind }
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        RdCurve {
            points: pairs
                .iter()
                .map(|&(rate, quality)| CurvePoint { rate, quality })
                .collect(),
            kind: QualityKind::Psnr,
        }
    }

    fn validate(&self) -> Result<(), Error> {
        if self.points.len() < 4 {
            return Err(Error::TooFewPoints {
                needed: 4,
                found: self.points.len(),
            });
        }
        if self.points.iter().any(|p| !(p.rate > 0.0) || !p.quality.is_finite()) {
            return Err(Error::InvalidArgument("rates must be positive and qualities finite"));
        }
        if self.points.windows(2).any(|w| w[1].rate <= w[0].rate) {
            return Err(Error::RatesNotIncreasing);
        }
        Ok(())
    }
}

/// Curve model used for the Bjontegaard integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BdMethod {
    /// Least-squares cubic polynomial (classical).
    #[default]
    Cubic,
    /// Piecewise cubic Hermite (monotone, Fritsch–Carlson slopes).
    Pchip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdResult {
    /// Average rate difference of `test` versus `reference`, percent.
    pub bd_rate: f64,
    /// Average quality difference of `test` versus `reference`.
    pub bd_quality: f64,
}

/// Bjontegaard deltas of `test` relative to `reference`. Negative
/// `bd_rate` means `test` needs fewer bits for the same quality.
pub fn bd_metrics(reference: &RdCurve, test: &RdCurve, method: BdMethod) -> Result<BdResult, Error> {
    reference.validate()?;
    test.validate()?;
    let lr = |c: &RdCurve| -> Vec<(f64, f64)> {
        c.points.iter().map(|p| (libm::log10(p.rate), p.quality)).collect()
    };
    let (ra, rb) = (lr(reference), lr(test));

    // quality as a function of log-rate
    let bd_quality = {
        let lo = min_x(&ra).max(min_x(&rb));
        let hi = max_x(&ra).min(max_x(&rb));
        if !(hi > lo) {
            return Err(Error::NoOverlap);
        }
        let ia = Model::fit(&ra, method)?.integral(lo, hi);
        let ib = Model::fit(&rb, method)?.integral(lo, hi);
        (ib - ia) / (hi - lo)
    };

    // log-rate as a function of quality
    let bd_rate = {
        let swap = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| (y, x)).collect::<Vec<_>>();
        let (qa, qb) = (swap(&ra), swap(&rb));
        let lo = min_x(&qa).max(min_x(&qb));
        let hi = max_x(&qa).min(max_x(&qb));
        if !(hi > lo) {
            return Err(Error::NoOverlap);
        }
        let ia = Model::fit(&qa, method)?.integral(lo, hi);
        let ib = Model::fit(&qb, method)?.integral(lo, hi);
        let avg = (ib - ia) / (hi - lo);
        (libm::pow(10.0, avg) - 1.0) * 100.0
    };

    Ok(BdResult { bd_rate, bd_quality })
}

fn min_x(v: &[(f64, f64)]) -> f64 {
    v.iter().map(|p| p.0).fold(f64::INFINITY, f64::min)
}

fn max_x(v: &[(f64, f64)]) -> f64 {
    v.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
}

enum Model {
    /// Cubic in the normalised variable `(x − shift) / scale`.
    Poly { coef: [f64; 4], shift: f64, scale: f64 },
    Pchip { x: Vec<f64>, y: Vec<f64>, d: Vec<f64> },
}

impl Model {
    fn fit(points: &[(f64, f64)], method: BdMethod) -> Result<Model, Error> {
        match method {
            BdMethod::Cubic => fit_cubic(points),
            BdMethod::Pchip => fit_pchip(points),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match self {
            Model::Poly { coef, shift, scale } => {
                let u = (t - shift) / scale;
                ((coef[3] * u + coef[2]) * u + coef[1]) * u + coef[0]
            }
            Model::Pchip { x, y, d } => {
                let n = x.len();
                let k = match x.iter().position(|&xi| xi > t) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => n - 2,
                }
                .min(n - 2);
                let h = x[k + 1] - x[k];
                let s = (t - x[k]) / h;
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * y[k]
                    + (s3 - 2.0 * s2 + s) * h * d[k]
                    + (-2.0 * s3 + 3.0 * s2) * y[k + 1]
                    + (s3 - s2) * h * d[k + 1]
            }
        }
    }

    /// Exact integral: Simpson's rule is exact on each cubic piece.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let simpson = |a: f64, b: f64| (b - a) / 6.0 * (self.eval(a) + 4.0 * self.eval(0.5 * (a + b)) + self.eval(b));
        match self {
            Model::Poly { .. } => simpson(lo, hi),
            Model::Pchip { x, .. } => {
                let mut cuts: Vec<f64> = Vec::with_capacity(x.len() + 2);
                cuts.push(lo);
                cuts.extend(x.iter().copied().filter(|&v| v > lo && v < hi));
                cuts.push(hi);
                cuts.windows(2).map(|w| simpson(w[0], w[1])).sum()
            }
        }
    }
}

fn fit_cubic(points: &[(f64, f64)]) -> Result<Model, Error> {
    let n = points.len() as f64;
    let shift = points.iter().map(|p| p.0).sum::<f64>() / n;
    let spread = points.iter().map(|p| (p.0 - shift).abs()).fold(0.0, f64::max);
    if !(spread > 0.0) {
        return Err(Error::Degenerate);
    }
    // normal equations of the Vandermonde system in u = (x − shift) / spread
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    for &(x, y) in points {
        let u = (x - shift) / spread;
        let pw = [1.0, u, u * u, u * u * u];
        for r in 0..4 {
            atb[r] += pw[r] * y;
            for c in 0..4 {
                ata[r][c] += pw[r] * pw[c];
            }
        }
    }
    let coef = solve4(ata, atb).ok_or(Error::Degenerate)?;
    Ok(Model::Poly {
        coef,
        shift,
        scale: spread,
    })
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    let norm = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * norm {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn fit_pchip(points: &[(f64, f64)]) -> Result<Model, Error> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    if p.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Degenerate);
    }
    let x: Vec<f64> = p.iter().map(|v| v.0).collect();
    let y: Vec<f64> = p.iter().map(|v| v.1).collect();
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > (3.0 * d0).abs() {
            3.0 * d0
        } else {
            s
        }
    };
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
    } else {
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    }
    Ok(Model::Pchip { x, y, d })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> RdCurve {
        RdCurve::from_pairs(&[(500e3, 32.1), (1000e3, 35.0), (2000e3, 37.6), (4000e3, 39.5)])
    }

    #[test]
    fn identical_frames_hit_the_cap() {
        let f = PlanarFrame::filled(8, 8, 100, 128);
        let q = frame_psnr(&f, &f).unwrap();
        assert_eq!(q.psnr_avg, PSNR_CAP_DB);
        assert_eq!(q.mse_y, 0.0);
    }

    #[test]
    fn full_swing_error_is_zero_db() {
        let a = PlanarFrame::filled(8, 8, 0, 0);
        let b = PlanarFrame::filled(8, 8, 255, 255);
        let q = frame_psnr(&a, &b).unwrap();
        assert_eq!(q.mse_y, 255.0 * 255.0);
        assert_eq!(q.mse_cr, 255.0 * 255.0);
        assert!(q.psnr_avg.abs() < 1e-12);
    }

    #[test]
    fn geometry_mismatch_is_error() {
        let a = PlanarFrame::filled(8, 8, 0, 0);
        let b = PlanarFrame::filled(8, 6, 0, 0);
        assert!(frame_psnr(&a, &b).is_err());
    }

    #[test]
    fn self_comparison_is_zero() {
        for m in [BdMethod::Cubic, BdMethod::Pchip] {
            let r = bd_metrics(&curve(), &curve(), m).unwrap();
            assert!(r.bd_rate.abs() < 1e-9 && r.bd_quality.abs() < 1e-9);
        }
    }

    #[test]
    fn doubled_rate_is_plus_hundred_percent() {
        let a = curve();
        let mut b = a.clone();
        for p in &mut b.points {
            p.rate *= 2.0;
        }
        for m in [BdMethod::Cubic, BdMethod::Pchip] {
            let r = bd_metrics(&a, &b, m).unwrap();
            assert!((r.bd_rate - 100.0).abs() < 1e-6, "{m:?} {}", r.bd_rate);
            assert!(r.bd_quality < 0.0);
        }
    }

    #[test]
    fn curve_validation() {
        let short = RdCurve::from_pairs(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert!(matches!(bd_metrics(&short, &curve(), BdMethod::Cubic), Err(Error::TooFewPoints { .. })));
        let flat = RdCurve::from_pairs(&[(1.0, 1.0), (2.0, 2.0), (2.0, 3.0), (3.0, 4.0)]);
        assert_eq!(bd_metrics(&flat, &curve(), BdMethod::Cubic), Err(Error::RatesNotIncreasing));
        let far = RdCurve::from_pairs(&[(1e9, 60.0), (2e9, 61.0), (3e9, 62.0), (4e9, 63.0)]);
        assert_eq!(bd_metrics(&curve(), &far, BdMethod::Cubic), Err(Error::NoOverlap));
        let same_q = RdCurve::from_pairs(&[(500e3, 35.0), (1000e3, 35.0), (2000e3, 35.0), (4000e3, 35.0)]);
        assert!(bd_metrics(&curve(), &same_q, BdMethod::Cubic).is_err());
    }
}
