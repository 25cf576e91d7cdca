//! Slow, independent reference implementations used as test oracles.
#![allow(dead_code)]

use dvp_core::{FilterKind, PlanarFrame, Plane};

/// Kernel formulas written out separately from the library.
pub fn oracle_kernel(filter: FilterKind, x: f64) -> f64 {
    let t = x.abs();
    match filter {
        FilterKind::Bilinear => {
            if t < 1.0 {
                1.0 - t
            } else {
                0.0
            }
        }
        FilterKind::Bicubic { a } => {
            let a = a as f64;
            if t < 1.0 {
                (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
            } else if t < 2.0 {
                a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
            } else {
                0.0
            }
        }
        FilterKind::Lanczos { taps } => {
            let n = taps as f64;
            if t == 0.0 {
                1.0
            } else if t < n {
                let p = std::f64::consts::PI;
                (p * t).sin() / (p * t) * (p * t / n).sin() / (p * t / n)
            } else {
                0.0
            }
        }
    }
}

fn radius(filter: FilterKind) -> f64 {
    match filter {
        FilterKind::Bilinear => 1.0,
        FilterKind::Bicubic { .. } => 2.0,
        FilterKind::Lanczos { taps } => taps as f64,
    }
}

/// Direct 2-D evaluation of one output sample: every source sample inside the
/// (stretched) footprint contributes `k(dx)·k(dy)`, edge samples repeat, and
/// the weight total is normalised away.
pub fn direct_sample(src: &[f64], w: usize, h: usize, tw: usize, th: usize, filter: FilterKind, ox: usize, oy: usize) -> f64 {
    let sx = w as f64 / tw as f64;
    let sy = h as f64 / th as f64;
    let stretch_x = sx.max(1.0);
    let stretch_y = sy.max(1.0);
    let cx = (ox as f64 + 0.5) * sx - 0.5;
    let cy = (oy as f64 + 0.5) * sy - 0.5;
    let rx = radius(filter) * stretch_x;
    let ry = radius(filter) * stretch_y;
    let mut acc = 0.0;
    let mut norm = 0.0;
    let x0 = (cx - rx).floor() as i64 - 1;
    let x1 = (cx + rx).ceil() as i64 + 1;
    let y0 = (cy - ry).floor() as i64 - 1;
    let y1 = (cy + ry).ceil() as i64 + 1;
    for yy in y0..=y1 {
        let ky = oracle_kernel(filter, (yy as f64 - cy) / stretch_y);
        if ky == 0.0 {
            continue;
        }
        let syi = yy.clamp(0, h as i64 - 1) as usize;
        for xx in x0..=x1 {
            let kx = oracle_kernel(filter, (xx as f64 - cx) / stretch_x);
            if kx == 0.0 {
                continue;
            }
            let sxi = xx.clamp(0, w as i64 - 1) as usize;
            acc += kx * ky * src[syi * w + sxi];
            norm += kx * ky;
        }
    }
    acc / norm
}

pub fn direct_resize(plane: &Plane, tw: usize, th: usize, filter: FilterKind) -> Vec<u8> {
    let src: Vec<f64> = plane.data.iter().map(|&v| v as f64).collect();
    let mut out = Vec::with_capacity(tw * th);
    for oy in 0..th {
        for ox in 0..tw {
            let v = direct_sample(&src, plane.width, plane.height, tw, th, filter, ox, oy);
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Pruning rule applied pairwise: point `i` is dropped when another point
/// has no more rate and less distortion, or the same (rate, distortion) and
/// comes first in tie order (larger scale first). Returns survivor indices
/// in rate order.
pub fn brute_monotone(points: &[(f64, f64, u32)]) -> Vec<usize> {
    let n = points.len();
    let precedes = |j: usize, i: usize| {
        let (rj, dj, sj) = points[j];
        let (ri, di, si) = points[i];
        rj < ri || (rj == ri && (dj < di || (dj == di && (sj > si || (sj == si && j < i)))))
    };
    let mut keep: Vec<usize> = (0..n)
        .filter(|&i| {
            !(0..n).any(|j| {
                j != i && points[j].0 <= points[i].0 && (points[j].1 < points[i].1 || (points[j].1 == points[i].1 && precedes(j, i)))
            })
        })
        .collect();
    keep.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    keep
}

/// O(n³) lower hull: an interior point survives iff it lies strictly below
/// the chord of every pair of points that straddles it.
pub fn brute_hull(points: &[(f64, f64)]) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    (0..n)
        .filter(|&k| {
            if k == 0 || k == n - 1 {
                return true;
            }
            (0..k).all(|i| {
                (k + 1..n).all(|j| {
                    let (ri, di) = points[i];
                    let (rk, dk) = points[k];
                    let (rj, dj) = points[j];
                    dk * (rj - ri) < di * (rj - rk) + dj * (rk - ri)
                })
            })
        })
        .collect()
}

pub fn naive_psnr(a: &PlanarFrame, b: &PlanarFrame) -> f64 {
    let mut sum = 0.0;
    for (pa, pb) in [(&a.y, &b.y), (&a.cb, &b.cb), (&a.cr, &b.cr)] {
        let mut se = 0.0f64;
        for i in 0..pa.data.len() {
            let d = pa.data[i] as f64 - pb.data[i] as f64;
            se += d * d;
        }
        let mse = se / pa.data.len() as f64;
        sum += if mse == 0.0 { 100.0 } else { (10.0 * (65025.0 / mse).log10()).min(100.0) };
    }
    sum / 3.0
}

/// Cubic through four points (Lagrange form), integrated with a dense
/// trapezoid rule.
pub fn lagrange_trapezoid(pts: &[(f64, f64); 4], lo: f64, hi: f64, steps: usize) -> f64 {
    let eval = |x: f64| {
        let mut s = 0.0;
        for i in 0..4 {
            let mut l = 1.0;
            for j in 0..4 {
                if i != j {
                    l *= (x - pts[j].0) / (pts[i].0 - pts[j].0);
                }
            }
            s += l * pts[i].1;
        }
        s
    };
    let h = (hi - lo) / steps as f64;
    let mut acc = 0.5 * (eval(lo) + eval(hi));
    for k in 1..steps {
        acc += eval(lo + k as f64 * h);
    }
    acc * h
}

/// Bjontegaard deltas from four-point curves via [`lagrange_trapezoid`].
pub fn oracle_bd(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> (f64, f64) {
    let lr = |c: &[(f64, f64); 4]| c.map(|(r, q)| (r.log10(), q));
    let (la, lb) = (lr(a), lr(b));
    let span = |c: &[(f64, f64); 4]| {
        let lo = c.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let steps = 200_000;
    let (alo, ahi) = span(&la);
    let (blo, bhi) = span(&lb);
    let (lo, hi) = (alo.max(blo), ahi.min(bhi));
    let dq = (lagrange_trapezoid(&lb, lo, hi, steps) - lagrange_trapezoid(&la, lo, hi, steps)) / (hi - lo);
    let swap = |c: &[(f64, f64); 4]| c.map(|(x, y)| (y, x));
    let (qa, qb) = (swap(&la), swap(&lb));
    let (alo, ahi) = span(&qa);
    let (blo, bhi) = span(&qb);
    let (lo, hi) = (alo.max(blo), ahi.min(bhi));
    let avg = (lagrange_trapezoid(&qb, lo, hi, steps) - lagrange_trapezoid(&qa, lo, hi, steps)) / (hi - lo);
    ((10f64.powf(avg) - 1.0) * 100.0, dq)
}
