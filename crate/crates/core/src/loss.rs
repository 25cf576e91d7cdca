//! Composite L1 + edge loss used to train and parity-check the network.

use alloc::collections::BTreeMap;

use crate::scale::ScaleFactor;
use crate::Error;

/// Row-major luma array in normalised or raw units.
#[derive(Debug, Clone, Copy)]
pub struct LumaView<'a> {
    pub width: usize,
    pub height: usize,
    pub data: &'a [f32],
}

impl<'a> LumaView<'a> {
    pub fn new(width: usize, height: usize, data: &'a [f32]) -> Result<Self, Error> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch("luma length != width * height"));
        }
        Ok(LumaView { width, height, data })
    }

    /// Forward differences `(x[i+1] − x[i], y[j+1] − y[j])`, zero on the last
    /// column/row (clamp-to-edge).
    #[inline]
    fn grad(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        let v = self.data[i];
        let gx = if x + 1 < self.width { self.data[i + 1] - v } else { 0.0 };
        let gy = if y + 1 < self.height { self.data[i + self.width] - v } else { 0.0 };
        (gx, gy)
    }
}

/// Per-sample mean of `Σ_scales |x̂ − x| + λ(|∂x x̂ − ∂x x| + |∂y x̂ − ∂y x|)`.
pub fn eval_loss(
    upscaled: &BTreeMap<ScaleFactor, LumaView<'_>>,
    ground_truth: LumaView<'_>,
    lambda: f64,
) -> Result<f64, Error> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::InvalidArgument("lambda must be >= 0"));
    }
    let n = ground_truth.width * ground_truth.height;
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0f64;
    for view in upscaled.values() {
        if (view.width, view.height) != (ground_truth.width, ground_truth.height) {
            return Err(Error::ShapeMismatch("upscaled output differs from ground truth"));
        }
        for y in 0..view.height {
            for x in 0..view.width {
                let i = y * view.width + x;
                let mut term = f64::from((view.data[i] - ground_truth.data[i]).abs());
                if lambda != 0.0 {
                    let (ax, ay) = view.grad(x, y);
                    let (bx, by) = ground_truth.grad(x, y);
                    term += lambda * (f64::from((ax - bx).abs()) + f64::from((ay - by).abs()));
                }
                total += term;
            }
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn identical_inputs_have_zero_loss() {
        let x: Vec<f32> = (0..64).map(|i| i as f32 / 64.0).collect();
        let gt = LumaView::new(8, 8, &x).unwrap();
        let mut m = BTreeMap::new();
        m.insert(ScaleFactor::new(2, 1).unwrap(), gt);
        m.insert(ScaleFactor::new(3, 2).unwrap(), gt);
        assert_eq!(eval_loss(&m, gt, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_without_edge_term() {
        let x: Vec<f32> = (0..64).map(|i| (i % 7) as f32 * 0.1).collect();
        let shifted: Vec<f32> = x.iter().map(|v| v + 0.25).collect();
        let gt = LumaView::new(8, 8, &x).unwrap();
        let mut m = BTreeMap::new();
        m.insert(ScaleFactor::ONE, LumaView::new(8, 8, &shifted).unwrap());
        let l = eval_loss(&m, gt, 0.0).unwrap();
        assert!((l - 0.25).abs() < 1e-6);
        // a constant shift has no gradient difference either
        let l = eval_loss(&m, gt, 0.5).unwrap();
        assert!((l - 0.25).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let x = [0.0f32; 16];
        let y = [0.0f32; 12];
        let mut m = BTreeMap::new();
        m.insert(ScaleFactor::ONE, LumaView::new(4, 3, &y).unwrap());
        assert!(eval_loss(&m, LumaView::new(4, 4, &x).unwrap(), 0.5).is_err());
    }
}
