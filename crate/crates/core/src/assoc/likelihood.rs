use nalgebra::DVector;

use crate::linalg;
use crate::model::{Bbox, GaussianBelief, LinearModel};
use crate::Result;

/// Scale of the `exp(−α / IoU)` likelihood.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// Intersection over union of two boxes.
pub fn iou(a: &Bbox, b: &Bbox) -> f64 {
    let iw = (a.right().min(b.right()) - a.left.max(b.left)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.top.max(b.top)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// `exp(−α / iou)`, with the `iou → 0⁺` limit `0`.
pub fn likelihood_from_iou(iou_score: f64, alpha: f64) -> f64 {
    if iou_score <= 0.0 {
        0.0
    } else {
        (-alpha / iou_score).exp()
    }
}

/// `ln N(z; Hμ, HΣHᵀ + V)`.
pub fn gaussian_ln_likelihood(z: &DVector<f64>, belief: &GaussianBelief, model: &LinearModel) -> Result<f64> {
    let h = &model.h;
    let s = h * &belief.cov * h.transpose() + &model.v;
    linalg::gaussian_ln_pdf(z, &(h * &belief.mean), &s)
}

/// Density of `z` under the predicted measurement distribution.
pub fn gaussian_likelihood(z: &DVector<f64>, belief: &GaussianBelief, model: &LinearModel) -> Result<f64> {
    gaussian_ln_likelihood(z, belief, model).map(f64::exp)
}
