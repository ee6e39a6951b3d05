//! Information-form update, used to cross-check the expanded-measurement
//! update. Shares no code with it: the weighted terms are accumulated per
//! measurement and the posterior is obtained from Cholesky solves.

use nalgebra::{DMatrix, DVector};

use crate::model::{GaussianBelief, LinearModel};
use crate::{Error, Result};

fn cholesky(m: DMatrix<f64>, context: &'static str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    m.cholesky().ok_or(Error::Singular { context, condition: f64::INFINITY })
}

/// `Σ⁻¹ = Σ⁺⁻¹ + Σ_k w_k HᵀV⁻¹H`, `Σ⁻¹μ = Σ⁺⁻¹μ⁺ + Σ_k w_k HᵀV⁻¹z_k`.
pub fn info_form_update(
    belief: &GaussianBelief,
    measurements: &[DVector<f64>],
    weights: &[f64],
    model: &LinearModel,
) -> Result<GaussianBelief> {
    if measurements.is_empty() {
        return Ok(belief.clone());
    }
    let n = belief.dim();
    let prior = cholesky(belief.cov.clone(), "prior covariance")?;
    let mut info = prior.solve(&DMatrix::identity(n, n));
    let mut info_mean = prior.solve(&belief.mean);

    let v = cholesky(model.v.clone(), "measurement noise")?;
    let v_inv_h = v.solve(&model.h);
    let ht_vinv_h = model.h.transpose() * &v_inv_h;
    for (z, &w) in measurements.iter().zip(weights) {
        info += w * &ht_vinv_h;
        info_mean += w * v_inv_h.transpose() * z;
    }
    let post = cholesky(0.5 * (&info + info.transpose()), "posterior information")?;
    let cov = post.solve(&DMatrix::identity(n, n));
    let mean = post.solve(&info_mean);
    Ok(GaussianBelief::new(mean, 0.5 * (&cov + cov.transpose())))
}
