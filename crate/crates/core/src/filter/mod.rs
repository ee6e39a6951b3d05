//! Prediction and measurement updates.
//!
//! All updates are pure: a prior belief goes in, a posterior comes out.
//! Covariances are symmetrised after every step and, by default, updated in
//! Joseph form.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::assoc::WeightMatrix;
use crate::linalg::{symmetrize, SpdFactor};
use crate::model::{GaussianBelief, LinearModel};
use crate::{Error, Result};

pub mod oracle;

/// Weights are clamped to at least this before dividing `V` by them.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Tolerance on `Σ w ≤ 1` for the JPDAF update.
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceForm {
    /// `(I−KH)Σ(I−KH)ᵀ + KVKᵀ`
    #[default]
    Joseph,
    /// `(I−KH)Σ`
    Plain,
}

/// `μ⁺ = Fμ + Gu`, `Σ⁺ = FΣFᵀ + W`.
pub fn predict(belief: &GaussianBelief, model: &LinearModel, input: Option<&DVector<f64>>) -> GaussianBelief {
    let mut mean = &model.f * &belief.mean;
    if let Some(u) = input {
        mean += &model.g * u;
    }
    let mut cov = &model.f * &belief.cov * model.f.transpose() + &model.w;
    symmetrize(&mut cov);
    GaussianBelief::new(mean, cov)
}

/// Gain step shared by every update rule: `K = ΣHᵀ(HΣHᵀ+V)⁻¹`, `μ + Kν`.
fn gain_update(
    belief: &GaussianBelief,
    h: &DMatrix<f64>,
    v: &DMatrix<f64>,
    innovation: &DVector<f64>,
    form: CovarianceForm,
) -> Result<GaussianBelief> {
    let (mean, cov, _) = gain_update_parts(belief, h, v, innovation, form)?;
    Ok(GaussianBelief::new(mean, cov))
}

fn gain_update_parts(
    belief: &GaussianBelief,
    h: &DMatrix<f64>,
    v: &DMatrix<f64>,
    innovation: &DVector<f64>,
    form: CovarianceForm,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let ph_t = &belief.cov * h.transpose();
    let mut s = h * &ph_t + v;
    symmetrize(&mut s);
    let factor = SpdFactor::new(&s, "innovation covariance")?;
    // K = P Hᵀ S⁻¹  ⇔  S Kᵀ = H P.
    let gain = factor.solve(&ph_t.transpose()).transpose();
    let mean = &belief.mean + &gain * innovation;
    let n = belief.dim();
    let i_kh = DMatrix::identity(n, n) - &gain * h;
    let mut cov = match form {
        CovarianceForm::Joseph => &i_kh * &belief.cov * i_kh.transpose() + &gain * v * gain.transpose(),
        CovarianceForm::Plain => &i_kh * &belief.cov,
    };
    symmetrize(&mut cov);
    Ok((mean, cov, gain))
}

fn check_dims(belief: &GaussianBelief, z: &DVector<f64>, model: &LinearModel) -> Result<()> {
    if belief.dim() != model.state_dim() || z.len() != model.meas_dim() {
        return Err(Error::Dimension(format!(
            "belief dim {}, measurement dim {}, model {}x{}",
            belief.dim(),
            z.len(),
            model.meas_dim(),
            model.state_dim()
        )));
    }
    Ok(())
}

/// Standard Kalman update with one measurement (Joseph form).
pub fn kf_update(belief: &GaussianBelief, z: &DVector<f64>, model: &LinearModel) -> Result<GaussianBelief> {
    check_dims(belief, z, model)?;
    let innovation = z - &model.h * &belief.mean;
    gain_update(belief, &model.h, &model.v, &innovation, CovarianceForm::Joseph)
}

/// Stacked observation model for one track: each weighted measurement
/// appears once with noise `V / w`.
#[derive(Debug, Clone)]
pub struct ExpandedMeasurement {
    pub z_bar: DVector<f64>,
    pub h_bar: DMatrix<f64>,
    pub v_bar: DMatrix<f64>,
}

impl ExpandedMeasurement {
    pub fn build(measurements: &[DVector<f64>], weights: &[f64], model: &LinearModel) -> Result<Self> {
        if measurements.len() != weights.len() {
            return Err(Error::Contract(format!(
                "{} measurements but {} weights",
                measurements.len(),
                weights.len()
            )));
        }
        let (m, n) = model.h.shape();
        let count = measurements.len();
        let mut z_bar = DVector::zeros(m * count);
        let mut h_bar = DMatrix::zeros(m * count, n);
        let mut v_bar = DMatrix::zeros(m * count, m * count);
        for (b, (z, &w)) in measurements.iter().zip(weights).enumerate() {
            if z.len() != m {
                return Err(Error::Dimension(format!("measurement {b} has dim {}, expected {m}", z.len())));
            }
            let w = w.max(WEIGHT_FLOOR);
            z_bar.rows_mut(b * m, m).copy_from(z);
            h_bar.view_mut((b * m, 0), (m, n)).copy_from(&model.h);
            v_bar.view_mut((b * m, b * m), (m, m)).copy_from(&(&model.v / w));
        }
        Ok(Self { z_bar, h_bar, v_bar })
    }
}

fn check_positive_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::Contract(format!("update weight {w} must be positive")));
    }
    Ok(())
}

/// Update with several weighted measurements through the expanded model.
pub fn pkf_update(
    belief: &GaussianBelief,
    measurements: &[DVector<f64>],
    weights: &[f64],
    model: &LinearModel,
) -> Result<GaussianBelief> {
    pkf_update_with(belief, measurements, weights, model, CovarianceForm::Joseph)
}

pub fn pkf_update_with(
    belief: &GaussianBelief,
    measurements: &[DVector<f64>],
    weights: &[f64],
    model: &LinearModel,
    form: CovarianceForm,
) -> Result<GaussianBelief> {
    if measurements.is_empty() {
        return Err(Error::Contract("pkf update needs at least one measurement".into()));
    }
    check_positive_weights(weights)?;
    if belief.dim() != model.state_dim() {
        return Err(Error::Dimension(format!("belief dim {} vs model {}", belief.dim(), model.state_dim())));
    }
    let ex = ExpandedMeasurement::build(measurements, weights, model)?;
    let innovation = &ex.z_bar - &ex.h_bar * &belief.mean;
    gain_update(belief, &ex.h_bar, &ex.v_bar, &innovation, form)
}

/// JPDAF update: standard gain, weight-averaged innovation, and the
/// moment-matched covariance. The missed-detection mass is `1 − Σ w`.
pub fn jpdaf_update(
    belief: &GaussianBelief,
    measurements: &[DVector<f64>],
    weights: &[f64],
    model: &LinearModel,
) -> Result<GaussianBelief> {
    if measurements.len() != weights.len() {
        return Err(Error::Contract("measurement and weight counts differ".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Contract(format!("jpdaf weight {w} is negative")));
    }
    let total: f64 = weights.iter().sum();
    if total > 1.0 + WEIGHT_SUM_TOL {
        return Err(Error::Contract(format!("jpdaf weights sum to {total} > 1")));
    }
    let missed = (1.0 - total).max(0.0);
    if measurements.is_empty() || total == 0.0 {
        return Ok(belief.clone());
    }
    let hx = &model.h * &belief.mean;
    let mut combined = DVector::zeros(model.meas_dim());
    let mut spread = DMatrix::zeros(model.meas_dim(), model.meas_dim());
    for (z, &w) in measurements.iter().zip(weights) {
        check_dims(belief, z, model)?;
        let nu = z - &hx;
        combined.axpy(w, &nu, 1.0);
        spread.ger(w, &nu, &nu, 1.0);
    }
    spread.ger(-1.0, &combined, &combined, 1.0);

    let (mean, mut cov, gain) = gain_update_parts(belief, &model.h, &model.v, &combined, CovarianceForm::Joseph)?;
    cov *= 1.0 - missed;
    cov += &belief.cov * missed;
    cov.quadform_tr(1.0, &gain, &spread, 1.0);
    symmetrize(&mut cov);
    Ok(GaussianBelief::new(mean, cov))
}

/// PMHT update: one KF step with the pooled measurement `Σ w z / Σ w` and
/// noise `V / Σ w`. Returns the prior when all weights are zero.
pub fn pmht_update(
    belief: &GaussianBelief,
    measurements: &[DVector<f64>],
    weights: &[f64],
    model: &LinearModel,
) -> Result<GaussianBelief> {
    if measurements.len() != weights.len() {
        return Err(Error::Contract("measurement and weight counts differ".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Ok(belief.clone());
    }
    let mut pooled = DVector::zeros(model.meas_dim());
    for (z, &w) in measurements.iter().zip(weights) {
        check_dims(belief, z, model)?;
        pooled += w * z;
    }
    pooled /= total;
    let v = &model.v / total.max(WEIGHT_FLOOR);
    let innovation = pooled - &model.h * &belief.mean;
    gain_update(belief, &model.h, &v, &innovation, CovarianceForm::Joseph)
}

/// Per-track `(measurement index, weight)` lists that passed the weight threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateBatch {
    pub per_track: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl UpdateBatch {
    /// Keeps entries with `w > tau_weight`, in ascending measurement order.
    /// `track_ids[j]` names column `j`. Weights are not renormalised.
    pub fn from_weights(weights: &WeightMatrix, track_ids: &[usize], tau_weight: f64) -> Self {
        let mut per_track = BTreeMap::new();
        for (j, &id) in track_ids.iter().enumerate() {
            let kept: Vec<(usize, f64)> = weights
                .w
                .column(j)
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > tau_weight)
                .map(|(k, &w)| (k, w))
                .collect();
            if !kept.is_empty() {
                per_track.insert(id, kept);
            }
        }
        Self { per_track }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_healthy_covariance, min_eigenvalue};
    use crate::model::sort_motion_model;
    use crate::selftest::{oracle as so, random_belief, random_model};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_model(v: f64) -> LinearModel {
        LinearModel::new(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, v),
        )
        .unwrap()
    }

    fn scalar_belief(mean: f64, var: f64) -> GaussianBelief {
        GaussianBelief::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn identity_dynamics_leave_belief_unchanged() {
        let b = scalar_belief(2.0, 3.0);
        let p = predict(&b, &scalar_model(1.0), None);
        assert_eq!(p, b);
    }

    #[test]
    fn constant_velocity_shift() {
        let b = GaussianBelief::new(
            DVector::from_vec(vec![0.0, 0.0, 4.0, 1.0, 1.0, 2.0, 0.0]),
            DMatrix::identity(7, 7),
        );
        let m = sort_motion_model();
        let p = predict(&b, &m, None);
        assert_eq!(p.mean.as_slice(), &[1.0, 2.0, 4.0, 1.0, 1.0, 2.0, 0.0]);
        // G = 0: any input leaves the mean alone.
        let q = predict(&b, &m, Some(&DVector::from_element(1, 5.0)));
        assert_eq!(q.mean, p.mean);
    }

    #[test]
    fn predicted_covariance_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = random_model(&mut rng, 7, 4);
        let b = random_belief(&mut rng, 7);
        let p = predict(&b, &model, None);
        let expected = &model.f * &b.cov * model.f.transpose() + &model.w;
        assert!((&p.cov - expected).amax() < 1e-12);
    }

    #[test]
    fn kf_scalar_hand_case() {
        let post = kf_update(&scalar_belief(0.0, 1.0), &vec1(2.0), &scalar_model(1.0)).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kf_uninformative_and_certain_limits() {
        let prior = scalar_belief(1.0, 2.0);
        let post = kf_update(&prior, &vec1(50.0), &scalar_model(1e12)).unwrap();
        assert!((post.mean[0] - 1.0).abs() < 1e-3);
        assert!((post.cov[(0, 0)] - 2.0).abs() < 2e-3);
        let certain = scalar_belief(1.0, 0.0);
        let post = kf_update(&certain, &vec1(50.0), &scalar_model(1.0)).unwrap();
        assert_eq!(post.mean[0], 1.0);
    }

    #[test]
    fn kf_singular_innovation_errors() {
        let err = kf_update(&scalar_belief(0.0, 0.0), &vec1(1.0), &scalar_model(0.0));
        assert!(matches!(err, Err(Error::Singular { .. })));
    }

    #[test]
    fn pkf_single_unit_weight_is_kf() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(&mut rng, 5, 3);
        let b = random_belief(&mut rng, 5);
        let z = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let a = pkf_update(&b, &[z.clone()], &[1.0], &model).unwrap();
        let k = kf_update(&b, &z, &model).unwrap();
        assert!((&a.mean - &k.mean).amax() <= 1e-12);
        assert!((&a.cov - &k.cov).amax() <= 1e-12);
    }

    #[test]
    fn pkf_two_half_weights_equal_one_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = random_model(&mut rng, 4, 2);
        let b = random_belief(&mut rng, 4);
        let z = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let a = pkf_update(&b, &[z.clone(), z.clone()], &[0.5, 0.5], &model).unwrap();
        let k = kf_update(&b, &z, &model).unwrap();
        assert!((&a.mean - &k.mean).amax() < 1e-10);
        assert!((&a.cov - &k.cov).amax() < 1e-10);
    }

    #[test]
    fn pkf_matches_information_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = random_model(&mut rng, 6, 3);
        let b = random_belief(&mut rng, 6);
        let zs: Vec<_> = (0..3).map(|_| DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0))).collect();
        let ws = [0.3, 0.9, 0.55];
        let a = pkf_update(&b, &zs, &ws, &model).unwrap();
        let o = oracle::info_form_update(&b, &zs, &ws, &model).unwrap();
        let scale = o.cov.amax().max(1.0);
        assert!((&a.mean - &o.mean).amax() / scale < 1e-8);
        assert!((&a.cov - &o.cov).amax() / scale < 1e-8);
    }

    #[test]
    fn pkf_rejects_bad_inputs() {
        let b = scalar_belief(0.0, 1.0);
        let m = scalar_model(1.0);
        assert!(matches!(pkf_update(&b, &[vec1(1.0)], &[0.0], &m), Err(Error::Contract(_))));
        assert!(matches!(pkf_update(&b, &[], &[], &m), Err(Error::Contract(_))));
        assert!(matches!(pkf_update(&b, &[vec1(1.0)], &[0.5, 0.5], &m), Err(Error::Contract(_))));
    }

    #[test]
    fn plain_and_joseph_forms_agree_in_exact_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = random_model(&mut rng, 4, 2);
        let b = random_belief(&mut rng, 4);
        let zs = [DVector::from_vec(vec![0.5, -0.2]), DVector::from_vec(vec![0.1, 0.3])];
        let a = pkf_update_with(&b, &zs, &[0.4, 0.6], &model, CovarianceForm::Joseph).unwrap();
        let p = pkf_update_with(&b, &zs, &[0.4, 0.6], &model, CovarianceForm::Plain).unwrap();
        assert!((&a.cov - &p.cov).amax() < 1e-9);
    }

    #[test]
    fn jpdaf_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = random_model(&mut rng, 4, 2);
        let b = random_belief(&mut rng, 4);
        let z = DVector::from_vec(vec![0.7, -1.1]);
        let a = jpdaf_update(&b, &[z.clone()], &[1.0], &model).unwrap();
        let k = kf_update(&b, &z, &model).unwrap();
        assert!((&a.mean - &k.mean).amax() < 1e-12);
        assert!((&a.cov - &k.cov).amax() < 1e-12);
        let none = jpdaf_update(&b, &[z.clone()], &[0.0], &model).unwrap();
        assert_eq!(none, b);
        assert!(jpdaf_update(&b, &[z.clone(), z], &[0.7, 0.6], &model).is_err());
    }

    #[test]
    fn jpdaf_matches_mixture_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = random_model(&mut rng, 4, 2);
        let b = random_belief(&mut rng, 4);
        let zs = [DVector::from_vec(vec![0.7, -1.1]), DVector::from_vec(vec![-0.4, 0.9])];
        let ws = [0.45, 0.35];
        let a = jpdaf_update(&b, &zs, &ws, &model).unwrap();
        let o = so::jpdaf_mixture_moments(&b, &zs, &ws, &model);
        assert!((&a.mean - &o.mean).amax() < 1e-10);
        assert!((&a.cov - &o.cov).amax() < 1e-10);
    }

    #[test]
    fn pmht_cases() {
        let prior = scalar_belief(0.0, 1.0);
        let m = scalar_model(1.0);
        let a = pmht_update(&prior, &[vec1(2.0)], &[1.0], &m).unwrap();
        assert!((a.mean[0] - 1.0).abs() < 1e-15);
        let sym = pmht_update(&prior, &[vec1(-3.0), vec1(3.0)], &[0.4, 0.4], &m).unwrap();
        assert!(sym.mean[0].abs() < 1e-15);
        let skip = pmht_update(&prior, &[vec1(-3.0)], &[0.0], &m).unwrap();
        assert_eq!(skip, prior);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(&mut rng, 4, 2);
        let b = random_belief(&mut rng, 4);
        let zs = [DVector::from_vec(vec![0.7, -1.1]), DVector::from_vec(vec![-0.4, 0.9])];
        let got = pmht_update(&b, &zs, &[0.2, 0.5], &model).unwrap();
        let want = so::pmht_pooled_direct(&b, &zs, &[0.2, 0.5], &model);
        assert!((&got.mean - &want.mean).amax() < 1e-10);
        assert!((&got.cov - &want.cov).amax() < 1e-10);
    }

    #[test]
    fn trust_grows_monotonically_with_weight() {
        let prior = scalar_belief(0.0, 2.0);
        let m = scalar_model(1.0);
        let kf = kf_update(&prior, &vec1(3.0), &m).unwrap().mean[0];
        let mut last = f64::INFINITY;
        for i in 1..=100 {
            let w = i as f64 / 100.0;
            let mean = pkf_update(&prior, &[vec1(3.0)], &[w], &m).unwrap().mean[0];
            let gap = (kf - mean).abs();
            assert!(gap <= last + 1e-15);
            last = gap;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn update_batch_thresholds_columns() {
        let w = WeightMatrix {
            w: DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.2, 0.8]),
            clutter: None,
            mode: crate::assoc::WeightMode::Pkf,
            degenerate_rows: vec![],
        };
        let batch = UpdateBatch::from_weights(&w, &[10, 20], 0.25);
        assert_eq!(batch.per_track[&10], vec![(0, 0.7)]);
        assert_eq!(batch.per_track[&20], vec![(0, 0.3), (1, 0.8)]);
    }

    proptest! {
        #[test]
        fn posterior_healthy_and_order_invariant(seed in any::<u64>(), count in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = random_model(&mut rng, 5, 2);
            let b = predict(&random_belief(&mut rng, 5), &model, None);
            let zs: Vec<_> = (0..count).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0))).collect();
            let ws: Vec<f64> = (0..count).map(|_| rng.random_range(0.25..1.0)).collect();
            let post = pkf_update(&b, &zs, &ws, &model).unwrap();
            prop_assert!(is_healthy_covariance(&post.cov));

            let mut rz = zs.clone();
            let mut rw = ws.clone();
            rz.reverse();
            rw.reverse();
            let rev = pkf_update(&b, &rz, &rw, &model).unwrap();
            prop_assert!((&rev.mean - &post.mean).amax() < 1e-12 * post.mean.amax().max(1.0));
            prop_assert!((&rev.cov - &post.cov).amax() < 1e-12 * post.cov.amax().max(1.0));

            // Measured subspace shrinks.
            let h = &model.h;
            let before = h * &b.cov * h.transpose();
            let after = h * &post.cov * h.transpose();
            prop_assert!(min_eigenvalue(&(before - after)) >= -1e-9);

            let total: f64 = ws.iter().sum();
            let jw: Vec<f64> = ws.iter().map(|w| w / total * 0.9).collect();
            let j = jpdaf_update(&b, &zs, &jw, &model).unwrap();
            prop_assert!(is_healthy_covariance(&j.cov));
            let p = pmht_update(&b, &zs, &ws, &model).unwrap();
            prop_assert!(is_healthy_covariance(&p.cov));
        }
    }
}
