use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{constant_velocity_model, Scenario};
use crate::assoc::{jpdaf_weights_with, pmht_weights, solve_min_cost, LikelihoodMatrix, WeightMatrix, WeightOptions};
use crate::filter::{jpdaf_update, kf_update, pkf_update, pmht_update, predict};
use crate::linalg::{is_healthy_covariance, SpdFactor};
use crate::model::{GaussianBelief, LinearModel};
use crate::par::Execution;
use crate::{Error, Result};

/// Tracks whose mean error exceeds this many meters count as failed.
pub const FAILURE_ERROR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Binary,
    Pmht,
    Jpdaf,
    Pkf,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Binary, Method::Pmht, Method::Jpdaf, Method::Pkf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Binary => "binary",
            Method::Pmht => "pmht",
            Method::Jpdaf => "jpdaf",
            Method::Pkf => "pkf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" | "kf" => Ok(Method::Binary),
            "pmht" => Ok(Method::Pmht),
            "jpdaf" => Ok(Method::Jpdaf),
            "pkf" => Ok(Method::Pkf),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub pos_process_var: f64,
    pub vel_process_var: f64,
    /// Measurement variance assumed by the filter; the scenario's by default.
    pub meas_noise_var: Option<f64>,
    pub init_pos_var: f64,
    pub init_vel_var: f64,
    /// Gate probability for the gated methods (JPDAF, PKF and, if enabled, PMHT).
    pub gate_probability: f64,
    pub pmht_gated: bool,
    /// PKF drops measurements at or below this weight.
    pub pkf_min_weight: f64,
    pub exec: Execution,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            pos_process_var: 0.0,
            vel_process_var: 0.01,
            meas_noise_var: None,
            init_pos_var: 0.1,
            init_vel_var: 0.01,
            gate_probability: 0.99,
            pmht_gated: true,
            pkf_min_weight: 0.0,
            exec: Execution::Sequential,
        }
    }
}

impl FilterConfig {
    pub fn model_for(&self, scenario_var: f64) -> LinearModel {
        let r = self.meas_noise_var.unwrap_or(scenario_var).max(1e-9);
        constant_velocity_model(1.0, self.pos_process_var, self.vel_process_var, r)
    }

    /// Squared Mahalanobis gate for a 2-dimensional measurement.
    pub fn gate(&self) -> f64 {
        -2.0 * (1.0 - self.gate_probability).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub method: Method,
    pub per_object_error: Vec<f64>,
    pub average_error: f64,
    pub failed_tracks: usize,
    pub update_ms_per_frame: f64,
    /// Posterior covariances that were asymmetric, indefinite or non-finite.
    pub covariance_violations: usize,
    /// Tracks whose state became non-finite; they keep their last finite estimate.
    pub diverged_tracks: usize,
}

pub fn run_tracker(scenario: &Scenario, method: Method, config: &FilterConfig) -> Result<TrackingReport> {
    run_tracker_with_estimates(scenario, method, config).map(|(r, _)| r)
}

/// Tracks start at the true state of frame 0 (objects are known at start).
pub(super) fn initial_beliefs(scenario: &Scenario, config: &FilterConfig) -> Vec<GaussianBelief> {
    let sc = &scenario.config;
    if scenario.frames.is_empty() {
        return Vec::new();
    }
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![
        config.init_pos_var,
        config.init_pos_var,
        config.init_vel_var,
        config.init_vel_var,
    ]));
    sc.phases()
        .iter()
        .map(|&p| {
            let x = sc.truth(p, 0);
            let v = sc.truth_velocity(p, 0);
            GaussianBelief::new(DVector::from_vec(vec![x[0], x[1], v[0], v[1]]), cov.clone())
        })
        .collect()
}

/// Predicted measurement covariance factor per track, shared by all measurements.
struct Innovation {
    center: DVector<f64>,
    factor: SpdFactor,
    ln_norm: f64,
}

impl Innovation {
    fn new(b: &GaussianBelief, model: &LinearModel) -> Result<Self> {
        let mut s = &model.h * &b.cov * model.h.transpose() + &model.v;
        crate::linalg::symmetrize(&mut s);
        let factor = SpdFactor::new(&s, "predicted measurement covariance")?;
        let ln_norm = -0.5 * (s.nrows() as f64 * (2.0 * std::f64::consts::PI).ln() + factor.ln_determinant());
        Ok(Self { center: &model.h * &b.mean, factor, ln_norm })
    }

    /// `(squared Mahalanobis distance, ln density)`.
    fn score(&self, z: &DVector<f64>) -> (f64, f64) {
        let r = z - &self.center;
        let d2 = r.dot(&self.factor.solve_vec(&r));
        (d2, self.ln_norm - 0.5 * d2)
    }
}

/// Runs one method over a scenario and also returns the per-frame position
/// estimates (`frames × objects`).
pub fn run_tracker_with_estimates(
    scenario: &Scenario,
    method: Method,
    config: &FilterConfig,
) -> Result<(TrackingReport, Vec<Vec<[f64; 2]>>)> {
    let sc = &scenario.config;
    let model = config.model_for(sc.meas_noise_var);
    let lambda = sc.lambda.max(1e-12);
    let gate = config.gate();
    let n = sc.n_objects;
    let opts = WeightOptions { exec: config.exec, ..Default::default() };

    let mut beliefs = initial_beliefs(scenario, config);
    let mut diverged = vec![false; n];
    let mut error_sum = vec![0.0f64; n];
    let mut estimates = Vec::with_capacity(scenario.frames.len());
    let mut violations = 0usize;
    let mut update_secs = 0.0f64;

    for (t, frame) in scenario.frames.iter().enumerate() {
        if t > 0 {
            for (b, &dead) in beliefs.iter_mut().zip(&diverged) {
                if !dead {
                    *b = predict(b, &model, None);
                }
            }
        }
        let zs: Vec<DVector<f64>> = frame.detections.iter().map(|d| DVector::from_row_slice(&d.pos)).collect();

        let started = Instant::now();
        let posteriors = associate_and_update(&beliefs, &zs, method, &model, sc.p_detect, lambda, gate, config, &opts)?;
        update_secs += started.elapsed().as_secs_f64();

        for (j, post) in posteriors.into_iter().enumerate() {
            if diverged[j] {
                continue;
            }
            match post {
                Some(p) if p.is_finite() => {
                    if !is_healthy_covariance(&p.cov) {
                        violations += 1;
                    }
                    beliefs[j] = p;
                }
                Some(_) => {
                    log::warn!("{method} track {j} diverged at frame {t}");
                    diverged[j] = true;
                }
                None => {}
            }
        }

        let est: Vec<[f64; 2]> = beliefs.iter().map(|b| [b.mean[0], b.mean[1]]).collect();
        for j in 0..n {
            error_sum[j] += ((est[j][0] - frame.truth[j][0]).powi(2) + (est[j][1] - frame.truth[j][1]).powi(2)).sqrt();
        }
        estimates.push(est);
    }

    let frames = scenario.frames.len().max(1) as f64;
    let per_object_error: Vec<f64> = error_sum.iter().map(|e| e / frames).collect();
    let average_error = if n == 0 { 0.0 } else { per_object_error.iter().sum::<f64>() / n as f64 };
    let failed_tracks = per_object_error
        .iter()
        .zip(&diverged)
        .filter(|(e, d)| **d || **e > FAILURE_ERROR)
        .count();
    let report = TrackingReport {
        method,
        per_object_error,
        average_error,
        failed_tracks,
        update_ms_per_frame: 1e3 * update_secs / frames,
        covariance_violations: violations,
        diverged_tracks: diverged.iter().filter(|d| **d).count(),
    };
    Ok((report, estimates))
}

/// Posterior per track for one frame (`None` leaves the track unchanged).
#[allow(clippy::too_many_arguments)]
fn associate_and_update(
    beliefs: &[GaussianBelief],
    zs: &[DVector<f64>],
    method: Method,
    model: &LinearModel,
    p_detect: f64,
    lambda: f64,
    gate: f64,
    config: &FilterConfig,
    opts: &WeightOptions,
) -> Result<Vec<Option<GaussianBelief>>> {
    let n = beliefs.len();
    let m = zs.len();
    let mut posteriors = vec![None; n];
    if m == 0 || n == 0 {
        return Ok(posteriors);
    }
    let innovations: Vec<Innovation> = beliefs.iter().map(|b| Innovation::new(b, model)).collect::<Result<_>>()?;
    let mut d2 = DMatrix::zeros(m, n);
    let mut ln_q = DMatrix::zeros(m, n);
    for (j, inn) in innovations.iter().enumerate() {
        for (k, z) in zs.iter().enumerate() {
            let (d, l) = inn.score(z);
            d2[(k, j)] = d;
            ln_q[(k, j)] = l;
        }
    }

    match method {
        Method::Binary => {
            for (k, j) in solve_min_cost(&ln_q.map(|l| -l)) {
                posteriors[j] = Some(kf_update(&beliefs[j], &zs[k], model)?);
            }
        }
        Method::Pmht => {
            let w = if config.pmht_gated {
                let gated = DMatrix::from_fn(m, n, |k, j| if d2[(k, j)] <= gate { ln_q[(k, j)].exp() } else { 0.0 });
                let mut w = pmht_weights(&LikelihoodMatrix::new(gated)?)?;
                // Rows with nothing in any gate carry no information.
                for &k in &w.degenerate_rows {
                    w.w.row_mut(k).fill(0.0);
                }
                w
            } else {
                // Shift each row by its max before exponentiating so distant
                // measurements keep their relative likelihoods.
                let mut shifted = ln_q.clone();
                for mut row in shifted.row_iter_mut() {
                    let top = row.max();
                    row.apply(|x| *x = (*x - top).exp());
                }
                pmht_weights(&LikelihoodMatrix::new(shifted)?)?
            };
            for j in 0..n {
                posteriors[j] = Some(pmht_update(&beliefs[j], zs, &w.column(j), model)?);
            }
        }
        Method::Jpdaf | Method::Pkf => {
            let gated = DMatrix::from_fn(m, n, |k, j| if d2[(k, j)] <= gate { ln_q[(k, j)].exp() } else { 0.0 });
            let w = jpdaf_weights_with(&LikelihoodMatrix::new(gated)?, p_detect, lambda, opts)?;
            for j in 0..n {
                posteriors[j] = if method == Method::Jpdaf {
                    jpdaf_track(&beliefs[j], zs, &w, j, model)?
                } else {
                    pkf_track(&beliefs[j], zs, &w, j, config.pkf_min_weight, model)?
                };
            }
        }
    }
    Ok(posteriors)
}

fn selected(w: &WeightMatrix, j: usize, zs: &[DVector<f64>], floor: f64) -> (Vec<DVector<f64>>, Vec<f64>) {
    w.w.column(j)
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > floor)
        .map(|(k, &x)| (zs[k].clone(), x))
        .unzip()
}

fn jpdaf_track(
    b: &GaussianBelief,
    zs: &[DVector<f64>],
    w: &WeightMatrix,
    j: usize,
    model: &LinearModel,
) -> Result<Option<GaussianBelief>> {
    let (z, ws) = selected(w, j, zs, 0.0);
    if z.is_empty() {
        return Ok(None);
    }
    // Column sums can exceed one by rounding only.
    let total: f64 = ws.iter().sum();
    let ws: Vec<f64> = if total > 1.0 { ws.iter().map(|x| x / total).collect() } else { ws };
    jpdaf_update(b, &z, &ws, model).map(Some)
}

fn pkf_track(
    b: &GaussianBelief,
    zs: &[DVector<f64>],
    w: &WeightMatrix,
    j: usize,
    floor: f64,
    model: &LinearModel,
) -> Result<Option<GaussianBelief>> {
    let (z, ws) = selected(w, j, zs, floor);
    if z.is_empty() {
        return Ok(None);
    }
    pkf_update(b, &z, &ws, model).map(Some)
}
