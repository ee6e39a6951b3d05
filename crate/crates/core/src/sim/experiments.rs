use std::hint::black_box;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::tracker::{initial_beliefs, run_tracker, FilterConfig, Method, TrackingReport};
use super::{generate_scenario, ScenarioConfig};
use crate::assoc::{
    gaussian_ln_likelihood, jpdaf_weights, pmht_weights, pmht_weights_with_clutter, solve_min_cost, LikelihoodMatrix,
};
use crate::filter::{jpdaf_update, kf_update, pkf_update, pmht_update, predict};
use crate::linalg::mahalanobis_sq;
use crate::model::GaussianBelief;
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub reports: Vec<TrackingReport>,
}

/// Runs every method on `n_seeds` scenarios seeded `config.seed + i`.
pub fn run_seeds(
    config: &ScenarioConfig,
    filter: &FilterConfig,
    methods: &[Method],
    n_seeds: usize,
    exec: Execution,
) -> Result<Vec<SeedRun>> {
    par::map_range(exec, n_seeds, |i| {
        let seed = config.seed.wrapping_add(i as u64);
        let scenario = generate_scenario(&ScenarioConfig { seed, ..config.clone() })?;
        let reports = methods.iter().map(|&m| run_tracker(&scenario, m, filter)).collect::<Result<_>>()?;
        Ok(SeedRun { seed, reports })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub n_objects: usize,
    pub seeds: usize,
    /// Mean over seeds of each object's error.
    pub per_object_error: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_failed: f64,
    pub update_ms_per_frame: f64,
    pub covariance_violations: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl MethodSummary {
    pub fn from_runs(runs: &[SeedRun]) -> Vec<MethodSummary> {
        let Some(first) = runs.first() else { return Vec::new() };
        first
            .reports
            .iter()
            .enumerate()
            .map(|(i, r0)| {
                let reports: Vec<&TrackingReport> = runs.iter().map(|r| &r.reports[i]).collect();
                let n_objects = r0.per_object_error.len();
                let per_object_error = (0..n_objects)
                    .map(|j| reports.iter().map(|r| r.per_object_error[j]).sum::<f64>() / reports.len() as f64)
                    .collect();
                let errors: Vec<f64> = reports.iter().map(|r| r.average_error).collect();
                let (mean_error, std_error) = mean_std(&errors);
                let failed: Vec<f64> = reports.iter().map(|r| r.failed_tracks as f64).collect();
                let ms: Vec<f64> = reports.iter().map(|r| r.update_ms_per_frame).collect();
                MethodSummary {
                    method: r0.method,
                    n_objects,
                    seeds: reports.len(),
                    per_object_error,
                    mean_error,
                    std_error,
                    mean_failed: mean_std(&failed).0,
                    update_ms_per_frame: mean_std(&ms).0,
                    covariance_violations: reports.iter().map(|r| r.covariance_violations).sum(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub noise: f64,
    pub method: Method,
    pub mean_error: f64,
    pub std_error: f64,
    /// Failed tracks per run, averaged over seeds.
    pub mean_failed: f64,
    pub covariance_violations: usize,
}

/// Error and failure curves over measurement-noise variances.
pub fn noise_sweep(
    config: &ScenarioConfig,
    filter: &FilterConfig,
    levels: &[f64],
    methods: &[Method],
    n_seeds: usize,
    exec: Execution,
) -> Result<Vec<SweepPoint>> {
    let jobs: Vec<(usize, usize)> = (0..levels.len()).flat_map(|l| (0..n_seeds).map(move |s| (l, s))).collect();
    let results: Vec<Result<Vec<TrackingReport>>> = par::map(exec, &jobs, |&(l, s)| {
        let cfg = ScenarioConfig { meas_noise_var: levels[l], seed: config.seed.wrapping_add(s as u64), ..config.clone() };
        let scenario = generate_scenario(&cfg)?;
        methods.iter().map(|&m| run_tracker(&scenario, m, filter)).collect()
    });
    let results: Vec<Vec<TrackingReport>> = results.into_iter().collect::<Result<_>>()?;

    let mut points = Vec::new();
    for (l, &noise) in levels.iter().enumerate() {
        let runs = &results[l * n_seeds..(l + 1) * n_seeds];
        for (i, &method) in methods.iter().enumerate() {
            let errors: Vec<f64> = runs.iter().map(|r| r[i].average_error).collect();
            let failed: Vec<f64> = runs.iter().map(|r| r[i].failed_tracks as f64).collect();
            let (mean_error, std_error) = mean_std(&errors);
            points.push(SweepPoint {
                noise,
                method,
                mean_error,
                std_error,
                mean_failed: mean_std(&failed).0,
                covariance_violations: runs.iter().map(|r| r[i].covariance_violations).sum(),
            });
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_objects: usize,
    pub method: String,
    pub ms_per_frame: f64,
}

pub const BENCH_METHODS: [&str; 4] = ["kf", "pmht", "jpdaf", "pkf"];

/// One frame of precomputed update inputs: per track, `(measurements, weights)`.
type FrameInputs = Vec<(GaussianBelief, Vec<DVector<f64>>, Vec<f64>)>;

/// Median update time per frame with association weights given.
///
/// Predicted beliefs and weights are computed once along a PKF run of a
/// scenario; only the update calls are timed.
pub fn bench_update(object_counts: &[usize], base: &ScenarioConfig, filter: &FilterConfig, repetitions: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in object_counts {
        let inputs = bench_inputs(&ScenarioConfig { n_objects: n, phase_offsets: None, ..base.clone() }, filter)?;
        let model = filter.model_for(base.meas_noise_var);
        // Methods are interleaved frame by frame so drift hits them alike.
        let n_frames = inputs.iter().map(Vec::len).min().unwrap_or(0);
        let mut samples = vec![Vec::with_capacity(repetitions); BENCH_METHODS.len()];
        for _ in 0..repetitions.max(1) {
            let mut secs = [0.0f64; 4];
            for f in 0..n_frames {
                for (mi, frames) in inputs.iter().enumerate() {
                    let start = Instant::now();
                    for (b, zs, ws) in &frames[f] {
                        let out = match mi {
                            0 => kf_update(b, &zs[0], &model),
                            1 => pmht_update(b, zs, ws, &model),
                            2 => jpdaf_update(b, zs, ws, &model),
                            _ => pkf_update(b, zs, ws, &model),
                        };
                        black_box(out?);
                    }
                    secs[mi] += start.elapsed().as_secs_f64();
                }
            }
            for (mi, s) in secs.iter().enumerate() {
                samples[mi].push(s * 1e3 / n_frames.max(1) as f64);
            }
        }
        for (name, mut s) in BENCH_METHODS.iter().zip(samples) {
            s.sort_by(f64::total_cmp);
            rows.push(BenchRow { n_objects: n, method: name.to_string(), ms_per_frame: s[s.len() / 2] });
        }
    }
    Ok(rows)
}

/// Update inputs for each bench method, frame by frame.
fn bench_inputs(config: &ScenarioConfig, filter: &FilterConfig) -> Result<[Vec<FrameInputs>; 4]> {
    let scenario = generate_scenario(config)?;
    let model = filter.model_for(config.meas_noise_var);
    let gate = filter.gate();
    let lambda = config.lambda.max(1e-12);
    let mut beliefs = initial_beliefs(&scenario, filter);
    let mut out: [Vec<FrameInputs>; 4] = Default::default();

    for (t, frame) in scenario.frames.iter().enumerate() {
        if t > 0 {
            beliefs = beliefs.iter().map(|b| predict(b, &model, None)).collect();
        }
        let zs: Vec<DVector<f64>> = frame.detections.iter().map(|d| DVector::from_row_slice(&d.pos)).collect();
        let (m, n) = (zs.len(), beliefs.len());
        let mut ln_q = DMatrix::zeros(m, n);
        let mut inside = DMatrix::from_element(m, n, false);
        for (j, b) in beliefs.iter().enumerate() {
            let s = &model.h * &b.cov * model.h.transpose() + &model.v;
            for (k, z) in zs.iter().enumerate() {
                ln_q[(k, j)] = gaussian_ln_likelihood(z, b, &model)?;
                inside[(k, j)] = mahalanobis_sq(&(z - &model.h * &b.mean), &s)? <= gate;
            }
        }
        let gated = DMatrix::from_fn(m, n, |k, j| if inside[(k, j)] { ln_q[(k, j)].exp() } else { 0.0 });
        let q = LikelihoodMatrix::new(gated)?;
        // Exact joint weights when the gated blocks allow it; the timed update
        // only depends on which measurements each track receives.
        let jw = match jpdaf_weights(&q, config.p_detect, lambda) {
            Err(Error::Capacity { .. }) => pmht_weights_with_clutter(&q, config.p_detect, lambda)?,
            other => other?,
        };
        let pw = pmht_weights(&q)?;
        let assignment = solve_min_cost(&ln_q.map(|l| -l));

        let mut frames: [FrameInputs; 4] = Default::default();
        for &(k, j) in &assignment {
            frames[0].push((beliefs[j].clone(), vec![zs[k].clone()], vec![1.0]));
        }
        let mut next = beliefs.clone();
        for j in 0..n {
            let ks: Vec<usize> = (0..m).filter(|&k| jw.w[(k, j)] > 0.0).collect();
            if ks.is_empty() {
                continue;
            }
            let z: Vec<DVector<f64>> = ks.iter().map(|&k| zs[k].clone()).collect();
            let wj: Vec<f64> = ks.iter().map(|&k| jw.w[(k, j)]).collect();
            let total: f64 = wj.iter().sum();
            let wj_capped: Vec<f64> = if total > 1.0 { wj.iter().map(|w| w / total).collect() } else { wj.clone() };
            frames[1].push((beliefs[j].clone(), z.clone(), ks.iter().map(|&k| pw.w[(k, j)]).collect()));
            frames[2].push((beliefs[j].clone(), z.clone(), wj_capped));
            next[j] = pkf_update(&beliefs[j], &z, &wj, &model)?;
            frames[3].push((beliefs[j].clone(), z, wj));
        }
        beliefs = next;
        for (o, f) in out.iter_mut().zip(frames) {
            o.push(f);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible_and_order_preserving() {
        let cfg = ScenarioConfig { n_frames: 40, ..Default::default() };
        let f = FilterConfig::default();
        let a = run_seeds(&cfg, &f, &Method::ALL, 3, Execution::Parallel).unwrap();
        let b = run_seeds(&cfg, &f, &Method::ALL, 3, Execution::Sequential).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.seed, y.seed);
            for (rx, ry) in x.reports.iter().zip(&y.reports) {
                assert_eq!(rx.per_object_error, ry.per_object_error);
            }
        }
        let summary = MethodSummary::from_runs(&a);
        assert_eq!(summary.len(), 4);
        assert_eq!(summary[3].method, Method::Pkf);
    }

    #[test]
    fn sweep_shape() {
        let cfg = ScenarioConfig { n_frames: 30, n_objects: 4, ..Default::default() };
        let pts = noise_sweep(&cfg, &FilterConfig::default(), &[0.2, 0.5], &[Method::Jpdaf, Method::Pkf], 2, Execution::Parallel).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].noise, 0.2);
        assert_eq!(pts[3].method, Method::Pkf);
    }

    #[test]
    fn zero_noise_sweep_level_is_accurate() {
        let cfg = ScenarioConfig { n_objects: 10, p_detect: 0.95, n_frames: 100, ..Default::default() };
        let pts = noise_sweep(&cfg, &FilterConfig::default(), &[0.0], &[Method::Jpdaf, Method::Pkf], 2, Execution::Parallel).unwrap();
        for p in pts {
            assert!(p.mean_error < 0.05, "{:?}", p);
        }
    }

    #[test]
    fn bench_reports_every_method() {
        let cfg = ScenarioConfig { n_frames: 20, ..Default::default() };
        let rows = bench_update(&[3, 5], &cfg, &FilterConfig::default(), 3).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.ms_per_frame >= 0.0));
        let names: Vec<&str> = rows[..4].iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, BENCH_METHODS);
    }
}
