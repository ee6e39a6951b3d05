//! Point-target simulator: figure-eight trajectories, missed detections,
//! uniform clutter, and the four trackers compared on it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::model::LinearModel;
use crate::{Error, Result};

mod experiments;
mod report;
mod tracker;

pub use experiments::{bench_update, noise_sweep, run_seeds, BenchRow, MethodSummary, SeedRun, SweepPoint, BENCH_METHODS};
pub use report::{write_fig4_csv, write_json, write_table1_csv, write_table2_csv};
pub use tracker::{run_tracker, run_tracker_with_estimates, FilterConfig, Method, TrackingReport, FAILURE_ERROR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_objects: usize,
    pub n_frames: usize,
    pub p_detect: f64,
    /// Per-axis measurement noise variance.
    pub meas_noise_var: f64,
    pub clutter_box_halfwidth: f64,
    /// Clutter density used in the association weights.
    pub lambda: f64,
    /// Expected clutter points per object per frame for each unit of `lambda`.
    pub clutter_per_lambda: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub angular_rate: f64,
    /// Defaults to `2πj / n_objects`.
    pub phase_offsets: Option<Vec<f64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_objects: 3,
            n_frames: 200,
            p_detect: 0.9,
            meas_noise_var: 0.75,
            clutter_box_halfwidth: 10.0,
            lambda: 0.125,
            clutter_per_lambda: 8.0,
            seed: 0,
            amplitude: 6.0,
            angular_rate: 2.0 * PI / 200.0,
            phase_offsets: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.p_detect > 0.0 && self.p_detect <= 1.0) {
            return bad(format!("p_detect = {} outside (0, 1]", self.p_detect));
        }
        if !(self.meas_noise_var >= 0.0 && self.meas_noise_var.is_finite()) {
            return bad(format!("meas_noise_var = {} must be non-negative", self.meas_noise_var));
        }
        if !(self.lambda >= 0.0 && self.clutter_per_lambda >= 0.0 && self.clutter_box_halfwidth > 0.0) {
            return bad("clutter parameters must be non-negative with a positive box".into());
        }
        if let Some(p) = &self.phase_offsets {
            if p.len() != self.n_objects {
                return bad(format!("{} phase offsets for {} objects", p.len(), self.n_objects));
            }
        }
        Ok(())
    }

    pub fn phases(&self) -> Vec<f64> {
        match &self.phase_offsets {
            Some(p) => p.clone(),
            None => (0..self.n_objects).map(|j| 2.0 * PI * j as f64 / self.n_objects as f64).collect(),
        }
    }

    /// Position of the object with the given phase at frame `t`.
    pub fn truth(&self, phase: f64, t: usize) -> [f64; 2] {
        let a = self.angular_rate * t as f64 + phase;
        [self.amplitude * a.sin(), self.amplitude * a.sin() * a.cos()]
    }

    /// Time derivative of [`truth`](Self::truth), per frame.
    pub fn truth_velocity(&self, phase: f64, t: usize) -> [f64; 2] {
        let a = self.angular_rate * t as f64 + phase;
        let aw = self.amplitude * self.angular_rate;
        [aw * a.cos(), aw * (2.0 * a).cos()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDetection {
    pub pos: [f64; 2],
    /// Originating object, or `None` for clutter.
    pub source: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub truth: Vec<[f64; 2]>,
    pub detections: Vec<SimDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub frames: Vec<Frame>,
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.meas_noise_var.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let clutter_mean = config.lambda * config.clutter_per_lambda;
    let clutter = if clutter_mean > 0.0 {
        Some(Poisson::new(clutter_mean).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let phases = config.phases();
    let hw = config.clutter_box_halfwidth;

    let frames = (0..config.n_frames)
        .map(|t| {
            let truth: Vec<[f64; 2]> = phases.iter().map(|&p| config.truth(p, t)).collect();
            let mut detections = Vec::new();
            for (j, x) in truth.iter().enumerate() {
                if rng.random::<f64>() < config.p_detect {
                    let pos = [x[0] + noise.sample(&mut rng), x[1] + noise.sample(&mut rng)];
                    detections.push(SimDetection { pos, source: Some(j) });
                }
            }
            if let Some(dist) = &clutter {
                for x in &truth {
                    let count = dist.sample(&mut rng) as usize;
                    for _ in 0..count {
                        let pos = [x[0] + rng.random_range(-hw..=hw), x[1] + rng.random_range(-hw..=hw)];
                        detections.push(SimDetection { pos, source: None });
                    }
                }
            }
            Frame { truth, detections }
        })
        .collect();
    Ok(Scenario { config: config.clone(), frames })
}

/// 2D constant velocity, `x = [px, py, vx, vy]`, position measured.
pub fn constant_velocity_model(dt: f64, pos_var: f64, vel_var: f64, meas_var: f64) -> LinearModel {
    let mut f = DMatrix::identity(4, 4);
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let w = DMatrix::from_diagonal(&DVector::from_vec(vec![pos_var, pos_var, vel_var, vel_var]));
    let mut h = DMatrix::zeros(2, 4);
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    let v = DMatrix::identity(2, 2) * meas_var;
    LinearModel::new(f, DMatrix::zeros(4, 1), w, h, v).expect("constant velocity model dimensions")
}
