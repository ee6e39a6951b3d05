//! SORT-style bounding-box tracker with probabilistic association inside
//! ambiguous blocks, plus MOT-Challenge file I/O.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assoc::{
    ambiguity_check, iou, likelihood_from_iou, linear_assignment, pkf_weights_with, LikelihoodMatrix, WeightOptions,
    DEFAULT_MATCH_FLOOR,
};
use crate::filter::{kf_update, pkf_update, predict};
use crate::model::{bbox_to_z, box_initial_belief, clamp_box_area_rate, sort_motion_model, z_to_bbox, SORT_INITIAL_COV_DIAG};
use crate::par::{self, Execution};
use crate::{Bbox, Detection, Error, GaussianBelief, LinearModel, Result};

mod io;
mod metrics;
pub mod synthetic;

pub use io::{format_mot_results, parse_mot_detections, parse_mot_records, parse_mot_str, write_mot_results, MotRecord};
pub use metrics::id_switch_count;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Ratio for the near-tie chain; `≥ 1` turns the tracker into plain SORT.
    pub tau_ambig: f64,
    pub tau_weight: f64,
    pub alpha: f64,
    pub det_conf_threshold: f64,
    pub new_track_iou: f64,
    pub max_age: u32,
    pub min_hits: u32,
    pub initial_cov_diag: [f64; 7],
    /// Per-track prediction and per-component weights.
    pub exec: Execution,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            tau_ambig: 0.9,
            tau_weight: 0.25,
            alpha: 2.0,
            det_conf_threshold: 0.6,
            new_track_iou: 0.3,
            max_age: 30,
            min_hits: 3,
            initial_cov_diag: SORT_INITIAL_COV_DIAG,
            exec: Execution::Sequential,
        }
    }
}

impl TrackerConfig {
    /// Settings for crowded scenes.
    pub fn crowded() -> Self {
        Self { tau_ambig: 0.95, det_conf_threshold: 0.4, ..Default::default() }
    }

    /// Ambiguity check disabled: binary assignment only.
    pub fn binary() -> Self {
        Self { tau_ambig: 1.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {x} outside [0, 1]")))
            }
        };
        if !(self.tau_ambig > 0.0) {
            return Err(Error::Config(format!("tau_ambig = {} must be positive", self.tau_ambig)));
        }
        unit("tau_weight", self.tau_weight)?;
        unit("det_conf_threshold", self.det_conf_threshold)?;
        unit("new_track_iou", self.new_track_iou)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.min_hits == 0 {
            return Err(Error::Config("min_hits must be at least 1".into()));
        }
        if self.initial_cov_diag.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("initial_cov_diag must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub belief: GaussianBelief,
    /// Consecutive frames with an update, counting the creating detection.
    pub hits: u32,
    pub age: u32,
    pub time_since_update: u32,
    pub status: TrackStatus,
    /// Confidence of the detection that last updated the track.
    pub confidence: f64,
}

impl Track {
    /// Current box, or `None` if the state is degenerate.
    pub fn bbox(&self) -> Option<Bbox> {
        z_to_bbox(self.belief.mean.as_slice()).ok()
    }
}

/// One emitted box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackBox {
    pub id: u64,
    pub bbox: Bbox,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub updated: Vec<u64>,
    pub created: Vec<u64>,
    pub died: Vec<u64>,
    /// Confirmed tracks updated this frame, by id.
    pub emitted: Vec<TrackBox>,
}

/// Frame-by-frame tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    model: LinearModel,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, model: sort_motion_model(), tracks: Vec::new(), next_id: 1 })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Live tracks in creation order.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advances one frame. Detections below the confidence threshold are ignored.
    pub fn step(&mut self, detections: &[Detection]) -> StepOutput {
        let cfg = self.config.clone();
        let dets: Vec<&Detection> = detections.iter().filter(|d| d.confidence >= cfg.det_conf_threshold).collect();
        let zs: Vec<DVector<f64>> = dets.iter().map(|d| bbox_to_z(&d.bbox).expect("validated detection")).collect();

        let model = &self.model;
        par::for_each_mut(cfg.exec, &mut self.tracks, |t| {
            clamp_box_area_rate(&mut t.belief);
            t.belief = predict(&t.belief, model, None);
            t.age += 1;
            t.time_since_update += 1;
        });

        let predicted: Vec<Option<Bbox>> = self.tracks.iter().map(Track::bbox).collect();
        let scores = DMatrix::from_fn(dets.len(), self.tracks.len(), |k, j| {
            predicted[j].map_or(0.0, |b| iou(&dets[k].bbox, &b))
        });

        let mut out = StepOutput::default();
        let part = ambiguity_check(&scores, cfg.tau_ambig);

        for &(k, j) in &part.clear_pairs {
            self.apply(j, &[k], &[1.0], &zs, &dets, &mut out);
        }

        // A measurement too far from every track is not any track's measurement.
        let amb_rows: Vec<usize> = part
            .ambiguous_measurements
            .iter()
            .copied()
            .filter(|&k| scores.row(k).max() >= DEFAULT_MATCH_FLOOR)
            .collect();
        let amb_cols = &part.ambiguous_objects;
        if !amb_rows.is_empty() && !amb_cols.is_empty() {
            let q = DMatrix::from_fn(amb_rows.len(), amb_cols.len(), |a, b| {
                likelihood_from_iou(scores[(amb_rows[a], amb_cols[b])], cfg.alpha)
            });
            let opts = WeightOptions { exec: cfg.exec, ..Default::default() };
            match LikelihoodMatrix::new(q.clone()).and_then(|lm| pkf_weights_with(&lm, &opts)) {
                Ok(mut wm) => {
                    for &k in &wm.degenerate_rows {
                        wm.w.row_mut(k).fill(0.0);
                    }
                    for (b, &j) in amb_cols.iter().enumerate() {
                        let (ks, ws): (Vec<usize>, Vec<f64>) = (0..amb_rows.len())
                            .filter(|&a| wm.w[(a, b)] > cfg.tau_weight)
                            .map(|a| (amb_rows[a], wm.w[(a, b)]))
                            .unzip();
                        if !ks.is_empty() {
                            self.apply(j, &ks, &ws, &zs, &dets, &mut out);
                        }
                    }
                }
                Err(e) => {
                    log::warn!("ambiguous block {}x{} fell back to binary assignment: {e}", q.nrows(), q.ncols());
                    let sub = DMatrix::from_fn(amb_rows.len(), amb_cols.len(), |a, b| scores[(amb_rows[a], amb_cols[b])]);
                    for (a, b) in linear_assignment(&sub, DEFAULT_MATCH_FLOOR) {
                        self.apply(amb_cols[b], &[amb_rows[a]], &[1.0], &zs, &dets, &mut out);
                    }
                }
            }
        }

        let n_old = self.tracks.len();
        for (k, d) in dets.iter().enumerate() {
            let best = (0..n_old).map(|j| scores[(k, j)]).fold(0.0, f64::max);
            if best < cfg.new_track_iou {
                let belief = box_initial_belief(&d.bbox, &cfg.initial_cov_diag).expect("validated detection");
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(Track {
                    id,
                    belief,
                    hits: 1,
                    age: 0,
                    time_since_update: 0,
                    status: if cfg.min_hits <= 1 { TrackStatus::Confirmed } else { TrackStatus::Tentative },
                    confidence: d.confidence,
                });
                out.created.push(id);
            }
        }

        for t in &mut self.tracks {
            if t.time_since_update > 0 {
                t.hits = 0;
                // Tentative tracks get no grace period.
                if t.status == TrackStatus::Tentative || t.time_since_update > cfg.max_age {
                    t.status = TrackStatus::Dead;
                }
            } else if t.status == TrackStatus::Tentative && t.hits >= cfg.min_hits {
                t.status = TrackStatus::Confirmed;
            }
        }
        out.died = self.tracks.iter().filter(|t| t.status == TrackStatus::Dead).map(|t| t.id).collect();
        self.tracks.retain(|t| t.status != TrackStatus::Dead);

        out.emitted = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.time_since_update == 0)
            .filter_map(|t| t.bbox().filter(Bbox::is_valid).map(|bbox| TrackBox { id: t.id, bbox, confidence: t.confidence }))
            .collect();
        out.emitted.sort_by_key(|b| b.id);
        out.updated.sort_unstable();
        out
    }

    fn apply(&mut self, j: usize, ks: &[usize], ws: &[f64], zs: &[DVector<f64>], dets: &[&Detection], out: &mut StepOutput) {
        let t = &mut self.tracks[j];
        let result = if ks.len() == 1 && ws[0] == 1.0 {
            kf_update(&t.belief, &zs[ks[0]], &self.model)
        } else {
            let meas: Vec<DVector<f64>> = ks.iter().map(|&k| zs[k].clone()).collect();
            pkf_update(&t.belief, &meas, ws, &self.model)
        };
        match result {
            Ok(b) => {
                t.belief = b;
                t.hits += 1;
                t.time_since_update = 0;
                let strongest = ks.iter().zip(ws).max_by(|a, b| a.1.total_cmp(b.1)).map(|(&k, _)| k).unwrap();
                t.confidence = dets[strongest].confidence;
                out.updated.push(t.id);
            }
            Err(e) => log::warn!("track {} update skipped: {e}", t.id),
        }
    }
}

/// Confirmed boxes of one frame.
pub type FrameResult = (u32, Vec<TrackBox>);

/// Runs the tracker over frames `1..=last`, stepping through empty frames.
pub fn track_frames(frames: &BTreeMap<u32, Vec<Detection>>, config: &TrackerConfig) -> Result<Vec<FrameResult>> {
    let mut tracker = Tracker::new(config.clone())?;
    let last = frames.keys().next_back().copied().unwrap_or(0);
    let empty = Vec::new();
    Ok((1..=last)
        .map(|f| (f, tracker.step(frames.get(&f).unwrap_or(&empty)).emitted))
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SequenceSummary {
    pub frames: usize,
    pub detections: usize,
    pub output_boxes: usize,
    pub seconds: f64,
    pub fps: f64,
}

/// Reads a detection file, tracks it and writes the result file.
/// Timing covers tracking only, not file I/O.
pub fn track_sequence(detections: &Path, output: &Path, config: &TrackerConfig) -> Result<SequenceSummary> {
    let frames = parse_mot_detections(detections)?;
    let start = Instant::now();
    let results = track_frames(&frames, config)?;
    let seconds = start.elapsed().as_secs_f64();
    write_mot_results(&results, output)?;
    Ok(SequenceSummary {
        frames: results.len(),
        detections: frames.values().map(Vec::len).sum(),
        output_boxes: results.iter().map(|r| r.1.len()).sum(),
        seconds,
        fps: if seconds > 0.0 { results.len() as f64 / seconds } else { f64::INFINITY },
    })
}
