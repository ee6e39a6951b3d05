//! Plain SORT pipeline written independently of the tracker: one binary
//! assignment per frame, no ambiguity handling.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use pkf::assoc::{iou, linear_assignment, DEFAULT_MATCH_FLOOR};
use pkf::filter::{kf_update, predict};
use pkf::model::{bbox_to_z, box_initial_belief, clamp_box_area_rate, sort_motion_model, z_to_bbox};
use pkf::mot::{FrameResult, TrackBox, TrackerConfig};
use pkf::{Detection, GaussianBelief};

struct SortTrack {
    id: u64,
    belief: GaussianBelief,
    hits: u32,
    misses: u32,
    confirmed: bool,
    conf: f64,
}

pub fn sort_baseline(frames: &BTreeMap<u32, Vec<Detection>>, cfg: &TrackerConfig) -> Vec<FrameResult> {
    let model = sort_motion_model();
    let mut tracks: Vec<SortTrack> = Vec::new();
    let mut next_id = 1u64;
    let last = frames.keys().next_back().copied().unwrap_or(0);
    let mut out = Vec::new();
    for f in 1..=last {
        let dets: Vec<&Detection> =
            frames.get(&f).map(|v| v.iter().filter(|d| d.confidence >= cfg.det_conf_threshold).collect()).unwrap_or_default();
        for t in &mut tracks {
            clamp_box_area_rate(&mut t.belief);
            t.belief = predict(&t.belief, &model, None);
            t.misses += 1;
        }
        let boxes: Vec<_> = tracks.iter().map(|t| z_to_bbox(t.belief.mean.as_slice()).ok()).collect();
        let scores = DMatrix::from_fn(dets.len(), tracks.len(), |k, j| boxes[j].map_or(0.0, |b| iou(&dets[k].bbox, &b)));
        for (k, j) in linear_assignment(&scores, DEFAULT_MATCH_FLOOR) {
            let t = &mut tracks[j];
            t.belief = kf_update(&t.belief, &bbox_to_z(&dets[k].bbox).unwrap(), &model).unwrap();
            t.hits += 1;
            t.misses = 0;
            t.conf = dets[k].confidence;
        }
        let n_old = tracks.len();
        for (k, d) in dets.iter().enumerate() {
            if (0..n_old).all(|j| scores[(k, j)] < cfg.new_track_iou) {
                tracks.push(SortTrack {
                    id: next_id,
                    belief: box_initial_belief(&d.bbox, &cfg.initial_cov_diag).unwrap(),
                    hits: 1,
                    misses: 0,
                    confirmed: cfg.min_hits <= 1,
                    conf: d.confidence,
                });
                next_id += 1;
            }
        }
        tracks.retain_mut(|t| {
            if t.misses > 0 {
                t.hits = 0;
                t.confirmed && t.misses <= cfg.max_age
            } else {
                t.confirmed |= t.hits >= cfg.min_hits;
                true
            }
        });
        let mut emitted: Vec<TrackBox> = tracks
            .iter()
            .filter(|t| t.confirmed && t.misses == 0)
            .filter_map(|t| {
                let b = z_to_bbox(t.belief.mean.as_slice()).ok()?;
                (b.width > 0.0 && b.height > 0.0).then_some(TrackBox { id: t.id, bbox: b, confidence: t.conf })
            })
            .collect();
        emitted.sort_by_key(|b| b.id);
        out.push((f, emitted));
    }
    out
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}
