//! Generated MOT sequences with known ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::assoc::iou;
use crate::{Bbox, Detection};

use super::MotRecord;

#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub detections: BTreeMap<u32, Vec<Detection>>,
    pub ground_truth: Vec<MotRecord>,
}

impl SyntheticSequence {
    pub fn n_frames(&self) -> u32 {
        self.ground_truth.iter().map(|g| g.frame).max().unwrap_or(0)
    }

    /// Detection file contents, ids set to `-1`.
    pub fn detections_text(&self) -> String {
        let mut s = String::new();
        for (f, dets) in &self.detections {
            for d in dets {
                let b = d.bbox;
                writeln!(s, "{f},-1,{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1", b.left, b.top, b.width, b.height, d.confidence).unwrap();
            }
        }
        s
    }
}

fn push(seq: &mut SyntheticSequence, frame: u32, b: Bbox, conf: f64) {
    seq.detections.entry(frame).or_default().push(Detection { bbox: b, confidence: conf, frame });
}

#[derive(Debug, Clone)]
pub struct CrossingParams {
    pub n_frames: u32,
    pub width: f64,
    pub height: f64,
    /// Horizontal speed of each box, in opposite directions.
    pub speed: f64,
    /// Vertical offset between the two paths.
    pub dy: f64,
    /// Position noise standard deviation in pixels.
    pub noise: f64,
    /// The rear box is not detected while the two overlap more than this.
    pub occlusion_iou: f64,
    /// Frame at which the two centres pass each other.
    pub cross_frame: f64,
    pub seed: u64,
}

impl Default for CrossingParams {
    fn default() -> Self {
        Self { n_frames: 30, width: 40.0, height: 100.0, speed: 4.0, dy: 6.0, noise: 2.0, occlusion_iou: 0.5, cross_frame: 15.0, seed: 0 }
    }
}

/// Two boxes walking through each other.
pub fn crossing(p: &CrossingParams) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = Normal::new(0.0, p.noise).unwrap();
    let mut seq = SyntheticSequence { detections: BTreeMap::new(), ground_truth: Vec::new() };
    for f in 1..=p.n_frames {
        let t = f as f64 - p.cross_frame;
        let a = Bbox::new(300.0 + p.speed * t - p.width / 2.0, 200.0, p.width, p.height);
        let b = Bbox::new(300.0 - p.speed * t - p.width / 2.0, 200.0 + p.dy, p.width, p.height);
        seq.ground_truth.push(MotRecord { frame: f, id: 1, bbox: a, confidence: 1.0 });
        seq.ground_truth.push(MotRecord { frame: f, id: 2, bbox: b, confidence: 1.0 });
        let occluded = iou(&a, &b) > p.occlusion_iou;
        for (k, truth) in [a, b].into_iter().enumerate() {
            if occluded && k == 1 {
                continue;
            }
            let jitter = Bbox::new(truth.left + noise.sample(&mut rng), truth.top + noise.sample(&mut rng), truth.width, truth.height);
            push(&mut seq, f, jitter, 0.9);
        }
    }
    seq
}

/// Pedestrian-like scene: `n_tracks` boxes walking at constant velocity in
/// a 1920x1080 image, reflecting off the borders, with jittered detections,
/// occasional misses and low-confidence false positives.
pub fn pedestrians(n_tracks: usize, n_frames: u32, seed: u64) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1.5).unwrap();
    let (img_w, img_h) = (1920.0, 1080.0);
    struct Walker {
        x: f64,
        y: f64,
        vx: f64,
        vy: f64,
        w: f64,
        h: f64,
    }
    let mut walkers: Vec<Walker> = (0..n_tracks)
        .map(|_| {
            let h = rng.random_range(80.0..160.0);
            let w = h * rng.random_range(0.35..0.45);
            Walker {
                x: rng.random_range(0.0..img_w - w),
                y: rng.random_range(0.0..img_h - h),
                vx: rng.random_range(-3.0..3.0),
                vy: rng.random_range(-1.0..1.0),
                w,
                h,
            }
        })
        .collect();
    let mut seq = SyntheticSequence { detections: BTreeMap::new(), ground_truth: Vec::new() };
    for f in 1..=n_frames {
        for (i, p) in walkers.iter_mut().enumerate() {
            let truth = Bbox::new(p.x, p.y, p.w, p.h);
            seq.ground_truth.push(MotRecord { frame: f, id: i as i64 + 1, bbox: truth, confidence: 1.0 });
            if rng.random::<f64>() < 0.95 {
                let b = Bbox::new(p.x + jitter.sample(&mut rng), p.y + jitter.sample(&mut rng), p.w, p.h);
                push(&mut seq, f, b, rng.random_range(0.6..1.0));
            }
            p.x += p.vx;
            p.y += p.vy;
            if p.x < 0.0 || p.x + p.w > img_w {
                p.vx = -p.vx;
            }
            if p.y < 0.0 || p.y + p.h > img_h {
                p.vy = -p.vy;
            }
        }
        if rng.random::<f64>() < 0.3 {
            let b = Bbox::new(rng.random_range(0.0..img_w - 50.0), rng.random_range(0.0..img_h - 120.0), 50.0, 120.0);
            push(&mut seq, f, b, rng.random_range(0.1..0.5));
        }
    }
    seq
}
