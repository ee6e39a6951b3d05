use std::collections::{BTreeMap, HashMap};

use crate::assoc::iou;

use super::MotRecord;

/// IoU a result box needs to count as covering a ground-truth box.
const MATCH_IOU: f64 = 0.5;

/// Frames at which a ground-truth identity's best-overlapping result id
/// differs from the id it was last matched to.
pub fn id_switch_count(result: &[MotRecord], ground_truth: &[MotRecord]) -> usize {
    let mut by_frame: BTreeMap<u32, Vec<&MotRecord>> = BTreeMap::new();
    for r in result {
        by_frame.entry(r.frame).or_default().push(r);
    }
    let mut gt_sorted: Vec<&MotRecord> = ground_truth.iter().collect();
    gt_sorted.sort_by_key(|g| (g.frame, g.id));

    let mut last: HashMap<i64, i64> = HashMap::new();
    let mut switches = 0;
    for g in gt_sorted {
        let Some(cands) = by_frame.get(&g.frame) else { continue };
        let mut best: Option<(f64, i64)> = None;
        for r in cands {
            let s = iou(&g.bbox, &r.bbox);
            if s >= MATCH_IOU && best.is_none_or(|(b, id)| s > b || (s == b && r.id < id)) {
                best = Some((s, r.id));
            }
        }
        if let Some((_, id)) = best {
            if let Some(prev) = last.insert(g.id, id) {
                if prev != id {
                    switches += 1;
                }
            }
        }
    }
    switches
}
