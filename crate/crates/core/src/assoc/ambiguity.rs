use nalgebra::DMatrix;

use super::lap::{linear_assignment, DEFAULT_MATCH_FLOOR};

/// Split of a frame's measurements and objects into an ambiguous block and
/// clear one-to-one matches.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AmbiguityPartition {
    pub ambiguous_measurements: Vec<usize>,
    pub ambiguous_objects: Vec<usize>,
    pub clear_pairs: Vec<(usize, usize)>,
}

impl AmbiguityPartition {
    pub fn is_unambiguous(&self) -> bool {
        self.ambiguous_measurements.is_empty() && self.ambiguous_objects.is_empty()
    }
}

/// Ambiguity check with the default match floor.
pub fn ambiguity_check(scores: &DMatrix<f64>, tau_ambig: f64) -> AmbiguityPartition {
    ambiguity_check_with_floor(scores, tau_ambig, DEFAULT_MATCH_FLOOR)
}

/// Marks measurements whose ranked object scores form a chain of near ties.
///
/// For each row the objects are ranked by score (stable on index), then
/// adjacent pairs are walked while `next ≥ tau_ambig · prev` and both are
/// positive; every object in the chain and the row become ambiguous. Pairs
/// of the binary matching with either end ambiguous pull the other end in.
/// Remaining matched pairs are the clear pairs.
///
/// `tau_ambig ≥ 1` disables the check: every match is clear.
pub fn ambiguity_check_with_floor(scores: &DMatrix<f64>, tau_ambig: f64, match_floor: f64) -> AmbiguityPartition {
    let (m, n) = scores.shape();
    let matching = linear_assignment(scores, match_floor);
    if tau_ambig >= 1.0 {
        return AmbiguityPartition { clear_pairs: matching, ..Default::default() };
    }

    let mut meas = vec![false; m];
    let mut objs = vec![false; n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for k in 0..m {
        order.clear();
        order.extend(0..n);
        // Stable: equal scores keep ascending object index.
        order.sort_by(|&a, &b| scores[(k, b)].total_cmp(&scores[(k, a)]));
        for pair in order.windows(2) {
            let (prev, next) = (scores[(k, pair[0])], scores[(k, pair[1])]);
            if prev > 0.0 && next > 0.0 && next >= tau_ambig * prev {
                objs[pair[0]] = true;
                objs[pair[1]] = true;
                meas[k] = true;
            } else {
                break;
            }
        }
    }

    let mut clear_pairs = Vec::new();
    for &(k, j) in &matching {
        if meas[k] || objs[j] {
            meas[k] = true;
            objs[j] = true;
        } else {
            clear_pairs.push((k, j));
        }
    }

    AmbiguityPartition {
        ambiguous_measurements: (0..m).filter(|&k| meas[k]).collect(),
        ambiguous_objects: (0..n).filter(|&j| objs[j]).collect(),
        clear_pairs,
    }
}
