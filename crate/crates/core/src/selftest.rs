//! Brute-force oracles and a small self-check runner.
//!
//! The oracles enumerate association events or use closed forms directly and
//! share no code with the fast paths they check. The unit tests, the
//! acceptance suite and the `selftest` CLI subcommand all use them.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assoc::{self, LikelihoodMatrix};
use crate::filter;
use crate::model::{GaussianBelief, LinearModel};

pub mod oracle {
    use super::*;

    /// Calls `visit` with every injective map `rows → cols` (as a slice of column indices).
    pub fn for_each_injection(m: usize, n: usize, mut visit: impl FnMut(&[usize])) {
        fn rec(depth: usize, m: usize, n: usize, used: &mut [bool], cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
            if depth == m {
                visit(cur);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    cur.push(j);
                    rec(depth + 1, m, n, used, cur, visit);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        let mut used = vec![false; n];
        let mut cur = Vec::with_capacity(m);
        rec(0, m, n, &mut used, &mut cur, &mut visit);
    }

    /// Sum over injective maps of the row products.
    pub fn permanent_by_enumeration(q: &DMatrix<f64>) -> f64 {
        let (m, n) = q.shape();
        let mut total = 0.0;
        for_each_injection(m, n, |d| {
            total += d.iter().enumerate().map(|(k, &j)| q[(k, j)]).product::<f64>();
        });
        total
    }

    /// Marginal association probabilities by summing event probabilities
    /// over every injective map, normalised per row.
    pub fn pkf_weights_by_enumeration(q: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = q.shape();
        let mut w = DMatrix::zeros(m, n);
        for_each_injection(m, n, |d| {
            let p: f64 = d.iter().enumerate().map(|(k, &j)| q[(k, j)]).product();
            for (k, &j) in d.iter().enumerate() {
                w[(k, j)] += p;
            }
        });
        for mut row in w.row_iter_mut() {
            let s: f64 = row.sum();
            if s > 0.0 {
                row /= s;
            }
        }
        w
    }

    /// JPDAF marginals by enumerating every association event (each
    /// measurement is clutter or goes to a distinct object). Event weight:
    /// `Π_assigned Q/λ · Π_objects p_D^{detected}(1−p_D)^{missed}`.
    /// Returns `(w, clutter)`.
    pub fn jpdaf_weights_by_events(q: &DMatrix<f64>, p_detect: f64, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
        let (m, n) = q.shape();
        let mut w = DMatrix::zeros(m, n);
        let mut clutter = DVector::zeros(m);
        let mut total = 0.0;
        // Assignment per measurement: None = clutter.
        let mut assign: Vec<Option<usize>> = vec![None; m];
        fn rec(
            k: usize,
            q: &DMatrix<f64>,
            p_detect: f64,
            lambda: f64,
            used: &mut Vec<bool>,
            assign: &mut Vec<Option<usize>>,
            w: &mut DMatrix<f64>,
            clutter: &mut DVector<f64>,
            total: &mut f64,
        ) {
            let (m, n) = q.shape();
            if k == m {
                let mut p = 1.0;
                for (kk, a) in assign.iter().enumerate() {
                    if let Some(j) = a {
                        p *= q[(kk, *j)] / lambda;
                    }
                }
                let detected = used.iter().filter(|u| **u).count();
                p *= p_detect.powi(detected as i32) * (1.0 - p_detect).powi((n - detected) as i32);
                *total += p;
                for (kk, a) in assign.iter().enumerate() {
                    match a {
                        Some(j) => w[(kk, *j)] += p,
                        None => clutter[kk] += p,
                    }
                }
                return;
            }
            assign[k] = None;
            rec(k + 1, q, p_detect, lambda, used, assign, w, clutter, total);
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    assign[k] = Some(j);
                    rec(k + 1, q, p_detect, lambda, used, assign, w, clutter, total);
                    used[j] = false;
                }
            }
            assign[k] = None;
        }
        let mut used = vec![false; n];
        rec(0, q, p_detect, lambda, &mut used, &mut assign, &mut w, &mut clutter, &mut total);
        if total > 0.0 {
            w /= total;
            clutter /= total;
        }
        (w, clutter)
    }

    /// Best total score over all injective maps between the smaller and the larger side.
    pub fn best_assignment_score(scores: &DMatrix<f64>) -> f64 {
        let (m, n) = scores.shape();
        let mut best = f64::NEG_INFINITY;
        if m <= n {
            for_each_injection(m, n, |d| {
                best = best.max(d.iter().enumerate().map(|(k, &j)| scores[(k, j)]).sum());
            });
        } else {
            for_each_injection(n, m, |d| {
                best = best.max(d.iter().enumerate().map(|(j, &k)| scores[(k, j)]).sum());
            });
        }
        best
    }

    /// Textbook Kalman update written out with an explicit inverse.
    pub fn kf_update_direct(belief: &GaussianBelief, z: &DVector<f64>, model: &LinearModel) -> GaussianBelief {
        let h = &model.h;
        let s = h * &belief.cov * h.transpose() + &model.v;
        let k = &belief.cov * h.transpose() * s.try_inverse().expect("invertible innovation");
        let mean = &belief.mean + &k * (z - h * &belief.mean);
        let cov = (DMatrix::identity(belief.dim(), belief.dim()) - &k * h) * &belief.cov;
        GaussianBelief::new(mean, cov)
    }

    /// Moments of the JPDAF Gaussian mixture: the prior with the missed
    /// mass plus one standard-KF posterior per measurement.
    pub fn jpdaf_mixture_moments(
        belief: &GaussianBelief,
        measurements: &[DVector<f64>],
        weights: &[f64],
        model: &LinearModel,
    ) -> GaussianBelief {
        let missed = 1.0 - weights.iter().sum::<f64>();
        let mut comps: Vec<(f64, GaussianBelief)> = vec![(missed, belief.clone())];
        for (z, &w) in measurements.iter().zip(weights) {
            comps.push((w, kf_update_direct(belief, z, model)));
        }
        let n = belief.dim();
        let mut mean = DVector::zeros(n);
        for (w, c) in &comps {
            mean += *w * &c.mean;
        }
        let mut cov = DMatrix::zeros(n, n);
        for (w, c) in &comps {
            let d = &c.mean - &mean;
            cov += *w * (&c.cov + &d * d.transpose());
        }
        GaussianBelief::new(mean, cov)
    }

    /// Pooled-measurement update: one KF step with `Σ w z / Σ w` and noise `V / Σ w`.
    pub fn pmht_pooled_direct(
        belief: &GaussianBelief,
        measurements: &[DVector<f64>],
        weights: &[f64],
        model: &LinearModel,
    ) -> GaussianBelief {
        let total: f64 = weights.iter().sum();
        let mut z = DVector::zeros(model.meas_dim());
        for (zk, &w) in measurements.iter().zip(weights) {
            z += w * zk;
        }
        z /= total;
        let mut pooled = model.clone();
        pooled.v = &model.v / total;
        kf_update_direct(belief, &z, &pooled)
    }
}

/// Named check and whether it passed.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Permanent implementation under test; swappable so a harness can inject faults.
pub type PermanentFn = fn(&DMatrix<f64>) -> crate::Result<f64>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Runs the small-size oracle suites with the library's own permanent.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    run_with_permanent(seed, assoc::permanent)
}

pub fn run_with_permanent(seed: u64, permanent: PermanentFn) -> Vec<CheckOutcome> {
    vec![
        check_permanent(seed, permanent),
        check_pkf_weights(seed),
        check_jpdaf_weights(seed),
        check_pkf_update(seed),
        check_update_variants(seed),
    ]
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.random::<f64>())
}

fn check_permanent(seed: u64, permanent: PermanentFn) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..200 {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(1..=n);
        let q = random_matrix(&mut rng, m, n);
        match permanent(&q) {
            Ok(p) => worst = worst.max(rel(p, oracle::permanent_by_enumeration(&q))),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    CheckOutcome {
        name: "permanent vs enumeration",
        passed: failure.is_none() && worst < 1e-10,
        detail: failure.unwrap_or_else(|| format!("max rel err {worst:.2e}")),
    }
}

fn check_pkf_weights(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let m = rng.random_range(1..=n);
        let q = random_matrix(&mut rng, m, n);
        match LikelihoodMatrix::new(q.clone()).and_then(|lm| assoc::pkf_weights(&lm)) {
            Ok(w) => worst = worst.max((&w.w - oracle::pkf_weights_by_enumeration(&q)).amax()),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    CheckOutcome {
        name: "pkf weights vs event sum",
        passed: failure.is_none() && worst < 1e-10,
        detail: failure.unwrap_or_else(|| format!("max abs err {worst:.2e}")),
    }
}

fn check_jpdaf_weights(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1bda);
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let q = random_matrix(&mut rng, m, n);
        let p_d = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.05..1.0);
        let (w_ref, c_ref) = oracle::jpdaf_weights_by_events(&q, p_d, lambda);
        match LikelihoodMatrix::new(q).and_then(|lm| assoc::jpdaf_weights(&lm, p_d, lambda)) {
            Ok(w) => {
                let c = w.clutter.expect("jpdaf weights carry clutter");
                worst = worst.max((&w.w - w_ref).amax()).max((c - c_ref).amax());
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }
    CheckOutcome {
        name: "jpdaf weights vs event enumeration",
        passed: failure.is_none() && worst < 1e-10,
        detail: failure.unwrap_or_else(|| format!("max abs err {worst:.2e}")),
    }
}

/// Random SPD matrix `A Aᵀ + εI`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * eps
}

/// Random model with state dim `n` and measurement dim `m`.
pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearModel {
    let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let g = DMatrix::zeros(n, 1);
    let w = random_spd(rng, n, 0.1);
    let h = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let v = random_spd(rng, m, 0.2);
    LinearModel::new(f, g, w, h, v).expect("conforming random model")
}

pub fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> GaussianBelief {
    let mean = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    GaussianBelief::new(mean, random_spd(rng, n, 0.1))
}

fn check_pkf_update(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf11e);
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..100 {
        let n = rng.random_range(1..=7);
        let m = rng.random_range(1..=n);
        let model = random_model(&mut rng, n, m);
        let prior = random_belief(&mut rng, n);
        let count = rng.random_range(1..=4);
        let zs: Vec<DVector<f64>> = (0..count).map(|_| DVector::from_fn(m, |_, _| rng.random_range(-5.0..5.0))).collect();
        let ws: Vec<f64> = (0..count).map(|_| rng.random_range(0.25..1.0)).collect();
        let a = filter::pkf_update(&prior, &zs, &ws, &model);
        let b = filter::oracle::info_form_update(&prior, &zs, &ws, &model);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let scale = b.cov.amax().max(b.mean.amax()).max(1.0);
                worst = worst.max((&a.mean - &b.mean).amax() / scale).max((&a.cov - &b.cov).amax() / scale);
            }
            (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
        }
    }
    CheckOutcome {
        name: "pkf update vs information form",
        passed: failure.is_none() && worst < 1e-8,
        detail: failure.unwrap_or_else(|| format!("max rel err {worst:.2e}")),
    }
}

fn check_update_variants(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..50 {
        let model = random_model(&mut rng, 4, 2);
        let prior = random_belief(&mut rng, 4);
        let z = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let zs = [z.clone()];
        let results = [
            filter::kf_update(&prior, &z, &model),
            filter::pkf_update(&prior, &zs, &[1.0], &model),
            filter::jpdaf_update(&prior, &zs, &[1.0], &model),
            filter::pmht_update(&prior, &zs, &[1.0], &model),
        ];
        let direct = oracle::kf_update_direct(&prior, &z, &model);
        for r in results {
            match r {
                Ok(b) => worst = worst.max((&b.mean - &direct.mean).amax()).max((&b.cov - &direct.cov).amax()),
                Err(e) => failure = Some(e.to_string()),
            }
        }
    }
    CheckOutcome {
        name: "single-measurement updates coincide",
        passed: failure.is_none() && worst < 1e-9,
        detail: failure.unwrap_or_else(|| format!("max abs err {worst:.2e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_clean_build() {
        for outcome in run_all(1) {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }

    #[test]
    fn injected_permanent_fault_is_caught() {
        fn off_by_a_bit(q: &DMatrix<f64>) -> crate::Result<f64> {
            assoc::permanent(q).map(|p| p * (1.0 + 1e-6))
        }
        let outcomes = run_with_permanent(1, off_by_a_bit);
        assert!(!outcomes[0].passed);
    }

    #[test]
    fn enumeration_oracles_on_hand_cases() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(oracle::permanent_by_enumeration(&q), 10.0);
        let w = oracle::pkf_weights_by_enumeration(&q);
        assert!((w[(0, 0)] - 4.0 / 10.0).abs() < 1e-15);
        let (w, c) = oracle::jpdaf_weights_by_events(&DMatrix::from_element(1, 1, 0.2), 0.9, 0.125);
        let expected = 0.9 * 0.2 / (0.9 * 0.2 + 0.125 * 0.1);
        assert!((w[(0, 0)] - expected).abs() < 1e-15);
        assert!((c[0] - (1.0 - expected)).abs() < 1e-15);
    }
}
