//! Association weights: permanent-based marginals (PKF), clutter-aware joint
//! marginals (JPDAF) and independent per-measurement posteriors (PMHT).

use nalgebra::{DMatrix, DVector};

use super::components::{connected_components, Component};
use super::permanent::{minor, permanent_with_cap, DEFAULT_SIZE_CAP};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Measurement-by-object likelihoods with per-row normalisation.
#[derive(Debug, Clone)]
pub struct LikelihoodMatrix {
    raw: DMatrix<f64>,
    scaled: DMatrix<f64>,
    row_scales: DVector<f64>,
}

impl LikelihoodMatrix {
    /// Validates entries (finite, non-negative) and divides each row by its max.
    /// All-zero rows keep scale 1.
    pub fn new(raw: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = raw.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Contract(format!("likelihood entry {bad} is not finite and non-negative")));
        }
        let mut scaled = raw.clone();
        let mut row_scales = DVector::from_element(raw.nrows(), 1.0);
        for (k, mut row) in scaled.row_iter_mut().enumerate() {
            let max = row.max();
            if max > 0.0 {
                row /= max;
                row_scales[k] = max;
            }
        }
        Ok(Self { raw, scaled, row_scales })
    }

    pub fn raw(&self) -> &DMatrix<f64> {
        &self.raw
    }

    pub fn scaled(&self) -> &DMatrix<f64> {
        &self.scaled
    }

    pub fn row_scales(&self) -> &DVector<f64> {
        &self.row_scales
    }

    pub fn shape(&self) -> (usize, usize) {
        self.raw.shape()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Pkf,
    Jpdaf,
    Pmht,
}

/// Association probabilities `w[k][j]`, with an optional clutter column.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    pub w: DMatrix<f64>,
    pub clutter: Option<DVector<f64>>,
    pub mode: WeightMode,
    /// Rows whose weights came from a fallback instead of the exact formula.
    pub degenerate_rows: Vec<usize>,
}

impl WeightMatrix {
    /// `Σ_j w[k][j]` plus clutter mass, if any.
    pub fn row_mass(&self, k: usize) -> f64 {
        self.w.row(k).sum() + self.clutter.as_ref().map_or(0.0, |c| c[k])
    }

    /// Weights of object `j` over all measurements.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.w.column(j).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WeightOptions {
    pub size_cap: usize,
    pub exec: Execution,
    /// Split into connected components of the positive-entry graph first.
    pub decompose: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { size_cap: DEFAULT_SIZE_CAP, exec: Execution::Parallel, decompose: true }
    }
}

/// Components worth shipping to another thread.
const PARALLEL_MIN_BLOCK: usize = 8;

fn gather(q: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| q[(rows[a], cols[b])])
}

fn blocks_for(q: &DMatrix<f64>, opts: &WeightOptions) -> Vec<Component> {
    if opts.decompose {
        connected_components(q)
            .into_iter()
            .filter(|c| !c.rows.is_empty() && !c.cols.is_empty())
            .collect()
    } else {
        let rows: Vec<usize> = (0..q.nrows()).filter(|&k| q.row(k).iter().any(|&x| x > 0.0)).collect();
        if rows.is_empty() || q.ncols() == 0 {
            Vec::new()
        } else {
            vec![Component { rows, cols: (0..q.ncols()).collect() }]
        }
    }
}

fn run_blocks<R: Send>(
    blocks: &[Component],
    opts: &WeightOptions,
    f: impl Fn(&Component) -> R + Sync + Send,
) -> Vec<R> {
    let exec = if blocks.len() > 1 && blocks.iter().any(|b| b.size() >= PARALLEL_MIN_BLOCK) {
        opts.exec
    } else {
        Execution::Sequential
    };
    par::map(exec, blocks, f)
}

/// Marginal association probabilities from permanents with default options.
pub fn pkf_weights(q: &LikelihoodMatrix) -> Result<WeightMatrix> {
    pkf_weights_with(q, &WeightOptions::default())
}

/// `w[k][j] ∝ Q[k][j] · per(Q with row k and column j removed)`, rows normalised.
///
/// Blocks with more measurements than objects are solved with the roles
/// swapped (objects choose measurements) and normalised per object, so their
/// rows sum to the probability that the measurement is used at all.
/// All-zero rows get uniform weights and are reported in `degenerate_rows`.
pub fn pkf_weights_with(q: &LikelihoodMatrix, opts: &WeightOptions) -> Result<WeightMatrix> {
    let scaled = q.scaled();
    let (m, n) = scaled.shape();
    let mut w = DMatrix::zeros(m, n);
    let mut degenerate = Vec::new();

    for k in 0..m {
        if n > 0 && scaled.row(k).iter().all(|&x| x == 0.0) {
            log::warn!("measurement {k} has zero likelihood for every object; using uniform weights");
            w.row_mut(k).fill(1.0 / n as f64);
            degenerate.push(k);
        }
    }

    let blocks = blocks_for(scaled, opts);
    let results = run_blocks(&blocks, opts, |b| {
        if b.rows.len() > b.cols.len() {
            pkf_block(&gather(q.raw(), &b.rows, &b.cols), opts.size_cap)
        } else {
            pkf_block(&gather(scaled, &b.rows, &b.cols), opts.size_cap)
        }
    });
    for (b, res) in blocks.iter().zip(results) {
        let (sub_w, bad_rows) = res?;
        for (a, &k) in b.rows.iter().enumerate() {
            for (c, &j) in b.cols.iter().enumerate() {
                w[(k, j)] = sub_w[(a, c)];
            }
        }
        degenerate.extend(bad_rows.into_iter().map(|a| b.rows[a]));
    }
    degenerate.sort_unstable();
    Ok(WeightMatrix { w, clutter: None, mode: WeightMode::Pkf, degenerate_rows: degenerate })
}

/// Weights for one block; returns local indices of rows that needed a fallback.
fn pkf_block(sub: &DMatrix<f64>, cap: usize) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (m, n) = sub.shape();
    if m.max(n) > cap {
        return Err(Error::Capacity { size: m.max(n), cap });
    }
    if m <= n {
        let (w, bad) = normalized_minor_products(sub, cap)?;
        Ok((w, bad))
    } else {
        // Row scaling only commutes with the per-row normalisation, so scale
        // the transposed problem's rows afresh.
        let mut t = sub.transpose();
        for mut row in t.row_iter_mut() {
            let s = row.max();
            if s > 0.0 {
                row /= s;
            }
        }
        let (wt, bad_objects) = normalized_minor_products(&t, cap)?;
        if !bad_objects.is_empty() {
            log::warn!("{} object(s) in a block had no feasible joint association", bad_objects.len());
        }
        Ok((wt.transpose(), Vec::new()))
    }
}

/// Row-normalised `Q[k][j]·per(Q₋ₖⱼ)` for `M ≤ N`. Rows with zero total
/// (no injective completion exists) fall back to their normalised likelihoods.
fn normalized_minor_products(q: &DMatrix<f64>, cap: usize) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let (m, n) = q.shape();
    let mut w = DMatrix::zeros(m, n);
    let mut bad = Vec::new();
    for k in 0..m {
        for j in 0..n {
            let qkj = q[(k, j)];
            if qkj > 0.0 {
                w[(k, j)] = qkj * permanent_with_cap(&minor(q, k, j), cap)?;
            }
        }
        let total: f64 = w.row(k).sum();
        if total > 0.0 {
            w.row_mut(k).unscale_mut(total);
        } else {
            let row_total: f64 = q.row(k).sum();
            if row_total > 0.0 {
                let fallback = q.row(k) / row_total;
                w.row_mut(k).copy_from(&fallback);
            }
            bad.push(k);
        }
    }
    Ok((w, bad))
}

/// Largest block solved by clutter-subset enumeration; bigger ones use the
/// subset-mask recursion in [`jpdaf_weights_dp`].
const JPDAF_ENUM_MAX: usize = 6;
/// Largest mask side for the recursion (memory is `rows · 2^mask`).
const JPDAF_DP_MASK_MAX: usize = 16;

fn check_jpdaf_params(p_detect: f64, lambda: f64) -> Result<()> {
    if !(p_detect > 0.0 && p_detect <= 1.0) {
        return Err(Error::Contract(format!("p_detect = {p_detect} outside (0, 1]")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Contract(format!("lambda = {lambda} must be positive")));
    }
    Ok(())
}

/// Per-row scaling for the clutter model: each row of `Q` and its clutter
/// density `λ` are divided by `max(max_j Q[k][j], λ)`.
fn clutter_scaled(raw: &DMatrix<f64>, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut q = raw.clone();
    let mut c = DVector::from_element(raw.nrows(), 1.0);
    for (k, mut row) in q.row_iter_mut().enumerate() {
        let s = row.max().max(lambda);
        row /= s;
        c[k] = lambda / s;
    }
    (q, c)
}

/// JPDAF marginals with clutter.
///
/// Events assign each measurement to clutter or to a distinct object. With
/// `Φ` clutter measurements an event has weight
/// `λ^Φ · p_D^{M−Φ} · (1−p_D)^{N−M+Φ} · Π_assigned Q[k][δ(k)]`
/// (the common factor `λ^{−M}` dropped). For each `Φ` and clutter subset the
/// inner sum over assignments uses permanent minors; large blocks switch to
/// [`jpdaf_weights_dp`]. Rows of `w` plus `clutter` sum to one.
pub fn jpdaf_weights(q: &LikelihoodMatrix, p_detect: f64, lambda: f64) -> Result<WeightMatrix> {
    jpdaf_weights_with(q, p_detect, lambda, &WeightOptions::default())
}

pub fn jpdaf_weights_with(
    q: &LikelihoodMatrix,
    p_detect: f64,
    lambda: f64,
    opts: &WeightOptions,
) -> Result<WeightMatrix> {
    check_jpdaf_params(p_detect, lambda)?;
    let (scaled, cl) = clutter_scaled(q.raw(), lambda);
    let (m, n) = scaled.shape();
    let mut w = DMatrix::zeros(m, n);
    let mut clutter = DVector::from_element(m, 1.0);

    let blocks = blocks_for(&scaled, opts);
    let results = run_blocks(&blocks, opts, |b| {
        let sub = gather(&scaled, &b.rows, &b.cols);
        let sub_c = DVector::from_iterator(b.rows.len(), b.rows.iter().map(|&k| cl[k]));
        if sub.nrows() <= JPDAF_ENUM_MAX && sub.ncols() <= JPDAF_ENUM_MAX {
            jpdaf_block_enumerate(&sub, &sub_c, p_detect, opts.size_cap)
        } else {
            jpdaf_block_dp(&sub, &sub_c, p_detect)
        }
    });
    let mut degenerate = Vec::new();
    for (b, res) in blocks.iter().zip(results) {
        let (sub_w, sub_c) = res?;
        match sub_w {
            Some(sub_w) => {
                for (a, &k) in b.rows.iter().enumerate() {
                    for (c, &j) in b.cols.iter().enumerate() {
                        w[(k, j)] = sub_w[(a, c)];
                    }
                    clutter[k] = sub_c[a];
                }
            }
            None => degenerate.extend(b.rows.iter().copied()),
        }
    }
    degenerate.sort_unstable();
    Ok(WeightMatrix { w, clutter: Some(clutter), mode: WeightMode::Jpdaf, degenerate_rows: degenerate })
}

/// The subset-mask recursion on its own, without decomposition.
pub fn jpdaf_weights_dp(q: &LikelihoodMatrix, p_detect: f64, lambda: f64) -> Result<WeightMatrix> {
    check_jpdaf_params(p_detect, lambda)?;
    let (scaled, cl) = clutter_scaled(q.raw(), lambda);
    let (m, _) = scaled.shape();
    let (w, clutter) = jpdaf_block_dp(&scaled, &cl, p_detect)?;
    let (w, clutter, degenerate) = match w {
        Some(w) => (w, clutter, Vec::new()),
        None => (DMatrix::zeros(m, scaled.ncols()), DVector::from_element(m, 1.0), (0..m).collect()),
    };
    Ok(WeightMatrix { w, clutter: Some(clutter), mode: WeightMode::Jpdaf, degenerate_rows: degenerate })
}

type BlockWeights = (Option<DMatrix<f64>>, DVector<f64>);

fn jpdaf_block_enumerate(q: &DMatrix<f64>, c: &DVector<f64>, p_detect: f64, cap: usize) -> Result<BlockWeights> {
    let (m, n) = q.shape();
    let mut w = DMatrix::zeros(m, n);
    let mut clutter = DVector::zeros(m);
    let mut total = 0.0;
    for phi in m.saturating_sub(n)..=m {
        let base = p_detect.powi((m - phi) as i32) * (1.0 - p_detect).powi((n + phi - m) as i32);
        if base == 0.0 {
            continue;
        }
        for mask in 0u32..(1u32 << m) {
            if mask.count_ones() as usize != phi {
                continue;
            }
            let clutter_rows: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
            let kept: Vec<usize> = (0..m).filter(|k| mask & (1 << k) == 0).collect();
            let factor = base * clutter_rows.iter().map(|&k| c[k]).product::<f64>();
            if factor == 0.0 {
                continue;
            }
            let mass = if kept.is_empty() {
                factor
            } else {
                let sub = DMatrix::from_fn(kept.len(), n, |a, j| q[(kept[a], j)]);
                let mut first_row_total = 0.0;
                for (a, &k) in kept.iter().enumerate() {
                    for j in 0..n {
                        if sub[(a, j)] > 0.0 {
                            let t = factor * sub[(a, j)] * permanent_with_cap(&minor(&sub, a, j), cap)?;
                            w[(k, j)] += t;
                            if a == 0 {
                                first_row_total += t;
                            }
                        }
                    }
                }
                first_row_total
            };
            for &k in &clutter_rows {
                clutter[k] += mass;
            }
            total += mass;
        }
    }
    if total > 0.0 {
        w /= total;
        clutter /= total;
        Ok((Some(w), clutter))
    } else {
        Ok((None, DVector::from_element(m, 1.0)))
    }
}

/// Marginals by a forward/backward recursion over subsets of the smaller side.
///
/// Items of the longer side are processed in sequence; each either pairs
/// with an unused mask item or stays unpaired. Cost `O(S · 2^T · T)`.
fn jpdaf_block_dp(q: &DMatrix<f64>, c: &DVector<f64>, p_detect: f64) -> Result<BlockWeights> {
    let (m, n) = q.shape();
    let miss = 1.0 - p_detect;
    if m.min(n) > JPDAF_DP_MASK_MAX {
        return Err(Error::Capacity { size: m.min(n), cap: JPDAF_DP_MASK_MAX });
    }
    if n <= m {
        // Sequence: measurements (unpaired = clutter). Mask: objects.
        let pair = DMatrix::from_fn(m, n, |k, j| q[(k, j)]);
        let unpaired: Vec<f64> = c.iter().copied().collect();
        let used: Vec<f64> = vec![p_detect; n];
        let unused: Vec<f64> = vec![miss; n];
        let Some((pw, up)) = subset_recursion(&pair, &unpaired, &used, &unused) else {
            return Ok((None, DVector::from_element(m, 1.0)));
        };
        Ok((Some(pw), DVector::from_vec(up)))
    } else {
        // Sequence: objects (unpaired = missed). Mask: measurements.
        let pair = DMatrix::from_fn(n, m, |j, k| p_detect * q[(k, j)]);
        let unpaired = vec![miss; n];
        let used = vec![1.0; m];
        let unused: Vec<f64> = c.iter().copied().collect();
        let Some((pw, _)) = subset_recursion(&pair, &unpaired, &used, &unused) else {
            return Ok((None, DVector::from_element(m, 1.0)));
        };
        let w = pw.transpose();
        let clutter = DVector::from_fn(m, |k, _| (1.0 - w.row(k).sum()).max(0.0));
        Ok((Some(w), clutter))
    }
}

/// Returns pair marginals `P(i ↔ t)` and unpaired marginals for each sequence item.
fn subset_recursion(
    pair: &DMatrix<f64>,
    unpaired: &[f64],
    used: &[f64],
    unused: &[f64],
) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let (s, t) = pair.shape();
    let size = 1usize << t;

    // Terminal factor per final mask.
    let mut terminal = vec![1.0f64; size];
    for b in 0..t {
        let bit = 1usize << b;
        for mask in 0..bit {
            terminal[mask | bit] = terminal[mask] * used[b];
            terminal[mask] *= unused[b];
        }
    }

    let mut forward = vec![vec![0.0f64; size]; s + 1];
    forward[0][0] = 1.0;
    for i in 0..s {
        let (head, tail) = forward.split_at_mut(i + 1);
        let (cur, next) = (&head[i], &mut tail[0]);
        for mask in 0..size {
            let f = cur[mask];
            if f == 0.0 {
                continue;
            }
            next[mask] += f * unpaired[i];
            for b in 0..t {
                let bit = 1usize << b;
                if mask & bit == 0 {
                    next[mask | bit] += f * pair[(i, b)];
                }
            }
        }
    }
    let total: f64 = forward[s].iter().zip(&terminal).map(|(f, g)| f * g).sum();
    if !(total > 0.0) {
        return None;
    }

    let mut pw = DMatrix::zeros(s, t);
    let mut up = vec![0.0; s];
    let mut back = terminal;
    for i in (0..s).rev() {
        let fwd = &forward[i];
        let mut prev = vec![0.0f64; size];
        for mask in 0..size {
            let f = fwd[mask];
            let stay = unpaired[i] * back[mask];
            let mut acc = stay;
            up[i] += f * stay;
            for b in 0..t {
                let bit = 1usize << b;
                if mask & bit == 0 {
                    let v = pair[(i, b)] * back[mask | bit];
                    acc += v;
                    pw[(i, b)] += f * v;
                }
            }
            prev[mask] = acc;
        }
        back = prev;
    }
    pw /= total;
    for u in &mut up {
        *u /= total;
    }
    Some((pw, up))
}

/// Independent per-measurement posteriors, `w[k][j] = Q[k][j] / Σ_j Q[k][j]`.
///
/// Every measurement is attributed to some object; there is no clutter class
/// and no exclusivity between measurements. All-zero rows get uniform weights.
pub fn pmht_weights(q: &LikelihoodMatrix) -> Result<WeightMatrix> {
    let scaled = q.scaled();
    let (m, n) = scaled.shape();
    let mut w = scaled.clone();
    let mut degenerate = Vec::new();
    for k in 0..m {
        let total = scaled.row(k).sum();
        if total > 0.0 {
            w.row_mut(k).unscale_mut(total);
        } else if n > 0 {
            w.row_mut(k).fill(1.0 / n as f64);
            degenerate.push(k);
        }
    }
    Ok(WeightMatrix { w, clutter: None, mode: WeightMode::Pmht, degenerate_rows: degenerate })
}

/// Independent per-measurement posteriors with a clutter class:
/// `w[k][j] = p_D Q[k][j] / (λ + p_D Σ_j Q[k][j])`.
pub fn pmht_weights_with_clutter(q: &LikelihoodMatrix, p_detect: f64, lambda: f64) -> Result<WeightMatrix> {
    check_jpdaf_params(p_detect, lambda)?;
    let (scaled, cl) = clutter_scaled(q.raw(), lambda);
    let (m, n) = scaled.shape();
    let mut w = DMatrix::zeros(m, n);
    let mut clutter = DVector::zeros(m);
    for k in 0..m {
        let denom = cl[k] + p_detect * scaled.row(k).sum();
        for j in 0..n {
            w[(k, j)] = p_detect * scaled[(k, j)] / denom;
        }
        clutter[k] = cl[k] / denom;
    }
    Ok(WeightMatrix { w, clutter: Some(clutter), mode: WeightMode::Pmht, degenerate_rows: Vec::new() })
}
