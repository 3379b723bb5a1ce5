//! Exact DPP probabilities, exhaustive MAP, and fast greedy MAP inference.
//!
//! The greedy routine keeps, for every candidate `i`, the row `c_i` that
//! would extend the Cholesky factor of `L_Y` to `L_{Y ∪ {i}}` together with
//! `d_i² = L_ii − ‖c_i‖²`. Since `det L_{Y ∪ {i}} = det L_Y · d_i²`, the
//! greedy pick is simply the candidate with the largest `d_i²`, and adding
//! item `j` only costs one `O(|Y|)` dot product per remaining candidate:
//!
//! ```text
//! e_i  = (L_ji − ⟨c_j, c_i⟩) / d_j
//! c_i ← [c_i, e_i]
//! d_i² ← d_i² − e_i²
//! ```

use rand::Rng;
use thiserror::Error;

use crate::kernel::LEnsemble;
use crate::numerics::{self, submatrix, NumericsError, SymMatrix};

/// Smallest squared gain treated as a usable pivot.
pub const GAIN_FLOOR: f64 = 1e-12;

/// Default cap on the number of subsets [`exact_map`] will enumerate.
pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_ENUM_BUDGET`].
pub const ENUM_BUDGET_ENV: &str = "DPPMASK_ENUM_BUDGET";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DppError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("C({n}, {k}) = {subsets} subsets exceeds the enumeration budget of {budget}")]
    InstanceTooLarge {
        n: usize,
        k: usize,
        subsets: u64,
        budget: u64,
    },
    #[error("requested {k} items from a ground set of {n}")]
    TooManyItems { k: usize, n: usize },
    #[error("largest remaining gain {gain:e} is below the numerical floor")]
    DegenerateGain { gain: f64 },
    #[error("no unselected candidates remain")]
    Exhausted,
    #[error("purge ratio must lie in [0, 1], got {0}")]
    InvalidPurgeRatio(f64),
}

/// `P(Y = A) = det(L_A) / det(L + I)`.
pub fn subset_probability(l: &LEnsemble, indices: &[usize]) -> Result<f64, DppError> {
    let sub = submatrix(l.matrix(), indices)?;
    Ok(numerics::psd_det(&sub) / normalization_constant(l))
}

/// `det(L + I)`, the sum of `det(L_A)` over every subset `A`.
pub fn normalization_constant(l: &LEnsemble) -> f64 {
    let shifted = l.matrix().shifted(1.0);
    match numerics::log_det(&shifted) {
        Ok(ld) => ld.exp(),
        // L was not PSD; fall back to elimination so the value is still a determinant
        Err(_) => lu_det(&shifted),
    }
}

fn lu_det(m: &SymMatrix) -> f64 {
    let n = m.order();
    let mut a = m.entries().to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if a[pivot_row * n + col] == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            for k in col..n {
                a[r * n + k] -= factor * a[col * n + k];
            }
        }
    }
    det
}

/// Number of `k`-subsets of `n` items, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u64;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n as u128 - i as u128) / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Reads the enumeration budget from `DPPMASK_ENUM_BUDGET`, falling back to
/// the default when unset or unparsable.
pub fn enum_budget_from_env() -> u64 {
    std::env::var(ENUM_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_BUDGET)
}

/// Exhaustive MAP over all size-`k` subsets. Among equal determinants the
/// lexicographically smallest index list wins.
pub fn exact_map(l: &LEnsemble, k: usize, budget: u64) -> Result<Vec<usize>, DppError> {
    let n = l.order();
    if k > n {
        return Err(DppError::TooManyItems { k, n });
    }
    let subsets = binomial(n, k);
    if subsets > budget {
        return Err(DppError::InstanceTooLarge {
            n,
            k,
            subsets,
            budget,
        });
    }
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = combo.clone();
    let mut best_det = f64::NEG_INFINITY;
    loop {
        let det = numerics::psd_det(&submatrix(l.matrix(), &combo)?);
        if det > best_det {
            best_det = det;
            best.clone_from(&combo);
        }
        // next combination in lexicographic order
        let Some(pos) = (0..k).rev().find(|&p| combo[p] < n - k + p) else {
            break;
        };
        combo[pos] += 1;
        for q in pos + 1..k {
            combo[q] = combo[q - 1] + 1;
        }
    }
    Ok(best)
}

/// Incremental state of greedy MAP inference over one kernel.
#[derive(Debug, Clone)]
pub struct GreedyState {
    selected: Vec<usize>,
    c_rows: Vec<Vec<f64>>,
    gains: Vec<f64>,
    excluded: Vec<bool>,
    corrupt_update: bool,
}

impl GreedyState {
    /// Nothing selected; every `d_i² = L_ii`.
    pub fn new(l: &LEnsemble) -> Self {
        let n = l.order();
        GreedyState {
            selected: Vec::new(),
            c_rows: vec![Vec::new(); n],
            gains: l.matrix().diagonal(),
            excluded: vec![false; n],
            corrupt_update: false,
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Squared marginal gains `d_i²`. Entries of selected items are stale.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn c_row(&self, i: usize) -> &[f64] {
        &self.c_rows[i]
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.excluded[i]
    }

    pub fn remaining(&self) -> usize {
        self.excluded.len() - self.selected.len()
    }

    /// Unselected candidate with the largest `d²`; first index wins ties.
    pub fn best_candidate(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &g) in self.gains.iter().enumerate() {
            if self.excluded[i] {
                continue;
            }
            match best {
                Some((_, bg)) if g <= bg => {}
                _ => best = Some((i, g)),
            }
        }
        best
    }

    /// Deliberately breaks the `d²` update so verification suites can be
    /// shown to catch it. Never use outside fault-injection runs.
    #[doc(hidden)]
    pub fn inject_update_fault(&mut self, on: bool) {
        self.corrupt_update = on;
    }

    /// Selects the best candidate and updates every remaining candidate.
    /// Returns the picked index and its `d²`.
    pub fn step(&mut self, l: &LEnsemble) -> Result<(usize, f64), DppError> {
        let (picked, gain) = self.best_candidate().ok_or(DppError::Exhausted)?;
        if !(gain > GAIN_FLOOR) {
            return Err(DppError::DegenerateGain { gain });
        }
        self.select_unchecked(l, picked, gain);
        Ok((picked, gain))
    }

    fn select_unchecked(&mut self, l: &LEnsemble, picked: usize, gain: f64) {
        let d_picked = gain.sqrt();
        let c_picked = std::mem::take(&mut self.c_rows[picked]);
        let l_row = l.matrix().row(picked);
        self.excluded[picked] = true;
        for i in 0..self.gains.len() {
            if self.excluded[i] {
                continue;
            }
            let c_i = &mut self.c_rows[i];
            let dot: f64 = c_picked.iter().zip(c_i.iter()).map(|(a, b)| a * b).sum();
            let e = (l_row[i] - dot) / d_picked;
            c_i.push(e);
            let updated = if self.corrupt_update {
                self.gains[i] - 0.5 * e * e
            } else {
                self.gains[i] - e * e
            };
            self.gains[i] = updated.max(0.0);
        }
        self.c_rows[picked] = c_picked;
        self.selected.push(picked);
    }
}

/// Free-function form of [`GreedyState::new`].
pub fn greedy_init(l: &LEnsemble) -> GreedyState {
    GreedyState::new(l)
}

/// Free-function form of [`GreedyState::step`].
pub fn greedy_step(state: &mut GreedyState, l: &LEnsemble) -> Result<(usize, f64), DppError> {
    state.step(l)
}

/// Plain greedy MAP of size `k` (no purge threshold, no random fill).
pub fn greedy_map(l: &LEnsemble, k: usize) -> Result<Vec<usize>, DppError> {
    if k > l.order() {
        return Err(DppError::TooManyItems { k, n: l.order() });
    }
    let mut state = GreedyState::new(l);
    for _ in 0..k {
        state.step(l)?;
    }
    Ok(state.selected)
}

/// Outcome of one thresholded greedy sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    /// Greedy picks in selection order, followed by random fill.
    pub visible: Vec<usize>,
    pub greedy_count: usize,
    /// `d²` of each greedy pick.
    pub gain_trace: Vec<f64>,
    /// The largest remaining `d²` at the moment greedy selection stopped
    /// early, if it did.
    pub aborted_at_gain: Option<f64>,
}

/// Greedy selection with purge ratio `tau`, then uniform random fill.
///
/// Greedy picks are accepted while the best remaining `d²` is at least
/// `tau`. The first failure ends greedy mode for good; the remaining slots
/// are drawn uniformly without replacement from the unselected items.
/// `tau = 1` skips greedy selection entirely. Greedy mode also ends when
/// the kernel runs out of rank (best `d²` at or below [`GAIN_FLOOR`]).
pub fn sample_mask<R: Rng + ?Sized>(
    l: &LEnsemble,
    k: usize,
    tau: f64,
    rng: &mut R,
) -> Result<SampleResult, DppError> {
    let n = l.order();
    if k > n {
        return Err(DppError::TooManyItems { k, n });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(DppError::InvalidPurgeRatio(tau));
    }
    let mut visible = Vec::with_capacity(k);
    let mut gain_trace = Vec::new();
    let mut aborted_at_gain = None;
    let mut taken = vec![false; n];

    if tau < 1.0 && k > 0 {
        let mut state = GreedyState::new(l);
        while visible.len() < k {
            let (picked, gain) = state.best_candidate().ok_or(DppError::Exhausted)?;
            if gain < tau || gain <= GAIN_FLOOR {
                aborted_at_gain = Some(gain);
                break;
            }
            state.select_unchecked(l, picked, gain);
            taken[picked] = true;
            visible.push(picked);
            gain_trace.push(gain);
        }
    }
    let greedy_count = visible.len();

    let mut pool: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
    let needed = k - greedy_count;
    // partial Fisher–Yates
    for slot in 0..needed {
        let j = rng.random_range(slot..pool.len());
        pool.swap(slot, j);
    }
    visible.extend_from_slice(&pool[..needed]);

    Ok(SampleResult {
        visible,
        greedy_count,
        gain_trace,
        aborted_at_gain,
    })
}
