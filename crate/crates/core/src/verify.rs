//! Randomized self-checks of the DPP machinery against slow direct routes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dpp::{greedy_map, normalization_constant, GreedyState};
use crate::kernel::{gaussian_kernel, normalize_rows, FeatureMatrix, LEnsemble};
use crate::numerics::{log_det, psd_det, submatrix};

pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
pub const GAIN_IDENTITY_TOLERANCE: f64 = 1e-8;

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// A Gaussian kernel over `n` normalized uniform random vectors in `dim` dimensions.
pub fn random_kernel<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> LEnsemble {
    let values = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = FeatureMatrix::new(n, dim, values).expect("n, dim >= 1");
    gaussian_kernel(&normalize_rows(&f), 1.0).expect("unit bandwidth")
}

/// `Σ_A det(L_A)` by visiting all `2^N` subsets.
pub fn brute_force_normalizer(l: &LEnsemble) -> f64 {
    let n = l.order();
    assert!(n < 26, "2^{n} subsets is too many to enumerate");
    let mut idx = Vec::with_capacity(n);
    (0u32..1 << n)
        .map(|mask| {
            idx.clear();
            idx.extend((0..n).filter(|i| mask >> i & 1 == 1));
            psd_det(&submatrix(l.matrix(), &idx).expect("valid indices"))
        })
        .sum()
}

/// Compares `det(L + I)` with the exhaustive subset sum for N cycling through 2..=12.
pub fn normalization_suite(trials: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "normalization",
        trials,
        checks: 0,
        failures: 0,
        max_error: 0.0,
        tolerance: NORMALIZATION_TOLERANCE,
    };
    for t in 0..trials {
        let n = 2 + t % 11;
        let l = random_kernel(&mut rng, n, 4);
        let closed = normalization_constant(&l);
        let err = (brute_force_normalizer(&l) - closed).abs() / closed;
        record(&mut report, err);
    }
    report
}

/// At every greedy step and for every remaining candidate `i`, checks
/// `det(L_{Y ∪ {i}}) = det(L_Y)·d_i²` against direct factorizations.
pub fn marginal_gain_suite(
    trials: usize,
    seed: u64,
    n: usize,
    k: usize,
    corrupt_update: bool,
) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "marginal-gain-identity",
        trials,
        checks: 0,
        failures: 0,
        max_error: 0.0,
        tolerance: GAIN_IDENTITY_TOLERANCE,
    };
    for _ in 0..trials {
        let l = random_kernel(&mut rng, n, 8);
        let mut state = GreedyState::new(&l);
        state.inject_update_fault(corrupt_update);
        let mut union = Vec::with_capacity(k + 1);
        for _ in 0..k.min(n) {
            let base = state.selected().to_vec();
            let base_det = psd_det(&submatrix(l.matrix(), &base).unwrap());
            for i in (0..n).filter(|&i| !state.is_selected(i)) {
                union.clear();
                union.extend_from_slice(&base);
                union.push(i);
                let direct = psd_det(&submatrix(l.matrix(), &union).unwrap());
                let predicted = base_det * state.gains()[i];
                let scale = direct.abs().max(predicted.abs()).max(f64::MIN_POSITIVE);
                record(&mut report, (direct - predicted).abs() / scale);
            }
            if state.step(&l).is_err() {
                break;
            }
        }
    }
    report
}

/// Greedy MAP that re-factorizes `L_{Y ∪ {i}}` for every candidate at every
/// step. First index wins among equal log-determinants.
pub fn greedy_map_from_scratch(l: &LEnsemble, k: usize) -> Vec<usize> {
    let n = l.order();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut trial = Vec::with_capacity(k);
    for _ in 0..k.min(n) {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !selected.contains(i)) {
            trial.clear();
            trial.extend_from_slice(&selected);
            trial.push(i);
            let ld = log_det(&submatrix(l.matrix(), &trial).unwrap()).unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(_, b)| ld > b) {
                best = Some((i, ld));
            }
        }
        selected.push(best.expect("candidates remain").0);
    }
    selected
}

/// Incremental greedy vs. [`greedy_map_from_scratch`] on N = 10..=50, k = N/2.
/// The error column counts mismatched positions.
pub fn consistency_suite(trials: usize, seed: u64, corrupt_update: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        name: "incremental-vs-naive-greedy",
        trials,
        checks: 0,
        failures: 0,
        max_error: 0.0,
        tolerance: 0.0,
    };
    for t in 0..trials {
        let n = 10 + (t * 7) % 41;
        let k = n / 2;
        let l = random_kernel(&mut rng, n, 8);
        let fast = if corrupt_update {
            let mut s = GreedyState::new(&l);
            s.inject_update_fault(true);
            (0..k).map_while(|_| s.step(&l).ok().map(|p| p.0)).collect()
        } else {
            greedy_map(&l, k).unwrap_or_default()
        };
        let slow = greedy_map_from_scratch(&l, k);
        let mismatches = slow.iter().zip(&fast).filter(|(a, b)| a != b).count()
            + slow.len().abs_diff(fast.len());
        record(&mut report, mismatches as f64);
    }
    report
}

fn record(report: &mut SuiteReport, err: f64) {
    report.checks += 1;
    if err.is_nan() || err > report.tolerance {
        report.failures += 1;
    }
    if err.is_nan() || err > report.max_error {
        report.max_error = if err.is_nan() { f64::INFINITY } else { err };
    }
}

/// Runs all three suites with `trials` instances each. The gain-identity
/// suite uses N = 50, k = 25.
pub fn run_all(trials: usize, seed: u64, corrupt_update: bool) -> Vec<SuiteReport> {
    vec![
        normalization_suite(trials, seed),
        marginal_gain_suite(trials, seed.wrapping_add(1), 50, 25, corrupt_update),
        consistency_suite(trials, seed.wrapping_add(2), corrupt_update),
    ]
}
