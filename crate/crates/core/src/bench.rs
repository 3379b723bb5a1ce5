//! Wall-clock timing of mask generation.
//!
//! Timed regions cover the in-memory pipeline only: row normalization,
//! shuffle, kernel construction and selection. Both the greedy and the
//! random mode run the same pipeline, so their ratio isolates the cost of
//! greedy selection.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::dpp::{binomial, exact_map, DppError};
use crate::kernel::{gaussian_kernel, normalize_rows, FeatureMatrix};
use crate::masking::{generate_mask_with_rng, item_rng, FeatureMode, MaskConfig, PatchGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `(N, k)` pairs to time.
    pub sizes: Vec<(usize, usize)>,
    /// Feature dimension (768 = 16×16 RGB patches).
    pub dim: usize,
    pub repeats: usize,
    pub seed: u64,
    pub greedy_tau: f64,
    pub enum_budget: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![(196, 49), (64, 16), (12, 3)],
            dim: 768,
            repeats: 50,
            seed: 0,
            greedy_tau: 0.8,
            enum_budget: crate::dpp::DEFAULT_ENUM_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub mean: Duration,
    pub median: Duration,
}

impl Timing {
    pub fn from_samples(mut samples: Vec<Duration>) -> Timing {
        assert!(!samples.is_empty());
        samples.sort_unstable();
        let mean = samples.iter().sum::<Duration>() / samples.len() as u32;
        let mid = samples.len() / 2;
        let median = if samples.len().is_multiple_of(2) {
            (samples[mid - 1] + samples[mid]) / 2
        } else {
            samples[mid]
        };
        Timing { mean, median }
    }

    fn to_json(self) -> Value {
        json!({
            "mean_ms": self.mean.as_secs_f64() * 1e3,
            "median_ms": self.median.as_secs_f64() * 1e3,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeReport {
    pub n: usize,
    pub k: usize,
    pub greedy: Timing,
    pub random: Timing,
    /// Timing of exhaustive MAP, or why it was skipped.
    pub exact_map: Result<Timing, String>,
}

impl SizeReport {
    /// Median greedy time over median random time.
    pub fn greedy_to_random(&self) -> f64 {
        self.greedy.median.as_secs_f64() / self.random.median.as_secs_f64()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "k": self.k,
            "greedy": self.greedy.to_json(),
            "random": self.random.to_json(),
            "greedy_to_random": self.greedy_to_random(),
            "exact_map": match &self.exact_map {
                Ok(t) => t.to_json(),
                Err(reason) => json!({ "skipped": reason }),
            },
        })
    }
}

pub fn uniform_features(n: usize, dim: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::new(n, dim, (0..n * dim).map(|_| rng.random::<f64>()).collect())
        .expect("n, dim >= 1")
}

/// Times one `(N, k)` size: `repeats` masks each in greedy and random mode,
/// and exhaustive MAP when `C(N, k)` fits the budget.
pub fn time_size(n: usize, k: usize, cfg: &BenchConfig) -> SizeReport {
    assert!(k >= 1 && k <= n && cfg.repeats >= 1);
    let features = uniform_features(n, cfg.dim, cfg.seed);
    let grid = PatchGrid::flat(n);
    let base = MaskConfig {
        mask_ratio: (n - k) as f64 / n as f64,
        seed: cfg.seed,
        mode: FeatureMode::Feature,
        ..MaskConfig::default()
    };
    let run = |tau: f64| {
        let mc = MaskConfig {
            purge_ratio: tau,
            ..base.clone()
        };
        let samples = (0..cfg.repeats)
            .map(|r| {
                let mut rng = item_rng(cfg.seed, r as u64);
                let start = Instant::now();
                let result = generate_mask_with_rng(&features, &grid, &mc, &mut rng)
                    .expect("valid bench config");
                let elapsed = start.elapsed();
                debug_assert_eq!(result.visible.len(), k);
                elapsed
            })
            .collect();
        Timing::from_samples(samples)
    };
    let greedy = run(cfg.greedy_tau);
    let random = run(1.0);

    let exact = if binomial(n, k) > cfg.enum_budget {
        Err(DppError::InstanceTooLarge {
            n,
            k,
            subsets: binomial(n, k),
            budget: cfg.enum_budget,
        }
        .to_string())
    } else {
        let kernel =
            gaussian_kernel(&normalize_rows(&features), base.epsilon).expect("unit bandwidth");
        let reps = cfg.repeats.min(5);
        let samples = (0..reps)
            .map(|_| {
                let start = Instant::now();
                let picked = exact_map(&kernel, k, cfg.enum_budget);
                let elapsed = start.elapsed();
                debug_assert!(picked.is_ok());
                elapsed
            })
            .collect();
        Ok(Timing::from_samples(samples))
    };

    SizeReport {
        n,
        k,
        greedy,
        random,
        exact_map: exact,
    }
}

pub fn run(cfg: &BenchConfig) -> Vec<SizeReport> {
    cfg.sizes
        .iter()
        .map(|&(n, k)| time_size(n, k, cfg))
        .collect()
}
