//! Diversity and alignment statistics of masks across purge ratios.

use serde_json::{json, Value};

use crate::kernel::{gaussian_kernel, normalize_rows, FeatureMatrix, LEnsemble};
use crate::masking::{
    generate_mask_with_rng, item_rng, MaskConfig, MaskError, MaskResult, PatchGrid,
};
use crate::numerics::{log_det, submatrix};

/// A mean with its sample variance (absent below two observations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub variance: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: 0.0,
                variance: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = (n > 1)
            .then(|| values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64);
        Summary { mean, variance }
    }

    fn to_json(self, out: &mut serde_json::Map<String, Value>, key: &str) {
        out.insert(format!("mean_{key}"), finite_or_null(self.mean));
        if let Some(v) = self.variance {
            out.insert(format!("var_{key}"), finite_or_null(v));
        }
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Statistics over repeated draws at one purge ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct TauStats {
    pub tau: f64,
    pub trials: usize,
    /// Over all pairs of draws: `1 − |A ∩ B| / |A ∪ B|`. Zero with a single draw.
    pub jaccard_distance: Summary,
    pub greedy_count: Summary,
    /// Per draw: mean kernel entry over pairs of visible patches.
    pub kernel_similarity: Summary,
    /// Per draw: `log det L_visible`; `-inf` when singular.
    pub log_det: Summary,
}

impl TauStats {
    pub fn to_json(&self) -> Value {
        let mut m = serde_json::Map::new();
        m.insert("tau".into(), json!(self.tau));
        m.insert("trials".into(), json!(self.trials));
        self.jaccard_distance.to_json(&mut m, "jaccard_distance");
        self.greedy_count.to_json(&mut m, "greedy_count");
        self.kernel_similarity.to_json(&mut m, "kernel_similarity");
        self.log_det.to_json(&mut m, "log_det");
        Value::Object(m)
    }
}

pub fn jaccard_distance(a: &[usize], b: &[usize]) -> f64 {
    // both inputs sorted ascending
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// Mean of `L_ij` over unordered pairs `i ≠ j` of `items`; 1 for fewer than two items.
pub fn mean_pair_similarity(l: &LEnsemble, items: &[usize]) -> f64 {
    let pairs = items.len() * items.len().saturating_sub(1) / 2;
    if pairs == 0 {
        return 1.0;
    }
    let total: f64 = items
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| items[a + 1..].iter().map(move |&j| (i, j)))
        .map(|(i, j)| l.get(i, j))
        .sum();
    total / pairs as f64
}

/// Draws `trials` masks per purge ratio; draw `t` uses `item_rng(config.seed, t)`.
/// Similarity and log-det use the kernel of the row-normalized features.
pub fn tau_sweep(
    features: &FeatureMatrix,
    grid: &PatchGrid,
    config: &MaskConfig,
    taus: &[f64],
    trials: usize,
) -> Result<Vec<TauStats>, MaskError> {
    config.validate()?;
    let kernel = gaussian_kernel(&normalize_rows(features), config.epsilon)?;
    taus.iter()
        .map(|&tau| {
            let cfg = MaskConfig {
                purge_ratio: tau,
                ..config.clone()
            };
            let draws: Vec<MaskResult> = (0..trials)
                .map(|t| {
                    generate_mask_with_rng(features, grid, &cfg, &mut item_rng(cfg.seed, t as u64))
                })
                .collect::<Result<_, _>>()?;
            Ok(summarize(tau, &kernel, &draws))
        })
        .collect()
}

fn summarize(tau: f64, kernel: &LEnsemble, draws: &[MaskResult]) -> TauStats {
    let mut jaccard = Vec::new();
    for (a, first) in draws.iter().enumerate() {
        for second in &draws[a + 1..] {
            jaccard.push(jaccard_distance(&first.visible, &second.visible));
        }
    }
    let mut jaccard_distance = Summary::of(&jaccard);
    if draws.len() < 2 {
        jaccard_distance.variance = None;
    }
    let greedy: Vec<f64> = draws.iter().map(|d| d.greedy_count as f64).collect();
    let sims: Vec<f64> = draws
        .iter()
        .map(|d| mean_pair_similarity(kernel, &d.visible))
        .collect();
    let dets: Vec<f64> = draws
        .iter()
        .map(|d| {
            log_det(&submatrix(kernel.matrix(), &d.visible).expect("visible indices are valid"))
                .unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    TauStats {
        tau,
        trials: draws.len(),
        jaccard_distance,
        greedy_count: Summary::of(&greedy),
        kernel_similarity: Summary::of(&sims),
        log_det: Summary::of(&dets),
    }
}
