//! From images or feature matrices to patch-level masks.
//!
//! Every run draws from a ChaCha8 stream derived from `(seed, item index)`;
//! the stream first drives the optional mask-ratio jitter, then the
//! Fisher–Yates shuffle of patch order, then the random fill. Greedy ties
//! are broken by the shuffled order, so the shuffle is the only source of
//! randomness in fully greedy mode.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dpp::{sample_mask, DppError};
use crate::image::Image;
use crate::kernel::{gaussian_kernel, normalize_rows, FeatureMatrix, KernelError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(
        "{height}x{width} image is not tiled by {patch_size}px patches; pad by {pad_bottom} rows and {pad_right} columns"
    )]
    NonDivisibleImage {
        height: usize,
        width: usize,
        patch_size: usize,
        pad_bottom: usize,
        pad_right: usize,
    },
    #[error("grid has {expected} patches but features have {got} rows")]
    PatchCountMismatch { expected: usize, got: usize },
    #[error("mask ratio {mask_ratio} leaves no visible patch out of {patches}")]
    NoVisiblePatches { mask_ratio: f64, patches: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dpp(#[from] DppError),
}

/// How patch features are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Flattened pixel intensities of each patch.
    Pixel,
    /// Externally supplied feature vectors, one per patch.
    Feature,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Pixel => "pixel",
            FeatureMode::Feature => "feature",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pixel" => Ok(FeatureMode::Pixel),
            "feature" => Ok(FeatureMode::Feature),
            other => Err(format!(
                "unknown mode {other:?} (expected pixel or feature)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskConfig {
    /// Fraction of patches hidden, in `[0, 1)`.
    pub mask_ratio: f64,
    /// Purge ratio τ in `[0, 1]`: 0 is fully greedy, 1 fully random.
    pub purge_ratio: f64,
    /// Gaussian kernel bandwidth ε.
    pub epsilon: f64,
    pub patch_size: usize,
    pub seed: u64,
    pub mode: FeatureMode,
    /// Weight on two appended grid-coordinate features; 0 disables them.
    pub position_weight: f64,
    /// Half-width of a per-item uniform perturbation of `mask_ratio`; 0 disables it.
    pub mask_ratio_jitter: f64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            mask_ratio: 0.75,
            purge_ratio: 0.8,
            epsilon: 1.0,
            patch_size: 16,
            seed: 0,
            mode: FeatureMode::Pixel,
            position_weight: 0.0,
            mask_ratio_jitter: 0.0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<(), MaskError> {
        let bad = |field, reason: &str| {
            Err(MaskError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return bad(
                "mask_ratio",
                &format!("{} is outside [0, 1)", self.mask_ratio),
            );
        }
        if !(0.0..=1.0).contains(&self.purge_ratio) {
            return bad("tau", &format!("{} is outside [0, 1]", self.purge_ratio));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(
                "epsilon",
                &format!("{} is not a positive number", self.epsilon),
            );
        }
        if self.patch_size == 0 {
            return bad("patch_size", "must be at least 1");
        }
        if !(self.position_weight >= 0.0 && self.position_weight.is_finite()) {
            return bad("position_weight", "must be a nonnegative number");
        }
        if !(0.0..1.0).contains(&self.mask_ratio_jitter) {
            return bad("mask_ratio_jitter", "must lie in [0, 1)");
        }
        Ok(())
    }

    /// `round((1 − mask_ratio)·patches)`, halves rounding up; at least 1.
    pub fn visible_count(&self, patches: usize) -> Result<usize, MaskError> {
        visible_count(self.mask_ratio, patches)
    }
}

pub fn visible_count(mask_ratio: f64, patches: usize) -> Result<usize, MaskError> {
    let k = ((1.0 - mask_ratio) * patches as f64).round() as usize;
    if k == 0 {
        return Err(MaskError::NoVisiblePatches {
            mask_ratio,
            patches,
        });
    }
    Ok(k.min(patches))
}

/// Geometry of a patch tiling. Feature-mode inputs use a `1 × N` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub image_height: usize,
    pub image_width: usize,
    pub patch_size: usize,
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl PatchGrid {
    pub fn for_image(
        height: usize,
        width: usize,
        channels: usize,
        patch_size: usize,
    ) -> Result<Self, MaskError> {
        if patch_size == 0 {
            return Err(MaskError::InvalidConfig {
                field: "patch_size",
                reason: "must be at least 1".into(),
            });
        }
        if !height.is_multiple_of(patch_size)
            || !width.is_multiple_of(patch_size)
            || height == 0
            || width == 0
        {
            let pad = |d: usize| (patch_size - d % patch_size) % patch_size;
            return Err(MaskError::NonDivisibleImage {
                height,
                width,
                patch_size,
                pad_bottom: pad(height),
                pad_right: pad(width),
            });
        }
        Ok(PatchGrid {
            image_height: height,
            image_width: width,
            patch_size,
            rows: height / patch_size,
            cols: width / patch_size,
            channels,
        })
    }

    /// A single row of `patches` unit cells.
    pub fn flat(patches: usize) -> Self {
        PatchGrid {
            image_height: 1,
            image_width: patches,
            patch_size: 1,
            rows: 1,
            cols: patches,
            channels: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits an image into `patch_size` squares. Row `r·cols + c` of the
/// returned features is patch `(r, c)` flattened row-major with interleaved
/// channels and scaled to `[0, 1]`.
pub fn patchify(image: &Image, patch_size: usize) -> Result<(PatchGrid, FeatureMatrix), MaskError> {
    let grid = PatchGrid::for_image(image.height(), image.width(), image.channels(), patch_size)?;
    let ch = image.channels();
    let dim = patch_size * patch_size * ch;
    let mut values = Vec::with_capacity(grid.len() * dim);
    for pr in 0..grid.rows {
        for pc in 0..grid.cols {
            for y in 0..patch_size {
                let start = ((pr * patch_size + y) * image.width() + pc * patch_size) * ch;
                let line = &image.pixels()[start..start + patch_size * ch];
                values.extend(line.iter().map(|&v| f64::from(v) / 255.0));
            }
        }
    }
    Ok((grid, FeatureMatrix::new(grid.len(), dim, values)?))
}

/// A mask over a patch grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskResult {
    pub grid: PatchGrid,
    /// Visible patch indices (row-major grid order), ascending.
    pub visible: Vec<usize>,
    /// Masked patch indices, ascending; the complement of `visible`.
    pub masked: Vec<usize>,
    pub greedy_count: usize,
    /// `d²` of each greedy pick, in pick order.
    pub gain_trace: Vec<f64>,
    /// The config the mask was produced with (after any ratio jitter is
    /// applied, `mask_ratio` still echoes the requested value).
    pub config: MaskConfig,
}

/// The per-item random stream: ChaCha8 keyed by `seed`, stream `index`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generates a mask using the stream `item_rng(config.seed, 0)`.
pub fn generate_mask(
    features: &FeatureMatrix,
    grid: &PatchGrid,
    config: &MaskConfig,
) -> Result<MaskResult, MaskError> {
    generate_mask_with_rng(features, grid, config, &mut item_rng(config.seed, 0))
}

/// Patchifies an image and masks it.
pub fn mask_image(image: &Image, config: &MaskConfig) -> Result<MaskResult, MaskError> {
    config.validate()?;
    let (grid, features) = patchify(image, config.patch_size)?;
    generate_mask(&features, &grid, config)
}

pub fn generate_mask_with_rng<R: Rng + ?Sized>(
    features: &FeatureMatrix,
    grid: &PatchGrid,
    config: &MaskConfig,
    rng: &mut R,
) -> Result<MaskResult, MaskError> {
    config.validate()?;
    let n = features.count();
    if grid.len() != n {
        return Err(MaskError::PatchCountMismatch {
            expected: grid.len(),
            got: n,
        });
    }
    let ratio = if config.mask_ratio_jitter > 0.0 {
        let j = config.mask_ratio_jitter;
        (config.mask_ratio + rng.random_range(-j..=j)).clamp(0.0, 1.0 - f64::EPSILON)
    } else {
        config.mask_ratio
    };
    let k = visible_count(ratio, n)?;

    let mut normalized = normalize_rows(features);
    if config.position_weight > 0.0 {
        let w = config.position_weight;
        let scale = |v: usize, extent: usize| {
            if extent > 1 {
                v as f64 / (extent - 1) as f64
            } else {
                0.0
            }
        };
        normalized = normalized.with_extra_columns(2, |i| {
            vec![
                w * scale(i / grid.cols, grid.rows),
                w * scale(i % grid.cols, grid.cols),
            ]
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let kernel = gaussian_kernel(&normalized.permuted(&order), config.epsilon)?;
    let sample = sample_mask(&kernel, k, config.purge_ratio, rng)?;

    let mut is_visible = vec![false; n];
    for &s in &sample.visible {
        is_visible[order[s]] = true;
    }
    let (visible, masked): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| is_visible[i]);
    Ok(MaskResult {
        grid: *grid,
        visible,
        masked,
        greedy_count: sample.greedy_count,
        gain_trace: sample.gain_trace,
        config: config.clone(),
    })
}

/// `rows × cols` grid, `true` where the patch is visible.
pub fn mask_to_bitmap(result: &MaskResult) -> Vec<Vec<bool>> {
    let mut bitmap = vec![vec![false; result.grid.cols]; result.grid.rows];
    for &i in &result.visible {
        bitmap[i / result.grid.cols][i % result.grid.cols] = true;
    }
    bitmap
}

/// Row-major indices of the `true` cells.
pub fn bitmap_to_indices(bitmap: &[Vec<bool>]) -> Vec<usize> {
    let cols = bitmap.first().map_or(0, Vec::len);
    bitmap
        .iter()
        .enumerate()
        .flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &v)| v)
                .map(move |(c, _)| r * cols + c)
        })
        .collect()
}

/// Masks every item independently; item `i` uses `item_rng(config.seed, i)`.
/// Output order matches input order and does not depend on scheduling.
pub fn batch_masks(
    items: &[(PatchGrid, FeatureMatrix)],
    config: &MaskConfig,
) -> Vec<Result<MaskResult, MaskError>> {
    items
        .par_iter()
        .enumerate()
        .map(|(i, (grid, features))| {
            generate_mask_with_rng(features, grid, config, &mut item_rng(config.seed, i as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn noise_features(n: usize, dim: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMatrix::new(
            n,
            dim,
            (0..n * dim).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn patchify_standard_geometry() {
        let img =
            Image::from_fn(224, 224, 3, |r, c, ch| ((r * 7 + c * 3 + ch) % 256) as u8).unwrap();
        let (grid, f) = patchify(&img, 16).unwrap();
        assert_eq!((grid.rows, grid.cols), (14, 14));
        assert_eq!(f.count(), 196);
        assert_eq!(f.dim(), 768);
        // first value of patch (1, 2) is pixel (16, 32) channel 0
        assert_eq!(f.row(16)[0], img.at(16, 32, 0) as f64 / 255.0);
        assert_eq!(f.row(16)[3 * 16 + 2], img.at(17, 32, 2) as f64 / 255.0);
    }

    #[test]
    fn patchify_small_cases() {
        let constant = Image::from_fn(32, 32, 1, |_, _, _| 77).unwrap();
        let (_, f) = patchify(&constant, 4).unwrap();
        assert_eq!(f.count(), 64);
        assert!(f.rows().all(|r| r == f.row(0)));

        let tiny = Image::new(2, 2, 1, vec![0, 255, 0, 255]).unwrap();
        let (_, f) = patchify(&tiny, 1).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 0.0, 1.0]);

        let odd = Image::from_fn(30, 33, 1, |_, _, _| 0).unwrap();
        assert_eq!(
            patchify(&odd, 16).unwrap_err(),
            MaskError::NonDivisibleImage {
                height: 30,
                width: 33,
                patch_size: 16,
                pad_bottom: 2,
                pad_right: 15
            }
        );
    }

    #[test]
    fn visible_count_rounding() {
        assert_eq!(visible_count(0.75, 196).unwrap(), 49);
        assert_eq!(visible_count(0.5, 5).unwrap(), 3); // 2.5 rounds up
        assert_eq!(visible_count(0.0, 7).unwrap(), 7);
        assert!(matches!(
            visible_count(0.9, 4),
            Err(MaskError::NoVisiblePatches { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let ok = MaskConfig::default();
        assert!(ok.validate().is_ok());
        for cfg in [
            MaskConfig {
                mask_ratio: 1.0,
                ..ok.clone()
            },
            MaskConfig {
                mask_ratio: -0.1,
                ..ok.clone()
            },
            MaskConfig {
                purge_ratio: 1.01,
                ..ok.clone()
            },
            MaskConfig {
                epsilon: 0.0,
                ..ok.clone()
            },
            MaskConfig {
                patch_size: 0,
                ..ok.clone()
            },
            MaskConfig {
                position_weight: -1.0,
                ..ok.clone()
            },
            MaskConfig {
                mask_ratio_jitter: 1.0,
                ..ok.clone()
            },
        ] {
            assert!(
                matches!(cfg.validate(), Err(MaskError::InvalidConfig { .. })),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn mask_standard_geometry() {
        let f = noise_features(196, 48, 1);
        let cfg = MaskConfig {
            seed: 11,
            ..MaskConfig::default()
        };
        let grid = PatchGrid::for_image(224, 224, 3, 16).unwrap();
        let r = generate_mask(&f, &grid, &cfg).unwrap();
        assert_eq!(r.visible.len(), 49);
        assert_eq!(r.masked.len(), 147);
        assert!(r.visible.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(generate_mask(&f, &grid, &cfg).unwrap(), r);
        assert!(matches!(
            generate_mask(&f, &PatchGrid::flat(195), &cfg),
            Err(MaskError::PatchCountMismatch { .. })
        ));
    }

    #[test]
    fn bitmap_examples() {
        let f = noise_features(4, 3, 0);
        let grid = PatchGrid::for_image(2, 2, 1, 1).unwrap();
        let mut r = generate_mask(
            &f,
            &grid,
            &MaskConfig {
                mask_ratio: 0.0,
                patch_size: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(mask_to_bitmap(&r), vec![vec![true, true], vec![true, true]]);
        r.visible = vec![0];
        r.masked = vec![1, 2, 3];
        let bm = mask_to_bitmap(&r);
        assert_eq!(bm, vec![vec![true, false], vec![false, false]]);
        assert_eq!(bitmap_to_indices(&bm), vec![0]);
    }

    #[test]
    fn batch_streams_differ_by_index() {
        let f = noise_features(36, 8, 4);
        let grid = PatchGrid::flat(36);
        let cfg = MaskConfig {
            purge_ratio: 1.0,
            mode: FeatureMode::Feature,
            ..Default::default()
        };
        let out = batch_masks(&[(grid, f.clone()), (grid, f.clone())], &cfg);
        let a = out[0].as_ref().unwrap();
        let b = out[1].as_ref().unwrap();
        assert_ne!(a.visible, b.visible);
        assert_eq!(a, &generate_mask(&f, &grid, &cfg).unwrap());
        assert!(batch_masks(&[], &cfg).is_empty());
    }

    #[test]
    fn batch_collects_errors_per_item() {
        let cfg = MaskConfig {
            mode: FeatureMode::Feature,
            ..Default::default()
        };
        let good = (PatchGrid::flat(8), noise_features(8, 2, 0));
        let bad = (PatchGrid::flat(9), noise_features(8, 2, 0));
        let out = batch_masks(&[good.clone(), bad, good], &cfg);
        assert!(out[0].is_ok());
        assert!(out[1].is_err());
        assert!(out[2].is_ok());
    }

    #[test]
    fn ratio_jitter_stays_in_range() {
        let f = noise_features(100, 4, 2);
        let cfg = MaskConfig {
            mask_ratio: 0.7,
            mask_ratio_jitter: 0.05,
            ..Default::default()
        };
        let items: Vec<_> = (0..20).map(|_| (PatchGrid::flat(100), f.clone())).collect();
        let counts: Vec<usize> = batch_masks(&items, &cfg)
            .into_iter()
            .map(|r| r.unwrap().visible.len())
            .collect();
        assert!(counts.iter().all(|&c| (25..=35).contains(&c)), "{counts:?}");
        assert!(counts.iter().any(|&c| c != counts[0]));
    }

    #[test]
    fn position_features_change_selection_space() {
        let f = FeatureMatrix::new(16, 2, vec![1.0; 32]).unwrap();
        let grid = PatchGrid::for_image(4, 4, 1, 1).unwrap();
        let plain = MaskConfig {
            purge_ratio: 0.0,
            mask_ratio: 0.75,
            patch_size: 1,
            ..Default::default()
        };
        // identical features: only one greedy pick possible
        assert_eq!(generate_mask(&f, &grid, &plain).unwrap().greedy_count, 1);
        let with_pos = MaskConfig {
            position_weight: 1.0,
            ..plain
        };
        assert_eq!(generate_mask(&f, &grid, &with_pos).unwrap().greedy_count, 4);
    }

    proptest! {
        #[test]
        fn visible_count_and_partition(n in 4usize..=400, ratio in 0.1f64..=0.9, tau in 0.0f64..=1.0, seed in any::<u64>()) {
            let f = noise_features(n, 3, seed);
            let cfg = MaskConfig { mask_ratio: ratio, purge_ratio: tau, seed, mode: FeatureMode::Feature, ..Default::default() };
            let expected = ((1.0 - ratio) * n as f64).round() as usize;
            match generate_mask(&f, &PatchGrid::flat(n), &cfg) {
                Ok(r) => {
                    prop_assert_eq!(r.visible.len(), expected);
                    let mut all: Vec<usize> = r.visible.iter().chain(&r.masked).copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                    prop_assert_eq!(bitmap_to_indices(&mask_to_bitmap(&r)), r.visible.clone());
                }
                Err(MaskError::NoVisiblePatches { .. }) => prop_assert_eq!(expected, 0),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
