//! Diversity-preserving patch masks for masked image modeling.
//!
//! Patches of an image are treated as the ground set of a determinantal
//! point process with a Gaussian L-ensemble. Visible patches are chosen by
//! greedy MAP inference, with incremental Cholesky updates, until the best
//! remaining marginal gain drops below a purge ratio `τ`; the rest of the
//! visible budget is filled uniformly at random. `τ = 0` gives fully greedy
//! selection and `τ = 1` plain random masking.
//!
//! ```
//! use dppmask::{mask_image, Image, MaskConfig};
//!
//! let image = Image::from_fn(64, 64, 3, |r, c, ch| ((r * c + ch * 40) % 256) as u8).unwrap();
//! let config = MaskConfig { patch_size: 16, mask_ratio: 0.75, purge_ratio: 0.8, ..Default::default() };
//! let mask = mask_image(&image, &config).unwrap();
//! assert_eq!(mask.visible.len(), 4);
//! ```
//!
//! Module map:
//!
//! - [`numerics`]: Cholesky, log-determinants, principal submatrices
//! - [`kernel`]: feature matrices and the Gaussian kernel
//! - [`dpp`]: exact probabilities, exhaustive MAP, greedy MAP and the purge-ratio sampler
//! - [`masking`]: patchify, shuffle, sample, map back to grid positions
//! - [`io`]: PGM/PPM, feature files, mask documents, overlays
//! - [`verify`], [`stats`], [`bench`]: the machinery behind the CLI subcommands

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod cli;
pub mod dpp;
pub mod image;
pub mod io;
pub mod kernel;
pub mod masking;
pub mod numerics;
pub mod stats;
pub mod verify;

pub use dpp::{
    exact_map, greedy_init, greedy_map, greedy_step, normalization_constant, sample_mask,
    subset_probability, DppError, GreedyState, SampleResult,
};
pub use image::Image;
pub use io::{IoError, MaskDocument};
pub use kernel::{gaussian_kernel, normalize_rows, FeatureMatrix, KernelError, LEnsemble};
pub use masking::{
    batch_masks, generate_mask, mask_image, mask_to_bitmap, patchify, FeatureMode, MaskConfig,
    MaskError, MaskResult, PatchGrid,
};
pub use numerics::{cholesky, log_det, submatrix, CholeskyFactor, NumericsError, SymMatrix};
