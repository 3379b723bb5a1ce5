//! Parallel masks for a batch; each item has its own reproducible stream.
//!
//! Run with `cargo run --example batch_masks`.

use dppmask::masking::{generate_mask_with_rng, item_rng};
use dppmask::{batch_masks, patchify, Image, MaskConfig};

fn main() {
    let images: Vec<Image> = (0..4u64)
        .map(|s| {
            Image::from_fn(96, 96, 1, |r, c, _| ((r * c) as u64 * (s + 3) % 256) as u8).unwrap()
        })
        .collect();
    let config = MaskConfig {
        seed: 42,
        ..MaskConfig::default()
    };
    let items: Vec<_> = images
        .iter()
        .map(|im| patchify(im, config.patch_size).unwrap())
        .collect();

    for (i, result) in batch_masks(&items, &config).into_iter().enumerate() {
        let result = result.unwrap();
        let (grid, features) = &items[i];
        let again = generate_mask_with_rng(
            features,
            grid,
            &config,
            &mut item_rng(config.seed, i as u64),
        )
        .unwrap();
        assert_eq!(again, result);
        println!("item {i}: visible {:?}", result.visible);
    }
}
