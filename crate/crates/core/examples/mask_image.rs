//! Masks a synthetic image and writes the mask document and an overlay.
//!
//! Run with `cargo run --example mask_image [out_dir]`.

use std::path::PathBuf;

use dppmask::io::{write_image, write_mask, write_overlay};
use dppmask::{mask_image, mask_to_bitmap, Image, MaskConfig, MaskDocument};

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    std::fs::create_dir_all(&out).unwrap();

    // sky gradient with a checkered object in the lower middle
    let image = Image::from_fn(128, 128, 3, |r, c, ch| {
        if (80..112).contains(&r) && (32..96).contains(&c) {
            if (r / 4 + c / 4) % 2 == 0 {
                230
            } else {
                20
            }
        } else {
            [120, 160, 200][ch] + (r / 8 + (r * 5 + c * 3) % 7) as u8
        }
    })
    .unwrap();
    let config = MaskConfig {
        patch_size: 16,
        purge_ratio: 0.3,
        seed: 3,
        ..MaskConfig::default()
    };
    let result = mask_image(&image, &config).unwrap();
    println!(
        "visible {:?} ({} picked greedily)",
        result.visible, result.greedy_count
    );
    for row in mask_to_bitmap(&result) {
        println!(
            "{}",
            row.iter()
                .map(|&v| if v { '#' } else { '.' })
                .collect::<String>()
        );
    }

    write_image(out.join("scene.ppm"), &image).unwrap();
    write_mask(
        out.join("scene.mask.json"),
        &MaskDocument::from_result(&result),
    )
    .unwrap();
    write_overlay(&image, &result, out.join("scene.overlay.ppm")).unwrap();
    println!(
        "wrote scene.ppm, scene.mask.json, scene.overlay.ppm to {}",
        out.display()
    );
}
