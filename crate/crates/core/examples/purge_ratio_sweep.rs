//! How the purge ratio trades determinism for diversity.
//!
//! Run with `cargo run --example purge_ratio_sweep`.

use dppmask::stats::tau_sweep;
use dppmask::{patchify, Image, MaskConfig};

fn main() {
    let image = Image::from_fn(64, 64, 1, |r, c, _| {
        if r >= 40 && (16..48).contains(&c) {
            ((r * 37 + c * 91) % 251) as u8
        } else {
            (170 + r / 4 + (((r * 64 + c) * 2654435761) >> 13) % 6) as u8
        }
    })
    .unwrap();
    let config = MaskConfig {
        patch_size: 8,
        // pixel patches of one image are close in cosine terms; a narrow
        // bandwidth spreads the kernel out
        epsilon: 0.05,
        ..MaskConfig::default()
    };
    let (grid, features) = patchify(&image, 8).unwrap();
    let taus = [0.0, 0.6, 0.8, 0.9, 1.0];
    println!(
        "{:>5} {:>9} {:>8} {:>9} {:>9}",
        "tau", "jaccard", "greedy", "sim", "log det"
    );
    for s in tau_sweep(&features, &grid, &config, &taus, 30).unwrap() {
        println!(
            "{:>5} {:>9.3} {:>8.1} {:>9.4} {:>9.2}",
            s.tau,
            s.jaccard_distance.mean,
            s.greedy_count.mean,
            s.kernel_similarity.mean,
            s.log_det.mean
        );
    }
}
