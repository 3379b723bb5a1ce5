//! Masking precomputed embeddings stored as a feature file.
//!
//! Run with `cargo run --example feature_files`.

use dppmask::io::{read_features, write_features};
use dppmask::{generate_mask, FeatureMatrix, FeatureMode, MaskConfig, PatchGrid};

fn main() {
    // three tight clusters of 8 embeddings each
    let rows: Vec<Vec<f64>> = (0..24)
        .map(|i| {
            let mut v = vec![0.02 * (i % 8) as f64; 4];
            v[i / 8] += 1.0;
            v
        })
        .collect();
    let features = FeatureMatrix::from_rows(&rows).unwrap();

    let path = std::env::temp_dir().join("dppmask_example.dppf");
    write_features(&path, &features).unwrap();
    let loaded = read_features(&path).unwrap();
    assert_eq!(loaded, features);

    let config = MaskConfig {
        mask_ratio: 0.875,
        purge_ratio: 0.5,
        epsilon: 0.5,
        mode: FeatureMode::Feature,
        ..MaskConfig::default()
    };
    let result = generate_mask(&loaded, &PatchGrid::flat(loaded.count()), &config).unwrap();
    let clusters: Vec<usize> = result.visible.iter().map(|i| i / 8).collect();
    println!("visible {:?} from clusters {clusters:?}", result.visible);
    println!(
        "greedy picks {} with d² {:?}",
        result.greedy_count, result.gain_trace
    );
    std::fs::remove_file(path).ok();
}
