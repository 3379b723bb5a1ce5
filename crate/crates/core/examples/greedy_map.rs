//! Greedy MAP inference step by step, compared with exhaustive search.
//!
//! Run with `cargo run --example greedy_map`.

use dppmask::dpp::DEFAULT_ENUM_BUDGET;
use dppmask::{
    exact_map, gaussian_kernel, greedy_init, log_det, normalize_rows, submatrix, FeatureMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let (n, k, dim) = (14, 5, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let features = FeatureMatrix::new(
        n,
        dim,
        (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let l = gaussian_kernel(&normalize_rows(&features), 1.0).unwrap();

    let mut state = greedy_init(&l);
    for _ in 0..k {
        let (picked, gain) = state.step(&l).unwrap();
        println!("pick {picked:>2}  d² = {gain:.5}");
    }
    let greedy = state.selected().to_vec();
    let exact = exact_map(&l, k, DEFAULT_ENUM_BUDGET).unwrap();
    let score = |s: &[usize]| log_det(&submatrix(l.matrix(), s).unwrap()).unwrap();
    println!("greedy {greedy:?} log det {:.5}", score(&greedy));
    println!("exact  {exact:?} log det {:.5}", score(&exact));
}
