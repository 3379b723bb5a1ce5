//! Exact subset probabilities of a small L-ensemble.
//!
//! Run with `cargo run --example dpp_probability`.

use dppmask::{normalization_constant, subset_probability, LEnsemble, SymMatrix};

fn main() {
    // items 0 and 1 are near-duplicates, item 2 is different
    let l = LEnsemble::from_matrix(
        SymMatrix::from_rows(&[
            vec![1.0, 0.9, 0.1],
            vec![0.9, 1.0, 0.1],
            vec![0.1, 0.1, 1.0],
        ])
        .unwrap(),
    );
    println!("det(L + I) = {:.6}", normalization_constant(&l));

    let mut total = 0.0;
    for mask in 0u32..8 {
        let subset: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
        let p = subset_probability(&l, &subset).unwrap();
        total += p;
        println!("P({subset:?}) = {p:.6}");
    }
    println!("sum over all subsets = {total:.12}");
    println!(
        "similar pair {{0,1}} is {:.1}x less likely than diverse pair {{0,2}}",
        subset_probability(&l, &[0, 2]).unwrap() / subset_probability(&l, &[0, 1]).unwrap()
    );
}
