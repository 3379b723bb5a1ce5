//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls the crate's Cholesky or greedy routines; determinants
//! come from Gaussian elimination with partial pivoting.

#![allow(dead_code)]

use dppmask::{FeatureMatrix, Image, LEnsemble};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Determinant by Gaussian elimination with partial pivoting.
pub fn lu_det(m: &[f64], n: usize) -> f64 {
    let mut a = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
            .unwrap();
        if a[p * n + col] == 0.0 {
            return 0.0;
        }
        if p != col {
            for k in 0..n {
                a.swap(col * n + k, p * n + k);
            }
            det = -det;
        }
        let piv = a[col * n + col];
        det *= piv;
        for r in col + 1..n {
            let f = a[r * n + col] / piv;
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
        }
    }
    det
}

/// `det(L_A)`, evaluated in ascending index order so equal sets give
/// bit-identical values.
pub fn sub_det(l: &LEnsemble, idx: &[usize]) -> f64 {
    let mut idx = idx.to_vec();
    idx.sort_unstable();
    let k = idx.len();
    let mut m = Vec::with_capacity(k * k);
    for &i in &idx {
        for &j in &idx {
            m.push(l.get(i, j));
        }
    }
    lu_det(&m, k)
}

pub fn log_sub_det(l: &LEnsemble, idx: &[usize]) -> f64 {
    sub_det(l, idx).ln()
}

/// `Σ_{A ⊆ S} det(L_A)` over all `2^N` subsets.
pub fn subset_sum(l: &LEnsemble) -> f64 {
    let n = l.order();
    (0u32..1 << n)
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            sub_det(l, &idx)
        })
        .sum()
}

/// `det(L + I)` via elimination.
pub fn shifted_det(l: &LEnsemble) -> f64 {
    let n = l.order();
    let mut m = l.matrix().entries().to_vec();
    for i in 0..n {
        m[i * n + i] += 1.0;
    }
    lu_det(&m, n)
}

/// Greedy MAP recomputing `det(L_{Y ∪ {i}})` from scratch for every candidate.
pub fn naive_greedy(l: &LEnsemble, k: usize) -> Vec<usize> {
    let n = l.order();
    let mut sel = Vec::new();
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !sel.contains(i)) {
            let mut s = sel.clone();
            s.push(i);
            let d = sub_det(l, &s);
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        sel.push(best.unwrap().0);
    }
    sel
}

/// Exhaustive `max det(L_A)` over `|A| = k`, as a log-determinant.
pub fn best_log_det(l: &LEnsemble, k: usize) -> f64 {
    fn rec(l: &LEnsemble, k: usize, start: usize, cur: &mut Vec<usize>, best: &mut f64) {
        if cur.len() == k {
            *best = best.max(sub_det(l, cur));
            return;
        }
        for i in start..l.order() {
            cur.push(i);
            rec(l, k, i + 1, cur, best);
            cur.pop();
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(l, k, 0, &mut Vec::new(), &mut best);
    best.ln()
}

pub fn uniform_features(rng: &mut impl Rng, n: usize, dim: usize) -> FeatureMatrix {
    FeatureMatrix::new(
        n,
        dim,
        (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn random_gaussian_kernel(rng: &mut impl Rng, n: usize, dim: usize) -> LEnsemble {
    let f = dppmask::normalize_rows(&uniform_features(rng, n, dim));
    dppmask::gaussian_kernel(&f, 1.0).unwrap()
}

/// 64×64 grayscale scene, 8×8 patches: a smooth noisy sky over the top five
/// patch rows, flat ground at the bottom, and a 2×4-patch textured object
/// standing on the ground.
pub fn sky_foreground_image() -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise: Vec<i32> = (0..64 * 64).map(|_| rng.random_range(-3..=3)).collect();
    let texture: Vec<u8> = (0..64 * 64).map(|_| rng.random()).collect();
    Image::from_fn(64, 64, 1, |r, c, _| {
        let n = noise[r * 64 + c];
        if (40..56).contains(&r) && (16..48).contains(&c) {
            texture[r * 64 + c]
        } else if r < 40 {
            (170 + (r / 4) as i32 + n) as u8
        } else {
            (70 + n) as u8
        }
    })
    .unwrap()
}

/// Grid indices of the textured object in [`sky_foreground_image`].
pub fn sky_foreground_object_patches() -> Vec<usize> {
    (5..7)
        .flat_map(|pr| (2..6).map(move |pc| pr * 8 + pc))
        .collect()
}

/// 16×16 grayscale, 4×4 patches: twelve identical flat patches and four
/// patches each holding one bright pixel at a different offset.
pub fn flat_with_four_objects() -> (Image, Vec<usize>) {
    let objects = [(0usize, 1usize, 0usize), (1, 3, 5), (2, 0, 10), (3, 2, 15)];
    let image = Image::from_fn(16, 16, 1, |r, c, _| {
        let (pr, pc, off) = (r / 4, c / 4, (r % 4) * 4 + c % 4);
        match objects.iter().find(|o| o.0 == pr && o.1 == pc) {
            Some(o) if o.2 == off => 255,
            Some(_) => 0,
            None => 90,
        }
    })
    .unwrap();
    let idx = objects.iter().map(|o| o.0 * 4 + o.1).collect();
    (image, idx)
}
