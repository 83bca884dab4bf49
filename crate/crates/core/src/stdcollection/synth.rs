//! Seeded synthetic datasets in the collection's file formats.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `n` points in two features, split evenly across `centers.len()`
/// isotropic Gaussian clusters. CSV with header `x0,x1,label`.
pub fn gaussian_blobs(n: usize, centers: &[[f64; 2]], std: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, std).expect("finite std");
    let mut out = String::from("x0,x1,label\n");
    for i in 0..n {
        let c = i % centers.len();
        let x0 = centers[c][0] + noise.sample(&mut rng);
        let x1 = centers[c][1] + noise.sample(&mut rng);
        writeln!(out, "{x0:.6},{x1:.6},{c}").unwrap();
    }
    out
}

/// The two-class blobs used by the MLP fixture: 200 samples, seed 7.
pub fn two_class_blobs() -> String {
    gaussian_blobs(200, &[[-1.5, -1.0], [1.5, 1.0]], 0.6, 7)
}

/// Four clusters at the corners of a square: 64 samples, seed 11.
pub fn four_class_blobs() -> String {
    gaussian_blobs(
        64,
        &[[-2.0, -2.0], [2.0, -2.0], [-2.0, 2.0], [2.0, 2.0]],
        0.5,
        11,
    )
}

/// `y = w·x + b + noise` over three uniform features in [-1, 1].
/// CSV with header `x0,x1,x2,y`.
pub fn linear_regression(n: usize, w: [f64; 3], b: f64, noise_std: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std).expect("finite std");
    let mut out = String::from("x0,x1,x2,y\n");
    for _ in 0..n {
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let y = w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + b + noise.sample(&mut rng);
        writeln!(out, "{:.6},{:.6},{:.6},{y:.6}", x[0], x[1], x[2]).unwrap();
    }
    out
}

/// The regression fixture: 128 samples, seed 3.
pub fn regression_fixture() -> String {
    linear_regression(128, [1.5, -2.0, 0.5], 0.25, 0.05, 3)
}

/// `n` space-separated token lines of length 2..=max_len with ids in
/// `1..vocab_size`, so that id 0 is free for padding.
pub fn token_sequences(n: usize, max_len: usize, vocab_size: usize, seed: u64) -> String {
    assert!(max_len >= 2 && vocab_size >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..n {
        let len = rng.gen_range(2..=max_len);
        let line: Vec<String> = (0..len)
            .map(|_| rng.gen_range(1..vocab_size).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// The sequence fixture: 32 lines, length ≤ 8, vocabulary 6, seed 5.
pub fn sequence_fixture() -> String {
    token_sequences(32, 8, 6, 5)
}
