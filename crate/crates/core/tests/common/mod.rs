// Shared helpers for integration tests; included with `mod common;`.
#![allow(dead_code)]

use jdr_core::csbm::{sample_csbm, CsbmParams};
use jdr_core::graph::Dataset;

pub fn csbm(n: usize, f: usize, phi: f64, seed: u64) -> Dataset {
    sample_csbm(&CsbmParams::from_phi(n, f, 5.0, phi, 3.25, seed).unwrap()).unwrap()
}

pub fn overlap_sq(v: &[f64], y: &[f64]) -> f64 {
    let n = v.len() as f64;
    let d: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
    d * d / n
}
