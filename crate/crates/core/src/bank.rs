//! Deterministic pseudo-random probe fields used by the calibration and
//! verification suites. Everything is seeded explicitly so reruns are
//! byte-identical.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::field::ScalarField;
use crate::grid::Grid;

pub const DEFAULT_SEED: u64 = 0xB11A_B5EE_D001;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
pub fn std_normal(rng: &mut ChaCha20Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Random combination of low-order tensor cosines (smooth probe).
pub fn smooth_field(grid: &Arc<Grid>, rng: &mut ChaCha20Rng) -> ScalarField {
    let n = grid.dim();
    let max_mode = 4usize;
    let mode_count = (max_mode + 1).pow(n as u32);
    let coeffs: Vec<f64> = (0..mode_count).map(|_| std_normal(rng)).collect();
    let lengths = grid.side_lengths().to_vec();
    ScalarField::from_real_fn(grid.clone(), move |x| {
        let mut acc = 0.0;
        for (mi, &c) in coeffs.iter().enumerate() {
            let mut rem = mi;
            let mut term = c;
            for d in 0..n {
                let m = rem % (max_mode + 1);
                rem /= max_mode + 1;
                term *= (m as f64 * PI * x[d] / lengths[d]).cos();
            }
            acc += term;
        }
        acc
    })
}

/// Independent standard normal value at every node (rough probe).
pub fn rough_field(grid: &Arc<Grid>, rng: &mut ChaCha20Rng) -> ScalarField {
    let values: Vec<Complex64> = (0..grid.node_count())
        .map(|_| Complex64::new(std_normal(rng), 0.0))
        .collect();
    ScalarField::new(grid.clone(), values).expect("sized to grid")
}

/// Alternating smooth/rough probe bank.
pub fn mixed_bank(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                smooth_field(grid, &mut r)
            } else {
                rough_field(grid, &mut r)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn bank_is_deterministic() {
        let g = build_grid(2, &[1.0, 1.0], &[7, 7]).unwrap();
        let a = mixed_bank(&g, 4, 7);
        let b = mixed_bank(&g, 4, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
        }
    }
}
