//! Discrete Fourier transforms of zero-extended fields and the H^{-1} norm.
//!
//! The convention is `f̂(ξ) = ∫_Ω f(x) e^{-iξ·x} dx`, realized as the FFT of
//! the trapezoid-weighted samples placed in a padded periodic box. Padding
//! only refines the ξ lattice; the forward samples are exact quadratures of
//! the integral at every lattice frequency. With this convention,
//!
//!   ‖f‖²_{H^{-1}}  =  (2π)^{-n} Σ_ξ (1+|ξ|²)^{-1} |f̂(ξ)|² Δξ^n,
//!
//! and the discrete Parseval sum `(2π)^{-n} Σ |f̂|² Δξ^n` never exceeds the
//! quadrature L² norm (boundary weights are strictly smaller than interior
//! ones), so H^{-1} ≤ L² holds by construction.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct FourierField {
    grid: Arc<Grid>,
    /// Modes per axis of the padded lattice.
    mode_counts: Vec<usize>,
    /// ξ lattice spacing per axis (radians per length unit).
    xi_spacing: Vec<f64>,
    samples: Vec<Complex64>,
}

impl FourierField {
    /// Empty (all-zero) lattice for a grid at the given padding factor.
    pub fn empty_lattice(grid: Arc<Grid>, padding: f64) -> Result<Self> {
        if !(padding >= 1.0) {
            return Err(Error::validation(format!("padding factor {padding} must be >= 1")));
        }
        let mode_counts: Vec<usize> = grid
            .nodes_per_axis()
            .iter()
            .map(|&c| ((c as f64) * padding).ceil() as usize)
            .collect();
        let xi_spacing: Vec<f64> = mode_counts
            .iter()
            .zip(grid.spacing())
            .map(|(&m, &h)| 2.0 * std::f64::consts::PI / (m as f64 * h))
            .collect();
        let total: usize = mode_counts.iter().product();
        Ok(FourierField {
            grid,
            mode_counts,
            xi_spacing,
            samples: vec![Complex64::ZERO; total],
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mode_counts(&self) -> &[usize] {
        &self.mode_counts
    }

    pub fn xi_spacing(&self) -> &[f64] {
        &self.xi_spacing
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    fn strides(&self) -> Vec<usize> {
        let n = self.mode_counts.len();
        let mut s = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.mode_counts[d + 1];
        }
        s
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut rem = flat;
        (0..self.mode_counts.len())
            .map(|d| {
                let i = rem / strides[d];
                rem %= strides[d];
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(&i, s)| i * s).sum()
    }

    /// Signed mode numbers of a wrapped index (standard FFT frequency layout).
    pub fn signed_modes(&self, idx: &[usize]) -> Vec<i64> {
        idx.iter()
            .zip(&self.mode_counts)
            .map(|(&m, &count)| {
                let half = (count + 1) / 2;
                if m < half { m as i64 } else { m as i64 - count as i64 }
            })
            .collect()
    }

    /// Frequency vector at a wrapped index.
    pub fn xi_at(&self, idx: &[usize]) -> Vec<f64> {
        self.signed_modes(idx)
            .iter()
            .zip(&self.xi_spacing)
            .map(|(&m, &dxi)| m as f64 * dxi)
            .collect()
    }

    /// Wrapped index of the negated frequency.
    pub fn mirror_index(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter()
            .zip(&self.mode_counts)
            .map(|(&m, &count)| (count - m) % count)
            .collect()
    }

    pub fn sample_at(&self, idx: &[usize]) -> Complex64 {
        self.samples[self.flat_index(idx)]
    }

    /// Cell measure of the ξ lattice, `∏ Δξ_d`.
    pub fn cell_measure(&self) -> f64 {
        self.xi_spacing.iter().product()
    }

    /// `(2π)^{-n} Σ |f̂|² Δξ^n`, the Parseval estimate of ‖f‖²_{L²}.
    pub fn parseval_l2_sq(&self) -> f64 {
        let n = self.grid.dim() as i32;
        let scale = self.cell_measure() / (2.0 * std::f64::consts::PI).powi(n);
        scale * self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// H^{-1} norm of the originating field through the (1+|ξ|²)^{-1} weight.
    pub fn hminus1_norm(&self) -> f64 {
        let n = self.grid.dim() as i32;
        let scale = self.cell_measure() / (2.0 * std::f64::consts::PI).powi(n);
        let mut acc = 0.0;
        for flat in 0..self.samples.len() {
            let idx = self.multi_index(flat);
            let xi = self.xi_at(&idx);
            let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
            acc += self.samples[flat].norm_sqr() / (1.0 + xi_sq);
        }
        (scale * acc).sqrt()
    }

    /// Enforce `f̂(-ξ) = conj(f̂(ξ))` by averaging mirror pairs.
    pub fn hermitian_symmetrize(&mut self) {
        for flat in 0..self.samples.len() {
            let idx = self.multi_index(flat);
            let mirror = self.flat_index(&self.mirror_index(&idx));
            if mirror == flat {
                self.samples[flat] = Complex64::new(self.samples[flat].re, 0.0);
            } else if mirror > flat {
                let avg = 0.5 * (self.samples[flat] + self.samples[mirror].conj());
                self.samples[flat] = avg;
                self.samples[mirror] = avg.conj();
            }
        }
    }

    /// Inverse transform onto the originating grid (restriction to Ω).
    pub fn inverse_to_grid(&self) -> ScalarField {
        let mut buf = self.samples.clone();
        fft_all_axes(&mut buf, &self.mode_counts, rustfft::FftDirection::Inverse);
        let scale: f64 = 1.0
            / self
                .mode_counts
                .iter()
                .zip(self.grid.spacing())
                .map(|(&m, &h)| m as f64 * h)
                .product::<f64>();
        let strides = self.strides();
        let g = &self.grid;
        let mut values = vec![Complex64::ZERO; g.node_count()];
        for (flat, v) in values.iter_mut().enumerate() {
            let idx = g.multi_index(flat);
            let padded: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
            *v = buf[padded] * scale;
        }
        ScalarField::new(self.grid.clone(), values).expect("grid sizes match")
    }
}

/// Forward transform of the zero-extended field; Hermitian-symmetrized when
/// the input is real.
pub fn fourier_transform(field: &ScalarField, padding: f64) -> Result<FourierField> {
    let mut out = FourierField::empty_lattice(field.grid().clone(), padding)?;
    let strides = out.strides();
    let g = field.grid();
    {
        let buf = out.samples_mut();
        for (flat, (&v, &w)) in field.values().iter().zip(g.node_weights()).enumerate() {
            let idx = g.multi_index(flat);
            let padded: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
            buf[padded] = v * w;
        }
    }
    let counts = out.mode_counts.clone();
    fft_all_axes(out.samples_mut(), &counts, rustfft::FftDirection::Forward);
    if field.is_real() {
        out.hermitian_symmetrize();
    }
    Ok(out)
}

fn fft_all_axes(data: &mut [Complex64], counts: &[usize], direction: rustfft::FftDirection) {
    let n = counts.len();
    let mut strides = vec![1usize; n];
    for d in (0..n.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * counts[d + 1];
    }
    let total = data.len();
    let mut planner = FftPlanner::new();
    for d in 0..n {
        let len = counts[d];
        let stride = strides[d];
        let fft = planner.plan_fft(len, direction);
        let mut scratch = vec![Complex64::ZERO; len];
        let lines = total / len;
        for line in 0..lines {
            // Decompose the line number into (block before axis, offset after axis).
            let pre = line / stride;
            let post = line % stride;
            let base = pre * stride * len + post;
            for i in 0..len {
                scratch[i] = data[base + i * stride];
            }
            fft.process(&mut scratch);
            for i in 0..len {
                data[base + i * stride] = scratch[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = build_grid(2, &[1.0, 1.0], &[9, 9]).unwrap();
        let f = ScalarField::zeros(g);
        let hat = fourier_transform(&f, 2.0).unwrap();
        assert!(hat.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn constant_field_zero_mode_is_volume() {
        let g = build_grid(3, &[1.0; 3], &[17; 3]).unwrap();
        let f = ScalarField::constant(g, Complex64::new(1.0, 0.0));
        let hat = fourier_transform(&f, 2.0).unwrap();
        let zero = hat.sample_at(&[0, 0, 0]);
        assert!((zero.re - 1.0).abs() < 1e-10);
        assert!(zero.im.abs() < 1e-12);
    }

    /// Quadrature oracle for f̂(ξ) = ∫ f e^{-iξ·x} dx, independent of the FFT.
    fn direct_sample(f: &ScalarField, xi: &[f64]) -> Complex64 {
        let g = f.grid();
        let mut acc = Complex64::ZERO;
        for (flat, (&v, &w)) in f.values().iter().zip(g.node_weights()).enumerate() {
            let x = g.position(flat);
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += w * v * Complex64::new(0.0, -phase).exp();
        }
        acc
    }

    #[test]
    fn single_exponential_mass_sits_at_its_own_frequency() {
        // A single exponential integrates to the volume against its own
        // frequency and to zero against ξ = 0 when the frequency matches a
        // full period of the box.
        let g = build_grid(3, &[1.0; 3], &[33; 3]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| Complex64::new(0.0, -2.0 * PI * x[0]).exp());
        let at_own = direct_sample(&f, &[-2.0 * PI, 0.0, 0.0]);
        let at_zero = direct_sample(&f, &[0.0, 0.0, 0.0]);
        assert!((at_own.re - 1.0).abs() < 1e-12 && at_own.im.abs() < 1e-12, "{at_own}");
        assert!(at_zero.norm() < 1e-12, "{at_zero}");
    }

    #[test]
    fn fft_samples_match_direct_quadrature() {
        let g = build_grid(3, &[1.0; 3], &[17; 3]).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| {
            Complex64::new((2.1 * x[0] - x[2]).cos(), (0.7 * x[1]).sin())
        });
        let hat = fourier_transform(&f, 2.0).unwrap();
        for idx in [[0usize, 0, 0], [1, 0, 0], [3, 2, 1], [33, 0, 5], [2, 31, 33]] {
            let xi = hat.xi_at(&idx);
            let oracle = direct_sample(&f, &xi);
            let got = hat.sample_at(&idx);
            assert!((got - oracle).norm() < 1e-10, "idx {idx:?}: {got} vs {oracle}");
        }
        // The matching-frequency peak is an exact quadrature of the constant 1.
        let dxi = hat.xi_spacing()[0];
        let m = 3usize;
        let xi0 = m as f64 * dxi;
        let f2 = ScalarField::from_fn(g, |x| Complex64::new(0.0, xi0 * x[0]).exp());
        let hat2 = fourier_transform(&f2, 2.0).unwrap();
        let peak = hat2.sample_at(&[m, 0, 0]);
        assert!((peak.re - 1.0).abs() < 1e-12 && peak.im.abs() < 1e-12, "{peak}");
    }

    #[test]
    fn hermitian_symmetry_for_real_fields() {
        let g = build_grid(2, &[1.0, 1.05], &[13, 11]).unwrap();
        let f = ScalarField::from_real_fn(g, |x| (1.7 * x[0]).sin() + x[1] * x[1]);
        let hat = fourier_transform(&f, 2.0).unwrap();
        for flat in 0..hat.samples().len() {
            let idx = hat.multi_index(flat);
            let mir = hat.mirror_index(&idx);
            let a = hat.sample_at(&idx);
            let b = hat.sample_at(&mir);
            assert_eq!(a.re, b.re);
            assert_eq!(a.im, -b.im);
        }
    }

    #[test]
    fn forward_inverse_roundtrip_interior() {
        let g = build_grid(2, &[1.0, 1.1], &[17, 15]).unwrap();
        let f = ScalarField::from_real_fn(g.clone(), |x| {
            (PI * x[0]).sin() * (PI * x[1] / 1.1).sin()
        });
        let hat = fourier_transform(&f, 2.0).unwrap();
        let back = hat.inverse_to_grid();
        // Interior nodes reproduce exactly (weight ∏h cancels); boundary nodes
        // of this field are zero anyway.
        for flat in 0..g.node_count() {
            let diff = (back.values()[flat] - f.values()[flat]).norm();
            assert!(diff < 1e-10, "node {flat}: {diff}");
        }
    }
}
