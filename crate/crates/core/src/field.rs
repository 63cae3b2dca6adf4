//! Complex-valued fields on grid nodes and on the concatenated boundary
//! layout, together with the norm machinery used everywhere downstream.
//!
//! The H¹ (V-)norm uses the edge-difference gradient energy, which is the
//! same quadratic form as the assembled stiffness matrix, so coercivity
//! statements are checked in a norm consistent with the operator. Pointwise
//! derivative stencils (second-order one-sided at the boundary) live here
//! too; they back the discrete normal derivative, the Green-formula defect
//! and the H² diagnostic.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct BoundaryFunction {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

/// Norm selector for `norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    /// Interior L^p for p in [1, inf]; `f64::INFINITY` selects the sup norm.
    LpInterior(f64),
    /// H¹(Ω) norm: edge-difference gradient energy plus L² mass.
    H1Interior,
    /// H^{-1} through the zero-extended Fourier transform at the given padding.
    HMinus1 { padding: f64 },
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::validation(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        ScalarField { grid, values: vec![Complex64::ZERO; n] }
    }

    pub fn constant(grid: Arc<Grid>, c: Complex64) -> Self {
        let n = grid.node_count();
        ScalarField { grid, values: vec![c; n] }
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(&grid.position(i))).collect();
        ScalarField { grid, values }
    }

    pub fn from_real_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Quadrature of the field over the box.
    pub fn integrate(&self) -> Complex64 {
        self.values
            .iter()
            .zip(self.grid.node_weights())
            .map(|(v, &w)| v * w)
            .sum()
    }

    /// Weighted L²(Ω) inner product `(self, other) = ∫ self · conj(other)`.
    pub fn inner(&self, other: &ScalarField) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.node_weights())
            .map(|((a, b), &w)| a * b.conj() * w)
            .sum()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::validation(format!("L^p norm needs p >= 1, got {p}")));
        }
        if self.values.is_empty() {
            return Err(Error::validation("empty field"));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.node_weights())
            .map(|(v, &w)| w * v.norm().powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.node_weights())
            .map(|(v, &w)| w * v.norm_sqr())
            .sum();
        s.sqrt()
    }

    /// Edge-difference gradient energy `∫ |∇u|²` (the stiffness quadratic form).
    pub fn gradient_energy(&self) -> f64 {
        let g = &self.grid;
        let n = g.dim();
        let counts = g.nodes_per_axis();
        let strides = g.strides();
        let spacing = g.spacing();
        let mut axis_w: Vec<Vec<f64>> = Vec::with_capacity(n);
        for d in 0..n {
            let mut w = vec![spacing[d]; counts[d]];
            w[0] = 0.5 * spacing[d];
            w[counts[d] - 1] = 0.5 * spacing[d];
            axis_w.push(w);
        }
        let mut total = 0.0;
        for d in 0..n {
            let h = spacing[d];
            let stride = strides[d];
            for flat in 0..g.node_count() {
                let idx = g.multi_index(flat);
                if idx[d] + 1 >= counts[d] {
                    continue;
                }
                let diff = (self.values[flat + stride] - self.values[flat]) / h;
                let mut w = h;
                for e in 0..n {
                    if e != d {
                        w *= axis_w[e][idx[e]];
                    }
                }
                total += w * diff.norm_sqr();
            }
        }
        total
    }

    pub fn h1_norm(&self) -> f64 {
        (self.l2_norm().powi(2) + self.gradient_energy()).sqrt()
    }

    pub fn hminus1_norm(&self, padding: f64) -> Result<f64> {
        let hat = crate::fourier::fourier_transform(self, padding)?;
        Ok(hat.hminus1_norm())
    }

    /// Pointwise first derivative along `axis`, second-order one-sided at the ends.
    pub fn derivative(&self, axis: usize) -> ScalarField {
        let g = &self.grid;
        let count = g.nodes_per_axis()[axis];
        let stride = g.strides()[axis];
        let h = g.spacing()[axis];
        let mut out = vec![Complex64::ZERO; g.node_count()];
        for flat in 0..g.node_count() {
            let i = (flat / stride) % count;
            let v = &self.values;
            out[flat] = if i == 0 {
                (-3.0 * v[flat] + 4.0 * v[flat + stride] - v[flat + 2 * stride]) / (2.0 * h)
            } else if i == count - 1 {
                (3.0 * v[flat] - 4.0 * v[flat - stride] + v[flat - 2 * stride]) / (2.0 * h)
            } else {
                (v[flat + stride] - v[flat - stride]) / (2.0 * h)
            };
        }
        ScalarField { grid: self.grid.clone(), values: out }
    }

    /// Pointwise second derivative along `axis` (one-sided second order at ends).
    pub fn second_derivative(&self, axis: usize) -> ScalarField {
        let g = &self.grid;
        let count = g.nodes_per_axis()[axis];
        let stride = g.strides()[axis];
        let h2 = g.spacing()[axis] * g.spacing()[axis];
        let mut out = vec![Complex64::ZERO; g.node_count()];
        for flat in 0..g.node_count() {
            let i = (flat / stride) % count;
            let v = &self.values;
            out[flat] = if i == 0 {
                (2.0 * v[flat] - 5.0 * v[flat + stride] + 4.0 * v[flat + 2 * stride]
                    - v[flat + 3 * stride])
                    / h2
            } else if i == count - 1 {
                (2.0 * v[flat] - 5.0 * v[flat - stride] + 4.0 * v[flat - 2 * stride]
                    - v[flat - 3 * stride])
                    / h2
            } else {
                (v[flat + stride] - 2.0 * v[flat] + v[flat - stride]) / h2
            };
        }
        ScalarField { grid: self.grid.clone(), values: out }
    }

    /// Pointwise Laplacian (sum of the per-axis second differences).
    pub fn laplacian(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid.clone());
        for d in 0..self.grid.dim() {
            let dd = self.second_derivative(d);
            for (o, v) in out.values.iter_mut().zip(&dd.values) {
                *o += v;
            }
        }
        out
    }

    /// Dirichlet trace in the concatenated face layout.
    pub fn trace(&self) -> BoundaryFunction {
        let mut vals = Vec::with_capacity(self.grid.boundary_len());
        for f in self.grid.faces() {
            vals.extend(f.nodes.iter().map(|&id| self.values[id]));
        }
        BoundaryFunction { grid: self.grid.clone(), values: vals }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn conj(&self) -> ScalarField {
        self.map(|v| v.conj())
    }

    pub fn axpy(&mut self, a: Complex64, other: &ScalarField) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl BoundaryFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.boundary_len() {
            return Err(Error::validation(format!(
                "boundary function has {} values, grid boundary has {} slots",
                values.len(),
                grid.boundary_len()
            )));
        }
        Ok(BoundaryFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.boundary_len();
        BoundaryFunction { grid, values: vec![Complex64::ZERO; n] }
    }

    pub fn constant(grid: Arc<Grid>, c: Complex64) -> Self {
        let n = grid.boundary_len();
        BoundaryFunction { grid, values: vec![c; n] }
    }

    /// Sample a function of (position, outward normal) over all boundary slots.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64], &[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.boundary_len());
        for face in grid.faces() {
            for &id in &face.nodes {
                values.push(f(&grid.position(id), &face.normal));
            }
        }
        BoundaryFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Per-slot surface quadrature weights, concatenated over faces.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.grid.faces().iter().flat_map(|f| f.weights.iter().copied())
    }

    pub fn integrate(&self) -> Complex64 {
        self.values
            .iter()
            .zip(self.weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// L²(Γ) inner product `(self, other) = ∫_Γ self · conj(other) ds`.
    pub fn inner(&self, other: &BoundaryFunction) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.weights())
            .map(|((a, b), w)| a * b.conj() * w)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.weights())
            .map(|(v, w)| w * v.norm_sqr())
            .sum();
        s.sqrt()
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::validation(format!("L^p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(self.weights())
            .map(|(v, w)| w * v.norm().powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn sub(&self, other: &BoundaryFunction) -> BoundaryFunction {
        BoundaryFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn axpy(&mut self, a: Complex64, other: &BoundaryFunction) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: Complex64) {
        for v in &mut self.values {
            *v *= a;
        }
    }
}

/// Norm of an interior field per the selector.
pub fn norm(field: &ScalarField, kind: NormKind) -> Result<f64> {
    if field.is_empty() {
        return Err(Error::validation("empty field"));
    }
    match kind {
        NormKind::LpInterior(p) => field.lp_norm(p),
        NormKind::H1Interior => Ok(field.h1_norm()),
        NormKind::HMinus1 { padding } => field.hminus1_norm(padding),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn constant_l2_is_one_on_unit_cube() {
        let g = build_grid(3, &[1.0; 3], &[9; 3]).unwrap();
        let f = ScalarField::constant(g, Complex64::new(1.0, 0.0));
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_all_norms_zero() {
        let g = build_grid(2, &[1.0, 1.0], &[9, 9]).unwrap();
        let f = ScalarField::zeros(g);
        assert_eq!(f.l2_norm(), 0.0);
        assert_eq!(f.lp_norm(4.0).unwrap(), 0.0);
        assert_eq!(f.h1_norm(), 0.0);
        assert_eq!(f.hminus1_norm(2.0).unwrap(), 0.0);
    }

    #[test]
    fn sine_l2_matches_closed_form() {
        // ∫_0^1 sin²(πx) dx = 1/2, so the L² norm over the unit cube is 1/√2.
        let g = build_grid(3, &[1.0; 3], &[33; 3]).unwrap();
        let f = ScalarField::from_real_fn(g.clone(), |x| (PI * x[0]).sin());
        let h = g.max_spacing();
        assert!((f.l2_norm() - 0.5f64.sqrt()).abs() < 4.0 * h * h);
    }

    #[test]
    fn linear_field_derivative_exact() {
        let g = build_grid(3, &[1.0, 1.05, 1.1], &[7, 7, 7]).unwrap();
        let f = ScalarField::from_real_fn(g, |x| 2.0 * x[1]);
        let d = f.derivative(1);
        for v in d.values() {
            assert!((v.re - 2.0).abs() < 1e-11 && v.im == 0.0);
        }
    }

    #[test]
    fn boundary_quadrature_of_one_is_surface_area() {
        let g = build_grid(3, &[1.0, 1.05, 1.1], &[9, 9, 9]).unwrap();
        let one = BoundaryFunction::constant(g.clone(), Complex64::new(1.0, 0.0));
        let expect = g.surface_area();
        assert!((one.integrate().re - expect).abs() / expect < 1e-12);
    }
}
