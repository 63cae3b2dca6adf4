//! Vertex-centered box grids with enumerated boundary faces and trapezoidal
//! quadrature on the interior and on every face.
//!
//! The domain is the axis-aligned box `[0, L_1] x ... x [0, L_n]` with
//! `N_d` nodes per axis and spacing `h_d = L_d / (N_d - 1)`. Nodes are
//! stored row-major with axis 0 slowest. Boundary faces come in the fixed
//! order `x_min, x_max, y_min, y_max, z_min, z_max`; within a face, nodes
//! are row-major over the remaining axes in ascending axis order. A face
//! contains its edges and corners, so edge nodes appear in several faces;
//! face quadrature weights are per-face trapezoid weights, which makes the
//! sum over faces an exact discretization of the surface integral.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaceSide {
    Lower,
    Upper,
}

/// One of the `2n` boundary faces of the box.
#[derive(Debug, Clone)]
pub struct Face {
    pub axis: usize,
    pub side: FaceSide,
    /// Outward unit normal, length `n`.
    pub normal: Vec<f64>,
    /// Flat node ids of the face, row-major over transverse axes.
    pub nodes: Vec<usize>,
    /// Surface quadrature weight per face node.
    pub weights: Vec<f64>,
    /// First slot of this face in the concatenated boundary layout.
    pub offset: usize,
}

/// Serializable grid description used in file headers and operator specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub side_lengths: Vec<f64>,
    pub nodes_per_axis: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        Grid::new(self.n, &self.side_lengths, &self.nodes_per_axis)
    }
}

#[derive(Debug)]
pub struct Grid {
    n: usize,
    side_lengths: Vec<f64>,
    nodes_per_axis: Vec<usize>,
    spacing: Vec<f64>,
    /// Row-major strides per axis.
    strides: Vec<usize>,
    node_count: usize,
    /// Trapezoidal volume weight per node.
    node_weights: Vec<f64>,
    faces: Vec<Face>,
    boundary_len: usize,
}

impl Grid {
    /// Build a box grid. `n` must be 1, 2 or 3; every extent positive and
    /// every axis count at least 3.
    pub fn new(n: usize, side_lengths: &[f64], nodes_per_axis: &[usize]) -> Result<Arc<Grid>> {
        if !(1..=3).contains(&n) {
            return Err(Error::Dimension(n));
        }
        if side_lengths.len() != n || nodes_per_axis.len() != n {
            return Err(Error::validation(format!(
                "expected {n} side lengths and node counts, got {} and {}",
                side_lengths.len(),
                nodes_per_axis.len()
            )));
        }
        for &l in side_lengths {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::validation(format!("side length {l} must be positive")));
            }
        }
        for &c in nodes_per_axis {
            if c < 3 {
                return Err(Error::validation(format!("nodes per axis {c} must be at least 3")));
            }
        }
        let spacing: Vec<f64> = side_lengths
            .iter()
            .zip(nodes_per_axis)
            .map(|(&l, &c)| l / (c - 1) as f64)
            .collect();
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * nodes_per_axis[d + 1];
        }
        let node_count: usize = nodes_per_axis.iter().product();

        let axis_weights: Vec<Vec<f64>> = (0..n)
            .map(|d| trapezoid_weights(nodes_per_axis[d], spacing[d]))
            .collect();
        let mut node_weights = vec![0.0; node_count];
        let mut idx = vec![0usize; n];
        for (flat, w) in node_weights.iter_mut().enumerate() {
            let mut rem = flat;
            for d in 0..n {
                idx[d] = rem / strides[d];
                rem %= strides[d];
            }
            *w = (0..n).map(|d| axis_weights[d][idx[d]]).product();
        }

        let mut faces = Vec::with_capacity(2 * n);
        let mut offset = 0usize;
        for axis in 0..n {
            for side in [FaceSide::Lower, FaceSide::Upper] {
                let fixed = match side {
                    FaceSide::Lower => 0,
                    FaceSide::Upper => nodes_per_axis[axis] - 1,
                };
                let mut normal = vec![0.0; n];
                normal[axis] = match side {
                    FaceSide::Lower => -1.0,
                    FaceSide::Upper => 1.0,
                };
                let transverse: Vec<usize> = (0..n).filter(|&d| d != axis).collect();
                let face_len: usize = transverse.iter().map(|&d| nodes_per_axis[d]).product();
                let mut nodes = Vec::with_capacity(face_len);
                let mut weights = Vec::with_capacity(face_len);
                let mut t_idx = vec![0usize; transverse.len()];
                for _ in 0..face_len.max(1) {
                    let mut full = vec![0usize; n];
                    full[axis] = fixed;
                    for (k, &d) in transverse.iter().enumerate() {
                        full[d] = t_idx[k];
                    }
                    let flat: usize = (0..n).map(|d| full[d] * strides[d]).sum();
                    nodes.push(flat);
                    let w: f64 = transverse
                        .iter()
                        .enumerate()
                        .map(|(k, &d)| axis_weights[d][t_idx[k]])
                        .product();
                    weights.push(w);
                    // advance row-major transverse index
                    for k in (0..transverse.len()).rev() {
                        t_idx[k] += 1;
                        if t_idx[k] < nodes_per_axis[transverse[k]] {
                            break;
                        }
                        t_idx[k] = 0;
                    }
                }
                let len = nodes.len();
                faces.push(Face { axis, side, normal, nodes, weights, offset });
                offset += len;
            }
        }

        Ok(Arc::new(Grid {
            n,
            side_lengths: side_lengths.to_vec(),
            nodes_per_axis: nodes_per_axis.to_vec(),
            spacing,
            strides,
            node_count,
            node_weights,
            faces,
            boundary_len: offset,
        }))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            side_lengths: self.side_lengths.clone(),
            nodes_per_axis: self.nodes_per_axis.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes_per_axis
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn node_weights(&self) -> &[f64] {
        &self.node_weights
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// Total number of boundary slots (faces concatenated, edge nodes repeated).
    pub fn boundary_len(&self) -> usize {
        self.boundary_len
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        (0..self.n)
            .map(|d| {
                let i = rem / self.strides[d];
                rem %= self.strides[d];
                i
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum()
    }

    /// Coordinates of a node.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.spacing)
            .map(|(&i, &h)| i as f64 * h)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    /// Total surface measure of the box (2 in 1D by the counting convention).
    pub fn surface_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| f.weights.iter().sum::<f64>())
            .sum()
    }

    pub fn same_grid(&self, other: &Grid) -> bool {
        self.n == other.n
            && self.side_lengths == other.side_lengths
            && self.nodes_per_axis == other.nodes_per_axis
    }
}

fn trapezoid_weights(count: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; count];
    w[0] = 0.5 * h;
    w[count - 1] = 0.5 * h;
    w
}

/// Build a grid from dimension, extents and node counts (the primary constructor).
pub fn build_grid(n: usize, side_lengths: &[f64], nodes_per_axis: &[usize]) -> Result<Arc<Grid>> {
    Grid::new(n, side_lengths, nodes_per_axis)
}

/// The default anisotropic box used throughout: side lengths 1.0, 1.05, 1.1
/// break eigenvalue multiplicity while keeping unit-scale oracles relevant.
pub fn default_box(nodes_per_axis: usize) -> Result<Arc<Grid>> {
    Grid::new(3, &[1.0, 1.05, 1.1], &[nodes_per_axis; 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_17_basic() {
        let g = build_grid(3, &[1.0, 1.0, 1.0], &[17, 17, 17]).unwrap();
        assert_eq!(g.node_count(), 17 * 17 * 17);
        for d in 0..3 {
            assert!((g.spacing()[d] - 1.0 / 16.0).abs() < 1e-15);
        }
        assert_eq!(g.faces().len(), 6);
        for f in g.faces() {
            assert_eq!(f.nodes.len(), 17 * 17);
        }
        assert_eq!(g.boundary_len(), 6 * 17 * 17);
    }

    #[test]
    fn interval_3_nodes() {
        let g = build_grid(1, &[1.0], &[3]).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.faces().len(), 2);
        for f in g.faces() {
            assert_eq!(f.nodes.len(), 1);
        }
        assert!((g.surface_area() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn anisotropic_spacings() {
        let g = build_grid(3, &[1.0, 1.05, 1.1], &[17, 17, 17]).unwrap();
        assert!((g.spacing()[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!((g.spacing()[1] - 1.05 / 16.0).abs() < 1e-15);
        assert!((g.spacing()[2] - 1.1 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_grid(4, &[1.0; 4], &[5; 4]).is_err());
        assert!(build_grid(2, &[1.0, 1.0], &[2, 5]).is_err());
        assert!(build_grid(2, &[1.0, -1.0], &[5, 5]).is_err());
    }

    #[test]
    fn quadrature_exactness() {
        let g = build_grid(3, &[1.0, 1.05, 1.1], &[9, 11, 13]).unwrap();
        let vol: f64 = g.node_weights().iter().sum();
        assert!((vol - g.volume()).abs() / g.volume() < 1e-12);
        let area = g.surface_area();
        let expect = 2.0 * (1.05 * 1.1 + 1.0 * 1.1 + 1.0 * 1.05);
        assert!((area - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn every_boundary_node_in_a_face() {
        let g = build_grid(2, &[1.0, 2.0], &[5, 7]).unwrap();
        let mut seen = vec![false; g.node_count()];
        for f in g.faces() {
            for &id in &f.nodes {
                seen[id] = true;
            }
        }
        for flat in 0..g.node_count() {
            let idx = g.multi_index(flat);
            let on_boundary = idx
                .iter()
                .zip(g.nodes_per_axis())
                .any(|(&i, &c)| i == 0 || i == c - 1);
            assert_eq!(seen[flat], on_boundary);
        }
    }
}
