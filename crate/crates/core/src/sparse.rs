//! Minimal CSR matrix for the assembled forms, with row-parallel products.
//!
//! Products are computed row by row, so results are bitwise identical for
//! any thread count.

use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Builder accumulating (i, j, v) triplets; duplicates are summed.
pub struct CsrBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<(usize, f64)>>,
}

impl CsrBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        CsrBuilder { rows, cols, entries: vec![Vec::new(); rows] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i].push((j, v));
    }

    pub fn build(mut self) -> Csr {
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut self.entries {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Csr { rows: self.rows, cols: self.cols, row_ptr, col_idx, values }
    }
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x (real).
    pub fn mul_real(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        });
    }

    /// y = A x (complex vector, real matrix).
    pub fn mul_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[k];
                let xv = x[self.col_idx[k]];
                re += v * xv.re;
                im += v * xv.im;
            }
            *yi = Complex64::new(re, im);
        });
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// Largest |A_ij − A_ji| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_and_multiplies() {
        let mut b = CsrBuilder::new(3, 3);
        b.add(0, 0, 2.0);
        b.add(0, 1, -1.0);
        b.add(1, 0, -1.0);
        b.add(1, 1, 2.0);
        b.add(1, 2, -1.0);
        b.add(2, 1, -1.0);
        b.add(2, 2, 2.0);
        b.add(2, 2, 1.0); // duplicate accumulates
        let m = b.build();
        assert_eq!(m.nnz(), 7);
        let mut y = vec![0.0; 3];
        m.mul_real(&[1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, 0.0, 2.0]);
        assert_eq!(m.asymmetry(), 0.0);
    }
}
