//! Preconditioned Krylov solvers: CG for real SPD systems and COCG for the
//! complex-symmetric shifted systems `(M − λB)u = f`.
//!
//! Inner products are accumulated serially so results do not depend on the
//! thread count; only matrix products parallelize (row-wise, deterministic).

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct IterStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Unconjugated bilinear form used by COCG.
fn cdot_unconj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cnorm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Preconditioned conjugate gradients for SPD systems.
pub fn pcg_real<A, P>(
    apply_a: A,
    precond: P,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, IterStats)>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], IterStats { iterations: 0, rel_residual: 0.0 }));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        apply_a(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::NonConvergence(format!(
                "CG breakdown at iteration {it}: pᵀAp = {pq:e}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok((x, IterStats { iterations: it + 1, rel_residual: rel }));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence(format!(
        "CG did not reach tol {tol:e} in {max_iter} iterations (residual {:.3e})",
        norm2(&r) / bnorm
    )))
}

/// Conjugate orthogonal CG for complex symmetric systems.
pub fn cocg<A, P>(
    apply_a: A,
    precond: P,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, IterStats)>
where
    A: Fn(&[Complex64], &mut [Complex64]),
    P: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = cnorm2(b);
    if bnorm == 0.0 {
        return Ok((vec![Complex64::ZERO; n], IterStats { iterations: 0, rel_residual: 0.0 }));
    }
    let mut x = vec![Complex64::ZERO; n];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = cdot_unconj(&r, &z);
    let mut q = vec![Complex64::ZERO; n];
    for it in 0..max_iter {
        apply_a(&p, &mut q);
        let pq = cdot_unconj(&p, &q);
        if pq.norm() < 1e-300 || !pq.is_finite() {
            return Err(Error::NonConvergence(format!(
                "COCG breakdown at iteration {it}: pᵀAp = {pq:e}"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = cnorm2(&r) / bnorm;
        if rel <= tol {
            return Ok((x, IterStats { iterations: it + 1, rel_residual: rel }));
        }
        z = precond(&r);
        let rz_new = cdot_unconj(&r, &z);
        if rz.norm() < 1e-300 {
            return Err(Error::NonConvergence(format!("COCG stagnation at iteration {it}")));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence(format!(
        "COCG did not reach tol {tol:e} in {max_iter} iterations (residual {:.3e})",
        cnorm2(&r) / bnorm
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_small_spd() {
        // A = tridiag(-1, 2, -1), identity preconditioner.
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = 2.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                y[i] = v;
            }
        };
        let b = vec![1.0; n];
        let (x, stats) = pcg_real(apply, |r| r.to_vec(), &b, 1e-12, 500).unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - 1.0).abs() < 1e-9);
        }
        assert!(stats.rel_residual <= 1e-12);
    }

    #[test]
    fn cocg_solves_shifted_system() {
        // (D − λI) x = b with diagonal D, λ complex: closed-form inverse.
        let n = 40;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let lam = Complex64::new(0.5, 2.0);
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            for i in 0..n {
                y[i] = (Complex64::new(d[i], 0.0) - lam) * x[i];
            }
        };
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let (x, _) = cocg(apply, |r| r.to_vec(), &b, 1e-13, 500).unwrap();
        for i in 0..n {
            let expect = b[i] / (Complex64::new(d[i], 0.0) - lam);
            assert!((x[i] - expect).norm() < 1e-10);
        }
    }
}
