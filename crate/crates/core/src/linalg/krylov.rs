//! Lanczos propagation of `exp(-i H t) ψ` for Hermitian `H` that is only
//! available through matrix-vector products.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::eigen::real_symmetric_eigen;
use super::sparse::CsrMatrix;
use crate::scalar::{cabs, czero, Real};

/// Anything that can apply a square matrix to a vector.
pub trait LinearMap<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]);
}

impl<T: Real> LinearMap<T> for CsrMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        self.matvec_into(x, y);
    }
}

impl<T: Real> LinearMap<T> for DMatrix<Complex<T>> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        let n = self.nrows();
        for (i, out) in y.iter_mut().enumerate().take(n) {
            let mut acc = czero();
            for (j, xj) in x.iter().enumerate() {
                acc += self[(i, j)] * *xj;
            }
            *out = acc;
        }
    }
}

fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * *y)
}

fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt()
}

/// Settings for [`expm_krylov`].
#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub subspace: usize,
    pub tolerance: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            subspace: 30,
            tolerance: 1e-12,
        }
    }
}

/// Computes `exp(-i H t) ψ` by adaptive Lanczos time stepping.
pub fn expm_krylov<T: Real, M: LinearMap<T>>(
    h: &M,
    psi: &DVector<Complex<T>>,
    t: T,
    opts: KrylovOptions,
) -> DVector<Complex<T>> {
    let n = h.dim();
    assert_eq!(psi.len(), n);
    let mut state = psi.clone();
    if t == T::zero() || n == 0 {
        return state;
    }
    let tol = T::lit(opts.tolerance);
    let m_max = opts.subspace.min(n).max(1);
    let mut remaining = t;
    let mut dt = t;
    while remaining.abs() > T::zero() {
        if dt.abs() > remaining.abs() {
            dt = remaining;
        }
        let scale = norm(state.as_slice());
        if scale == T::zero() {
            return state;
        }
        // Lanczos with full reorthogonalization
        let mut basis: Vec<Vec<Complex<T>>> = Vec::with_capacity(m_max + 1);
        basis.push(state.iter().map(|z| *z / Complex::new(scale, T::zero())).collect());
        let mut alpha: Vec<T> = Vec::new();
        let mut beta: Vec<T> = Vec::new();
        let mut w = vec![czero(); n];
        let mut breakdown = false;
        for j in 0..m_max {
            h.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for v in &basis {
                let proj = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= proj * *vi;
                }
            }
            let b = norm(&w);
            if b <= T::lit(1e-14) * (a.abs() + T::one()) {
                breakdown = true;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| *z / Complex::new(b, T::zero())).collect());
        }
        let m = alpha.len();
        let tri = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                T::zero()
            }
        });
        let eig = real_symmetric_eigen(&tri);
        let coeffs = |step: T| -> Vec<Complex<T>> {
            (0..m)
                .map(|i| {
                    let mut acc = czero();
                    for k in 0..m {
                        let phase = -(eig.values[k] * step);
                        acc +=
                            eig.vectors[(i, k)] * eig.vectors[(0, k)].conj() * Complex::new(phase.cos(), phase.sin());
                    }
                    acc
                })
                .collect()
        };
        let y = coeffs(dt);
        let err = if breakdown || beta.len() < m {
            T::zero()
        } else {
            beta[m - 1] * cabs(y[m - 1])
        };
        if err > tol && dt.abs() > T::lit(1e-12) {
            dt *= T::lit(0.5);
            continue;
        }
        let mut next: Vec<Complex<T>> = vec![czero(); n];
        for (k, yk) in y.iter().enumerate() {
            for (ni, bi) in next.iter_mut().zip(&basis[k]) {
                *ni += *yk * *bi;
            }
        }
        state = DVector::from_iterator(n, next.into_iter().map(|z| z * Complex::new(scale, T::zero())));
        remaining -= dt;
        if err < tol * T::lit(0.01) {
            dt *= T::lit(2.0);
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen::{hermitian_eigen, unitary_evolution};
    use crate::scalar::{c, cr};

    #[test]
    fn matches_dense_exponential() {
        let n = 40;
        let h = DMatrix::from_fn(n, n, |i, j| {
            let d = i.abs_diff(j);
            if d == 1 {
                cr(-1.0)
            } else if i == j {
                cr(((i * 7) % 5) as f64 * 0.3)
            } else if d == 3 {
                c(0.0, if i > j { 0.2 } else { -0.2 })
            } else {
                cr(0.0)
            }
        });
        let psi = DVector::from_fn(n, |i, _| cr(if i == n / 2 { 1.0 } else { 0.0 }));
        let sparse = CsrMatrix::from_dense(&h);
        let got = expm_krylov(&sparse, &psi, 3.7, KrylovOptions::default());
        let exact = unitary_evolution(&hermitian_eigen(&h), 3.7) * &psi;
        assert!((got - exact).norm() < 1e-9);
    }
}
