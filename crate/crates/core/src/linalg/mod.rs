//! Dense and sparse complex linear algebra used by the physics modules.

pub mod eigen;
pub mod krylov;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

pub use eigen::{
    hermitian_eigen, real_symmetric_eigen, sorted_symmetric_eigen, trace_distance, unitary_evolution, HermitianEigen,
};
pub use krylov::{expm_krylov, KrylovOptions, LinearMap};
pub use sparse::CsrMatrix;

use crate::scalar::{cabs, cr, czero, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

pub fn trace<T: Real>(m: &CMatrix<T>) -> Complex<T> {
    (0..m.nrows().min(m.ncols())).fold(czero(), |acc, i| acc + m[(i, i)])
}

/// `tr{A B}` without forming the product.
pub fn trace_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Complex<T> {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = czero();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Largest entry modulus of `a − b`.
pub fn max_abs_diff<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(T::zero(), |m, (x, y)| {
        let d = cabs(*x - *y);
        if d > m {
            d
        } else {
            m
        }
    })
}

pub fn max_abs<T: Real>(a: &CMatrix<T>) -> T {
    a.iter().fold(T::zero(), |m, x| if cabs(*x) > m { cabs(*x) } else { m })
}

/// `max |A − A†|`.
pub fn hermitian_deviation<T: Real>(a: &CMatrix<T>) -> T {
    max_abs_diff(a, &a.adjoint())
}

/// `max |U†U − 1|`.
pub fn unitary_deviation<T: Real>(u: &CMatrix<T>) -> T {
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &CMatrix::identity(u.nrows(), u.ncols()))
}

/// Largest off-diagonal modulus.
pub fn off_diagonal_mass<T: Real>(a: &CMatrix<T>) -> T {
    let mut m = T::zero();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j && cabs(a[(i, j)]) > m {
                m = cabs(a[(i, j)]);
            }
        }
    }
    m
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// `U A U†`.
pub fn conjugate<T: Real>(u: &CMatrix<T>, a: &CMatrix<T>) -> CMatrix<T> {
    u * a * u.adjoint()
}

pub fn diag<T: Real>(values: &[T]) -> CMatrix<T> {
    CMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&v| cr(v))))
}

/// Hermitian matrix with independent standard-normal entries (GUE-like).
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    let g = random_ginibre::<T, R>(dim, rng);
    (&g + g.adjoint()).map(|z| z * cr(T::lit(0.5)))
}

/// Real symmetric matrix with standard-normal entries.
pub fn random_real_symmetric<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    let g = CMatrix::<T>::from_fn(dim, dim, |_, _| cr(T::lit(rng.sample::<f64, _>(StandardNormal))));
    (&g + g.transpose()).map(|z| z * cr(T::lit(0.5)))
}

fn random_ginibre<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(re), T::lit(im))
    })
}

/// Random full-rank density matrix `G G† / tr{G G†}` from a Ginibre matrix.
pub fn random_density_matrix<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix<T> {
    let g = random_ginibre::<T, R>(dim, rng);
    let rho = &g * g.adjoint();
    let tr = trace(&rho);
    let hermitian = (&rho + rho.adjoint()).map(|z| z * cr(T::lit(0.5)));
    hermitian.map(|z| z / tr)
}

/// Random unit vector.
pub fn random_state<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CVector<T> {
    let v = CVector::<T>::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(re), T::lit(im))
    });
    let n = v.norm();
    v.map(|z| z / cr(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_density_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density_matrix::<f64, _>(7, &mut rng);
        assert!((trace(&rho).re - 1.0).abs() < 1e-12);
        assert!(hermitian_deviation(&rho) < 1e-14);
        let eig = hermitian_eigen(&rho);
        assert!(eig.values[0] > -1e-12);
    }

    #[test]
    fn trace_product_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hermitian::<f64, _>(5, &mut rng);
        let b = random_hermitian::<f64, _>(5, &mut rng);
        assert!((trace_product(&a, &b) - trace(&(&a * &b))).norm() < 1e-12);
    }
}
