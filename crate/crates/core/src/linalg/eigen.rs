use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::scalar::{cr, czero, Real};

/// Eigendecomposition `A = V diag(values) V†` of a Hermitian matrix with
/// eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: DMatrix<Complex<T>>,
    /// True when the input had no imaginary part, so `vectors` is real.
    pub real: bool,
}

impl<T: Real> HermitianEigen<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(values)) V†`.
    pub fn map<F: Fn(T) -> Complex<T>>(&self, f: F) -> DMatrix<Complex<T>> {
        let weights: Vec<Complex<T>> = self.values.iter().map(|&v| f(v)).collect();
        self.reconstruct(&weights)
    }

    /// `V diag(weights) V†` for arbitrary complex weights.
    pub fn reconstruct(&self, weights: &[Complex<T>]) -> DMatrix<Complex<T>> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, w) in weights.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= *w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// Real eigenvector matrix, available when the input was real symmetric.
    pub fn real_vectors(&self) -> Option<DMatrix<T>> {
        self.real.then(|| self.vectors.map(|z| z.re))
    }

    pub fn ground_vector(&self) -> nalgebra::DVector<Complex<T>> {
        self.vectors.column(0).into_owned()
    }
}

fn is_real<T: Real>(m: &DMatrix<Complex<T>>) -> bool {
    m.iter().all(|z| z.im == T::zero())
}

/// Diagonalizes a Hermitian matrix. Real symmetric inputs are routed
/// through the cheaper real solver.
pub fn hermitian_eigen<T: Real>(m: &DMatrix<Complex<T>>) -> HermitianEigen<T> {
    assert!(m.is_square(), "eigendecomposition needs a square matrix");
    if is_real(m) {
        let re = m.map(|z| z.re);
        return real_symmetric_eigen(&re);
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let n = m.nrows();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen {
        values,
        vectors,
        real: false,
    }
}

pub fn real_symmetric_eigen<T: Real>(m: &DMatrix<T>) -> HermitianEigen<T> {
    let (values, vectors) = sorted_symmetric_eigen(m.clone());
    HermitianEigen {
        values,
        vectors: vectors.map(cr),
        real: true,
    }
}

/// Ascending eigenvalues and real eigenvectors (as columns) of a real
/// symmetric matrix, consuming it.
pub fn sorted_symmetric_eigen<T: Real>(m: DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// `exp(-i t A)` for Hermitian `A`.
pub fn unitary_evolution<T: Real>(eig: &HermitianEigen<T>, t: T) -> DMatrix<Complex<T>> {
    eig.map(|e| {
        let phase = -(e * t);
        Complex::new(phase.cos(), phase.sin())
    })
}

/// Trace distance `½‖A − B‖₁` between two Hermitian matrices.
pub fn trace_distance<T: Real>(a: &DMatrix<Complex<T>>, b: &DMatrix<Complex<T>>) -> T {
    let diff = a - b;
    let diff = (&diff + diff.adjoint()).map(|z| z * cr(T::lit(0.5)));
    let eig = hermitian_eigen(&diff);
    eig.values.iter().fold(T::zero(), |acc, v| acc + v.abs()) * T::lit(0.5)
}

#[allow(dead_code)]
pub(crate) fn zero_matrix<T: Real>(n: usize) -> DMatrix<Complex<T>> {
    DMatrix::from_element(n, n, czero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c;

    #[test]
    fn sorted_and_reconstructs() {
        let m = DMatrix::from_row_slice(2, 2, &[cr(2.0), c(0.0, 1.0), c(0.0, -1.0), cr(2.0)]);
        let eig = hermitian_eigen(&m);
        assert!(!eig.real);
        assert!((eig.values[0] - 1.0f64).abs() < 1e-12);
        assert!((eig.values[1] - 3.0f64).abs() < 1e-12);
        let back = eig.map(cr);
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn real_input_takes_real_path() {
        let m = DMatrix::from_row_slice(2, 2, &[cr(0.0), cr(-1.0), cr(-1.0), cr(0.0f64)]);
        let eig = hermitian_eigen(&m);
        assert!(eig.real);
        assert_eq!(eig.values.len(), 2);
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_precision_path() {
        let m = DMatrix::from_row_slice(2, 2, &[cr(1.0f32), cr(0.5), cr(0.5), cr(1.0)]);
        let eig = hermitian_eigen(&m);
        assert!((eig.values[0] - 0.5).abs() < 1e-6);
        assert!((eig.values[1] - 1.5).abs() < 1e-6);
    }
}
