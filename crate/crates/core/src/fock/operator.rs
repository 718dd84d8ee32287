use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex;

use super::{FockBasis, FockError};
use crate::linalg::{self, CMatrix, CVector, CsrMatrix};
use crate::scalar::{cabs, cr, czero, Real};

/// Dimension above which operators built from triplets are stored sparse.
pub const SPARSE_THRESHOLD: usize = 2000;

/// Tolerance used when checking flagged operator properties.
pub const FLAG_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpFlags {
    pub hermitian: bool,
    pub unitary: bool,
    pub diagonal: bool,
}

impl OpFlags {
    pub const NONE: Self = Self {
        hermitian: false,
        unitary: false,
        diagonal: false,
    };
    pub const HERMITIAN: Self = Self {
        hermitian: true,
        unitary: false,
        diagonal: false,
    };
    pub const UNITARY: Self = Self {
        hermitian: false,
        unitary: true,
        diagonal: false,
    };
    pub const DIAGONAL_HERMITIAN: Self = Self {
        hermitian: true,
        unitary: false,
        diagonal: true,
    };
}

#[derive(Clone, Debug)]
pub enum Storage<T: Real> {
    Dense(CMatrix<T>),
    Sparse(CsrMatrix<T>),
}

/// Matrix acting between two Fock bases.
#[derive(Clone, Debug)]
pub struct Operator<T: Real> {
    rows: Arc<FockBasis>,
    cols: Arc<FockBasis>,
    storage: Storage<T>,
    flags: OpFlags,
}

impl<T: Real> Operator<T> {
    pub fn from_dense(rows: Arc<FockBasis>, cols: Arc<FockBasis>, m: CMatrix<T>, flags: OpFlags) -> Self {
        assert_eq!(m.shape(), (rows.dim(), cols.dim()), "matrix shape does not match bases");
        Self {
            rows,
            cols,
            storage: Storage::Dense(m),
            flags,
        }
    }

    pub fn from_sparse(rows: Arc<FockBasis>, cols: Arc<FockBasis>, m: CsrMatrix<T>, flags: OpFlags) -> Self {
        assert_eq!(
            (m.nrows(), m.ncols()),
            (rows.dim(), cols.dim()),
            "matrix shape does not match bases"
        );
        Self {
            rows,
            cols,
            storage: Storage::Sparse(m),
            flags,
        }
    }

    /// Builds from `(row, col, value)` triplets; storage is sparse when either
    /// dimension exceeds [`SPARSE_THRESHOLD`].
    pub fn from_triplets(
        rows: Arc<FockBasis>,
        cols: Arc<FockBasis>,
        triplets: Vec<(usize, usize, Complex<T>)>,
        flags: OpFlags,
    ) -> Self {
        let csr = CsrMatrix::from_triplets(rows.dim(), cols.dim(), triplets);
        if rows.dim().max(cols.dim()) > SPARSE_THRESHOLD {
            Self::from_sparse(rows, cols, csr, flags)
        } else {
            let dense = csr.to_dense();
            Self::from_dense(rows, cols, dense, flags)
        }
    }

    pub fn identity(basis: Arc<FockBasis>) -> Self {
        let n = basis.dim();
        let trip = (0..n).map(|i| (i, i, cr(T::one()))).collect();
        let flags = OpFlags {
            hermitian: true,
            unitary: true,
            diagonal: true,
        };
        Self::from_triplets(basis.clone(), basis, trip, flags)
    }

    pub fn diagonal(basis: Arc<FockBasis>, values: &[Complex<T>]) -> Self {
        assert_eq!(values.len(), basis.dim());
        let real = values.iter().all(|v| v.im == T::zero());
        let trip = values.iter().enumerate().map(|(i, v)| (i, i, *v)).collect();
        let flags = OpFlags {
            hermitian: real,
            unitary: values.iter().all(|v| (v.norm_sqr() - T::one()).abs() < T::lit(1e-12)),
            diagonal: true,
        };
        Self::from_triplets(basis.clone(), basis, trip, flags)
    }

    pub fn rows(&self) -> &Arc<FockBasis> {
        &self.rows
    }

    pub fn cols(&self) -> &Arc<FockBasis> {
        &self.cols
    }

    /// Basis of a square operator.
    pub fn basis(&self) -> &Arc<FockBasis> {
        debug_assert!(self.is_square());
        &self.rows
    }

    pub fn is_square(&self) -> bool {
        Arc::ptr_eq(&self.rows, &self.cols) || *self.rows == *self.cols
    }

    pub fn flags(&self) -> OpFlags {
        self.flags
    }

    pub fn with_flags(mut self, flags: OpFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn storage(&self) -> &Storage<T> {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.dim(), self.cols.dim())
    }

    pub fn to_dense(&self) -> CMatrix<T> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CsrMatrix<T> {
        match &self.storage {
            Storage::Dense(m) => CsrMatrix::from_dense(m),
            Storage::Sparse(m) => m.clone(),
        }
    }

    /// Single matrix element.
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        match &self.storage {
            Storage::Dense(m) => m[(r, c)],
            Storage::Sparse(m) => m.row(r).filter(|(k, _)| *k == c).fold(czero(), |acc, (_, v)| acc + v),
        }
    }

    pub fn apply(&self, x: &CVector<T>) -> CVector<T> {
        assert_eq!(x.len(), self.cols.dim());
        match &self.storage {
            Storage::Dense(m) => m * x,
            Storage::Sparse(m) => m.matvec(x),
        }
    }

    pub fn diagonal_values(&self) -> Vec<Complex<T>> {
        match &self.storage {
            Storage::Dense(m) => m.diagonal().iter().copied().collect(),
            Storage::Sparse(m) => m.diagonal(),
        }
    }

    pub fn trace(&self) -> Complex<T> {
        self.diagonal_values().into_iter().fold(czero(), |a, b| a + b)
    }

    pub fn adjoint(&self) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.adjoint()),
            Storage::Sparse(m) => Storage::Sparse(m.adjoint()),
        };
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            storage,
            flags: self.flags,
        }
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(m.map(|z| z * s)),
            Storage::Sparse(m) => Storage::Sparse(m.scale(s)),
        };
        let flags = OpFlags {
            hermitian: self.flags.hermitian && s.im == T::zero(),
            unitary: self.flags.unitary && (s.norm_sqr() - T::one()).abs() < T::lit(1e-12),
            diagonal: self.flags.diagonal,
        };
        Self {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            storage,
            flags,
        }
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self, FockError> {
        if *self.cols != *other.rows {
            return Err(FockError::BasisMismatch(format!(
                "cannot multiply {:?} by {:?}",
                self.cols, other.rows
            )));
        }
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a.mul(b)),
            (a, b) => {
                let a = sparse_of(a);
                let b = sparse_of(b);
                Storage::Sparse(a.mul(&b))
            }
        };
        let flags = OpFlags {
            hermitian: false,
            unitary: self.flags.unitary && other.flags.unitary,
            diagonal: self.flags.diagonal && other.flags.diagonal,
        };
        Ok(Self {
            rows: self.rows.clone(),
            cols: other.cols.clone(),
            storage,
            flags,
        })
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Self, s: Complex<T>) -> Result<Self, FockError> {
        if *self.rows != *other.rows || *self.cols != *other.cols {
            return Err(FockError::BasisMismatch(
                "cannot add operators on different bases".into(),
            ));
        }
        let storage = match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a + b.map(|z| z * s)),
            (a, b) => Storage::Sparse(sparse_of(a).add(&sparse_of(b).scale(s))),
        };
        let flags = OpFlags {
            hermitian: self.flags.hermitian && other.flags.hermitian && s.im == T::zero(),
            unitary: false,
            diagonal: self.flags.diagonal && other.flags.diagonal,
        };
        Ok(Self {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            storage,
            flags,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, FockError> {
        self.add_scaled(other, cr(T::one()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, FockError> {
        self.add_scaled(other, cr(-T::one()))
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Result<Self, FockError> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Anticommutator `{self, other}`.
    pub fn anticommutator(&self, other: &Self) -> Result<Self, FockError> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    pub fn max_abs(&self) -> T {
        match &self.storage {
            Storage::Dense(m) => linalg::max_abs(m),
            Storage::Sparse(m) => m.max_abs(),
        }
    }

    /// Largest entry modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T, FockError> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn hermitian_deviation(&self) -> T {
        match &self.storage {
            Storage::Dense(m) => linalg::hermitian_deviation(m),
            Storage::Sparse(m) => m.add(&m.adjoint().scale(cr(-T::one()))).max_abs(),
        }
    }

    pub fn unitary_deviation(&self) -> T {
        match &self.storage {
            Storage::Dense(m) => linalg::unitary_deviation(m),
            Storage::Sparse(m) => {
                let prod = m.adjoint().mul(m);
                let n = m.ncols();
                let id = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, cr(-T::one()))).collect());
                prod.add(&id).max_abs()
            }
        }
    }

    pub fn off_diagonal_mass(&self) -> T {
        match &self.storage {
            Storage::Dense(m) => linalg::off_diagonal_mass(m),
            Storage::Sparse(m) => m
                .triplets()
                .filter(|(r, c, _)| r != c)
                .fold(T::zero(), |acc, (_, _, v)| if cabs(v) > acc { cabs(v) } else { acc }),
        }
    }

    /// Verifies every flagged property to [`FLAG_TOLERANCE`].
    pub fn check_flags(&self) -> Result<(), FockError> {
        let tol = T::lit(FLAG_TOLERANCE);
        let checks = [
            (self.flags.hermitian, "hermitian", self.hermitian_deviation()),
            (self.flags.unitary, "unitary", self.unitary_deviation()),
            (self.flags.diagonal, "diagonal", self.off_diagonal_mass()),
        ];
        for (set, name, dev) in checks {
            if set && dev > tol {
                return Err(FockError::FlagViolation {
                    flag: name,
                    deviation: dev.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }

    /// Expectation value `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, psi: &DVector<Complex<T>>) -> Complex<T> {
        let a_psi = self.apply(psi);
        psi.iter()
            .zip(a_psi.iter())
            .fold(czero(), |acc, (x, y)| acc + x.conj() * *y)
    }
}

fn sparse_of<T: Real>(s: &Storage<T>) -> CsrMatrix<T> {
    match s {
        Storage::Dense(m) => CsrMatrix::from_dense(m),
        Storage::Sparse(m) => m.clone(),
    }
}
