//! n-copy joint spaces and the replica operators: cyclic shift `S_n`,
//! symmetrized observables, the inter-copy Fourier transform `F_n`, the phase
//! operator `R_n` and the fermionic measurement operator `V`.

mod basis;
mod boson;
mod fermion;

pub use basis::ReplicaBasis;
pub use boson::{fourier_op, permutation_op, phase_op, phase_value, root_of_unity, FourierTransform};
pub use fermion::{
    conjugation_sign, fermion_v_op, fermionic_fourier_op, v_commutant_check, v_value, v_value_formula,
    v_value_of_occupations, word_counts, CommutantReport, FermionOp, FermionPolynomial, Parity, CONJUGATION_TABLE,
    V_TABLE,
};

use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::fock::{FockError, OpFlags, Operator, Statistics};
use crate::linalg::CMatrix;
use crate::scalar::{cr, czero, Real};
use crate::thermal::DensityMatrix;

#[derive(Debug, Error)]
pub enum ReplicaError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("unsupported sector: {0}")]
    Sector(String),
    #[error("joint space too large: {0}")]
    TooLarge(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
}

fn check_copy_operator<T: Real>(x: &Operator<T>, rb: &ReplicaBasis) -> Result<(), ReplicaError> {
    if **x.rows() != **rb.copy_basis() || **x.cols() != **rb.copy_basis() {
        return Err(ReplicaError::BasisMismatch(
            "single-copy operator is not defined on the copy basis".into(),
        ));
    }
    Ok(())
}

/// `X ⊗ 1 ⊗ … ⊗ 1` on the product subspace of the joint basis (zero on
/// joint states that are not products of copy-sector states).
pub fn embed_first_copy<T: Real>(x: &Operator<T>, rb: &ReplicaBasis) -> Result<Operator<T>, ReplicaError> {
    check_copy_operator(x, rb)?;
    let d = rb.copy_basis().dim();
    let rest = rb.product_dim() / d;
    let dense = x.to_dense();
    let mut trip = Vec::new();
    for i in 0..d {
        for k in 0..d {
            let v = dense[(k, i)];
            if v == czero() {
                continue;
            }
            for r in 0..rest {
                trip.push((rb.rank_to_joint(k * rest + r), rb.rank_to_joint(i * rest + r), v));
            }
        }
    }
    let joint = rb.joint_basis();
    Ok(Operator::from_triplets(joint.clone(), joint.clone(), trip, x.flags()))
}

/// `X_s = (1/n) Σ_m S^m (X ⊗ 1) S^{−m}`.
pub fn symmetrize<T: Real>(x: &Operator<T>, rb: &ReplicaBasis) -> Result<Operator<T>, ReplicaError> {
    let s = permutation_op::<T>(rb)?;
    let sd = s.adjoint();
    let mut term = embed_first_copy(x, rb)?;
    let mut acc = term.clone();
    for _ in 1..rb.copies() {
        term = s.mul(&term)?.mul(&sd)?;
        acc = acc.add(&term)?;
    }
    let flags = OpFlags {
        hermitian: x.flags().hermitian,
        unitary: false,
        diagonal: x.flags().diagonal,
    };
    Ok(acc.scale(cr(T::one() / T::count(rb.copies()))).with_flags(flags))
}

/// `ρ^{⊗n}` embedded in the joint basis.
pub fn tensor_power<T: Real>(rho: &DensityMatrix<T>, rb: &ReplicaBasis) -> Result<DensityMatrix<T>, ReplicaError> {
    if **rho.basis() != **rb.copy_basis() {
        return Err(ReplicaError::BasisMismatch("state is not on the copy basis".into()));
    }
    let m = tensor_power_matrix(rho.matrix(), rb);
    Ok(DensityMatrix::from_parts(rb.joint_basis().clone(), m, None, None))
}

pub(crate) fn tensor_power_matrix<T: Real>(rho: &CMatrix<T>, rb: &ReplicaBasis) -> CMatrix<T> {
    let mut product = rho.clone();
    for _ in 1..rb.copies() {
        product = product.kronecker(rho);
    }
    let dj = rb.joint_basis().dim();
    let mut m = CMatrix::from_element(dj, dj, czero());
    let pd = rb.product_dim();
    for c in 0..pd {
        let jc = rb.rank_to_joint(c);
        for r in 0..pd {
            m[(rb.rank_to_joint(r), jc)] = product[(r, c)];
        }
    }
    m
}

/// Fourier transform and the number-diagonal measurement operator whose
/// expectation after the transform gives the purity: `(F_n, R_n)` for
/// bosons, `(F₂, V)` for fermions.
pub fn measurement_operators<T: Real>(rb: &ReplicaBasis) -> Result<(Operator<T>, Operator<T>), ReplicaError> {
    match rb.statistics() {
        Statistics::Boson => Ok((fourier_op(rb)?, phase_op(rb))),
        Statistics::Fermion => Ok((fermionic_fourier_op(rb)?, fermion_v_op(rb)?)),
    }
}

/// `tr{D F ρ_joint F†}` for a number-diagonal `D`.
pub fn transformed_trace<T: Real>(rho_joint: &CMatrix<T>, f: &Operator<T>, d: &Operator<T>) -> Complex<T> {
    let fd = f.to_dense();
    let rotated = &fd * rho_joint * fd.adjoint();
    d.diagonal_values()
        .iter()
        .enumerate()
        .fold(czero(), |acc, (i, di)| acc + *di * rotated[(i, i)])
}

#[derive(Clone, Debug)]
pub struct SwapReport {
    pub copies: usize,
    pub joint_dim: usize,
    /// `max |S_n − F_n† R_n F_n|`.
    pub deviation: f64,
}

impl SwapReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.deviation < tolerance
    }
}

/// Checks `S_n = F_n† R_n F_n` on the joint basis.
pub fn verify_swap_identity(rb: &ReplicaBasis) -> Result<SwapReport, ReplicaError> {
    verify_swap_identity_with(rb, |r| r)
}

/// As [`verify_swap_identity`] with a hook that may alter `R_n` first.
pub fn verify_swap_identity_with<F>(rb: &ReplicaBasis, mutate: F) -> Result<SwapReport, ReplicaError>
where
    F: FnOnce(Operator<f64>) -> Operator<f64>,
{
    if rb.statistics() != Statistics::Boson {
        return Err(ReplicaError::Unsupported("the swap identity holds for bosons".into()));
    }
    let f = fourier_op::<f64>(rb)?;
    let r = mutate(phase_op::<f64>(rb));
    let s = permutation_op::<f64>(rb)?;
    let rhs = f.adjoint().mul(&r)?.mul(&f)?;
    Ok(SwapReport {
        copies: rb.copies(),
        joint_dim: rb.joint_basis().dim(),
        deviation: s.max_abs_diff(&rhs)?,
    })
}

/// Shared handle used by the estimators.
pub type SharedReplicaBasis = Arc<ReplicaBasis>;
