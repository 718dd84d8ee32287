use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::fock::{FockBasis, OpFlags, Operator};
use crate::replica::{FermionPolynomial, ReplicaBasis};

/// Single-copy observables that are functions of the site occupations.
/// Site indices refer to the modes of the copy basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagonalObservable {
    Identity,
    Density { site: usize },
    DensityDensity { first: usize, second: usize },
}

impl DiagonalObservable {
    pub fn label(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Density { site } => format!("n_{site}"),
            Self::DensityDensity { first, second } => format!("n_{first}*n_{second}"),
        }
    }

    pub fn sites(&self) -> Vec<usize> {
        match *self {
            Self::Identity => vec![],
            Self::Density { site } => vec![site],
            Self::DensityDensity { first, second } => vec![first, second],
        }
    }

    fn check_sites(&self, num_sites: usize) -> Result<(), ProtocolError> {
        match self.sites().into_iter().find(|&s| s >= num_sites) {
            Some(s) => Err(ProtocolError::Invalid(format!(
                "site {s} outside a {num_sites}-site copy"
            ))),
            None => Ok(()),
        }
    }

    /// Rejects observables whose Fourier-frame diagonal part has no closed
    /// form here.
    pub fn check_sampleable(&self, num_sites: usize) -> Result<(), ProtocolError> {
        self.check_sites(num_sites)?;
        if let Self::DensityDensity { first, second } = *self {
            if first == second {
                return Err(ProtocolError::NotNumberDiagonal(format!(
                    "the transformed n_{first}² has no per-shot readout here"
                )));
            }
        }
        Ok(())
    }

    /// Value on a single-copy occupation vector.
    pub fn value(&self, occ: &[u8]) -> f64 {
        match *self {
            Self::Identity => 1.0,
            Self::Density { site } => occ[site] as f64,
            Self::DensityDensity { first, second } => occ[first] as f64 * occ[second] as f64,
        }
    }

    /// Value on a region occupation vector whose `k`-th entry is site
    /// `region[k]` of the full chain.
    pub fn value_on_region(&self, occ: &[u8], region: &[usize]) -> Option<f64> {
        let at = |s: usize| region.iter().position(|&r| r == s).map(|k| occ[k] as f64);
        Some(match *self {
            Self::Identity => 1.0,
            Self::Density { site } => at(site)?,
            Self::DensityDensity { first, second } => at(first)? * at(second)?,
        })
    }

    /// Number-diagonal part of `F X_s F†` on a joint occupation vector.
    ///
    /// With `N_j = Σ_p n_{p,j}`: the density maps to `N_j/n` exactly, and for
    /// `j ≠ ℓ` the diagonal part of the transformed `n_j n_ℓ` is
    /// `N_j N_ℓ/n²`, since every Fourier coefficient has modulus `1/√n`.
    pub fn joint_value(&self, occ: &[u8], copies: usize, sites_per_copy: usize) -> f64 {
        let total = |j: usize| -> f64 { (0..copies).map(|p| occ[p * sites_per_copy + j] as f64).sum() };
        let n = copies as f64;
        match *self {
            Self::Identity => 1.0,
            Self::Density { site } => total(site) / n,
            Self::DensityDensity { first, second } => total(first) * total(second) / (n * n),
        }
    }

    pub fn operator(&self, basis: &Arc<FockBasis>) -> Result<Operator<f64>, ProtocolError> {
        self.check_sites(basis.num_modes())?;
        let values: Vec<Complex<f64>> = basis.states().map(|s| Complex::new(self.value(s), 0.0)).collect();
        Ok(Operator::diagonal(basis.clone(), &values).with_flags(OpFlags::DIAGONAL_HERMITIAN))
    }

    /// `joint_value` as a diagonal operator on the joint basis.
    pub fn joint_operator(&self, rb: &ReplicaBasis) -> Operator<f64> {
        let values: Vec<Complex<f64>> = rb
            .joint_basis()
            .states()
            .map(|s| Complex::new(self.joint_value(s, rb.copies(), rb.sites()), 0.0))
            .collect();
        Operator::diagonal(rb.joint_basis().clone(), &values).with_flags(OpFlags::DIAGONAL_HERMITIAN)
    }

    /// Copy-symmetrized fermion polynomial `X₂`.
    pub fn fermion_polynomial(&self) -> FermionPolynomial {
        let one = Complex::new(1.0, 0.0);
        let word: Vec<(usize, bool)> = self.sites().into_iter().flat_map(|s| [(s, true), (s, false)]).collect();
        FermionPolynomial::symmetrized(one, &word)
    }

    /// Recognizes an operator as one of the supported observables.
    pub fn from_operator(x: &Operator<f64>) -> Result<Self, ProtocolError> {
        let off = x.off_diagonal_mass();
        if off > 1e-12 {
            return Err(ProtocolError::NotNumberDiagonal(format!("off-diagonal mass {off:e}")));
        }
        let basis = x.rows().clone();
        let diag = x.diagonal_values();
        let l = basis.num_modes();
        let mut candidates = vec![Self::Identity];
        candidates.extend((0..l).map(|site| Self::Density { site }));
        for first in 0..l {
            for second in first + 1..l {
                candidates.push(Self::DensityDensity { first, second });
            }
        }
        candidates
            .into_iter()
            .find(|c| {
                basis
                    .states()
                    .zip(&diag)
                    .all(|(s, v)| (v - Complex::new(c.value(s), 0.0)).norm() < 1e-12)
            })
            .ok_or_else(|| ProtocolError::Invalid("diagonal observable not recognized".into()))
    }
}
