//! Lattice Hamiltonians: Bose-Hubbard chain, inter-copy beamsplitter and a
//! spinless fermion chain.
//!
//! Energies are in units of the tunneling `J`; `ħ = 1`.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{hopping_triplets, FockBasis, FockError, OpFlags, Operator, Statistics};
use crate::replica::ReplicaBasis;
use crate::scalar::{cr, Real};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("model mismatch: {0}")]
    Mismatch(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Sites per copy.
    #[serde(alias = "L")]
    pub sites: usize,
    /// Tunneling energy.
    #[serde(default = "one", alias = "J")]
    pub j: f64,
    /// On-site (bosons) or nearest-neighbor (fermions) interaction.
    #[serde(default, alias = "U")]
    pub u: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Inter-copy tunneling of the beamsplitter.
    #[serde(default = "one", alias = "J_BS")]
    pub j_bs: f64,
}

impl ModelParams {
    pub fn new(sites: usize, j: f64, u: f64, boundary: Boundary) -> Self {
        Self {
            sites,
            j,
            u,
            boundary,
            j_bs: 1.0,
        }
    }

    /// Nearest-neighbour bonds `(j, j+1)`; periodic chains add `(L−1, 0)` when
    /// `L > 2` so that no bond is counted twice.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let l = self.sites;
        let mut out: Vec<(usize, usize)> = (0..l.saturating_sub(1)).map(|j| (j, j + 1)).collect();
        if self.boundary == Boundary::Periodic && l > 2 {
            out.push((l - 1, 0));
        }
        out
    }

    fn validate(&self, basis: &FockBasis, statistics: Statistics) -> Result<(), ModelError> {
        if self.sites == 0 {
            return Err(ModelError::Mismatch("a chain needs at least one site".into()));
        }
        if basis.num_modes() != self.sites {
            return Err(ModelError::Mismatch(format!(
                "basis has {} modes but the model has {} sites",
                basis.num_modes(),
                self.sites
            )));
        }
        if basis.statistics() != statistics {
            return Err(ModelError::Mismatch(format!(
                "expected a {statistics:?} basis, got {:?}",
                basis.statistics()
            )));
        }
        Ok(())
    }
}

fn push_bond<T: Real>(
    basis: &FockBasis,
    trip: &mut Vec<(usize, usize, Complex<T>)>,
    a: usize,
    b: usize,
    coeff: Complex<T>,
) -> Result<(), ModelError> {
    trip.extend(hopping_triplets(basis, a, b, coeff)?);
    trip.extend(hopping_triplets(basis, b, a, coeff)?);
    Ok(())
}

/// `H = −J Σ_⟨jk⟩ (a†_j a_k + h.c.) + (U/2) Σ_j n_j (n_j − 1)`.
pub fn bose_hubbard<T: Real>(basis: &Arc<FockBasis>, params: &ModelParams) -> Result<Operator<T>, ModelError> {
    params.validate(basis, Statistics::Boson)?;
    let mut trip = Vec::new();
    let hop = cr(T::lit(-params.j));
    for (a, b) in params.bonds() {
        push_bond(basis, &mut trip, a, b, hop)?;
    }
    let half_u = T::lit(0.5 * params.u);
    for (i, s) in basis.states().enumerate() {
        let e: usize = s.iter().map(|&n| n as usize * (n as usize).saturating_sub(1)).sum();
        if e > 0 {
            trip.push((i, i, cr(half_u * T::count(e))));
        }
    }
    Ok(Operator::from_triplets(
        basis.clone(),
        basis.clone(),
        trip,
        OpFlags::HERMITIAN,
    ))
}

/// `H = −J Σ_⟨jk⟩ (f†_j f_k + h.c.) + U Σ_⟨jk⟩ n_j n_k`.
pub fn fermi_hopping<T: Real>(basis: &Arc<FockBasis>, params: &ModelParams) -> Result<Operator<T>, ModelError> {
    params.validate(basis, Statistics::Fermion)?;
    let bonds = params.bonds();
    let mut trip = Vec::new();
    let hop = cr(T::lit(-params.j));
    for &(a, b) in &bonds {
        push_bond(basis, &mut trip, a, b, hop)?;
    }
    let u = T::lit(params.u);
    for (i, s) in basis.states().enumerate() {
        let e: usize = bonds.iter().map(|&(a, b)| (s[a] * s[b]) as usize).sum();
        if e > 0 {
            trip.push((i, i, cr(u * T::count(e))));
        }
    }
    Ok(Operator::from_triplets(
        basis.clone(),
        basis.clone(),
        trip,
        OpFlags::HERMITIAN,
    ))
}

/// `H_BS = −J_BS Σ_j (a†_{1,j} a_{2,j} + h.c.)` on a two-copy joint basis.
pub fn beamsplitter_hamiltonian<T: Real>(rb: &ReplicaBasis, params: &ModelParams) -> Result<Operator<T>, ModelError> {
    if rb.copies() != 2 {
        return Err(ModelError::Mismatch(format!(
            "the beamsplitter couples two copies, got {}",
            rb.copies()
        )));
    }
    if rb.sites() != params.sites {
        return Err(ModelError::Mismatch(format!(
            "replica basis has {} sites per copy but the model has {}",
            rb.sites(),
            params.sites
        )));
    }
    let joint = rb.joint_basis();
    let mut trip = Vec::new();
    let coeff = cr(T::lit(-params.j_bs));
    for j in 0..rb.sites() {
        push_bond(joint, &mut trip, rb.mode(0, j), rb.mode(1, j), coeff)?;
    }
    Ok(Operator::from_triplets(
        joint.clone(),
        joint.clone(),
        trip,
        OpFlags::HERMITIAN,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, Sector};

    #[test]
    fn two_site_single_particle() {
        let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(1)).unwrap();
        let h = bose_hubbard::<f64>(&b, &ModelParams::new(2, 1.0, 5.0, Boundary::Open)).unwrap();
        let m = h.to_dense();
        assert_eq!(m[(0, 1)], cr(-1.0));
        assert_eq!(m[(1, 0)], cr(-1.0));
        assert_eq!(m[(0, 0)], cr(0.0));
        h.check_flags().unwrap();
    }

    #[test]
    fn interaction_only() {
        let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(2)).unwrap();
        let h = bose_hubbard::<f64>(&b, &ModelParams::new(2, 0.0, 3.0, Boundary::Open)).unwrap();
        let d: Vec<f64> = h.diagonal_values().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![3.0, 0.0, 3.0]);
        assert_eq!(h.off_diagonal_mass(), 0.0);
    }

    #[test]
    fn bonds_by_boundary() {
        assert_eq!(ModelParams::new(3, 1.0, 0.0, Boundary::Periodic).bonds().len(), 3);
        assert_eq!(ModelParams::new(2, 1.0, 0.0, Boundary::Periodic).bonds().len(), 1);
        assert_eq!(ModelParams::new(1, 1.0, 0.0, Boundary::Open).bonds().len(), 0);
    }

    #[test]
    fn mismatched_basis_rejected() {
        let b = enumerate_basis(Statistics::Fermion, 3, Sector::Fixed(1)).unwrap();
        assert!(bose_hubbard::<f64>(&b, &ModelParams::new(3, 1.0, 1.0, Boundary::Open)).is_err());
        assert!(fermi_hopping::<f64>(&b, &ModelParams::new(4, 1.0, 1.0, Boundary::Open)).is_err());
    }

    #[test]
    fn params_from_toml_aliases() {
        let p: ModelParams = toml::from_str("L = 6\nJ = 1.0\nU = 1.56\nboundary = \"periodic\"").unwrap();
        assert_eq!(p.sites, 6);
        assert_eq!(p.u, 1.56);
        assert_eq!(p.boundary, Boundary::Periodic);
        assert_eq!(p.j_bs, 1.0);
    }
}
