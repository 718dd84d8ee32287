use std::sync::Arc;

use crate::fock::{FockBasis, Sector, Statistics};

use super::ReplicaError;

const NO_TUPLE: u32 = u32::MAX;

/// Joint Fock space of `n` copies of a single-copy basis.
///
/// Joint modes are flattened copy-major: mode `p·L + j` is site `j` of copy
/// `p` (zero-based). The joint basis holds the full total-number sector so
/// that inter-copy mode mixing stays inside it; product states `|i₁⟩⊗…⊗|iₙ⟩`
/// occupy the subspace reached through [`ReplicaBasis::tuple_to_joint`].
/// Tuples are ranked with copy 1 most significant, matching the Kronecker
/// product ordering `A₁ ⊗ … ⊗ Aₙ`.
#[derive(Debug)]
pub struct ReplicaBasis {
    copies: usize,
    copy: Arc<FockBasis>,
    joint: Arc<FockBasis>,
    tuple_to_joint: Vec<u32>,
    joint_to_tuple: Vec<u32>,
}

fn joint_sector(copy: &FockBasis, copies: usize) -> Result<Sector, ReplicaError> {
    match copy.sector() {
        Sector::Fixed(n) => Ok(Sector::Fixed(n * copies)),
        Sector::Totals(totals) => {
            let mut sums = vec![0usize];
            for _ in 0..copies {
                let mut next: Vec<usize> = sums.iter().flat_map(|s| totals.iter().map(move |t| s + t)).collect();
                next.sort_unstable();
                next.dedup();
                sums = next;
            }
            Ok(Sector::Totals(sums))
        }
        Sector::Cutoff(c) => match copy.statistics() {
            Statistics::Fermion => Ok(Sector::Cutoff(*c)),
            Statistics::Boson => Err(ReplicaError::Sector(
                "bosonic cutoff sectors are not closed under inter-copy mixing; use fixed totals".into(),
            )),
        },
    }
}

impl ReplicaBasis {
    pub fn new(copy: Arc<FockBasis>, copies: usize) -> Result<Self, ReplicaError> {
        if copies == 0 {
            return Err(ReplicaError::Sector("at least one copy is required".into()));
        }
        let d = copy.dim();
        let product = d
            .checked_pow(copies as u32)
            .filter(|&p| p < NO_TUPLE as usize)
            .ok_or_else(|| ReplicaError::TooLarge(format!("{d}^{copies} product states")))?;
        let sector = joint_sector(&copy, copies)?;
        let joint = Arc::new(FockBasis::new(copy.statistics(), copy.num_modes() * copies, sector)?);
        if joint.dim() >= NO_TUPLE as usize {
            return Err(ReplicaError::TooLarge(format!("joint dimension {}", joint.dim())));
        }
        let l = copy.num_modes();
        let mut tuple_to_joint = Vec::with_capacity(product);
        let mut joint_to_tuple = vec![NO_TUPLE; joint.dim()];
        let mut occ = vec![0u8; l * copies];
        let mut digits = vec![0usize; copies];
        for t in 0..product {
            let mut rest = t;
            for p in (0..copies).rev() {
                digits[p] = rest % d;
                rest /= d;
            }
            for (p, &i) in digits.iter().enumerate() {
                occ[p * l..(p + 1) * l].copy_from_slice(copy.state(i));
            }
            let j = joint.index_of(&occ).expect("product state lies in the joint sector");
            tuple_to_joint.push(j as u32);
            joint_to_tuple[j] = t as u32;
        }
        Ok(Self {
            copies,
            copy,
            joint,
            tuple_to_joint,
            joint_to_tuple,
        })
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    /// Sites (modes) per copy.
    pub fn sites(&self) -> usize {
        self.copy.num_modes()
    }

    pub fn copy_basis(&self) -> &Arc<FockBasis> {
        &self.copy
    }

    pub fn joint_basis(&self) -> &Arc<FockBasis> {
        &self.joint
    }

    pub fn statistics(&self) -> Statistics {
        self.copy.statistics()
    }

    /// Number of product states, `|copy|ⁿ`.
    pub fn product_dim(&self) -> usize {
        self.tuple_to_joint.len()
    }

    /// Joint mode index of site `j` in copy `p` (both zero-based).
    pub fn mode(&self, p: usize, j: usize) -> usize {
        p * self.sites() + j
    }

    /// Joint index of the product state with copy indices `tuple`.
    pub fn tuple_to_joint(&self, tuple: &[usize]) -> usize {
        assert_eq!(tuple.len(), self.copies);
        let d = self.copy.dim();
        let t = tuple.iter().fold(0usize, |acc, &i| acc * d + i);
        self.tuple_to_joint[t] as usize
    }

    /// Joint index of the product state with Kronecker rank `t`.
    pub fn rank_to_joint(&self, t: usize) -> usize {
        self.tuple_to_joint[t] as usize
    }

    /// Kronecker rank of a joint state, if it is a product of sector states.
    pub fn joint_to_rank(&self, j: usize) -> Option<usize> {
        let t = self.joint_to_tuple[j];
        (t != NO_TUPLE).then_some(t as usize)
    }

    /// Copy indices of a joint product state.
    pub fn joint_to_tuple(&self, j: usize) -> Option<Vec<usize>> {
        let mut t = self.joint_to_rank(j)?;
        let d = self.copy.dim();
        let mut out = vec![0; self.copies];
        for p in (0..self.copies).rev() {
            out[p] = t % d;
            t /= d;
        }
        Some(out)
    }

    /// Occupations of copy `p` within joint state `j`.
    pub fn copy_occupations(&self, j: usize, p: usize) -> &[u8] {
        let l = self.sites();
        &self.joint.state(j)[p * l..(p + 1) * l]
    }
}
