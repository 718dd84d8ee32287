use std::collections::BTreeMap;

use num_complex::Complex;

use super::{ReplicaBasis, ReplicaError};
use crate::fock::{lower_in_place, raise_in_place, FockBasis, OpFlags, Operator, Statistics};
use crate::scalar::{cr, Real};

fn require_fermion_pair(rb: &ReplicaBasis) -> Result<(), ReplicaError> {
    if rb.statistics() != Statistics::Fermion {
        return Err(ReplicaError::Unsupported("expected a fermionic replica basis".into()));
    }
    if rb.copies() != 2 {
        return Err(ReplicaError::Unsupported(format!(
            "fermionic protocols are defined for two copies, got {}",
            rb.copies()
        )));
    }
    Ok(())
}

/// Two-copy fermionic Fourier transform.
///
/// Per site, `f†_{1} → (−f†_{1} + f†_{2})/√2` and `f†_{2} → (f†_{1} + f†_{2})/√2`.
/// Each basis state's creation string (copy-major order) is expanded term by
/// term and reordered with the permutation sign.
pub fn fermionic_fourier_op<T: Real>(rb: &ReplicaBasis) -> Result<Operator<T>, ReplicaError> {
    require_fermion_pair(rb)?;
    let joint = rb.joint_basis();
    let l = rb.sites();
    let h = T::one() / T::lit(2.0).sqrt();
    // image[p] = [(copy k, coefficient)] for a creation operator in copy p
    let image = [[(0usize, -h), (1usize, h)], [(0usize, h), (1usize, h)]];
    let mut trip = Vec::new();
    for (col, s) in joint.states().enumerate() {
        let modes: Vec<usize> = (0..2 * l).filter(|&m| s[m] == 1).collect();
        let mut terms: Vec<(Vec<usize>, T)> = vec![(Vec::with_capacity(modes.len()), T::one())];
        for &m in &modes {
            let (p, j) = (m / l, m % l);
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (seq, c) in &terms {
                for &(k, u) in &image[p] {
                    let target = k * l + j;
                    if seq.contains(&target) {
                        continue;
                    }
                    let mut s2 = seq.clone();
                    s2.push(target);
                    next.push((s2, *c * u));
                }
            }
            terms = next;
        }
        let mut acc: BTreeMap<usize, T> = BTreeMap::new();
        let mut occ = vec![0u8; 2 * l];
        for (seq, c) in terms {
            let sign = sort_sign(&seq);
            occ.iter_mut().for_each(|x| *x = 0);
            for &m in &seq {
                occ[m] = 1;
            }
            let row = joint.index_of(&occ).expect("number-conserving image");
            *acc.entry(row).or_insert_with(T::zero) += c * T::lit(sign as f64);
        }
        for (row, v) in acc {
            if v.abs() > T::lit(1e-15) {
                trip.push((row, col, cr(v)));
            }
        }
    }
    let flags = OpFlags {
        hermitian: false,
        unitary: true,
        diagonal: false,
    };
    Ok(Operator::from_triplets(joint.clone(), joint.clone(), trip, flags))
}

/// Sign of the permutation sorting `seq` ascending (entries distinct).
fn sort_sign(seq: &[usize]) -> i32 {
    let mut inv = 0;
    for a in 0..seq.len() {
        for b in a + 1..seq.len() {
            if seq[a] > seq[b] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Parity label used by the measurement tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Outcome table for V keyed by (N_tot, ⌊N_tot/2⌋, N₂) parities.
pub const V_TABLE: [(Parity, Parity, Parity, i8); 8] = {
    use Parity::{Even as E, Odd as O};
    [
        (E, E, E, 1),
        (E, E, O, -1),
        (E, O, E, -1),
        (E, O, O, 1),
        (O, E, E, 1),
        (O, E, O, -1),
        (O, O, E, -1),
        (O, O, O, 1),
    ]
};

/// V eigenvalue for total fermion number `n_tot` with `n2` in copy 2,
/// read off [`V_TABLE`].
pub fn v_value(n_tot: usize, n2: usize) -> i8 {
    let key = (Parity::of(n_tot), Parity::of(n_tot / 2), Parity::of(n2));
    V_TABLE
        .iter()
        .find(|r| (r.0, r.1, r.2) == key)
        .map(|r| r.3)
        .expect("table covers every parity triple")
}

/// Closed form `(−1)^{⌊N_tot/2⌋ + N₂}` of the table.
pub fn v_value_formula(n_tot: usize, n2: usize) -> i8 {
    if (n_tot / 2 + n2).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// V eigenvalue on a joint occupation vector, optionally restricted to a
/// set of sites.
pub fn v_value_of_occupations(occ: &[u8], sites_per_copy: usize, sites: Option<&[usize]>) -> i8 {
    let l = sites_per_copy;
    let (mut n1, mut n2) = (0usize, 0usize);
    let mut add = |j: usize| {
        n1 += occ[j] as usize;
        n2 += occ[l + j] as usize;
    };
    match sites {
        Some(s) => s.iter().for_each(|&j| add(j)),
        None => (0..l).for_each(add),
    }
    v_value(n1 + n2, n2)
}

pub fn fermion_v_op<T: Real>(rb: &ReplicaBasis) -> Result<Operator<T>, ReplicaError> {
    require_fermion_pair(rb)?;
    let values: Vec<Complex<T>> = rb
        .joint_basis()
        .states()
        .map(|s| cr(T::lit(v_value_of_occupations(s, rb.sites(), None) as f64)))
        .collect();
    let flags = OpFlags {
        hermitian: true,
        unitary: true,
        diagonal: true,
    };
    Ok(Operator::diagonal(rb.joint_basis().clone(), &values).with_flags(flags))
}

/// Elementary fermion operator on `(copy, site)`, copies counted from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FermionOp {
    pub copy: usize,
    pub site: usize,
    pub creation: bool,
}

impl FermionOp {
    pub fn create(copy: usize, site: usize) -> Self {
        Self {
            copy,
            site,
            creation: true,
        }
    }

    pub fn annihilate(copy: usize, site: usize) -> Self {
        Self {
            copy,
            site,
            creation: false,
        }
    }

    /// Position in the block order: copy-1 creations, copy-1 annihilations,
    /// copy-2 creations, copy-2 annihilations, each by site.
    fn block_key(&self) -> (usize, usize, usize) {
        (self.copy, usize::from(!self.creation), self.site)
    }
}

/// Sum of operator words with coefficients.
#[derive(Clone, Debug, Default)]
pub struct FermionPolynomial {
    pub terms: Vec<(Complex<f64>, Vec<FermionOp>)>,
}

impl FermionPolynomial {
    pub fn word(coeff: Complex<f64>, ops: Vec<FermionOp>) -> Self {
        Self {
            terms: vec![(coeff, ops)],
        }
    }

    pub fn add(mut self, other: Self) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// `½ (X on copy 1 + X on copy 2)` for a single-copy word `X`.
    pub fn symmetrized(coeff: Complex<f64>, single_copy: &[(usize, bool)]) -> Self {
        let half = coeff * 0.5;
        let mut out = Self::default();
        for copy in 0..2 {
            let ops = single_copy
                .iter()
                .map(|&(site, creation)| FermionOp { copy, site, creation })
                .collect();
            out.terms.push((half, ops));
        }
        out
    }

    /// Rewrites every word in block order using the canonical
    /// anticommutation relations; the result has no repeated operators.
    pub fn block_ordered(&self) -> Self {
        let mut done: BTreeMap<Vec<FermionOp>, Complex<f64>> = BTreeMap::new();
        let mut stack: Vec<(Complex<f64>, Vec<FermionOp>)> = self.terms.clone();
        'outer: while let Some((c, mut w)) = stack.pop() {
            if c == Complex::new(0.0, 0.0) {
                continue;
            }
            let mut sign = 1.0;
            loop {
                let Some(i) = (0..w.len().saturating_sub(1)).find(|&i| w[i].block_key() >= w[i + 1].block_key()) else {
                    break;
                };
                let (a, b) = (w[i], w[i + 1]);
                if a == b {
                    continue 'outer;
                }
                if a.copy == b.copy && a.site == b.site {
                    // f f† = 1 − f† f
                    let mut contracted = w.clone();
                    contracted.drain(i..i + 2);
                    stack.push((c * sign, contracted));
                }
                w.swap(i, i + 1);
                sign = -sign;
            }
            *done.entry(w).or_insert(Complex::new(0.0, 0.0)) += c * sign;
        }
        Self {
            terms: done
                .into_iter()
                .filter(|(_, c)| c.norm() > 1e-14)
                .map(|(w, c)| (c, w))
                .collect(),
        }
    }

    /// Dense matrix of the polynomial on a joint basis (modes copy-major).
    pub fn matrix(&self, joint: &FockBasis, sites_per_copy: usize) -> nalgebra::DMatrix<Complex<f64>> {
        let d = joint.dim();
        let mut m = nalgebra::DMatrix::from_element(d, d, Complex::new(0.0, 0.0));
        let mut occ = vec![0u8; joint.num_modes()];
        for (col, s) in joint.states().enumerate() {
            'term: for (c, w) in &self.terms {
                occ.copy_from_slice(s);
                let mut amp = 1.0;
                for op in w.iter().rev() {
                    let mode = op.copy * sites_per_copy + op.site;
                    let r = if op.creation {
                        raise_in_place(Statistics::Fermion, &mut occ, mode)
                    } else {
                        lower_in_place(Statistics::Fermion, &mut occ, mode)
                    };
                    match r {
                        Some(a) => amp *= a,
                        None => continue 'term,
                    }
                }
                if let Some(row) = joint.index_of(&occ) {
                    m[(row, col)] += c * amp;
                }
            }
        }
        m
    }
}

/// Block-ordered word counts `(m₁, m₂, n₁, n₂)`.
pub fn word_counts(w: &[FermionOp]) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for op in w {
        match (op.copy, op.creation) {
            (0, true) => c.0 += 1,
            (0, false) => c.1 += 1,
            (_, true) => c.2 += 1,
            (_, false) => c.3 += 1,
        }
    }
    c
}

/// Conjugation table for V keyed by `(m+n mod 2, m+n mod 4, n mod 2)`.
pub const CONJUGATION_TABLE: [(u8, u8, u8, i8); 8] = [
    (0, 2, 0, -1),
    (0, 2, 1, 1),
    (0, 0, 0, 1),
    (0, 0, 1, -1),
    (1, 1, 0, -1),
    (1, 1, 1, 1),
    (1, 3, 0, 1),
    (1, 3, 1, -1),
];

/// Sign acquired by a block-ordered word under `V · V`.
///
/// `m = m₁ − m₂` and `n = n₁ − n₂` are taken with sign (residues mod 4);
/// with absolute values the table would contradict direct conjugation, e.g.
/// for `f†_{i,1} f_{j,2}`.
pub fn conjugation_sign(m1: usize, m2: usize, n1: usize, n2: usize) -> i8 {
    let m = m1 as i64 - m2 as i64;
    let n = n1 as i64 - n2 as i64;
    let k = (m + n).rem_euclid(4) as u8;
    let key = (k % 2, k, n.rem_euclid(2) as u8);
    CONJUGATION_TABLE
        .iter()
        .find(|r| (r.0, r.1, r.2) == key)
        .map(|r| r.3)
        .expect("table covers every residue")
}

#[derive(Clone, Debug)]
pub struct CommutantReport {
    /// Whether `V X V = X`.
    pub commutes: bool,
    /// Max deviation between the table route and direct conjugation.
    pub consistency: f64,
    pub norm_of_commutator: f64,
}

/// Decides whether `[X, V] = 0` both by per-word table lookup and by direct
/// conjugation, and checks that the two agree.
pub fn v_commutant_check(x: &FermionPolynomial, rb: &ReplicaBasis) -> Result<CommutantReport, ReplicaError> {
    require_fermion_pair(rb)?;
    let joint = rb.joint_basis();
    let l = rb.sites();
    let ordered = x.block_ordered();
    let x_mat = ordered.matrix(joint, l);
    let v: Vec<f64> = joint
        .states()
        .map(|s| v_value_of_occupations(s, l, None) as f64)
        .collect();
    let d = joint.dim();
    let direct = nalgebra::DMatrix::from_fn(d, d, |r, c| x_mat[(r, c)] * v[r] * v[c]);
    let table = FermionPolynomial {
        terms: ordered
            .terms
            .iter()
            .map(|(c, w)| {
                let (m1, m2, n1, n2) = word_counts(w);
                (*c * conjugation_sign(m1, m2, n1, n2) as f64, w.clone())
            })
            .collect(),
    }
    .matrix(joint, l);
    let consistency = direct
        .iter()
        .zip(table.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if consistency > 1e-12 {
        return Err(ReplicaError::Inconsistent(format!(
            "conjugation table disagrees with direct conjugation by {consistency:e}"
        )));
    }
    let comm = direct
        .iter()
        .zip(x_mat.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    Ok(CommutantReport {
        commutes: comm < 1e-12,
        consistency,
        norm_of_commutator: comm,
    })
}
