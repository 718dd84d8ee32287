use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;

use super::{ReplicaBasis, ReplicaError};
use crate::fock::{FockBasis, OpFlags, Operator, Sector, Statistics};
use crate::linalg::CVector;
use crate::scalar::{cis, cr, czero, Real};

/// Cyclic copy shift `S_n`: the content of copy `p+1` moves to copy `p`, so
/// `S|ψ₁⟩⊗|ψ₂⟩⊗…⊗|ψₙ⟩ = |ψ₂⟩⊗…⊗|ψₙ⟩⊗|ψ₁⟩`. Fermionic states pick up the
/// sign of reordering their creation operators back to copy-major order.
pub fn permutation_op<T: Real>(rb: &ReplicaBasis) -> Result<Operator<T>, ReplicaError> {
    let joint = rb.joint_basis();
    let (n, l) = (rb.copies(), rb.sites());
    let fermion = rb.statistics() == Statistics::Fermion;
    let mut trip = Vec::with_capacity(joint.dim());
    let mut out = vec![0u8; n * l];
    for (col, s) in joint.states().enumerate() {
        for q in 0..n {
            let src = (q + 1) % n;
            out[q * l..(q + 1) * l].copy_from_slice(&s[src * l..(src + 1) * l]);
        }
        let row = joint
            .index_of(&out)
            .ok_or_else(|| ReplicaError::Sector("copy shift leaves the joint sector".into()))?;
        let sign = if fermion { shift_sign(s, n, l) } else { 1 };
        trip.push((row, col, cr(T::lit(sign as f64))));
    }
    let flags = OpFlags {
        hermitian: n <= 2,
        unitary: true,
        diagonal: false,
    };
    Ok(Operator::from_triplets(joint.clone(), joint.clone(), trip, flags))
}

/// Sign of sorting the shifted creation string back to ascending mode order.
fn shift_sign(occ: &[u8], n: usize, l: usize) -> i32 {
    let images: Vec<usize> = (0..n * l)
        .filter(|&m| occ[m] == 1)
        .map(|m| {
            let (p, j) = (m / l, m % l);
            ((p + n - 1) % n) * l + j
        })
        .collect();
    let mut inversions = 0usize;
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            if images[a] > images[b] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Exact value of `exp(−i 2π e / n)`, with quarter turns returned without
/// rounding error.
pub fn root_of_unity<T: Real>(e: usize, n: usize) -> Complex<T> {
    let e = e % n;
    if (4 * e).is_multiple_of(n) {
        return match 4 * e / n {
            0 => cr(T::one()),
            1 => Complex::new(T::zero(), -T::one()),
            2 => cr(-T::one()),
            _ => Complex::new(T::zero(), T::one()),
        };
    }
    cis(-(T::two_pi() * T::count(e) / T::count(n)))
}

/// Eigenvalue of `R_n = Π_j exp(−i 2π/n Σ_p p·n_{p,j})` on a joint
/// occupation vector, copies counted from 1. When `sites` is given only those
/// sites contribute.
pub fn phase_value<T: Real>(occ: &[u8], copies: usize, sites_per_copy: usize, sites: Option<&[usize]>) -> Complex<T> {
    let mut e = 0usize;
    let mut add = |j: usize| {
        for p in 0..copies {
            e += (p + 1) * occ[p * sites_per_copy + j] as usize;
        }
    };
    match sites {
        Some(s) => s.iter().for_each(|&j| add(j)),
        None => (0..sites_per_copy).for_each(add),
    }
    root_of_unity(e, copies)
}

/// Diagonal phase operator `R_n` on the joint basis.
pub fn phase_op<T: Real>(rb: &ReplicaBasis) -> Operator<T> {
    let values: Vec<Complex<T>> = rb
        .joint_basis()
        .states()
        .map(|s| phase_value(s, rb.copies(), rb.sites(), None))
        .collect();
    let flags = OpFlags {
        hermitian: rb.copies() <= 2,
        unitary: true,
        diagonal: true,
    };
    Operator::diagonal(rb.joint_basis().clone(), &values).with_flags(flags)
}

/// Inter-copy discrete Fourier transform for bosons, acting site by site.
///
/// Each creation operator is mapped as `F a†_{p,j} F† = Σ_k ω^{kp} a†_{k,j}/√n`
/// with `ω = e^{i2π/n}` and copies `p, k` counted from 1; the vacuum is fixed.
/// Per-site images of every occupation tuple are tabulated once by expanding
/// the transformed creation products.
pub struct FourierTransform<T: Real> {
    copies: usize,
    sites: usize,
    joint: Arc<FockBasis>,
    tuples: FockBasis,
    tables: Vec<Vec<(usize, Complex<T>)>>,
}

fn factorial_sqrt(n: u8) -> f64 {
    (1..=n as u64).map(|k| (k as f64).sqrt()).product()
}

impl<T: Real> FourierTransform<T> {
    pub fn new(rb: &ReplicaBasis) -> Result<Self, ReplicaError> {
        if rb.statistics() != Statistics::Boson {
            return Err(ReplicaError::Unsupported(
                "bosonic Fourier transform on a fermionic basis; use the fermionic variant".into(),
            ));
        }
        let n = rb.copies();
        let max_total = rb.joint_basis().max_occupation();
        let tuples = FockBasis::new(Statistics::Boson, n, Sector::Totals((0..=max_total).collect()))?;
        let norm = T::one() / T::count(n).sqrt();
        // u[k][p] = ω^{(k+1)(p+1)}/√n
        let u: Vec<Vec<Complex<T>>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|p| root_of_unity::<T>((k + 1) * (p + 1), n).conj() * cr(norm))
                    .collect()
            })
            .collect();
        let mut tables = Vec::with_capacity(tuples.dim());
        for occ in tuples.states() {
            let mut poly: HashMap<Vec<u8>, Complex<T>> = HashMap::new();
            poly.insert(vec![0u8; n], cr(T::one()));
            for (p, &o) in occ.iter().enumerate() {
                for _ in 0..o {
                    let mut next: HashMap<Vec<u8>, Complex<T>> = HashMap::new();
                    for (mono, c) in &poly {
                        for (k, row) in u.iter().enumerate() {
                            let mut m = mono.clone();
                            m[k] += 1;
                            *next.entry(m).or_insert_with(czero) += *c * row[p];
                        }
                    }
                    poly = next;
                }
            }
            let denom: f64 = occ.iter().map(|&o| factorial_sqrt(o)).product();
            let mut terms: Vec<(usize, Complex<T>)> = poly
                .into_iter()
                .filter(|(_, c)| c.norm_sqr() > T::lit(1e-30))
                .map(|(mono, c)| {
                    let num: f64 = mono.iter().map(|&e| factorial_sqrt(e)).product();
                    let idx = tuples.index_of(&mono).expect("same total");
                    (idx, c * cr(T::lit(num / denom)))
                })
                .collect();
            terms.sort_by_key(|t| t.0);
            tables.push(terms);
        }
        Ok(Self {
            copies: n,
            sites: rb.sites(),
            joint: rb.joint_basis().clone(),
            tuples,
            tables,
        })
    }

    /// Image of a single-site occupation tuple `(o_1, …, o_n)`.
    pub fn site_image(&self, tuple: &[u8]) -> Vec<(Vec<u8>, Complex<T>)> {
        let idx = self.tuples.index_of(tuple).expect("tuple within range");
        self.tables[idx]
            .iter()
            .map(|&(o, c)| (self.tuples.state(o).to_vec(), c))
            .collect()
    }

    /// Calls `f(row, amplitude)` for every nonzero entry of column `col`.
    pub fn for_each_in_column<F: FnMut(usize, Complex<T>)>(&self, col: usize, mut f: F) {
        let (n, l) = (self.copies, self.sites);
        let s = self.joint.state(col);
        let mut tuple = vec![0u8; n];
        let per_site: Vec<&[(usize, Complex<T>)]> = (0..l)
            .map(|j| {
                for p in 0..n {
                    tuple[p] = s[p * l + j];
                }
                self.tables[self.tuples.index_of(&tuple).expect("tuple within range")].as_slice()
            })
            .collect();
        let mut occ = vec![0u8; n * l];
        self.recurse(&per_site, 0, cr(T::one()), &mut occ, &mut f);
    }

    fn recurse<F: FnMut(usize, Complex<T>)>(
        &self,
        per_site: &[&[(usize, Complex<T>)]],
        j: usize,
        amp: Complex<T>,
        occ: &mut [u8],
        f: &mut F,
    ) {
        if j == self.sites {
            let row = self.joint.index_of(occ).expect("number-conserving image");
            f(row, amp);
            return;
        }
        let (n, l) = (self.copies, self.sites);
        for &(t, c) in per_site[j] {
            let out = self.tuples.state(t);
            for p in 0..n {
                occ[p * l + j] = out[p];
            }
            self.recurse(per_site, j + 1, amp * c, occ, f);
        }
    }

    /// `F x` by sparse column expansion.
    pub fn apply(&self, x: &CVector<T>) -> CVector<T> {
        assert_eq!(x.len(), self.joint.dim());
        let mut y = CVector::from_element(x.len(), czero());
        for (col, xc) in x.iter().enumerate() {
            if *xc == czero() {
                continue;
            }
            self.for_each_in_column(col, |row, a| y[row] += a * *xc);
        }
        y
    }

    /// `F x` for an input supported on a sparse list of `(joint index, amplitude)`.
    pub fn apply_sparse(&self, x: &[(usize, Complex<T>)]) -> CVector<T> {
        let mut y = CVector::from_element(self.joint.dim(), czero());
        for &(col, xc) in x {
            self.for_each_in_column(col, |row, a| y[row] += a * xc);
        }
        y
    }

    pub fn to_operator(&self) -> Operator<T> {
        let mut trip = Vec::new();
        for col in 0..self.joint.dim() {
            self.for_each_in_column(col, |row, a| trip.push((row, col, a)));
        }
        let flags = OpFlags {
            hermitian: false,
            unitary: true,
            diagonal: false,
        };
        Operator::from_triplets(self.joint.clone(), self.joint.clone(), trip, flags)
    }
}

/// `F_n` as an operator on the joint basis.
pub fn fourier_op<T: Real>(rb: &ReplicaBasis) -> Result<Operator<T>, ReplicaError> {
    Ok(FourierTransform::new(rb)?.to_operator())
}
