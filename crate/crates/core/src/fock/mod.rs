//! Occupation-number bases and elementary second-quantized operators.

mod basis;
mod operator;

use std::sync::Arc;

pub use basis::{sector_dimension, FockBasis, Sector, Statistics};
pub use operator::{OpFlags, Operator, Storage, FLAG_TOLERANCE, SPARSE_THRESHOLD};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{cr, Real};

#[derive(Debug, Error)]
pub enum FockError {
    #[error("infeasible sector: {0}")]
    InfeasibleSector(String),
    #[error("occupation {0} exceeds the supported maximum of 255")]
    OccupationOverflow(usize),
    #[error("mode {mode} out of range for {num_modes} modes")]
    ModeOutOfRange { mode: usize, num_modes: usize },
    #[error("target sector not constructible: {0}")]
    TargetSector(String),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("operator flagged {flag} deviates by {deviation:e}")]
    FlagViolation { flag: &'static str, deviation: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    Raise,
    Lower,
}

/// Convenience constructor returning a shared basis.
pub fn enumerate_basis(statistics: Statistics, num_modes: usize, sector: Sector) -> Result<Arc<FockBasis>, FockError> {
    FockBasis::new(statistics, num_modes, sector).map(Arc::new)
}

fn check_mode(basis: &FockBasis, mode: usize) -> Result<(), FockError> {
    if mode >= basis.num_modes() {
        return Err(FockError::ModeOutOfRange {
            mode,
            num_modes: basis.num_modes(),
        });
    }
    Ok(())
}

/// Jordan-Wigner parity `(−1)^{Σ_{k<mode} n_k}` as ±1.
#[inline]
pub fn jw_sign(occ: &[u8], mode: usize) -> i32 {
    if occ[..mode].iter().map(|&n| n as u32).sum::<u32>() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Applies `a_mode` (or `f_mode`) to an occupation vector in place and
/// returns the amplitude, or `None` if the result vanishes.
pub fn lower_in_place(statistics: Statistics, occ: &mut [u8], mode: usize) -> Option<f64> {
    let n = occ[mode];
    if n == 0 {
        return None;
    }
    let amp = match statistics {
        Statistics::Boson => (n as f64).sqrt(),
        Statistics::Fermion => jw_sign(occ, mode) as f64,
    };
    occ[mode] = n - 1;
    Some(amp)
}

/// Applies `a†_mode` (or `f†_mode`) in place; `None` if Pauli-blocked.
pub fn raise_in_place(statistics: Statistics, occ: &mut [u8], mode: usize) -> Option<f64> {
    let n = occ[mode];
    let amp = match statistics {
        Statistics::Boson => {
            if n == u8::MAX {
                return None;
            }
            ((n as f64) + 1.0).sqrt()
        }
        Statistics::Fermion => {
            if n == 1 {
                return None;
            }
            jw_sign(occ, mode) as f64
        }
    };
    occ[mode] = n + 1;
    Some(amp)
}

fn ladder_target(basis: &Arc<FockBasis>, kind: LadderKind) -> Result<Arc<FockBasis>, FockError> {
    let Some(n) = basis.fixed_total() else {
        return Ok(basis.clone());
    };
    let target = match kind {
        LadderKind::Raise => n + 1,
        LadderKind::Lower => n
            .checked_sub(1)
            .ok_or_else(|| FockError::TargetSector("cannot lower the N=0 sector".into()))?,
    };
    FockBasis::new(basis.statistics(), basis.num_modes(), Sector::Fixed(target))
        .map(Arc::new)
        .map_err(|e| FockError::TargetSector(e.to_string()))
}

/// Creation or annihilation operator on `mode`.
///
/// On a fixed-N basis this is a rectangular map into the N±1 sector. On other
/// sectors it maps the basis into itself and drops states that leave it.
pub fn ladder<T: Real>(basis: &Arc<FockBasis>, mode: usize, kind: LadderKind) -> Result<Operator<T>, FockError> {
    check_mode(basis, mode)?;
    let target = ladder_target(basis, kind)?;
    ladder_into(basis, &target, mode, kind)
}

/// Ladder operator between explicitly given bases.
pub fn ladder_into<T: Real>(
    basis: &Arc<FockBasis>,
    target: &Arc<FockBasis>,
    mode: usize,
    kind: LadderKind,
) -> Result<Operator<T>, FockError> {
    check_mode(basis, mode)?;
    if target.num_modes() != basis.num_modes() || target.statistics() != basis.statistics() {
        return Err(FockError::BasisMismatch("ladder target has different modes".into()));
    }
    let stats = basis.statistics();
    let mut trip = Vec::new();
    let mut occ = vec![0u8; basis.num_modes()];
    for (col, state) in basis.states().enumerate() {
        occ.copy_from_slice(state);
        let amp = match kind {
            LadderKind::Raise => raise_in_place(stats, &mut occ, mode),
            LadderKind::Lower => lower_in_place(stats, &mut occ, mode),
        };
        if let Some(amp) = amp {
            if let Some(row) = target.index_of(&occ) {
                trip.push((row, col, cr(T::lit(amp))));
            }
        }
    }
    Ok(Operator::from_triplets(
        target.clone(),
        basis.clone(),
        trip,
        OpFlags::NONE,
    ))
}

/// Number operator `n_mode`.
pub fn number_op<T: Real>(basis: &Arc<FockBasis>, mode: usize) -> Result<Operator<T>, FockError> {
    check_mode(basis, mode)?;
    let values: Vec<Complex<T>> = basis.states().map(|s| cr(T::count(s[mode] as usize))).collect();
    Ok(Operator::diagonal(basis.clone(), &values).with_flags(OpFlags::DIAGONAL_HERMITIAN))
}

/// Total number operator summed over `modes` (all modes when `None`).
pub fn total_number_op<T: Real>(basis: &Arc<FockBasis>, modes: Option<&[usize]>) -> Result<Operator<T>, FockError> {
    if let Some(ms) = modes {
        for &m in ms {
            check_mode(basis, m)?;
        }
    }
    let values: Vec<Complex<T>> = basis
        .states()
        .map(|s| {
            let n: usize = match modes {
                Some(ms) => ms.iter().map(|&m| s[m] as usize).sum(),
                None => s.iter().map(|&x| x as usize).sum(),
            };
            cr(T::count(n))
        })
        .collect();
    Ok(Operator::diagonal(basis.clone(), &values).with_flags(OpFlags::DIAGONAL_HERMITIAN))
}

/// Matrix elements of `c†_to c_from` (bosonic or fermionic) as triplets on a
/// single basis. `from == to` gives the number operator.
pub fn hopping_triplets<T: Real>(
    basis: &FockBasis,
    to: usize,
    from: usize,
    coeff: Complex<T>,
) -> Result<Vec<(usize, usize, Complex<T>)>, FockError> {
    check_mode(basis, to)?;
    check_mode(basis, from)?;
    let stats = basis.statistics();
    let mut out = Vec::new();
    let mut occ = vec![0u8; basis.num_modes()];
    for (col, state) in basis.states().enumerate() {
        occ.copy_from_slice(state);
        let Some(a) = lower_in_place(stats, &mut occ, from) else {
            continue;
        };
        let Some(b) = raise_in_place(stats, &mut occ, to) else {
            continue;
        };
        if let Some(row) = basis.index_of(&occ) {
            out.push((row, col, coeff * cr(T::lit(a * b))));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{cabs, czero};

    fn boson(modes: usize, n: usize) -> Arc<FockBasis> {
        enumerate_basis(Statistics::Boson, modes, Sector::Fixed(n)).unwrap()
    }

    #[test]
    fn dimensions_and_order() {
        let b = boson(2, 2);
        let states: Vec<Vec<u8>> = b.states().map(|s| s.to_vec()).collect();
        assert_eq!(states, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let f = enumerate_basis(Statistics::Fermion, 4, Sector::Fixed(2)).unwrap();
        assert_eq!(f.dim(), 6);
        assert_eq!(boson(16, 4).dim(), 3876);
    }

    #[test]
    fn infeasible_fermion_sector_rejected() {
        let err = enumerate_basis(Statistics::Fermion, 3, Sector::Fixed(4)).unwrap_err();
        assert!(err.to_string().contains("fermions"));
        assert!(enumerate_basis(Statistics::Boson, 0, Sector::Fixed(1)).is_err());
    }

    #[test]
    fn rank_is_inverse_of_enumeration() {
        for b in [
            boson(5, 4),
            boson(1, 3),
            enumerate_basis(Statistics::Fermion, 6, Sector::Fixed(3)).unwrap(),
        ] {
            for (i, s) in b.states().enumerate() {
                assert_eq!(b.index_of(s), Some(i));
            }
        }
        let b = boson(3, 2);
        assert_eq!(b.index_of(&[1, 1, 1]), None);
        assert_eq!(b.index_of(&[3, 0, 0]), None);
    }

    #[test]
    fn totals_and_cutoff_sectors() {
        let t = enumerate_basis(Statistics::Boson, 2, Sector::Totals(vec![0, 2])).unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.state(0), &[2, 0]);
        assert_eq!(t.state(3), &[0, 0]);
        let c = enumerate_basis(Statistics::Boson, 3, Sector::Cutoff(2)).unwrap();
        assert_eq!(c.dim(), 27);
        let fc = enumerate_basis(Statistics::Fermion, 3, Sector::Cutoff(4)).unwrap();
        assert_eq!(fc.dim(), 8);
        for (i, s) in c.states().enumerate() {
            assert_eq!(c.index_of(s), Some(i));
        }
    }

    #[test]
    fn boson_raise_amplitude() {
        let b = boson(1, 1);
        let a_dag = ladder::<f64>(&b, 0, LadderKind::Raise).unwrap();
        assert_eq!(a_dag.shape(), (1, 1));
        assert!((a_dag.get(0, 0).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fermion_raise_on_occupied_vanishes() {
        let f = enumerate_basis(Statistics::Fermion, 2, Sector::Cutoff(1)).unwrap();
        let up = ladder::<f64>(&f, 0, LadderKind::Raise).unwrap();
        let occupied = f.index_of(&[1, 0]).unwrap();
        for r in 0..f.dim() {
            assert_eq!(up.get(r, occupied), czero());
        }
    }

    #[test]
    fn fermion_lower_sign() {
        let f = enumerate_basis(Statistics::Fermion, 3, Sector::Fixed(3)).unwrap();
        let low = ladder::<f64>(&f, 2, LadderKind::Lower).unwrap();
        let row = low.rows().index_of(&[1, 1, 0]).unwrap();
        assert_eq!(low.get(row, 0), cr(1.0));
        let low1 = ladder::<f64>(&f, 1, LadderKind::Lower).unwrap();
        let row = low1.rows().index_of(&[1, 0, 1]).unwrap();
        assert_eq!(low1.get(row, 0), cr(-1.0));
    }

    #[test]
    fn number_operator_diagonal() {
        let b = boson(2, 2);
        let n0 = number_op::<f64>(&b, 0).unwrap();
        let d: Vec<f64> = n0.diagonal_values().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![2.0, 1.0, 0.0]);
        n0.check_flags().unwrap();
    }

    #[test]
    fn number_trace_homogeneous() {
        let (l, n) = (4, 3);
        let b = boson(l, n);
        for j in 0..l {
            let tr = number_op::<f64>(&b, j).unwrap().trace().re;
            // direct summation oracle
            let direct: usize = b.states().map(|s| s[j] as usize).sum();
            assert_eq!(tr, direct as f64);
            assert!((tr - (n * b.dim()) as f64 / l as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn total_number_is_n_identity() {
        let b = boson(4, 3);
        let mut sum = number_op::<f64>(&b, 0).unwrap();
        for j in 1..4 {
            sum = sum.add(&number_op(&b, j).unwrap()).unwrap();
        }
        let id = Operator::<f64>::identity(b.clone()).scale(cr(3.0));
        assert!(sum.max_abs_diff(&id).unwrap() < 1e-14);
    }

    #[test]
    fn number_is_raise_times_lower() {
        for b in [
            boson(3, 2),
            enumerate_basis(Statistics::Fermion, 4, Sector::Fixed(2)).unwrap(),
        ] {
            for j in 0..b.num_modes() {
                let low = ladder::<f64>(&b, j, LadderKind::Lower).unwrap();
                let up = ladder_into::<f64>(low.rows(), &b, j, LadderKind::Raise).unwrap();
                let prod = up.mul(&low).unwrap();
                let n = number_op::<f64>(&b, j).unwrap();
                assert!(prod.max_abs_diff(&n).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_commutation_between_sectors() {
        // [a_i, a†_j] on the N sector: a_i a†_j maps N→N+1→N, a†_j a_i maps N→N−1→N
        let b = boson(3, 2);
        let up = boson(3, 3);
        let down = boson(3, 1);
        for i in 0..3 {
            for j in 0..3 {
                let raise_j = ladder_into::<f64>(&b, &up, j, LadderKind::Raise).unwrap();
                let lower_i = ladder_into::<f64>(&up, &b, i, LadderKind::Lower).unwrap();
                let lower_i0 = ladder_into::<f64>(&b, &down, i, LadderKind::Lower).unwrap();
                let raise_j0 = ladder_into::<f64>(&down, &b, j, LadderKind::Raise).unwrap();
                let comm = lower_i
                    .mul(&raise_j)
                    .unwrap()
                    .sub(&raise_j0.mul(&lower_i0).unwrap())
                    .unwrap();
                let expected = if i == j {
                    Operator::identity(b.clone())
                } else {
                    Operator::identity(b.clone()).scale(czero())
                };
                assert!(comm.max_abs_diff(&expected).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn fermion_anticommutation_exact() {
        let f = enumerate_basis(Statistics::Fermion, 4, Sector::Cutoff(1)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let fi = ladder::<f64>(&f, i, LadderKind::Lower).unwrap();
                let fj_dag = ladder::<f64>(&f, j, LadderKind::Raise).unwrap();
                let anti = fi.anticommutator(&fj_dag).unwrap();
                let id = Operator::identity(f.clone()).scale(cr(if i == j { 1.0 } else { 0.0 }));
                assert_eq!(anti.max_abs_diff(&id).unwrap(), 0.0);
                let fj = ladder::<f64>(&f, j, LadderKind::Lower).unwrap();
                assert_eq!(fi.anticommutator(&fj).unwrap().max_abs(), 0.0);
            }
        }
    }

    /// Antisymmetrized-wavefunction oracle: a Slater determinant of orbitals
    /// `o_1 < o_2 < ...` is `f†_{o_1} f†_{o_2} ... |0⟩`, so removing orbital
    /// `o_k` costs the sign of moving it to the front, `(−1)^{k−1}`.
    #[test]
    fn fermion_signs_match_slater_oracle() {
        let modes = 4;
        let f = enumerate_basis(Statistics::Fermion, modes, Sector::Cutoff(1)).unwrap();
        for mode in 0..modes {
            let low = ladder::<f64>(&f, mode, LadderKind::Lower).unwrap();
            for (col, s) in f.states().enumerate() {
                let orbitals: Vec<usize> = (0..modes).filter(|&m| s[m] == 1).collect();
                let expected = orbitals.iter().position(|&o| o == mode).map(|k| {
                    let mut t = s.to_vec();
                    t[mode] = 0;
                    (f.index_of(&t).unwrap(), if k % 2 == 0 { 1.0 } else { -1.0 })
                });
                for r in 0..f.dim() {
                    let want = match expected {
                        Some((row, sign)) if row == r => sign,
                        _ => 0.0,
                    };
                    assert_eq!(low.get(r, col), cr(want));
                }
            }
        }
    }

    #[test]
    fn sparse_storage_above_threshold() {
        let b = boson(16, 4);
        let n = number_op::<f64>(&b, 3).unwrap();
        assert!(n.is_sparse());
        assert!(!number_op::<f64>(&boson(4, 2), 0).unwrap().is_sparse());
        let tr = n.trace().re;
        assert!((tr - 4.0 * 3876.0 / 16.0).abs() < 1e-9);
    }

    #[test]
    fn hopping_matches_ladder_product() {
        let b = enumerate_basis(Statistics::Fermion, 4, Sector::Fixed(2)).unwrap();
        let trip = hopping_triplets::<f64>(&b, 3, 0, cr(1.0)).unwrap();
        let hop = Operator::from_triplets(b.clone(), b.clone(), trip, OpFlags::NONE);
        let low = ladder::<f64>(&b, 0, LadderKind::Lower).unwrap();
        let up = ladder_into::<f64>(low.rows(), &b, 3, LadderKind::Raise).unwrap();
        let prod = up.mul(&low).unwrap();
        assert!(hop.max_abs_diff(&prod).unwrap() < 1e-15);
        assert!(cabs(hop.get(0, 0)) < 1e-15);
    }

    #[test]
    fn enumeration_reproducible() {
        let a = boson(5, 3);
        let b = boson(5, 3);
        assert!(a.states().zip(b.states()).all(|(x, y)| x == y));
    }
}
