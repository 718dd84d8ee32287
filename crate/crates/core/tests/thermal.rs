use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use virtual_cooling::fock::{enumerate_basis, total_number_op, FockBasis, OpFlags, Operator, Sector, Statistics};
use virtual_cooling::linalg::{hermitian_eigen, random_hermitian, trace_distance};
use virtual_cooling::model::{bose_hubbard, Boundary, ModelParams};
use virtual_cooling::thermal::{
    fit_effective_ensemble, grand_canonical_state, matrix_power_state, purity, renyi_entropy, thermal_state,
    FitOptions, GrandCanonicalSpectrum, ThermalError,
};

fn dim_basis(d: usize) -> Arc<FockBasis> {
    enumerate_basis(Statistics::Boson, 1, Sector::Cutoff(d - 1)).unwrap()
}

fn random_h(d: usize, seed: u64) -> Operator<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = dim_basis(d);
    Operator::from_dense(b.clone(), b, random_hermitian(d, &mut rng), OpFlags::HERMITIAN)
}

fn bh_union(l: usize, nmax: usize, u: f64) -> (Operator<f64>, Operator<f64>) {
    let b = enumerate_basis(Statistics::Boson, l, Sector::Totals((0..=nmax).collect())).unwrap();
    let h = bose_hubbard(&b, &ModelParams::new(l, 1.0, u, Boundary::Open)).unwrap();
    let n = total_number_op(&b, None).unwrap();
    (h, n)
}

#[test]
fn low_temperature_projects_on_ground_state() {
    let b = enumerate_basis(Statistics::Boson, 4, Sector::Fixed(2)).unwrap();
    let h = bose_hubbard::<f64>(&b, &ModelParams::new(4, 1.0, 3.0, Boundary::Open)).unwrap();
    let rho = thermal_state(&h, 200.0).unwrap();
    let eig = hermitian_eigen(&h.to_dense());
    assert!(eig.values[1] - eig.values[0] > 0.1);
    let g = eig.ground_vector();
    let fid = (g.adjoint() * rho.matrix() * &g)[(0, 0)].re;
    assert!(fid > 1.0 - 1e-8, "{fid}");
}

#[test]
fn non_hermitian_hamiltonian_rejected() {
    let b = dim_basis(2);
    let mut m = nalgebra::DMatrix::from_element(2, 2, num_complex::Complex::new(0.0, 0.0));
    m[(0, 1)] = num_complex::Complex::new(1.0, 0.0);
    let h = Operator::from_dense(b.clone(), b, m, OpFlags::NONE);
    assert!(matches!(thermal_state(&h, 1.0), Err(ThermalError::NotHermitian(_))));
}

#[test]
fn grand_canonical_limits() {
    let (h, n) = bh_union(3, 3, 2.0);
    let rho = grand_canonical_state(&h, &n, 0.0, 0.0).unwrap();
    let d = h.rows().dim() as f64;
    for p in rho.populations() {
        assert!((p - 1.0 / d).abs() < 1e-14);
    }
    let rho = grand_canonical_state(&h, &n, 1.0, -60.0).unwrap();
    let vac = h.rows().index_of(&[0, 0, 0]).unwrap();
    assert!(rho.populations()[vac] > 1.0 - 1e-12);
    rho.validate().unwrap();
}

#[test]
fn fit_at_infinite_temperature_moments() {
    let (h, n) = bh_union(3, 3, 1.0);
    let d = h.rows().dim() as f64;
    let e = h.trace().re / d;
    let nn = n.trace().re / d;
    let spec = GrandCanonicalSpectrum::new(&h, &n).unwrap();
    let fit = fit_effective_ensemble(&spec, e, nn, FitOptions::default()).unwrap();
    assert!(fit.beta.abs() < 1e-6, "{fit:?}");
}

#[test]
fn fit_round_trip() {
    let (h, n) = bh_union(3, 4, 1.56);
    let spec = GrandCanonicalSpectrum::new(&h, &n).unwrap();
    for &(beta, mu) in &[(0.3, -1.0), (1.2, 0.4), (0.05, -3.0), (2.5, 1.5)] {
        let rho = spec.state(beta, mu);
        let e = rho.expectation(&h).re;
        let nn = rho.expectation(&n).re;
        let fit = fit_effective_ensemble(&spec, e, nn, FitOptions::default()).unwrap();
        assert!((fit.beta - beta).abs() < 1e-6, "{beta} {mu} -> {fit:?}");
        assert!((fit.mu - mu).abs() < 1e-6, "{beta} {mu} -> {fit:?}");
        assert!(fit.residual_e.abs() < 1e-8 && fit.residual_n.abs() < 1e-8);
    }
}

#[test]
fn fit_below_ground_is_infeasible() {
    let (h, n) = bh_union(2, 2, 1.0);
    let spec = GrandCanonicalSpectrum::new(&h, &n).unwrap();
    let err = fit_effective_ensemble(&spec, spec.ground_energy() - 1.0, 1.0, FitOptions::default()).unwrap_err();
    assert!(matches!(err, ThermalError::Infeasible(_)));
}

#[test]
fn fitted_beta_monotone_in_energy() {
    let (h, n) = bh_union(3, 4, 1.56);
    let spec = GrandCanonicalSpectrum::new(&h, &n).unwrap();
    let n_target = 2.0;
    let mut last = f64::INFINITY;
    // lowest energy inside the N=2 sector; everything above it is reachable
    let e_min = spec
        .energies
        .iter()
        .zip(&spec.numbers)
        .filter(|(_, &nn)| nn == n_target)
        .map(|(&e, _)| e)
        .fold(f64::INFINITY, f64::min);
    for k in 0..12 {
        let e = e_min + 0.25 * k as f64 + 0.1;
        match fit_effective_ensemble(&spec, e, n_target, FitOptions::default()) {
            Ok(fit) => {
                assert!(fit.beta <= last + 1e-9, "beta rose at E={e}: {} > {last}", fit.beta);
                last = fit.beta;
            }
            Err(ThermalError::Infeasible(_)) => break,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(last < f64::INFINITY);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn squared_thermal_state_halves_temperature(d in 2usize..30, seed in any::<u64>(), beta in 0.0f64..3.0) {
        let h = random_h(d, seed);
        let rho = thermal_state(&h, beta).unwrap();
        let sq = matrix_power_state(&rho, 2).unwrap();
        let direct = thermal_state(&h, 2.0 * beta).unwrap();
        prop_assert!(trace_distance(sq.matrix(), direct.matrix()) < 1e-9);
        prop_assert!((sq.provenance().unwrap().beta - 2.0 * beta).abs() < 1e-15);
    }

    #[test]
    fn renyi_two_bounded(d in 2usize..30, seed in any::<u64>(), beta in 0.0f64..5.0) {
        let h = random_h(d, seed);
        let rho = thermal_state(&h, beta).unwrap();
        let s2 = renyi_entropy(&rho, 2);
        prop_assert!(s2 >= -1e-12);
        prop_assert!(s2 <= (d as f64).ln() + 1e-12);
        let p3 = purity(&rho, 3);
        prop_assert!(p3 > 0.0 && p3 <= 1.0 + 1e-12);
    }
}
