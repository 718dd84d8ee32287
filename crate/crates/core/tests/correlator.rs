use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use virtual_cooling::correlator::*;
use virtual_cooling::fock::{enumerate_basis, number_op, OpFlags, Operator, Sector, Statistics};
use virtual_cooling::linalg::{hermitian_eigen, random_hermitian};
use virtual_cooling::model::{bose_hubbard, Boundary, ModelParams};
use virtual_cooling::thermal::{thermal_state, DensityMatrix};

fn cr(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

fn random_h(seed: u64) -> Operator<f64> {
    let b = enumerate_basis(Statistics::Boson, 4, Sector::Fixed(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Operator::from_dense(
        b.clone(),
        b.clone(),
        random_hermitian(b.dim(), &mut rng),
        OpFlags::HERMITIAN,
    )
}

#[test]
fn single_mode_moments() {
    let b = enumerate_basis(Statistics::Boson, 1, Sector::Cutoff(3)).unwrap();
    let p = [0.4, 0.3, 0.2, 0.1];
    let diag = DVector::from_iterator(4, b.states().map(|s| cr(p[s[0] as usize])));
    let rho = DensityMatrix::new(b, DMatrix::from_diagonal(&diag)).unwrap();
    let t = unconventional_correlator(&rho, 0, 0).unwrap();
    let num: f64 = (0..4).map(|n| (n * n) as f64 * p[n] * p[n]).sum();
    let den: f64 = p.iter().map(|x| x * x).sum();
    assert!((t.second_term - 0.5 * num / den).abs() < 1e-15);
    assert!((t.first_term - 0.5 * num / den).abs() < 1e-15);
    assert!(t.missing_provenance);
}

#[test]
fn pure_state_factorizes() {
    let b = enumerate_basis(Statistics::Boson, 3, Sector::Fixed(2)).unwrap();
    let h = bose_hubbard::<f64>(&b, &ModelParams::new(3, 1.0, 1.0, Boundary::Open)).unwrap();
    let psi = hermitian_eigen(&h.to_dense()).vectors.column(2).into_owned();
    let rho = DensityMatrix::from_pure(b.clone(), &psi).unwrap();
    let n0 = number_op::<f64>(&b, 0).unwrap().expectation(&psi).re;
    let n2 = number_op::<f64>(&b, 2).unwrap().expectation(&psi).re;
    let t = unconventional_correlator(&rho, 0, 2).unwrap();
    assert!((t.second_term - 0.5 * n0 * n2).abs() < 1e-12);
}

#[test]
fn infinite_temperature_terms_coincide() {
    let b = enumerate_basis(Statistics::Boson, 4, Sector::Fixed(2)).unwrap();
    let h = bose_hubbard::<f64>(&b, &ModelParams::new(4, 1.0, 1.0, Boundary::Open)).unwrap();
    let t = unconventional_correlator(&thermal_state(&h, 0.0).unwrap(), 1, 3).unwrap();
    assert!((t.first_term - t.second_term).abs() < 1e-14);
    assert!(!t.missing_provenance);
}

#[test]
fn imaginary_time_identity() {
    for seed in 0..20 {
        let h = random_h(seed);
        let beta = 0.2 + 0.1 * seed as f64;
        let rho = thermal_state(&h, beta).unwrap();
        for (j, l) in [(0, 1), (1, 3), (2, 2)] {
            let t = unconventional_correlator(&rho, j, l).unwrap();
            let it = imaginary_time_correlator(&h, beta, j, l).unwrap();
            assert!(
                (t.second_term - it).abs() < 1e-9,
                "seed {seed}: {} vs {it}",
                t.second_term
            );
        }
    }
}

#[test]
fn commuting_hamiltonian_gives_equal_time() {
    let b = enumerate_basis(Statistics::Boson, 3, Sector::Fixed(3)).unwrap();
    let values: Vec<Complex<f64>> = b.states().map(|s| cr(s[0] as f64 * 0.7 - s[2] as f64 * 0.3)).collect();
    let h = Operator::diagonal(b.clone(), &values).with_flags(OpFlags::DIAGONAL_HERMITIAN);
    let beta = 0.8;
    let rho2 = thermal_state(&h, 2.0 * beta).unwrap();
    let nn = number_op::<f64>(&b, 0)
        .unwrap()
        .mul(&number_op(&b, 2).unwrap())
        .unwrap();
    let expected = 0.5 * rho2.expectation(&nn).re;
    assert!((imaginary_time_correlator(&h, beta, 0, 2).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn low_temperature_gives_ground_product() {
    let b = enumerate_basis(Statistics::Boson, 4, Sector::Fixed(2)).unwrap();
    let h = bose_hubbard::<f64>(&b, &ModelParams::new(4, 1.0, 2.0, Boundary::Open)).unwrap();
    let g = hermitian_eigen(&h.to_dense()).ground_vector();
    let n1 = number_op::<f64>(&b, 1).unwrap().expectation(&g).re;
    let n3 = number_op::<f64>(&b, 3).unwrap().expectation(&g).re;
    let got = imaginary_time_correlator(&h, 60.0, 1, 3).unwrap();
    assert!((got - 0.5 * n1 * n3).abs() < 1e-9);
    assert!(imaginary_time_correlator(&h, 0.0, 1, 3).is_err());
}

#[test]
fn small_study_matches_direct_terms() {
    let params = Appendix2Params {
        model: ModelParams::new(8, 1.0, 3.0, Boundary::Periodic),
        particles: 2,
        temperatures: vec![0.25, 1.0],
        distances: (1..=4).collect(),
        reference_site: 0,
        prune: 0.0,
    };
    let table = appendix2_study(&params).unwrap();
    assert_eq!(table.rows.len(), 8);
    assert!(table.translation_deviation < 1e-10);
    let b = enumerate_basis(Statistics::Boson, 8, Sector::Fixed(2)).unwrap();
    let h = bose_hubbard::<f64>(&b, &params.model).unwrap();
    for row in &table.rows {
        let rho = thermal_state(&h, 1.0 / row.t_over_j).unwrap();
        let t = unconventional_correlator(&rho, 0, row.d).unwrap();
        assert!((t.first_term - row.first_term).abs() < 1e-10);
        assert!((t.second_term - row.second_term).abs() < 1e-10);
        assert!((row.total - row.first_term - row.second_term).abs() < 1e-12);
    }
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "T_over_J,d,first_term,second_term,total");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn study_rejects_oversized_basis() {
    let params = Appendix2Params {
        model: ModelParams::new(20, 1.0, 3.0, Boundary::Periodic),
        particles: 5,
        ..Appendix2Params::default()
    };
    assert!(matches!(appendix2_study(&params), Err(CorrelatorError::Infeasible(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn second_term_is_symmetric(seed in any::<u64>(), beta in 0.0f64..3.0, j in 0usize..4, l in 0usize..4) {
        let rho = thermal_state(&random_h(seed), beta).unwrap();
        let a = unconventional_correlator(&rho, j, l).unwrap();
        let b = unconventional_correlator(&rho, l, j).unwrap();
        prop_assert!((a.second_term - b.second_term).abs() < 1e-12);
        prop_assert!((a.first_term - b.first_term).abs() < 1e-12);
    }
}
