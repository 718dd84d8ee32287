use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use virtual_cooling::fock::{enumerate_basis, total_number_op, Sector, Statistics};
use virtual_cooling::linalg::{hermitian_eigen, unitary_evolution};
use virtual_cooling::model::{beamsplitter_hamiltonian, bose_hubbard, fermi_hopping, Boundary, ModelParams};
use virtual_cooling::replica::ReplicaBasis;

type C = Complex<f64>;

/// Builds the Bose-Hubbard matrix from scratch: states generated by
/// repeatedly moving particles, indices assigned by discovery order.
fn oracle_bose_hubbard(l: usize, n: usize, j: f64, u: f64, periodic: bool) -> (Vec<Vec<u8>>, Vec<HashMap<usize, f64>>) {
    let mut states: Vec<Vec<u8>> = Vec::new();
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut start = vec![0u8; l];
    start[0] = n as u8;
    index.insert(start.clone(), 0);
    states.push(start);
    let mut rows: Vec<HashMap<usize, f64>> = Vec::new();
    let mut bonds: Vec<(usize, usize)> = (0..l - 1).map(|i| (i, i + 1)).collect();
    if periodic && l > 2 {
        bonds.push((l - 1, 0));
    }
    let mut k = 0;
    while k < states.len() {
        let s = states[k].clone();
        let mut row = HashMap::new();
        let diag: f64 = s.iter().map(|&x| 0.5 * u * x as f64 * (x as f64 - 1.0)).sum();
        *row.entry(k).or_insert(0.0) += diag;
        for &(a, b) in &bonds {
            for (from, to) in [(a, b), (b, a)] {
                if s[from] == 0 {
                    continue;
                }
                let mut t = s.clone();
                let amp = (t[from] as f64).sqrt() * (t[to] as f64 + 1.0).sqrt();
                t[from] -= 1;
                t[to] += 1;
                let next = states.len();
                let idx = *index.entry(t.clone()).or_insert_with(|| {
                    states.push(t.clone());
                    next
                });
                *row.entry(idx).or_insert(0.0) += -j * amp;
            }
        }
        rows.push(row);
        k += 1;
    }
    (states, rows)
}

/// Lanczos ground energy with full reorthogonalization.
fn lanczos_ground<F: Fn(&[f64]) -> Vec<f64>>(dim: usize, apply: F, steps: usize) -> f64 {
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + ((i * 7919) % 13) as f64 * 0.01).collect();
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut basis = vec![v];
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for _ in 0..steps.min(dim) {
        let mut w = apply(basis.last().unwrap());
        let a: f64 = w.iter().zip(basis.last().unwrap()).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let p: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
            }
        }
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if b < 1e-12 {
            break;
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    t.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn bose_hubbard_matches_independent_construction() {
    let (l, n) = (5, 3);
    let basis = enumerate_basis(Statistics::Boson, l, Sector::Fixed(n)).unwrap();
    for periodic in [false, true] {
        let bc = if periodic { Boundary::Periodic } else { Boundary::Open };
        let h = bose_hubbard::<f64>(&basis, &ModelParams::new(l, 1.0, 2.3, bc)).unwrap();
        let (states, rows) = oracle_bose_hubbard(l, n, 1.0, 2.3, periodic);
        assert_eq!(states.len(), basis.dim());
        for (r, row) in rows.iter().enumerate() {
            let br = basis.index_of(&states[r]).unwrap();
            for (&c, &v) in row {
                let bc_ = basis.index_of(&states[c]).unwrap();
                assert!((h.get(br, bc_).re - v).abs() < 1e-14);
            }
            let nnz = (0..basis.dim()).filter(|&c| h.get(br, c).norm() > 0.0).count();
            assert_eq!(nnz, row.values().filter(|v| **v != 0.0).count());
        }
    }
}

#[test]
fn sixteen_site_ground_energy_against_lanczos_oracle() {
    let (l, n) = (16, 4);
    let basis = enumerate_basis(Statistics::Boson, l, Sector::Fixed(n)).unwrap();
    assert_eq!(basis.dim(), 3876);
    let h = bose_hubbard::<f64>(&basis, &ModelParams::new(l, 1.0, 3.0, Boundary::Periodic)).unwrap();
    assert!(h.is_sparse());
    let (_, rows) = oracle_bose_hubbard(l, n, 1.0, 3.0, true);
    let oracle = lanczos_ground(
        rows.len(),
        |x| {
            rows.iter()
                .map(|row| row.iter().map(|(&c, &v)| v * x[c]).sum())
                .collect()
        },
        200,
    );
    let production = lanczos_ground(
        basis.dim(),
        |x| {
            let xc = DVector::from_iterator(x.len(), x.iter().map(|&v| C::new(v, 0.0)));
            h.apply(&xc).iter().map(|z| z.re).collect()
        },
        200,
    );
    assert!((oracle - production).abs() < 1e-9, "{oracle} vs {production}");
    // four particles hopping freely on a ring cannot go below 4·(−2J)
    assert!(production > -8.0 && production < -6.0);
}

#[test]
fn dense_ground_energy_matches_lanczos() {
    let basis = enumerate_basis(Statistics::Boson, 8, Sector::Fixed(4)).unwrap();
    let h = bose_hubbard::<f64>(&basis, &ModelParams::new(8, 1.0, 3.0, Boundary::Periodic)).unwrap();
    let dense = hermitian_eigen(&h.to_dense()).values[0];
    let lz = lanczos_ground(
        basis.dim(),
        |x| {
            let xc = DVector::from_iterator(x.len(), x.iter().map(|&v| C::new(v, 0.0)));
            h.apply(&xc).iter().map(|z| z.re).collect()
        },
        150,
    );
    assert!((dense - lz).abs() < 1e-9);
}

#[test]
fn fermion_chain_examples() {
    let b = enumerate_basis(Statistics::Fermion, 2, Sector::Fixed(1)).unwrap();
    let h = fermi_hopping::<f64>(&b, &ModelParams::new(2, 1.0, 0.7, Boundary::Open)).unwrap();
    let e = hermitian_eigen(&h.to_dense()).values;
    assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);

    let b = enumerate_basis(Statistics::Fermion, 5, Sector::Fixed(2)).unwrap();
    let h = fermi_hopping::<f64>(&b, &ModelParams::new(5, 1.0, 1.3, Boundary::Periodic)).unwrap();
    assert!(h.hermitian_deviation() < 1e-12);
}

#[test]
fn free_fermions_fill_single_particle_levels() {
    for bc in [Boundary::Open, Boundary::Periodic] {
        let params = ModelParams::new(4, 1.0, 0.0, bc);
        // single-particle hopping matrix
        let mut t = DMatrix::<f64>::zeros(4, 4);
        for (a, b) in params.bonds() {
            t[(a, b)] -= 1.0;
            t[(b, a)] -= 1.0;
        }
        let eps: Vec<f64> = {
            let mut e: Vec<f64> = t.symmetric_eigenvalues().iter().cloned().collect();
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            e
        };
        let mut expected: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                expected.push(eps[i] + eps[j]);
            }
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let b = enumerate_basis(Statistics::Fermion, 4, Sector::Fixed(2)).unwrap();
        let h = fermi_hopping::<f64>(&b, &params).unwrap();
        let got = hermitian_eigen(&h.to_dense()).values;
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12, "{bc:?}: {got:?} vs {expected:?}");
        }
    }
}

#[test]
fn beamsplitter_single_particle() {
    let copy = enumerate_basis(Statistics::Boson, 1, Sector::Totals(vec![0, 1])).unwrap();
    let rb = ReplicaBasis::new(copy, 2).unwrap();
    let joint = rb.joint_basis();
    let one = joint
        .states()
        .enumerate()
        .filter(|(_, s)| s.iter().sum::<u8>() == 1)
        .map(|(i, _)| i)
        .collect::<Vec<_>>();
    assert_eq!(one.len(), 2);
    let mut params = ModelParams::new(1, 1.0, 0.0, Boundary::Open);
    params.j_bs = 0.8;
    let h = beamsplitter_hamiltonian::<f64>(&rb, &params).unwrap();
    let m = h.to_dense();
    assert!((m[(one[0], one[1])].re + 0.8).abs() < 1e-15);
    let sub = DMatrix::from_fn(2, 2, |a, b| m[(one[a], one[b])]);
    let e = hermitian_eigen(&sub).values;
    assert!((e[0] + 0.8).abs() < 1e-14 && (e[1] - 0.8).abs() < 1e-14);
}

#[test]
fn beamsplitter_balanced_time_gives_hong_ou_mandel() {
    let copy = enumerate_basis(Statistics::Boson, 1, Sector::Fixed(1)).unwrap();
    let rb = ReplicaBasis::new(copy, 2).unwrap();
    let mut params = ModelParams::new(1, 1.0, 0.0, Boundary::Open);
    params.j_bs = 1.7;
    let h = beamsplitter_hamiltonian::<f64>(&rb, &params).unwrap();
    let u = unitary_evolution(
        &hermitian_eigen(&h.to_dense()),
        std::f64::consts::PI / (4.0 * params.j_bs),
    );
    let joint = rb.joint_basis();
    let start = joint.index_of(&[1, 1]).unwrap();
    let psi = u.column(start);
    let p20 = psi[joint.index_of(&[2, 0]).unwrap()].norm_sqr();
    let p02 = psi[joint.index_of(&[0, 2]).unwrap()].norm_sqr();
    let p11 = psi[start].norm_sqr();
    assert!((p20 - 0.5).abs() < 1e-12 && (p02 - 0.5).abs() < 1e-12 && p11 < 1e-12);
}

#[test]
fn hamiltonians_conserve_particle_number() {
    let params = ModelParams::new(3, 1.0, 1.1, Boundary::Periodic);
    let b = enumerate_basis(Statistics::Boson, 3, Sector::Totals(vec![0, 1, 2, 3])).unwrap();
    let h = bose_hubbard::<f64>(&b, &params).unwrap();
    let n = total_number_op::<f64>(&b, None).unwrap();
    assert_eq!(h.commutator(&n).unwrap().max_abs(), 0.0);

    let f = enumerate_basis(Statistics::Fermion, 3, Sector::Cutoff(1)).unwrap();
    let h = fermi_hopping::<f64>(&f, &params).unwrap();
    let n = total_number_op::<f64>(&f, None).unwrap();
    assert_eq!(h.commutator(&n).unwrap().max_abs(), 0.0);

    let copy = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(2)).unwrap();
    let rb = ReplicaBasis::new(copy, 2).unwrap();
    let hbs = beamsplitter_hamiltonian::<f64>(&rb, &ModelParams::new(2, 1.0, 0.0, Boundary::Open)).unwrap();
    let n = total_number_op::<f64>(rb.joint_basis(), None).unwrap();
    assert_eq!(hbs.commutator(&n).unwrap().max_abs(), 0.0);
    assert!(hbs.hermitian_deviation() < 1e-15);
}

#[test]
fn periodic_minus_open_is_boundary_bond() {
    let l = 4;
    let b = enumerate_basis(Statistics::Boson, l, Sector::Fixed(2)).unwrap();
    let open = bose_hubbard::<f64>(&b, &ModelParams::new(l, 1.0, 2.0, Boundary::Open)).unwrap();
    let per = bose_hubbard::<f64>(&b, &ModelParams::new(l, 1.0, 2.0, Boundary::Periodic)).unwrap();
    let diff = per.sub(&open).unwrap().to_dense();
    for (c, s) in b.states().enumerate() {
        for (r, t) in b.states().enumerate() {
            let moved: Vec<i32> = (0..l).map(|k| t[k] as i32 - s[k] as i32).collect();
            let boundary_hop =
                moved[0].abs() == 1 && moved[l - 1] == -moved[0] && moved[1..l - 1].iter().all(|&x| x == 0);
            if !boundary_hop {
                assert_eq!(diff[(r, c)].norm(), 0.0);
            } else {
                let (from, to) = if moved[0] == 1 { (l - 1, 0) } else { (0, l - 1) };
                let amp = -((s[from] as f64) * (s[to] as f64 + 1.0)).sqrt();
                assert!((diff[(r, c)].re - amp).abs() < 1e-14);
            }
        }
    }
}
