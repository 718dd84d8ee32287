//! Density-density correlators seen through two-copy virtual cooling: the
//! equal-time half-temperature term, the cross term `tr{n_j ρ n_ℓ ρ}/tr{ρ²}`,
//! its imaginary-time form, and the periodic-chain study of both versus
//! distance.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{enumerate_basis, FockBasis, FockError, Operator, Sector, Statistics};
use crate::linalg::{hermitian_eigen, sorted_symmetric_eigen};
use crate::model::{bose_hubbard, Boundary, ModelError, ModelParams};
use crate::thermal::{matrix_power_state, DensityMatrix, ThermalError};

#[derive(Debug, Error)]
pub enum CorrelatorError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Infeasible(String),
}

fn occupations(basis: &FockBasis, site: usize) -> Result<Vec<f64>, CorrelatorError> {
    if site >= basis.num_modes() {
        return Err(CorrelatorError::Invalid(format!(
            "site {site} outside {} modes",
            basis.num_modes()
        )));
    }
    Ok(basis.states().map(|s| s[site] as f64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTerms {
    /// `½ tr{n_j n_ℓ ρ²}/tr{ρ²}`.
    pub first_term: f64,
    /// `½ tr{n_j ρ n_ℓ ρ}/tr{ρ²}`.
    pub second_term: f64,
    pub total: f64,
    /// Set when `ρ` carried no thermal provenance.
    pub missing_provenance: bool,
}

/// Both halves of what the two-copy readout of `n_j n_ℓ` measures.
pub fn unconventional_correlator(
    rho: &DensityMatrix<f64>,
    j: usize,
    l: usize,
) -> Result<CorrelatorTerms, CorrelatorError> {
    let basis = rho.basis();
    let nj = occupations(basis, j)?;
    let nl = occupations(basis, l)?;
    let missing_provenance = rho.provenance().is_none();
    if missing_provenance {
        log::warn!("state has no thermal provenance; the first term is ρ²/tr ρ² without a temperature label");
    }
    let cooled = matrix_power_state(rho, 2)?;
    let first = 0.5
        * (0..rho.dim())
            .map(|a| nj[a] * nl[a] * cooled.matrix()[(a, a)].re)
            .sum::<f64>();
    let m = rho.matrix();
    let (mut cross, mut z) = (0.0, 0.0);
    for b in 0..rho.dim() {
        for a in 0..rho.dim() {
            let w = m[(a, b)].norm_sqr();
            cross += nj[a] * nl[b] * w;
            z += w;
        }
    }
    let second = 0.5 * cross / z;
    Ok(CorrelatorTerms {
        first_term: first,
        second_term: second,
        total: first + second,
        missing_provenance,
    })
}

/// `½ tr{e^{βH} n_j e^{−βH} n_ℓ e^{−2βH}}/Z(2β)`, evaluated in the
/// eigenbasis of `H` with the ground energy shifted out.
pub fn imaginary_time_correlator(h: &Operator<f64>, beta: f64, j: usize, l: usize) -> Result<f64, CorrelatorError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(CorrelatorError::Invalid(format!("beta {beta} must be positive")));
    }
    let dev = h.hermitian_deviation();
    if dev > 1e-10 {
        return Err(CorrelatorError::Invalid(format!(
            "Hamiltonian is not Hermitian (deviation {dev:e})"
        )));
    }
    let basis = h.rows();
    let nj = occupations(basis, j)?;
    let nl = occupations(basis, l)?;
    let eig = hermitian_eigen(&h.to_dense());
    let e0 = eig.values[0];
    let w: Vec<f64> = eig.values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let v = &eig.vectors;
    let rotate = |n: &[f64]| {
        let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |a, k| v[(a, k)] * n[a]);
        v.adjoint() * scaled
    };
    let a = rotate(&nj);
    let b = rotate(&nl);
    let mut acc = 0.0;
    for k in 0..w.len() {
        for m in 0..w.len() {
            acc += w[k] * w[m] * (a[(k, m)] * b[(m, k)]).re;
        }
    }
    let z2: f64 = w.iter().map(|x| x * x).sum();
    Ok(0.5 * acc / z2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Appendix2Params {
    #[serde(default = "default_model")]
    pub model: ModelParams,
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Temperatures in units of `J`.
    #[serde(default = "default_temperatures")]
    pub temperatures: Vec<f64>,
    #[serde(default = "default_distances")]
    pub distances: Vec<usize>,
    #[serde(default)]
    pub reference_site: usize,
    /// Eigenstates with relative Boltzmann weight below this are dropped.
    #[serde(default = "default_prune")]
    pub prune: f64,
}

fn default_model() -> ModelParams {
    ModelParams::new(16, 1.0, 3.0, Boundary::Periodic)
}

fn default_particles() -> usize {
    4
}

fn default_temperatures() -> Vec<f64> {
    vec![0.1, 0.2, 0.25, 0.5, 1.0]
}

fn default_distances() -> Vec<usize> {
    (1..=8).collect()
}

fn default_prune() -> f64 {
    1e-18
}

impl Default for Appendix2Params {
    fn default() -> Self {
        Self {
            model: default_model(),
            particles: default_particles(),
            temperatures: default_temperatures(),
            distances: default_distances(),
            reference_site: 0,
            prune: default_prune(),
        }
    }
}

/// Largest basis the dense study will diagonalize.
pub const APPENDIX2_MAX_DIM: usize = 6000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRow {
    #[serde(rename = "T_over_J")]
    pub t_over_j: f64,
    pub d: usize,
    pub first_term: f64,
    pub second_term: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelatorTable {
    pub params: Appendix2Params,
    pub basis_dim: usize,
    pub runtime_seconds: f64,
    pub rows: Vec<CorrelatorRow>,
    /// Largest spread, over pairs `(j, ℓ)` at equal distance, of either term.
    pub translation_deviation: f64,
    /// `½ tr{n_j ρ(T/2)}²` per temperature, the far-distance limit.
    pub disconnected: Vec<f64>,
}

fn range(v: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    hi - lo
}

impl CorrelatorTable {
    pub fn rows_at(&self, t_over_j: f64) -> Vec<&CorrelatorRow> {
        self.rows.iter().filter(|r| r.t_over_j == t_over_j).collect()
    }

    /// `range_d(second)/range_d(first)` at one temperature.
    pub fn range_ratio(&self, t_over_j: f64) -> f64 {
        let rows = self.rows_at(t_over_j);
        range(rows.iter().map(|r| r.second_term)) / range(rows.iter().map(|r| r.first_term))
    }

    pub fn findings(&self) -> Findings {
        let mut temps = self.params.temperatures.clone();
        temps.sort_by(|a, b| b.partial_cmp(a).expect("finite temperatures"));
        let ratios: Vec<(f64, f64)> = temps.iter().map(|&t| (t, self.range_ratio(t))).collect();
        let coldest = *temps.last().expect("at least one temperature");
        let rows = self.rows_at(coldest);
        let near = rows.iter().min_by_key(|r| r.d).expect("at least one distance");
        let far = rows.iter().max_by_key(|r| r.d).expect("at least one distance");
        let first_range = range(rows.iter().map(|r| r.first_term));
        let total_range = range(rows.iter().map(|r| r.total));
        Findings {
            range_ratios: ratios.clone(),
            anti_bunching_at_low_t: near.first_term < far.first_term,
            ratio_shrinks_with_t: ratios.windows(2).all(|w| w[1].1 <= w[0].1),
            total_follows_first: (total_range - first_range).abs() < 0.2 * first_range,
        }
    }

    /// Rows as `T_over_J,d,first_term,second_term,total` with full precision.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["T_over_J", "d", "first_term", "second_term", "total"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.16e}", r.t_over_j),
                r.d.to_string(),
                format!("{:.16e}", r.first_term),
                format!("{:.16e}", r.second_term),
                format!("{:.16e}", r.total),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Findings {
    /// `(T/J, range ratio)` from hottest to coldest.
    pub range_ratios: Vec<(f64, f64)>,
    pub anti_bunching_at_low_t: bool,
    pub ratio_shrinks_with_t: bool,
    pub total_follows_first: bool,
}

/// Both correlator terms against distance on a Bose-Hubbard chain over a
/// temperature grid, by one real dense diagonalization.
pub fn appendix2_study(params: &Appendix2Params) -> Result<CorrelatorTable, CorrelatorError> {
    let start = Instant::now();
    let l = params.model.sites;
    if params.temperatures.iter().any(|&t| !(t > 0.0)) {
        return Err(CorrelatorError::Invalid("temperatures must be positive".into()));
    }
    if params.reference_site >= l || params.distances.iter().any(|&d| d >= l) {
        return Err(CorrelatorError::Invalid(
            "distance or reference site outside the chain".into(),
        ));
    }
    let basis = enumerate_basis(Statistics::Boson, l, Sector::Fixed(params.particles))?;
    let dim = basis.dim();
    if dim > APPENDIX2_MAX_DIM {
        return Err(CorrelatorError::Infeasible(format!(
            "basis dimension {dim} exceeds the dense limit {APPENDIX2_MAX_DIM}"
        )));
    }
    let h = bose_hubbard::<f64>(&basis, &params.model)?;
    let mut dense = DMatrix::<f64>::zeros(dim, dim);
    for (r, c, v) in h.to_sparse().triplets() {
        dense[(r, c)] = v.re;
    }
    let (energies, vectors) = sorted_symmetric_eigen(dense);
    let e0 = energies[0];
    let occ: Vec<DVector<f64>> = (0..l)
        .map(|j| DVector::from_iterator(dim, basis.states().map(|s| s[j] as f64)))
        .collect();

    let mut rows = Vec::new();
    let mut translation_deviation = 0.0f64;
    let mut disconnected = Vec::new();
    for &t in &params.temperatures {
        let beta = 1.0 / t;
        let keep: Vec<usize> = (0..dim)
            .filter(|&k| (-beta * (energies[k] - e0)).exp() > params.prune)
            .collect();
        let sqrt_w: Vec<f64> = keep.iter().map(|&k| (-0.5 * beta * (energies[k] - e0)).exp()).collect();
        let w_mat = DMatrix::from_fn(dim, keep.len(), |a, c| vectors[(a, keep[c])] * sqrt_w[c]);
        // unnormalized ρ = W Wᵀ
        let rho = &w_mat * w_mat.transpose();
        drop(w_mat);
        let sq = rho.map(|x| x * x);
        drop(rho);
        let z2: f64 = sq.iter().sum();
        // (ρ²)_aa = Σ_k V_ak² w_k² over the kept states
        let dens2: DVector<f64> = DVector::from_iterator(
            dim,
            (0..dim).map(|a| {
                keep.iter()
                    .enumerate()
                    .map(|(c, &k)| vectors[(a, k)].powi(2) * sqrt_w[c].powi(4))
                    .sum::<f64>()
            }),
        );
        let tr2: f64 = dens2.iter().sum();
        let first = |j: usize, m: usize| 0.5 * occ[j].component_mul(&occ[m]).dot(&dens2) / tr2;
        let projected: Vec<DVector<f64>> = occ.iter().map(|n| &sq * n).collect();
        let second = |j: usize, m: usize| 0.5 * occ[j].dot(&projected[m]) / z2;

        for d in 1..l {
            let (mut f_lo, mut f_hi, mut s_lo, mut s_hi) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for j in 0..l {
                let m = (j + d) % l;
                let (f, s) = (first(j, m), second(j, m));
                f_lo = f_lo.min(f);
                f_hi = f_hi.max(f);
                s_lo = s_lo.min(s);
                s_hi = s_hi.max(s);
            }
            if params.model.boundary == Boundary::Periodic {
                translation_deviation = translation_deviation.max(f_hi - f_lo).max(s_hi - s_lo);
            }
        }
        let j = params.reference_site;
        let density = occ[j].dot(&dens2) / tr2;
        disconnected.push(0.5 * density * density);
        for &d in &params.distances {
            let m = (j + d) % l;
            let (f, s) = (first(j, m), second(j, m));
            rows.push(CorrelatorRow {
                t_over_j: t,
                d,
                first_term: f,
                second_term: s,
                total: f + s,
            });
        }
    }
    Ok(CorrelatorTable {
        params: params.clone(),
        basis_dim: dim,
        runtime_seconds: start.elapsed().as_secs_f64(),
        rows,
        translation_deviation,
        disconnected,
    })
}
