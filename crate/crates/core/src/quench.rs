//! Quench dynamics from a product state and the two-copy density
//! measurement on the evolved chain.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{
    enumerate_basis, number_op, sector_dimension, total_number_op, FockBasis, FockError, Operator, Sector, Statistics,
};
use crate::linalg::{expm_krylov, hermitian_eigen, CVector, CsrMatrix, HermitianEigen, KrylovOptions};
use crate::model::{bose_hubbard, Boundary, ModelError, ModelParams};
use crate::protocol::{
    interferometric_estimate, DiagonalObservable, OutcomeDistribution, ProtocolError, SamplerOptions,
};
use crate::replica::{ReplicaBasis, ReplicaError};
use crate::thermal::{
    fit_effective_ensemble, matrix_power_state, reduced_from_pure, renyi_entropy, DensityMatrix, FitOptions,
    GrandCanonicalSpectrum, ThermalError,
};

/// Largest single-copy dimension propagated with a dense eigendecomposition.
pub const DENSE_EVOLUTION_MAX_DIM: usize = 2000;
/// Largest two-copy joint dimension the sampled measurement will build.
pub const FIG2_MAX_JOINT_DIM: u64 = 4_000_000;

#[derive(Debug, Error)]
pub enum QuenchError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Replica(#[from] ReplicaError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Infeasible(String),
}

type Result<T> = std::result::Result<T, QuenchError>;

fn one() -> f64 {
    1.0
}

fn one_worker() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// Preset regimes: unit filling on six sites at two interaction strengths,
/// and six particles in the middle of a twelve-site chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataSet {
    A,
    B,
    C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchConfig {
    #[serde(alias = "L")]
    pub sites: usize,
    /// Initial occupation of every site.
    pub pattern: Vec<u8>,
    #[serde(default = "one", alias = "J")]
    pub j: f64,
    #[serde(alias = "U_over_J")]
    pub u_over_j: f64,
    /// Evolution times in units of ħ/J.
    pub times: Vec<f64>,
    /// Sites whose single-site densities are measured and averaged. Defaults
    /// to the initially occupied block without its two edge sites.
    #[serde(default)]
    pub subsystem: Option<Vec<usize>>,
    /// Region whose Rényi-2 entropy is tracked for saturation. Defaults to
    /// the left half of the chain.
    #[serde(default)]
    pub entropy_sites: Option<Vec<usize>>,
    /// Total shots per measured site, pooled over all times.
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "one_worker")]
    pub workers: usize,
    /// Run the sampled two-copy measurement. When off, only exact
    /// single-copy quantities are reported.
    #[serde(default = "yes")]
    pub sampled: bool,
}

impl QuenchConfig {
    pub fn preset(set: DataSet) -> Self {
        let (sites, pattern, u_over_j, times): (usize, Vec<u8>, f64, Vec<f64>) = match set {
            DataSet::A => (6, vec![1; 6], 1.56, vec![1.0, 1.4, 2.2, 4.3, 5.1, 6.4, 8.4]),
            DataSet::B => (6, vec![1; 6], 0.33, vec![12.2, 24.0, 59.4]),
            DataSet::C => {
                let mut p = vec![0; 12];
                p[3..9].fill(1);
                (12, p, 0.33, vec![22.4, 41.3])
            }
        };
        Self {
            sites,
            pattern,
            j: 1.0,
            u_over_j,
            times,
            subsystem: None,
            entropy_sites: None,
            shots: 200_000,
            seed: 1,
            workers: 1,
            sampled: set != DataSet::C,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.pattern.len() != self.sites {
            return Err(QuenchError::Invalid(format!(
                "pattern has {} entries for {} sites",
                self.pattern.len(),
                self.sites
            )));
        }
        if self.pattern.iter().all(|&n| n == 0) {
            return Err(QuenchError::Invalid("the initial pattern holds no particles".into()));
        }
        if self.times.is_empty() || self.times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(QuenchError::Invalid("evolution times must be positive".into()));
        }
        if !(self.j > 0.0) || !self.u_over_j.is_finite() {
            return Err(QuenchError::Invalid("need J > 0 and finite U/J".into()));
        }
        if self.sampled && (self.shots < 2 || self.workers == 0) {
            return Err(QuenchError::Invalid(
                "sampling needs at least two shots and one worker".into(),
            ));
        }
        let sub = self.subsystem_sites();
        if sub.is_empty() || sub.iter().any(|&s| s >= self.sites) {
            return Err(QuenchError::Invalid(format!("bad subsystem {sub:?}")));
        }
        let ent = self.entropy_region();
        if ent.is_empty() || ent.iter().any(|&s| s >= self.sites) {
            return Err(QuenchError::Invalid(format!("bad entropy region {ent:?}")));
        }
        Ok(())
    }

    pub fn particles(&self) -> usize {
        self.pattern.iter().map(|&n| n as usize).sum()
    }

    pub fn model(&self) -> ModelParams {
        ModelParams::new(self.sites, self.j, self.u_over_j * self.j, Boundary::Open)
    }

    pub fn entropy_region(&self) -> Vec<usize> {
        match &self.entropy_sites {
            Some(s) => s.clone(),
            None => (0..self.sites.div_ceil(2)).collect(),
        }
    }

    pub fn subsystem_sites(&self) -> Vec<usize> {
        if let Some(s) = &self.subsystem {
            return s.clone();
        }
        let occupied: Vec<usize> = (0..self.sites).filter(|&j| self.pattern[j] > 0).collect();
        let (lo, hi) = (occupied[0], occupied[occupied.len() - 1]);
        if hi - lo < 2 {
            return occupied;
        }
        (lo + 1..hi).collect()
    }
}

/// Basis vector of the occupation `pattern`.
pub fn product_state(basis: &FockBasis, pattern: &[u8]) -> Result<CVector<f64>> {
    let i = basis
        .index_of(pattern)
        .ok_or_else(|| QuenchError::Invalid(format!("pattern {pattern:?} lies outside the basis sector")))?;
    let mut psi = CVector::from_element(basis.dim(), Complex::new(0.0, 0.0));
    psi[i] = Complex::new(1.0, 0.0);
    Ok(psi)
}

/// Time propagation under a fixed Hamiltonian. Small spaces are
/// diagonalized once; larger ones go through Lanczos.
pub enum Propagator {
    Dense(HermitianEigen<f64>),
    Krylov(CsrMatrix<f64>),
}

impl Propagator {
    pub fn new(h: &Operator<f64>) -> Self {
        if h.rows().dim() <= DENSE_EVOLUTION_MAX_DIM {
            Self::Dense(hermitian_eigen(&h.to_dense()))
        } else {
            Self::Krylov(h.to_sparse())
        }
    }

    /// `e^{−iHt} ψ`.
    pub fn evolve(&self, psi: &CVector<f64>, t: f64) -> Result<CVector<f64>> {
        if !(t >= 0.0) {
            return Err(QuenchError::Invalid(format!("evolution time {t} is negative")));
        }
        if t == 0.0 {
            return Ok(psi.clone());
        }
        Ok(match self {
            Self::Dense(eig) => {
                let coeffs = eig.vectors.adjoint() * psi;
                let phased = CVector::from_iterator(
                    coeffs.len(),
                    coeffs
                        .iter()
                        .zip(&eig.values)
                        .map(|(c, &e)| c * Complex::from_polar(1.0, -e * t)),
                );
                &eig.vectors * phased
            }
            Self::Krylov(h) => expm_krylov(h, psi, t, KrylovOptions::default()),
        })
    }
}

/// `e^{−iHt} ψ` for a single time.
pub fn evolve(h: &Operator<f64>, t: f64, psi: &CVector<f64>) -> Result<CVector<f64>> {
    Propagator::new(h).evolve(psi, t)
}

/// Reduced state of `ψ` on `sites`, block diagonal in the subsystem
/// particle number.
pub fn subsystem_rdm(basis: &FockBasis, psi: &CVector<f64>, sites: &[usize]) -> Result<DensityMatrix<f64>> {
    Ok(reduced_from_pure(basis, psi, sites)?)
}

/// Relative change between the last two entropies below which the
/// subsystem counts as saturated.
pub const SATURATION_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalizationReport {
    pub sites: Vec<usize>,
    pub times: Vec<f64>,
    /// Rényi-2 entropy of the subsystem at each time.
    pub entropies: Vec<f64>,
    /// `ln` of the subsystem Hilbert-space dimension.
    pub max_entropy: f64,
    pub saturated: bool,
}

pub fn thermalization_diagnostic(
    basis: &FockBasis,
    states: &[CVector<f64>],
    times: &[f64],
    sites: &[usize],
) -> Result<ThermalizationReport> {
    if states.len() < 2 || states.len() != times.len() {
        return Err(QuenchError::Invalid(
            "need at least two states with one time each".into(),
        ));
    }
    let mut entropies = Vec::with_capacity(states.len());
    let mut dim = 0;
    for psi in states {
        let rho = subsystem_rdm(basis, psi, sites)?;
        dim = rho.dim();
        entropies.push(renyi_entropy(&rho, 2).max(0.0));
    }
    let (a, b) = (entropies[entropies.len() - 2], entropies[entropies.len() - 1]);
    let scale = a.abs().max(b.abs());
    let saturated = scale > 0.0 && (a - b).abs() < SATURATION_TOLERANCE * scale;
    Ok(ThermalizationReport {
        sites: sites.to_vec(),
        times: times.to_vec(),
        entropies,
        max_entropy: (dim as f64).ln(),
        saturated,
    })
}

/// Grand-canonical `(T, μ)` reproducing the energy and density of a
/// single-site state under the on-site interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteEnsemble {
    pub t_over_j: f64,
    pub mu_over_j: f64,
    /// `⟨n⟩` of the grand-canonical state at `(2β, μ)`.
    pub half_t_density: f64,
}

/// Fits the ensemble of a single-site reduced state and predicts its density
/// at half the temperature.
pub fn fit_site_ensemble(rho: &DensityMatrix<f64>, j: f64, u: f64) -> Result<SiteEnsemble> {
    let basis = rho.basis();
    if basis.num_modes() != 1 {
        return Err(QuenchError::Invalid(
            "site ensembles are fitted on one-site states".into(),
        ));
    }
    let h = bose_hubbard::<f64>(basis, &ModelParams::new(1, j, u, Boundary::Open))?;
    let n_op = total_number_op::<f64>(basis, None)?;
    let spectrum = GrandCanonicalSpectrum::new(&h, &n_op)?;
    let e = rho.expectation(&h).re;
    let n = rho.expectation(&n_op).re;
    let fit = fit_effective_ensemble(&spectrum, e, n, FitOptions::default())?;
    let cold = matrix_power_state(&spectrum.state(fit.beta, fit.mu), 2)?;
    Ok(SiteEnsemble {
        t_over_j: j / fit.beta,
        mu_over_j: fit.mu / j,
        half_t_density: cold.expectation(&n_op).re,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRow {
    pub site: usize,
    /// `tr{n ρ̄}` of the time-averaged single-site state.
    pub raw_density: f64,
    /// Sampled two-copy estimate pooled over times; `None` when sampling is
    /// off.
    pub vc_estimate: Option<f64>,
    pub vc_se: Option<f64>,
    /// `Σ_t tr{n ρ_t²} / Σ_t tr{ρ_t²}`, the value the pooled estimator
    /// converges to.
    pub vc_exact: f64,
    pub ensemble: SiteEnsemble,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Report {
    pub config: QuenchConfig,
    pub rows: Vec<SiteRow>,
    pub raw_density: f64,
    pub vc_estimate: Option<f64>,
    pub vc_se: Option<f64>,
    pub vc_exact: f64,
    /// Fit to the site-averaged single-site state.
    pub ensemble: SiteEnsemble,
    pub thermalization: ThermalizationReport,
}

#[derive(Serialize)]
struct CsvRow {
    site: String,
    raw_density: String,
    vc_estimate: String,
    vc_se: String,
    #[serde(rename = "halfT_prediction")]
    half_t_prediction: String,
}

fn sci(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

impl Fig2Report {
    /// One row per measured site followed by their average under `mean`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                site: r.site.to_string(),
                raw_density: sci(Some(r.raw_density)),
                vc_estimate: sci(r.vc_estimate),
                vc_se: sci(r.vc_se),
                half_t_prediction: sci(Some(r.ensemble.half_t_density)),
            })?;
        }
        w.serialize(CsvRow {
            site: "mean".into(),
            raw_density: sci(Some(self.raw_density)),
            vc_estimate: sci(self.vc_estimate),
            vc_se: sci(self.vc_se),
            half_t_prediction: sci(Some(self.ensemble.half_t_density)),
        })?;
        w.flush()?;
        Ok(())
    }
}

fn average(states: &[DensityMatrix<f64>]) -> Result<DensityMatrix<f64>> {
    let mut m = states[0].matrix().clone();
    for s in &states[1..] {
        m += s.matrix();
    }
    m /= Complex::new(states.len() as f64, 0.0);
    Ok(DensityMatrix::new(states[0].basis().clone(), m)?)
}

/// Evolved states `|ψ(t)⟩` of the configured quench.
pub fn quench_states(cfg: &QuenchConfig) -> Result<(Arc<FockBasis>, Vec<CVector<f64>>)> {
    cfg.validate()?;
    let basis = enumerate_basis(Statistics::Boson, cfg.sites, Sector::Fixed(cfg.particles()))?;
    let h = bose_hubbard::<f64>(&basis, &cfg.model())?;
    let psi0 = product_state(&basis, &cfg.pattern)?;
    let prop = Propagator::new(&h);
    let states = cfg
        .times
        .iter()
        .map(|&t| prop.evolve(&psi0, t))
        .collect::<Result<Vec<_>>>()?;
    Ok((basis, states))
}

/// Quench, thermalization check and the two-copy density measurement on
/// every subsystem site, with the raw density, the pooled virtual-cooling
/// estimate and the half-temperature grand-canonical prediction.
pub fn fig2_experiment(cfg: &QuenchConfig) -> Result<Fig2Report> {
    cfg.validate()?;
    let joint_dim = sector_dimension(Statistics::Boson, 2 * cfg.sites, 2 * cfg.particles());
    if cfg.sampled && joint_dim > FIG2_MAX_JOINT_DIM {
        return Err(QuenchError::Infeasible(format!(
            "the two-copy space has {joint_dim} states (limit {FIG2_MAX_JOINT_DIM}); reduce L or N, or disable sampling"
        )));
    }
    let (basis, states) = quench_states(cfg)?;
    let sites = cfg.subsystem_sites();
    let ent = cfg.entropy_region();
    let thermalization = if states.len() > 1 {
        thermalization_diagnostic(&basis, &states, &cfg.times, &ent)?
    } else {
        single_time_diagnostic(&basis, &states, &cfg.times, &ent)?
    };

    let dists = if cfg.sampled {
        let rb = Arc::new(ReplicaBasis::new(basis.clone(), 2)?);
        let parts = states
            .iter()
            .map(|psi| OutcomeDistribution::from_pure(psi, rb.clone()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Some(OutcomeDistribution::mixture(&parts)?)
    } else {
        None
    };

    let u = cfg.u_over_j * cfg.j;
    let mut rows = Vec::with_capacity(sites.len());
    let mut site_states = Vec::with_capacity(sites.len());
    for (k, &site) in sites.iter().enumerate() {
        let rdms = states
            .iter()
            .map(|psi| subsystem_rdm(&basis, psi, &[site]))
            .collect::<Result<Vec<_>>>()?;
        let n_op = number_op::<f64>(rdms[0].basis(), 0)?;
        let (mut num, mut den) = (0.0, 0.0);
        for r in &rdms {
            let sq = r.matrix() * r.matrix();
            num += (n_op.to_dense() * &sq).trace().re;
            den += sq.trace().re;
        }
        let mean_state = average(&rdms)?;
        let (vc_estimate, vc_se) = match &dists {
            Some(d) => {
                let d = d.clone().with_region(vec![site])?;
                let opts = SamplerOptions {
                    shots: cfg.shots,
                    seed: cfg.seed.wrapping_add(k as u64),
                    workers: cfg.workers,
                };
                let rep = interferometric_estimate(&d, &DiagonalObservable::Density { site }, opts)?;
                (Some(rep.ratio), Some(rep.ratio_se))
            }
            None => (None, None),
        };
        rows.push(SiteRow {
            site,
            raw_density: mean_state.expectation(&n_op).re,
            vc_estimate,
            vc_se,
            vc_exact: num / den,
            ensemble: fit_site_ensemble(&mean_state, cfg.j, u)?,
        });
        site_states.push(mean_state);
    }
    let k = rows.len() as f64;
    let pooled = average(&site_states)?;
    let vc_estimate = cfg
        .sampled
        .then(|| rows.iter().filter_map(|r| r.vc_estimate).sum::<f64>() / k);
    let vc_se = cfg
        .sampled
        .then(|| rows.iter().filter_map(|r| r.vc_se).map(|s| s * s).sum::<f64>().sqrt() / k);
    Ok(Fig2Report {
        config: cfg.clone(),
        raw_density: rows.iter().map(|r| r.raw_density).sum::<f64>() / k,
        vc_estimate,
        vc_se,
        vc_exact: rows.iter().map(|r| r.vc_exact).sum::<f64>() / k,
        ensemble: fit_site_ensemble(&pooled, cfg.j, u)?,
        rows,
        thermalization,
    })
}

/// Entropy report for a single time point, where saturation cannot be
/// judged.
fn single_time_diagnostic(
    basis: &FockBasis,
    states: &[CVector<f64>],
    times: &[f64],
    sites: &[usize],
) -> Result<ThermalizationReport> {
    let rho = subsystem_rdm(basis, &states[0], sites)?;
    Ok(ThermalizationReport {
        sites: sites.to_vec(),
        times: times.to_vec(),
        entropies: vec![renyi_entropy(&rho, 2).max(0.0)],
        max_entropy: (rho.dim() as f64).ln(),
        saturated: false,
    })
}
