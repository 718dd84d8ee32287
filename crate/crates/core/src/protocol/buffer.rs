use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{interferometric_estimate, DiagonalObservable, OutcomeDistribution, ProtocolError, SamplerOptions};
use crate::fock::{enumerate_basis, Sector, Statistics};
use crate::linalg::trace;
use crate::model::{bose_hubbard, ModelParams};
use crate::replica::ReplicaBasis;
use crate::thermal::{purity, reduced_density_matrix, thermal_state, DensityMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferedEstimate {
    pub buffer_width: usize,
    pub buffer_sites: Vec<usize>,
    /// `tr{X σ_B}` with `σ_B = ρ_B²/tr{ρ_B²}`.
    pub approx: f64,
    /// `tr{X ρ²}/tr{ρ²}` on the whole system.
    pub exact: f64,
    pub error: f64,
}

/// `R` padded by `w` sites on each side. Fails when the padding leaves the
/// chain.
pub fn buffer_sites(region: &[usize], w: usize, num_sites: usize) -> Result<Vec<usize>, ProtocolError> {
    let (lo, hi) = match (region.iter().min(), region.iter().max()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(ProtocolError::Invalid("empty region".into())),
    };
    if lo < w || hi + w >= num_sites {
        return Err(ProtocolError::Infeasible(format!(
            "buffer of width {w} around sites {lo}..={hi} leaves the {num_sites}-site chain"
        )));
    }
    let mut sites: Vec<usize> = (lo - w..=hi + w).collect();
    sites.retain(|s| *s < lo || *s > hi || region.contains(s));
    Ok(sites)
}

/// Compares the squared buffered reduced state against the exact
/// half-temperature expectation for an observable supported on `region`.
pub fn buffered_estimate(
    rho: &DensityMatrix<f64>,
    region: &[usize],
    buffer_width: usize,
    obs: &DiagonalObservable,
) -> Result<BufferedEstimate, ProtocolError> {
    let full = rho.basis();
    if obs.sites().iter().any(|s| !region.contains(s)) {
        return Err(ProtocolError::Invalid("observable reaches outside the region".into()));
    }
    let b = buffer_sites(region, buffer_width, full.num_modes())?;

    let sq = rho.matrix() * rho.matrix();
    let z = trace(&sq).re;
    let exact = full
        .states()
        .enumerate()
        .map(|(i, s)| obs.value(s) * sq[(i, i)].re)
        .sum::<f64>()
        / z;

    let approx = if b.len() == full.num_modes() {
        exact
    } else {
        let rho_b = reduced_density_matrix(rho, &b)?;
        let sq_b = rho_b.matrix() * rho_b.matrix();
        let z_b = trace(&sq_b).re;
        let mut acc = 0.0;
        for (i, s) in rho_b.basis().states().enumerate() {
            let x = obs.value_on_region(s, &b).expect("observable inside the buffer");
            acc += x * sq_b[(i, i)].re;
        }
        acc / z_b
    };
    Ok(BufferedEstimate {
        buffer_width,
        buffer_sites: b,
        approx,
        exact,
        error: (approx - exact).abs(),
    })
}

/// Purity and measured shot cost of the denominator estimator for one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotCost {
    pub purity: f64,
    pub sampled_purity: f64,
    /// Per-shot variance of the readout.
    pub shot_variance: f64,
    /// Shots needed for relative precision `target` on the purity.
    pub shots_needed: f64,
}

/// Runs a pilot of the two-copy estimator on `ρ` and extrapolates the shot
/// count `s²/(δ·Z̄₂)²`.
pub fn shots_for_precision(
    rho: &DensityMatrix<f64>,
    target: f64,
    pilot: SamplerOptions,
) -> Result<ShotCost, ProtocolError> {
    if target <= 0.0 {
        return Err(ProtocolError::Invalid("target precision must be positive".into()));
    }
    let rb = Arc::new(ReplicaBasis::new(rho.basis().clone(), 2)?);
    let dist = OutcomeDistribution::from_density(rho, rb)?;
    let report = interferometric_estimate(&dist, &DiagonalObservable::Identity, pilot)?;
    let variance = report.denominator_se.powi(2) * report.shots as f64;
    Ok(ShotCost {
        purity: purity(rho, 2),
        sampled_purity: report.denominator,
        shot_variance: variance,
        shots_needed: variance / (target * report.denominator).powi(2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub model: ModelParams,
    pub particles: usize,
    pub betas: Vec<f64>,
    pub region_sizes: Vec<usize>,
    pub target_precision: f64,
    pub pilot_shots: u64,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub beta: f64,
    pub region_size: usize,
    pub purity: f64,
    pub sampled_purity: f64,
    pub shot_variance: f64,
    pub shots_needed: f64,
}

/// Shot cost of the purity estimate on centred regions of a thermal
/// Bose-Hubbard chain over a `(β, |R|)` grid.
pub fn shots_scaling_study(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>, ProtocolError> {
    let l = cfg.model.sites;
    let basis = enumerate_basis(Statistics::Boson, l, Sector::Fixed(cfg.particles))?;
    let h = bose_hubbard::<f64>(&basis, &cfg.model).map_err(|e| ProtocolError::Invalid(e.to_string()))?;
    let mut rows = Vec::new();
    for (bi, &beta) in cfg.betas.iter().enumerate() {
        let rho = thermal_state(&h, beta)?;
        for (ri, &size) in cfg.region_sizes.iter().enumerate() {
            if size == 0 || size > l {
                return Err(ProtocolError::Invalid(format!("region size {size} on {l} sites")));
            }
            let start = (l - size) / 2;
            let sites: Vec<usize> = (start..start + size).collect();
            let rho_r = reduced_density_matrix(&rho, &sites)?;
            let pilot = SamplerOptions {
                shots: cfg.pilot_shots,
                seed: cfg.seed.wrapping_add((bi * cfg.region_sizes.len() + ri) as u64),
                workers: cfg.workers,
            };
            let cost = shots_for_precision(&rho_r, cfg.target_precision, pilot)?;
            rows.push(ScalingRow {
                beta,
                region_size: size,
                purity: cost.purity,
                sampled_purity: cost.sampled_purity,
                shot_variance: cost.shot_variance,
                shots_needed: cost.shots_needed,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
