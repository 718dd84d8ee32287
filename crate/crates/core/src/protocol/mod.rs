//! Virtual cooling estimators: the exact `tr{Xρⁿ}/tr{ρⁿ}` oracle, the
//! shot-sampled interferometric estimators for bosons and fermions, the
//! ancilla purification channel, ground-state distillation, buffered
//! subregions and shot-count scaling.

mod ancilla;
mod buffer;
mod observable;
mod sampling;

pub use ancilla::{
    ancilla_combine, ancilla_sampled_estimate, ancilla_step, distill, AncillaDesign, AncillaReport, DistillReport,
    DistillStep, ANCILLA_EPSILON,
};
pub use buffer::{
    buffer_sites, buffered_estimate, log_log_slope, shots_for_precision, shots_scaling_study, BufferedEstimate,
    ScalingConfig, ScalingRow, ShotCost,
};
pub use observable::DiagonalObservable;
pub use sampling::{
    fermionic_estimate, interferometric_estimate, EstimateReport, EstimateRow, Moments, OutcomeDistribution,
    SamplerOptions, ShotRecord, SHOT_STREAMS,
};

use thiserror::Error;

use crate::fock::{FockError, Operator};
use crate::linalg::{trace, CMatrix};
use crate::replica::{measurement_operators, tensor_power, transformed_trace, ReplicaBasis, ReplicaError};
use crate::thermal::{DensityMatrix, ThermalError};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Replica(#[from] ReplicaError),
    #[error("{0}")]
    Invalid(String),
    #[error("observable is not number-diagonal ({0}); use virtual_expectation_exact instead")]
    NotNumberDiagonal(String),
    #[error("observable does not commute with V (commutator norm {0:e})")]
    NotCommutant(f64),
    #[error("tr{{ρⁿ}} = {0:e} is numerically zero")]
    VanishingPurity(f64),
    #[error("{0}")]
    Infeasible(String),
}

/// `tr{X ρⁿ}/tr{ρⁿ}` by repeated dense multiplication.
pub fn virtual_expectation_exact(rho: &DensityMatrix<f64>, x: &Operator<f64>, n: u32) -> Result<f64, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::Invalid("number of copies must be at least 1".into()));
    }
    if **x.rows() != **rho.basis() || **x.cols() != **rho.basis() {
        return Err(ProtocolError::Invalid(
            "observable and state live on different bases".into(),
        ));
    }
    let dev = x.hermitian_deviation();
    if dev > 1e-10 {
        return Err(ProtocolError::Invalid(format!(
            "observable is not Hermitian (deviation {dev:e})"
        )));
    }
    let power = dense_power(rho.matrix(), n);
    let z = trace(&power).re;
    if z.abs() < 1e-300 {
        return Err(ProtocolError::VanishingPurity(z));
    }
    Ok(trace(&(x.to_dense() * power)).re / z)
}

fn dense_power(m: &CMatrix<f64>, n: u32) -> CMatrix<f64> {
    let mut p = m.clone();
    for _ in 1..n {
        p = &p * m;
    }
    p
}

/// The quantity the sampled estimator converges to, computed densely:
/// `tr{D M F ρ^{⊗n} F†}/tr{ρⁿ}` with `D` the number-diagonal part of
/// `F X_s F†` and `M` the phase (bosons) or `V` (fermions). For the density
/// this is the virtual expectation itself; for `n_j n_ℓ` it is the measurable
/// part only.
pub fn sampled_target(
    rho: &DensityMatrix<f64>,
    obs: &DiagonalObservable,
    rb: &ReplicaBasis,
) -> Result<f64, ProtocolError> {
    obs.check_sampleable(rb.sites())?;
    let (f, m) = measurement_operators::<f64>(rb)?;
    let joint = tensor_power(rho, rb)?;
    let d = obs.joint_operator(rb);
    let num = transformed_trace(joint.matrix(), &f, &m.mul(&d)?);
    let den = transformed_trace(joint.matrix(), &f, &m);
    if den.norm() < 1e-300 {
        return Err(ProtocolError::VanishingPurity(den.norm()));
    }
    Ok((num / den).re)
}
