use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::fock::Operator;
use crate::linalg::{hermitian_eigen, trace, CMatrix};
use crate::thermal::DensityMatrix;

/// Margin above `p₊ = 1/2` below which recombination is refused.
pub const ANCILLA_EPSILON: f64 = 1e-12;

/// Post-selected state after a `+1` swap outcome on `ρ ⊗ ρ`, with its
/// probability: `ρ₁ = (ρ + ρ²)/(1 + tr ρ²)`, `p₊ = (1 + tr ρ²)/2`.
pub fn ancilla_step(rho: &DensityMatrix<f64>) -> Result<(DensityMatrix<f64>, f64), ProtocolError> {
    let m = rho.matrix();
    let sq = m * m;
    let z2 = trace(&sq).re;
    let next = (m + sq) / nalgebra::Complex::new(1.0 + z2, 0.0);
    let next = (&next + next.adjoint()) * nalgebra::Complex::new(0.5, 0.0);
    Ok((DensityMatrix::new(rho.basis().clone(), next)?, (1.0 + z2) / 2.0))
}

/// `tr{Xρ²}/tr{ρ²}` from `tr{Xρ₁}`, `tr{Xρ}` and `p₊`.
pub fn ancilla_combine(x_rho1: f64, x_rho: f64, p_plus: f64) -> Result<f64, ProtocolError> {
    let g = 2.0 * p_plus - 1.0;
    if p_plus <= 0.5 + ANCILLA_EPSILON || p_plus > 1.0 + 1e-12 {
        return Err(ProtocolError::Invalid(format!(
            "p₊ = {p_plus} leaves no usable purity signal"
        )));
    }
    Ok((2.0 * p_plus * x_rho1 - x_rho) / g)
}

/// How the success probability and the post-selected expectation share
/// runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AncillaDesign {
    /// `p₊` is the acceptance fraction of the same runs whose kept copy is
    /// measured.
    SharedRun,
    /// `p₊` comes from a separate batch of swap measurements.
    IndependentRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaReport {
    pub design: AncillaDesign,
    pub shots: u64,
    pub seed: u64,
    pub p_plus: f64,
    pub p_plus_se: f64,
    pub x_rho1: f64,
    pub x_rho1_se: f64,
    pub x_rho: f64,
    pub x_rho_se: f64,
    pub estimate: f64,
    pub estimate_se: f64,
}

/// Projective measurement of `X` in its eigenbasis on a fixed state.
struct Readout {
    values: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl Readout {
    fn new(eig_values: &[f64], eig_vectors: &CMatrix<f64>, rho: &CMatrix<f64>) -> Result<Self, ProtocolError> {
        let probs: Vec<f64> = (0..eig_values.len())
            .map(|k| {
                let v = eig_vectors.column(k);
                (v.adjoint() * rho * v)[(0, 0)].re.max(0.0)
            })
            .collect();
        let alias = WeightedAliasIndex::new(probs).map_err(|e| ProtocolError::Invalid(format!("sampler: {e}")))?;
        Ok(Self {
            values: eig_values.to_vec(),
            alias,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.values[self.alias.sample(rng)]
    }
}

#[derive(Default)]
struct MeanVar {
    n: u64,
    sum: f64,
    sq: f64,
}

impl MeanVar {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn se(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let var = (self.sq / n - self.mean().powi(2)) * n / (n - 1.0);
        (var.max(0.0) / n).sqrt()
    }
}

/// Channel-level simulation of the ancilla protocol: swap outcomes are
/// Bernoulli(p₊), kept copies are measured in the eigenbasis of `X`, and a
/// separate batch measures `X` on `ρ`. Errors are propagated to first
/// order through [`ancilla_combine`].
pub fn ancilla_sampled_estimate(
    rho: &DensityMatrix<f64>,
    x: &Operator<f64>,
    shots: u64,
    seed: u64,
    design: AncillaDesign,
) -> Result<AncillaReport, ProtocolError> {
    if shots < 2 {
        return Err(ProtocolError::Invalid("need at least two shots per batch".into()));
    }
    if x.hermitian_deviation() > 1e-10 {
        return Err(ProtocolError::Invalid("observable is not Hermitian".into()));
    }
    let (rho1, p_plus) = ancilla_step(rho)?;
    let eig = hermitian_eigen(&x.to_dense());
    let on_rho = Readout::new(&eig.values, &eig.vectors, rho.matrix())?;
    let on_rho1 = Readout::new(&eig.values, &eig.vectors, rho1.matrix())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut accepted = MeanVar::default();
    let mut kept = MeanVar::default();
    for _ in 0..shots {
        let plus = rng.random::<f64>() < p_plus;
        accepted.push(if plus { 1.0 } else { 0.0 });
        if plus {
            kept.push(on_rho1.draw(&mut rng));
        }
    }
    if design == AncillaDesign::IndependentRun {
        accepted = MeanVar::default();
        for _ in 0..shots {
            let plus = rng.random::<f64>() < p_plus;
            accepted.push(if plus { 1.0 } else { 0.0 });
        }
    }
    let mut plain = MeanVar::default();
    for _ in 0..shots {
        plain.push(on_rho.draw(&mut rng));
    }

    let (p, x1, x0) = (accepted.mean(), kept.mean(), plain.mean());
    let estimate = ancilla_combine(x1, x0, p)?;
    let g = 2.0 * p - 1.0;
    let d_x1 = 2.0 * p / g;
    let d_x0 = -1.0 / g;
    let d_p = 2.0 * (x0 - x1) / (g * g);
    let estimate_se = ((d_x1 * kept.se()).powi(2) + (d_x0 * plain.se()).powi(2) + (d_p * accepted.se()).powi(2)).sqrt();
    Ok(AncillaReport {
        design,
        shots,
        seed,
        p_plus: p,
        p_plus_se: accepted.se(),
        x_rho1: x1,
        x_rho1_se: kept.se(),
        x_rho: x0,
        x_rho_se: plain.se(),
        estimate,
        estimate_se,
    })
}

#[derive(Clone, Debug)]
pub struct DistillStep {
    pub iteration: usize,
    /// Success probability of the step that produced `state`.
    pub p_plus: f64,
    pub ground_fidelity: f64,
    pub largest_eigenvalue: f64,
    pub state: DensityMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct DistillReport {
    pub steps: Vec<DistillStep>,
    /// Set when the two largest eigenvalues of the input are within 1e-12,
    /// so the distilled state has no unique target.
    pub degenerate: bool,
}

/// Iterates [`ancilla_step`], tracking overlap with the dominant eigenvector
/// of the input state.
pub fn distill(rho: &DensityMatrix<f64>, iterations: usize) -> Result<DistillReport, ProtocolError> {
    if iterations == 0 {
        return Err(ProtocolError::Invalid("at least one iteration is required".into()));
    }
    let eig = rho.eigen();
    let d = eig.values.len();
    let degenerate = d > 1 && eig.values[d - 1] - eig.values[d - 2] < 1e-12;
    if degenerate {
        log::warn!("dominant eigenvalue is degenerate; distillation target is ambiguous");
    }
    let top = eig.vectors.column(d - 1).into_owned();
    let mut steps = Vec::with_capacity(iterations);
    let mut current = rho.clone();
    for iteration in 1..=iterations {
        let (next, p_plus) = ancilla_step(&current)?;
        let ground_fidelity = (top.adjoint() * next.matrix() * &top)[(0, 0)].re;
        let largest_eigenvalue = next.eigen().values[d - 1];
        steps.push(DistillStep {
            iteration,
            p_plus,
            ground_fidelity,
            largest_eigenvalue,
            state: next.clone(),
        });
        current = next;
    }
    Ok(DistillReport { steps, degenerate })
}
