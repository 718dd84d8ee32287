use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::correlator::Appendix2Params;
use crate::fock::{enumerate_basis, sector_dimension, FockBasis, Operator, Sector, Statistics};
use crate::model::{bose_hubbard, fermi_hopping, ModelParams};
use crate::protocol::{AncillaDesign, DiagonalObservable, ScalingConfig};
use crate::quench::{DataSet, QuenchConfig, FIG2_MAX_JOINT_DIM};
use crate::thermal::{thermal_state, DensityMatrix};

/// Largest single-copy dimension the dense thermal-state experiments accept.
pub const MAX_STATE_DIM: u64 = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    IdentityChecks,
    VirtualDensity,
    CorrelatorStudy,
    Ancilla,
    Distill,
    Buffered,
    Scaling,
    Fig2,
    Appendix2,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::IdentityChecks => "identity_checks",
            Self::VirtualDensity => "virtual_density",
            Self::CorrelatorStudy => "correlator_study",
            Self::Ancilla => "ancilla",
            Self::Distill => "distill",
            Self::Buffered => "buffered",
            Self::Scaling => "scaling",
            Self::Fig2 => "fig2",
            Self::Appendix2 => "appendix2",
        }
    }
}

fn boson() -> Statistics {
    Statistics::Boson
}

fn two() -> usize {
    2
}

/// A chain with a fixed particle number, in equilibrium at `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub model: ModelParams,
    pub particles: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
}

impl SystemSection {
    pub fn basis(&self) -> Result<Arc<FockBasis>, ExperimentError> {
        let dim = sector_dimension(self.statistics, self.model.sites, self.particles);
        if dim > MAX_STATE_DIM {
            return Err(ExperimentError::Infeasible {
                what: format!("{} particles on {} sites", self.particles, self.model.sites),
                dim,
                limit: MAX_STATE_DIM,
            });
        }
        Ok(enumerate_basis(
            self.statistics,
            self.model.sites,
            Sector::Fixed(self.particles),
        )?)
    }

    pub fn hamiltonian(&self, basis: &Arc<FockBasis>) -> Result<Operator<f64>, ExperimentError> {
        Ok(match self.statistics {
            Statistics::Boson => bose_hubbard(basis, &self.model)?,
            Statistics::Fermion => fermi_hopping(basis, &self.model)?,
        })
    }

    pub fn thermal(&self, beta: f64) -> Result<DensityMatrix<f64>, ExperimentError> {
        let b = self.basis()?;
        Ok(thermal_state(&self.hamiltonian(&b)?, beta)?)
    }
}

macro_rules! system_section {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn system(&self) -> SystemSection {
                SystemSection {
                    model: self.model.clone(),
                    particles: self.particles,
                    statistics: self.statistics,
                }
            }
        }
    )*};
}

system_section!(
    VirtualDensitySection,
    CorrelatorSection,
    AncillaSection,
    DistillSection,
    BufferedSection
);

fn twenty() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    #[serde(default = "two")]
    pub copies: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
    pub sites: usize,
    pub particles: usize,
    /// Random density matrices fed to the purity identity.
    #[serde(default = "twenty")]
    pub random_states: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualDensitySection {
    pub model: ModelParams,
    pub particles: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
    #[serde(default = "two")]
    pub copies: usize,
    pub betas: Vec<f64>,
    pub observables: Vec<DiagonalObservable>,
    pub shots: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorSection {
    pub model: ModelParams,
    pub particles: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
    pub betas: Vec<f64>,
    pub pairs: Vec<(usize, usize)>,
}

fn shared() -> AncillaDesign {
    AncillaDesign::SharedRun
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncillaSection {
    pub model: ModelParams,
    pub particles: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
    pub beta: f64,
    pub observable: DiagonalObservable,
    pub shots: u64,
    #[serde(default = "shared")]
    pub design: AncillaDesign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillSection {
    pub model: ModelParams,
    pub particles: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
    pub beta: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferedSection {
    pub model: ModelParams,
    pub particles: usize,
    #[serde(default = "boson")]
    pub statistics: Statistics,
    pub beta: f64,
    pub region: Vec<usize>,
    pub widths: Vec<usize>,
    pub observable: DiagonalObservable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub model: ModelParams,
    pub particles: usize,
    pub betas: Vec<f64>,
    pub region_sizes: Vec<usize>,
    pub target_precision: f64,
    pub pilot_shots: u64,
}

/// Either a named data set, optionally with fields overridden, or a fully
/// spelled-out quench.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Section {
    pub preset: Option<DataSet>,
    #[serde(alias = "L")]
    pub sites: Option<usize>,
    pub pattern: Option<Vec<u8>>,
    #[serde(alias = "J")]
    pub j: Option<f64>,
    #[serde(alias = "U_over_J")]
    pub u_over_j: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub subsystem: Option<Vec<usize>>,
    pub entropy_sites: Option<Vec<usize>>,
    pub shots: Option<u64>,
    pub sampled: Option<bool>,
}

impl Fig2Section {
    pub fn quench_config(&self, seed: u64, workers: usize) -> Result<QuenchConfig, ExperimentError> {
        let mut cfg = match self.preset {
            Some(set) => QuenchConfig::preset(set),
            None => {
                let missing = |f: &str| ExperimentError::Invalid(format!("fig2 without a preset needs `{f}`"));
                QuenchConfig {
                    sites: self.sites.ok_or_else(|| missing("sites"))?,
                    pattern: self.pattern.clone().ok_or_else(|| missing("pattern"))?,
                    j: 1.0,
                    u_over_j: self.u_over_j.ok_or_else(|| missing("u_over_j"))?,
                    times: self.times.clone().ok_or_else(|| missing("times"))?,
                    subsystem: None,
                    entropy_sites: None,
                    shots: self.shots.ok_or_else(|| missing("shots"))?,
                    seed,
                    workers,
                    sampled: true,
                }
            }
        };
        if let Some(v) = self.sites {
            cfg.sites = v;
        }
        if let Some(v) = &self.pattern {
            cfg.pattern = v.clone();
        }
        if let Some(v) = self.j {
            cfg.j = v;
        }
        if let Some(v) = self.u_over_j {
            cfg.u_over_j = v;
        }
        if let Some(v) = &self.times {
            cfg.times = v.clone();
        }
        if self.subsystem.is_some() {
            cfg.subsystem = self.subsystem.clone();
        }
        if self.entropy_sites.is_some() {
            cfg.entropy_sites = self.entropy_sites.clone();
        }
        if let Some(v) = self.shots {
            cfg.shots = v;
        }
        if let Some(v) = self.sampled {
            cfg.sampled = v;
        }
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Mandatory for every kind that draws shots.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sampling threads; does not change any output.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub identity_checks: Option<IdentitySection>,
    #[serde(default)]
    pub virtual_density: Option<VirtualDensitySection>,
    #[serde(default)]
    pub correlator_study: Option<CorrelatorSection>,
    #[serde(default)]
    pub ancilla: Option<AncillaSection>,
    #[serde(default)]
    pub distill: Option<DistillSection>,
    #[serde(default)]
    pub buffered: Option<BufferedSection>,
    #[serde(default)]
    pub scaling: Option<ScalingSection>,
    #[serde(default)]
    pub fig2: Option<Fig2Section>,
    #[serde(default)]
    pub appendix2: Option<Appendix2Params>,
}

fn need<T>(section: &Option<T>, kind: ExperimentKind) -> Result<&T, ExperimentError> {
    section
        .as_ref()
        .ok_or_else(|| ExperimentError::Invalid(format!("kind `{}` needs a [{}] section", kind.name(), kind.name())))
}

fn positive(values: &[f64], what: &str) -> Result<(), ExperimentError> {
    if values.is_empty() || values.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
        return Err(ExperimentError::Invalid(format!(
            "{what} must be a non-empty list of finite values ≥ 0"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))
    }

    /// Whether the kind draws random shots and so needs a seed.
    pub fn is_sampled(&self) -> bool {
        match self.kind {
            ExperimentKind::VirtualDensity | ExperimentKind::Ancilla | ExperimentKind::Scaling => true,
            ExperimentKind::Fig2 => self
                .fig2
                .as_ref()
                .and_then(|f| f.sampled)
                .unwrap_or_else(|| self.fig2.as_ref().and_then(|f| f.preset) != Some(DataSet::C)),
            _ => false,
        }
    }

    /// Checks that the section for `kind` exists, no other section is
    /// present, and the fields are consistent.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let present = [
            (ExperimentKind::IdentityChecks, self.identity_checks.is_some()),
            (ExperimentKind::VirtualDensity, self.virtual_density.is_some()),
            (ExperimentKind::CorrelatorStudy, self.correlator_study.is_some()),
            (ExperimentKind::Ancilla, self.ancilla.is_some()),
            (ExperimentKind::Distill, self.distill.is_some()),
            (ExperimentKind::Buffered, self.buffered.is_some()),
            (ExperimentKind::Scaling, self.scaling.is_some()),
            (ExperimentKind::Fig2, self.fig2.is_some()),
            (ExperimentKind::Appendix2, self.appendix2.is_some()),
        ];
        if let Some((other, _)) = present.iter().find(|(k, p)| *p && *k != self.kind) {
            return Err(ExperimentError::Invalid(format!(
                "section [{}] does not belong to kind `{}`",
                other.name(),
                self.kind.name()
            )));
        }
        if self.is_sampled() && self.seed.is_none() {
            return Err(ExperimentError::Invalid(format!(
                "kind `{}` samples shots and needs a seed",
                self.kind.name()
            )));
        }
        if self.workers == Some(0) {
            return Err(ExperimentError::Invalid("workers must be at least 1".into()));
        }
        let k = self.kind;
        match k {
            ExperimentKind::IdentityChecks => {
                let s = need(&self.identity_checks, k)?;
                if s.copies < 2 || (s.statistics == Statistics::Fermion && s.copies != 2) {
                    return Err(ExperimentError::Invalid(
                        "identity checks need n ≥ 2 copies (n = 2 for fermions)".into(),
                    ));
                }
            }
            ExperimentKind::VirtualDensity => {
                let s = need(&self.virtual_density, k)?;
                positive(&s.betas, "betas")?;
                if s.observables.is_empty() || s.shots < 2 {
                    return Err(ExperimentError::Invalid(
                        "need observables and at least two shots".into(),
                    ));
                }
                if s.copies < 2 || (s.statistics == Statistics::Fermion && s.copies != 2) {
                    return Err(ExperimentError::Invalid(
                        "need n ≥ 2 copies (n = 2 for fermions)".into(),
                    ));
                }
                s.system().basis()?;
            }
            ExperimentKind::CorrelatorStudy => {
                let s = need(&self.correlator_study, k)?;
                positive(&s.betas, "betas")?;
                if s.pairs.is_empty() {
                    return Err(ExperimentError::Invalid("need at least one site pair".into()));
                }
                s.system().basis()?;
            }
            ExperimentKind::Ancilla => {
                let s = need(&self.ancilla, k)?;
                positive(&[s.beta], "beta")?;
                s.system().basis()?;
            }
            ExperimentKind::Distill => {
                let s = need(&self.distill, k)?;
                positive(&[s.beta], "beta")?;
                if s.iterations == 0 {
                    return Err(ExperimentError::Invalid("need at least one iteration".into()));
                }
                s.system().basis()?;
            }
            ExperimentKind::Buffered => {
                let s = need(&self.buffered, k)?;
                positive(&[s.beta], "beta")?;
                if s.widths.is_empty() || s.region.is_empty() {
                    return Err(ExperimentError::Invalid("need a region and buffer widths".into()));
                }
                s.system().basis()?;
            }
            ExperimentKind::Scaling => {
                let s = need(&self.scaling, k)?;
                positive(&s.betas, "betas")?;
                if s.region_sizes.is_empty() || !(s.target_precision > 0.0) || s.pilot_shots < 2 {
                    return Err(ExperimentError::Invalid(
                        "need region sizes, a positive target and pilot shots".into(),
                    ));
                }
                let dim = sector_dimension(Statistics::Boson, s.model.sites, s.particles);
                if dim > MAX_STATE_DIM {
                    return Err(ExperimentError::Infeasible {
                        what: "scaling chain".into(),
                        dim,
                        limit: MAX_STATE_DIM,
                    });
                }
            }
            ExperimentKind::Fig2 => {
                let q = need(&self.fig2, k)?.quench_config(self.seed.unwrap_or(0), 1)?;
                let dim = sector_dimension(Statistics::Boson, 2 * q.sites, 2 * q.particles());
                if q.sampled && dim > FIG2_MAX_JOINT_DIM {
                    return Err(ExperimentError::Infeasible {
                        what: "two-copy quench space (reduce L or N, or set sampled = false)".into(),
                        dim,
                        limit: FIG2_MAX_JOINT_DIM,
                    });
                }
            }
            ExperimentKind::Appendix2 => {}
        }
        Ok(())
    }

    pub fn scaling_config(&self, workers: usize) -> Result<ScalingConfig, ExperimentError> {
        let s = need(&self.scaling, self.kind)?;
        Ok(ScalingConfig {
            model: s.model.clone(),
            particles: s.particles,
            betas: s.betas.clone(),
            region_sizes: s.region_sizes.clone(),
            target_precision: s.target_precision,
            pilot_shots: s.pilot_shots,
            seed: self.seed.unwrap_or(0),
            workers,
        })
    }
}
