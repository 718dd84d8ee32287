use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind};
use super::ExperimentError;
use crate::correlator::{appendix2_study, imaginary_time_correlator, unconventional_correlator};
use crate::fock::{enumerate_basis, Sector, Statistics};
use crate::linalg::{random_density_matrix, trace, CMatrix};
use crate::protocol::{
    ancilla_sampled_estimate, buffered_estimate, distill, fermionic_estimate, interferometric_estimate, log_log_slope,
    shots_scaling_study, virtual_expectation_exact, OutcomeDistribution, SamplerOptions,
};
use crate::quench::fig2_experiment;
use crate::replica::{measurement_operators, tensor_power, transformed_trace, verify_swap_identity, ReplicaBasis};
use crate::thermal::DensityMatrix;

/// Largest joint dimension the dense identity checks will build.
pub const IDENTITY_MAX_JOINT_DIM: u64 = 1500;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config_sha256: String,
    /// Data tables; each starts with a `# config_sha256:` comment line.
    pub files: Vec<OutputFile>,
    pub manifest: Value,
}

impl ExperimentOutput {
    pub fn file(&self, name: &str) -> Option<&OutputFile> {
        self.files.iter().find(|f| f.name == name)
    }

    /// Writes every table and `manifest.json` into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for f in &self.files {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents)?;
            written.push(path);
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&self.manifest)?)?;
        written.push(path);
        Ok(written)
    }
}

/// SHA-256 of the canonical JSON form of the config, ignoring the fields
/// that cannot change any output (worker count and output directory).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.workers = None;
    c.output = None;
    let bytes = serde_json::to_vec(&c).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    name: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(name: &str, hash: &str) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(format!("# config_sha256: {hash}\n").as_bytes());
        Self {
            name: name.to_string(),
            writer: csv::Writer::from_writer(buf),
        }
    }

    fn header(mut self, cols: &[&str]) -> Result<Self, ExperimentError> {
        self.writer.write_record(cols)?;
        Ok(self)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) -> Result<(), ExperimentError> {
        self.writer.write_record(cells.into_iter().collect::<Vec<_>>())?;
        Ok(())
    }

    fn serialize<T: Serialize>(&mut self, row: &T) -> Result<(), ExperimentError> {
        self.writer.serialize(row)?;
        Ok(())
    }

    fn finish(self) -> Result<OutputFile, ExperimentError> {
        let contents = self
            .writer
            .into_inner()
            .map_err(|e| ExperimentError::Output(e.to_string()))?;
        Ok(OutputFile {
            name: self.name,
            contents,
        })
    }
}

/// Runs a validated config. Nothing is written; see
/// [`ExperimentOutput::write_to`].
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    if workers == 0 {
        return Err(ExperimentError::Invalid("workers must be at least 1".into()));
    }
    let hash = config_hash(cfg);
    let start = Instant::now();
    let seed = cfg.seed.unwrap_or(0);
    let (files, summary) = match cfg.kind {
        ExperimentKind::IdentityChecks => identity_checks(cfg, &hash, seed)?,
        ExperimentKind::VirtualDensity => virtual_density(cfg, &hash, seed, workers)?,
        ExperimentKind::CorrelatorStudy => correlator_study(cfg, &hash)?,
        ExperimentKind::Ancilla => ancilla(cfg, &hash, seed)?,
        ExperimentKind::Distill => distillation(cfg, &hash)?,
        ExperimentKind::Buffered => buffered(cfg, &hash)?,
        ExperimentKind::Scaling => scaling(cfg, &hash, workers)?,
        ExperimentKind::Fig2 => fig2(cfg, &hash, seed, workers)?,
        ExperimentKind::Appendix2 => appendix2(cfg, &hash)?,
    };
    let manifest = json!({
        "kind": cfg.kind.name(),
        "config_sha256": hash,
        "config": cfg,
        "versions": {
            "virtual_cooling": env!("CARGO_PKG_VERSION"),
        },
        "seed": cfg.seed,
        "workers": workers,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
        "summary": summary,
    });
    Ok(ExperimentOutput {
        config_sha256: hash,
        files,
        manifest,
    })
}

type Produced = (Vec<OutputFile>, Value);

fn identity_checks(cfg: &ExperimentConfig, hash: &str, seed: u64) -> Result<Produced, ExperimentError> {
    let s = cfg.identity_checks.as_ref().expect("validated");
    let copy = enumerate_basis(s.statistics, s.sites, Sector::Fixed(s.particles))?;
    let joint_dim = crate::fock::sector_dimension(s.statistics, s.sites * s.copies, s.particles * s.copies);
    if joint_dim > IDENTITY_MAX_JOINT_DIM {
        return Err(ExperimentError::Infeasible {
            what: "joint replica space".into(),
            dim: joint_dim,
            limit: IDENTITY_MAX_JOINT_DIM,
        });
    }
    let rb = ReplicaBasis::new(copy.clone(), s.copies)?;
    let (f, m) = measurement_operators::<f64>(&rb)?;
    let mut checks: Vec<(&str, f64)> = vec![("fourier_unitarity", f.unitary_deviation())];
    if s.statistics == Statistics::Boson {
        checks.push(("swap_identity", verify_swap_identity(&rb)?.deviation));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..s.random_states {
        let rho = DensityMatrix::new(copy.clone(), random_density_matrix(copy.dim(), &mut rng))?;
        let joint = tensor_power(&rho, &rb)?;
        let got = transformed_trace(joint.matrix(), &f, &m);
        let mut p: CMatrix<f64> = rho.matrix().clone();
        for _ in 1..s.copies {
            p = &p * rho.matrix();
        }
        worst = worst.max((got - trace(&p)).norm());
    }
    checks.push(("purity_identity", worst));

    let mut t =
        Table::new("identity_checks.csv", hash).header(&["check", "copies", "sites", "particles", "deviation"])?;
    for (name, dev) in &checks {
        t.row([
            name.to_string(),
            s.copies.to_string(),
            s.sites.to_string(),
            s.particles.to_string(),
            sci(*dev),
        ])?;
    }
    let max = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok((
        vec![t.finish()?],
        json!({ "max_deviation": max, "joint_dim": rb.joint_basis().dim() }),
    ))
}

fn virtual_density(cfg: &ExperimentConfig, hash: &str, seed: u64, workers: usize) -> Result<Produced, ExperimentError> {
    let s = cfg.virtual_density.as_ref().expect("validated");
    let sys = s.system();
    let basis = sys.basis()?;
    let h = sys.hamiltonian(&basis)?;
    let rb = Arc::new(ReplicaBasis::new(basis.clone(), s.copies)?);
    let mut t = Table::new("virtual_density.csv", hash).header(&[
        "observable",
        "n",
        "beta",
        "shots",
        "seed",
        "numerator",
        "numerator_se",
        "denominator",
        "denominator_se",
        "ratio",
        "ratio_se",
        "target",
        "virtual_exact",
    ])?;
    let mut worst_z: f64 = 0.0;
    let mut k = 0u64;
    for &beta in &s.betas {
        let rho = crate::thermal::thermal_state(&h, beta)?;
        let dist = OutcomeDistribution::from_density(&rho, rb.clone())?;
        for obs in &s.observables {
            let opts = SamplerOptions {
                shots: s.shots,
                seed: seed.wrapping_add(k),
                workers,
            };
            k += 1;
            let rep = match sys.statistics {
                Statistics::Boson => interferometric_estimate(&dist, obs, opts)?,
                Statistics::Fermion => fermionic_estimate(&dist, obs, opts)?,
            };
            let target = dist.exact_ratio(obs)?.re;
            let exact = virtual_expectation_exact(&rho, &obs.operator(&basis)?, s.copies as u32)?;
            worst_z = worst_z.max(rep.z_score(target).abs());
            t.row([
                obs.label(),
                s.copies.to_string(),
                sci(beta),
                rep.shots.to_string(),
                rep.seed.to_string(),
                sci(rep.numerator),
                sci(rep.numerator_se),
                sci(rep.denominator),
                sci(rep.denominator_se),
                sci(rep.ratio),
                sci(rep.ratio_se),
                sci(target),
                sci(exact),
            ])?;
        }
    }
    Ok((vec![t.finish()?], json!({ "max_abs_z": worst_z })))
}

fn correlator_study(cfg: &ExperimentConfig, hash: &str) -> Result<Produced, ExperimentError> {
    let s = cfg.correlator_study.as_ref().expect("validated");
    let sys = s.system();
    let basis = sys.basis()?;
    let h = sys.hamiltonian(&basis)?;
    let mut t = Table::new("correlator_study.csv", hash).header(&[
        "beta",
        "j",
        "l",
        "first_term",
        "second_term",
        "total",
        "imaginary_time",
    ])?;
    let mut worst: f64 = 0.0;
    for &beta in &s.betas {
        let rho = crate::thermal::thermal_state(&h, beta)?;
        for &(j, l) in &s.pairs {
            let terms = unconventional_correlator(&rho, j, l)?;
            let it = if beta > 0.0 {
                let v = imaginary_time_correlator(&h, beta, j, l)?;
                worst = worst.max((v - terms.second_term).abs());
                sci(v)
            } else {
                String::new()
            };
            t.row([
                sci(beta),
                j.to_string(),
                l.to_string(),
                sci(terms.first_term),
                sci(terms.second_term),
                sci(terms.total),
                it,
            ])?;
        }
    }
    Ok((vec![t.finish()?], json!({ "max_imaginary_time_deviation": worst })))
}

fn ancilla(cfg: &ExperimentConfig, hash: &str, seed: u64) -> Result<Produced, ExperimentError> {
    let s = cfg.ancilla.as_ref().expect("validated");
    let rho = s.system().thermal(s.beta)?;
    let x = s.observable.operator(rho.basis())?;
    let rep = ancilla_sampled_estimate(&rho, &x, s.shots, seed, s.design)?;
    let exact = virtual_expectation_exact(&rho, &x, 2)?;
    let mut t = Table::new("ancilla.csv", hash);
    #[derive(Serialize)]
    struct Row {
        observable: String,
        design: String,
        shots: u64,
        seed: u64,
        p_plus: String,
        p_plus_se: String,
        x_rho1: String,
        x_rho1_se: String,
        x_rho: String,
        x_rho_se: String,
        estimate: String,
        estimate_se: String,
        exact: String,
    }
    t.serialize(&Row {
        observable: s.observable.label(),
        design: serde_json::to_value(rep.design)?
            .as_str()
            .unwrap_or_default()
            .to_string(),
        shots: rep.shots,
        seed: rep.seed,
        p_plus: sci(rep.p_plus),
        p_plus_se: sci(rep.p_plus_se),
        x_rho1: sci(rep.x_rho1),
        x_rho1_se: sci(rep.x_rho1_se),
        x_rho: sci(rep.x_rho),
        x_rho_se: sci(rep.x_rho_se),
        estimate: sci(rep.estimate),
        estimate_se: sci(rep.estimate_se),
        exact: sci(exact),
    })?;
    Ok((
        vec![t.finish()?],
        json!({ "z": (rep.estimate - exact) / rep.estimate_se }),
    ))
}

fn distillation(cfg: &ExperimentConfig, hash: &str) -> Result<Produced, ExperimentError> {
    let s = cfg.distill.as_ref().expect("validated");
    let rho = s.system().thermal(s.beta)?;
    let rep = distill(&rho, s.iterations)?;
    let mut t =
        Table::new("distill.csv", hash).header(&["iteration", "p_plus", "ground_fidelity", "largest_eigenvalue"])?;
    for step in &rep.steps {
        t.row([
            step.iteration.to_string(),
            sci(step.p_plus),
            sci(step.ground_fidelity),
            sci(step.largest_eigenvalue),
        ])?;
    }
    let last = rep.steps.last().expect("at least one iteration");
    Ok((
        vec![t.finish()?],
        json!({ "degenerate": rep.degenerate, "final_ground_fidelity": last.ground_fidelity }),
    ))
}

fn buffered(cfg: &ExperimentConfig, hash: &str) -> Result<Produced, ExperimentError> {
    let s = cfg.buffered.as_ref().expect("validated");
    let rho = s.system().thermal(s.beta)?;
    let mut t =
        Table::new("buffered.csv", hash).header(&["buffer_width", "buffer_sites", "approx", "exact", "error"])?;
    for &w in &s.widths {
        let e = buffered_estimate(&rho, &s.region, w, &s.observable)?;
        let sites: Vec<String> = e.buffer_sites.iter().map(|x| x.to_string()).collect();
        t.row([
            w.to_string(),
            sites.join(";"),
            sci(e.approx),
            sci(e.exact),
            sci(e.error),
        ])?;
    }
    Ok((vec![t.finish()?], json!({})))
}

fn scaling(cfg: &ExperimentConfig, hash: &str, workers: usize) -> Result<Produced, ExperimentError> {
    let rows = shots_scaling_study(&cfg.scaling_config(workers)?)?;
    let mut t = Table::new("scaling.csv", hash).header(&[
        "beta",
        "region_size",
        "purity",
        "sampled_purity",
        "shot_variance",
        "shots_needed",
    ])?;
    for r in &rows {
        t.row([
            sci(r.beta),
            r.region_size.to_string(),
            sci(r.purity),
            sci(r.sampled_purity),
            sci(r.shot_variance),
            sci(r.shots_needed),
        ])?;
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (1.0 / (r.purity * r.purity), r.shots_needed))
        .collect();
    let slope = if points.len() > 1 {
        Some(log_log_slope(&points))
    } else {
        None
    };
    Ok((vec![t.finish()?], json!({ "log_log_slope": slope })))
}

fn fig2(cfg: &ExperimentConfig, hash: &str, seed: u64, workers: usize) -> Result<Produced, ExperimentError> {
    let q = cfg.fig2.as_ref().expect("validated").quench_config(seed, workers)?;
    let rep = fig2_experiment(&q)?;
    let mut buf = format!("# config_sha256: {hash}\n").into_bytes();
    rep.write_csv(&mut buf)?;
    let main = OutputFile {
        name: "fig2.csv".into(),
        contents: buf,
    };
    let opt = |x: Option<f64>| x.map(sci).unwrap_or_default();
    let mut sites = Table::new("fig2_sites.csv", hash).header(&[
        "site",
        "raw_density",
        "vc_estimate",
        "vc_se",
        "vc_exact",
        "halfT_prediction",
        "T_over_J",
        "mu_over_J",
    ])?;
    for r in &rep.rows {
        sites.row([
            r.site.to_string(),
            sci(r.raw_density),
            opt(r.vc_estimate),
            opt(r.vc_se),
            sci(r.vc_exact),
            sci(r.ensemble.half_t_density),
            sci(r.ensemble.t_over_j),
            sci(r.ensemble.mu_over_j),
        ])?;
    }
    let mut entropy = Table::new("fig2_entropy.csv", hash).header(&["time", "renyi2_entropy"])?;
    for (t, s) in rep.thermalization.times.iter().zip(&rep.thermalization.entropies) {
        entropy.row([sci(*t), sci(*s)])?;
    }
    Ok((
        vec![main, sites.finish()?, entropy.finish()?],
        json!({
            "raw_density": rep.raw_density,
            "vc_estimate": rep.vc_estimate,
            "vc_se": rep.vc_se,
            "vc_exact": rep.vc_exact,
            "halfT_prediction": rep.ensemble.half_t_density,
            "T_over_J": rep.ensemble.t_over_j,
            "mu_over_J": rep.ensemble.mu_over_j,
            "entropy_saturated": rep.thermalization.saturated,
        }),
    ))
}

fn appendix2(cfg: &ExperimentConfig, hash: &str) -> Result<Produced, ExperimentError> {
    let params = cfg.appendix2.clone().unwrap_or_default();
    let table = appendix2_study(&params)?;
    let mut buf = format!("# config_sha256: {hash}\n").into_bytes();
    table.write_csv(&mut buf)?;
    Ok((
        vec![OutputFile {
            name: "appendix2.csv".into(),
            contents: buf,
        }],
        json!({
            "basis_dim": table.basis_dim,
            "runtime_seconds": table.runtime_seconds,
            "translation_deviation": table.translation_deviation,
            "disconnected": table.disconnected,
            "findings": table.findings(),
        }),
    ))
}
