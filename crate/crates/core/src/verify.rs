//! The acceptance suite: twelve numbered checks run at desk scale, each
//! reported as pass/fail with a one-line detail.

use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::correlator::{appendix2_study, imaginary_time_correlator, unconventional_correlator, Appendix2Params};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::fock::{enumerate_basis, OpFlags, Operator, Sector, Statistics};
use crate::linalg::{random_density_matrix, random_hermitian, trace_distance, CMatrix};
use crate::model::{bose_hubbard, Boundary, ModelParams};
use crate::protocol::{
    ancilla_combine, ancilla_step, buffered_estimate, distill, interferometric_estimate, log_log_slope, sampled_target,
    shots_scaling_study, virtual_expectation_exact, DiagonalObservable, OutcomeDistribution, SamplerOptions,
    ScalingConfig,
};
use crate::quench::{fig2_experiment, DataSet, QuenchConfig};
use crate::replica::{measurement_operators, tensor_power, transformed_trace, verify_swap_identity_with, ReplicaBasis};
use crate::thermal::{matrix_power_state, purity, thermal_state, DensityMatrix};

/// Deliberate breakages used to confirm the suite can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Flip the sign of the bosonic phase operator `R`.
    PhaseSign,
    /// Drop the `ρ²` term from the ancilla channel's recombination.
    AncillaCombine,
}

impl FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "phase_sign" => Ok(Self::PhaseSign),
            "ancilla_combine" => Ok(Self::AncillaCombine),
            other => Err(format!("unknown mutation `{other}` (phase_sign, ancilla_combine)")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub mutation: Option<Mutation>,
    pub workers: usize,
    /// Run only these criteria (1-based); empty means all.
    pub only: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {} ({:.1} s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

type Outcome = Result<(bool, String), String>;

struct Ctx {
    mutation: Option<Mutation>,
    workers: usize,
}

const CRITERIA: [(&str, fn(&Ctx) -> Outcome); 12] = [
    ("replica identity", replica_identity),
    ("purity identity", purity_identity),
    ("master-oracle equivalence", master_oracle),
    ("thermal halving", thermal_halving),
    ("ancilla exactness", ancilla_exactness),
    ("distillation", distillation),
    ("imaginary-time identity", imaginary_time),
    ("long-range correlator study", correlator_study),
    ("quench density analogue", quench_density),
    ("shot scaling", shot_scaling),
    ("buffering", buffering),
    ("determinism", determinism),
];

/// Runs the selected criteria in order, calling `report` as each finishes.
pub fn run_suite<F: FnMut(&CriterionResult)>(opts: &VerifyOptions, mut report: F) -> Vec<CriterionResult> {
    let ctx = Ctx {
        mutation: opts.mutation,
        workers: opts.workers.max(1),
    };
    let mut out = Vec::new();
    for (i, (name, check)) in CRITERIA.iter().enumerate() {
        let id = i + 1;
        if !opts.only.is_empty() && !opts.only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (passed, detail) = match check(&ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let r = CriterionResult {
            id,
            name,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        report(&r);
        out.push(r);
    }
    out
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn boson_replica(l: usize, n: usize, copies: usize) -> Result<ReplicaBasis, String> {
    let copy = enumerate_basis(Statistics::Boson, l, Sector::Fixed(n)).map_err(err)?;
    ReplicaBasis::new(copy, copies).map_err(err)
}

fn bh_thermal(l: usize, n: usize, u: f64, beta: f64) -> Result<(Operator<f64>, DensityMatrix<f64>), String> {
    let b = enumerate_basis(Statistics::Boson, l, Sector::Fixed(n)).map_err(err)?;
    let h = bose_hubbard::<f64>(&b, &ModelParams::new(l, 1.0, u, Boundary::Open)).map_err(err)?;
    let rho = thermal_state(&h, beta).map_err(err)?;
    Ok((h, rho))
}

fn flip(ctx: &Ctx) -> impl Fn(Operator<f64>) -> Operator<f64> + '_ {
    move |r| match ctx.mutation {
        Some(Mutation::PhaseSign) => r.scale(Complex::new(-1.0, 0.0)),
        _ => r,
    }
}

fn replica_identity(ctx: &Ctx) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let grid = (1..=3)
        .flat_map(|l| (0..=3).map(move |n| (2, l, n)))
        .chain((1..=2).flat_map(|l| (0..=2).map(move |n| (3, l, n))));
    for (copies, l, n) in grid {
        let rb = boson_replica(l, n, copies)?;
        let rep = verify_swap_identity_with(&rb, flip(ctx)).map_err(err)?;
        worst = worst.max(rep.deviation);
        cases += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst < 1e-9 && secs < 10.0,
        format!("max |S - F†RF| = {worst:.2e} over {cases} sectors in {secs:.2} s"),
    ))
}

fn purity_identity(ctx: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: [f64; 2] = [0.0; 2];
    let sectors: [(Statistics, &[(usize, usize)]); 2] = [
        (Statistics::Boson, &[(2, 1), (2, 2), (3, 1), (3, 2), (2, 3), (3, 3)]),
        (
            Statistics::Fermion,
            &[(2, 1), (3, 1), (3, 2), (4, 1), (4, 2), (4, 3), (5, 2)],
        ),
    ];
    let mut count = 0;
    for (k, (stats, list)) in sectors.iter().enumerate() {
        for &(l, n) in list.iter() {
            let copy = enumerate_basis(*stats, l, Sector::Fixed(n)).map_err(err)?;
            let rb = ReplicaBasis::new(copy.clone(), 2).map_err(err)?;
            let (f, m) = measurement_operators::<f64>(&rb).map_err(err)?;
            let m = if *stats == Statistics::Boson { flip(ctx)(m) } else { m };
            for _ in 0..50 {
                let rho = DensityMatrix::new(copy.clone(), random_density_matrix(copy.dim(), &mut rng)).map_err(err)?;
                let joint = tensor_power(&rho, &rb).map_err(err)?;
                let got = transformed_trace(joint.matrix(), &f, &m);
                worst[k] = worst[k].max((got - purity(&rho, 2)).norm());
                count += 1;
            }
        }
    }
    Ok((
        worst[0] < 1e-10 && worst[1] < 1e-10,
        format!(
            "{count} states; bosonic max deviation {:.2e}, fermionic (V) {:.2e}",
            worst[0], worst[1]
        ),
    ))
}

fn master_oracle(ctx: &Ctx) -> Outcome {
    let observables = [
        DiagonalObservable::Density { site: 1 },
        DiagonalObservable::DensityDensity { first: 0, second: 2 },
    ];
    let (mut worst_z, mut worst_mean, mut worst_tail) = (0.0f64, 0.0f64, 0.0f64);
    let mut ok = true;
    let mut notes = Vec::new();
    for (bi, &beta) in [0.1, 0.5, 2.0].iter().enumerate() {
        let (_, rho) = bh_thermal(4, 2, 2.0, beta)?;
        let rb = Arc::new(ReplicaBasis::new(rho.basis().clone(), 2).map_err(err)?);
        let dist = OutcomeDistribution::from_density(&rho, rb.clone()).map_err(err)?;
        for (oi, obs) in observables.iter().enumerate() {
            // densities: the virtual expectation itself; n_j n_l: its
            // number-diagonal measurable part
            let oracle = match obs {
                DiagonalObservable::Density { .. } => {
                    virtual_expectation_exact(&rho, &obs.operator(rho.basis()).map_err(err)?, 2).map_err(err)?
                }
                _ => sampled_target(&rho, obs, &rb).map_err(err)?,
            };
            let base = 1_000_000 + 1000 * (bi as u64 * 2 + oi as u64);
            let mut zs = Vec::with_capacity(100);
            for s in 0..100 {
                let opts = SamplerOptions {
                    shots: 1_000_000,
                    seed: base + s,
                    workers: ctx.workers,
                };
                zs.push(interferometric_estimate(&dist, obs, opts).map_err(err)?.z_score(oracle));
            }
            let mean = zs.iter().sum::<f64>() / zs.len() as f64;
            let tail = zs.iter().filter(|z| z.abs() > 2.0).count() as f64 / zs.len() as f64;
            worst_z = worst_z.max(zs[0].abs());
            worst_mean = worst_mean.max(mean.abs());
            worst_tail = worst_tail.max(tail);
            let pass = zs[0].abs() < 3.0 && mean.abs() < 0.3 && tail < 0.1;
            ok &= pass;
            if !pass {
                notes.push(format!(
                    "{} at beta {beta}: z0 {:.2}, mean {mean:.2}, tail {tail:.2}",
                    obs.label(),
                    zs[0]
                ));
            }
        }
    }
    Ok((
        ok,
        if notes.is_empty() {
            format!(
                "6 (beta, X) cases x 100 seeds at 1e6 shots; max first-seed |z| {worst_z:.2}, max |mean z| {worst_mean:.2}, max |z|>2 fraction {worst_tail:.2}"
            )
        } else {
            notes.join("; ")
        },
    ))
}

fn random_h(rng: &mut ChaCha8Rng, l: usize, n: usize) -> Result<Operator<f64>, String> {
    let b = enumerate_basis(Statistics::Boson, l, Sector::Fixed(n)).map_err(err)?;
    let m = random_hermitian(b.dim(), rng);
    Ok(Operator::from_dense(b.clone(), b, m, OpFlags::HERMITIAN))
}

const RANDOM_SECTORS: [(usize, usize); 5] = [(3, 2), (4, 3), (4, 4), (6, 3), (5, 4)];

fn thermal_halving(_: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (l, n) = RANDOM_SECTORS[k % RANDOM_SECTORS.len()];
        let h = random_h(&mut rng, l, n)?;
        let beta = rng.random_range(0.05..2.0);
        let halved = matrix_power_state(&thermal_state(&h, beta).map_err(err)?, 2).map_err(err)?;
        let cold = thermal_state(&h, 2.0 * beta).map_err(err)?;
        worst = worst.max(trace_distance(halved.matrix(), cold.matrix()));
    }
    Ok((
        worst < 1e-9,
        format!("max trace distance {worst:.2e} over 20 random H (dim <= 70)"),
    ))
}

fn ancilla_exactness(ctx: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_x, mut worst_p, mut min_p) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let d = rng.random_range(2..=30);
        let b = enumerate_basis(Statistics::Boson, 1, Sector::Cutoff(d - 1)).map_err(err)?;
        let rho = DensityMatrix::new(b.clone(), random_density_matrix(d, &mut rng)).map_err(err)?;
        let x = Operator::from_dense(b.clone(), b, random_hermitian(d, &mut rng), OpFlags::HERMITIAN);
        let (rho1, p) = ancilla_step(&rho).map_err(err)?;
        let x1 = rho1.expectation(&x).re;
        let x0 = rho.expectation(&x).re;
        let est = match ctx.mutation {
            Some(Mutation::AncillaCombine) => x1,
            _ => ancilla_combine(x1, x0, p).map_err(err)?,
        };
        let exact = virtual_expectation_exact(&rho, &x, 2).map_err(err)?;
        worst_x = worst_x.max((est - exact).abs());
        worst_p = worst_p.max((p - (1.0 + purity(&rho, 2)) / 2.0).abs());
        min_p = min_p.min(p);
    }
    Ok((
        worst_x < 1e-10 && worst_p < 1e-12 && min_p > 0.5,
        format!("recombination error {worst_x:.2e}, p+ error {worst_p:.2e}, min p+ {min_p:.4}"),
    ))
}

fn distillation(_: &Ctx) -> Outcome {
    let (_, rho) = bh_thermal(4, 2, 2.0, 0.5)?;
    let rep = distill(&rho, 12).map_err(err)?;
    let mut f_prev = rho.eigen().values.last().copied().unwrap_or(0.0);
    let mut p_prev = 0.5;
    let (mut increasing, mut nondecreasing) = (true, true);
    let mut reached = None;
    for s in &rep.steps {
        increasing &= s.ground_fidelity > f_prev;
        nondecreasing &= s.p_plus >= p_prev;
        if reached.is_none() && s.ground_fidelity > 0.99 {
            reached = Some(s.iteration);
        }
        f_prev = s.ground_fidelity;
        p_prev = s.p_plus;
    }

    let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(1)).map_err(err)?;
    let two = DensityMatrix::new(
        b,
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex::new(0.6, 0.0),
            Complex::new(0.4, 0.0),
        ])),
    )
    .map_err(err)?;
    let mut lam = [0.6f64, 0.4];
    let mut scalar_err: f64 = 0.0;
    for s in &distill(&two, 8).map_err(err)?.steps {
        let z: f64 = lam.iter().map(|x| x * x).sum();
        lam = lam.map(|x| (x + x * x) / (1.0 + z));
        scalar_err = scalar_err.max((s.largest_eigenvalue - lam[0]).abs());
    }
    Ok((
        increasing && nondecreasing && reached.is_some() && scalar_err < 1e-12,
        format!(
            "fidelity 0.99 reached at step {}, final {:.6}; monotone {increasing}/{nondecreasing}; two-level error {scalar_err:.1e}",
            reached.map_or("never".to_string(), |k| k.to_string()),
            f_prev
        ),
    ))
}

fn imaginary_time(_: &Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (l, n) = RANDOM_SECTORS[k % RANDOM_SECTORS.len()];
        let h = random_h(&mut rng, l, n)?;
        let beta = rng.random_range(0.1..3.0);
        let rho = thermal_state(&h, beta).map_err(err)?;
        let (j, m) = (rng.random_range(0..l), rng.random_range(0..l));
        let terms = unconventional_correlator(&rho, j, m).map_err(err)?;
        let it = imaginary_time_correlator(&h, beta, j, m).map_err(err)?;
        worst = worst.max((terms.second_term - it).abs());
    }
    Ok((worst < 1e-9, format!("max deviation {worst:.2e} over 20 random H")))
}

fn correlator_study(_: &Ctx) -> Outcome {
    let table = appendix2_study(&Appendix2Params::default()).map_err(err)?;
    let f = table.findings();
    let coldest = f.range_ratios.last().map(|r| r.1).unwrap_or(f64::NAN);
    let ratios: Vec<String> = f.range_ratios.iter().map(|(t, r)| format!("T={t}: {r:.3}")).collect();
    Ok((
        coldest < 0.2 && f.ratio_shrinks_with_t && table.runtime_seconds < 1800.0,
        format!(
            "dim {}, range ratios [{}], {:.0} s",
            table.basis_dim,
            ratios.join(", "),
            table.runtime_seconds
        ),
    ))
}

fn quench_density(ctx: &Ctx) -> Outcome {
    let mut cfg = QuenchConfig::preset(DataSet::A);
    cfg.shots = 100_000;
    cfg.workers = ctx.workers;
    let rep = fig2_experiment(&cfg).map_err(err)?;
    let mut within = true;
    let (mut dev_vc, mut dev_raw) = (0.0, 0.0);
    for r in &rep.rows {
        let (est, se) = (r.vc_estimate.unwrap_or(f64::NAN), r.vc_se.unwrap_or(f64::NAN));
        within &= (est - r.vc_exact).abs() < 3.0 * se;
        dev_vc += (est - r.ensemble.half_t_density).abs();
        dev_raw += (r.raw_density - r.ensemble.half_t_density).abs();
    }
    let k = rep.rows.len() as f64;
    Ok((
        within && dev_vc < dev_raw,
        format!(
            "sites {:?}: raw {:.3}, cooled {:.3} ± {:.3} (exact {:.3}), half-T {:.3}; mean |cooled - half-T| {:.3} vs |raw - half-T| {:.3}",
            cfg.subsystem_sites(),
            rep.raw_density,
            rep.vc_estimate.unwrap_or(f64::NAN),
            rep.vc_se.unwrap_or(f64::NAN),
            rep.vc_exact,
            rep.ensemble.half_t_density,
            dev_vc / k,
            dev_raw / k
        ),
    ))
}

fn shot_scaling(ctx: &Ctx) -> Outcome {
    let cfg = ScalingConfig {
        model: ModelParams::new(6, 1.0, 2.0, Boundary::Open),
        particles: 3,
        betas: vec![0.2, 0.5, 1.0],
        region_sizes: vec![1, 2, 3],
        target_precision: 0.05,
        pilot_shots: 40_000,
        seed: 5,
        workers: ctx.workers,
    };
    let rows = shots_scaling_study(&cfg).map_err(err)?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (1.0 / (r.purity * r.purity), r.shots_needed))
        .collect();
    let slope = log_log_slope(&pts);
    Ok((
        (slope - 1.0).abs() < 0.15,
        format!("slope {slope:.3} over {} grid points", pts.len()),
    ))
}

fn buffering(_: &Ctx) -> Outcome {
    let (_, rho) = bh_thermal(8, 3, 2.0, 1.0)?;
    let region = [2, 3, 4];
    let obs = DiagonalObservable::Density { site: 3 };
    let e0 = buffered_estimate(&rho, &region, 0, &obs).map_err(err)?;
    let e2 = buffered_estimate(&rho, &region, 2, &obs).map_err(err)?;
    Ok((
        e2.error < e0.error,
        format!(
            "R = {region:?}, error {:.3e} at width 0, {:.3e} at width 2",
            e0.error, e2.error
        ),
    ))
}

const DETERMINISM_CONFIGS: [&str; 2] = [
    r#"
kind = "virtual_density"
seed = 99

[virtual_density]
model = { sites = 4, J = 1.0, U = 2.0 }
particles = 2
betas = [0.5, 1.0]
observables = [{ kind = "density", site = 1 }, { kind = "density_density", first = 0, second = 2 }]
shots = 200000
"#,
    r#"
kind = "ancilla"
seed = 3

[ancilla]
model = { sites = 3, J = 1.0, U = 1.0 }
particles = 2
beta = 0.7
observable = { kind = "density", site = 0 }
shots = 50000
"#,
];

fn determinism(ctx: &Ctx) -> Outcome {
    let mut files = 0;
    for text in DETERMINISM_CONFIGS {
        let cfg = ExperimentConfig::from_toml(text).map_err(err)?;
        let a = run_experiment(&cfg, 1).map_err(err)?;
        let b = run_experiment(&cfg, ctx.workers.max(2)).map_err(err)?;
        if a.files != b.files {
            return Ok((false, format!("{} outputs differ between runs", cfg.kind.name())));
        }
        files += a.files.len();
    }
    Ok((
        true,
        format!("{files} CSV files byte-identical across repeated runs and worker counts"),
    ))
}
