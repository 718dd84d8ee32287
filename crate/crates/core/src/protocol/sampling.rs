use std::sync::Arc;

use num_complex::Complex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiagonalObservable, ProtocolError};
use crate::fock::Statistics;
use crate::linalg::CVector;
use crate::replica::{
    fermionic_fourier_op, fourier_op, phase_value, v_commutant_check, v_value_of_occupations, FourierTransform,
    ReplicaBasis,
};
use crate::thermal::DensityMatrix;

/// Probabilities of every joint occupation outcome after the Fourier
/// transform, `P(q) = ⟨q|F ρ^{⊗n} F†|q⟩`.
#[derive(Clone, Debug)]
pub struct OutcomeDistribution {
    replica: Arc<ReplicaBasis>,
    probs: Vec<f64>,
    region: Option<Vec<usize>>,
}

fn check_normalized(probs: &mut [f64]) -> Result<(), ProtocolError> {
    let mut total = 0.0;
    for p in probs.iter_mut() {
        if *p < -1e-10 {
            return Err(ProtocolError::Invalid(format!("negative outcome probability {p:e}")));
        }
        *p = p.max(0.0);
        total += *p;
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(ProtocolError::Invalid(format!(
            "outcome probabilities sum to {total}; the state is not normalized on the copy basis"
        )));
    }
    Ok(())
}

impl OutcomeDistribution {
    /// From a single-copy density matrix, using only the rows of `F` and the
    /// entries of `ρ` on the product subspace.
    pub fn from_density(rho: &DensityMatrix<f64>, replica: Arc<ReplicaBasis>) -> Result<Self, ProtocolError> {
        if **rho.basis() != **replica.copy_basis() {
            return Err(ProtocolError::Invalid("state is not on the copy basis".into()));
        }
        let f = match replica.statistics() {
            Statistics::Boson => fourier_op::<f64>(&replica)?,
            Statistics::Fermion => fermionic_fourier_op::<f64>(&replica)?,
        }
        .to_sparse();
        let (n, d) = (replica.copies(), replica.copy_basis().dim());
        let digits = |mut t: usize| -> Vec<usize> {
            let mut out = vec![0; n];
            for p in (0..n).rev() {
                out[p] = t % d;
                t /= d;
            }
            out
        };
        let tuples: Vec<Vec<usize>> = (0..replica.product_dim()).map(digits).collect();
        let m = rho.matrix();
        let mut probs = vec![0.0; replica.joint_basis().dim()];
        let mut row: Vec<(usize, Complex<f64>)> = Vec::new();
        for (q, pq) in probs.iter_mut().enumerate() {
            row.clear();
            row.extend(f.row(q).filter_map(|(c, a)| replica.joint_to_rank(c).map(|t| (t, a))));
            let mut acc = Complex::new(0.0, 0.0);
            for &(x, ax) in &row {
                for &(y, ay) in &row {
                    let mut w = ax * ay.conj();
                    for p in 0..n {
                        w *= m[(tuples[x][p], tuples[y][p])];
                    }
                    acc += w;
                }
            }
            *pq = acc.re;
        }
        check_normalized(&mut probs)?;
        Ok(Self {
            replica,
            probs,
            region: None,
        })
    }

    /// From a normalized single-copy pure state, `F (ψ ⊗ … ⊗ ψ)` applied by
    /// sparse column expansion.
    pub fn from_pure(psi: &CVector<f64>, replica: Arc<ReplicaBasis>) -> Result<Self, ProtocolError> {
        let d = replica.copy_basis().dim();
        if psi.len() != d {
            return Err(ProtocolError::Invalid(format!(
                "state of length {} on a {d}-dim copy",
                psi.len()
            )));
        }
        let n = replica.copies();
        let support: Vec<usize> = (0..d).filter(|&i| psi[i].norm_sqr() > 0.0).collect();
        if support.is_empty() {
            return Err(ProtocolError::Invalid("zero state vector".into()));
        }
        let count = support.len().pow(n as u32);
        let mut input = Vec::with_capacity(count);
        let mut tuple = vec![0usize; n];
        for mut t in 0..count {
            for p in (0..n).rev() {
                tuple[p] = support[t % support.len()];
                t /= support.len();
            }
            let amp = tuple.iter().fold(Complex::new(1.0, 0.0), |a, &i| a * psi[i]);
            input.push((replica.tuple_to_joint(&tuple), amp));
        }
        let out = match replica.statistics() {
            Statistics::Boson => FourierTransform::<f64>::new(&replica)?.apply_sparse(&input),
            Statistics::Fermion => {
                let mut x = CVector::from_element(replica.joint_basis().dim(), Complex::new(0.0, 0.0));
                for (j, a) in input {
                    x[j] = a;
                }
                fermionic_fourier_op::<f64>(&replica)?.apply(&x)
            }
        };
        let mut probs: Vec<f64> = out.iter().map(|z| z.norm_sqr()).collect();
        check_normalized(&mut probs)?;
        Ok(Self {
            replica,
            probs,
            region: None,
        })
    }

    /// Equal-weight mixture of outcome distributions on one replica basis,
    /// as produced by pooling shots over several input states.
    pub fn mixture(parts: &[OutcomeDistribution]) -> Result<Self, ProtocolError> {
        let first = parts
            .first()
            .ok_or_else(|| ProtocolError::Invalid("empty mixture".into()))?;
        let mut probs = vec![0.0; first.probs.len()];
        for d in parts {
            if !Arc::ptr_eq(&d.replica, &first.replica) && *d.replica.joint_basis() != *first.replica.joint_basis() {
                return Err(ProtocolError::Invalid(
                    "mixture parts live on different replica bases".into(),
                ));
            }
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += p;
            }
        }
        let w = 1.0 / parts.len() as f64;
        probs.iter_mut().for_each(|p| *p *= w);
        check_normalized(&mut probs)?;
        Ok(Self {
            replica: first.replica.clone(),
            probs,
            region: first.region.clone(),
        })
    }

    /// Restricts the phase (or `V`) readout to a subset of sites, so that
    /// the estimator targets the reduced state on that subset.
    pub fn with_region(mut self, sites: Vec<usize>) -> Result<Self, ProtocolError> {
        if sites.iter().any(|&s| s >= self.replica.sites()) {
            return Err(ProtocolError::Invalid("region site outside the copy".into()));
        }
        self.region = Some(sites);
        Ok(self)
    }

    pub fn replica(&self) -> &Arc<ReplicaBasis> {
        &self.replica
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn region(&self) -> Option<&[usize]> {
        self.region.as_deref()
    }

    fn readout(&self, q: usize) -> Complex<f64> {
        let rb = &self.replica;
        let occ = rb.joint_basis().state(q);
        match rb.statistics() {
            Statistics::Boson => phase_value(occ, rb.copies(), rb.sites(), self.region.as_deref()),
            Statistics::Fermion => Complex::new(
                v_value_of_occupations(occ, rb.sites(), self.region.as_deref()) as f64,
                0.0,
            ),
        }
    }

    fn check_observable(&self, obs: &DiagonalObservable) -> Result<(), ProtocolError> {
        obs.check_sampleable(self.replica.sites())?;
        if let Some(region) = &self.region {
            if obs.sites().iter().any(|s| !region.contains(s)) {
                return Err(ProtocolError::Invalid(
                    "observable reaches outside the measured region".into(),
                ));
            }
        }
        Ok(())
    }

    /// The ratio the sampled estimator converges to, summed exactly over
    /// outcomes.
    pub fn exact_ratio(&self, obs: &DiagonalObservable) -> Result<Complex<f64>, ProtocolError> {
        self.check_observable(obs)?;
        let rb = &self.replica;
        let (mut num, mut den) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        for (q, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let r = self.readout(q) * p;
            num += r * obs.joint_value(rb.joint_basis().state(q), rb.copies(), rb.sites());
            den += r;
        }
        Ok(num / den)
    }

    fn sampler(&self) -> Result<WeightedAliasIndex<f64>, ProtocolError> {
        WeightedAliasIndex::new(self.probs.clone()).map_err(|e| ProtocolError::Invalid(format!("sampler: {e}")))
    }

    /// Individual shots, for inspection and small runs.
    pub fn sample(&self, obs: &DiagonalObservable, shots: usize, seed: u64) -> Result<Vec<ShotRecord>, ProtocolError> {
        self.check_observable(obs)?;
        let alias = self.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rb = &self.replica;
        Ok((0..shots)
            .map(|_| {
                let q = alias.sample(&mut rng);
                let occ = rb.joint_basis().state(q);
                ShotRecord {
                    occupations: occ.to_vec(),
                    r_value: self.readout(q),
                    x_value: obs.joint_value(occ, rb.copies(), rb.sites()),
                    weight: 1.0,
                }
            })
            .collect())
    }
}

/// One projective readout of every occupation in every copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub occupations: Vec<u8>,
    pub r_value: Complex<f64>,
    pub x_value: f64,
    pub weight: f64,
}

/// Running sums of `v = (Re xr, Im xr, Re r, Im r)` and their products.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: [f64; 4],
    pub cross: [[f64; 4]; 4],
}

impl Moments {
    pub fn push(&mut self, x: f64, r: Complex<f64>) {
        let xr = r * x;
        let v = [xr.re, xr.im, r.re, r.im];
        self.count += 1;
        for a in 0..4 {
            self.sum[a] += v[a];
            for b in a..4 {
                self.cross[a][b] += v[a] * v[b];
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        for a in 0..4 {
            self.sum[a] += other.sum[a];
            for b in a..4 {
                self.cross[a][b] += other.cross[a][b];
            }
        }
    }

    pub fn means(&self) -> [f64; 4] {
        let n = self.count as f64;
        self.sum.map(|s| s / n)
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> [[f64; 4]; 4] {
        let n = self.count as f64;
        let m = self.means();
        let mut c = [[0.0; 4]; 4];
        if self.count < 2 {
            return c;
        }
        for a in 0..4 {
            for b in a..4 {
                let v = (self.cross[a][b] / n - m[a] * m[b]) * n / (n - 1.0);
                c[a][b] = v;
                c[b][a] = v;
            }
        }
        c
    }
}

/// Number of independent ChaCha streams a run's shots are divided over.
pub const SHOT_STREAMS: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    pub shots: u64,
    pub seed: u64,
    /// Threads used for sampling. Shots are always split over
    /// [`SHOT_STREAMS`] RNG streams, so results depend on the seed only.
    pub workers: usize,
}

impl SamplerOptions {
    pub fn new(shots: u64, seed: u64) -> Self {
        Self {
            shots,
            seed,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub observable: String,
    pub n: usize,
    pub beta: Option<f64>,
    pub shots: u64,
    pub seed: u64,
    pub workers: usize,
    pub numerator: f64,
    pub numerator_imag: f64,
    pub numerator_se: f64,
    pub denominator: f64,
    pub denominator_imag: f64,
    pub denominator_se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub ratio_imag: f64,
    pub ratio_imag_se: f64,
}

/// CSV row layout of an [`EstimateReport`].
#[derive(Clone, Debug, Serialize)]
pub struct EstimateRow {
    pub observable: String,
    pub n: usize,
    pub beta: Option<String>,
    pub shots: u64,
    pub seed: u64,
    pub numerator: String,
    pub numerator_se: String,
    pub denominator: String,
    pub denominator_se: String,
    pub ratio: String,
    pub ratio_se: String,
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

impl EstimateReport {
    pub fn from_moments(observable: String, n: usize, opts: SamplerOptions, m: &Moments) -> Self {
        let count = m.count as f64;
        let mean = m.means();
        let cov = m.covariance();
        let num = Complex::new(mean[0], mean[1]);
        let den = Complex::new(mean[2], mean[3]);
        let z = num / den;
        // influence of one shot on the ratio: (xr − z r)/⟨r⟩
        let w = Complex::new(1.0, 0.0) / den;
        let coeffs = [w, w * Complex::i(), -w * z, -w * z * Complex::i()];
        let var = |g: [f64; 4]| -> f64 {
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += g[a] * cov[a][b] * g[b];
                }
            }
            (s / count).max(0.0)
        };
        Self {
            observable,
            n,
            beta: None,
            shots: m.count,
            seed: opts.seed,
            workers: opts.workers,
            numerator: num.re,
            numerator_imag: num.im,
            numerator_se: (cov[0][0] / count).sqrt(),
            denominator: den.re,
            denominator_imag: den.im,
            denominator_se: (cov[2][2] / count).sqrt(),
            ratio: z.re,
            ratio_se: var(coeffs.map(|c| c.re)).sqrt(),
            ratio_imag: z.im,
            ratio_imag_se: var(coeffs.map(|c| c.im)).sqrt(),
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn row(&self) -> EstimateRow {
        EstimateRow {
            observable: self.observable.clone(),
            n: self.n,
            beta: self.beta.map(sci),
            shots: self.shots,
            seed: self.seed,
            numerator: sci(self.numerator),
            numerator_se: sci(self.numerator_se),
            denominator: sci(self.denominator),
            denominator_se: sci(self.denominator_se),
            ratio: sci(self.ratio),
            ratio_se: sci(self.ratio_se),
        }
    }

    /// `(ratio − reference)/ratio_se`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.ratio - reference) / self.ratio_se
    }
}

fn run_shots(
    dist: &OutcomeDistribution,
    obs: &DiagonalObservable,
    opts: SamplerOptions,
) -> Result<EstimateReport, ProtocolError> {
    if opts.shots == 0 {
        return Err(ProtocolError::Invalid("at least one shot is required".into()));
    }
    if opts.workers == 0 {
        return Err(ProtocolError::Invalid("at least one worker is required".into()));
    }
    dist.check_observable(obs)?;
    let rb = dist.replica();
    let alias = dist.sampler()?;
    // per-outcome readouts, evaluated once
    let values: Vec<(f64, Complex<f64>)> = (0..dist.probs.len())
        .map(|q| {
            if dist.probs[q] == 0.0 {
                return (0.0, Complex::new(0.0, 0.0));
            }
            let occ = rb.joint_basis().state(q);
            (obs.joint_value(occ, rb.copies(), rb.sites()), dist.readout(q))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| ProtocolError::Invalid(format!("thread pool: {e}")))?;
    let partials: Vec<Moments> = pool.install(|| {
        (0..SHOT_STREAMS)
            .into_par_iter()
            .map(|w| {
                let count = opts.shots / SHOT_STREAMS + u64::from(w < opts.shots % SHOT_STREAMS);
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(w);
                let mut m = Moments::default();
                for _ in 0..count {
                    let (x, r) = values[alias.sample(&mut rng)];
                    m.push(x, r);
                }
                m
            })
            .collect()
    });
    let mut total = Moments::default();
    for p in &partials {
        total.merge(p);
    }
    Ok(EstimateReport::from_moments(obs.label(), rb.copies(), opts, &total))
}

/// Shot-sampled `tr{X ρⁿ}/tr{ρⁿ}` from number readouts after the bosonic
/// Fourier transform. For `n > 2` the phase is complex; the report carries
/// the imaginary part of the ratio, which should vanish within its error.
pub fn interferometric_estimate(
    dist: &OutcomeDistribution,
    obs: &DiagonalObservable,
    opts: SamplerOptions,
) -> Result<EstimateReport, ProtocolError> {
    if dist.replica().statistics() != Statistics::Boson {
        return Err(ProtocolError::Invalid(
            "fermionic outcomes go through fermionic_estimate".into(),
        ));
    }
    run_shots(dist, obs, opts)
}

/// Two-copy fermionic estimator with `V` in place of the phase; the
/// symmetrized observable must commute with `V`.
pub fn fermionic_estimate(
    dist: &OutcomeDistribution,
    obs: &DiagonalObservable,
    opts: SamplerOptions,
) -> Result<EstimateReport, ProtocolError> {
    let rb = dist.replica();
    if rb.statistics() != Statistics::Fermion || rb.copies() != 2 {
        return Err(ProtocolError::Invalid(
            "fermionic_estimate needs two fermionic copies".into(),
        ));
    }
    dist.check_observable(obs)?;
    let report = v_commutant_check(&obs.fermion_polynomial(), rb)?;
    if !report.commutes {
        return Err(ProtocolError::NotCommutant(report.norm_of_commutator));
    }
    run_shots(dist, obs, opts)
}
