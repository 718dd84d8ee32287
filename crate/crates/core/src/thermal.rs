//! Thermal and grand-canonical density matrices, purities, Rényi entropies,
//! reduced states and effective-ensemble fitting.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

use crate::fock::{FockBasis, FockError, Operator, Sector, Statistics};
use crate::linalg::{self, hermitian_eigen, CMatrix, HermitianEigen};
use crate::scalar::{cabs, cr, czero, Real};

/// Tolerance for density-matrix validity checks.
pub const STATE_TOLERANCE: f64 = 1e-10;

/// Upper end of the inverse-temperature search range.
pub const BETA_MAX: f64 = 1e3;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("H and N do not commute (deviation {0:e})")]
    NotCommuting(f64),
    #[error("number operator must be diagonal in the occupation basis")]
    NumberNotDiagonal,
    #[error("invalid density matrix: {0}")]
    Invalid(String),
    #[error("tr(rho^{n}) = {value:e} is numerically zero")]
    VanishingPurity { n: u32, value: f64 },
    #[error("no ensemble reproduces the targets: {0}")]
    Infeasible(String),
    #[error("fit did not converge after {iterations} iterations (beta {beta}, mu {mu}, residuals {residual_e:e}, {residual_n:e})")]
    NotConverged {
        iterations: usize,
        beta: f64,
        mu: f64,
        residual_e: f64,
        residual_n: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Where a thermal state came from.
#[derive(Clone, Debug)]
pub struct Provenance<T: Real> {
    pub beta: T,
    /// Chemical potential for grand-canonical states.
    pub mu: Option<T>,
    pub hamiltonian: Option<Arc<Operator<T>>>,
}

/// Hermitian, positive semidefinite, unit-trace matrix on a Fock basis.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T: Real> {
    basis: Arc<FockBasis>,
    matrix: CMatrix<T>,
    provenance: Option<Provenance<T>>,
    spectrum: Option<Arc<HermitianEigen<T>>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates trace, hermiticity and positivity to [`STATE_TOLERANCE`].
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix<T>) -> Result<Self, ThermalError> {
        let rho = Self::from_parts(basis, matrix, None, None);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts(
        basis: Arc<FockBasis>,
        matrix: CMatrix<T>,
        provenance: Option<Provenance<T>>,
        spectrum: Option<Arc<HermitianEigen<T>>>,
    ) -> Self {
        assert_eq!(matrix.shape(), (basis.dim(), basis.dim()));
        Self {
            basis,
            matrix,
            provenance,
            spectrum,
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn from_pure(basis: Arc<FockBasis>, psi: &DVector<Complex<T>>) -> Result<Self, ThermalError> {
        let norm = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if (norm - T::one()).abs() > T::lit(STATE_TOLERANCE) {
            return Err(ThermalError::Invalid(format!(
                "state norm² {} ≠ 1",
                norm.to_f64_lossy()
            )));
        }
        let m = psi * psi.adjoint();
        Ok(Self::from_parts(basis, m, None, None))
    }

    pub fn maximally_mixed(basis: Arc<FockBasis>) -> Self {
        let d = basis.dim();
        let m = CMatrix::identity(d, d).map(|z: Complex<T>| z / cr(T::count(d)));
        Self::from_parts(basis, m, None, None)
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let tol = T::lit(STATE_TOLERANCE);
        let tr = linalg::trace(&self.matrix);
        if cabs(tr - cr(T::one())) > tol {
            return Err(ThermalError::Invalid(format!("trace {} ≠ 1", tr.re.to_f64_lossy())));
        }
        let herm = linalg::hermitian_deviation(&self.matrix);
        if herm > tol {
            return Err(ThermalError::Invalid(format!(
                "not Hermitian ({:e})",
                herm.to_f64_lossy()
            )));
        }
        let min = self.eigen().values.first().copied().unwrap_or(T::zero());
        if min < -tol {
            return Err(ThermalError::Invalid(format!(
                "negative eigenvalue {:e}",
                min.to_f64_lossy()
            )));
        }
        Ok(())
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn provenance(&self) -> Option<&Provenance<T>> {
        self.provenance.as_ref()
    }

    pub fn with_provenance(mut self, p: Provenance<T>) -> Self {
        self.provenance = Some(p);
        self
    }

    /// Eigendecomposition, cached for thermal states.
    pub fn eigen(&self) -> Arc<HermitianEigen<T>> {
        match &self.spectrum {
            Some(s) => s.clone(),
            None => Arc::new(hermitian_eigen(&self.matrix)),
        }
    }

    /// `tr{X ρ}`.
    pub fn expectation(&self, x: &Operator<T>) -> Complex<T> {
        assert_eq!(x.shape(), (self.dim(), self.dim()));
        match x.storage() {
            crate::fock::Storage::Dense(m) => linalg::trace_product(m, &self.matrix),
            crate::fock::Storage::Sparse(m) => m
                .triplets()
                .fold(czero(), |acc, (r, c, v)| acc + v * self.matrix[(c, r)]),
        }
    }

    /// Diagonal of ρ in the occupation basis.
    pub fn populations(&self) -> Vec<T> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

fn weights_from_energies<T: Real>(energies: &[T], beta: T) -> (Vec<T>, T) {
    let e0 = energies
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a });
    let w: Vec<T> = energies.iter().map(|&e| (-(beta * (e - e0))).exp()).collect();
    let z = w.iter().copied().fold(T::zero(), |a, b| a + b);
    (w, z)
}

fn check_hermitian<T: Real>(h: &Operator<T>) -> Result<(), ThermalError> {
    let dev = h.hermitian_deviation();
    if dev > T::lit(STATE_TOLERANCE) {
        return Err(ThermalError::NotHermitian(dev.to_f64_lossy()));
    }
    Ok(())
}

/// `ρ = e^{−βH}/Z` via eigendecomposition with the ground energy shifted out.
pub fn thermal_state<T: Real>(h: &Operator<T>, beta: T) -> Result<DensityMatrix<T>, ThermalError> {
    check_hermitian(h)?;
    if beta < T::zero() || !beta.is_finite() {
        return Err(ThermalError::Invalid(format!(
            "beta {} must be finite and ≥ 0",
            beta.to_f64_lossy()
        )));
    }
    let eig = hermitian_eigen(&h.to_dense());
    let (w, z) = weights_from_energies(&eig.values, beta);
    let weights: Vec<Complex<T>> = w.iter().map(|&x| cr(x / z)).collect();
    let m = eig.reconstruct(&weights);
    // weights fall with energy; reverse so the cached spectrum stays ascending
    let d = w.len();
    let rho_eig = HermitianEigen {
        values: w.iter().rev().map(|&x| x / z).collect(),
        vectors: CMatrix::from_fn(d, d, |i, j| eig.vectors[(i, d - 1 - j)]),
        real: eig.real,
    };
    Ok(DensityMatrix::from_parts(
        h.rows().clone(),
        hermitianize(m),
        Some(Provenance {
            beta,
            mu: None,
            hamiltonian: Some(Arc::new(h.clone())),
        }),
        Some(Arc::new(rho_eig)),
    ))
}

fn hermitianize<T: Real>(m: CMatrix<T>) -> CMatrix<T> {
    let half = cr(T::lit(0.5));
    (&m + m.adjoint()).map(|z| z * half)
}

/// Joint eigenbasis of `H` and a diagonal number operator, block by block.
#[derive(Clone, Debug)]
pub struct GrandCanonicalSpectrum<T: Real> {
    pub energies: Vec<T>,
    pub numbers: Vec<T>,
    blocks: Vec<(Vec<usize>, HermitianEigen<T>)>,
    basis: Arc<FockBasis>,
    hamiltonian: Arc<Operator<T>>,
}

impl<T: Real> GrandCanonicalSpectrum<T> {
    pub fn new(h: &Operator<T>, n_op: &Operator<T>) -> Result<Self, ThermalError> {
        check_hermitian(h)?;
        if n_op.off_diagonal_mass() > T::zero() {
            return Err(ThermalError::NumberNotDiagonal);
        }
        let comm = h.commutator(n_op)?.max_abs();
        if comm > T::lit(STATE_TOLERANCE) {
            return Err(ThermalError::NotCommuting(comm.to_f64_lossy()));
        }
        let diag = n_op.diagonal_values();
        let mut groups: Vec<(T, Vec<usize>)> = Vec::new();
        for (i, v) in diag.iter().enumerate() {
            match groups.iter_mut().find(|(n, _)| (*n - v.re).abs() < T::lit(1e-9)) {
                Some((_, idx)) => idx.push(i),
                None => groups.push((v.re, vec![i])),
            }
        }
        let dense = h.to_dense();
        let mut energies = Vec::new();
        let mut numbers = Vec::new();
        let mut blocks = Vec::new();
        for (n, idx) in groups {
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| dense[(idx[a], idx[b])]);
            let eig = hermitian_eigen(&sub);
            energies.extend(eig.values.iter().copied());
            numbers.extend(std::iter::repeat_n(n, idx.len()));
            blocks.push((idx, eig));
        }
        Ok(Self {
            energies,
            numbers,
            blocks,
            basis: h.rows().clone(),
            hamiltonian: Arc::new(h.clone()),
        })
    }

    /// Normalized Boltzmann weights of every joint eigenstate at `(β, ν = βμ)`.
    fn probabilities(&self, beta: T, nu: T) -> Vec<T> {
        let exps: Vec<T> = self
            .energies
            .iter()
            .zip(&self.numbers)
            .map(|(&e, &n)| -(beta * e) + nu * n)
            .collect();
        let max = exps
            .iter()
            .copied()
            .fold(T::min_value().unwrap(), |a, b| if b > a { b } else { a });
        let w: Vec<T> = exps.iter().map(|&x| (x - max).exp()).collect();
        let z = w.iter().copied().fold(T::zero(), |a, b| a + b);
        w.into_iter().map(|x| x / z).collect()
    }

    /// Mean energy, mean number, Var(E), Cov(E,N), Var(N) at `(β, ν)`.
    pub fn moments(&self, beta: T, nu: T) -> [T; 5] {
        let p = self.probabilities(beta, nu);
        let mut m = [T::zero(); 5];
        for ((&pk, &e), &n) in p.iter().zip(&self.energies).zip(&self.numbers) {
            m[0] += pk * e;
            m[1] += pk * n;
        }
        for ((&pk, &e), &n) in p.iter().zip(&self.energies).zip(&self.numbers) {
            let de = e - m[0];
            let dn = n - m[1];
            m[2] += pk * de * de;
            m[3] += pk * de * dn;
            m[4] += pk * dn * dn;
        }
        m
    }

    pub fn state(&self, beta: T, mu: T) -> DensityMatrix<T> {
        let p = self.probabilities(beta, beta * mu);
        let d = self.basis.dim();
        let mut m = CMatrix::from_element(d, d, czero());
        let mut values = Vec::with_capacity(d);
        let mut vectors = CMatrix::from_element(d, d, czero());
        let mut offset = 0;
        for (idx, eig) in &self.blocks {
            let k = idx.len();
            let w: Vec<Complex<T>> = p[offset..offset + k].iter().map(|&x| cr(x)).collect();
            let block = eig.reconstruct(&w);
            for a in 0..k {
                for b in 0..k {
                    m[(idx[a], idx[b])] = block[(a, b)];
                }
                for b in 0..k {
                    vectors[(idx[b], offset + a)] = eig.vectors[(b, a)];
                }
                values.push(p[offset + a]);
            }
            offset += k;
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite weights"));
        let spectrum = HermitianEigen {
            values: order.iter().map(|&k| values[k]).collect(),
            vectors: CMatrix::from_fn(d, d, |i, j| vectors[(i, order[j])]),
            real: self.blocks.iter().all(|(_, e)| e.real),
        };
        DensityMatrix::from_parts(
            self.basis.clone(),
            hermitianize(m),
            Some(Provenance {
                beta,
                mu: Some(mu),
                hamiltonian: Some(self.hamiltonian.clone()),
            }),
            Some(Arc::new(spectrum)),
        )
    }

    pub fn ground_energy(&self) -> T {
        self.energies
            .iter()
            .copied()
            .fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a })
    }
}

/// `ρ ∝ e^{−β(H − μN)}` for a number-conserving `H`.
pub fn grand_canonical_state<T: Real>(
    h: &Operator<T>,
    n_op: &Operator<T>,
    beta: T,
    mu: T,
) -> Result<DensityMatrix<T>, ThermalError> {
    Ok(GrandCanonicalSpectrum::new(h, n_op)?.state(beta, mu))
}

/// `ρⁿ / tr{ρⁿ}`; thermal provenance is carried over with `β → nβ`.
pub fn matrix_power_state<T: Real>(rho: &DensityMatrix<T>, n: u32) -> Result<DensityMatrix<T>, ThermalError> {
    if n == 0 {
        return Err(ThermalError::Invalid("power must be at least 1".into()));
    }
    if n == 1 {
        return Ok(rho.clone());
    }
    let eig = rho.eigen();
    let powered: Vec<T> = eig.values.iter().map(|&l| l.powi(n as i32)).collect();
    let z = powered.iter().copied().fold(T::zero(), |a, b| a + b);
    if z.to_f64_lossy() < 1e-300 {
        return Err(ThermalError::VanishingPurity {
            n,
            value: z.to_f64_lossy(),
        });
    }
    let weights: Vec<Complex<T>> = powered.iter().map(|&x| cr(x / z)).collect();
    let m = hermitianize(eig.reconstruct(&weights));
    let provenance = rho.provenance().map(|p| Provenance {
        beta: p.beta * T::count(n as usize),
        mu: p.mu,
        hamiltonian: p.hamiltonian.clone(),
    });
    let spectrum = HermitianEigen {
        values: powered.iter().map(|&x| x / z).collect(),
        vectors: eig.vectors.clone(),
        real: eig.real,
    };
    Ok(DensityMatrix::from_parts(
        rho.basis().clone(),
        m,
        provenance,
        Some(Arc::new(spectrum)),
    ))
}

/// `tr{ρⁿ}`.
pub fn purity<T: Real>(rho: &DensityMatrix<T>, n: u32) -> T {
    if n == 2 {
        return rho.matrix().iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    }
    rho.eigen()
        .values
        .iter()
        .fold(T::zero(), |a, &l| a + l.max(T::zero()).powi(n as i32))
}

/// Rényi entropy `S_n = ln(tr{ρⁿ})/(1−n)`.
pub fn renyi_entropy<T: Real>(rho: &DensityMatrix<T>, n: u32) -> T {
    assert!(n >= 2, "Rényi index must be at least 2");
    let z = purity(rho, n);
    z.ln() / (T::one() - T::count(n as usize))
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub beta_max: f64,
    pub initial_beta: f64,
    pub initial_mu: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            beta_max: BETA_MAX,
            initial_beta: 1.0,
            initial_mu: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleFit<T: Real> {
    pub beta: T,
    pub mu: T,
    pub iterations: usize,
    pub residual_e: T,
    pub residual_n: T,
}

/// Solves `tr{Hρ} = E`, `tr{Nρ} = N` for the grand-canonical `(β, μ)`.
///
/// Newton iteration runs in `(β, ν = βμ)`, where the Jacobian is the
/// energy/number covariance matrix; steps are halved while the residual
/// grows. When `β = 0` the chemical potential is not identifiable from `ν`
/// alone and `μ = 0` is reported.
pub fn fit_effective_ensemble<T: Real>(
    spectrum: &GrandCanonicalSpectrum<T>,
    e_target: T,
    n_target: T,
    opts: FitOptions,
) -> Result<EnsembleFit<T>, ThermalError> {
    let tol = T::lit(opts.tolerance);
    let e0 = spectrum.ground_energy();
    if e_target < e0 - tol {
        return Err(ThermalError::Infeasible(format!(
            "energy target {} lies below the ground energy {}",
            e_target.to_f64_lossy(),
            e0.to_f64_lossy()
        )));
    }
    let n_lo = spectrum
        .numbers
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a });
    let n_hi = spectrum
        .numbers
        .iter()
        .copied()
        .fold(T::min_value().unwrap(), |a, b| if b > a { b } else { a });
    if n_target < n_lo - tol || n_target > n_hi + tol {
        return Err(ThermalError::Infeasible(format!(
            "number target {} outside [{}, {}]",
            n_target.to_f64_lossy(),
            n_lo.to_f64_lossy(),
            n_hi.to_f64_lossy()
        )));
    }
    let single_sector = n_hi - n_lo < T::lit(1e-9);
    let beta_max = T::lit(opts.beta_max);
    let mut beta = T::lit(opts.initial_beta);
    let mut nu = beta * T::lit(opts.initial_mu);
    let residual = |b: T, v: T| {
        let m = spectrum.moments(b, v);
        (
            m[0] - e_target,
            if single_sector { T::zero() } else { m[1] - n_target },
            m,
        )
    };
    let (mut re, mut rn, mut m) = residual(beta, nu);
    for it in 0..opts.max_iterations {
        if re.abs() < tol && rn.abs() < tol {
            return finish(beta, nu, it, re, rn, beta_max);
        }
        // d<E>/dβ = −Var E, d<E>/dν = Cov, d<N>/dβ = −Cov, d<N>/dν = Var N
        let (a, b, c, d) = if single_sector {
            (-m[2], T::zero(), T::zero(), T::one())
        } else {
            (-m[2], m[3], -m[3], m[4])
        };
        let det = a * d - b * c;
        let scale = (a * a + b * b + c * c + d * d).sqrt() + T::lit(1e-300);
        let (mut db, mut dv) = if det.abs() > T::lit(1e-14) * scale * scale {
            ((-(d * re) + b * rn) / det, (c * re - a * rn) / det)
        } else {
            // Levenberg step on the normal equations
            let lam = T::lit(1e-8) * scale * scale + T::lit(1e-300);
            let (g0, g1) = (a * re + c * rn, b * re + d * rn);
            let (h00, h01, h11) = (a * a + c * c + lam, a * b + c * d, b * b + d * d + lam);
            let hd = h00 * h11 - h01 * h01;
            (-(h11 * g0 - h01 * g1) / hd, -(h00 * g1 - h01 * g0) / hd)
        };
        let norm0 = re * re + rn * rn;
        let mut accepted = false;
        for _ in 0..60 {
            let nb = beta + db;
            let nv = nu + dv;
            if nb.is_finite() && nv.is_finite() && nb <= T::lit(2.0) * beta_max {
                let (r1, r2, m1) = residual(nb, nv);
                if r1 * r1 + r2 * r2 < norm0 {
                    beta = nb;
                    nu = nv;
                    re = r1;
                    rn = r2;
                    m = m1;
                    accepted = true;
                    break;
                }
            }
            db *= T::lit(0.5);
            dv *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    if re.abs() < tol && rn.abs() < tol {
        return finish(beta, nu, opts.max_iterations, re, rn, beta_max);
    }
    Err(ThermalError::NotConverged {
        iterations: opts.max_iterations,
        beta: beta.to_f64_lossy(),
        mu: mu_of(beta, nu).to_f64_lossy(),
        residual_e: re.to_f64_lossy(),
        residual_n: rn.to_f64_lossy(),
    })
}

fn mu_of<T: Real>(beta: T, nu: T) -> T {
    if beta.abs() < T::lit(1e-12) {
        T::zero()
    } else {
        nu / beta
    }
}

fn finish<T: Real>(
    beta: T,
    nu: T,
    iterations: usize,
    re: T,
    rn: T,
    beta_max: T,
) -> Result<EnsembleFit<T>, ThermalError> {
    if beta < T::lit(-1e-9) || beta > beta_max {
        return Err(ThermalError::Infeasible(format!(
            "targets require beta = {} outside [0, {}]",
            beta.to_f64_lossy(),
            beta_max.to_f64_lossy()
        )));
    }
    Ok(EnsembleFit {
        beta,
        mu: mu_of(beta, nu),
        iterations,
        residual_e: re,
        residual_n: rn,
    })
}

/// Basis of a contiguous or scattered set of sites carved out of `full`,
/// holding every particle number the full basis allows on them.
pub fn region_basis(full: &FockBasis, sites: &[usize]) -> Result<Arc<FockBasis>, ThermalError> {
    if full.statistics() != Statistics::Boson {
        return Err(ThermalError::Unsupported(
            "reduced states are implemented for bosons only".into(),
        ));
    }
    if sites.is_empty() {
        return Err(ThermalError::Invalid("empty region".into()));
    }
    let mut seen = vec![false; full.num_modes()];
    for &s in sites {
        if s >= full.num_modes() || seen[s] {
            return Err(ThermalError::Invalid(format!("bad region site {s}")));
        }
        seen[s] = true;
    }
    let max = match full.sector() {
        Sector::Fixed(n) => *n,
        Sector::Totals(t) => t.iter().copied().max().unwrap_or(0),
        Sector::Cutoff(_) => {
            return Err(ThermalError::Unsupported(
                "reduced states need a number-conserving basis".into(),
            ));
        }
    };
    Ok(Arc::new(FockBasis::new(
        Statistics::Boson,
        sites.len(),
        Sector::Totals((0..=max).collect()),
    )?))
}

/// Groups full-basis states by their complement occupation and records the
/// region index of each.
fn split_by_complement(full: &FockBasis, sites: &[usize], region: &FockBasis) -> Vec<Vec<(usize, usize)>> {
    let in_region: Vec<bool> = (0..full.num_modes()).map(|m| sites.contains(&m)).collect();
    let mut groups: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut out: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut r = vec![0u8; sites.len()];
    for (i, s) in full.states().enumerate() {
        for (k, &site) in sites.iter().enumerate() {
            r[k] = s[site];
        }
        let comp: Vec<u8> = s.iter().zip(&in_region).filter(|(_, &b)| !b).map(|(&x, _)| x).collect();
        let ri = region.index_of(&r).expect("region occupation within region basis");
        let next = out.len();
        let g = *groups.entry(comp).or_insert_with(|| {
            out.push(Vec::new());
            next
        });
        out[g].push((i, ri));
    }
    out
}

/// Reduced state of a pure state on `sites`.
pub fn reduced_from_pure<T: Real>(
    full: &FockBasis,
    psi: &DVector<Complex<T>>,
    sites: &[usize],
) -> Result<DensityMatrix<T>, ThermalError> {
    let region = region_basis(full, sites)?;
    let d = region.dim();
    let mut m = CMatrix::from_element(d, d, czero());
    for group in split_by_complement(full, sites, &region) {
        for &(i, ri) in &group {
            let a = psi[i];
            if a == czero() {
                continue;
            }
            for &(k, rk) in &group {
                m[(ri, rk)] += a * psi[k].conj();
            }
        }
    }
    Ok(DensityMatrix::from_parts(region, hermitianize(m), None, None))
}

/// Partial trace of `ρ` over every site outside `sites`.
pub fn reduced_density_matrix<T: Real>(
    rho: &DensityMatrix<T>,
    sites: &[usize],
) -> Result<DensityMatrix<T>, ThermalError> {
    let full = rho.basis();
    let region = region_basis(full, sites)?;
    let d = region.dim();
    let mut m = CMatrix::from_element(d, d, czero());
    let src = rho.matrix();
    for group in split_by_complement(full, sites, &region) {
        for &(i, ri) in &group {
            for &(k, rk) in &group {
                m[(ri, rk)] += src[(i, k)];
            }
        }
    }
    Ok(DensityMatrix::from_parts(region, hermitianize(m), None, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, total_number_op, OpFlags};
    use crate::scalar::c;

    fn two_level(delta: f64) -> Operator<f64> {
        let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(1)).unwrap();
        Operator::diagonal(b, &[cr(0.0), cr(delta)]).with_flags(OpFlags::DIAGONAL_HERMITIAN)
    }

    #[test]
    fn two_level_closed_form() {
        let (beta, delta) = (0.7, 1.3);
        let rho = thermal_state(&two_level(delta), beta).unwrap();
        let z = 1.0 + (-beta * delta).exp();
        assert!((rho.matrix()[(0, 0)].re - 1.0 / z).abs() < 1e-15);
        assert!((rho.matrix()[(1, 1)].re - (-beta * delta).exp() / z).abs() < 1e-15);
        assert_eq!(rho.provenance().unwrap().beta, beta);
    }

    #[test]
    fn infinite_temperature_is_maximally_mixed() {
        let rho = thermal_state(&two_level(2.0), 0.0).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((purity(&rho, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_of_diag_state() {
        let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(1)).unwrap();
        let m = CMatrix::from_diagonal(&DVector::from_vec(vec![cr(0.6f64), cr(0.4)]));
        let rho = DensityMatrix::new(b, m).unwrap();
        assert!((purity(&rho, 2) - 0.52).abs() < 1e-15);
        let sq = matrix_power_state(&rho, 2).unwrap();
        assert!((sq.matrix()[(0, 0)].re - 0.36 / 0.52).abs() < 1e-14);
        assert!((sq.matrix()[(1, 1)].re - 0.16 / 0.52).abs() < 1e-14);
        let same = matrix_power_state(&rho, 1).unwrap();
        assert_eq!(same.matrix(), rho.matrix());
    }

    #[test]
    fn invalid_states_rejected() {
        let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(1)).unwrap();
        let bad = CMatrix::from_diagonal(&DVector::from_vec(vec![cr(1.2), cr(-0.2)]));
        assert!(DensityMatrix::new(b.clone(), bad).is_err());
        let nonherm = CMatrix::from_row_slice(2, 2, &[cr(0.5), c(0.1, 0.0), c(0.2, 0.0), cr(0.5)]);
        assert!(DensityMatrix::new(b, nonherm).is_err());
    }

    #[test]
    fn grand_canonical_single_mode_occupation() {
        let cutoff = 40;
        let b = enumerate_basis(Statistics::Boson, 1, Sector::Totals((0..=cutoff).collect())).unwrap();
        let h = Operator::diagonal(b.clone(), &vec![cr(0.0); b.dim()]).with_flags(OpFlags::DIAGONAL_HERMITIAN);
        let n = total_number_op::<f64>(&b, None).unwrap();
        let (beta, mu) = (1.0, -0.5);
        let rho = grand_canonical_state(&h, &n, beta, mu).unwrap();
        let mean = rho.expectation(&n).re;
        // geometric partial sum oracle
        let x: f64 = (beta * mu).exp();
        let (num, den) = (0..=cutoff).fold((0.0, 0.0), |(a, b), k| {
            (a + k as f64 * x.powi(k as i32), b + x.powi(k as i32))
        });
        assert!((mean - num / den).abs() < 1e-12);
        assert!((mean - 1.0 / ((-beta * mu).exp() - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn grand_canonical_rejects_noncommuting() {
        let b = enumerate_basis(Statistics::Boson, 1, Sector::Totals(vec![0, 1])).unwrap();
        let x = Operator::from_dense(
            b.clone(),
            b.clone(),
            CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]),
            OpFlags::HERMITIAN,
        );
        let n = total_number_op::<f64>(&b, None).unwrap();
        assert!(matches!(
            grand_canonical_state(&x, &n, 1.0, 0.0),
            Err(ThermalError::NotCommuting(_))
        ));
    }

    #[test]
    fn reduced_of_bell_like_state() {
        let b = enumerate_basis(Statistics::Boson, 2, Sector::Fixed(1)).unwrap();
        let s = 0.5f64.sqrt();
        let psi = DVector::from_vec(vec![cr(s), cr(s)]);
        let r = reduced_from_pure(&b, &psi, &[0]).unwrap();
        assert_eq!(r.dim(), 2);
        assert!((r.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!(cabs(r.matrix()[(0, 1)]) < 1e-15);
        let full = DensityMatrix::from_pure(b, &psi).unwrap();
        let r2 = reduced_density_matrix(&full, &[0]).unwrap();
        assert!(linalg::max_abs_diff(r.matrix(), r2.matrix()) < 1e-15);
    }
}
