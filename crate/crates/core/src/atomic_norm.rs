//! Atomic-norm semidefinite programs for two-channel line spectra.
//!
//! Both programs constrain the bordered matrix
//!
//! ```text
//! B(b, Sigma, x) = [ b   x^H      ]
//!                  [ x   T(Sigma) ]  >= 0
//! ```
//!
//! and are solved by ADMM on the splitting `B(b, Sigma, x) = Z`, `Z >= 0`.
//! The structured update is closed form: every block diagonal of the
//! Toeplitz part is averaged, which is the exact weighted least-squares
//! minimiser. The `Z` update is a PSD projection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle::circular_distance;
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_eigenvalues, numerical_rank, psd_project_with_spectrum, CMatrix, HermitianMatrix};
use crate::signal::{synthesize, MeasurementVector, SinusoidModel, CHANNELS};
use crate::toeplitz::{assemble, CovarianceSequence};
use crate::vandermonde::{decompose_with, Decomposition, DecomposeWarning, LineSpectrum};
use crate::Tolerances;

const M: usize = CHANNELS;

/// ADMM settings plus the thresholds of the frequency-extraction step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    pub epsilon_rank: f64,
    pub delta_theta: f64,
}

impl SolverConfig {
    pub fn noiseless() -> Self {
        Self {
            rho: 1.0,
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            max_iter: 50_000,
            epsilon_rank: Tolerances::DEFAULT.epsilon_rank,
            delta_theta: Tolerances::DEFAULT.delta_theta,
        }
    }

    pub fn denoise() -> Self {
        Self {
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            ..Self::noiseless()
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            epsilon_rank: self.epsilon_rank,
            delta_theta: self.delta_theta,
            ..Tolerances::DEFAULT
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rho) || !positive(self.tol_primal) || !positive(self.tol_dual) || !positive(self.epsilon_rank) {
            return Err(Error::InvalidArgument(
                "rho, tolerances and epsilon_rank must be positive".into(),
            ));
        }
        if !(self.delta_theta >= 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "delta_theta must be nonnegative and max_iter positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Minimise `(b + tr Sigma_0) / 2` subject to `B(b, Sigma, x) >= 0` for fixed `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessProblem {
    pub x: MeasurementVector,
}

impl NoiselessProblem {
    pub fn new(x: MeasurementVector) -> Self {
        Self { x }
    }
}

/// Minimise `||x - y||^2 / 2 + tau (b + tr Sigma_0) / 2` subject to `B(b, Sigma, x) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseProblem {
    pub y: MeasurementVector,
    pub tau: f64,
}

impl DenoiseProblem {
    pub fn new(y: MeasurementVector, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { y, tau })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpSolution {
    pub b: f64,
    pub sigma: CovarianceSequence,
    pub x: MeasurementVector,
    pub objective: f64,
    /// The objective only bounds the atomic norm from below (rank condition failed).
    pub lower_bound_only: bool,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Numerical rank of `T(Sigma)` at `epsilon_rank`.
    pub rank: usize,
    pub rank_ok: bool,
    /// Smallest eigenvalue of the returned bordered matrix.
    pub min_bordered_eigenvalue: f64,
}

impl SdpSolution {
    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    pub fn bordered(&self) -> HermitianMatrix {
        let t = assemble(&self.sigma);
        HermitianMatrix::new(bordered_matrix(self.b, self.x.as_slice(), t.as_matrix())).expect("square")
    }
}

pub fn solve_noiseless(p: &NoiselessProblem, cfg: &SolverConfig) -> Result<SdpSolution> {
    if !p.x.is_finite() {
        return Err(Error::InvalidArgument("measurement contains non-finite values".into()));
    }
    solve(&p.x, None, cfg)
}

pub fn solve_denoise(p: &DenoiseProblem, cfg: &SolverConfig) -> Result<SdpSolution> {
    if !p.y.is_finite() {
        return Err(Error::InvalidArgument("measurement contains non-finite values".into()));
    }
    if !(p.tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {}", p.tau)));
    }
    solve(&p.y, Some(p.tau), cfg)
}

fn solve(y: &MeasurementVector, tau: Option<f64>, cfg: &SolverConfig) -> Result<SdpSolution> {
    cfg.validate()?;
    let n = y.n();
    let scale = y.norm();
    if scale == 0.0 {
        return finish(0.0, CovarianceSequence::zeros(M, n), y.clone(), tau, y, cfg, Run::default());
    }
    // both programs are homogeneous: solve for y / ||y|| (and tau / ||y||), then rescale
    let y_unit = y.scale(1.0 / scale);
    let mut run = admm(&y_unit, tau.map(|t| t / scale), cfg)?;
    restore_feasibility(&mut run)?;
    let sigma = run.sigma.scale(scale);
    let x = MeasurementVector::new(n, run.x.iter().map(|z| z * scale).collect())?;
    finish(run.b * scale, sigma, x, tau, y, cfg, run)
}

fn finish(
    b: f64,
    sigma: CovarianceSequence,
    x: MeasurementVector,
    tau: Option<f64>,
    y: &MeasurementVector,
    cfg: &SolverConfig,
    run: Run,
) -> Result<SdpSolution> {
    let trace0: f64 = (0..M).map(|i| sigma.block(0)[(i, i)].re).sum();
    let objective = match tau {
        None => 0.5 * (b + trace0),
        Some(t) => 0.5 * x.distance(y).powi(2) + 0.5 * t * (b + trace0),
    };
    let t_eigs = hermitian_eigenvalues(&assemble(&sigma))?;
    let rank = numerical_rank(&t_eigs, cfg.epsilon_rank);
    let rank_ok = rank <= sigma.n() + 1;
    let mut sol = SdpSolution {
        b,
        sigma,
        x,
        objective,
        lower_bound_only: tau.is_none() && !rank_ok,
        iterations: run.iterations,
        primal_residual: run.primal,
        dual_residual: run.dual,
        rank,
        rank_ok,
        min_bordered_eigenvalue: 0.0,
    };
    sol.min_bordered_eigenvalue = hermitian_eigenvalues(&sol.bordered())?.first().copied().unwrap_or(0.0);
    Ok(sol)
}

#[derive(Debug, Clone)]
struct Run {
    b: f64,
    sigma: CovarianceSequence,
    x: Vec<c64>,
    iterations: usize,
    primal: f64,
    dual: f64,
}

impl Default for Run {
    fn default() -> Self {
        Self {
            b: 0.0,
            sigma: CovarianceSequence::zeros(M, 0),
            x: vec![],
            iterations: 0,
            primal: 0.0,
            dual: 0.0,
        }
    }
}

/// Shifts `b` and `Sigma_0` by the most negative bordered eigenvalue so the
/// returned point is feasible; the objective moves by the same order as the
/// primal residual.
fn restore_feasibility(run: &mut Run) -> Result<()> {
    let t = assemble(&run.sigma);
    let bordered = HermitianMatrix::new(bordered_matrix(run.b, &run.x, t.as_matrix()))?;
    let lowest = hermitian_eigenvalues(&bordered)?.first().copied().unwrap_or(0.0);
    if lowest < 0.0 {
        run.b -= lowest;
        let mut blocks = run.sigma.blocks().to_vec();
        for i in 0..M {
            blocks[0][(i, i)] -= lowest;
        }
        run.sigma = CovarianceSequence::new(M, blocks)?;
    }
    Ok(())
}

/// Structured variables extracted from a bordered matrix.
struct Structured {
    b: f64,
    x: Vec<c64>,
    blocks: Vec<CMatrix>,
}

/// Orthogonal projection of a Hermitian `dim x dim` matrix onto the bordered structure.
fn project_structure(w: &CMatrix, p: usize) -> Structured {
    let dim = w.rows();
    let b = w[(0, 0)].re;
    let x = (1..dim).map(|i| 0.5 * (w[(i, 0)] + w[(0, i)].conj())).collect();
    let mut blocks = Vec::with_capacity(p);
    for k in 0..p {
        let mut acc = CMatrix::zeros(M, M);
        for j in 0..p - k {
            let (r0, c0) = (1 + (j + k) * M, 1 + j * M);
            for r in 0..M {
                for c in 0..M {
                    acc[(r, c)] += w[(r0 + r, c0 + c)] + w[(c0 + c, r0 + r)].conj();
                }
            }
        }
        let mut blk = acc.scale(c64::new(0.5 / (p - k) as f64, 0.0));
        if k == 0 {
            for r in 0..M {
                for c in r..M {
                    let v = 0.5 * (blk[(r, c)] + blk[(c, r)].conj());
                    blk[(r, c)] = v;
                    blk[(c, r)] = v.conj();
                }
            }
        }
        blocks.push(blk);
    }
    Structured { b, x, blocks }
}

fn bordered_matrix(b: f64, x: &[c64], t: &CMatrix) -> CMatrix {
    let dim = 1 + t.rows();
    let mut out = CMatrix::zeros(dim, dim);
    out[(0, 0)] = c64::new(b, 0.0);
    for (i, &v) in x.iter().enumerate() {
        out[(i + 1, 0)] = v;
        out[(0, i + 1)] = v.conj();
    }
    out.set_block(1, 1, t);
    out
}

fn assemble_structured(s: &Structured) -> CMatrix {
    let p = s.blocks.len();
    let dim = 1 + M * p;
    let mut out = CMatrix::zeros(dim, dim);
    out[(0, 0)] = c64::new(s.b, 0.0);
    for (i, &v) in s.x.iter().enumerate() {
        out[(i + 1, 0)] = v;
        out[(0, i + 1)] = v.conj();
    }
    for bj in 0..p {
        for bk in 0..=bj {
            let blk = &s.blocks[bj - bk];
            for r in 0..M {
                for c in 0..M {
                    let v = blk[(r, c)];
                    out[(1 + bj * M + r, 1 + bk * M + c)] = v;
                    out[(1 + bk * M + c, 1 + bj * M + r)] = v.conj();
                }
            }
        }
    }
    out
}

const OVER_RELAXATION: f64 = 1.6;
const RHO_BALANCE: f64 = 10.0;
const RHO_CHECK_EVERY: usize = 20;
// iterates are normalised to unit data norm; primal scales below this are absolute
const RESIDUAL_FLOOR: f64 = 1e-3;

/// Scaled-form ADMM. `tau = None` keeps `x = y` fixed (noiseless program).
fn admm(y: &MeasurementVector, tau: Option<f64>, cfg: &SolverConfig) -> Result<Run> {
    let n = y.n();
    let p = n + 1;
    let dim = 1 + M * p;
    let c = tau.unwrap_or(1.0);
    let ys = y.as_slice();
    let mut rho = cfg.rho;
    let mut z = CMatrix::zeros(dim, dim);
    let mut u = CMatrix::zeros(dim, dim);
    let mut last = None;

    for it in 1..=cfg.max_iter {
        // structured update given W = Z - U
        let w = z.sub(&u);
        let mut s = project_structure(&w, p);
        s.b -= c / (2.0 * rho);
        let shift = c / (2.0 * rho * p as f64);
        for i in 0..M {
            s.blocks[0][(i, i)] -= shift;
        }
        s.x = match tau {
            None => ys.to_vec(),
            Some(_) => ys
                .iter()
                .zip(&s.x)
                .map(|(&yi, &wi)| (yi + 2.0 * rho * wi) / (1.0 + 2.0 * rho))
                .collect(),
        };
        let bmat = assemble_structured(&s);

        // over-relaxed projection step
        let relaxed = bmat.scale(c64::new(OVER_RELAXATION, 0.0)).add(&z.scale(c64::new(1.0 - OVER_RELAXATION, 0.0)));
        let v = relaxed.add(&u);
        let (z_new, _) = psd_project_with_spectrum(&HermitianMatrix::new(v.clone())?)?;
        let z_new = z_new.into_matrix();
        u = v.sub(&z_new);

        let primal_abs = bmat.sub(&z_new).frobenius_norm();
        let dz = z_new.sub(&z);
        let mut dz_struct = project_structure(&dz, p);
        if tau.is_none() {
            dz_struct.x.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
        }
        let dual_abs = rho * assemble_structured(&dz_struct).frobenius_norm();
        z = z_new;

        if !primal_abs.is_finite() || !dual_abs.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        let primal = primal_abs / bmat.frobenius_norm().max(z.frobenius_norm()).max(RESIDUAL_FLOOR);
        let dual = dual_abs / (rho * u.frobenius_norm()).max(1e-300);
        last = Some((s, primal, dual));
        if primal <= cfg.tol_primal && dual <= cfg.tol_dual {
            let (s, primal, dual) = last.take().unwrap();
            return Ok(into_run(s, it, primal, dual));
        }
        if it % RHO_CHECK_EVERY == 0 {
            if primal > RHO_BALANCE * dual {
                rho *= 2.0;
                u = u.scale(c64::new(0.5, 0.0));
            } else if dual > RHO_BALANCE * primal {
                rho /= 2.0;
                u = u.scale(c64::new(2.0, 0.0));
            }
        }
    }
    let (_, primal, dual) = last.expect("at least one iteration");
    Err(Error::NotConverged {
        iterations: cfg.max_iter,
        primal,
        dual,
    })
}

fn into_run(s: Structured, iterations: usize, primal: f64, dual: f64) -> Run {
    Run {
        b: s.b,
        sigma: CovarianceSequence::new(M, s.blocks).expect("blocks are m x m"),
        x: s.x,
        iterations,
        primal,
        dual,
    }
}

/// Line spectrum recovered from an SDP solution.
#[derive(Debug, Clone)]
pub struct FrequencyEstimate {
    pub spectrum: LineSpectrum,
    pub rank_ok: bool,
    pub decomposition: Decomposition,
}

impl FrequencyEstimate {
    pub fn warnings(&self) -> &[DecomposeWarning] {
        &self.decomposition.warnings
    }
}

/// Vandermonde decomposition of `Sigma_hat`; full rank means no line-spectral structure.
pub fn estimate_frequencies(sol: &SdpSolution, epsilon: f64, delta_theta: f64) -> Result<FrequencyEstimate> {
    let tol = Tolerances {
        epsilon_rank: epsilon,
        delta_theta,
        ..Tolerances::DEFAULT
    };
    let decomposition = decompose_with(&sol.sigma, &tol).map_err(|e| match e {
        Error::InteriorPoint { rank } => Error::NoLineSpectrum { rank },
        other => other,
    })?;
    Ok(FrequencyEstimate {
        spectrum: decomposition.spectrum.clone(),
        rank_ok: sol.rank_ok,
        decomposition,
    })
}

/// Minimum circular separation and whether `separation / 2 pi >= 4 / n`.
pub fn check_separation(thetas: &[f64], n: usize) -> (f64, bool) {
    let mut delta = 2.0 * PI;
    for i in 0..thetas.len() {
        for j in i + 1..thetas.len() {
            delta = delta.min(circular_distance(thetas[i], thetas[j]));
        }
    }
    let satisfied = n > 0 && delta / (2.0 * PI) >= 4.0 / n as f64;
    (delta, satisfied)
}

/// Checks `p <= sum_l ||s_l|| + tolerance` for a model that reproduces `x`.
pub fn lower_bound_check(x: &MeasurementVector, model: &SinusoidModel, p: f64, tolerance: f64) -> Result<bool> {
    if model.n != x.n() {
        return Err(Error::Precondition(format!(
            "model has n={} but measurement has n={}",
            model.n,
            x.n()
        )));
    }
    let gap = synthesize(model).distance(x);
    if gap > 1e-8 * x.norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "decomposition does not reproduce the measurement (residual {gap:e})"
        )));
    }
    Ok(p <= model.amplitude_norm_sum() + tolerance)
}
