//! Subcommand implementations. Each returns the text report printed to stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use specline::atomic_norm::{
    check_separation, estimate_frequencies, solve_denoise, solve_noiseless, DenoiseProblem, NoiselessProblem, SolverConfig,
};
use specline::signal::{
    add_noise_with, compute_tau, estimate_noise_variance, random_amplitudes_with, random_frequencies_with, rng_from_seed,
    snr_to_sigma, synthesize, MeasurementVector, SinusoidModel,
};
use specline::toeplitz::CovarianceSequence;
use specline::vandermonde::{decompose, reconstruct, DecomposeWarning, LineSpectrum};
use specline::Error;

use crate::artifact::{read_json, with_provenance, write_json, Provenance};
use crate::matching::frequency_error;
use crate::montecarlo::{resolve_jobs, run_study, write_csv, StudyConfig};

pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_DECOMPOSITION: i32 = 3;
pub const EXIT_INTERIOR_POINT: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// Failure carrying a specific process exit code.
#[derive(Debug)]
pub struct ExitError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for ExitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ExitError {}

fn exit_error(code: i32, message: impl Into<String>) -> anyhow::Error {
    ExitError {
        code,
        message: message.into(),
    }
    .into()
}

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    err.downcast_ref::<ExitError>().map_or(1, |e| e.code)
}

#[derive(Debug, Parser)]
#[command(name = "specline", version, about = "Two-channel line-spectrum estimation by atomic-norm SDP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a measurement vector and its ground-truth model.
    Generate(GenerateArgs),
    /// Solve the atomic-norm SDP and extract frequencies.
    Estimate(EstimateArgs),
    /// Vandermonde decomposition of a covariance sequence.
    Decompose(DecomposeArgs),
    /// Monte-Carlo rank-recovery study.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Comma-separated frequencies in radians.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "random_freqs", conflicts_with = "random_freqs")]
    pub freqs: Vec<f64>,
    /// Draw this many frequencies uniformly on (-pi, pi].
    #[arg(long)]
    pub random_freqs: Option<usize>,
    /// Minimum circular separation for drawn frequencies, radians.
    #[arg(long, requires = "random_freqs")]
    pub min_separation: Option<f64>,
    /// Omit for a noiseless signal.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth sidecar; defaults to `<out>.model.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Noiseless,
    Denoise,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Regulariser; estimated from the noise floor when omitted.
    #[arg(long)]
    pub tau: Option<f64>,
    /// JSON file overriding solver settings.
    #[arg(long)]
    pub solver_config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth sidecar to score the estimate against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub delta_theta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Comma-separated source counts.
    #[arg(long = "L", value_delimiter = ',', required = true)]
    pub sources: Vec<usize>,
    /// Comma-separated SNR levels in dB; `inf` runs noiseless cells.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub target_successes: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; overridden by SPECLINE_THREADS.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Rejection-sample frequencies to this circular separation, radians.
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[arg(long)]
    pub solver_config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Estimate(a) => estimate(a),
        Command::Decompose(a) => decompose_cmd(a),
        Command::Montecarlo(a) => montecarlo(a),
    }
}

/// `<out>.model.json` next to `out`, dropping a trailing `.json`.
pub fn default_sidecar(out: &Path) -> PathBuf {
    let name = out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".json").unwrap_or(&name);
    out.with_file_name(format!("{stem}.model.json"))
}

pub fn generate(a: &GenerateArgs) -> Result<String> {
    if a.n == 0 {
        return Err(exit_error(EXIT_USAGE, "--n must be positive"));
    }
    let mut rng = rng_from_seed(a.seed);
    let freqs = match a.random_freqs {
        Some(l) => random_frequencies_with(l, a.min_separation.unwrap_or(0.0), &mut rng)?,
        None => a.freqs.clone(),
    };
    let amplitudes = random_amplitudes_with(freqs.len(), &mut rng);
    let model = SinusoidModel::new(a.n, freqs, amplitudes)?;
    let sigma_w = a.snr_db.map_or(0.0, snr_to_sigma);
    let y = add_noise_with(&synthesize(&model), sigma_w, &mut rng)?;
    let (separation, satisfied) = check_separation(&model.frequencies, a.n);

    let config = json!({
        "n": a.n,
        "frequencies": model.frequencies,
        "random_freqs": a.random_freqs,
        "min_separation": a.min_separation,
        "snr_db": a.snr_db,
        "sigma_w": sigma_w,
        "seed": a.seed,
    });
    let prov = Provenance::new("generate", Some(a.seed), &config)?;
    write_json(&a.out, &with_provenance(&y, &prov)?)?;
    let sidecar = a.truth.clone().unwrap_or_else(|| default_sidecar(&a.out));
    let truth = json!({
        "n": model.n,
        "frequencies": model.frequencies,
        "amplitudes": model.amplitudes,
        "sigma_w": sigma_w,
        "separation": {
            "min_separation": separation,
            "required": 2.0 * std::f64::consts::PI * 4.0 / a.n as f64,
            "satisfied": satisfied,
        },
    });
    write_json(&sidecar, &with_provenance(truth, &prov)?)?;

    let mut r = String::new();
    writeln!(r, "wrote {} (n={}, L={}, sigma_w={sigma_w:.6})", a.out.display(), a.n, model.sources())?;
    writeln!(r, "wrote {}", sidecar.display())?;
    write!(r, "{}", separation_report(separation, satisfied, a.n))?;
    Ok(r)
}

fn separation_report(separation: f64, satisfied: bool, n: usize) -> String {
    let ratio = separation / (2.0 * std::f64::consts::PI);
    format!(
        "separation: min gap {separation:.6} rad, gap/2pi = {ratio:.6}, required 4/n = {:.6}: {}\n",
        4.0 / n as f64,
        if satisfied { "satisfied" } else { "NOT satisfied" }
    )
}

/// Mode defaults overlaid with the fields present in `path`.
pub fn load_solver_config(base: SolverConfig, path: Option<&Path>) -> Result<SolverConfig> {
    let Some(path) = path else { return Ok(base) };
    let overlay: Value = read_json(path)?;
    let Value::Object(fields) = overlay else {
        return Err(exit_error(EXIT_USAGE, format!("{} is not a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(base)?;
    for (k, v) in fields {
        merged[k] = v;
    }
    serde_json::from_value(merged).with_context(|| format!("invalid solver config {}", path.display()))
}

#[derive(Debug, Serialize)]
struct EstimateDiagnostics {
    mode: Mode,
    tau: Option<f64>,
    noise_variance: Option<f64>,
    objective: f64,
    lower_bound_only: bool,
    rank: usize,
    rank_ok: bool,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    min_bordered_eigenvalue: f64,
    shift_residual: f64,
    warnings: Vec<DecomposeWarning>,
}

pub fn estimate(a: &EstimateArgs) -> Result<String> {
    let y: MeasurementVector = read_json(&a.input)?;
    let base = match a.mode {
        Mode::Noiseless => SolverConfig::noiseless(),
        Mode::Denoise => SolverConfig::denoise(),
    };
    let cfg = load_solver_config(base, a.solver_config.as_deref())?;

    let (solved, tau, noise_variance) = match a.mode {
        Mode::Noiseless => (solve_noiseless(&NoiselessProblem::new(y.clone()), &cfg), None, None),
        Mode::Denoise => {
            let (tau, var) = match a.tau {
                Some(t) => (t, None),
                None => {
                    let var = estimate_noise_variance(&y)?;
                    (compute_tau(var.max(0.0).sqrt(), y.n()), Some(var))
                }
            };
            if !(tau > 0.0) {
                return Err(exit_error(
                    EXIT_USAGE,
                    format!("tau must be positive (got {tau}); pass --tau or use --mode noiseless"),
                ));
            }
            (solve_denoise(&DenoiseProblem::new(y.clone(), tau)?, &cfg), Some(tau), var)
        }
    };
    let sol = match solved {
        Ok(s) => s,
        Err(e @ (Error::NotConverged { .. } | Error::Diverged { .. })) => {
            return Err(exit_error(EXIT_NOT_CONVERGED, e.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    let est = estimate_frequencies(&sol, cfg.epsilon_rank, cfg.delta_theta).map_err(|e| {
        exit_error(
            EXIT_DECOMPOSITION,
            format!(
                "{e} (objective {:.6e}, rank {}, primal {:.2e}, dual {:.2e})",
                sol.objective, sol.rank, sol.primal_residual, sol.dual_residual
            ),
        )
    })?;

    let diagnostics = EstimateDiagnostics {
        mode: a.mode,
        tau,
        noise_variance,
        objective: sol.objective,
        lower_bound_only: sol.lower_bound_only,
        rank: sol.rank,
        rank_ok: sol.rank_ok,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        min_bordered_eigenvalue: sol.min_bordered_eigenvalue,
        shift_residual: est.decomposition.shift_residual,
        warnings: est.warnings().to_vec(),
    };

    let mut r = String::new();
    writeln!(r, "frequencies: {}", format_list(&est.spectrum.frequencies()))?;
    writeln!(
        r,
        "objective {:.10e}, rank {} (rank condition {}), {} iterations, residuals {:.2e} / {:.2e}",
        sol.objective,
        sol.rank,
        if sol.rank_ok { "holds" } else { "FAILS: objective is a lower bound" },
        sol.iterations,
        sol.primal_residual,
        sol.dual_residual
    )?;
    if let Some(t) = tau {
        writeln!(r, "tau {t:.6e}")?;
    }
    write!(r, "{}", warning_lines(est.warnings()))?;
    if let Some(path) = &a.truth {
        let truth: SinusoidModel = read_json(path)?;
        let err = frequency_error(&truth.frequencies, &est.spectrum.frequencies());
        writeln!(r, "frequency error vs {}: {err:.6e}", path.display())?;
    }
    if let Some(out) = &a.out {
        let config = json!({"input": a.input, "mode": a.mode, "tau": a.tau, "solver": cfg});
        let prov = Provenance::new("estimate", None, config)?;
        let mut value = with_provenance(&est.spectrum, &prov)?;
        value["diagnostics"] = serde_json::to_value(&diagnostics)?;
        write_json(out, &value)?;
        writeln!(r, "wrote {}", out.display())?;
    }
    Ok(r)
}

fn format_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10}")).collect::<Vec<_>>().join(", ")
}

fn warning_lines(warnings: &[DecomposeWarning]) -> String {
    let mut r = String::new();
    for w in warnings {
        match w {
            DecomposeWarning::MarginalRank { eigenvalue, epsilon } => {
                let _ = writeln!(r, "warning: marginal rank, eigenvalue {eigenvalue:.3e} is within a decade of epsilon {epsilon:.1e}");
            }
            DecomposeWarning::UniquenessNotGuaranteed { m } => {
                let _ = writeln!(r, "warning: block size {m} > 2, decomposition need not be unique");
            }
        }
    }
    r
}

pub fn decompose_cmd(a: &DecomposeArgs) -> Result<String> {
    let sigma: CovarianceSequence = read_json(&a.input)?;
    let dec = decompose(&sigma, a.epsilon, a.delta_theta).map_err(|e| match e {
        Error::InteriorPoint { .. } => exit_error(EXIT_INTERIOR_POINT, format!("interior point: {e}")),
        other => exit_error(EXIT_DECOMPOSITION, other.to_string()),
    })?;
    let residual = reconstruct(&dec.spectrum, sigma.n()).max_block_distance(&sigma);

    let mut r = String::new();
    writeln!(r, "atoms: {}", dec.spectrum.len())?;
    writeln!(r, "frequencies: {}", format_list(&dec.spectrum.frequencies()))?;
    writeln!(
        r,
        "rank {} of {} (epsilon {:.1e}), smallest eigenvalue {:.3e}",
        dec.rank,
        sigma.dim(),
        a.epsilon,
        dec.min_eigenvalue()
    )?;
    writeln!(r, "reconstruction residual {residual:.3e}, shift residual {:.3e}", dec.shift_residual)?;
    write!(r, "{}", warning_lines(&dec.warnings))?;
    if let Some(out) = &a.out {
        let config = json!({"input": a.input, "epsilon": a.epsilon, "delta_theta": a.delta_theta});
        let prov = Provenance::new("decompose", None, config)?;
        let mut value = with_provenance(&dec.spectrum, &prov)?;
        value["report"] = json!({
            "rank": dec.rank,
            "eigenvalues": dec.eigenvalues,
            "reconstruction_residual": residual,
            "shift_residual": dec.shift_residual,
            "warnings": dec.warnings,
        });
        write_json(out, &value)?;
        writeln!(r, "wrote {}", out.display())?;
    }
    Ok(r)
}

pub fn study_config(a: &MonteCarloArgs) -> Result<StudyConfig> {
    let cfg = StudyConfig {
        n: a.n,
        sources: a.sources.clone(),
        snr_db: a.snr_db.clone(),
        target_successes: a.target_successes,
        max_trials: a.max_trials,
        seed: a.seed,
        jobs: resolve_jobs(a.jobs),
        min_separation: a.min_separation,
        solver: load_solver_config(SolverConfig::denoise(), a.solver_config.as_deref())?,
    };
    cfg.validate().map_err(|e| exit_error(EXIT_USAGE, e.to_string()))?;
    Ok(cfg)
}

pub fn montecarlo(a: &MonteCarloArgs) -> Result<String> {
    let cfg = study_config(a)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let study = run_study(&cfg, |c| {
        eprintln!(
            "L={} snr={} dB: {}/{} recovered{}",
            c.sources,
            c.snr_db,
            c.successes,
            c.total_trials,
            if c.censored { " (censored)" } else { "" }
        );
    })?;
    let csv_path = a.out_dir.join("trials.csv");
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_csv(&study.records, std::io::BufWriter::new(file))?;
    let summary_path = a.out_dir.join("summary.json");
    let prov = Provenance::new("montecarlo", Some(cfg.seed), &cfg)?;
    write_json(&summary_path, &with_provenance(&study.summary, &prov)?)?;

    let mut r = String::new();
    writeln!(r, "{:>4} {:>8} {:>7} {:>10} {:>8} {:>12}", "L", "snr_db", "trials", "successes", "P", "median_err")?;
    for c in &study.summary.cells {
        writeln!(
            r,
            "{:>4} {:>8} {:>7} {:>10} {:>8.3} {:>12}{}",
            c.sources,
            c.snr_db,
            c.total_trials,
            c.successes,
            c.success_probability,
            c.error_quantiles.map_or("-".into(), |q| format!("{:.3e}", q.median)),
            if c.censored { "  censored" } else { "" }
        )?;
    }
    writeln!(r, "wrote {} and {}", csv_path.display(), summary_path.display())?;
    Ok(r)
}

/// Parses a spectrum written by `estimate` or `decompose`.
pub fn read_spectrum(path: &Path) -> Result<LineSpectrum> {
    read_json(path)
}
