//! Rank-recovery and frequency-error studies over `(L, SNR)` cells.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::RngCore;
use serde::{Serialize, Serializer};
use specline::atomic_norm::{estimate_frequencies, solve_denoise, solve_noiseless, DenoiseProblem, NoiselessProblem, SolverConfig};
use specline::signal::{
    add_noise_with, compute_tau, estimate_noise_variance, random_amplitudes_with, random_frequencies_with, rng_from_seed,
    snr_to_sigma, synthesize, trial_rng, SinusoidModel,
};
use specline::{Error, Result};

use crate::matching::frequency_error;

/// Environment variable that overrides `--jobs`.
pub const THREADS_ENV: &str = "SPECLINE_THREADS";

pub const CSV_HEADER: [&str; 8] = [
    "trial",
    "seed",
    "L",
    "snr_db",
    "rank_recovered",
    "freq_error",
    "solve_iterations",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub sources: Vec<usize>,
    #[serde(serialize_with = "snr_list")]
    pub snr_db: Vec<f64>,
    pub target_successes: usize,
    pub max_trials: usize,
    pub seed: u64,
    pub jobs: usize,
    /// Minimum circular separation of drawn frequencies; `None` draws i.i.d.
    pub min_separation: Option<f64>,
    pub solver: SolverConfig,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::InvalidArgument(format!("n must be at least 8, got {}", self.n)));
        }
        if self.sources.is_empty() || self.sources.iter().any(|&l| l == 0 || l > self.n) {
            return Err(Error::InvalidArgument("every L must lie in 1..=n".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument("SNR list must be non-empty and finite or inf".into()));
        }
        if self.target_successes == 0 || self.max_trials == 0 || self.jobs == 0 {
            return Err(Error::InvalidArgument(
                "target successes, max trials and jobs must be positive".into(),
            ));
        }
        if let Some(sep) = self.min_separation {
            if !(sep >= 0.0) {
                return Err(Error::InvalidArgument(format!("invalid minimum separation {sep}")));
            }
        }
        Ok(())
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRecord {
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "L")]
    pub sources: usize,
    pub snr_db: f64,
    pub rank_recovered: bool,
    /// Present iff `rank_recovered`.
    pub freq_error: Option<f64>,
    pub solve_iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantiles; `None` for an empty sample.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(Quantiles {
        min: v[0],
        q25: at(0.25),
        median: at(0.5),
        q75: at(0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    #[serde(rename = "L")]
    pub sources: usize,
    #[serde(serialize_with = "snr_value")]
    pub snr_db: f64,
    pub total_trials: usize,
    pub successes: usize,
    /// `successes / total_trials`; equals `target / total` for uncensored cells.
    pub success_probability: f64,
    /// The trial cap was reached before the target number of successes.
    pub censored: bool,
    pub error_quantiles: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub config: StudyConfig,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub records: Vec<MonteCarloRecord>,
    pub summary: StudySummary,
}

fn snr_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

fn snr_list<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if x.is_finite() {
            seq.serialize_element(x)?;
        } else {
            seq.serialize_element("inf")?;
        }
    }
    seq.end()
}

/// Worker count: `SPECLINE_THREADS` when set to a positive integer, else `flag`.
pub fn resolve_jobs(flag: usize) -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&j| j > 0)
        .unwrap_or(flag)
        .max(1)
}

/// Seed of trial `trial` in cell `cell`, reproducible from the master seed.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    trial_rng(master, ((cell as u64) << 32) | trial as u64).next_u64()
}

/// Draws a model and noise from `seed`, runs the estimation pipeline and scores it.
pub fn run_trial(
    n: usize,
    sources: usize,
    snr_db: f64,
    min_separation: Option<f64>,
    solver: &SolverConfig,
    seed: u64,
) -> Result<(SinusoidModel, MonteCarloRecord)> {
    let mut rng = rng_from_seed(seed);
    let thetas = random_frequencies_with(sources, min_separation.unwrap_or(0.0), &mut rng)?;
    let amplitudes = random_amplitudes_with(sources, &mut rng);
    let model = SinusoidModel::new(n, thetas, amplitudes)?;
    let x = synthesize(&model);
    let sigma_w = if snr_db.is_finite() { snr_to_sigma(snr_db) } else { 0.0 };
    let y = add_noise_with(&x, sigma_w, &mut rng)?;

    let start = Instant::now();
    let tau = compute_tau(estimate_noise_variance(&y)?.max(0.0).sqrt(), n);
    let solved = if tau > 0.0 {
        solve_denoise(&DenoiseProblem::new(y, tau)?, solver)
    } else {
        solve_noiseless(&NoiselessProblem::new(y), solver)
    };
    let (iterations, estimate) = match solved {
        Ok(sol) => {
            let est = if sol.rank == sources {
                estimate_frequencies(&sol, solver.epsilon_rank, solver.delta_theta).ok()
            } else {
                None
            };
            (sol.iterations, est)
        }
        Err(Error::NotConverged { iterations, .. }) => (iterations, None),
        Err(Error::Diverged { iteration }) => (iteration, None),
        Err(e) => return Err(e),
    };
    let wall_time_s = start.elapsed().as_secs_f64();
    let freq_error = estimate.map(|e| frequency_error(&model.frequencies, &e.spectrum.frequencies()));
    let record = MonteCarloRecord {
        trial: 0,
        seed,
        sources,
        snr_db,
        rank_recovered: freq_error.is_some(),
        freq_error,
        solve_iterations: iterations,
        wall_time_s,
    };
    Ok((model, record))
}

/// Runs trials `0, 1, ...` of one cell until `target_successes` rank
/// recoveries or `max_trials` trials. The returned records are exactly the
/// prefix up to the stopping trial, independent of the worker count.
pub fn run_cell(cfg: &StudyConfig, cell: usize, sources: usize, snr_db: f64) -> Result<(Vec<MonteCarloRecord>, CellSummary)> {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let done: Mutex<Vec<Option<MonteCarloRecord>>> = Mutex::new(vec![None; cfg.max_trials]);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    let worker = || loop {
        if stop.load(Ordering::SeqCst) {
            return;
        }
        let trial = next.fetch_add(1, Ordering::SeqCst);
        if trial >= cfg.max_trials {
            return;
        }
        let seed = trial_seed(cfg.seed, cell, trial);
        match run_trial(cfg.n, sources, snr_db, cfg.min_separation, &cfg.solver, seed) {
            Ok((_, mut rec)) => {
                rec.trial = trial;
                let mut slots = done.lock().expect("poisoned");
                slots[trial] = Some(rec);
                let mut wins = 0;
                for slot in slots.iter() {
                    match slot {
                        Some(r) => wins += r.rank_recovered as usize,
                        None => break,
                    }
                    if wins >= cfg.target_successes {
                        stop.store(true, Ordering::SeqCst);
                        break;
                    }
                }
            }
            Err(e) => {
                *failure.lock().expect("poisoned") = Some(e);
                stop.store(true, Ordering::SeqCst);
                return;
            }
        }
    };
    let jobs = cfg.jobs.min(cfg.max_trials).max(1);
    std::thread::scope(|s| {
        for _ in 1..jobs {
            s.spawn(worker);
        }
        worker();
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }

    let mut records = Vec::new();
    let mut wins = 0;
    for rec in done.into_inner().expect("poisoned").into_iter().map_while(|r| r) {
        wins += rec.rank_recovered as usize;
        records.push(rec);
        if wins >= cfg.target_successes {
            break;
        }
    }
    let errors: Vec<f64> = records.iter().filter_map(|r| r.freq_error).collect();
    let summary = CellSummary {
        sources,
        snr_db,
        total_trials: records.len(),
        successes: wins,
        success_probability: wins as f64 / records.len() as f64,
        censored: wins < cfg.target_successes,
        error_quantiles: quantiles(&errors),
    };
    Ok((records, summary))
}

/// Every `(L, SNR)` cell in row-major order of `cfg.sources x cfg.snr_db`.
pub fn run_study(cfg: &StudyConfig, mut progress: impl FnMut(&CellSummary)) -> Result<Study> {
    cfg.validate()?;
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (li, &l) in cfg.sources.iter().enumerate() {
        for (si, &snr) in cfg.snr_db.iter().enumerate() {
            let (recs, summary) = run_cell(cfg, li * cfg.snr_db.len() + si, l, snr)?;
            progress(&summary);
            records.extend(recs);
            cells.push(summary);
        }
    }
    Ok(Study {
        records,
        summary: StudySummary {
            config: cfg.clone(),
            cells,
        },
    })
}

pub fn write_csv<W: std::io::Write>(records: &[MonteCarloRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.sources.to_string(),
            r.snr_db.to_string(),
            r.rank_recovered.to_string(),
            r.freq_error.map(|e| format!("{e:e}")).unwrap_or_default(),
            r.solve_iterations.to_string(),
            format!("{:.6}", r.wall_time_s),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
