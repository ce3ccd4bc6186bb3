//! Parallel, reproducible Monte-Carlo runs of the energy simulation and the
//! comparison of their statistics with the large-system theory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{moments, MomentPair};
use crate::channel::{simulate_energy, simulate_energy_with, EnergyRun, SystemConfig};
use crate::config::cfg_digest;
use crate::error::{Error, Result};
use crate::special::{gaussian_q, ks_normality, mean_variance, normal_cdf};

const Z95: f64 = 1.959963984540054;

/// Generator for trial `trial`: the master seed picks the key, the trial
/// index picks one of the 2^64 independent streams.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

/// Re-runs a single trial, optionally keeping trajectories.
pub fn replay_trial(cfg: &SystemConfig, master_seed: u64, trial: usize, record_trajectories: bool) -> Result<EnergyRun> {
    simulate_energy_with(cfg, &mut trial_rng(master_seed, trial), record_trajectories)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySamples {
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub n_trials: usize,
    pub cfg_digest: String,
}

impl EnergySamples {
    /// CSV with columns `trial,E_T`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "trial,E_T")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{i},{v:?}")?;
        }
        Ok(())
    }

    /// Reads the `E_T` column of a file written by [`EnergySamples::write_csv`].
    pub fn read_values<R: std::io::BufRead>(input: R) -> Result<Vec<f64>> {
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let field = line.split(',').nth(1).ok_or_else(|| {
                Error::invalid(format!("samples line {}: expected `trial,E_T`", lineno + 1))
            })?;
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("samples line {}: `{field}` is not a number", lineno + 1)))?;
            values.push(v);
        }
        Ok(values)
    }
}

pub fn run_trials(cfg: &SystemConfig, n_trials: usize, master_seed: u64) -> Result<EnergySamples> {
    run_trials_on(cfg, n_trials, master_seed, None)
}

/// As [`run_trials`], on a dedicated pool of `workers` threads when given.
/// The output does not depend on the number of workers.
pub fn run_trials_on(cfg: &SystemConfig, n_trials: usize, master_seed: u64, workers: Option<usize>) -> Result<EnergySamples> {
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    cfg.validate()?;
    let job = || -> Vec<Result<f64>> {
        (0..n_trials)
            .into_par_iter()
            .map(|i| simulate_energy(cfg, &mut trial_rng(master_seed, i)).map(|run| run.energy))
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {w} worker threads: {e}")))?
            .install(job),
        None => job(),
    };
    let values = results
        .into_iter()
        .enumerate()
        .map(|(trial, r)| r.map_err(|e| Error::TrialFailed { trial, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergySamples {
        values,
        master_seed,
        n_trials,
        cfg_digest: cfg_digest(cfg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_ci95: [f64; 2],
    pub variance_ci95: [f64; 2],
    pub ks_stat: f64,
    pub ks_pvalue: f64,
}

impl MomentSummary {
    pub fn mean_ci_width(&self) -> f64 {
        self.mean_ci95[1] - self.mean_ci95[0]
    }
}

pub fn summarize(samples: &EnergySamples) -> Result<MomentSummary> {
    summarize_values(&samples.values)
}

/// Unbiased moments, normal-approximation 95% intervals and a KS test of
/// the standardized values.
pub fn summarize_values(values: &[f64]) -> Result<MomentSummary> {
    if values.len() < 8 {
        return Err(Error::invalid(format!("summary needs at least 8 samples, got {}", values.len())));
    }
    let ks = ks_normality(values)?;
    let n = values.len() as f64;
    let (mean, variance) = mean_variance(values);
    let half = Z95 * (variance / n).sqrt();
    let var_half = Z95 * variance * (2.0 / (n - 1.0)).sqrt();
    Ok(MomentSummary {
        n: values.len(),
        mean,
        variance,
        mean_ci95: [mean - half, mean + half],
        variance_ci95: [(variance - var_half).max(0.0), variance + var_half],
        ks_stat: ks.statistic,
        ks_pvalue: ks.p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub alpha: f64,
    /// Fraction of trials with `E_T / T > alpha`.
    pub empirical: f64,
    pub ci95_half_width: f64,
    pub theory: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Count expected under `N(0, 1)`.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub toolkit_version: String,
    pub cfg_digest: String,
    pub master_seed: u64,
    pub n_trials: usize,
    pub theory: MomentPair,
    pub summary: MomentSummary,
    pub mean_rel_error: f64,
    pub variance_rel_error: f64,
    /// Tail `Pr(E_T / T > alpha)` over `alpha` in mean/T +- 4 std/T.
    pub tail: Vec<TailPoint>,
    /// Samples standardized with the theoretical moments, binned on [-4, 4].
    pub histogram: Vec<HistogramBin>,
    /// Trials falling outside the histogram range.
    pub histogram_outside: usize,
}

pub fn validate_theorem1(cfg: &SystemConfig, n_trials: usize, master_seed: u64) -> Result<ValidationReport> {
    let samples = run_trials(cfg, n_trials, master_seed)?;
    validation_report(cfg, &samples)
}

/// Builds the report for samples that were already simulated.
pub fn validation_report(cfg: &SystemConfig, samples: &EnergySamples) -> Result<ValidationReport> {
    let theory = moments(cfg)?;
    let summary = summarize(samples)?;
    let std = theory.std_dev();
    if !(std > 0.0) {
        return Err(Error::Degenerate("theoretical variance is zero".into()));
    }
    let n = samples.values.len() as f64;
    let horizon = cfg.horizon;

    let tail = (0..=40)
        .map(|i| {
            let z = -4.0 + 0.2 * i as f64;
            let alpha = (theory.mean_energy + z * std) / horizon;
            let above = samples.values.iter().filter(|&&e| e / horizon > alpha).count() as f64 / n;
            Ok(TailPoint {
                alpha,
                empirical: above,
                ci95_half_width: Z95 * (above * (1.0 - above) / n).sqrt(),
                theory: gaussian_q(z),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    const BINS: usize = 32;
    let width = 8.0 / BINS as f64;
    let mut counts = [0usize; BINS];
    let mut outside = 0;
    for &e in &samples.values {
        let z = (e - theory.mean_energy) / std;
        let b = ((z + 4.0) / width).floor();
        if b >= 0.0 && (b as usize) < BINS {
            counts[b as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let histogram = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let lo = -4.0 + i as f64 * width;
            let hi = lo + width;
            HistogramBin {
                lo,
                hi,
                count,
                expected: n * (normal_cdf(hi) - normal_cdf(lo)),
            }
        })
        .collect();

    Ok(ValidationReport {
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        cfg_digest: samples.cfg_digest.clone(),
        master_seed: samples.master_seed,
        n_trials: samples.n_trials,
        mean_rel_error: (summary.mean - theory.mean_energy).abs() / theory.mean_energy,
        variance_rel_error: (summary.variance - theory.variance_total).abs() / theory.variance_total,
        theory,
        summary,
        tail,
        histogram,
        histogram_outside: outside,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub step_length: f64,
    pub step_time: f64,
    pub time_step: f64,
    pub n_trials: usize,
    pub mean: f64,
    pub mean_ci95: [f64; 2],
    pub variance: f64,
}

/// Repeats the simulation with the walk refined `levels` times, each time
/// halving the step length and quartering the step time so that `D` is
/// unchanged. Each level runs `n_trials` trials.
pub fn step_size_sweep(cfg: &SystemConfig, levels: usize, n_trials: usize, master_seed: u64) -> Result<Vec<SweepPoint>> {
    let mut current = cfg.clone();
    let mut out = Vec::with_capacity(levels + 1);
    for level in 0..=levels {
        if level > 0 {
            current.mob = crate::cell::MobilityParams::new(current.mob.step_length / 2.0, current.mob.step_time / 4.0)?;
            current.time_step = current.time_step.min(current.mob.step_time);
        }
        let s = summarize(&run_trials(&current, n_trials, master_seed)?)?;
        out.push(SweepPoint {
            step_length: current.mob.step_length,
            step_time: current.mob.step_time,
            time_step: current.time_step,
            n_trials,
            mean: s.mean,
            mean_ci95: s.mean_ci95,
            variance: s.variance,
        });
    }
    Ok(out)
}
