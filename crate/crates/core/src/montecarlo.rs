//! Many independent runs: percolation frequencies, trajectories, sweeps.
//!
//! Trial `i` draws from `trial_rng(master_seed, i)` and results are always
//! combined in trial order (trajectory sums are integers), so a summary does
//! not depend on the number of workers or on scheduling.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, OrderStatistics};

use crate::engine::{run_process, EdgeSource, SeedSpec, TraceOptions};
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::graph::sample_gnp_with;
use crate::rng::trial_rng;
use crate::stages::{run_with_stages, StageReport};
use crate::thresholds::{
    critical_pair, t_zero_int, theorem_subcritical_bound, theorem_supercritical_bound,
    CriticalValues, ProcessParams,
};

pub const DEFAULT_ALPHA_CONSTANT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Edges drawn on demand.
    Implicit,
    /// A fresh G(n, p) sampled per trial.
    Explicit,
}

/// How the initial infection size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSize {
    Absolute(u64),
    /// a = round(a_c + c·⌈√a_c⌉).
    Offset(f64),
}

impl SeedSize {
    pub fn resolve(&self, critical: &CriticalValues, n: u64) -> u64 {
        match *self {
            SeedSize::Absolute(a) => a,
            SeedSize::Offset(c) => {
                let a = (critical.ac + c * sqrt_unit(critical)).round();
                a.clamp(0.0, n as f64) as u64
            }
        }
    }
}

/// ⌈√a_c⌉, the unit of the α offsets.
pub fn sqrt_unit(critical: &CriticalValues) -> f64 {
    critical.ac.max(0.0).sqrt().ceil().max(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub params: ProcessParams,
    pub seed_size: SeedSize,
    pub trials: u64,
    pub master_seed: u64,
    pub mode: Mode,
    #[serde(serialize_with = "sig12")]
    pub percolation_threshold: f64,
    pub checkpoints: Vec<u64>,
    pub stage_diagnostics: bool,
    /// Worker hint; never changes the output.
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Stop every run after this many steps.
    pub max_steps: Option<u64>,
    /// Last step of the aggregated trajectory. Defaults to 2·⌈t₀⌉.
    pub trajectory_horizon: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(params: ProcessParams, seed_size: SeedSize, trials: u64, master_seed: u64) -> Self {
        Self {
            params,
            seed_size,
            trials,
            master_seed,
            mode: Mode::Implicit,
            percolation_threshold: 0.9,
            checkpoints: Vec::new(),
            stage_diagnostics: false,
            workers: None,
            max_steps: None,
            trajectory_horizon: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if !(self.percolation_threshold > 0.0 && self.percolation_threshold <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "percolation_threshold must satisfy 0 < threshold <= 1 (got {})",
                self.percolation_threshold
            )));
        }
        if let SeedSize::Absolute(a) = self.seed_size {
            if a > self.params.n() {
                return Err(Error::InvalidParams(format!(
                    "a must satisfy a <= n (got a = {a}, n = {})",
                    self.params.n()
                )));
            }
        }
        if let SeedSize::Offset(c) = self.seed_size {
            if !c.is_finite() {
                return Err(Error::InvalidParams("alpha offset must be finite".into()));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParams("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialClass {
    /// final_size < t_c.
    SubcriticalConfirmed,
    /// final_size ≥ threshold·n.
    AlmostPercolated,
    Other,
}

pub fn classify(final_size: u64, critical: &CriticalValues, n: u64, threshold: f64) -> TrialClass {
    if final_size < critical.tc {
        TrialClass::SubcriticalConfirmed
    } else if final_size as f64 >= threshold * n as f64 {
        TrialClass::AlmostPercolated
    } else {
        TrialClass::Other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub final_size: u64,
    /// T, or the step count at which `max_steps` cut the run.
    pub stop: u64,
    pub completed: bool,
    pub class: TrialClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<StageReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassCounts {
    pub subcritical_confirmed: u64,
    pub almost_percolated: u64,
    pub other: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    #[serde(serialize_with = "sig12")]
    pub p_hat: f64,
    #[serde(serialize_with = "sig12")]
    pub wilson_lo: f64,
    #[serde(serialize_with = "sig12")]
    pub wilson_hi: f64,
}

impl Estimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(successes, trials, 0.95);
        Self {
            successes,
            trials,
            p_hat: successes as f64 / trials as f64,
            wilson_lo: lo,
            wilson_hi: hi,
        }
    }
}

/// Mean of |A(t)| across trials, with the process expectation and the
/// martingale normalization alongside. Runs that stopped before t
/// contribute their final size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub mean_size: f64,
    pub se_size: f64,
    /// a + (n − a)·π̂(t).
    pub expected_size: f64,
    pub mean_martingale: f64,
    pub se_martingale: f64,
    /// Runs still going (not yet stopped) at step t.
    pub active: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut data = Data::new(values.to_vec());
        Some(Self {
            min: data.quantile(0.0),
            q25: data.quantile(0.25),
            median: data.median(),
            q75: data.quantile(0.75),
            max: data.quantile(1.0),
        })
    }
}

/// Stage measurements summarized over the trials of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct StageAggregate {
    pub runs: u64,
    pub early_ok: Estimate,
    pub bridge_AB: Estimate,
    pub truncated: u64,
    pub pred_Bhat: f64,
    pub pred_B: f64,
    pub pred_C: f64,
    pub size_Bhat: Option<Quantiles>,
    pub size_B: Option<Quantiles>,
    pub size_C: Option<Quantiles>,
    pub size_D: Option<Quantiles>,
    pub frac_D: Option<Quantiles>,
    /// frac_D over the runs where the A–B bridge exists.
    pub frac_D_given_bridge: Option<Quantiles>,
}

impl StageAggregate {
    pub fn from_reports(reports: &[&StageReport]) -> Option<Self> {
        let first = reports.first()?;
        let runs = reports.len() as u64;
        let col = |f: &dyn Fn(&StageReport) -> f64| -> Option<Quantiles> {
            Quantiles::of(&reports.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        let bridged: Vec<f64> = reports
            .iter()
            .filter(|r| r.bridge_AB)
            .map(|r| r.frac_D)
            .collect();
        Some(Self {
            runs,
            early_ok: Estimate::new(reports.iter().filter(|r| r.early_ok).count() as u64, runs),
            bridge_AB: Estimate::new(bridged.len() as u64, runs),
            truncated: reports.iter().filter(|r| r.truncated).count() as u64,
            pred_Bhat: first.pred_Bhat,
            pred_B: first.pred_B,
            pred_C: first.pred_C,
            size_Bhat: col(&|r| r.size_Bhat as f64),
            size_B: col(&|r| r.size_B as f64),
            size_C: col(&|r| r.size_C as f64),
            size_D: col(&|r| r.size_D as f64),
            frac_D: col(&|r| r.frac_D),
            frac_D_given_bridge: Quantiles::of(&bridged),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub critical: CriticalValues,
    pub a: u64,
    /// a − a_c.
    pub alpha: f64,
    /// (a − a_c)/⌈√a_c⌉.
    pub alpha_constant: f64,
    pub counts: ClassCounts,
    /// Fraction of trials classified almost percolated.
    pub percolation: Estimate,
    /// Fraction of trials ending below t_c.
    pub subcritical: Estimate,
    /// Failure bound of the theorem matching the side of a_c that a is on,
    /// with α = |a − a_c|. Reported, not asserted.
    #[serde(serialize_with = "sig12")]
    pub theorem_bound: f64,
    pub mean_final_size: f64,
    pub mean_stop: f64,
    pub min_stop: u64,
    pub trajectory: Vec<TrajectoryPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<StageAggregate>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(
        trials >= 1 && successes <= trials,
        "need 0 <= successes <= trials, trials >= 1"
    );
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).clamp(0.0, phat)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).clamp(phat, 1.0)
    };
    (lo, hi)
}

/// The theorem bound for initial size `a`: the subcritical one below a_c,
/// the supercritical one at or above it.
pub fn theorem_bound_for(params: &ProcessParams, critical: &CriticalValues, a: u64) -> f64 {
    let alpha = a as f64 - critical.ac;
    if alpha < 0.0 {
        theorem_subcritical_bound(params, -alpha)
    } else {
        theorem_supercritical_bound(params, alpha)
    }
}

struct TrialResult {
    outcome: TrialOutcome,
    /// |A(t)| for t = 0..=horizon, padded with the final size.
    sizes: Vec<u32>,
}

fn run_trial(
    config: &ExperimentConfig,
    critical: &CriticalValues,
    a: u64,
    horizon: u64,
    trial: u64,
) -> Result<TrialResult> {
    let params = &config.params;
    let n = params.n() as usize;
    let mut rng = trial_rng(config.master_seed, trial);
    let graph = match config.mode {
        Mode::Explicit => Some(sample_gnp_with(n, params.p(), &mut rng)),
        Mode::Implicit => None,
    };
    let source = match &graph {
        Some(g) => EdgeSource::Explicit(g),
        None => EdgeSource::implicit(params),
    };
    let seed = SeedSpec::new(a as usize, n)?;
    let opts = TraceOptions {
        checkpoints: config.checkpoints.clone(),
        percolation_threshold: config.percolation_threshold,
        max_steps: config.max_steps,
        ..TraceOptions::default()
    };
    let (trace, stages) = if config.stage_diagnostics {
        let alpha = a as f64 - critical.ac;
        let run = run_with_stages(source, params, critical, seed, alpha, &opts, &mut rng)?;
        (run.trace, Some(run.report))
    } else {
        (run_process(source, seed, params.r(), &opts, &mut rng), None)
    };
    let last = *trace.infected_sizes.last().expect("trace holds |A(0)|");
    let mut sizes: Vec<u32> = trace
        .infected_sizes
        .iter()
        .take(horizon as usize + 1)
        .copied()
        .collect();
    sizes.resize(horizon as usize + 1, last);
    Ok(TrialResult {
        outcome: TrialOutcome {
            trial,
            final_size: trace.final_size,
            stop: trace.stop,
            completed: trace.completed,
            class: classify(
                trace.final_size,
                critical,
                params.n(),
                config.percolation_threshold,
            ),
            stages,
        },
        sizes,
    })
}

fn aggregate_trajectory(
    params: &ProcessParams,
    a: u64,
    horizon: u64,
    results: &[TrialResult],
) -> Vec<TrajectoryPoint> {
    let trials = results.len() as f64;
    let n = params.n() as f64;
    (0..=horizon)
        .map(|t| {
            let (mut sum, mut sum_sq, mut active) = (0u128, 0u128, 0u64);
            for res in results {
                let x = u128::from(res.sizes[t as usize]);
                sum += x;
                sum_sq += x * x;
                if res.outcome.stop > t || !res.outcome.completed {
                    active += 1;
                }
            }
            let mean = sum as f64 / trials;
            let var = if results.len() > 1 {
                // Exact integer sum of squared deviations, scaled by trials.
                let ss = (sum_sq * results.len() as u128 - sum * sum) as f64;
                ss / (trials * (trials - 1.0))
            } else {
                0.0
            };
            let se = (var / trials).sqrt();
            let pi = params.pi_hat(t);
            let expected = a as f64 + (n - a as f64) * pi;
            let scale = 1.0 - pi;
            TrajectoryPoint {
                t,
                mean_size: mean,
                se_size: se,
                expected_size: expected,
                mean_martingale: if scale > 0.0 {
                    (mean - expected) / scale
                } else {
                    f64::NAN
                },
                se_martingale: if scale > 0.0 { se / scale } else { f64::NAN },
                active,
            }
        })
        .collect()
}

/// Runs `config.trials` independent trials and aggregates them.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let params = &config.params;
    let critical = critical_pair(params)?;
    let a = config.seed_size.resolve(&critical, params.n());
    if config.stage_diagnostics && (a as f64) <= critical.ac {
        return Err(Error::InvalidParams(format!(
            "stage diagnostics need a > a_c (got a = {a}, a_c = {})",
            critical.ac
        )));
    }
    let mut horizon = config
        .trajectory_horizon
        .unwrap_or_else(|| 2 * t_zero_int(params))
        .min(params.n());
    if let Some(m) = config.max_steps {
        horizon = horizon.min(m);
    }

    let job = || {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, &critical, a, horizon, i))
            .collect::<Result<Vec<_>>>()
    };
    let results = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidParams(format!("cannot start {w} workers: {e}")))?
            .install(job)?,
        None => job()?,
    };

    let trials = config.trials;
    let mut counts = ClassCounts {
        subcritical_confirmed: 0,
        almost_percolated: 0,
        other: 0,
    };
    for r in &results {
        match r.outcome.class {
            TrialClass::SubcriticalConfirmed => counts.subcritical_confirmed += 1,
            TrialClass::AlmostPercolated => counts.almost_percolated += 1,
            TrialClass::Other => counts.other += 1,
        }
    }
    let total_final: u64 = results.iter().map(|r| r.outcome.final_size).sum();
    let total_stop: u64 = results.iter().map(|r| r.outcome.stop).sum();
    let min_stop = results.iter().map(|r| r.outcome.stop).min().unwrap_or(0);
    let trajectory = aggregate_trajectory(params, a, horizon, &results);
    let reports: Vec<&StageReport> = results
        .iter()
        .filter_map(|r| r.outcome.stages.as_ref())
        .collect();

    Ok(ExperimentSummary {
        config: config.clone(),
        critical,
        a,
        alpha: a as f64 - critical.ac,
        alpha_constant: (a as f64 - critical.ac) / sqrt_unit(&critical),
        counts,
        percolation: Estimate::new(counts.almost_percolated, trials),
        subcritical: Estimate::new(counts.subcritical_confirmed, trials),
        theorem_bound: theorem_bound_for(params, &critical, a),
        mean_final_size: total_final as f64 / trials as f64,
        mean_stop: total_stop as f64 / trials as f64,
        min_stop,
        trajectory,
        stages: StageAggregate::from_reports(&reports),
        outcomes: results.into_iter().map(|r| r.outcome).collect(),
    })
}

/// One point of a transition curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct CurveRow {
    pub a: u64,
    /// (a − a_c)/⌈√a_c⌉.
    #[serde(serialize_with = "sig12")]
    pub alpha_offset: f64,
    #[serde(serialize_with = "sig12")]
    pub p_hat: f64,
    #[serde(serialize_with = "sig12")]
    pub wilson_lo: f64,
    #[serde(serialize_with = "sig12")]
    pub wilson_hi: f64,
    #[serde(serialize_with = "sig12")]
    pub mean_final_size: f64,
    #[serde(serialize_with = "sig12")]
    pub mean_T: f64,
    #[serde(serialize_with = "sig12")]
    pub theorem_bound: f64,
}

impl CurveRow {
    pub fn from_summary(s: &ExperimentSummary) -> Self {
        Self {
            a: s.a,
            alpha_offset: s.alpha_constant,
            p_hat: s.percolation.p_hat,
            wilson_lo: s.percolation.wilson_lo,
            wilson_hi: s.percolation.wilson_hi,
            mean_final_size: s.mean_final_size,
            mean_T: s.mean_stop,
            theorem_bound: s.theorem_bound,
        }
    }
}

/// Runs one experiment per seed size. Every point reuses `config` with its
/// own seed size; trial streams are keyed by the same master seed.
pub fn sweep(config: &ExperimentConfig, seed_sizes: &[SeedSize]) -> Result<Vec<ExperimentSummary>> {
    if seed_sizes.is_empty() {
        return Err(Error::InvalidParams(
            "sweep needs at least one seed size".into(),
        ));
    }
    seed_sizes
        .iter()
        .map(|&seed_size| {
            run_experiment(&ExperimentConfig {
                seed_size,
                ..config.clone()
            })
        })
        .collect()
}

pub fn curve(summaries: &[ExperimentSummary]) -> Vec<CurveRow> {
    summaries.iter().map(CurveRow::from_summary).collect()
}

/// Writes the curve as CSV with a header row.
pub fn write_curve_csv<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(50, 100, 0.95);
        assert!(
            (lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3,
            "{lo} {hi}"
        );
        assert_eq!(wilson_interval(0, 10, 0.95).0, 0.0);
        assert_eq!(wilson_interval(10, 10, 0.95).1, 1.0);
    }

    #[test]
    fn quantiles_of_small_sample() {
        let q = Quantiles::of(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((q.min, q.median, q.max), (1.0, 2.0, 3.0));
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn classification_order() {
        let params = ProcessParams::new(1000, 0.01, 2).unwrap();
        let cv = critical_pair(&params).unwrap();
        assert_eq!(
            classify(0, &cv, 1000, 0.9),
            TrialClass::SubcriticalConfirmed
        );
        assert_eq!(classify(1000, &cv, 1000, 0.9), TrialClass::AlmostPercolated);
        assert_eq!(classify(cv.tc, &cv, 1000, 0.9), TrialClass::Other);
    }
}
