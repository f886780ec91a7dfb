//! `bench` and `tune`.

use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use cfo_core::harness::{run, run_seeds, BudgetSpec, StopReason, TrialLog};
use cfo_core::RawConfig;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::logio::{log_path, write_curves, write_log};
use crate::wire::SubprocessEvaluator;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub max_evals: Option<u64>,
    pub max_cost: Option<f64>,
    pub time_limit_secs: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(s) = &self.seeds {
            if s.is_empty() {
                return Err(CliError::Usage("--seeds needs at least one seed".into()));
            }
            cfg.seeds = s.clone();
        }
        if self.max_evals.is_some() {
            cfg.budget.max_evals = self.max_evals;
        }
        if self.max_cost.is_some() {
            cfg.budget.max_cost = self.max_cost;
        }
        if self.time_limit_secs.is_some() {
            cfg.budget.time_limit_secs = self.time_limit_secs;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub evals: usize,
    pub best_loss: f64,
    pub best_config: Option<RawConfig>,
    /// Cumulative cost when the best configuration was evaluated.
    pub g_total: f64,
    pub evals_to_best: Option<u64>,
    pub failed_evals: usize,
}

impl SeedSummary {
    pub fn of(seed: u64, log: &TrialLog) -> Self {
        let best = log.best();
        Self {
            seed,
            evals: log.len(),
            best_loss: best.map_or(f64::INFINITY, |r| r.loss),
            best_config: best.map(|r| r.config.clone()),
            g_total: best.map_or(0.0, |r| r.cumulative_cost),
            evals_to_best: log.evals_to_best(),
            failed_evals: log.records.iter().filter(|r| r.failed).count(),
        }
    }
}

pub fn print_summary(out: &mut dyn Write, rows: &[SeedSummary]) -> std::io::Result<()> {
    writeln!(out, "{:>6} {:>7} {:>14} {:>14} {:>13} {:>7}", "seed", "evals", "best_loss", "G_total", "evals_to_best", "failed")?;
    for r in rows {
        let to_best = r.evals_to_best.map_or("-".to_string(), |k| k.to_string());
        writeln!(
            out,
            "{:>6} {:>7} {:>14.6e} {:>14.6e} {:>13} {:>7}",
            r.seed, r.evals, r.best_loss, r.g_total, to_best, r.failed_evals
        )?;
    }
    Ok(())
}

fn budget(cfg: &ExperimentConfig) -> Result<BudgetSpec, CliError> {
    let spec = cfg.budget.to_spec();
    if spec.max_evals.is_none() && spec.max_total_cost.is_none() && spec.wall_clock_secs.is_none() {
        return Err(CliError::Config("budget must set max_evals, max_cost or time_limit_secs".into()));
    }
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

fn prepare_out(out: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Run(format!("{}: {e}", out.display())))
}

fn finished(seed: u64, stop: StopReason) -> Result<(), CliError> {
    match stop {
        StopReason::Failed(e) => Err(CliError::Run(format!("seed {seed}: {e}"))),
        _ => Ok(()),
    }
}

/// Runs every seed on the builtin objective, writes one log per seed plus
/// `curves.csv` into `out`, and prints a summary table.
pub fn bench(cfg: &ExperimentConfig, out: &PathBuf, console: &mut dyn Write) -> Result<Vec<SeedSummary>, CliError> {
    if cfg.objective == "external" {
        return Err(CliError::Config("bench needs a builtin objective; use `tune` for external evaluators".into()));
    }
    let budget = budget(cfg)?;
    let objective = cfg.builtin_objective()?;
    for &s in &cfg.seeds {
        cfg.build_optimizer(s)?;
    }
    prepare_out(out)?;
    let results = run_seeds(&cfg.seeds, |seed| -> Result<TrialLog, CliError> {
        let mut opt = cfg.build_optimizer(seed)?;
        let outcome = run(opt.as_mut(), &mut &objective, &budget)?;
        finished(seed, outcome.stop)?;
        write_log(&log_path(out, seed), &outcome.log)?;
        Ok(outcome.log)
    });
    let mut logs = Vec::with_capacity(results.len());
    for (seed, r) in results {
        logs.push((seed, r?));
    }
    let refs: Vec<(u64, &TrialLog)> = logs.iter().map(|(s, l)| (*s, l)).collect();
    write_curves(&out.join("curves.csv"), &refs)?;
    let rows: Vec<SeedSummary> = logs.iter().map(|(s, l)| SeedSummary::of(*s, l)).collect();
    print_summary(console, &rows)?;
    Ok(rows)
}

/// Drives an external evaluator, one subprocess per seed, seeds in order.
pub fn tune(
    cfg: &ExperimentConfig,
    evaluator: &str,
    timeout: Option<Duration>,
    out: &PathBuf,
    console: &mut dyn Write,
) -> Result<Vec<SeedSummary>, CliError> {
    if cfg.objective != "external" {
        return Err(CliError::Config(format!(
            "tune needs objective \"external\", got `{}`; use `bench` for builtin objectives",
            cfg.objective
        )));
    }
    let budget = budget(cfg)?;
    prepare_out(out)?;
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let mut opt = cfg.build_optimizer(seed)?;
        let mut objective = SubprocessEvaluator::new(evaluator, timeout);
        let outcome = run(opt.as_mut(), &mut objective, &budget)?;
        drop(objective);
        finished(seed, outcome.stop)?;
        write_log(&log_path(out, seed), &outcome.log)?;
        let row = SeedSummary::of(seed, &outcome.log);
        match &row.best_config {
            Some(c) => writeln!(
                console,
                "seed {seed}: best loss {} at {}",
                row.best_loss,
                serde_json::to_string(c).expect("configs always serialize")
            )?,
            None => writeln!(console, "seed {seed}: no evaluations")?,
        }
        rows.push(row);
    }
    print_summary(console, &rows)?;
    Ok(rows)
}
