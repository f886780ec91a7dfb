//! Theory-check suites behind `cfo theory`.

use std::fmt::Write as _;

use clap::ValueEnum;
use cfo_core::harness::{check_cost_bounds, check_expected_decrease, median, run, run_seeds, BudgetSpec, TheoryReport, TrialLog};
use cfo_core::objectives::SyntheticObjective;
use cfo_core::sampler::{c_d, sample_sphere};
use cfo_core::{Cfo, Flow2Search, NormPoint, SearchSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Decrease,
    CostBounds,
    CdConstant,
    Convergence,
}

/// Printed lines plus whether every hard assertion held.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub lines: Vec<String>,
    pub passed: bool,
}

impl SuiteReport {
    fn new() -> Self {
        Self { lines: Vec::new(), passed: true }
    }

    fn hard(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("[{}] {line}", if ok { "ok" } else { "FAIL" }));
    }

    fn info(&mut self, line: String) {
        self.lines.push(format!("[info] {line}"));
    }
}

pub fn run_suite(suite: Suite, seeds: &[u64]) -> Result<SuiteReport, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    match suite {
        Suite::CdConstant => cd_constant(seeds[0]),
        Suite::Decrease => decrease(seeds[0]),
        Suite::CostBounds => cost_bounds(seeds),
        Suite::Convergence => convergence(seeds),
    }
}

fn cd_constant(seed: u64) -> Result<SuiteReport, CliError> {
    let mut rep = SuiteReport::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1_000_000;
    for d in [2usize, 3, 10] {
        let exact = c_d(d)?;
        let mc = (0..n).map(|_| sample_sphere(d, &mut rng)[0].abs()).sum::<f64>() / n as f64;
        let gap = (mc - exact).abs();
        rep.hard(gap <= 0.002, format!("d={d}: analytic {exact:.6}, Monte-Carlo {mc:.6}, |gap| {gap:.2e} (tol 0.002)"));
    }
    Ok(rep)
}

fn decrease(seed: u64) -> Result<SuiteReport, CliError> {
    let mut rep = SuiteReport::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in [2usize, 5, 10] {
        let obj = SyntheticObjective::sphere(vec![0.5; d])?;
        let stationary: NormPoint = vec![0.5; d].into();
        let mut points = vec![stationary];
        while points.len() < 4 {
            let x: Vec<f64> = (0..d).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
            if obj.gradient_norm(&x) > 0.05 {
                points.push(x.into());
            }
        }
        for (i, x) in points.iter().enumerate() {
            for delta in [0.01, 0.05] {
                let r = check_expected_decrease(&obj, x, delta, 20_000, &mut rng)?;
                let label = if i == 0 { "stationary".to_string() } else { format!("point {i}") };
                rep.hard(
                    r.passed,
                    format!(
                        "d={d} {label} delta={delta}: mean decrease {:.3e} vs bound {:.3e} ({:+.2} s.e.)",
                        r.mean,
                        r.bound,
                        (r.mean - r.bound) / r.std_err.max(f64::MIN_POSITIVE)
                    ),
                );
            }
        }
    }
    Ok(rep)
}

fn flow2_log(obj: &SyntheticObjective, delta: f64, budget: BudgetSpec, seed: u64) -> Result<TrialLog, CliError> {
    let space = SearchSpace::unit_cube(obj.low_cost_init())?;
    let mut opt = Flow2Search::seeded(space, obj.low_cost_init().clone(), delta, seed)?;
    Ok(run(&mut opt, &mut &obj.clone(), &budget)?.log)
}

fn reports(obj: &SyntheticObjective, delta: f64, iterations: u64, seeds: &[u64]) -> Result<Vec<TheoryReport>, CliError> {
    run_seeds(seeds, |s| {
        let log = flow2_log(obj, delta, BudgetSpec::iterations(iterations), s)?;
        Ok(check_cost_bounds(&log, obj, delta, 0.05)?)
    })
    .into_iter()
    .map(|(_, r)| r)
    .collect()
}

/// Seeds needed for an expectation bound to count as held.
fn majority(n: usize) -> usize {
    (9 * n).div_ceil(10)
}

fn cost_bounds(seeds: &[u64]) -> Result<SuiteReport, CliError> {
    let mut rep = SuiteReport::new();
    let n = seeds.len();
    let mut slope3 = vec![0.0; 3];
    slope3[0] = 1.0;
    let cases = [
        ("additive d=1", SyntheticObjective::additive_cost(vec![0.5], vec![1.0], 1.0)?, 2000),
        ("factorized d=1", SyntheticObjective::factorized_cost(vec![0.5], vec![0])?, 2000),
        ("additive d=3", SyntheticObjective::additive_cost(vec![0.5; 3], slope3, 1.0)?, 20_000),
        ("factorized d=3", SyntheticObjective::factorized_cost(vec![0.5; 3], vec![0, 1])?, 20_000),
    ];
    for (label, obj, iterations) in cases {
        let delta = 0.01;
        let reps = reports(&obj, delta, iterations, seeds)?;
        let pathwise = reps.iter().filter(|r| r.pathwise_ok()).count();
        let required = reps[0].incumbent_bound_required;
        let misses = reps.iter().filter(|r| !r.incumbent_ok).count();
        let excess = reps.iter().map(|r| r.incumbent_margin).fold(f64::NEG_INFINITY, f64::max);
        rep.hard(
            pathwise == n,
            format!("{label}: pathwise cost bounds held in {pathwise}/{n} seeds (step constant {:.4})", reps[0].step_constant),
        );
        let note = if required { "asserted" } else { "informational, objective not locally monotone" };
        rep.info(format!("{label}: incumbent bound missed in {misses}/{n} seeds, max excess {excess:.3e} ({note})"));
        let held = reps.iter().filter(|r| r.satisfied).count();
        let margin = reps.iter().map(|r| r.bound_value - r.g_total).fold(f64::INFINITY, f64::min);
        let k: Vec<f64> = reps.iter().map(|r| r.k_star.map_or(f64::INFINITY, |k| k as f64)).collect();
        for (s, r) in seeds.iter().zip(&reps) {
            if !r.satisfied {
                rep.info(format!("{label} seed {s}: G_total {:.4} exceeds bound {:.4}", r.g_total, r.bound_value));
            }
        }
        rep.hard(
            held >= majority(n),
            format!(
                "{label}: total-cost bound held in {held}/{n} seeds (need {}), min margin {margin:.4}, median K* {:.0}",
                majority(n),
                median(&k).unwrap_or(f64::NAN)
            ),
        );
    }
    Ok(rep)
}

fn convergence(seeds: &[u64]) -> Result<SuiteReport, CliError> {
    let mut rep = SuiteReport::new();
    let obj = SyntheticObjective::sphere(vec![0.5; 10])?;
    let mut gaps = Vec::new();
    for k in [100u64, 1000, 10_000] {
        let delta = 1.0 / (k as f64).sqrt();
        let finals = run_seeds(seeds, |s| -> Result<f64, CliError> {
            let log = flow2_log(&obj, delta, BudgetSpec::iterations(k), s)?;
            let last = log.records.last().and_then(|r| r.incumbent_loss).unwrap_or(f64::INFINITY);
            Ok(last - obj.optimum_loss())
        })
        .into_iter()
        .map(|(_, g)| g)
        .collect::<Result<Vec<_>, _>>()?;
        let m = median(&finals).unwrap_or(f64::NAN);
        rep.info(format!("FLOW2 d=10 K={k} delta={delta:.4}: median final gap {m:.4e}"));
        gaps.push(m);
    }
    let mut line = String::from("median final gap strictly decreasing in K:");
    for g in &gaps {
        let _ = write!(line, " {g:.3e}");
    }
    rep.hard(gaps.windows(2).all(|w| w[1] < w[0]), line);

    let needed = run_seeds(seeds, |s| -> Result<Option<u64>, CliError> {
        let space = SearchSpace::unit_cube(obj.low_cost_init())?;
        let mut opt = Cfo::from_space(space, s)?;
        let log = run(&mut opt, &mut &obj, &BudgetSpec::evals(5000))?.log;
        let target = 1e-2 * log.records[0].loss;
        Ok(log.records.iter().find(|r| r.loss <= target).map(|r| r.index + 1))
    })
    .into_iter()
    .map(|(_, n)| n)
    .collect::<Result<Vec<_>, _>>()?;
    let reached = needed.iter().flatten().count();
    rep.info(format!(
        "CFO d=10 sphere: loss <= 1% of the initial loss within 5000 evaluations in {reached}/{} seeds",
        seeds.len()
    ));
    Ok(rep)
}
