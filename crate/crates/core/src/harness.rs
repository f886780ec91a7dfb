//! Budgeted runs, the evaluation ledger, performance curves and the
//! theory checks run against synthetic objectives.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::flow2::{Flow2Kernel, Probe};
use crate::objectives::SyntheticObjective;
use crate::optimizer::{EvalKind, Optimizer};
use crate::sampler::{c_d, sample_sphere};
use crate::space::{NormPoint, RawConfig, SearchSpace};

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`
/// so logs survive a JSON round trip.
pub mod nonfinite {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct FloatVisitor;

    impl Visitor<'_> for FloatVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(FloatVisitor)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        #[derive(serde::Deserialize)]
        struct Wrap(#[serde(deserialize_with = "super::deserialize")] f64);

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BudgetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_total_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
    /// Completed search iterations; used by the theory checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u64>,
}

impl BudgetSpec {
    pub fn evals(n: u64) -> Self {
        Self { max_evals: Some(n), ..Self::default() }
    }

    pub fn cost(c: f64) -> Self {
        Self { max_total_cost: Some(c), ..Self::default() }
    }

    pub fn iterations(n: u64) -> Self {
        Self { max_iterations: Some(n), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evals.is_none()
            && self.max_total_cost.is_none()
            && self.wall_clock_secs.is_none()
            && self.max_iterations.is_none()
        {
            return Err(Error::InvalidBudget("at least one limit must be set".into()));
        }
        for (name, v) in [("max_total_cost", self.max_total_cost), ("wall_clock_secs", self.wall_clock_secs)] {
            if let Some(v) = v {
                if v.is_nan() || v <= 0.0 {
                    return Err(Error::InvalidBudget(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Result of one objective call.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub cost: f64,
    /// Why the evaluation failed; the loss is then reported as `+inf`.
    pub error: Option<String>,
}

impl Evaluation {
    pub fn ok(loss: f64, cost: f64) -> Self {
        Self { loss, cost, error: None }
    }

    pub fn failed(cost: f64, reason: impl Into<String>) -> Self {
        Self { loss: f64::INFINITY, cost, error: Some(reason.into()) }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Something the runner can evaluate. An `Err` aborts the run; recoverable
/// failures should come back as [`Evaluation::failed`].
pub trait Objective {
    fn evaluate(&mut self, point: &NormPoint, config: &RawConfig) -> Result<Evaluation>;
}

impl Objective for SyntheticObjective {
    fn evaluate(&mut self, point: &NormPoint, _config: &RawConfig) -> Result<Evaluation> {
        let (loss, cost) = self.eval(point);
        Ok(Evaluation::ok(loss, cost))
    }
}

impl Objective for &SyntheticObjective {
    fn evaluate(&mut self, point: &NormPoint, _config: &RawConfig) -> Result<Evaluation> {
        let (loss, cost) = self.eval(point);
        Ok(Evaluation::ok(loss, cost))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub index: u64,
    pub config: RawConfig,
    pub point: NormPoint,
    #[serde(with = "nonfinite")]
    pub loss: f64,
    #[serde(with = "nonfinite")]
    pub cost: f64,
    #[serde(with = "nonfinite")]
    pub cumulative_cost: f64,
    pub round: u64,
    #[serde(with = "nonfinite")]
    pub best_so_far: f64,
    pub kind: EvalKind,
    pub iteration: Option<u64>,
    /// Loss the search moves from after this observation.
    #[serde(with = "nonfinite::option")]
    pub incumbent_loss: Option<f64>,
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialLog {
    pub records: Vec<EvaluationRecord>,
}

impl TrialLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.records.iter().map(|r| r.cost).sum()
    }

    pub fn best(&self) -> Option<&EvaluationRecord> {
        self.records
            .iter()
            .fold(None, |b: Option<&EvaluationRecord>, r| match b {
                Some(b) if r.loss.partial_cmp(&b.loss) != Some(Ordering::Less) => Some(b),
                _ => Some(r),
            })
    }

    /// Cumulative cost at the first evaluation with `loss <= target`.
    pub fn cost_to_reach(&self, target: f64) -> Option<f64> {
        self.records.iter().find(|r| r.loss <= target).map(|r| r.cumulative_cost)
    }

    /// Evaluations up to and including the best one.
    pub fn evals_to_best(&self) -> Option<u64> {
        self.best().map(|r| r.index + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    MaxEvals,
    MaxTotalCost,
    WallClock,
    MaxIterations,
    /// The objective or the optimizer returned an error.
    Failed(Error),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: TrialLog,
    pub stop: StopReason,
}

/// Drives ask-tell until a limit is reached. Limits are checked before each
/// suggestion, so an issued evaluation always completes and is logged.
pub fn run<O: Objective + ?Sized>(
    optimizer: &mut dyn Optimizer,
    objective: &mut O,
    budget: &BudgetSpec,
) -> Result<RunOutcome> {
    budget.validate()?;
    let started = Instant::now();
    let mut log = TrialLog::default();
    let mut cumulative = 0.0;
    let mut best = f64::INFINITY;
    let stop = loop {
        let n = log.len() as u64;
        if budget.max_evals.is_some_and(|m| n >= m) {
            break StopReason::MaxEvals;
        }
        if budget.max_total_cost.is_some_and(|m| cumulative >= m) {
            break StopReason::MaxTotalCost;
        }
        if budget.max_iterations.is_some_and(|m| optimizer.iterations() >= m) {
            break StopReason::MaxIterations;
        }
        if budget.wall_clock_secs.is_some_and(|m| started.elapsed().as_secs_f64() >= m) {
            break StopReason::WallClock;
        }
        let s = match optimizer.suggest() {
            Ok(s) => s,
            Err(e) => break StopReason::Failed(e),
        };
        let config = optimizer.space().denormalize(&s.point);
        let mut eval = match objective.evaluate(&s.point, &config) {
            Ok(e) => e,
            Err(e) => break StopReason::Failed(e),
        };
        if eval.is_failed() {
            eval.loss = f64::INFINITY;
        }
        if let Err(e) = optimizer.observe(&s.point, eval.loss, eval.cost) {
            break StopReason::Failed(e);
        }
        cumulative += eval.cost;
        if eval.loss < best {
            best = eval.loss;
        }
        log.records.push(EvaluationRecord {
            index: n,
            config,
            point: s.point,
            loss: eval.loss,
            cost: eval.cost,
            cumulative_cost: cumulative,
            round: s.round,
            best_so_far: best,
            kind: s.kind,
            iteration: s.iteration,
            incumbent_loss: optimizer.incumbent_loss(),
            failed: eval.is_failed(),
            error: eval.error,
        });
    };
    Ok(RunOutcome { log, stop })
}

/// Runs `task` once per seed in parallel; results keep the seed order.
pub fn run_seeds<T, F>(seeds: &[u64], task: F) -> Vec<(u64, T)>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    seeds.par_iter().map(|&s| (s, task(s))).collect()
}

/// Best-so-far loss as a step function of cumulative cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceCurve {
    pub points: Vec<(f64, f64)>,
}

impl PerformanceCurve {
    /// Value at cumulative cost `c`; `None` before the first evaluation.
    pub fn value_at(&self, c: f64) -> Option<f64> {
        let idx = self.points.partition_point(|&(x, _)| x <= c);
        (idx > 0).then(|| self.points[idx - 1].1)
    }
}

pub fn curve(log: &TrialLog) -> Result<PerformanceCurve> {
    if log.is_empty() {
        return Err(Error::Empty);
    }
    Ok(PerformanceCurve {
        points: log.records.iter().map(|r| (r.cumulative_cost, r.best_so_far)).collect(),
    })
}

/// Mean curve with 95% Student-t bands on a shared cost grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub cost: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n: usize,
}

/// Mean and 95% half-width over `values`; the half-width is 0 for one value.
pub fn student_t_ci(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 || !mean.is_finite() {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Domain(e.to_string()))?
        .inverse_cdf(0.975);
    Ok((mean, t * (var / n as f64).sqrt()))
}

/// Aligns curves on the union of their cost points, carrying the last value
/// forward. The grid starts where every curve has a value.
pub fn aggregate(curves: &[PerformanceCurve]) -> Result<AggregateCurve> {
    if curves.is_empty() || curves.iter().any(|c| c.points.is_empty()) {
        return Err(Error::Empty);
    }
    let start = curves.iter().map(|c| c.points[0].0).fold(f64::NEG_INFINITY, f64::max);
    let mut grid: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.0))
        .filter(|&x| x >= start)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut out = AggregateCurve {
        cost: Vec::with_capacity(grid.len()),
        mean: Vec::with_capacity(grid.len()),
        lower: Vec::with_capacity(grid.len()),
        upper: Vec::with_capacity(grid.len()),
        n: curves.len(),
    };
    for &c in &grid {
        let vals: Vec<f64> = curves.iter().map(|cv| cv.value_at(c).expect("grid starts late enough")).collect();
        let (m, h) = student_t_ci(&vals)?;
        out.cost.push(c);
        out.mean.push(m);
        out.lower.push(m - h);
        out.upper.push(m + h);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecreaseReport {
    pub mean: f64,
    pub std_err: f64,
    pub bound: f64,
    pub gradient_norm: f64,
    pub passed: bool,
}

/// Runs `samples` independent single iterations of the step rule from `x`
/// and compares the mean decrease `f(x) − f(x⁺)` with
/// `δ·c_d·‖∇f(x)‖ − Lδ²/2`. Probes are clamped to the cube, so `x` should sit
/// at least `delta` away from every face.
pub fn check_expected_decrease<R: Rng + ?Sized>(
    objective: &SyntheticObjective,
    x: &NormPoint,
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> Result<DecreaseReport> {
    let d = objective.dim();
    if x.len() != d {
        return Err(Error::InvalidConfig("point dimension does not match the objective".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidConfig("need at least two samples".into()));
    }
    let space = SearchSpace::unit_cube(&vec![0.5; d])?;
    let cd = if d == 1 { 1.0 } else { c_d(d)? };
    let fx = objective.loss(x);
    let mut decreases = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut kernel = Flow2Kernel::new(x.clone(), fx, delta)?;
        let u = sample_sphere(d, rng);
        let mut after = fx;
        let mut probe = kernel.suggest_along(&space, u)?;
        while let Probe::Evaluate(p, _) = probe {
            let outcome = kernel.observe(&p, objective.loss(&p))?;
            if outcome.completes_iteration() {
                after = kernel.incumbent_loss();
                break;
            }
            probe = kernel.suggest(&space, rng)?;
        }
        decreases.push(fx - after);
    }
    let n = samples as f64;
    let mean = decreases.iter().sum::<f64>() / n;
    let var = decreases.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std_err = (var / n).sqrt();
    let g = objective.gradient_norm(x);
    let bound = delta * cd * g - objective.smoothness_l() * delta * delta / 2.0;
    Ok(DecreaseReport { mean, std_err, bound, gradient_norm: g, passed: mean >= bound - 3.0 * std_err })
}

/// Which total-cost bound applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundBranch {
    /// The target was reached before the cost could climb to `g(x̃*)`.
    Climbing,
    /// The target took longer than the climb.
    Saturated,
}

/// Total-cost bound for an additive cost change `D` per step.
pub fn additive_cost_bound(k_star: u64, g_star: f64, g0: f64, d: f64) -> (f64, BoundBranch) {
    let k = k_star as f64;
    let gamma = g_star - g0;
    if d == 0.0 || k <= (gamma / d).ceil() {
        (k * (g_star + g0) + 2.0 * k * d, BoundBranch::Climbing)
    } else {
        (2.0 * k * g_star + 4.0 * k * d - (gamma / d - 1.0) * gamma, BoundBranch::Saturated)
    }
}

/// Total-cost bound for a multiplicative cost change `C` per step.
pub fn factorized_cost_bound(k_star: u64, g_star: f64, g0: f64, c: f64) -> (f64, BoundBranch) {
    let k = k_star as f64;
    if c == 1.0 {
        return (2.0 * k * g_star, BoundBranch::Saturated);
    }
    let gamma = g_star / g0;
    let climb = gamma.ln() / c.ln();
    let geometric = (gamma - 1.0) / (gamma * (c - 1.0));
    if k <= climb.ceil() {
        (g_star * 2.0 * geometric * c, BoundBranch::Climbing)
    } else {
        (g_star * 2.0 * c * (k * c + geometric - climb * c + c), BoundBranch::Saturated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    Additive,
    Factorized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub model: CostModel,
    /// `D = U·δ` for additive costs, `C = exp(δ√|D'|)` for factorized ones.
    pub step_constant: f64,
    pub g_star: f64,
    pub g0: f64,
    /// Consecutive incumbents within one step's cost change.
    pub per_step_ok: bool,
    pub per_step_margin: f64,
    /// Every evaluation within one step's cost change of its incumbent.
    pub per_eval_ok: bool,
    /// Every incumbent within one step of `g(x̃*)`. Only guaranteed when the
    /// objective is locally monotone.
    pub incumbent_ok: bool,
    pub incumbent_margin: f64,
    pub incumbent_bound_required: bool,
    pub epsilon: f64,
    pub k_star: Option<u64>,
    pub g_total: f64,
    pub bound_value: f64,
    pub branch: Option<BoundBranch>,
    pub satisfied: bool,
    pub observed_r: f64,
    pub r0: f64,
}

impl TheoryReport {
    /// The pathwise checks that must hold on every run.
    pub fn pathwise_ok(&self) -> bool {
        self.per_step_ok && self.per_eval_ok && (self.incumbent_ok || !self.incumbent_bound_required)
    }
}

fn cost_excess(model: CostModel, got: f64, base: f64, step: f64) -> f64 {
    match model {
        CostModel::Additive => got - (base + step),
        CostModel::Factorized => got / (base * step) - 1.0,
    }
}

const COST_TOL: f64 = 1e-12;

/// Checks the pathwise cost bounds and the total-cost bound on a log of a
/// single fixed-stepsize run (one start, then plus/minus probes).
///
/// `K*` is the number of iterations until the incumbent's gradient norm
/// first drops to `epsilon`; `G_total` sums the evaluation costs of those
/// iterations, leaving out the initial evaluation.
pub fn check_cost_bounds(
    log: &TrialLog,
    objective: &SyntheticObjective,
    delta: f64,
    epsilon: f64,
) -> Result<TheoryReport> {
    let flags = objective.flags();
    if !flags.lipschitz_cost {
        return Err(Error::InvalidConfig(format!("`{}` has no Lipschitz cost", objective.name())));
    }
    let first = log.records.first().ok_or(Error::Empty)?;
    if first.kind != EvalKind::Start
        || log.records[1..]
            .iter()
            .any(|r| !matches!(r.kind, EvalKind::Plus | EvalKind::Minus))
    {
        return Err(Error::InvalidConfig(
            "cost bounds need a single-round log of plus/minus probes".into(),
        ));
    }
    let model = if flags.factorized_cost { CostModel::Factorized } else { CostModel::Additive };
    let step = match model {
        CostModel::Additive => objective.cost_lipschitz_u().unwrap_or(0.0) * delta,
        CostModel::Factorized => (delta * (objective.cost_dims().len() as f64).sqrt()).exp(),
    };
    let g_star = objective.optimum_cost();
    let g0 = objective.cost(&first.point);
    let constant_cost = match model {
        CostModel::Additive => step == 0.0,
        CostModel::Factorized => step == 1.0,
    };
    if !constant_cost && g0.partial_cmp(&g_star) != Some(Ordering::Less) {
        return Err(Error::InvalidConfig("the initial point must be cheaper than the optimum".into()));
    }
    let optimum = objective.optimum();

    let mut inc_point = first.point.clone();
    let mut inc_loss = first.loss;
    let mut inc_cost = g0;
    let mut per_step_margin = f64::NEG_INFINITY;
    let mut per_eval_ok = true;
    let mut incumbent_margin = cost_excess(model, g0, g_star, step);
    let mut observed_r = inc_point.distance(optimum);
    let mut k_star = (objective.gradient_norm(&inc_point) <= epsilon).then_some(0u64);
    let mut g_total = 0.0;

    for r in &log.records[1..] {
        if k_star.is_none() {
            g_total += r.cost;
        }
        if cost_excess(model, r.cost, inc_cost, step) > COST_TOL {
            per_eval_ok = false;
        }
        if r.loss < inc_loss {
            per_step_margin = per_step_margin.max(cost_excess(model, r.cost, inc_cost, step));
            incumbent_margin = incumbent_margin.max(cost_excess(model, r.cost, g_star, step));
            inc_point = r.point.clone();
            inc_loss = r.loss;
            inc_cost = r.cost;
            observed_r = observed_r.max(inc_point.distance(optimum));
            if k_star.is_none() && objective.gradient_norm(&inc_point) <= epsilon {
                k_star = Some(r.iteration.map_or(0, |i| i + 1));
            }
        }
    }

    let (bound_value, branch) = match k_star {
        Some(k) => {
            let (b, br) = match model {
                CostModel::Additive => additive_cost_bound(k, g_star, g0, step),
                CostModel::Factorized => factorized_cost_bound(k, g_star, g0, step),
            };
            (b, Some(br))
        }
        None => (f64::NAN, None),
    };
    Ok(TheoryReport {
        model,
        step_constant: step,
        g_star,
        g0,
        per_step_ok: per_step_margin <= COST_TOL,
        per_step_margin,
        per_eval_ok,
        incumbent_ok: incumbent_margin <= COST_TOL,
        incumbent_margin,
        incumbent_bound_required: flags.local_monotone,
        epsilon,
        k_star,
        g_total,
        bound_value,
        branch,
        satisfied: g_total <= bound_value,
        observed_r,
        r0: objective.loss(&first.point) - objective.optimum_loss(),
    })
}

/// Median of `values`, treating NaN as larger than everything.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}
