//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use cfo_core::baselines::{RandomSearch, Zogd};
use cfo_core::cfo::{no_improvement_threshold, Cfo, StepSchedule};
use cfo_core::flow2::Flow2Search;
use cfo_core::harness::{
    check_cost_bounds, check_expected_decrease, median, run, run_seeds, BudgetSpec, TheoryReport, TrialLog,
};
use cfo_core::objectives::{SyntheticObjective, BUILTIN_NAMES};
use cfo_core::optimizer::Optimizer;
use cfo_core::sampler::{c_d, sample_sphere};
use cfo_core::space::{DimensionSpec, NormPoint, RawConfig, SearchSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "acceptance/protocol.rs"]
mod protocol;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn cfo_on(obj: &SyntheticObjective, seed: u64) -> Cfo {
    let space = SearchSpace::unit_cube(obj.low_cost_init()).unwrap();
    Cfo::from_space(space, seed).unwrap()
}

fn flow2_log(obj: &SyntheticObjective, delta: f64, budget: BudgetSpec, seed: u64) -> TrialLog {
    let space = SearchSpace::unit_cube(obj.low_cost_init()).unwrap();
    let mut opt = Flow2Search::seeded(space, obj.low_cost_init().clone(), delta, seed).unwrap();
    run(&mut opt, &mut obj.clone(), &budget).unwrap().log
}

fn c_d_constant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ok = (c_d(2).unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-12
        && (c_d(3).unwrap() - 0.5).abs() < 1e-12;
    let mut parts = Vec::new();
    for d in [2, 3, 10] {
        let n = 1_000_000;
        let mc = (0..n).map(|_| sample_sphere(d, &mut rng)[0].abs()).sum::<f64>() / n as f64;
        let exact = c_d(d).unwrap();
        ok &= (mc - exact).abs() <= 0.002;
        parts.push(format!("d={d} exact={exact:.5} mc={mc:.5}"));
    }
    Outcome::new(ok, parts.join(", "))
}

fn expected_decrease() -> Outcome {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let mut checks = 0;
    for d in [2usize, 5, 10] {
        let obj = SyntheticObjective::sphere(vec![0.5; d]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + d as u64);
        for _ in 0..5 {
            // interior points, away from the optimum
            let x: NormPoint = loop {
                let x: Vec<f64> = (0..d).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
                if obj.gradient_norm(&x) > 0.05 {
                    break x.into();
                }
            };
            for delta in [0.01, 0.05] {
                let rep = check_expected_decrease(&obj, &x, delta, 20_000, &mut rng).unwrap();
                ok &= rep.passed;
                worst = worst.min((rep.mean - rep.bound) / rep.std_err.max(f64::MIN_POSITIVE));
                checks += 1;
            }
        }
    }
    Outcome::new(ok, format!("{checks} checks, smallest (mean - bound) = {worst:.2} std errors"))
}

/// Best-so-far and the incumbent loss (within a round) never go up, and no
/// iteration issues more than two evaluations.
fn monotone_violations(log: &TrialLog) -> Vec<String> {
    let mut out = Vec::new();
    let mut per_iteration: HashMap<u64, u32> = HashMap::new();
    for w in log.records.windows(2) {
        if w[1].best_so_far > w[0].best_so_far {
            out.push(format!("best rose at {}", w[1].index));
        }
        if w[1].round == w[0].round {
            if let (Some(a), Some(b)) = (w[0].incumbent_loss, w[1].incumbent_loss) {
                if b > a {
                    out.push(format!("incumbent rose at {}", w[1].index));
                }
            }
        }
    }
    for r in &log.records {
        if let Some(i) = r.iteration {
            *per_iteration.entry(i).or_default() += 1;
        }
    }
    if let Some((i, n)) = per_iteration.iter().find(|(_, &n)| n > 2) {
        out.push(format!("iteration {i} issued {n} evaluations"));
    }
    out
}

fn monotone_incumbent() -> Outcome {
    let mut bad = Vec::new();
    let mut runs = 0;
    for name in BUILTIN_NAMES {
        let d = if *name == "knn" { 1 } else { 3 };
        let obj = SyntheticObjective::builtin(name, d).unwrap();
        let results = run_seeds(&seeds(100), |s| {
            let mut opt = cfo_on(&obj, s);
            let out = run(&mut opt, &mut &obj, &BudgetSpec::evals(2000)).unwrap();
            (out.log.len(), monotone_violations(&out.log))
        });
        for (s, (len, v)) in results {
            runs += 1;
            if len != 2000 {
                bad.push(format!("{name} seed {s}: {len} records"));
            }
            bad.extend(v.into_iter().map(|m| format!("{name} seed {s}: {m}")));
        }
    }
    let detail = if bad.is_empty() {
        format!("{runs} runs x 2000 evaluations clean")
    } else {
        format!("{} violations, first: {}", bad.len(), bad[0])
    };
    Outcome::new(bad.is_empty(), detail)
}

fn cost_reports(obj: &SyntheticObjective, delta: f64, iterations: u64, epsilon: f64) -> Vec<TheoryReport> {
    run_seeds(&seeds(20), |s| {
        let log = flow2_log(obj, delta, BudgetSpec::iterations(iterations), s);
        check_cost_bounds(&log, obj, delta, epsilon).unwrap()
    })
    .into_iter()
    .map(|(_, r)| r)
    .collect()
}

fn additive_sphere(d: usize) -> SyntheticObjective {
    let mut slope = vec![0.0; d];
    slope[0] = 1.0;
    SyntheticObjective::additive_cost(vec![0.5; d], slope, 1.0).unwrap()
}

fn factorized_sphere(d: usize) -> SyntheticObjective {
    SyntheticObjective::factorized_cost(vec![0.5; d], (0..d.min(2)).collect()).unwrap()
}

fn pathwise_cost_bounds() -> Outcome {
    let delta = 0.05;
    let mut ok = true;
    let mut parts = Vec::new();
    // Local monotonicity only holds on the one-dimensional instances; there
    // every bound is asserted. In d = 3 the per-step and per-evaluation bounds
    // are asserted and the incumbent bound is reported.
    for (label, obj) in [
        ("additive d=1", additive_sphere(1)),
        ("factorized d=1", factorized_sphere(1)),
        ("additive d=3", additive_sphere(3)),
        ("factorized d=3", factorized_sphere(3)),
    ] {
        let reps = cost_reports(&obj, delta, 1000, 0.05);
        let pathwise = reps.iter().all(TheoryReport::pathwise_ok);
        let inc_viol = reps.iter().filter(|r| !r.incumbent_ok).count();
        let margin = reps.iter().map(|r| r.incumbent_margin).fold(f64::NEG_INFINITY, f64::max);
        let required = reps[0].incumbent_bound_required;
        ok &= pathwise;
        parts.push(format!(
            "{label}: pathwise {} incumbent-bound misses {inc_viol}/20{} max excess {margin:.4}",
            if pathwise { "ok" } else { "FAILED" },
            if required { "" } else { " (informational)" },
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn total_cost_bound() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, obj, delta, iters) in [
        ("additive d=1", additive_sphere(1), 0.01, 2000),
        ("additive d=3", additive_sphere(3), 0.01, 20_000),
    ] {
        let reps = cost_reports(&obj, delta, iters, 0.05);
        let held = reps.iter().filter(|r| r.satisfied).count();
        let margins: Vec<f64> = reps.iter().map(|r| r.bound_value - r.g_total).collect();
        let k: Vec<f64> = reps.iter().map(|r| r.k_star.map_or(f64::NAN, |k| k as f64)).collect();
        ok &= held >= 18;
        parts.push(format!(
            "{label}: {held}/20 within bound, min margin {:.2}, median K* {:.0}",
            margins.iter().copied().fold(f64::INFINITY, f64::min),
            median(&k).unwrap()
        ));
    }
    Outcome::new(ok, parts.join("; "))
}

fn convergence_trend() -> Outcome {
    let obj = SyntheticObjective::sphere(vec![0.5; 10]).unwrap();
    let mut gaps = Vec::new();
    for k in [100u64, 1000, 10_000] {
        let delta = 1.0 / (k as f64).sqrt();
        let finals: Vec<f64> = run_seeds(&seeds(20), |s| {
            let log = flow2_log(&obj, delta, BudgetSpec::iterations(k), s);
            log.records.last().unwrap().incumbent_loss.unwrap() - obj.optimum_loss()
        })
        .into_iter()
        .map(|(_, g)| g)
        .collect();
        gaps.push(median(&finals).unwrap());
    }
    let trend = gaps.windows(2).all(|w| w[1] < w[0]);
    // Runs are deterministic, so the first 5000 evaluations of a longer run
    // are exactly the 5000-evaluation run; the extra budget only measures how
    // far past the limit the target is reached.
    let needed: Vec<f64> = run_seeds(&seeds(20), |s| {
        let mut opt = cfo_on(&obj, s);
        let log = run(&mut opt, &mut &obj, &BudgetSpec::evals(100_000)).unwrap().log;
        let target = 1e-2 * log.records[0].loss;
        log.records.iter().find(|r| r.loss <= target).map_or(f64::INFINITY, |r| (r.index + 1) as f64)
    })
    .into_iter()
    .map(|(_, n)| n)
    .collect();
    let reached = needed.iter().filter(|&&n| n <= 5000.0).count();
    Outcome::new(
        trend && reached >= 18,
        format!(
            "median final gap K=1e2 {:.3e}, K=1e3 {:.3e}, K=1e4 {:.3e}; CFO hit 1% of initial loss within 5000 evaluations in {reached}/20 (median evaluations needed {:.0})",
            gaps[0],
            gaps[1],
            gaps[2],
            median(&needed).unwrap()
        ),
    )
}

fn frugality() -> Outcome {
    let obj = factorized_sphere(6);
    let target = 0.01;
    let budget = BudgetSpec::cost(50_000.0);
    let cost_to_target = |opt: &mut dyn Optimizer| {
        let log = run(opt, &mut &obj, &budget).unwrap().log;
        log.cost_to_reach(target).unwrap_or(f64::INFINITY)
    };
    let space = || SearchSpace::unit_cube(obj.low_cost_init()).unwrap();
    let collect = |v: Vec<(u64, f64)>| median(&v.into_iter().map(|p| p.1).collect::<Vec<_>>()).unwrap();
    let cfo = collect(run_seeds(&seeds(20), |s| cost_to_target(&mut Cfo::from_space(space(), s).unwrap())));
    let rs = collect(run_seeds(&seeds(20), |s| cost_to_target(&mut RandomSearch::new(space(), s))));
    let zogd = collect(run_seeds(&seeds(20), |s| cost_to_target(&mut Zogd::from_space(space(), s).unwrap())));
    Outcome::new(
        cfo < rs && cfo < zogd,
        format!("median cost to loss <= {target}: CFO {cfo:.1}, RS {rs:.1}, ZOGD {zogd:.1} (budget 50000)"),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

fn bookkeeping() -> Outcome {
    let mut fails = Vec::new();
    let mut check = |cond: bool, what: &str| {
        if !cond {
            fails.push(what.to_string());
        }
    };

    let cube = SearchSpace::unit_cube(&[0.2, 0.4]).unwrap();
    check(cube.delta_lower(&cube.init_config(), 1.4).unwrap() == 0.01, "no-integer floor");
    let trees = SearchSpace::new(vec![DimensionSpec::integer("trees", 4, 32768).log().with_init(100.0)]).unwrap();
    let cfg: RawConfig = [("trees", 100.0)].into_iter().collect();
    check(close(trees.delta_lower(&cfg, 3.0).unwrap(), 0.003_312_759_917_785_397), "log-integer floor");
    let mixed = SearchSpace::new(vec![
        DimensionSpec::float("lr", 1e-4, 1.0).log().with_init(0.1),
        DimensionSpec::integer("leaves", 4, 32768).log().with_init(4.0),
        DimensionSpec::integer("depth", 1, 11).with_init(1.0),
    ])
    .unwrap();
    check(
        close(mixed.delta_lower(&mixed.init_config(), 2.0).unwrap(), 2.0 * 1.25f64.ln() / 8192f64.ln()),
        "coarsest integer wins",
    );

    check(no_improvement_threshold(9) == 256, "threshold d=9");
    let nine = SearchSpace::unit_cube(&[0.5; 9]).unwrap();
    let cfo = Cfo::from_space(nine, 0).unwrap();
    check(cfo.schedule().delta_init() == 3.0 && cfo.delta() == 3.0, "delta_init d=9");
    check(cfo.schedule().threshold() == 256, "cfo threshold d=9");

    // Three rounds at d = 2 (threshold 2), delta_init = √2, floor 0.5. The
    // move at the third iteration lands mid-streak and must not clear n.
    let s2 = 2f64.sqrt();
    let mut sch = StepSchedule::new(2, s2, 0.5);
    let steps: [(bool, f64); 18] = [
        (true, 5.0),
        (false, 5.0),
        (true, 4.0),
        (false, 4.0),
        (false, 4.0),
        (false, 4.0),
        (true, 3.0),
        (false, 3.0),
        (false, 3.0),
        (false, 6.0),
        (true, 5.0),
        (false, 5.0),
        (false, 5.0),
        (false, 5.0),
        (false, 5.0),
        (false, 5.0),
        (false, 8.0),
        (false, 8.0),
    ];
    for (moved, loss) in steps {
        sch.complete_iteration(moved, loss);
    }
    let ev = sch.events();
    // (round, k, k', η, reduced δ, δ of the next round on restart)
    let d2 = 1.0 / 3f64.sqrt();
    let d3 = d2 / 1.5f64.sqrt();
    let d4 = (1.0 + s2) / 3f64.sqrt();
    let d5 = d4 / 5f64.sqrt();
    let d6 = d5 / 7f64.sqrt();
    let expected = [
        (0, 4, 2, 2.0, 1.0, None),
        (0, 6, 2, 3.0, d2, None),
        (0, 9, 6, 1.5, d3, Some(1.0 + s2)),
        (1, 3, 1, 3.0, d4, None),
        (1, 5, 1, 5.0, d5, None),
        (1, 7, 1, 7.0, d6, Some(2.0 + s2)),
        (2, 2, 0, 2.0, (2.0 + s2) / s2, None),
    ];
    check(ev.len() == expected.len(), "event count");
    for (e, x) in ev.iter().zip(expected) {
        let ok = e.round == x.0
            && e.k == x.1
            && e.k_prime == x.2
            && close(e.eta, x.3)
            && close(e.delta_after, x.4)
            && e.restarted == x.5.is_some()
            && match (e.delta_next, x.5) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            };
        check(ok, &format!("trace event {e:?}"));
    }
    check(sch.round() == 2 && sch.k() == 2 && sch.n() == 0, "final counters");
    check(close(sch.delta(), (2.0 + s2) / s2), "final stepsize");

    Outcome::new(fails.is_empty(), if fails.is_empty() { "all traces match".to_string() } else { fails.join("; ") })
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "c_d constant", Some(Duration::from_secs(5)), c_d_constant),
        (2, "expected one-step decrease", Some(Duration::from_secs(30)), expected_decrease),
        (3, "monotone incumbent", None, monotone_incumbent),
        (4, "pathwise cost bounds", Some(Duration::from_secs(20)), pathwise_cost_bounds),
        (5, "total-cost bound", None, total_cost_bound),
        (6, "convergence trend", Some(Duration::from_secs(60)), convergence_trend),
        (7, "frugality vs RS and ZOGD", Some(Duration::from_secs(60)), frugality),
        (8, "stepsize bookkeeping", None, bookkeeping),
        (9, "protocol round trip", None, protocol::round_trip),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let mut out = f();
        let took = t.elapsed();
        if let Some(limit) = limit {
            if took > limit {
                out.passed = false;
                out.detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
            }
        }
        println!(
            "[{}] criterion {id}: {name} ({:.1}s): {}",
            if out.passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
        failed += usize::from(!out.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
