use cfo_core::harness::{curve, run, BudgetSpec, EvaluationRecord, StopReason, TrialLog};
use cfo_core::objectives::SyntheticObjective;
use cfo_core::{Cfo, DimensionSpec, Optimizer, RandomSearch, SearchSpace, Zogd};
use proptest::prelude::*;

fn mixed_space() -> SearchSpace {
    SearchSpace::new(vec![
        DimensionSpec::float("lr", 1e-4, 1.0).log().with_init(1e-3),
        DimensionSpec::integer("trees", 4, 32768).log().with_init(4.0),
        DimensionSpec::integer("depth", 1, 12).with_init(1.0),
        DimensionSpec::float("subsample", 0.5, 1.0).with_init(1.0),
    ])
    .unwrap()
}

fn optimizers(space: &SearchSpace, seed: u64) -> Vec<Box<dyn Optimizer>> {
    let init = space.init_config();
    vec![
        Box::new(Cfo::new(space.clone(), &init, seed).unwrap()),
        Box::new(Zogd::new(space.clone(), &init, seed).unwrap()),
        Box::new(RandomSearch::new(space.clone(), seed)),
    ]
}

fn sphere_log(seed: u64, evals: u64) -> TrialLog {
    let obj = SyntheticObjective::builtin("sphere", 4).unwrap();
    let mut opt = Cfo::from_space(SearchSpace::unit_cube(obj.low_cost_init()).unwrap(), seed).unwrap();
    run(&mut opt, &mut &obj, &BudgetSpec::evals(evals)).unwrap().log
}

#[test]
fn runs_are_deterministic_per_seed() {
    assert_eq!(sphere_log(11, 300), sphere_log(11, 300));
    assert_ne!(sphere_log(11, 300), sphere_log(12, 300));
}

#[test]
fn cfo_improves_on_the_start() {
    let log = sphere_log(0, 1000);
    let first = log.records[0].loss;
    assert!(log.best().unwrap().loss < 0.1 * first);
}

#[test]
fn cost_budget_stops_the_run() {
    let obj = SyntheticObjective::builtin("factorized_cost", 3).unwrap();
    let mut opt = Cfo::from_space(SearchSpace::unit_cube(obj.low_cost_init()).unwrap(), 2).unwrap();
    let out = run(&mut opt, &mut &obj, &BudgetSpec::cost(200.0)).unwrap();
    assert_eq!(out.stop, StopReason::MaxTotalCost);
    let log = out.log;
    assert!(log.total_cost() >= 200.0);
    assert!(log.total_cost() - log.records.last().unwrap().cost < 200.0);
    let c = curve(&log).unwrap();
    assert_eq!(c.points.len(), log.len());
}

#[test]
fn log_lines_round_trip() {
    for r in &sphere_log(5, 200).records {
        let line = serde_json::to_string(r).unwrap();
        assert!(!line.contains('\n'));
        let back: EvaluationRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(&back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn suggestions_stay_feasible(seed in 0u64..1000) {
        let space = mixed_space();
        for mut opt in optimizers(&space, seed) {
            for i in 0..60 {
                let s = opt.suggest().unwrap();
                let coords = s.point.clone().into_inner();
                prop_assert!(coords.iter().all(|c| (0.0..=1.0).contains(c)));
                prop_assert_eq!(space.project(&s.point), s.point.clone());
                let cfg = space.denormalize(&s.point);
                let trees = cfg.get("trees").unwrap();
                let depth = cfg.get("depth").unwrap();
                prop_assert!(trees.fract() == 0.0 && (4.0..=32768.0).contains(&trees));
                prop_assert!(depth.fract() == 0.0 && (1.0..=12.0).contains(&depth));
                let loss = (cfg.get("lr").unwrap().ln() + 4.0).powi(2) + depth / 12.0 + (i % 3) as f64;
                opt.observe(&s.point, loss, 1.0).unwrap();
            }
        }
    }

    #[test]
    fn best_so_far_never_rises(seed in 0u64..1000) {
        let log = sphere_log(seed, 150);
        for w in log.records.windows(2) {
            prop_assert!(w[1].best_so_far <= w[0].best_so_far);
            prop_assert!(w[1].cumulative_cost > w[0].cumulative_cost);
        }
        let best = log.best().unwrap();
        prop_assert_eq!(best.loss, log.records.last().unwrap().best_so_far);
    }
}
