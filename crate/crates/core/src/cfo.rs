//! CFO: FLOW² wrapped with a self-adjusting stepsize and randomized restarts.
//!
//! The search space is the normalized unit cube. Per round `r`:
//!
//! * `δ` starts at `r + δ_init` with `δ_init = √d`;
//! * every `2^(d−1)` iterations without a move (counted since the last
//!   reduction, moves in between do not clear the count), `δ ← δ/√η` with
//!   `η = k/k′`, where `k` counts iterations of the round and `k′` is the
//!   iteration that last lowered the round-best loss;
//! * once `δ ≤ δ_lower`, the search restarts from a Gaussian perturbation of
//!   the initial point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flow2::{Flow2Kernel, Probe};
use crate::optimizer::{check_loss, track_best, EvalKind, Optimizer, Suggestion};
use crate::space::{NormPoint, RawConfig, SearchSpace};

/// No-improvement threshold `2^(d−1)`, saturating for very large `d`.
pub fn no_improvement_threshold(d: usize) -> u64 {
    assert!(d >= 1);
    1u64.checked_shl((d - 1) as u32).unwrap_or(u64::MAX)
}

/// One stepsize reduction, as applied when the no-improvement counter fires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeEvent {
    pub round: u64,
    pub k: u64,
    pub k_prime: u64,
    pub eta: f64,
    pub delta_before: f64,
    pub delta_after: f64,
    /// The reduced stepsize hit the floor and a new round started.
    pub restarted: bool,
    /// Stepsize of the new round when `restarted`.
    pub delta_next: Option<f64>,
}

/// Iteration bookkeeping shared by CFO and the zeroth-order baseline:
/// counters `k, k′, n, r`, round-best loss and the stepsize.
#[derive(Debug, Clone)]
pub struct StepSchedule {
    delta: f64,
    delta_init: f64,
    delta_lower: f64,
    threshold: u64,
    k: u64,
    k_prime: u64,
    n: u64,
    r: u64,
    round_best: f64,
    events: Vec<StepsizeEvent>,
}

impl StepSchedule {
    pub fn new(d: usize, delta_init: f64, delta_lower: f64) -> Self {
        Self {
            delta: delta_init,
            delta_init,
            delta_lower,
            threshold: no_improvement_threshold(d),
            k: 0,
            k_prime: 0,
            n: 0,
            r: 0,
            round_best: f64::INFINITY,
            events: Vec::new(),
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn delta_init(&self) -> f64 {
        self.delta_init
    }

    pub fn delta_lower(&self) -> f64 {
        self.delta_lower
    }

    pub fn set_delta_lower(&mut self, v: f64) {
        self.delta_lower = v;
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn k_prime(&self) -> u64 {
        self.k_prime
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn round(&self) -> u64 {
        self.r
    }

    pub fn round_best(&self) -> f64 {
        self.round_best
    }

    pub fn events(&self) -> &[StepsizeEvent] {
        &self.events
    }

    /// Records a completed iteration. `moved` tells whether the incumbent
    /// changed, `loss` is the incumbent loss after the iteration. Returns the
    /// stepsize event when the no-improvement counter fired.
    pub fn complete_iteration(&mut self, moved: bool, loss: f64) -> Option<StepsizeEvent> {
        // n counts rejections since the last reduction; a move does not clear it
        if !moved {
            self.n += 1;
        }
        if loss < self.round_best {
            self.round_best = loss;
            self.k_prime = self.k;
        }
        self.k += 1;
        if self.n < self.threshold {
            return None;
        }
        self.n = 0;
        let eta = if self.k_prime == 0 {
            // no recorded progress after the first iteration of the round
            (self.k as f64).max(2.0)
        } else {
            self.k as f64 / self.k_prime as f64
        };
        let before = self.delta;
        self.delta = before / eta.sqrt();
        let mut event = StepsizeEvent {
            round: self.r,
            k: self.k,
            k_prime: self.k_prime,
            eta,
            delta_before: before,
            delta_after: self.delta,
            restarted: false,
            delta_next: None,
        };
        if self.delta <= self.delta_lower {
            self.k = 0;
            self.k_prime = 0;
            self.round_best = f64::INFINITY;
            self.r += 1;
            self.delta = self.r as f64 + self.delta_init;
            event.restarted = true;
            event.delta_next = Some(self.delta);
        }
        self.events.push(event);
        Some(event)
    }
}

/// Restart point `Proj(g)` with `g ~ N(x0, I)` in normalized coordinates.
pub fn gaussian_restart<R: Rng + ?Sized>(space: &SearchSpace, x0: &NormPoint, rng: &mut R) -> NormPoint {
    let g: Vec<f64> = x0.iter().map(|&m| m + rng.sample::<f64, _>(StandardNormal)).collect();
    space.project(&g.into())
}

#[derive(Debug, Clone)]
enum Stage {
    Start { point: NormPoint, issued: bool },
    Search(Flow2Kernel),
}

/// Iterations resolved without an evaluation in a row before CFO reports a
/// stall; restarts always evaluate, so this only guards pathological spaces.
const MAX_SILENT_ITERATIONS: u64 = 50_000_000;

#[derive(Debug, Clone)]
pub struct Cfo {
    space: SearchSpace,
    rng: ChaCha8Rng,
    x0: NormPoint,
    stage: Stage,
    schedule: StepSchedule,
    iterations: u64,
    best: Option<(NormPoint, f64)>,
}

impl Cfo {
    pub fn new(space: SearchSpace, init: &RawConfig, seed: u64) -> Result<Self> {
        let x0 = space.normalize(init)?;
        let x0 = space.project(&x0);
        let d = space.dim();
        let delta_init = (d as f64).sqrt();
        let delta_lower = space.delta_lower(init, delta_init)?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            stage: Stage::Start {
                point: x0.clone(),
                issued: false,
            },
            x0,
            schedule: StepSchedule::new(d, delta_init, delta_lower),
            space,
            iterations: 0,
            best: None,
        })
    }

    /// CFO started from the space's declared `init` values.
    pub fn from_space(space: SearchSpace, seed: u64) -> Result<Self> {
        let init = space.init_config();
        Self::new(space, &init, seed)
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn delta(&self) -> f64 {
        self.schedule.delta()
    }

    pub fn round(&self) -> u64 {
        self.schedule.round()
    }

    pub fn initial_point(&self) -> &NormPoint {
        &self.x0
    }

    pub fn incumbent(&self) -> Option<&NormPoint> {
        match &self.stage {
            Stage::Search(k) => Some(k.incumbent()),
            Stage::Start { .. } => None,
        }
    }

    fn finish_iteration(&mut self, moved: bool, loss: f64) {
        self.iterations += 1;
        let Some(event) = self.schedule.complete_iteration(moved, loss) else {
            return;
        };
        if event.restarted {
            let point = gaussian_restart(&self.space, &self.x0, &mut self.rng);
            self.stage = Stage::Start { point, issued: false };
        } else if let Stage::Search(kernel) = &mut self.stage {
            kernel
                .set_delta(self.schedule.delta())
                .expect("stepsize stays positive above the floor");
        }
    }
}

impl Optimizer for Cfo {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn suggest(&mut self) -> Result<Suggestion> {
        let mut silent = 0u64;
        loop {
            let probe = match &mut self.stage {
                Stage::Start { point, issued } => {
                    if *issued {
                        return Err(Error::Protocol("start point is still outstanding".into()));
                    }
                    *issued = true;
                    return Ok(Suggestion {
                        point: point.clone(),
                        kind: EvalKind::Start,
                        round: self.schedule.round(),
                        iteration: None,
                    });
                }
                Stage::Search(kernel) => kernel.suggest(&self.space, &mut self.rng)?,
            };
            match probe {
                Probe::Evaluate(point, side) => {
                    return Ok(Suggestion {
                        point,
                        kind: side.into(),
                        round: self.schedule.round(),
                        iteration: Some(self.iterations),
                    })
                }
                Probe::Resolved(outcome) => {
                    let loss = self.incumbent_loss().expect("searching");
                    self.finish_iteration(outcome.moved(), loss);
                    silent += 1;
                    if silent >= MAX_SILENT_ITERATIONS {
                        return Err(Error::Stalled("no evaluable probe found".into()));
                    }
                }
            }
        }
    }

    fn observe(&mut self, point: &NormPoint, loss: f64, _cost: f64) -> Result<()> {
        check_loss(loss)?;
        match &mut self.stage {
            Stage::Start { point: start, issued } => {
                if !*issued || point != start {
                    return Err(Error::Protocol("observation does not match the start point".into()));
                }
                let kernel = Flow2Kernel::new(start.clone(), loss, self.schedule.delta())?;
                self.stage = Stage::Search(kernel);
            }
            Stage::Search(kernel) => {
                let outcome = kernel.observe(point, loss)?;
                if outcome.completes_iteration() {
                    let incumbent_loss = kernel.incumbent_loss();
                    self.finish_iteration(outcome.moved(), incumbent_loss);
                }
            }
        }
        let improved = self.best.as_ref().is_none_or(|(_, b)| loss < *b);
        track_best(&mut self.best, point, loss);
        if improved && self.space.has_integer() {
            // the stepsize floor follows the best configuration
            let best = self.space.denormalize(point);
            if let Ok(v) = self.space.delta_lower(&best, self.schedule.delta_init()) {
                self.schedule.set_delta_lower(v);
            }
        }
        Ok(())
    }

    fn best_point(&self) -> Option<(&NormPoint, f64)> {
        self.best.as_ref().map(|(p, l)| (p, *l))
    }

    fn incumbent_loss(&self) -> Option<f64> {
        match &self.stage {
            Stage::Search(k) => Some(k.incumbent_loss()),
            Stage::Start { .. } => None,
        }
    }

    fn iterations(&self) -> u64 {
        self.iterations
    }
}
