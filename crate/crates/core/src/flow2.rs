//! The FLOW² iteration as an ask-tell state machine.
//!
//! One iteration samples a direction `u`, proposes `x + δu`, and only if that
//! fails to lower the loss proposes `x − δu`. The incumbent moves only on a
//! strict improvement, so it is always the best point the kernel has seen.
//!
//! A probe that projects back onto the incumbent is resolved as "no
//! improvement" without asking for an evaluation: the strict comparison would
//! reject it anyway.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optimizer::{check_loss, track_best, EvalKind, Optimizer, Suggestion};
use crate::sampler::{sample_sphere, Direction};
use crate::space::{NormPoint, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl From<Side> for EvalKind {
    fn from(side: Side) -> Self {
        match side {
            Side::Plus => EvalKind::Plus,
            Side::Minus => EvalKind::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    MovedPlus,
    MovedMinus,
    /// The plus probe was rejected; the iteration continues with `x − δu`.
    NeedMinus,
    NoImprovement,
}

impl StepOutcome {
    pub fn completes_iteration(self) -> bool {
        self != StepOutcome::NeedMinus
    }

    pub fn moved(self) -> bool {
        matches!(self, StepOutcome::MovedPlus | StepOutcome::MovedMinus)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Evaluate(NormPoint, Side),
    /// The iteration finished without needing an evaluation.
    Resolved(StepOutcome),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Flow2Phase {
    Idle,
    AwaitPlus { u: Direction, candidate: NormPoint },
    PlusRejected { u: Direction },
    AwaitMinus { u: Direction, candidate: NormPoint },
}

#[derive(Debug, Clone)]
pub struct Flow2Kernel {
    incumbent: NormPoint,
    incumbent_loss: f64,
    delta: f64,
    phase: Flow2Phase,
}

impl Flow2Kernel {
    /// Kernel positioned at an already evaluated point.
    pub fn new(incumbent: NormPoint, loss: f64, delta: f64) -> Result<Self> {
        check_loss(loss)?;
        check_delta(delta)?;
        Ok(Self {
            incumbent,
            incumbent_loss: loss,
            delta,
            phase: Flow2Phase::Idle,
        })
    }

    pub fn incumbent(&self) -> &NormPoint {
        &self.incumbent
    }

    pub fn incumbent_loss(&self) -> f64 {
        self.incumbent_loss
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn phase(&self) -> &Flow2Phase {
        &self.phase
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Flow2Phase::Idle
    }

    pub fn set_delta(&mut self, delta: f64) -> Result<()> {
        check_delta(delta)?;
        self.delta = delta;
        Ok(())
    }

    pub fn suggest<R: Rng + ?Sized>(&mut self, space: &SearchSpace, rng: &mut R) -> Result<Probe> {
        match &self.phase {
            Flow2Phase::Idle => {
                let u = sample_sphere(self.incumbent.len(), rng);
                Ok(self.propose_plus(space, u))
            }
            Flow2Phase::PlusRejected { u } => {
                let u = u.clone();
                Ok(self.propose_minus(space, u))
            }
            _ => Err(Error::Protocol(
                "suggest called while a probe is outstanding".into(),
            )),
        }
    }

    /// Starts an iteration along a caller-chosen direction.
    pub fn suggest_along(&mut self, space: &SearchSpace, u: Direction) -> Result<Probe> {
        if !self.is_idle() {
            return Err(Error::Protocol("suggest_along requires an idle kernel".into()));
        }
        if u.len() != self.incumbent.len() {
            return Err(Error::Protocol("direction has the wrong dimension".into()));
        }
        Ok(self.propose_plus(space, u))
    }

    fn propose_plus(&mut self, space: &SearchSpace, u: Direction) -> Probe {
        let candidate = space.project(&self.incumbent.offset(&u, self.delta));
        if candidate == self.incumbent {
            return self.propose_minus(space, u);
        }
        self.phase = Flow2Phase::AwaitPlus {
            u,
            candidate: candidate.clone(),
        };
        Probe::Evaluate(candidate, Side::Plus)
    }

    fn propose_minus(&mut self, space: &SearchSpace, u: Direction) -> Probe {
        let candidate = space.project(&self.incumbent.offset(&u, -self.delta));
        if candidate == self.incumbent {
            self.phase = Flow2Phase::Idle;
            return Probe::Resolved(StepOutcome::NoImprovement);
        }
        self.phase = Flow2Phase::AwaitMinus {
            u,
            candidate: candidate.clone(),
        };
        Probe::Evaluate(candidate, Side::Minus)
    }

    pub fn observe(&mut self, candidate: &NormPoint, loss: f64) -> Result<StepOutcome> {
        check_loss(loss)?;
        let phase = std::mem::replace(&mut self.phase, Flow2Phase::Idle);
        let (side, u, expected) = match phase {
            Flow2Phase::AwaitPlus { u, candidate } => (Side::Plus, u, candidate),
            Flow2Phase::AwaitMinus { u, candidate } => (Side::Minus, u, candidate),
            other => {
                self.phase = other;
                return Err(Error::Protocol("observe called with no outstanding probe".into()));
            }
        };
        if *candidate != expected {
            self.phase = match side {
                Side::Plus => Flow2Phase::AwaitPlus { u, candidate: expected },
                Side::Minus => Flow2Phase::AwaitMinus { u, candidate: expected },
            };
            return Err(Error::Protocol("observed point does not match the outstanding probe".into()));
        }
        if loss < self.incumbent_loss {
            self.incumbent = expected;
            self.incumbent_loss = loss;
            return Ok(match side {
                Side::Plus => StepOutcome::MovedPlus,
                Side::Minus => StepOutcome::MovedMinus,
            });
        }
        Ok(match side {
            Side::Plus => {
                self.phase = Flow2Phase::PlusRejected { u };
                StepOutcome::NeedMinus
            }
            Side::Minus => StepOutcome::NoImprovement,
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("stepsize must be positive and finite, got {delta}")))
    }
}

/// Upper bound on back-to-back iterations resolved without an evaluation
/// before a fixed-step search gives up.
pub const MAX_SILENT_ITERATIONS: u64 = 1_000_000;

/// Vanilla FLOW² with a fixed stepsize: evaluates the start point, then
/// iterates the kernel forever.
pub struct Flow2Search<R> {
    space: SearchSpace,
    rng: R,
    start: NormPoint,
    start_issued: bool,
    delta: f64,
    kernel: Option<Flow2Kernel>,
    iterations: u64,
    best: Option<(NormPoint, f64)>,
}

impl<R: Rng + Send> Flow2Search<R> {
    pub fn new(space: SearchSpace, start: NormPoint, delta: f64, rng: R) -> Result<Self> {
        check_delta(delta)?;
        if start.len() != space.dim() {
            return Err(Error::InvalidConfig("start point has the wrong dimension".into()));
        }
        let start = space.project(&start);
        Ok(Self {
            space,
            rng,
            start,
            start_issued: false,
            delta,
            kernel: None,
            iterations: 0,
            best: None,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kernel(&self) -> Option<&Flow2Kernel> {
        self.kernel.as_ref()
    }
}

impl Flow2Search<ChaCha8Rng> {
    pub fn seeded(space: SearchSpace, start: NormPoint, delta: f64, seed: u64) -> Result<Self> {
        Self::new(space, start, delta, ChaCha8Rng::seed_from_u64(seed))
    }
}

impl<R: Rng + Send> Optimizer for Flow2Search<R> {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn suggest(&mut self) -> Result<Suggestion> {
        let Some(kernel) = self.kernel.as_mut() else {
            if self.start_issued {
                return Err(Error::Protocol("start point is still outstanding".into()));
            }
            self.start_issued = true;
            return Ok(Suggestion {
                point: self.start.clone(),
                kind: EvalKind::Start,
                round: 0,
                iteration: None,
            });
        };
        let mut silent = 0;
        loop {
            match kernel.suggest(&self.space, &mut self.rng)? {
                Probe::Evaluate(point, side) => {
                    return Ok(Suggestion {
                        point,
                        kind: side.into(),
                        round: 0,
                        iteration: Some(self.iterations),
                    })
                }
                Probe::Resolved(_) => {
                    self.iterations += 1;
                    silent += 1;
                    if silent >= MAX_SILENT_ITERATIONS {
                        return Err(Error::Stalled(format!(
                            "{silent} consecutive probes projected onto the incumbent"
                        )));
                    }
                }
            }
        }
    }

    fn observe(&mut self, point: &NormPoint, loss: f64, _cost: f64) -> Result<()> {
        check_loss(loss)?;
        match self.kernel.as_mut() {
            None => {
                if !self.start_issued || *point != self.start {
                    return Err(Error::Protocol("observation does not match the start point".into()));
                }
                self.kernel = Some(Flow2Kernel::new(point.clone(), loss, self.delta)?);
            }
            Some(kernel) => {
                if kernel.observe(point, loss)?.completes_iteration() {
                    self.iterations += 1;
                }
            }
        }
        track_best(&mut self.best, point, loss);
        Ok(())
    }

    fn best_point(&self) -> Option<(&NormPoint, f64)> {
        self.best.as_ref().map(|(p, l)| (p, *l))
    }

    fn incumbent_loss(&self) -> Option<f64> {
        self.kernel.as_ref().map(Flow2Kernel::incumbent_loss)
    }

    fn iterations(&self) -> u64 {
        self.iterations
    }
}
