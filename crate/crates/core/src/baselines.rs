//! Comparison optimizers: random search and a zeroth-order signed-step local
//! search that reuses CFO's stepsize and restart schedule.
//!
//! The zeroth-order search differs from FLOW² only in its update rule: it
//! probes `x + δu` once and then steps to `x − δ·sign(f(x+δu) − f(x))·u`
//! unconditionally, so its incumbent loss can go up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cfo::{gaussian_restart, StepSchedule};
use crate::error::{Error, Result};
use crate::optimizer::{check_loss, track_best, EvalKind, Optimizer, Suggestion};
use crate::sampler::{sample_sphere, Direction};
use crate::space::{NormPoint, RawConfig, SearchSpace};

/// Random search: i.i.d. uniform samples, projected.
#[derive(Debug, Clone)]
pub struct RandomSearch {
    space: SearchSpace,
    rng: ChaCha8Rng,
    pending: Option<NormPoint>,
    best: Option<(NormPoint, f64)>,
    samples: u64,
}

impl RandomSearch {
    pub fn new(space: SearchSpace, seed: u64) -> Self {
        Self {
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
            best: None,
            samples: 0,
        }
    }
}

/// One random-search proposal.
pub fn rs_suggest<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> NormPoint {
    space.sample_uniform(rng)
}

impl Optimizer for RandomSearch {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn suggest(&mut self) -> Result<Suggestion> {
        if self.pending.is_some() {
            return Err(Error::Protocol("a sample is still outstanding".into()));
        }
        let point = rs_suggest(&self.space, &mut self.rng);
        self.pending = Some(point.clone());
        Ok(Suggestion {
            point,
            kind: EvalKind::Random,
            round: 0,
            iteration: None,
        })
    }

    fn observe(&mut self, point: &NormPoint, loss: f64, _cost: f64) -> Result<()> {
        check_loss(loss)?;
        match &self.pending {
            Some(p) if p == point => {}
            _ => return Err(Error::Protocol("observation does not match the outstanding sample".into())),
        }
        self.pending = None;
        self.samples += 1;
        track_best(&mut self.best, point, loss);
        Ok(())
    }

    fn best_point(&self) -> Option<(&NormPoint, f64)> {
        self.best.as_ref().map(|(p, l)| (p, *l))
    }

    fn incumbent_loss(&self) -> Option<f64> {
        self.best.as_ref().map(|(_, l)| *l)
    }

    fn iterations(&self) -> u64 {
        self.samples
    }
}

#[derive(Debug, Clone)]
enum ZogdStage {
    Start { point: NormPoint, issued: bool },
    Idle,
    AwaitProbe { u: Direction, probe: NormPoint },
    Move { target: NormPoint, issued: bool },
}

/// Zeroth-order signed-step search standing in for the "CFO-0" ablation.
#[derive(Debug, Clone)]
pub struct Zogd {
    space: SearchSpace,
    rng: ChaCha8Rng,
    x0: NormPoint,
    incumbent: NormPoint,
    incumbent_loss: f64,
    stage: ZogdStage,
    schedule: StepSchedule,
    iterations: u64,
    best: Option<(NormPoint, f64)>,
}

const MAX_SILENT_ITERATIONS: u64 = 50_000_000;

impl Zogd {
    pub fn new(space: SearchSpace, init: &RawConfig, seed: u64) -> Result<Self> {
        let x0 = space.project(&space.normalize(init)?);
        let d = space.dim();
        let delta_init = (d as f64).sqrt();
        let delta_lower = space.delta_lower(init, delta_init)?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            incumbent: x0.clone(),
            incumbent_loss: f64::INFINITY,
            stage: ZogdStage::Start {
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

    pub fn from_space(space: SearchSpace, seed: u64) -> Result<Self> {
        let init = space.init_config();
        Self::new(space, &init, seed)
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn incumbent(&self) -> &NormPoint {
        &self.incumbent
    }

    /// Starts an iteration along `u`. Returns the probe to evaluate, or
    /// `None` when the probe projects onto the incumbent (iteration ends).
    fn begin_iteration(&mut self, u: Direction) -> Option<NormPoint> {
        let probe = self.space.project(&self.incumbent.offset(&u, self.schedule.delta()));
        if probe == self.incumbent {
            self.finish_iteration(false);
            None
        } else {
            self.stage = ZogdStage::AwaitProbe { u, probe: probe.clone() };
            Some(probe)
        }
    }

    pub fn suggest_along(&mut self, u: Direction) -> Result<Option<Suggestion>> {
        if !matches!(self.stage, ZogdStage::Idle) {
            return Err(Error::Protocol("suggest_along requires an idle search".into()));
        }
        let iteration = self.iterations;
        Ok(self.begin_iteration(u).map(|point| Suggestion {
            point,
            kind: EvalKind::Probe,
            round: self.schedule.round(),
            iteration: Some(iteration),
        }))
    }

    fn finish_iteration(&mut self, improved: bool) {
        self.iterations += 1;
        self.stage = ZogdStage::Idle;
        if let Some(event) = self.schedule.complete_iteration(improved, self.incumbent_loss) {
            if event.restarted {
                let point = gaussian_restart(&self.space, &self.x0, &mut self.rng);
                self.stage = ZogdStage::Start { point, issued: false };
            }
        }
    }
}

impl Optimizer for Zogd {
    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn suggest(&mut self) -> Result<Suggestion> {
        let mut silent = 0u64;
        loop {
            match &mut self.stage {
                ZogdStage::Start { point, issued } => {
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
                ZogdStage::Idle => {
                    let u = sample_sphere(self.space.dim(), &mut self.rng);
                    if let Some(s) = self.suggest_along(u)? {
                        return Ok(s);
                    }
                    silent += 1;
                    if silent >= MAX_SILENT_ITERATIONS {
                        return Err(Error::Stalled("no evaluable probe found".into()));
                    }
                }
                ZogdStage::Move { target, issued } if !*issued => {
                    *issued = true;
                    return Ok(Suggestion {
                        point: target.clone(),
                        kind: EvalKind::Move,
                        round: self.schedule.round(),
                        iteration: Some(self.iterations),
                    });
                }
                _ => return Err(Error::Protocol("an evaluation is still outstanding".into())),
            }
        }
    }

    fn observe(&mut self, point: &NormPoint, loss: f64, _cost: f64) -> Result<()> {
        check_loss(loss)?;
        match std::mem::replace(&mut self.stage, ZogdStage::Idle) {
            ZogdStage::Start { point: start, issued } if issued && *point == start => {
                self.incumbent = start;
                self.incumbent_loss = loss;
            }
            ZogdStage::AwaitProbe { u, probe } if *point == probe => {
                let diff = loss - self.incumbent_loss;
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let target = self
                    .space
                    .project(&self.incumbent.offset(&u, -self.schedule.delta() * sign));
                if sign == 0.0 || target == self.incumbent {
                    self.finish_iteration(false);
                } else if target == probe {
                    // stepping along +u lands on the probe: its loss is known
                    self.incumbent = probe;
                    self.incumbent_loss = loss;
                    self.finish_iteration(true);
                } else {
                    self.stage = ZogdStage::Move { target, issued: false };
                }
            }
            ZogdStage::Move { target, issued: true } if *point == target => {
                let improved = loss < self.incumbent_loss;
                self.incumbent = target;
                self.incumbent_loss = loss;
                self.finish_iteration(improved);
            }
            other => {
                self.stage = other;
                return Err(Error::Protocol("observation does not match the outstanding point".into()));
            }
        }
        track_best(&mut self.best, point, loss);
        Ok(())
    }

    fn best_point(&self) -> Option<(&NormPoint, f64)> {
        self.best.as_ref().map(|(p, l)| (p, *l))
    }

    fn incumbent_loss(&self) -> Option<f64> {
        match self.stage {
            ZogdStage::Start { .. } => None,
            _ => Some(self.incumbent_loss),
        }
    }

    fn iterations(&self) -> u64 {
        self.iterations
    }
}
