//! The ask-tell surface shared by every optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{NormPoint, RawConfig, SearchSpace};

/// Why a point was proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalKind {
    /// Initial point of a round (the user's init, or a restart point).
    Start,
    /// `x + δu`.
    Plus,
    /// `x − δu`.
    Minus,
    /// One-sided probe of the zeroth-order baseline.
    Probe,
    /// Unconditional move of the zeroth-order baseline.
    Move,
    /// Random-search sample.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub point: NormPoint,
    pub kind: EvalKind,
    pub round: u64,
    /// Index of the iteration this evaluation belongs to, counted over the
    /// whole run. `None` for start points and random samples.
    pub iteration: Option<u64>,
}

pub trait Optimizer: Send {
    fn space(&self) -> &SearchSpace;

    /// Next point to evaluate. Exactly one suggestion may be outstanding.
    fn suggest(&mut self) -> Result<Suggestion>;

    /// Reports the loss (and cost) of the outstanding suggestion.
    fn observe(&mut self, point: &NormPoint, loss: f64, cost: f64) -> Result<()>;

    /// Best point over every observation so far.
    fn best_point(&self) -> Option<(&NormPoint, f64)>;

    /// Loss of the point the search currently moves from.
    fn incumbent_loss(&self) -> Option<f64>;

    /// Completed search iterations.
    fn iterations(&self) -> u64;

    fn best(&self) -> Result<(RawConfig, f64)> {
        let (p, loss) = self.best_point().ok_or(Error::Empty)?;
        Ok((self.space().denormalize(p), loss))
    }
}

pub(crate) fn check_loss(loss: f64) -> Result<()> {
    if loss.is_nan() {
        Err(Error::NanLoss)
    } else {
        Ok(())
    }
}

/// Replaces the tracked best when `loss` is strictly lower.
pub(crate) fn track_best(best: &mut Option<(NormPoint, f64)>, point: &NormPoint, loss: f64) {
    if best.as_ref().is_none_or(|(_, b)| loss < *b) {
        *best = Some((point.clone(), loss));
    }
}
