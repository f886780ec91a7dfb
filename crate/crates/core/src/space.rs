//! Search space definition and the maps between raw hyperparameter values and
//! the internal unit cube.
//!
//! Every dimension is mapped onto `[0, 1]`, either linearly or through a log
//! transform. The optimizers only ever see [`NormPoint`]s; users see
//! [`RawConfig`]s. Integer dimensions are snapped in raw space, so a projected
//! point always denormalizes to whole values.

use std::collections::HashSet;
use std::ops::Deref;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// One hyperparameter: its raw range, its scale and the initial value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub kind: DimensionKind,
    pub lower: f64,
    pub upper: f64,
    pub scale: Scale,
    pub init: f64,
}

impl DimensionSpec {
    /// Continuous, linear dimension initialised at its lower bound.
    pub fn float(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: DimensionKind::Continuous,
            lower,
            upper,
            scale: Scale::Linear,
            init: lower,
        }
    }

    /// Integer, linear dimension initialised at its lower bound.
    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self {
            name: name.into(),
            kind: DimensionKind::Integer,
            lower: lower as f64,
            upper: upper as f64,
            scale: Scale::Linear,
            init: lower as f64,
        }
    }

    pub fn log(mut self) -> Self {
        self.scale = Scale::Log;
        self
    }

    pub fn with_init(mut self, init: f64) -> Self {
        self.init = init;
        self
    }

    pub fn is_integer(&self) -> bool {
        self.kind == DimensionKind::Integer
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidDimension {
            name: self.name.clone(),
            reason,
        };
        if self.name.is_empty() {
            return Err(bad("name must not be empty".into()));
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.init.is_finite()) {
            return Err(bad("bounds and init must be finite".into()));
        }
        if self.lower >= self.upper {
            return Err(bad(format!(
                "lower ({}) must be below upper ({})",
                self.lower, self.upper
            )));
        }
        if self.scale == Scale::Log && self.lower <= 0.0 {
            return Err(bad(format!(
                "log scale requires a positive lower bound, got {}",
                self.lower
            )));
        }
        if self.is_integer() {
            if self.lower.fract() != 0.0 || self.upper.fract() != 0.0 || self.init.fract() != 0.0 {
                return Err(bad("integer dimension needs whole-valued bounds and init".into()));
            }
            if self.upper - self.lower < 1.0 {
                return Err(bad("integer dimension must span at least one step".into()));
            }
        }
        if self.init < self.lower || self.init > self.upper {
            return Err(bad(format!(
                "init {} outside [{}, {}]",
                self.init, self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// Raw value to unit coordinate. No range checking.
    pub fn to_unit(&self, value: f64) -> f64 {
        match self.scale {
            Scale::Linear => (value - self.lower) / (self.upper - self.lower),
            Scale::Log => (value.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln()),
        }
    }

    /// Unit coordinate to raw value: clamp, invert, round integers.
    pub fn from_unit(&self, coord: f64) -> f64 {
        let c = coord.clamp(0.0, 1.0);
        let raw = match self.scale {
            Scale::Linear => self.lower + c * (self.upper - self.lower),
            Scale::Log => (self.lower.ln() + c * (self.upper.ln() - self.lower.ln())).exp(),
        };
        let raw = raw.clamp(self.lower, self.upper);
        if self.is_integer() {
            // f64::round breaks .5 ties away from zero
            raw.round().clamp(self.lower, self.upper)
        } else {
            raw
        }
    }
}

/// Point in the normalized unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormPoint(Vec<f64>);

impl NormPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn distance(&self, other: &NormPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + scale * dir`, unprojected.
    pub fn offset(&self, dir: &[f64], scale: f64) -> NormPoint {
        NormPoint(self.0.iter().zip(dir).map(|(x, u)| x + scale * u).collect())
    }
}

impl Deref for NormPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for NormPoint {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// User-facing configuration: dimension name to raw value, in space order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawConfig(IndexMap<String, f64>);

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for RawConfig {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Ordered, immutable collection of dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DimensionSpec>", into = "Vec<DimensionSpec>")]
pub struct SearchSpace {
    dims: Vec<DimensionSpec>,
}

impl TryFrom<Vec<DimensionSpec>> for SearchSpace {
    type Error = Error;

    fn try_from(dims: Vec<DimensionSpec>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<SearchSpace> for Vec<DimensionSpec> {
    fn from(space: SearchSpace) -> Self {
        space.dims
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<DimensionSpec>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSpace("at least one dimension is required".into()));
        }
        let mut seen = HashSet::new();
        for dim in &dims {
            dim.validate()?;
            if !seen.insert(dim.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate dimension name `{}`", dim.name)));
            }
        }
        Ok(Self { dims })
    }

    /// `[0, 1]^d` with continuous linear dimensions `x0..x{d-1}`, so raw and
    /// normalized coordinates coincide.
    pub fn unit_cube(init: &[f64]) -> Result<Self> {
        Self::new(
            init.iter()
                .enumerate()
                .map(|(i, &v)| DimensionSpec::float(format!("x{i}"), 0.0, 1.0).with_init(v))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[DimensionSpec] {
        &self.dims
    }

    pub fn has_integer(&self) -> bool {
        self.dims.iter().any(DimensionSpec::is_integer)
    }

    /// The configuration made of every dimension's `init`.
    pub fn init_config(&self) -> RawConfig {
        self.dims.iter().map(|d| (d.name.clone(), d.init)).collect()
    }

    pub fn normalize(&self, cfg: &RawConfig) -> Result<NormPoint> {
        for (name, _) in cfg.iter() {
            if !self.dims.iter().any(|d| d.name == name) {
                return Err(Error::InvalidConfig(format!("unknown dimension `{name}`")));
            }
        }
        let mut coords = Vec::with_capacity(self.dim());
        for dim in &self.dims {
            let v = cfg
                .get(&dim.name)
                .ok_or_else(|| Error::InvalidConfig(format!("missing dimension `{}`", dim.name)))?;
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("`{}` is not finite", dim.name)));
            }
            if v < dim.lower || v > dim.upper {
                return Err(Error::InvalidConfig(format!(
                    "`{}` = {v} outside [{}, {}]",
                    dim.name, dim.lower, dim.upper
                )));
            }
            if dim.is_integer() && v.fract() != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "`{}` = {v} must be a whole value",
                    dim.name
                )));
            }
            coords.push(dim.to_unit(v).clamp(0.0, 1.0));
        }
        Ok(NormPoint(coords))
    }

    pub fn denormalize(&self, p: &NormPoint) -> RawConfig {
        debug_assert_eq!(p.len(), self.dim());
        self.dims
            .iter()
            .zip(p.iter())
            .map(|(dim, &c)| (dim.name.clone(), dim.from_unit(c)))
            .collect()
    }

    /// L1 projection onto the feasible set: clamp to the cube, then snap
    /// integer dimensions to the image of the nearest whole value.
    pub fn project(&self, p: &NormPoint) -> NormPoint {
        debug_assert_eq!(p.len(), self.dim());
        NormPoint(
            self.dims
                .iter()
                .zip(p.iter())
                .map(|(dim, &c)| {
                    let c = c.clamp(0.0, 1.0);
                    if dim.is_integer() {
                        dim.to_unit(dim.from_unit(c)).clamp(0.0, 1.0)
                    } else {
                        c
                    }
                })
                .collect(),
        )
    }

    /// Stepsize floor: the normalized size of a one-unit move on the coarsest
    /// integer dimension around `best`, times `delta0`; 0.01 without integers.
    ///
    /// Log-scaled dimensions use `ln(1 + 1/best) / ln(upper/lower)`; linear
    /// ones use `1 / (upper - lower)`.
    pub fn delta_lower(&self, best: &RawConfig, delta0: f64) -> Result<f64> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::Domain(format!("delta0 must be positive, got {delta0}")));
        }
        let mut lowest: Option<f64> = None;
        for dim in self.dims.iter().filter(|d| d.is_integer()) {
            let step = 1.0;
            let ratio = match dim.scale {
                Scale::Log => {
                    let b = best.get(&dim.name).ok_or_else(|| {
                        Error::InvalidConfig(format!("missing dimension `{}`", dim.name))
                    })?;
                    if b <= 0.0 {
                        return Err(Error::Domain(format!(
                            "log-scaled `{}` needs a positive best value, got {b}",
                            dim.name
                        )));
                    }
                    (1.0 + step / b).ln() / (dim.upper / dim.lower).ln()
                }
                Scale::Linear => step / (dim.upper - dim.lower),
            };
            let v = ratio * delta0;
            lowest = Some(lowest.map_or(v, |m: f64| m.min(v)));
        }
        Ok(lowest.unwrap_or(DEFAULT_DELTA_LOWER))
    }

    /// Uniform draw on the cube, projected.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> NormPoint {
        let raw = NormPoint((0..self.dim()).map(|_| rng.random::<f64>()).collect());
        self.project(&raw)
    }
}

/// Stepsize floor used when the space has no integer dimensions.
pub const DEFAULT_DELTA_LOWER: f64 = 0.01;
