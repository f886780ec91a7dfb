//! Uniform directions on the unit sphere and the constant `c_d = E|u_1|`.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Unit-norm direction in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; `None` for a zero or non-finite vector.
    pub fn from_vec(mut v: Vec<f64>) -> Option<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Some(Self(v))
    }

    /// Unit vector along axis `i`.
    pub fn axis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self(v)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Deref for Direction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Draws a direction uniformly from the unit sphere in `R^d` by normalizing a
/// standard Gaussian vector. For `d = 1` this is a fair sign.
pub fn sample_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Direction {
    assert!(d >= 1, "sphere dimension must be at least 1");
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(dir) = Direction::from_vec(v) {
            return dir;
        }
    }
}

/// `c_d = 2 Γ(d/2) / ((d-1) Γ((d-1)/2) √π)`, the mean absolute value of one
/// coordinate of a uniform unit vector. Undefined at `d = 1`.
pub fn c_d(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("c_d is defined for d >= 2, got {d}")));
    }
    let d = d as f64;
    let ratio = (ln_gamma(d / 2.0) - ln_gamma((d - 1.0) / 2.0)).exp();
    Ok(2.0 * ratio / ((d - 1.0) * PI.sqrt()))
}

/// `E|u_1|` for every `d >= 1`: `c_d`, with `c_1 = 1`.
pub fn expected_abs_coordinate(d: usize) -> f64 {
    if d == 1 {
        1.0
    } else {
        c_d(d).expect("d >= 2")
    }
}
