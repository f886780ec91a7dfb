//! Synthetic loss/cost landscapes over the normalized unit cube.
//!
//! Each objective records the constants the cost and convergence checks need:
//! the smoothness constant `L` of the loss, the Lipschitz constant `U` of the
//! cost under the Euclidean norm on the cost-related dimensions, and which of
//! the structural conditions it satisfies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::NormPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConditionFlags {
    /// Loss is `L`-smooth on the cube.
    pub smooth: bool,
    /// Cost is `U`-Lipschitz.
    pub lipschitz_cost: bool,
    /// Above the optimum's cost, a higher cost never comes with a lower loss.
    /// Holds on the whole cube, not only along a ray.
    pub local_monotone: bool,
    /// Cost is `exp(Σ_{i∈D'} x_i)`.
    pub factorized_cost: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Landscape {
    Sphere { center: Vec<f64> },
    Factorized { center: Vec<f64>, cost_dims: Vec<usize> },
    Additive { center: Vec<f64>, base: f64, slope: Vec<f64> },
    Rosenbrock,
    Knn,
}

/// A deterministic `(loss, cost)` landscape with a known optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticObjective {
    name: String,
    d: usize,
    landscape: Landscape,
    optimum: NormPoint,
    optimum_loss: f64,
    optimum_cost: f64,
    smoothness_l: f64,
    cost_lipschitz_u: Option<f64>,
    flags: ConditionFlags,
    low_cost_init: NormPoint,
}

fn check_center(center: &[f64], strict: bool) -> Result<()> {
    if center.is_empty() {
        return Err(Error::InvalidConfig("objective needs at least one dimension".into()));
    }
    let ok = center.iter().all(|&c| {
        c.is_finite() && if strict { c > 0.0 && c < 1.0 } else { (0.0..=1.0).contains(&c) }
    });
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "center must lie {} the unit cube",
            if strict { "strictly inside" } else { "in" }
        )))
    }
}

fn half_sq_dist(x: &[f64], c: &[f64]) -> f64 {
    0.5 * x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

// Rosenbrock lives on z = 4x − 2 ∈ [−2, 2]^d, optimum z = 1 ⇒ x = 0.75.
const ROSEN_SCALE: f64 = 4.0;
const ROSEN_SHIFT: f64 = 2.0;

const KNN_OPT: f64 = 0.2;

/// Names accepted by [`SyntheticObjective::builtin`].
pub const BUILTIN_NAMES: &[&str] = &["sphere", "additive_cost", "factorized_cost", "rosenbrock", "knn"];

impl SyntheticObjective {
    /// `f(x) = ½‖x − c‖²`, unit cost.
    pub fn sphere(center: Vec<f64>) -> Result<Self> {
        check_center(&center, false)?;
        let d = center.len();
        Ok(Self {
            name: "sphere".into(),
            d,
            optimum: center.clone().into(),
            optimum_loss: 0.0,
            optimum_cost: 1.0,
            smoothness_l: 1.0,
            cost_lipschitz_u: Some(0.0),
            flags: ConditionFlags {
                smooth: true,
                lipschitz_cost: true,
                // vacuous: the cost never rises
                local_monotone: true,
                factorized_cost: false,
            },
            low_cost_init: vec![0.0; d].into(),
            landscape: Landscape::Sphere { center },
        })
    }

    /// Sphere loss with `g(x) = exp(Σ_{i∈D'} x_i)`.
    ///
    /// The cost-monotonicity condition only holds on the whole cube when the
    /// loss has no other dimension to trade against, i.e. `d = 1`, or when the
    /// cost is constant (`D'` empty).
    pub fn factorized_cost(center: Vec<f64>, cost_dims: Vec<usize>) -> Result<Self> {
        check_center(&center, true)?;
        let d = center.len();
        let mut cost_dims = cost_dims;
        cost_dims.sort_unstable();
        cost_dims.dedup();
        if cost_dims.iter().any(|&i| i >= d) {
            return Err(Error::InvalidConfig("cost dimension out of range".into()));
        }
        let optimum_cost = cost_dims.iter().map(|&i| center[i]).sum::<f64>().exp();
        // the cost's minimum over the cube
        let init = vec![0.0; d];
        let u = if cost_dims.is_empty() {
            0.0
        } else {
            // e^{Σx} has gradient norm √|D'|·e^{Σx} ≤ √|D'|·e^{|D'|} on the cube
            (cost_dims.len() as f64).sqrt() * (cost_dims.len() as f64).exp()
        };
        Ok(Self {
            name: "factorized_cost".into(),
            d,
            optimum: center.clone().into(),
            optimum_loss: 0.0,
            optimum_cost,
            smoothness_l: 1.0,
            cost_lipschitz_u: Some(u),
            flags: ConditionFlags {
                smooth: true,
                lipschitz_cost: true,
                local_monotone: cost_dims.is_empty() || d == 1,
                factorized_cost: true,
            },
            low_cost_init: init.into(),
            landscape: Landscape::Factorized { center, cost_dims },
        })
    }

    /// Sphere loss with `g(x) = base + aᵀx`; the cost must stay positive.
    pub fn additive_cost(center: Vec<f64>, slope: Vec<f64>, base: f64) -> Result<Self> {
        check_center(&center, false)?;
        let d = center.len();
        if slope.len() != d {
            return Err(Error::InvalidConfig("slope length must match the dimension".into()));
        }
        if !slope.iter().all(|a| a.is_finite()) || !base.is_finite() {
            return Err(Error::InvalidConfig("slope and base must be finite".into()));
        }
        let min_cost = base + slope.iter().map(|&a| a.min(0.0)).sum::<f64>();
        if min_cost <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cost reaches {min_cost} on the cube; it must stay positive"
            )));
        }
        let u = slope.iter().map(|a| a * a).sum::<f64>().sqrt();
        let optimum_cost = base + slope.iter().zip(&center).map(|(a, c)| a * c).sum::<f64>();
        let init: Vec<f64> = slope
            .iter()
            .map(|&a| {
                if a < 0.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            name: "additive_cost".into(),
            d,
            optimum: center.clone().into(),
            optimum_loss: 0.0,
            optimum_cost,
            smoothness_l: 1.0,
            cost_lipschitz_u: Some(u),
            flags: ConditionFlags {
                smooth: true,
                lipschitz_cost: true,
                local_monotone: u == 0.0 || d == 1,
                factorized_cost: false,
            },
            low_cost_init: init.into(),
            landscape: Landscape::Additive { center, base, slope },
        })
    }

    /// Rosenbrock mapped onto the cube, unit cost.
    pub fn rosenbrock(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidConfig("rosenbrock needs d >= 2".into()));
        }
        // Gershgorin bound on the Hessian over z ∈ [−2, 2]^d, times the
        // chain-rule factor 4²: diagonal ≤ 1200·4 + 800 + 2 + 200, two
        // off-diagonals ≤ 800 each.
        let hessian_bound = 1200.0 * 4.0 + 800.0 + 2.0 + 200.0 + 2.0 * 800.0;
        Ok(Self {
            name: "rosenbrock".into(),
            d,
            landscape: Landscape::Rosenbrock,
            optimum: vec![(1.0 + ROSEN_SHIFT) / ROSEN_SCALE; d].into(),
            optimum_loss: 0.0,
            optimum_cost: 1.0,
            smoothness_l: ROSEN_SCALE * ROSEN_SCALE * hessian_bound,
            cost_lipschitz_u: Some(0.0),
            flags: ConditionFlags {
                smooth: true,
                lipschitz_cost: true,
                local_monotone: true,
                factorized_cost: false,
            },
            low_cost_init: vec![0.0; d].into(),
        })
    }

    /// One-dimensional stand-in for tuning the neighbour count of KNN:
    /// unimodal loss with its minimum at 0.2, cost rising linearly.
    pub fn knn_surrogate() -> Self {
        Self {
            name: "knn".into(),
            d: 1,
            landscape: Landscape::Knn,
            optimum: vec![KNN_OPT].into(),
            optimum_loss: 0.1,
            optimum_cost: 1.0 + 9.0 * KNN_OPT,
            smoothness_l: 2.0,
            cost_lipschitz_u: Some(9.0),
            flags: ConditionFlags {
                smooth: true,
                lipschitz_cost: true,
                local_monotone: true,
                factorized_cost: false,
            },
            low_cost_init: vec![0.0].into(),
        }
    }

    /// Builtin instance by name over `d` dimensions: `sphere`,
    /// `additive_cost` (unit slope on the first dimension), `factorized_cost`
    /// (cost on the first two dimensions), `rosenbrock` and `knn` (`d = 1`).
    /// Quadratic instances are centred at 0.5.
    pub fn builtin(name: &str, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("objective needs at least one dimension".into()));
        }
        let center = vec![0.5; d];
        match name {
            "sphere" => Self::sphere(center),
            "additive_cost" => {
                let mut slope = vec![0.0; d];
                slope[0] = 1.0;
                Self::additive_cost(center, slope, 1.0)
            }
            "factorized_cost" => Self::factorized_cost(center, (0..d.min(2)).collect()),
            "rosenbrock" => Self::rosenbrock(d),
            "knn" if d == 1 => Ok(Self::knn_surrogate()),
            "knn" => Err(Error::InvalidConfig("knn is one-dimensional".into())),
            other => Err(Error::InvalidConfig(format!("unknown objective `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn optimum(&self) -> &NormPoint {
        &self.optimum
    }

    pub fn optimum_loss(&self) -> f64 {
        self.optimum_loss
    }

    pub fn optimum_cost(&self) -> f64 {
        self.optimum_cost
    }

    pub fn smoothness_l(&self) -> f64 {
        self.smoothness_l
    }

    pub fn cost_lipschitz_u(&self) -> Option<f64> {
        self.cost_lipschitz_u
    }

    pub fn flags(&self) -> ConditionFlags {
        self.flags
    }

    /// The cheapest corner of the cube; `g(x0) < g(x*)` whenever the cost
    /// is not constant and the optimum is interior.
    pub fn low_cost_init(&self) -> &NormPoint {
        &self.low_cost_init
    }

    /// Dimensions the cost depends on; the distance `z` is the Euclidean norm
    /// restricted to these.
    pub fn cost_dims(&self) -> Vec<usize> {
        match &self.landscape {
            Landscape::Factorized { cost_dims, .. } => cost_dims.clone(),
            Landscape::Additive { slope, .. } => {
                (0..self.d).filter(|&i| slope[i] != 0.0).collect()
            }
            Landscape::Knn => vec![0],
            _ => Vec::new(),
        }
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        match &self.landscape {
            Landscape::Sphere { center }
            | Landscape::Factorized { center, .. }
            | Landscape::Additive { center, .. } => half_sq_dist(x, center),
            Landscape::Rosenbrock => {
                let z: Vec<f64> = x.iter().map(|v| ROSEN_SCALE * v - ROSEN_SHIFT).collect();
                z.windows(2)
                    .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                    .sum()
            }
            Landscape::Knn => 0.1 + (x[0] - KNN_OPT).powi(2),
        }
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        match &self.landscape {
            Landscape::Sphere { .. } | Landscape::Rosenbrock => 1.0,
            Landscape::Factorized { cost_dims, .. } => {
                cost_dims.iter().map(|&i| x[i]).sum::<f64>().exp()
            }
            Landscape::Additive { base, slope, .. } => {
                base + slope.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
            }
            Landscape::Knn => 1.0 + 9.0 * x[0],
        }
    }

    /// `(loss, cost)` at `x`.
    pub fn eval(&self, x: &[f64]) -> (f64, f64) {
        (self.loss(x), self.cost(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.landscape {
            Landscape::Sphere { center }
            | Landscape::Factorized { center, .. }
            | Landscape::Additive { center, .. } => {
                x.iter().zip(center).map(|(a, c)| a - c).collect()
            }
            Landscape::Rosenbrock => {
                let z: Vec<f64> = x.iter().map(|v| ROSEN_SCALE * v - ROSEN_SHIFT).collect();
                let mut g = vec![0.0; self.d];
                for i in 0..self.d - 1 {
                    let t = z[i + 1] - z[i] * z[i];
                    g[i] += -400.0 * z[i] * t - 2.0 * (1.0 - z[i]);
                    g[i + 1] += 200.0 * t;
                }
                g.iter().map(|v| v * ROSEN_SCALE).collect()
            }
            Landscape::Knn => vec![2.0 * (x[0] - KNN_OPT)],
        }
    }

    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        self.gradient(x).iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Counts pairs on a regular grid that break the cost-monotonicity
    /// condition above the optimum's cost: `g(x1) > g(x2) >= g(x*)` but
    /// `f(x1) < f(x2)`. Only practical for small `d`.
    pub fn monotonicity_violations(&self, per_axis: usize) -> usize {
        let total = per_axis.pow(self.d as u32);
        let g_star = self.optimum_cost;
        let pts: Vec<(f64, f64)> = (0..total)
            .map(|mut idx| {
                let x: Vec<f64> = (0..self.d)
                    .map(|_| {
                        let i = idx % per_axis;
                        idx /= per_axis;
                        i as f64 / (per_axis - 1) as f64
                    })
                    .collect();
                self.eval(&x)
            })
            .filter(|&(_, g)| g >= g_star)
            .collect();
        let mut count = 0;
        for &(f1, g1) in &pts {
            for &(f2, g2) in &pts {
                if g1 > g2 && f1 < f2 {
                    count += 1;
                }
            }
        }
        count
    }
}
