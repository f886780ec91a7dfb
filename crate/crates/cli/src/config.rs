//! Experiment configuration files.

use std::path::Path;

use cfo_core::baselines::{RandomSearch, Zogd};
use cfo_core::cfo::Cfo;
use cfo_core::flow2::Flow2Search;
use cfo_core::harness::BudgetSpec;
use cfo_core::objectives::{SyntheticObjective, BUILTIN_NAMES};
use cfo_core::optimizer::Optimizer;
use cfo_core::space::{DimensionKind, DimensionSpec, Scale, SearchSpace};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Fixed stepsize of vanilla FLOW² when the config does not set `delta`.
pub const DEFAULT_FLOW2_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimType {
    Float,
    Int,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimSchema {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: DimType,
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default)]
    pub init: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Cfo,
    Flow2,
    Rs,
    Zogd,
}

impl OptimizerKind {
    fn needs_init(self) -> bool {
        self != OptimizerKind::Rs
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
}

impl BudgetConfig {
    pub fn to_spec(self) -> BudgetSpec {
        BudgetSpec {
            max_evals: self.max_evals,
            max_total_cost: self.max_cost,
            wall_clock_secs: self.time_limit_secs,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: Vec<DimSchema>,
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// A builtin objective name, or `"external"`.
    pub objective: String,
    /// Stepsize for `flow2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// 1-based line of the first occurrence of `needle` in `text`.
fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.find(needle).map(|pos| text[..pos].matches('\n').count() + 1)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}:{m}", path.display())),
            other => other,
        })
    }

    /// Parses and validates. Error messages start with `line N:`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}: column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    fn validate(&self, text: &str) -> Result<(), CliError> {
        let at = |needle: &str, msg: String| {
            let line = line_of(text, needle).unwrap_or(1);
            CliError::Config(format!("line {line}: {msg}"))
        };
        if self.space.is_empty() {
            return Err(at("\"space\"", "space must declare at least one dimension".into()));
        }
        for d in &self.space {
            let anchor = format!("\"{}\"", d.name);
            if self.optimizer.needs_init() && d.init.is_none() {
                return Err(at(&anchor, format!("dimension `{}` needs an init value for {:?}", d.name, self.optimizer)));
            }
            if let Err(e) = self.dimension(d).validate() {
                return Err(at(&anchor, e.to_string()));
            }
        }
        if let Err(e) = self.search_space() {
            return Err(at("\"space\"", e.to_string()));
        }
        if self.objective != "external" && !BUILTIN_NAMES.contains(&self.objective.as_str()) {
            return Err(at(
                "\"objective\"",
                format!("unknown objective `{}`; expected one of {} or \"external\"", self.objective, BUILTIN_NAMES.join(", ")),
            ));
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(at("\"delta\"", format!("delta must be positive, got {delta}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(at("\"seeds\"", "seeds must not be empty".into()));
        }
        Ok(())
    }

    fn dimension(&self, d: &DimSchema) -> DimensionSpec {
        DimensionSpec {
            name: d.name.clone(),
            kind: match d.kind {
                DimType::Float => DimensionKind::Continuous,
                DimType::Int => DimensionKind::Integer,
            },
            lower: d.min,
            upper: d.max,
            scale: d.scale,
            init: d.init.unwrap_or(d.min),
        }
    }

    pub fn search_space(&self) -> Result<SearchSpace, CliError> {
        SearchSpace::new(self.space.iter().map(|d| self.dimension(d)).collect())
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn builtin_objective(&self) -> Result<SyntheticObjective, CliError> {
        SyntheticObjective::builtin(&self.objective, self.space.len()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build_optimizer(&self, seed: u64) -> Result<Box<dyn Optimizer>, CliError> {
        let space = self.search_space()?;
        let init = space.init_config();
        let cfg_err = |e: cfo_core::Error| CliError::Config(e.to_string());
        Ok(match self.optimizer {
            OptimizerKind::Cfo => Box::new(Cfo::new(space, &init, seed).map_err(cfg_err)?),
            OptimizerKind::Zogd => Box::new(Zogd::new(space, &init, seed).map_err(cfg_err)?),
            OptimizerKind::Rs => Box::new(RandomSearch::new(space, seed)),
            OptimizerKind::Flow2 => {
                let start = space.normalize(&init).map_err(cfg_err)?;
                let delta = self.delta.unwrap_or(DEFAULT_FLOW2_DELTA);
                Box::new(Flow2Search::seeded(space, start, delta, seed).map_err(cfg_err)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{
  "space": [
    {"name": "x0", "type": "float", "min": 0, "max": 1, "init": 0.0},
    {"name": "x1", "type": "float", "min": 0, "max": 1, "init": 0.0}
  ],
  "optimizer": "cfo",
  "budget": {"max_evals": 200},
  "seeds": [0, 1, 2],
  "objective": "sphere"
}"#;

    fn message(r: Result<ExperimentConfig, CliError>) -> String {
        match r {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_a_valid_config() {
        let cfg = ExperimentConfig::parse(SPHERE).unwrap();
        assert_eq!(cfg.space.len(), 2);
        assert_eq!(cfg.optimizer, OptimizerKind::Cfo);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.budget.to_spec().max_evals, Some(200));
        let opt = cfg.build_optimizer(0).unwrap();
        assert_eq!(opt.space().dim(), 2);
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let bad = SPHERE.replace("\"cfo\",", "\"cfo\"");
        assert!(message(ExperimentConfig::parse(&bad)).starts_with("line 7:"));
    }

    #[test]
    fn unknown_values_carry_the_line() {
        let bad = SPHERE.replace("\"cfo\"", "\"bo\"");
        assert!(message(ExperimentConfig::parse(&bad)).starts_with("line 6:"));
        let bad = SPHERE.replace("\"sphere\"", "\"ackley\"");
        let m = message(ExperimentConfig::parse(&bad));
        assert!(m.starts_with("line 9:") && m.contains("ackley"), "{m}");
        let bad = SPHERE.replace("\"seeds\"", "\"seed\"");
        assert!(message(ExperimentConfig::parse(&bad)).starts_with("line 8:"));
    }

    #[test]
    fn semantic_errors_point_at_the_dimension() {
        let bad = SPHERE.replace(r#""name": "x1", "type": "float", "min": 0, "max": 1"#, r#""name": "x1", "type": "float", "min": 2, "max": 1"#);
        let m = message(ExperimentConfig::parse(&bad));
        assert!(m.starts_with("line 4:"), "{m}");
        let bad = SPHERE.replacen(r#", "init": 0.0},"#, "},", 1);
        let m = message(ExperimentConfig::parse(&bad));
        assert!(m.starts_with("line 3:") && m.contains("init"), "{m}");
        let dup = SPHERE.replace("\"x1\"", "\"x0\"");
        assert!(message(ExperimentConfig::parse(&dup)).contains("line 2:"));
    }

    #[test]
    fn random_search_needs_no_init() {
        let cfg = SPHERE.replace(r#", "init": 0.0"#, "").replace("\"cfo\"", "\"rs\"");
        assert!(ExperimentConfig::parse(&cfg).is_ok());
    }

    #[test]
    fn flow2_delta() {
        let cfg = SPHERE.replace("\"cfo\"", "\"flow2\"").replace("\"objective\"", "\"delta\": -1, \"objective\"");
        assert!(message(ExperimentConfig::parse(&cfg)).contains("delta"));
        let cfg = SPHERE.replace("\"cfo\"", "\"flow2\"");
        assert!(ExperimentConfig::parse(&cfg).unwrap().build_optimizer(3).is_ok());
    }

    #[test]
    fn line_lookup() {
        assert_eq!(line_of("a\nb\nc", "a"), Some(1));
        assert_eq!(line_of("a\nb\nc", "c"), Some(3));
        assert_eq!(line_of("a\n\nxc", "c"), Some(3));
        assert_eq!(line_of("a", "z"), None);
    }
}
