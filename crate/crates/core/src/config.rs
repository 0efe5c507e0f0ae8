//! JSON run configuration for the command-line driver.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_grid, GridSpec};
use crate::modular::{DoublePhase, Exponents, Weight, WeightFamily};
use crate::operator::default_epsilon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub exponents: ExponentsConfig,
    pub weight: WeightConfig,
    #[serde(default)]
    pub lambda: Option<LambdaConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub props: PropsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsConfig {
    pub p: f64,
    pub q: f64,
    /// Ambient dimension for the hypothesis checks; defaults to the grid's.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightConfig {
    File(WeightFile),
    Family(WeightFamily),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFile {
    pub kind: FileKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    File,
}

/// A single λ, either absolute or as a multiple of `λ̂₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaConfig {
    Absolute(f64),
    Factor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    /// `from`/`to` are multiples of `λ̂₁`.
    #[default]
    Relative,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepConfig {
    /// Ascending sample points; scaled by `λ̂₁` in relative mode.
    pub fn values(&self, lambda_hat1: f64) -> Vec<f64> {
        let scale = match self.spacing {
            Spacing::Relative => lambda_hat1,
            Spacing::Linear => 1.0,
        };
        if self.steps == 1 {
            return vec![self.from * scale];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| (self.from + (self.to - self.from) * i as f64 / n) * scale)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub eig_tol: f64,
    pub max_iters: usize,
    pub epsilon_reg: Option<f64>,
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-7,
            eig_tol: 1e-7,
            max_iters: 5000,
            epsilon_reg: None,
            multistarts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropsConfig {
    pub trials: usize,
    pub seed: u64,
}

impl Default for PropsConfig {
    fn default() -> Self {
        PropsConfig { trials: 50, seed: 7 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // weight paths are relative to the config file
        if let WeightConfig::File(w) = &mut cfg.weight {
            if w.path.is_relative() {
                if let Some(dir) = path.parent() {
                    w.path = dir.join(&w.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.sweep {
            if s.steps < 1 {
                return Err(Error::Config("sweep.steps must be >= 1".into()));
            }
            if !(s.from < s.to) && s.steps > 1 {
                return Err(Error::Config(format!("sweep.from ({}) must be < sweep.to ({})", s.from, s.to)));
            }
            if !(s.from > 0.0) {
                return Err(Error::Config("sweep.from must be positive".into()));
            }
        }
        if let Some(LambdaConfig::Absolute(v) | LambdaConfig::Factor(v)) = self.lambda {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("lambda must be positive, got {v}")));
            }
        }
        let s = &self.solver;
        if !(s.tol > 0.0) || !(s.eig_tol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if s.max_iters == 0 {
            return Err(Error::Config("solver.max_iters must be >= 1".into()));
        }
        if s.multistarts == 0 {
            return Err(Error::Config("solver.multistarts must be >= 1".into()));
        }
        Ok(())
    }

    /// Builds the problem data, returning hypothesis warnings alongside.
    pub fn build(&self) -> Result<(DoublePhase, Vec<String>)> {
        self.validate()?;
        let grid = Arc::new(build_grid(&self.grid)?);
        let e = &self.exponents;
        let exps = Exponents::new(e.p, e.q, e.n.unwrap_or(grid.dim()), e.strict)?;
        let weight = match &self.weight {
            WeightConfig::Family(f) => Weight::from_family(&grid, f)?,
            WeightConfig::File(f) => Weight::read_file(&grid, &f.path)?,
        };
        let dp = DoublePhase::new(grid, exps, weight)?;
        let warnings = dp.hypothesis_warnings();
        Ok((dp, warnings))
    }

    pub fn epsilon(&self, dp: &DoublePhase) -> f64 {
        self.solver.epsilon_reg.unwrap_or_else(|| default_epsilon(dp.grid()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "grid": {"extents": [[0.0, 1.0]], "nodes_per_axis": [33]},
        "exponents": {"p": 3.0, "q": 2.0},
        "weight": {"kind": "constant", "value": 1.0}
    }"#;

    #[test]
    fn parses_minimal() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        let (dp, _) = c.build().unwrap();
        assert_eq!(dp.grid().n_nodes(), 33);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BASE.replacen('{', r#"{"bogus": 1,"#, 1);
        assert!(RunConfig::from_json(&bad).is_err());
        let bad = BASE.replace(r#""q": 2.0"#, r#""q": 2.0, "r": 1"#);
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn lambda_and_weight_file_forms() {
        let c = BASE.replace(
            r#"{"kind": "constant", "value": 1.0}"#,
            r#"{"kind": "file", "path": "w.txt"}, "lambda": {"factor": 1.5}"#,
        );
        let c = RunConfig::from_json(&c).unwrap();
        assert!(matches!(c.weight, WeightConfig::File(_)));
        assert_eq!(c.lambda, Some(LambdaConfig::Factor(1.5)));
    }

    #[test]
    fn sweep_values() {
        let s = SweepConfig {
            from: 0.5,
            to: 2.0,
            steps: 4,
            spacing: Spacing::Relative,
        };
        assert_eq!(s.values(2.0), vec![1.0, 2.0, 3.0, 4.0]);
        let one = SweepConfig { steps: 1, ..s };
        assert_eq!(one.values(2.0), vec![1.0]);
        let lin = SweepConfig {
            spacing: Spacing::Linear,
            ..s
        };
        assert_eq!(lin.values(7.0), vec![0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn rejects_reversed_sweep() {
        let c = BASE.replace(
            r#""weight""#,
            r#""sweep": {"from": 2.0, "to": 1.0, "steps": 4}, "weight""#,
        );
        let c = RunConfig::from_json(&c).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
