//! Run configuration: a flat key=value file plus per-flag overrides.

use std::fs;
use std::path::Path;

use otds::{LabelDistanceConfig, LabelMethod, OtSolver, OtddConfig, SinkhornParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Sinkhorn => "sinkhorn",
        }
    }
}

/// Settings shared by every command. Defaults: sinkhorn solver with automatic
/// epsilon (1% of the mean ground cost), gaussian label geometry, no batching,
/// seed 0, grid resolution 7.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverKind,
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    pub label_method: LabelMethod,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub grid_resolution: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::Sinkhorn,
            epsilon: None,
            max_iters: 10_000,
            label_method: LabelMethod::Gaussian,
            batch_size: None,
            seed: 0,
            grid_resolution: 7,
        }
    }
}

impl RunConfig {
    /// Parse the flat `key=value` file format. `#` starts a comment; unknown
    /// keys are rejected with their line number.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| CliError::bad_spec(line, "expected key=value"))?;
            cfg.set(key.trim(), value.trim(), line)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> CliResult<()> {
        match key {
            "solver" => {
                self.solver = parse_solver(value)
                    .ok_or_else(|| CliError::bad_spec(line, format!("unknown solver `{value}`")))?;
            }
            "epsilon" => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| CliError::bad_spec(line, format!("bad epsilon `{value}`")))?;
                if !(v > 0.0) {
                    return Err(CliError::bad_spec(line, "epsilon must be positive"));
                }
                self.epsilon = Some(v);
            }
            "max_iters" => {
                self.max_iters = value
                    .parse()
                    .map_err(|_| CliError::bad_spec(line, format!("bad max_iters `{value}`")))?;
            }
            "label_method" => {
                self.label_method = parse_label_method(value).ok_or_else(|| {
                    CliError::bad_spec(line, format!("unknown label_method `{value}`"))
                })?;
            }
            "batch_size" => {
                self.batch_size = Some(value.parse().map_err(|_| {
                    CliError::bad_spec(line, format!("bad batch_size `{value}`"))
                })?);
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| CliError::bad_spec(line, format!("bad seed `{value}`")))?;
            }
            "grid_resolution" => {
                self.grid_resolution = value.parse().map_err(|_| {
                    CliError::bad_spec(line, format!("bad grid_resolution `{value}`"))
                })?;
            }
            other => {
                return Err(CliError::bad_spec(line, format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn to_otdd_config(&self) -> OtddConfig<f64> {
        let solver = match self.solver {
            SolverKind::Exact => OtSolver::exact(),
            SolverKind::Sinkhorn => OtSolver::Sinkhorn(SinkhornParams {
                epsilon: self.epsilon,
                max_iters: self.max_iters,
                tolerance: 1e-6,
                log_domain: true,
            }),
        };
        let label = LabelDistanceConfig {
            method: self.label_method,
            class_cap: 500,
        };
        OtddConfig { solver, label }
    }
}

pub fn parse_solver(value: &str) -> Option<SolverKind> {
    match value {
        "exact" => Some(SolverKind::Exact),
        "sinkhorn" => Some(SolverKind::Sinkhorn),
        _ => None,
    }
}

pub fn parse_label_method(value: &str) -> Option<LabelMethod> {
    match value {
        "exact" => Some(LabelMethod::Exact),
        "gaussian" => Some(LabelMethod::Gaussian),
        _ => None,
    }
}
