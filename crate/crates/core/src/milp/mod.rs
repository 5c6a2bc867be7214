//! The allocation ILP: building, interchange files, solving, and an
//! exhaustive oracle for tiny instances.

mod bnb;
pub mod brute;
pub mod build;
pub mod external;
pub mod extract;
#[cfg(feature = "highs")]
mod highs_backend;
pub mod lp;
pub mod model;
pub mod mps;
pub mod solution;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

pub use brute::{brute_force_optimum, SizeGuard};
pub use build::{build_model, build_model_with, BigM, BuildError, BuildOptions};
pub use external::ExternalSolver;
pub use extract::{encode_schedule, extract_assignment, extract_schedule, ExtractError};
pub use model::{Constraint, MilpModel, RowSense, VarKey, VarKind, Variable};

/// Default per-instance time budget.
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(600);

/// Integer columns further than this from an integer are rejected.
const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver unavailable: {0}")]
    Unavailable(String),
    #[error("model not supported by this solver: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Backend(String),
    #[error("solution file: {0}")]
    Solution(#[from] ParseError),
    #[error("solver returned an invalid assignment: {0}")]
    InvalidAssignment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// Column values, present exactly when the status is optimal.
    pub values: Option<Vec<f64>>,
    /// Best assignment found before a timeout, with its objective.
    pub incumbent: Option<(f64, Vec<f64>)>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    Lp,
    Mps,
}

impl ModelFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ModelFormat::Lp => "lp",
            ModelFormat::Mps => "mps",
        }
    }

    /// Guess from a file name's extension.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "lp" => Some(ModelFormat::Lp),
            "mps" => Some(ModelFormat::Mps),
            _ => None,
        }
    }
}

impl FromStr for ModelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(ModelFormat::Lp),
            "mps" => Ok(ModelFormat::Mps),
            other => Err(format!("unknown model format {other:?}; expected lp or mps")),
        }
    }
}

pub fn export_model(model: &MilpModel, format: ModelFormat) -> String {
    match format {
        ModelFormat::Lp => lp::write_lp(model),
        ModelFormat::Mps => mps::write_mps(model),
    }
}

pub fn parse_model(text: &str, format: ModelFormat) -> Result<MilpModel, ParseError> {
    match format {
        ModelFormat::Lp => lp::parse_lp(text),
        ModelFormat::Mps => mps::parse_mps(text),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Backend {
    /// The exact in-crate branch-and-bound; small models only.
    #[default]
    Bundled,
    /// HiGHS linked in-process.
    Highs,
    /// A solver run as a subprocess on an exported model file.
    External(ExternalSolver),
}

impl Backend {
    /// HiGHS when this build links it, the bundled solver otherwise.
    pub fn best_available() -> Self {
        if cfg!(feature = "highs") {
            Backend::Highs
        } else {
            Backend::Bundled
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Bundled => "bundled",
            Backend::Highs => "highs",
            Backend::External(_) => "external",
        }
    }
}

/// Solve `model` to optimality, proving infeasibility, or running out of time.
/// Integer columns of the returned assignment are rounded, and the rounded
/// assignment is checked against every row.
pub fn solve(model: &MilpModel, backend: &Backend, time_limit: Option<Duration>) -> Result<SolveResult, SolverError> {
    model.check().map_err(|e| SolverError::Unsupported(e.to_string()))?;
    let raw = match backend {
        Backend::Bundled => bnb::solve(model, time_limit)?,
        Backend::External(solver) => external::solve(model, solver, time_limit)?,
        #[cfg(feature = "highs")]
        Backend::Highs if !model.variables.is_empty() => highs_backend::solve(model, time_limit)?,
        #[cfg(feature = "highs")]
        Backend::Highs => bnb::solve(model, time_limit)?,
        #[cfg(not(feature = "highs"))]
        Backend::Highs => return Err(SolverError::Unavailable("this build does not include HiGHS".into())),
    };
    finish(model, raw)
}

fn clean(model: &MilpModel, values: Vec<f64>) -> Result<Vec<f64>, SolverError> {
    let mut out = values;
    for (v, x) in model.variables.iter().zip(out.iter_mut()) {
        if v.kind == VarKind::Integer {
            let rounded = x.round();
            if (*x - rounded).abs() > INTEGRALITY_TOLERANCE {
                return Err(SolverError::InvalidAssignment(format!("{} = {x} is not integral", v.name)));
            }
            *x = rounded;
        }
    }
    let violated: Vec<String> = model
        .constraints
        .iter()
        .filter(|c| {
            let scale = c.terms.iter().map(|t| t.1.abs()).fold(c.rhs.abs(), f64::max).max(1.0);
            !c.is_satisfied(&out, 1e-9 * scale)
        })
        .map(|c| c.name.clone())
        .chain(
            model
                .variables
                .iter()
                .zip(&out)
                .filter(|(v, &x)| x < v.lower || x > v.upper)
                .map(|(v, _)| format!("bounds of {}", v.name)),
        )
        .take(5)
        .collect();
    if !violated.is_empty() {
        return Err(SolverError::InvalidAssignment(format!("violates {}", violated.join(", "))));
    }
    Ok(out)
}

fn finish(model: &MilpModel, mut raw: SolveResult) -> Result<SolveResult, SolverError> {
    if let Some(values) = raw.values.take() {
        let values = clean(model, values)?;
        raw.objective = Some(model.objective_value(&values));
        raw.values = Some(values);
    }
    if let Some((_, values)) = raw.incumbent.take() {
        // A doubtful incumbent is dropped rather than reported.
        if let Ok(values) = clean(model, values) {
            raw.incumbent = Some((model.objective_value(&values), values));
        }
    }
    Ok(raw)
}
