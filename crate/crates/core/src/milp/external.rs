//! Any MILP solver reachable as a command line.
//!
//! The command template is split on whitespace; in each argument the
//! placeholders `{model}`, `{solution}` and `{time}` are replaced by the model
//! file, the expected solution file and the time budget in seconds. Examples:
//!
//! ```text
//! highs --model_file {model} --solution_file {solution} --time_limit {time}
//! cbc {model} sec {time} solve solu {solution}
//! ```

use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::model::MilpModel;
use super::solution::parse_solution;
use super::{export_model, ModelFormat, SolveResult, SolveStatus, SolverError};

/// Extra time granted past the budget before the child process is killed.
const KILL_GRACE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub command: String,
    pub format: ModelFormat,
}

impl ExternalSolver {
    pub fn new(command: impl Into<String>, format: ModelFormat) -> Self {
        Self { command: command.into(), format }
    }
}

pub(crate) fn solve(
    model: &MilpModel,
    solver: &ExternalSolver,
    time_limit: Option<Duration>,
) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let dir = tempfile::tempdir()?;
    let model_path = dir.path().join(format!("model.{}", solver.format.extension()));
    let solution_path = dir.path().join("model.sol");
    std::fs::write(&model_path, export_model(model, solver.format))?;

    let time = time_limit.map_or_else(|| "1e9".to_string(), |t| format!("{}", t.as_secs_f64()));
    let args: Vec<String> = solver
        .command
        .split_whitespace()
        .map(|a| {
            a.replace("{model}", &model_path.to_string_lossy())
                .replace("{solution}", &solution_path.to_string_lossy())
                .replace("{time}", &time)
        })
        .collect();
    let (program, rest) =
        args.split_first().ok_or_else(|| SolverError::Unavailable("empty external solver command".into()))?;

    let mut child = Command::new(program)
        .args(rest)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolverError::Unavailable(format!("cannot run {program}: {e}")))?;

    let deadline = time_limit.map(|t| t + KILL_GRACE);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if deadline.is_some_and(|d| start.elapsed() > d) {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(SolveResult {
                status: SolveStatus::Timeout,
                objective: None,
                values: None,
                incumbent: None,
                runtime_s: start.elapsed().as_secs_f64(),
            });
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let stderr = {
        use std::io::Read;
        let mut s = String::new();
        if let Some(mut e) = child.stderr.take() {
            let _ = e.read_to_string(&mut s);
        }
        s
    };
    let runtime_s = start.elapsed().as_secs_f64();

    let text = match std::fs::read_to_string(&solution_path) {
        Ok(text) => text,
        Err(_) => {
            return Err(SolverError::Backend(format!(
                "{program} exited with {status} and wrote no solution file: {}",
                stderr.trim()
            )))
        }
    };
    let file = parse_solution(&text)?;
    let assignment = |file: &super::solution::SolutionFile| -> Result<Vec<f64>, SolverError> {
        for name in file.values.keys() {
            if model.index_of(name).is_none() {
                return Err(SolverError::Backend(format!("solution names unknown column {name}")));
            }
        }
        // CBC lists nonzeros only.
        Ok(model.variables.iter().map(|v| file.values.get(&v.name).copied().unwrap_or(0.0)).collect())
    };
    Ok(match file.status {
        SolveStatus::Optimal => {
            let values = assignment(&file)?;
            SolveResult {
                status: SolveStatus::Optimal,
                objective: Some(model.objective_value(&values)),
                values: Some(values),
                incumbent: None,
                runtime_s,
            }
        }
        SolveStatus::Infeasible => {
            SolveResult { status: SolveStatus::Infeasible, objective: None, values: None, incumbent: None, runtime_s }
        }
        SolveStatus::Timeout => {
            let incumbent = if file.values.is_empty() {
                None
            } else {
                let values = assignment(&file)?;
                Some((model.objective_value(&values), values))
            };
            SolveResult { status: SolveStatus::Timeout, objective: None, values: None, incumbent, runtime_s }
        }
    })
}
