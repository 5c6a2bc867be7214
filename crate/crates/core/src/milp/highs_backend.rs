//! In-process HiGHS through the `highs` crate.

use std::time::{Duration, Instant};

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

use super::model::{MilpModel, RowSense, VarKind};
use super::{SolveResult, SolveStatus, SolverError};

pub(crate) fn solve(model: &MilpModel, time_limit: Option<Duration>) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let mut pb = RowProblem::default();
    let cols: Vec<_> = model
        .variables
        .iter()
        .map(|v| pb.add_column_with_integrality(v.objective, v.lower..=v.upper, v.kind == VarKind::Integer))
        .collect();
    for c in &model.constraints {
        let terms = c.terms.iter().map(|&(j, a)| (cols[j], a));
        match c.sense {
            RowSense::Le => pb.add_row(..=c.rhs, terms),
            RowSense::Ge => pb.add_row(c.rhs.., terms),
            RowSense::Eq => pb.add_row(c.rhs..=c.rhs, terms),
        }
    }

    let mut highs = pb.optimise(Sense::Minimise);
    highs.make_quiet();
    highs.set_option("threads", 1);
    highs.set_option("mip_rel_gap", 0.0);
    highs.set_option("mip_feasibility_tolerance", 1e-9);
    highs.set_option("primal_feasibility_tolerance", 1e-9);
    highs.set_option("small_matrix_value", 1e-12);
    if let Some(t) = time_limit {
        highs.set_option("time_limit", t.as_secs_f64().max(1e-3));
    }
    let solved = highs.try_solve().map_err(|e| SolverError::Backend(format!("HiGHS failed: {e:?}")))?;
    let runtime_s = start.elapsed().as_secs_f64();

    let status = solved.status();
    let values = || solved.get_solution().columns().to_vec();
    let result = match status {
        HighsModelStatus::Optimal => SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(solved.objective_value()),
            values: Some(values()),
            incumbent: None,
            runtime_s,
        },
        HighsModelStatus::Infeasible => SolveResult {
            status: SolveStatus::Infeasible,
            objective: None,
            values: None,
            incumbent: None,
            runtime_s,
        },
        HighsModelStatus::ReachedTimeLimit => {
            let incumbent = (solved.primal_solution_status() == HighsSolutionStatus::Feasible)
                .then(|| (solved.objective_value(), values()));
            SolveResult { status: SolveStatus::Timeout, objective: None, values: None, incumbent, runtime_s }
        }
        other => return Err(SolverError::Backend(format!("HiGHS ended with status {other:?}"))),
    };
    Ok(result)
}
