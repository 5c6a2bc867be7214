//! Read an allocation schedule back out of a 0-1 solution.

use thiserror::Error;

use super::model::{MilpModel, VarKey};
use super::{SolveResult, SolveStatus};
use crate::allocation::{AllocationSchedule, Assignment, RisHistory};
use crate::scenario::Scenario;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("result is {0:?}, not optimal")]
    NotOptimal(SolveStatus),
    #[error("solution has {got} values for {expected} columns")]
    Length { got: usize, expected: usize },
    #[error("column {0} lies outside the scenario")]
    OutOfRange(String),
    #[error("model has no outage column for robot {robot} at slot {slot}")]
    MissingOutage { robot: usize, slot: usize },
    #[error("robot {robot} at slot {slot} is not in outage but holds {links} links")]
    LinkCount { robot: usize, slot: usize, links: usize },
    #[error("robot {robot} at slot {slot} uses RIS {ris} without its readiness column set")]
    NotReady { robot: usize, slot: usize, ris: usize },
}

pub fn extract_schedule(
    model: &MilpModel,
    result: &SolveResult,
    num_robots: usize,
    num_slots: usize,
) -> Result<AllocationSchedule, ExtractError> {
    match (&result.status, &result.values) {
        (SolveStatus::Optimal, Some(values)) => extract_assignment(model, values, num_robots, num_slots),
        (status, _) => Err(ExtractError::NotOptimal(*status)),
    }
}

/// A robot whose outage column is set is in outage, whatever links it holds;
/// otherwise it must hold exactly one link, and a RIS link needs its
/// readiness column.
pub fn extract_assignment(
    model: &MilpModel,
    values: &[f64],
    num_robots: usize,
    num_slots: usize,
) -> Result<AllocationSchedule, ExtractError> {
    if values.len() != model.variables.len() {
        return Err(ExtractError::Length { got: values.len(), expected: model.variables.len() });
    }
    let mut outage = vec![vec![None; num_robots]; num_slots];
    let mut links: Vec<Vec<Vec<Assignment>>> = vec![vec![Vec::new(); num_robots]; num_slots];
    let mut ready: Vec<(usize, usize, usize)> = Vec::new();
    for (j, &x) in values.iter().enumerate() {
        let Some(key) = model.key(j) else { continue };
        let on = x > 0.5;
        let (r, n) = match key {
            VarKey::Xb { r, n, .. } | VarKey::Xi { r, n, .. } | VarKey::W { r, n, .. } | VarKey::O { r, n } => (r, n),
            _ => continue,
        };
        if r >= num_robots || n >= num_slots {
            return Err(ExtractError::OutOfRange(model.variables[j].name.clone()));
        }
        match key {
            VarKey::O { .. } => outage[n][r] = Some(on),
            VarKey::Xb { b, .. } if on => links[n][r].push(Assignment::Bs(b)),
            VarKey::Xi { i, .. } if on => links[n][r].push(Assignment::Ris(i)),
            VarKey::W { i, .. } if on => ready.push((i, r, n)),
            _ => {}
        }
    }
    let mut schedule = AllocationSchedule::all_outage(num_robots, num_slots);
    for n in 0..num_slots {
        for r in 0..num_robots {
            match outage[n][r] {
                None => return Err(ExtractError::MissingOutage { robot: r, slot: n }),
                Some(true) => {}
                Some(false) => {
                    let [link] = links[n][r].as_slice() else {
                        return Err(ExtractError::LinkCount { robot: r, slot: n, links: links[n][r].len() });
                    };
                    if let Assignment::Ris(i) = *link {
                        if !ready.contains(&(i, r, n)) {
                            return Err(ExtractError::NotReady { robot: r, slot: n, ris: i });
                        }
                    }
                    schedule.set(r, n, *link);
                }
            }
        }
    }
    Ok(schedule)
}

/// Column values that represent `schedule` in `model`, the inverse of
/// [`extract_assignment`]. Auxiliary columns take the values the schedule
/// implies: `Z = 1 - X`, `Y` and `C` from the RIS history, `W = X_i·(1 - C)`.
/// A schedule that passes validation yields a point satisfying every row.
pub fn encode_schedule(model: &MilpModel, scenario: &Scenario, schedule: &AllocationSchedule) -> Vec<f64> {
    let qos = &scenario.config.qos;
    let history = RisHistory::compute(schedule, scenario.ris.len(), qos.reconfig_delay, scenario.config.concurrent());
    (0..model.variables.len())
        .map(|j| {
            let on = match model.key(j) {
                Some(VarKey::Xb { b, r, n }) => schedule.x_bs(b, r, n),
                Some(VarKey::Xi { i, r, n }) => schedule.x_ris(i, r, n),
                Some(VarKey::Zb { b, r, n }) => !schedule.x_bs(b, r, n),
                Some(VarKey::Zi { i, r, n }) => !schedule.x_ris(i, r, n),
                Some(VarKey::Y { i, r, n }) => history.y[n][i][r],
                Some(VarKey::C { i, n }) => history.busy[n][i],
                Some(VarKey::W { i, r, n }) => history.w[n][i][r],
                Some(VarKey::O { r, n }) => schedule.get(r, n).is_outage(),
                None => false,
            };
            f64::from(u8::from(on))
        })
        .collect()
}
