//! Allocation schedules, their feasibility check against a scenario, and the
//! outage and service-failure metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scenario::{DerivedTables, Scenario};

/// Relative slack on SINR re-verification.
pub const SINR_RELATIVE_TOLERANCE: f64 = 1e-9;

/// What robot `r` is connected to during one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    Bs(usize),
    Ris(usize),
    Outage,
}

impl Assignment {
    pub fn is_outage(self) -> bool {
        matches!(self, Assignment::Outage)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assignment::Bs(b) => write!(f, "b{b}"),
            Assignment::Ris(i) => write!(f, "i{i}"),
            Assignment::Outage => f.write_str("--"),
        }
    }
}

/// One assignment per robot per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct AllocationSchedule {
    num_robots: usize,
    num_slots: usize,
    /// Row-major by slot: `cells[n * num_robots + r]`.
    cells: Vec<Assignment>,
}

impl AllocationSchedule {
    pub fn all_outage(num_robots: usize, num_slots: usize) -> Self {
        Self { num_robots, num_slots, cells: vec![Assignment::Outage; num_robots * num_slots] }
    }

    /// Build from `rows[n][r]`.
    pub fn from_slots(rows: Vec<Vec<Assignment>>, num_robots: usize) -> Self {
        let num_slots = rows.len();
        let mut cells = Vec::with_capacity(num_slots * num_robots);
        for row in rows {
            assert_eq!(row.len(), num_robots, "every slot needs one assignment per robot");
            cells.extend(row);
        }
        Self { num_robots, num_slots, cells }
    }

    pub fn num_robots(&self) -> usize {
        self.num_robots
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn get(&self, r: usize, n: usize) -> Assignment {
        self.cells[n * self.num_robots + r]
    }

    pub fn set(&mut self, r: usize, n: usize, a: Assignment) {
        self.cells[n * self.num_robots + r] = a;
    }

    pub fn slot(&self, n: usize) -> &[Assignment] {
        &self.cells[n * self.num_robots..(n + 1) * self.num_robots]
    }

    /// `O_{r,n}` for one robot across all slots.
    pub fn outage_pattern(&self, r: usize) -> Vec<bool> {
        (0..self.num_slots).map(|n| self.get(r, n).is_outage()).collect()
    }

    pub fn total_outages(&self) -> usize {
        self.cells.iter().filter(|a| a.is_outage()).count()
    }

    /// `X_{b,r,n}`
    pub fn x_bs(&self, b: usize, r: usize, n: usize) -> bool {
        self.get(r, n) == Assignment::Bs(b)
    }

    /// `X_{i,r,n}`
    pub fn x_ris(&self, i: usize, r: usize, n: usize) -> bool {
        self.get(r, n) == Assignment::Ris(i)
    }
}

impl fmt::Display for AllocationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slot")?;
        for r in 0..self.num_robots {
            write!(f, " {:>4}", format!("r{r}"))?;
        }
        writeln!(f)?;
        for n in 0..self.num_slots {
            write!(f, "{n:>4}")?;
            for a in self.slot(n) {
                write!(f, " {:>4}", a.to_string())?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// On-disk form: `slots[n][r]`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    num_robots: usize,
    slots: Vec<Vec<Assignment>>,
}

impl From<AllocationSchedule> for ScheduleRepr {
    fn from(s: AllocationSchedule) -> Self {
        let slots = (0..s.num_slots).map(|n| s.slot(n).to_vec()).collect();
        Self { num_robots: s.num_robots, slots }
    }
}

impl TryFrom<ScheduleRepr> for AllocationSchedule {
    type Error = String;

    fn try_from(repr: ScheduleRepr) -> Result<Self, String> {
        if let Some(n) = repr.slots.iter().position(|row| row.len() != repr.num_robots) {
            return Err(format!("slot {n} has {} entries for {} robots", repr.slots[n].len(), repr.num_robots));
        }
        Ok(Self::from_slots(repr.slots, repr.num_robots))
    }
}

pub const SCHEDULE_FORMAT_NAME: &str = "risnet-schedule";
pub const SCHEDULE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ScheduleFile {
    format: String,
    version: u32,
    schedule: AllocationSchedule,
}

pub fn serialize_schedule(schedule: &AllocationSchedule) -> String {
    let file = ScheduleFile {
        format: SCHEDULE_FORMAT_NAME.into(),
        version: SCHEDULE_FORMAT_VERSION,
        schedule: schedule.clone(),
    };
    serde_json::to_string_pretty(&file).expect("schedule serializes")
}

pub fn deserialize_schedule(text: &str) -> Result<AllocationSchedule, String> {
    let file: ScheduleFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if file.format != SCHEDULE_FORMAT_NAME {
        return Err(format!("not a schedule file (format {:?})", file.format));
    }
    if file.version != SCHEDULE_FORMAT_VERSION {
        return Err(format!("unsupported schedule version {}", file.version));
    }
    Ok(file.schedule)
}

/// Percentage of robot-slots in outage.
pub fn outage_percentage(schedule: &AllocationSchedule) -> f64 {
    let cells = schedule.num_robots() * schedule.num_slots();
    100.0 * schedule.total_outages() as f64 / cells as f64
}

/// A run of `limit` consecutive outages of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceFailure {
    pub robot: usize,
    pub first_slot: usize,
    pub last_slot: usize,
}

/// First run of `K_r` consecutive outage slots in `pattern`, as `(first, last)`.
pub fn first_outage_run(pattern: &[bool], limit: u32) -> Option<(usize, usize)> {
    let limit = limit as usize;
    if limit == 0 {
        return Some((0, 0));
    }
    let mut run = 0;
    for (n, &out) in pattern.iter().enumerate() {
        run = if out { run + 1 } else { 0 };
        if run == limit {
            return Some((n + 1 - limit, n));
        }
    }
    None
}

/// Earliest-ending service failure over all robots, if any. `limits[r]` is `K_r`.
pub fn has_service_failure(schedule: &AllocationSchedule, limits: &[u32]) -> Option<ServiceFailure> {
    (0..schedule.num_robots())
        .filter_map(|r| {
            first_outage_run(&schedule.outage_pattern(r), limits[r])
                .map(|(first_slot, last_slot)| ServiceFailure { robot: r, first_slot, last_slot })
        })
        .min_by_key(|f| (f.last_slot, f.robot))
}

/// RIS reconfiguration state derived from a schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RisHistory {
    /// `y[n][i][r]`: robot `r` was on RIS `i` at least once in `[n-D+1, n]`.
    pub y: Vec<Vec<Vec<bool>>>,
    /// `busy[n][i]`: more than `U` distinct robots in the window (`C_{i,n} = 1`).
    pub busy: Vec<Vec<bool>>,
    /// `w[n][i][r]`: robot on RIS `i` while it is ready.
    pub w: Vec<Vec<Vec<bool>>>,
}

impl RisHistory {
    pub fn compute(schedule: &AllocationSchedule, num_ris: usize, delay: u32, capacity: u32) -> Self {
        let nr = schedule.num_robots();
        let window = delay.max(1) as usize;
        let mut y = Vec::with_capacity(schedule.num_slots());
        let mut busy = Vec::with_capacity(schedule.num_slots());
        let mut w = Vec::with_capacity(schedule.num_slots());
        for n in 0..schedule.num_slots() {
            let start = (n + 1).saturating_sub(window);
            let yn: Vec<Vec<bool>> = (0..num_ris)
                .map(|i| (0..nr).map(|r| (start..=n).any(|m| schedule.x_ris(i, r, m))).collect())
                .collect();
            let bn: Vec<bool> =
                yn.iter().map(|row| row.iter().filter(|&&v| v).count() > capacity as usize).collect();
            let wn = (0..num_ris).map(|i| (0..nr).map(|r| schedule.x_ris(i, r, n) && !bn[i]).collect()).collect();
            y.push(yn);
            busy.push(bn);
            w.push(wn);
        }
        Self { y, busy, w }
    }
}

/// Constraint families of the allocation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    /// One link per robot per slot, including index range checks.
    SingleAssignment,
    /// The assigned pair must be in line of sight.
    Coverage,
    /// No two same-angle robots on one RIS.
    Conflict,
    /// At most `U` robots on one RIS.
    Capacity,
    /// Direct-link SINR threshold.
    SinrBs,
    /// RIS-link SINR threshold.
    SinrRis,
    /// RIS must be ready: window history and availability.
    RisReady,
    /// Fewer than `K_r` outages in every window.
    OutageWindow,
}

impl ConstraintFamily {
    pub fn label(self) -> &'static str {
        match self {
            Self::SingleAssignment => "single-assignment",
            Self::Coverage => "coverage",
            Self::Conflict => "conflict",
            Self::Capacity => "capacity",
            Self::SinrBs => "sinr-bs",
            Self::SinrRis => "sinr-ris",
            Self::RisReady => "ris-ready",
            Self::OutageWindow => "outage-window",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub slot: usize,
    pub robot: Option<usize>,
    pub ris: Option<usize>,
    pub bs: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] n={}", self.family.label(), self.slot)?;
        if let Some(r) = self.robot {
            write!(f, " r={r}")?;
        }
        if let Some(b) = self.bs {
            write!(f, " b={b}")?;
        }
        if let Some(i) = self.ris {
            write!(f, " i={i}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn families(&self) -> Vec<ConstraintFamily> {
        let mut out: Vec<_> = self.violations.iter().map(|v| v.family).collect();
        out.dedup();
        out
    }

    pub fn count(&self, family: ConstraintFamily) -> usize {
        self.violations.iter().filter(|v| v.family == family).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "feasible: no violations");
        }
        writeln!(f, "infeasible: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}

/// Check every constraint family for `schedule`. SINR is recomputed from the
/// link tables rather than read from any model coefficients.
pub fn validate(scenario: &Scenario, tables: &DerivedTables, schedule: &AllocationSchedule) -> ValidationReport {
    let mut report = ValidationReport::default();
    let nb = scenario.base_stations.len();
    let ni = scenario.ris.len();
    let nr = scenario.robots.len();
    let ns = scenario.num_slots();

    if schedule.num_robots() != nr || schedule.num_slots() != ns {
        report.violations.push(Violation {
            family: ConstraintFamily::SingleAssignment,
            slot: 0,
            robot: None,
            ris: None,
            bs: None,
            detail: format!(
                "schedule is {}x{} (robots x slots), scenario needs {nr}x{ns}",
                schedule.num_robots(),
                schedule.num_slots()
            ),
        });
        return report;
    }

    let coverage = &tables.coverage;
    let mut push = |family, slot, robot, bs, ris, detail: String| {
        report.violations.push(Violation { family, slot, robot, ris, bs, detail });
    };

    for n in 0..ns {
        // Index ranges; a bad index makes the remaining checks meaningless.
        let mut in_range = true;
        for r in 0..nr {
            match schedule.get(r, n) {
                Assignment::Bs(b) if b >= nb => {
                    push(ConstraintFamily::SingleAssignment, n, Some(r), Some(b), None, format!("no BS {b}"));
                    in_range = false;
                }
                Assignment::Ris(i) if i >= ni => {
                    push(ConstraintFamily::SingleAssignment, n, Some(r), None, Some(i), format!("no RIS {i}"));
                    in_range = false;
                }
                _ => {}
            }
        }
        if !in_range {
            continue;
        }

        for r in 0..nr {
            match schedule.get(r, n) {
                Assignment::Bs(b) if !coverage.bs_covers(b, r, n) => {
                    push(ConstraintFamily::Coverage, n, Some(r), Some(b), None, "BS has no line of sight".into());
                }
                Assignment::Ris(i) if !coverage.ris_link_available(i, r, n) => {
                    push(
                        ConstraintFamily::Coverage,
                        n,
                        Some(r),
                        None,
                        Some(i),
                        "RIS does not cover the robot or has no feeding BS".into(),
                    );
                }
                _ => {}
            }
        }

        for i in 0..ni {
            for &(r, s) in tables.conflicts.at(i, n) {
                if schedule.x_ris(i, r, n) && schedule.x_ris(i, s, n) {
                    push(
                        ConstraintFamily::Conflict,
                        n,
                        Some(r),
                        None,
                        Some(i),
                        format!("robots {r} and {s} share an arrival angle"),
                    );
                }
            }
            let load = (0..nr).filter(|&r| schedule.x_ris(i, r, n)).count();
            if load > tables.max_concurrent as usize {
                push(
                    ConstraintFamily::Capacity,
                    n,
                    None,
                    None,
                    Some(i),
                    format!("{load} robots, capacity {}", tables.max_concurrent),
                );
            }
        }

        for r in 0..nr {
            let assignment = schedule.get(r, n);
            if assignment.is_outage() {
                continue;
            }
            let Ok(sinr) = tables.powers.sinr(schedule, r, n) else { continue };
            let required = scenario.robots[r].sinr_threshold;
            if sinr < required * (1.0 - SINR_RELATIVE_TOLERANCE) {
                let (family, bs, ris) = match assignment {
                    Assignment::Bs(b) => (ConstraintFamily::SinrBs, Some(b), None),
                    Assignment::Ris(i) => (ConstraintFamily::SinrRis, None, Some(i)),
                    Assignment::Outage => unreachable!(),
                };
                push(family, n, Some(r), bs, ris, format!("SINR {sinr:.6e} below threshold {required}"));
            }
        }
    }

    if report.violations.iter().any(|v| v.family == ConstraintFamily::SingleAssignment) {
        return report;
    }

    let history = RisHistory::compute(schedule, ni, scenario.config.qos.reconfig_delay, tables.max_concurrent);
    for n in 0..ns {
        for i in 0..ni {
            if !history.busy[n][i] {
                continue;
            }
            let distinct = history.y[n][i].iter().filter(|&&v| v).count();
            for r in 0..nr {
                if schedule.x_ris(i, r, n) {
                    report.violations.push(Violation {
                        family: ConstraintFamily::RisReady,
                        slot: n,
                        robot: Some(r),
                        ris: Some(i),
                        bs: None,
                        detail: format!(
                            "RIS is reconfiguring: {distinct} robots within the last {} slot(s), capacity {}",
                            scenario.config.qos.reconfig_delay, tables.max_concurrent
                        ),
                    });
                }
            }
        }
    }

    for r in 0..nr {
        let limit = scenario.robots[r].outage_limit as usize;
        let pattern = schedule.outage_pattern(r);
        for n in 0..ns {
            let start = (n + 1).saturating_sub(limit);
            let count = pattern[start..=n].iter().filter(|&&o| o).count();
            if count >= limit {
                report.violations.push(Violation {
                    family: ConstraintFamily::OutageWindow,
                    slot: n,
                    robot: Some(r),
                    ris: None,
                    bs: None,
                    detail: format!("{count} outages in slots {start}..={n}, limit K_r = {limit}"),
                });
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schedule_from_pattern(pattern: &[bool]) -> AllocationSchedule {
        let rows = pattern.iter().map(|&o| vec![if o { Assignment::Outage } else { Assignment::Bs(0) }]).collect();
        AllocationSchedule::from_slots(rows, 1)
    }

    /// Sliding-window oracle: every window of length `k` is scanned explicitly.
    fn window_oracle(pattern: &[bool], k: usize) -> Option<usize> {
        (0..pattern.len()).find(|&s| s + k <= pattern.len() && pattern[s..s + k].iter().all(|&o| o))
    }

    #[test]
    fn schedule_file_round_trip() {
        let s = AllocationSchedule::from_slots(
            vec![vec![Assignment::Bs(1), Assignment::Outage], vec![Assignment::Ris(0), Assignment::Bs(0)]],
            2,
        );
        assert_eq!(deserialize_schedule(&serialize_schedule(&s)).unwrap(), s);
        let ragged = r#"{"format":"risnet-schedule","version":1,"schedule":{"num_robots":2,"slots":[["outage"]]}}"#;
        assert!(deserialize_schedule(ragged).unwrap_err().contains("slot 0"));
        let wrong = serialize_schedule(&s).replace("risnet-schedule", "other");
        assert!(deserialize_schedule(&wrong).is_err());
    }

    #[test]
    fn outage_percentage_examples() {
        assert_eq!(outage_percentage(&AllocationSchedule::from_slots(vec![vec![Assignment::Bs(0); 6]; 50], 6)), 0.0);
        assert_eq!(outage_percentage(&AllocationSchedule::all_outage(6, 50)), 100.0);
        let mut s = AllocationSchedule::from_slots(vec![vec![Assignment::Bs(0); 6]; 50], 6);
        for k in 0..30 {
            s.set(k % 6, k / 6, Assignment::Outage);
        }
        assert!((outage_percentage(&s) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn service_failure_examples() {
        let alternating = schedule_from_pattern(&[true, false, true, false]);
        assert_eq!(has_service_failure(&alternating, &[2]), None);

        let middle = schedule_from_pattern(&[false, true, true, false]);
        assert_eq!(has_service_failure(&middle, &[2]), Some(ServiceFailure { robot: 0, first_slot: 1, last_slot: 2 }));

        let pattern = [true, true, false, true, true, true];
        assert_eq!(window_oracle(&pattern, 3), Some(3));
        let tail = schedule_from_pattern(&pattern);
        assert_eq!(has_service_failure(&tail, &[3]), Some(ServiceFailure { robot: 0, first_slot: 3, last_slot: 5 }));
    }

    proptest! {
        #[test]
        fn failure_matches_window_oracle(pattern in prop::collection::vec(any::<bool>(), 1..40), k in 1u32..8) {
            let found = first_outage_run(&pattern, k).map(|(first, _)| first);
            prop_assert_eq!(found, window_oracle(&pattern, k as usize));
        }

        #[test]
        fn failure_is_monotone(pattern in prop::collection::vec(any::<bool>(), 1..40), k in 1u32..8, flip in 0usize..40) {
            let before = first_outage_run(&pattern, k).is_some();
            let mut worse = pattern.clone();
            let idx = flip % worse.len();
            worse[idx] = true;
            if before {
                prop_assert!(first_outage_run(&worse, k).is_some());
            }
        }

        #[test]
        fn outage_percentage_ignores_relabeling(cells in prop::collection::vec(any::<bool>(), 12), shift in 0usize..12) {
            let rows: Vec<Vec<Assignment>> = cells
                .chunks(3)
                .map(|c| c.iter().map(|&o| if o { Assignment::Outage } else { Assignment::Bs(0) }).collect())
                .collect();
            let base = AllocationSchedule::from_slots(rows.clone(), 3);
            let mut permuted: Vec<Vec<Assignment>> = rows.clone();
            permuted.rotate_left(shift % rows.len());
            for row in &mut permuted {
                row.reverse();
            }
            let other = AllocationSchedule::from_slots(permuted, 3);
            prop_assert_eq!(outage_percentage(&base), outage_percentage(&other));
        }
    }
}
