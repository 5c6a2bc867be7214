//! Exhaustive optimum for tiny instances, independent of the ILP encoding.
//!
//! Per slot, every combination of per-robot links is enumerated and filtered
//! by coverage, conflicts, capacity and SINR (recomputed by the channel
//! module). A depth-first search over slots then tracks the RIS history
//! windows and each robot's outage run directly from the schedule.

use thiserror::Error;

use crate::allocation::{AllocationSchedule, Assignment};
use crate::scenario::{DerivedTables, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeGuard {
    pub max_robots: usize,
    pub max_slots: usize,
    pub max_bs: usize,
    pub max_ris: usize,
}

impl Default for SizeGuard {
    fn default() -> Self {
        Self { max_robots: 3, max_slots: 4, max_bs: 2, max_ris: 2 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("instance {robots}x{slots} with {bs} BS and {ris} RIS exceeds the brute-force guard {guard:?}")]
pub struct GuardExceeded {
    pub robots: usize,
    pub slots: usize,
    pub bs: usize,
    pub ris: usize,
    pub guard: SizeGuard,
}

/// Minimum total outages and one schedule attaining it; `None` when every
/// schedule causes a service failure.
pub fn brute_force_optimum(
    tables: &DerivedTables,
    scenario: &Scenario,
    guard: SizeGuard,
) -> Result<Option<(usize, AllocationSchedule)>, GuardExceeded> {
    let nr = scenario.robots.len();
    let ns = scenario.num_slots();
    let nb = scenario.base_stations.len();
    let ni = scenario.ris.len();
    if nr > guard.max_robots || ns > guard.max_slots || nb > guard.max_bs || ni > guard.max_ris {
        return Err(GuardExceeded { robots: nr, slots: ns, bs: nb, ris: ni, guard });
    }

    let mut scratch = AllocationSchedule::all_outage(nr, ns);
    let combos: Vec<Vec<Vec<Assignment>>> = (0..ns).map(|n| slot_combinations(tables, scenario, &mut scratch, n)).collect();
    // Fewest outages any valid combination of slot m onwards can have.
    let mut floor = vec![0usize; ns + 1];
    for n in (0..ns).rev() {
        let least = combos[n].iter().map(|c| outages(c)).min().unwrap_or(usize::MAX / 4);
        floor[n] = floor[n + 1] + least;
    }

    let mut search = Search {
        scenario,
        capacity: tables.max_concurrent as usize,
        delay: scenario.config.qos.reconfig_delay.max(1) as usize,
        combos: &combos,
        floor: &floor,
        chosen: Vec::with_capacity(ns),
        runs: vec![0; nr],
        best: None,
    };
    search.dfs(0, 0);
    Ok(search.best.map(|(total, rows)| (total, AllocationSchedule::from_slots(rows, nr))))
}

fn outages(combo: &[Assignment]) -> usize {
    combo.iter().filter(|a| a.is_outage()).count()
}

fn slot_combinations(
    tables: &DerivedTables,
    scenario: &Scenario,
    scratch: &mut AllocationSchedule,
    n: usize,
) -> Vec<Vec<Assignment>> {
    let nr = scenario.robots.len();
    let cov = &tables.coverage;
    let options: Vec<Vec<Assignment>> = (0..nr)
        .map(|r| {
            let mut opts = vec![Assignment::Outage];
            opts.extend((0..scenario.base_stations.len()).filter(|&b| cov.bs_covers(b, r, n)).map(Assignment::Bs));
            opts.extend((0..scenario.ris.len()).filter(|&i| cov.ris_link_available(i, r, n)).map(Assignment::Ris));
            opts
        })
        .collect();

    let mut out = Vec::new();
    let mut idx = vec![0usize; nr];
    loop {
        let combo: Vec<Assignment> = (0..nr).map(|r| options[r][idx[r]]).collect();
        if slot_valid(tables, scenario, scratch, n, &combo) {
            out.push(combo);
        }
        // Odometer increment.
        let mut r = 0;
        while r < nr {
            idx[r] += 1;
            if idx[r] < options[r].len() {
                break;
            }
            idx[r] = 0;
            r += 1;
        }
        if r == nr {
            break;
        }
    }
    out.sort_by_key(|c| outages(c));
    out
}

fn slot_valid(
    tables: &DerivedTables,
    scenario: &Scenario,
    scratch: &mut AllocationSchedule,
    n: usize,
    combo: &[Assignment],
) -> bool {
    for i in 0..scenario.ris.len() {
        let users: Vec<usize> = (0..combo.len()).filter(|&r| combo[r] == Assignment::Ris(i)).collect();
        if users.len() > tables.max_concurrent as usize {
            return false;
        }
        for (k, &r) in users.iter().enumerate() {
            if users[k + 1..].iter().any(|&s| tables.conflicts.conflicting(i, n, r, s)) {
                return false;
            }
        }
    }
    for (r, &a) in combo.iter().enumerate() {
        scratch.set(r, n, a);
    }
    combo.iter().enumerate().all(|(r, a)| {
        a.is_outage() || {
            let sinr = tables.powers.sinr(scratch, r, n).expect("served robot");
            sinr >= scenario.robots[r].sinr_threshold * (1.0 - crate::allocation::SINR_RELATIVE_TOLERANCE)
        }
    })
}

struct Search<'a> {
    scenario: &'a Scenario,
    capacity: usize,
    delay: usize,
    combos: &'a [Vec<Vec<Assignment>>],
    floor: &'a [usize],
    chosen: Vec<Vec<Assignment>>,
    runs: Vec<u32>,
    best: Option<(usize, Vec<Vec<Assignment>>)>,
}

impl Search<'_> {
    fn dfs(&mut self, n: usize, total: usize) {
        if n == self.combos.len() {
            if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                self.best = Some((total, self.chosen.clone()));
            }
            return;
        }
        for combo in &self.combos[n] {
            let here = total + outages(combo);
            if self.best.as_ref().is_some_and(|(b, _)| here + self.floor[n + 1] >= *b) {
                // Sorted by outages: no later combination can do better.
                break;
            }
            if !self.ready(n, combo) {
                continue;
            }
            let saved = self.runs.clone();
            let mut failed = false;
            for (r, a) in combo.iter().enumerate() {
                self.runs[r] = if a.is_outage() { self.runs[r] + 1 } else { 0 };
                failed |= self.runs[r] >= self.scenario.robots[r].outage_limit;
            }
            if !failed {
                self.chosen.push(combo.clone());
                self.dfs(n + 1, here);
                self.chosen.pop();
            }
            self.runs = saved;
        }
    }

    /// Every RIS used at `n` has served at most `U` distinct robots over the
    /// window ending at `n`.
    fn ready(&self, n: usize, combo: &[Assignment]) -> bool {
        let start = (n + 1).saturating_sub(self.delay);
        for i in 0..self.scenario.ris.len() {
            if !combo.contains(&Assignment::Ris(i)) {
                continue;
            }
            let distinct = (0..combo.len())
                .filter(|&r| {
                    combo[r] == Assignment::Ris(i) || (start..n).any(|m| self.chosen[m][r] == Assignment::Ris(i))
                })
                .count();
            if distinct > self.capacity {
                return false;
            }
        }
        true
    }
}
