//! Exact depth-first branch-and-bound for pure 0-1 programs.
//!
//! No LP relaxation is solved. Each row is kept in `≤` form together with its
//! minimum activity over the still-free columns; a row whose minimum activity
//! exceeds its right-hand side prunes the node, and a free column whose
//! switch would do so is fixed (bound propagation). The objective bound is the
//! fixed part plus every negative free coefficient. This is only practical for
//! desk-sized models: a few robots over a few dozen slots.

use std::time::{Duration, Instant};

use super::model::{MilpModel, RowSense, VarKey};
use super::{SolveResult, SolveStatus, SolverError};

const FREE: u8 = 2;
const TIME_CHECK_INTERVAL: u64 = 1024;
/// Probing is skipped while more columns than this are free.
const PROBE_LIMIT: usize = 2000;

struct Row {
    /// Sorted by decreasing magnitude.
    terms: Vec<(usize, f64)>,
    limit: f64,
}

enum Trail {
    Var(usize),
    Activity(usize, f64),
    Bound(f64),
}

struct Search<'a> {
    rows: Vec<Row>,
    columns: Vec<Vec<(usize, f64)>>,
    cost: &'a [f64],
    value: Vec<u8>,
    activity: Vec<f64>,
    bound: f64,
    trail: Vec<Trail>,
    queue: Vec<usize>,
    queued: Vec<bool>,
    /// Columns with a nonzero cost, by decreasing magnitude.
    costly: Vec<usize>,
    /// Largest objective still worth exploring.
    cutoff: f64,
}

impl Search<'_> {
    /// Fix column `j`; false when some row becomes unsatisfiable.
    fn assign(&mut self, j: usize, v: u8) -> bool {
        self.value[j] = v;
        self.trail.push(Trail::Var(j));
        let c = self.cost[j];
        let delta = c * f64::from(v) - c.min(0.0);
        if delta != 0.0 {
            self.trail.push(Trail::Bound(self.bound));
            self.bound += delta;
        }
        let mut ok = true;
        for k in 0..self.columns[j].len() {
            let (row, a) = self.columns[j][k];
            let delta = a * f64::from(v) - a.min(0.0);
            if delta == 0.0 {
                continue;
            }
            self.trail.push(Trail::Activity(row, self.activity[row]));
            self.activity[row] += delta;
            if self.activity[row] > self.rows[row].limit {
                ok = false;
            } else if !self.queued[row] {
                self.queued[row] = true;
                self.queue.push(row);
            }
        }
        ok
    }

    fn propagate(&mut self) -> bool {
        loop {
            if !self.propagate_rows() {
                return false;
            }
            if self.bound > self.cutoff {
                return false;
            }
            // The objective acts as one more row once an incumbent exists.
            let slack = self.cutoff - self.bound;
            let mut fixed = false;
            for k in 0..self.costly.len() {
                let j = self.costly[k];
                let c = self.cost[j];
                if c.abs() <= slack {
                    break;
                }
                if self.value[j] == FREE {
                    fixed = true;
                    if !self.assign(j, u8::from(c < 0.0)) {
                        self.clear_queue();
                        return false;
                    }
                }
            }
            if !fixed {
                return true;
            }
        }
    }

    fn propagate_rows(&mut self) -> bool {
        while let Some(row) = self.queue.pop() {
            self.queued[row] = false;
            let slack = self.rows[row].limit - self.activity[row];
            let mut k = 0;
            while k < self.rows[row].terms.len() {
                let (j, a) = self.rows[row].terms[k];
                k += 1;
                if a.abs() <= slack {
                    break;
                }
                if self.value[j] == FREE && !self.assign(j, u8::from(a < 0.0)) {
                    self.clear_queue();
                    return false;
                }
            }
        }
        true
    }

    /// Failed-literal probing: a column whose one value propagates to a
    /// contradiction takes the other. False when both values fail.
    fn probe(&mut self) -> bool {
        if self.value.iter().filter(|&&v| v == FREE).count() > PROBE_LIMIT {
            return true;
        }
        loop {
            let mut changed = false;
            for j in 0..self.value.len() {
                if self.value[j] != FREE {
                    continue;
                }
                let mut works = [false; 2];
                for v in 0..2u8 {
                    let mark = self.trail.len();
                    works[v as usize] = self.assign(j, v) && self.propagate();
                    self.clear_queue();
                    self.undo(mark);
                }
                match works {
                    [true, true] => {}
                    [false, false] => return false,
                    [ok0, _] => {
                        changed = true;
                        if !(self.assign(j, u8::from(!ok0)) && self.propagate()) {
                            self.clear_queue();
                            return false;
                        }
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn clear_queue(&mut self) {
        for row in self.queue.drain(..) {
            self.queued[row] = false;
        }
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                Trail::Var(j) => self.value[j] = FREE,
                Trail::Activity(row, old) => self.activity[row] = old,
                Trail::Bound(old) => self.bound = old,
            }
        }
    }
}

/// Value tried first for a column, from its role in the allocation model.
fn preferred_value(model: &MilpModel, j: usize) -> u8 {
    match model.key(j) {
        Some(VarKey::Xb { .. } | VarKey::Xi { .. } | VarKey::W { .. }) => 1,
        Some(_) => 0,
        None => u8::from(model.variables[j].objective < 0.0),
    }
}

/// Position of a column in the builder's own order: per slot, each robot's
/// link columns, then the RIS history columns.
fn catalog_rank(key: VarKey) -> (usize, usize, usize, usize, usize) {
    match key {
        VarKey::O { r, n } => (n, 0, r, 0, 0),
        VarKey::Xb { b, r, n } => (n, 0, r, 1, b),
        VarKey::Xi { i, r, n } => (n, 0, r, 2, i),
        VarKey::Zb { b, r, n } => (n, 0, r, 3, b),
        VarKey::Zi { i, r, n } => (n, 0, r, 4, i),
        VarKey::W { i, r, n } => (n, 0, r, 5, i),
        VarKey::Y { i, r, n } => (n, 1, i, r, 0),
        VarKey::C { i, n } => (n, 2, i, 0, 0),
    }
}

pub(crate) fn solve(model: &MilpModel, time_limit: Option<Duration>) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    for v in &model.variables {
        if !v.is_binary() {
            return Err(SolverError::Unsupported(format!(
                "the bundled solver handles 0-1 columns only; {} is not binary",
                v.name
            )));
        }
    }
    let nv = model.variables.len();
    let cost: Vec<f64> = model.variables.iter().map(|v| v.objective).collect();

    let mut rows = Vec::new();
    for c in &model.constraints {
        let tol = 1e-10 * c.rhs.abs().max(1.0);
        let mut push = |sign: f64| {
            let mut terms: Vec<(usize, f64)> =
                c.terms.iter().filter(|t| t.1 != 0.0).map(|&(j, a)| (j, sign * a)).collect();
            terms.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            rows.push(Row { terms, limit: sign * c.rhs + tol });
        };
        match c.sense {
            RowSense::Le => push(1.0),
            RowSense::Ge => push(-1.0),
            RowSense::Eq => {
                push(1.0);
                push(-1.0);
            }
        }
    }
    let mut columns = vec![Vec::new(); nv];
    for (r, row) in rows.iter().enumerate() {
        for &(j, a) in &row.terms {
            columns[j].push((r, a));
        }
    }
    let activity = rows.iter().map(|r| r.terms.iter().map(|t| t.1.min(0.0)).sum()).collect();
    let nrows = rows.len();
    let mut costly: Vec<usize> = (0..nv).filter(|&j| cost[j] != 0.0).collect();
    costly.sort_by(|&a, &b| cost[b].abs().total_cmp(&cost[a].abs()));
    // With integral costs on 0-1 columns only strictly better integers count.
    let integral = cost.iter().all(|c| c.fract() == 0.0);
    let cutoff_below = |best: f64| if integral { best - 1.0 + 1e-6 } else { best - 1e-9 };
    let mut s = Search {
        rows,
        columns,
        cost: &cost,
        value: vec![FREE; nv],
        activity,
        bound: cost.iter().map(|c| c.min(0.0)).sum(),
        trail: Vec::new(),
        queue: (0..nrows).collect(),
        queued: vec![true; nrows],
        costly,
        cutoff: f64::INFINITY,
    };

    let infeasible = |start: Instant| SolveResult {
        status: SolveStatus::Infeasible,
        objective: None,
        values: None,
        incumbent: None,
        runtime_s: start.elapsed().as_secs_f64(),
    };

    // Root: bounds, then propagation.
    let root_ok = s.activity.iter().zip(&s.rows).all(|(a, r)| *a <= r.limit)
        && model.variables.iter().enumerate().all(|(j, v)| {
            if v.lower == v.upper {
                s.value[j] != FREE || s.assign(j, v.lower as u8)
            } else {
                true
            }
        })
        && s.propagate()
        && s.probe();
    if !root_ok {
        return Ok(infeasible(start));
    }

    // Slot-major for allocation models, whatever order a model file listed them in.
    let mut order: Vec<(usize, u8)> = (0..nv).map(|j| (j, preferred_value(model, j))).collect();
    order.sort_by_key(|&(j, _)| model.key(j).map_or((usize::MAX, 0, 0, 0, 0), catalog_rank));

    struct Frame {
        pos: usize,
        mark: usize,
        alternative: Option<u8>,
    }
    let mut frames: Vec<Frame> = Vec::new();
    let mut best: Option<(f64, Vec<u8>)> = None;
    let mut nodes: u64 = 0;
    let mut pos = 0;
    let mut timed_out = false;

    'search: loop {
        // Descend.
        let mut dead = s.bound > s.cutoff;
        if !dead {
            while pos < nv && s.value[order[pos].0] != FREE {
                pos += 1;
            }
            if pos == nv {
                best = Some((s.bound, s.value.clone()));
                s.cutoff = cutoff_below(s.bound);
                dead = true;
            } else {
                nodes += 1;
                if nodes % TIME_CHECK_INTERVAL == 0 && time_limit.is_some_and(|t| start.elapsed() >= t) {
                    timed_out = true;
                    break 'search;
                }
                let (j, first) = order[pos];
                let mark = s.trail.len();
                frames.push(Frame { pos, mark, alternative: Some(1 - first) });
                if s.assign(j, first) && s.propagate() && s.probe() {
                    continue 'search;
                }
                s.clear_queue();
                dead = true;
            }
        }
        debug_assert!(dead);
        // Backtrack to the deepest frame with an untried value.
        loop {
            let Some(frame) = frames.last_mut() else { break 'search };
            s.undo(frame.mark);
            pos = frame.pos;
            match frame.alternative.take() {
                Some(v) => {
                    let j = order[pos].0;
                    if s.bound > s.cutoff {
                        frames.pop();
                        continue;
                    }
                    if s.assign(j, v) && s.propagate() && s.probe() {
                        continue 'search;
                    }
                    s.clear_queue();
                }
                None => {
                    frames.pop();
                }
            }
        }
    }

    let runtime_s = start.elapsed().as_secs_f64();
    let to_values = |v: &[u8]| v.iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    Ok(match (timed_out, best) {
        (false, Some((obj, v))) => SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(obj),
            values: Some(to_values(&v)),
            incumbent: None,
            runtime_s,
        },
        (false, None) => infeasible(start),
        (true, best) => SolveResult {
            status: SolveStatus::Timeout,
            objective: None,
            values: None,
            incumbent: best.map(|(obj, v)| (obj, to_values(&v))),
            runtime_s,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::{VarKind, Variable};

    fn var(name: &str, objective: f64) -> Variable {
        Variable { name: name.into(), kind: VarKind::Integer, lower: 0.0, upper: 1.0, objective }
    }

    /// Exhaustive oracle over all 2^n assignments.
    fn enumerate(model: &MilpModel) -> Option<f64> {
        let n = model.variables.len();
        (0u32..1 << n)
            .filter_map(|mask| {
                let x: Vec<f64> = (0..n).map(|j| f64::from((mask >> j) & 1)).collect();
                model.violated_rows(&x, 1e-9).is_empty().then(|| model.objective_value(&x))
            })
            .min_by(f64::total_cmp)
    }

    #[test]
    fn knapsack_like() {
        let mut m = MilpModel::new("k");
        let a = m.add_variable(var("a", -5.0)).unwrap();
        let b = m.add_variable(var("b", -4.0)).unwrap();
        let c = m.add_variable(var("c", -3.0)).unwrap();
        m.add_row("cap", vec![(a, 2.0), (b, 3.0), (c, 1.0)], RowSense::Le, 4.0);
        let res = solve(&m, None).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert_eq!(res.objective, Some(-8.0));
        assert_eq!(enumerate(&m), Some(-8.0));
    }

    #[test]
    fn infeasible_rows() {
        let mut m = MilpModel::new("inf");
        let a = m.add_variable(var("a", 1.0)).unwrap();
        let b = m.add_variable(var("b", 1.0)).unwrap();
        m.add_row("both", vec![(a, 1.0), (b, 1.0)], RowSense::Ge, 2.0);
        m.add_row("one", vec![(a, 1.0), (b, 1.0)], RowSense::Le, 1.0);
        assert_eq!(solve(&m, None).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn rejects_general_integers() {
        let mut m = MilpModel::new("g");
        m.add_variable(Variable { upper: 5.0, ..var("g", 1.0) }).unwrap();
        assert!(matches!(solve(&m, None), Err(SolverError::Unsupported(_))));
    }

    #[test]
    fn matches_enumeration_on_random_models() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for trial in 0..300 {
            let n = rng.gen_range(1..=10);
            let mut m = MilpModel::new(format!("r{trial}"));
            for j in 0..n {
                let obj = f64::from(rng.gen_range(-3..=3));
                m.add_variable(var(&format!("v{j}"), obj)).unwrap();
            }
            for k in 0..rng.gen_range(0..=6) {
                let mut terms: Vec<(usize, f64)> = Vec::new();
                for j in 0..n {
                    if rng.gen_bool(0.5) {
                        terms.push((j, f64::from(rng.gen_range(-4..=4)) * 0.5));
                    }
                }
                let sense = [RowSense::Le, RowSense::Ge, RowSense::Eq][rng.gen_range(0..3)];
                m.add_row(format!("c{k}"), terms, sense, f64::from(rng.gen_range(-2..=3)) * 0.5);
            }
            if rng.gen_bool(0.2) {
                m.variables[0].upper = 0.0;
            }
            let res = solve(&m, None).unwrap();
            let expected = enumerate(&m);
            assert_eq!(res.objective, expected, "model {trial}");
            if let Some(v) = &res.values {
                assert!(m.violated_rows(v, 1e-9).is_empty());
            }
        }
    }
}
