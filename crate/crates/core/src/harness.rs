//! Seeded trials, parameter sweeps and CSV output.
//!
//! A sweep varies one axis of a base [`ScenarioConfig`] and runs the same
//! `trials` seeds at every axis point, so methods and axis points are compared
//! on paired scenarios. Outage is averaged over feasible trials only; a solver
//! timeout counts as infeasible but is also tallied on its own.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{outage_percentage, validate, AllocationSchedule, ConstraintFamily};
use crate::heuristic;
use crate::milp::{self, Backend, ExternalSolver, ModelFormat, SolveStatus};
use crate::scenario::{generate, precompute, DerivedTables, ParamRange, Scenario, ScenarioConfig, ScenarioError};

const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{method} produced a schedule violating {families} (seed {seed})")]
    Soundness { method: Method, seed: u64, families: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ilp")]
    Ilp,
    #[serde(rename = "heuristic")]
    Heuristic,
    #[serde(rename = "no-ris")]
    NoRis,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ilp, Method::Heuristic, Method::NoRis];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ilp => "ilp",
            Method::Heuristic => "heuristic",
            Method::NoRis => "no-ris",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}; expected ilp, heuristic or no-ris"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Number of robots `|R|`.
    Robots,
    /// Reconfiguration window `D`.
    ReconfigDelay,
    /// Mean of the `K_r` range; the range spans the mean ± 0.5.
    OutageLimitMean,
    /// Mean of the `Ψ_r` range; the range spans the mean ± 0.5.
    SinrThresholdMean,
    /// Concurrent robots per RIS `U`.
    Concurrent,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Robots => "robots",
            Axis::ReconfigDelay => "reconfig_delay",
            Axis::OutageLimitMean => "outage_limit_mean",
            Axis::SinrThresholdMean => "sinr_threshold_mean",
            Axis::Concurrent => "concurrent",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Axis::Robots | Axis::ReconfigDelay | Axis::Concurrent)
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = base.clone();
        match self {
            Axis::Robots => c.num_robots = value as usize,
            Axis::ReconfigDelay => c.qos.reconfig_delay = value as u32,
            Axis::OutageLimitMean => c.qos.outage_limit = ParamRange::around_mean(value),
            Axis::SinrThresholdMean => c.qos.sinr_threshold = ParamRange::around_mean(value),
            Axis::Concurrent => c.qos.concurrent_override = Some(value as u32),
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Bundled,
    #[default]
    Highs,
    External,
}

/// A sweep as read from its TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Per-solve time limit in seconds.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub backend: BackendKind,
    /// Command template for the external backend.
    #[serde(default)]
    pub solver_command: Option<String>,
    #[serde(default)]
    pub solver_format: Option<String>,
    pub base: ScenarioConfig,
}

fn default_trials() -> usize {
    100
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_timeout() -> f64 {
    milp::DEFAULT_TIME_LIMIT.as_secs_f64()
}

impl SweepSpec {
    /// Parse a TOML spec. `base` may list only the fields that differ from
    /// the default configuration, nested tables included.
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let mut raw: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Spec(e.to_string()))?;
        let base = raw.remove("base").unwrap_or_else(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(overrides) = base else {
            return Err(HarnessError::Spec("`base` must be a table".into()));
        };
        raw.insert("base".into(), toml::Value::Table(merged_config(overrides)));
        let spec: SweepSpec = raw.try_into().map_err(|e: toml::de::Error| HarnessError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if self.values.is_empty() {
            return bad("no axis values".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return bad(format!("timeout_s must be positive, got {}", self.timeout_s));
        }
        for &v in &self.values {
            if self.axis.is_integer() && (v.fract() != 0.0 || v < 0.0) {
                return bad(format!("{} takes non-negative integers, got {v}", self.axis.name()));
            }
            self.axis.apply(&self.base, v).validate()?;
        }
        if self.backend == BackendKind::External && self.solver_command.is_none() {
            return bad("the external backend needs solver_command".into());
        }
        Ok(())
    }

    pub fn run_options(&self) -> Result<RunOptions, HarnessError> {
        let backend = match self.backend {
            BackendKind::Bundled => Backend::Bundled,
            BackendKind::Highs => Backend::Highs,
            BackendKind::External => {
                let format = match &self.solver_format {
                    Some(f) => f.parse::<ModelFormat>().map_err(HarnessError::Spec)?,
                    None => ModelFormat::Lp,
                };
                let command = self.solver_command.clone().unwrap_or_default();
                Backend::External(ExternalSolver::new(command, format))
            }
        };
        Ok(RunOptions { backend, time_limit: Some(Duration::from_secs_f64(self.timeout_s)) })
    }
}

/// Read a TOML scenario configuration that lists only the fields that differ
/// from the defaults.
pub fn config_from_toml(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let overrides: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Spec(e.to_string()))?;
    let config: ScenarioConfig = toml::Value::Table(merged_config(overrides))
        .try_into()
        .map_err(|e: toml::de::Error| HarnessError::Spec(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn config_to_toml(config: &ScenarioConfig) -> String {
    toml::to_string_pretty(config).expect("config serializes")
}

fn merged_config(overrides: toml::Table) -> toml::Table {
    let mut merged = toml::Table::try_from(ScenarioConfig::default()).expect("config serializes");
    merge(&mut merged, overrides);
    merged
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(dst)), toml::Value::Table(src)) => merge(dst, src),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub backend: Backend,
    pub time_limit: Option<Duration>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { backend: Backend::best_available(), time_limit: Some(milp::DEFAULT_TIME_LIMIT) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodStatus {
    Feasible,
    Infeasible,
    Timeout,
    /// The method failed to run; the message is in `error`.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub status: MethodStatus,
    /// Percentage of outage slots; present for feasible outcomes.
    pub outage_pct: Option<f64>,
    pub runtime_s: f64,
    #[serde(default)]
    pub error: Option<String>,
}

impl MethodOutcome {
    pub fn feasible(&self) -> bool {
        self.status == MethodStatus::Feasible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub outcomes: Vec<MethodOutcome>,
}

impl TrialResult {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Generate the scenario for `seed` and run every method on it.
///
/// A method that fails to run is recorded with [`MethodStatus::Error`]. A
/// schedule that violates any constraint it claims to satisfy aborts the
/// trial instead.
pub fn run_trial(
    config: &ScenarioConfig,
    seed: u64,
    methods: &[Method],
    options: &RunOptions,
) -> Result<TrialResult, HarnessError> {
    let scenario = generate(config, seed)?;
    let tables = precompute(&scenario);
    let bare = methods.contains(&Method::NoRis).then(|| {
        let s = scenario.without_ris();
        let t = precompute(&s);
        (s, t)
    });
    let mut outcomes = Vec::with_capacity(methods.len());
    for &method in methods {
        let (sc, tb) = match (method, &bare) {
            (Method::NoRis, Some((s, t))) => (s, t),
            _ => (&scenario, &tables),
        };
        let start = Instant::now();
        let run = match method {
            Method::Ilp | Method::NoRis => run_ilp(sc, tb, options),
            Method::Heuristic => {
                let out = heuristic::allocate(tb, sc, seed);
                Ok(Ok((out.feasible, out.schedule)))
            }
        };
        let runtime_s = start.elapsed().as_secs_f64();
        let outcome = match run {
            Err(message) => MethodOutcome {
                method,
                status: MethodStatus::Error,
                outage_pct: None,
                runtime_s,
                error: Some(message),
            },
            Ok(Err(status)) => MethodOutcome { method, status, outage_pct: None, runtime_s, error: None },
            Ok(Ok((feasible, schedule))) => {
                check_sound(method, seed, feasible, &validate(sc, tb, &schedule))?;
                MethodOutcome {
                    method,
                    status: if feasible { MethodStatus::Feasible } else { MethodStatus::Infeasible },
                    outage_pct: feasible.then(|| outage_percentage(&schedule)),
                    runtime_s,
                    error: None,
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok(TrialResult { seed, outcomes })
}

type MethodRun = Result<Result<(bool, AllocationSchedule), MethodStatus>, String>;

fn run_ilp(scenario: &Scenario, tables: &DerivedTables, options: &RunOptions) -> MethodRun {
    let model = milp::build_model(tables, scenario).map_err(|e| e.to_string())?;
    let result = milp::solve(&model, &options.backend, options.time_limit).map_err(|e| e.to_string())?;
    match result.status {
        SolveStatus::Optimal => {
            let schedule = milp::extract_schedule(&model, &result, scenario.num_robots(), scenario.num_slots())
                .map_err(|e| e.to_string())?;
            Ok(Ok((true, schedule)))
        }
        SolveStatus::Infeasible => Ok(Err(MethodStatus::Infeasible)),
        SolveStatus::Timeout => Ok(Err(MethodStatus::Timeout)),
    }
}

/// A feasible schedule must pass every check; an infeasible heuristic
/// schedule may fail only the outage-window family.
fn check_sound(
    method: Method,
    seed: u64,
    feasible: bool,
    report: &crate::allocation::ValidationReport,
) -> Result<(), HarnessError> {
    let bad: Vec<ConstraintFamily> =
        report.families().into_iter().filter(|f| feasible || *f != ConstraintFamily::OutageWindow).collect();
    if bad.is_empty() {
        return Ok(());
    }
    let families = bad.iter().map(|f| f.label()).collect::<Vec<_>>().join(", ");
    Err(HarnessError::Soundness { method, seed, families })
}

/// One trial of a sweep; `result` holds the error text when the whole trial failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub axis_value: f64,
    pub seed: u64,
    pub result: Result<TrialResult, String>,
    /// The failure was a soundness error, not a scenario or setup problem.
    pub unsound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_name: &'static str,
    pub axis_value: f64,
    pub method: Method,
    pub trials: usize,
    pub feasible: usize,
    pub feasible_pct: f64,
    /// Over feasible trials; absent when there were none.
    pub mean_outage_pct: Option<f64>,
    pub ci95_outage: Option<f64>,
    pub mean_runtime_s: f64,
    pub timeouts: usize,
    pub errors: usize,
    pub notes: String,
}

impl SweepRow {
    /// Normal-approximation 95% half-width of `feasible_pct`.
    pub fn ci95_feasible(&self) -> f64 {
        let p = self.feasible as f64 / self.trials as f64;
        100.0 * Z_95 * (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
    /// Sorted by axis point order, then seed.
    pub records: Vec<TrialRecord>,
}

impl SweepTable {
    pub fn row(&self, axis_value: f64, method: Method) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.axis_value == axis_value && r.method == method)
    }

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                r.axis_name.to_string(),
                r.axis_value.to_string(),
                r.method.name().to_string(),
                r.trials.to_string(),
                r.feasible_pct.to_string(),
                opt(r.mean_outage_pct),
                opt(r.ci95_outage),
                r.mean_runtime_s.to_string(),
                r.timeouts.to_string(),
                r.notes.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Spec(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "axis_name",
    "axis_value",
    "method",
    "trials",
    "feasible_pct",
    "mean_outage_pct",
    "ci95_outage",
    "mean_runtime_s",
    "timeouts",
    "notes",
];

/// Sample mean and 95% half-width; the half-width is zero for one sample.
pub fn mean_ci95(samples: &[f64]) -> Option<(f64, f64)> {
    let n = samples.len();
    if n == 0 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, Z_95 * (var / n as f64).sqrt()))
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, HarnessError> {
    run_sweep_with(spec, &spec.run_options()?, None)
}

/// Run every (axis value, seed) trial, in parallel when the `parallel`
/// feature is on. `progress` is called with (done, total) after each trial.
pub fn run_sweep_with(
    spec: &SweepSpec,
    options: &RunOptions,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<SweepTable, HarnessError> {
    spec.validate()?;
    let jobs: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|p| (0..spec.trials as u64).map(move |t| (p, spec.seed.wrapping_add(t))))
        .collect();
    let total = jobs.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let run = |&(p, seed): &(usize, u64)| {
        let value = spec.values[p];
        let config = spec.axis.apply(&spec.base, value);
        let result = run_trial(&config, seed, &spec.methods, options);
        if let Some(cb) = progress {
            cb(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1, total);
        }
        let unsound = matches!(result, Err(HarnessError::Soundness { .. }));
        (p, TrialRecord { axis_value: value, seed, result: result.map_err(|e| e.to_string()), unsound })
    };
    #[cfg(feature = "parallel")]
    let mut results: Vec<(usize, TrialRecord)> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut results: Vec<(usize, TrialRecord)> = jobs.iter().map(run).collect();
    results.sort_by_key(|(p, r)| (*p, r.seed));

    let mut rows = Vec::new();
    for (p, &value) in spec.values.iter().enumerate() {
        let point: Vec<&TrialRecord> = results.iter().filter(|(q, _)| *q == p).map(|(_, r)| r).collect();
        for &method in &spec.methods {
            rows.push(aggregate(spec.axis, value, method, &point));
        }
    }
    Ok(SweepTable { axis: spec.axis, rows, records: results.into_iter().map(|(_, r)| r).collect() })
}

fn aggregate(axis: Axis, value: f64, method: Method, point: &[&TrialRecord]) -> SweepRow {
    let trials = point.len();
    let mut outages = Vec::new();
    let mut runtimes = Vec::new();
    let (mut timeouts, mut errors) = (0, 0);
    for rec in point {
        match rec.result.as_ref().ok().and_then(|t| t.outcome(method)) {
            Some(o) => {
                runtimes.push(o.runtime_s);
                match o.status {
                    MethodStatus::Feasible => outages.push(o.outage_pct.expect("feasible outcome has outage")),
                    MethodStatus::Timeout => timeouts += 1,
                    MethodStatus::Error => errors += 1,
                    MethodStatus::Infeasible => {}
                }
            }
            None => errors += 1,
        }
    }
    let stats = mean_ci95(&outages);
    let mut notes = Vec::new();
    if outages.len() == 1 {
        notes.push("single feasible trial, ci is 0".to_string());
    }
    if errors > 0 {
        notes.push(format!("{errors} errors"));
    }
    SweepRow {
        axis_name: axis.name(),
        axis_value: value,
        method,
        trials,
        feasible: outages.len(),
        feasible_pct: 100.0 * outages.len() as f64 / trials as f64,
        mean_outage_pct: stats.map(|s| s.0),
        ci95_outage: stats.map(|s| s.1),
        mean_runtime_s: if runtimes.is_empty() { 0.0 } else { runtimes.iter().sum::<f64>() / runtimes.len() as f64 },
        timeouts,
        errors,
        notes: notes.join("; "),
    }
}
