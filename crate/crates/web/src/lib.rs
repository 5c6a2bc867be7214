//! Browser demo: generate a factory, run the heuristic, and check a schedule.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond what `wasm-bindgen` emits.

use risnet::allocation::{outage_percentage, AllocationSchedule};
use risnet::scenario::{self, ScenarioConfig};
use risnet::{heuristic, precompute, validate, Scenario};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Knobs exposed on the page; everything else keeps its default.
#[derive(Debug, Deserialize)]
pub struct DemoParams {
    pub robots: usize,
    pub slots: usize,
    pub ris: usize,
    pub obstacles: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct HeuristicView {
    pub schedule: AllocationSchedule,
    pub feasible: bool,
    pub outage_pct: f64,
    /// `[robot, first_slot, last_slot]` of the first service failure.
    pub failure: Option<[usize; 3]>,
    /// `sinr_db[n][r]`, absent for robots in outage.
    pub sinr_db: Vec<Vec<Option<f64>>>,
    /// `serving_bs[n][i]`: the BS that feeds RIS `i` at slot `n`.
    pub serving_bs: Vec<Vec<Option<usize>>>,
}

#[derive(Debug, Serialize)]
pub struct ValidationView {
    pub feasible: bool,
    pub violations: Vec<String>,
}

pub fn generate_json(params: &str) -> Result<String, String> {
    let p: DemoParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    let config = ScenarioConfig {
        num_robots: p.robots,
        num_slots: p.slots,
        num_ris: p.ris,
        obstacle_count: p.obstacles,
        ..ScenarioConfig::default()
    };
    let sc = scenario::generate(&config, p.seed).map_err(|e| e.to_string())?;
    Ok(scenario::serialize(&sc))
}

pub fn heuristic_json(scenario_json: &str, seed: u64) -> Result<String, String> {
    let sc = load(scenario_json)?;
    let tables = precompute(&sc);
    let out = heuristic::allocate(&tables, &sc, seed);
    let sinr_db = (0..sc.num_slots())
        .map(|n| {
            (0..sc.num_robots())
                .map(|r| tables.powers.sinr(&out.schedule, r, n).ok().map(|s| 10.0 * s.log10()))
                .collect()
        })
        .collect();
    let view = HeuristicView {
        outage_pct: outage_percentage(&out.schedule),
        feasible: out.feasible,
        failure: out.failure.map(|f| [f.robot, f.first_slot, f.last_slot]),
        schedule: out.schedule,
        sinr_db,
        serving_bs: tables.coverage.serving_bs,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

pub fn validate_json(scenario_json: &str, schedule_json: &str) -> Result<String, String> {
    let sc = load(scenario_json)?;
    let schedule: AllocationSchedule = serde_json::from_str(schedule_json).map_err(|e| e.to_string())?;
    if schedule.num_robots() != sc.num_robots() || schedule.num_slots() != sc.num_slots() {
        return Err("schedule does not match the scenario size".into());
    }
    let report = validate(&sc, &precompute(&sc), &schedule);
    let view = ValidationView {
        feasible: report.is_feasible(),
        violations: report.violations.iter().map(|v| v.to_string()).collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

fn load(text: &str) -> Result<Scenario, String> {
    scenario::deserialize(text).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn generate(params: &str) -> Result<String, JsError> {
    generate_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn run_heuristic(scenario_json: &str, seed: u64) -> Result<String, JsError> {
    heuristic_json(scenario_json, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn check_schedule(scenario_json: &str, schedule_json: &str) -> Result<String, JsError> {
    validate_json(scenario_json, schedule_json).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: &str = r#"{"robots":6,"slots":12,"ris":4,"obstacles":4,"seed":9}"#;

    #[test]
    fn generate_then_heuristic_then_validate() {
        let sc = generate_json(PARAMS).unwrap();
        assert_eq!(generate_json(PARAMS).unwrap(), sc);
        let out: serde_json::Value = serde_json::from_str(&heuristic_json(&sc, 1).unwrap()).unwrap();
        assert_eq!(out["sinr_db"].as_array().unwrap().len(), 12);
        let pct = out["outage_pct"].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&pct));

        let schedule = out["schedule"].to_string();
        let check: serde_json::Value = serde_json::from_str(&validate_json(&sc, &schedule).unwrap()).unwrap();
        assert_eq!(check["feasible"], out["feasible"]);
    }

    #[test]
    fn bad_input_is_an_error() {
        assert!(generate_json("{}").is_err());
        assert!(heuristic_json("not json", 0).is_err());
        let sc = generate_json(PARAMS).unwrap();
        assert!(validate_json(&sc, r#"{"num_robots":1,"slots":[["outage"]]}"#).is_err());
    }
}
