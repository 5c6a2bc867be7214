//! Factory scenarios: configuration, seeded generation of placements and robot
//! trajectories, precomputation of every model coefficient, and the versioned
//! scenario file format.
//!
//! Generation draws from independent ChaCha streams so that sweeping one
//! parameter leaves the others untouched: placements use one stream, each
//! robot's trajectory its own, and the QoS draws a third. Robot `r` therefore
//! walks the same path whether the scenario holds 8 or 14 robots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{build_link_tables, max_concurrent, LinkPowerTables, PhysParams};
use crate::geometry::{build_conflicts, build_coverage, los_blocked, ConflictSets, CoverageMap, Obstacle, Point2D, RisMount};

pub const FORMAT_NAME: &str = "risnet-scenario";
pub const FORMAT_VERSION: u32 = 1;

const PLACEMENT_STREAM: u64 = 0;
const QOS_STREAM: u64 = 1;
const ROBOT_STREAM_BASE: u64 = 16;

/// Distance kept between obstacles and the walls.
const WALL_MARGIN_M: f64 = 1.0;
/// Robots keep this far from walls.
const ROBOT_WALL_MARGIN_M: f64 = 0.5;
/// Robots keep this far from machines.
const ROBOT_OBSTACLE_CLEARANCE_M: f64 = 0.25;
/// Robots and machines keep this far from base stations.
const BS_CLEARANCE_M: f64 = 1.0;
const RIS_SPACING_M: f64 = 1.0;
const PLACEMENT_ATTEMPTS: usize = 10_000;
const LEG_ATTEMPTS: usize = 64;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("could not place {what} after {attempts} attempts; the floor is too crowded")]
    PlacementFailed { what: String, attempts: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario file schema error: {0}")]
    Schema(String),
    #[error("unsupported scenario file version {found} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion { found: u64 },
}

/// How values are drawn from a [`ParamRange`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    /// Uniform over the integers in `[min, max]`.
    #[default]
    Discrete,
    /// Uniform over the real interval `[min, max]`.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub draw: Draw,
}

impl ParamRange {
    pub fn discrete(min: f64, max: f64) -> Self {
        Self { min, max, draw: Draw::Discrete }
    }

    /// The integer pair `[mean - 0.5, mean + 0.5]`, e.g. `14.5 -> {14, 15}`.
    pub fn around_mean(mean: f64) -> Self {
        Self::discrete(mean - 0.5, mean + 0.5)
    }

    pub fn mean(&self) -> f64 {
        match self.draw {
            Draw::Continuous => 0.5 * (self.min + self.max),
            Draw::Discrete => 0.5 * (self.min.ceil() + self.max.floor()),
        }
    }

    fn integer_bounds(&self) -> Option<(i64, i64)> {
        let lo = self.min.ceil() as i64;
        let hi = self.max.floor() as i64;
        (lo <= hi).then_some((lo, hi))
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min <= self.max
            && (self.draw == Draw::Continuous || self.integer_bounds().is_some())
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.draw {
            Draw::Continuous if self.min < self.max => rng.gen_range(self.min..=self.max),
            Draw::Continuous => self.min,
            Draw::Discrete => {
                let (lo, hi) = self.integer_bounds().expect("validated range");
                rng.gen_range(lo..=hi) as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosParams {
    /// SINR threshold `Ψ_r`, linear unless `sinr_threshold_in_db`.
    pub sinr_threshold: ParamRange,
    #[serde(default)]
    pub sinr_threshold_in_db: bool,
    /// Consecutive-outage limit `K_r`, in slots; always drawn as an integer.
    pub outage_limit: ParamRange,
    /// RIS reconfiguration window `D`, in slots.
    pub reconfig_delay: u32,
    /// Concurrent robots per RIS `U`; derived from the element count when absent.
    #[serde(default)]
    pub concurrent_override: Option<u32>,
}

impl Default for QosParams {
    fn default() -> Self {
        Self {
            sinr_threshold: ParamRange::discrete(9.0, 10.0),
            sinr_threshold_in_db: false,
            outage_limit: ParamRange::discrete(14.0, 15.0),
            reconfig_delay: 2,
            concurrent_override: Some(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub floor_width_m: f64,
    pub floor_height_m: f64,
    pub num_bs: usize,
    pub num_ris: usize,
    pub num_robots: usize,
    pub num_slots: usize,
    /// Carried for reference only; no quantity depends on it.
    pub slot_duration_s: f64,
    pub robot_step_m: f64,
    /// Slots a robot keeps its heading before drawing a new one.
    pub turn_interval_slots: usize,
    pub obstacle_count: usize,
    pub obstacle_side_min_m: f64,
    pub obstacle_side_max_m: f64,
    pub ris_fov_half_angle_deg: f64,
    /// Angular separation at or below which two robots conflict on a RIS;
    /// defaults to the beamwidth.
    #[serde(default)]
    pub conflict_separation_deg: Option<f64>,
    /// Fixed BS positions; quadrant centres when absent.
    #[serde(default)]
    pub bs_positions: Option<Vec<Point2D>>,
    pub phys: PhysParams,
    pub qos: QosParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            floor_width_m: 40.0,
            floor_height_m: 40.0,
            num_bs: 2,
            num_ris: 8,
            num_robots: 8,
            num_slots: 50,
            slot_duration_s: 1.0,
            robot_step_m: 1.0,
            turn_interval_slots: 5,
            obstacle_count: 6,
            obstacle_side_min_m: 3.0,
            obstacle_side_max_m: 6.0,
            ris_fov_half_angle_deg: 60.0,
            conflict_separation_deg: None,
            bs_positions: None,
            phys: PhysParams::default(),
            qos: QosParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidConfig(msg));
        if !(self.floor_width_m > 2.0 * WALL_MARGIN_M && self.floor_height_m > 2.0 * WALL_MARGIN_M) {
            return bad(format!("floor {}x{} m is too small", self.floor_width_m, self.floor_height_m));
        }
        if self.num_slots == 0 {
            return bad("num_slots must be at least 1".into());
        }
        if self.turn_interval_slots == 0 {
            return bad("turn_interval_slots must be at least 1".into());
        }
        if !(self.robot_step_m >= 0.0 && self.robot_step_m.is_finite()) {
            return bad(format!("robot_step_m must be non-negative, got {}", self.robot_step_m));
        }
        if !(self.obstacle_side_min_m > 0.0 && self.obstacle_side_min_m <= self.obstacle_side_max_m) {
            return bad("obstacle side range must satisfy 0 < min <= max".into());
        }
        if !(self.ris_fov_half_angle_deg > 0.0 && self.ris_fov_half_angle_deg <= 90.0) {
            return bad("ris_fov_half_angle_deg must lie in (0, 90]".into());
        }
        if let Some(sep) = self.conflict_separation_deg {
            if !(sep >= 0.0 && sep <= 180.0) {
                return bad("conflict_separation_deg must lie in [0, 180]".into());
            }
        }
        if let Some(bs) = &self.bs_positions {
            if bs.len() != self.num_bs {
                return bad(format!("{} BS positions given for num_bs = {}", bs.len(), self.num_bs));
            }
            if bs.iter().any(|p| !self.strictly_inside(*p)) {
                return bad("BS positions must lie strictly inside the floor".into());
            }
        }
        self.phys.validate().map_err(ScenarioError::InvalidConfig)?;
        if !self.qos.sinr_threshold.is_valid() {
            return bad("sinr_threshold range is empty".into());
        }
        let k = &self.qos.outage_limit;
        if !(k.is_valid() && k.min.ceil() >= 1.0) {
            return bad("outage_limit range must contain an integer >= 1".into());
        }
        if self.qos.reconfig_delay == 0 {
            return bad("reconfig_delay must be at least 1".into());
        }
        if let Some(u) = self.qos.concurrent_override {
            let cap = max_concurrent(self.phys.ris_elements);
            if u == 0 || u > cap {
                return bad(format!("concurrent_override {u} must lie in 1..={cap} for {} elements", self.phys.ris_elements));
            }
        }
        Ok(())
    }

    pub fn strictly_inside(&self, p: Point2D) -> bool {
        p.x > 0.0 && p.x < self.floor_width_m && p.y > 0.0 && p.y < self.floor_height_m
    }

    /// Effective `U`.
    pub fn concurrent(&self) -> u32 {
        self.qos.concurrent_override.unwrap_or_else(|| max_concurrent(self.phys.ris_elements))
    }

    pub fn conflict_separation_rad(&self) -> f64 {
        self.conflict_separation_deg.unwrap_or(self.phys.beamwidth_deg).to_radians()
    }

    fn default_bs_positions(&self) -> Vec<Point2D> {
        let (w, h) = (self.floor_width_m, self.floor_height_m);
        let anchors = [(0.25, 0.25), (0.75, 0.75), (0.75, 0.25), (0.25, 0.75), (0.5, 0.5)];
        (0..self.num_bs)
            .map(|b| {
                let (fx, fy) = anchors[b % anchors.len()];
                // Beyond the anchor list, shift along the diagonal.
                let shift = (b / anchors.len()) as f64 * 0.05;
                Point2D::new(w * (fx + shift).min(0.95), h * (fy + shift).min(0.95))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Robot {
    /// Position at every slot, in meters.
    pub trajectory: Vec<Point2D>,
    /// Linear SINR threshold `Ψ_r`.
    pub sinr_threshold: f64,
    /// `K_r`: this many consecutive outage slots is a service failure.
    pub outage_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub config: ScenarioConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    pub base_stations: Vec<Point2D>,
    pub ris: Vec<RisMount>,
    pub obstacles: Vec<Obstacle>,
    pub robots: Vec<Robot>,
}

impl Scenario {
    pub fn num_slots(&self) -> usize {
        self.config.num_slots
    }

    pub fn num_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn outage_limits(&self) -> Vec<u32> {
        self.robots.iter().map(|r| r.outage_limit).collect()
    }

    /// The same factory with every RIS removed.
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        out.ris.clear();
        out.config.num_ris = 0;
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.config.validate()?;
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        let c = &self.config;
        if self.base_stations.len() != c.num_bs {
            return bad(format!("{} base stations, config says {}", self.base_stations.len(), c.num_bs));
        }
        if self.ris.len() != c.num_ris {
            return bad(format!("{} RIS mounts, config says {}", self.ris.len(), c.num_ris));
        }
        if self.robots.len() != c.num_robots {
            return bad(format!("{} robots, config says {}", self.robots.len(), c.num_robots));
        }
        for (b, p) in self.base_stations.iter().enumerate() {
            if !c.strictly_inside(*p) {
                return bad(format!("BS {b} at ({}, {}) is not inside the floor", p.x, p.y));
            }
        }
        for (i, ris) in self.ris.iter().enumerate() {
            let p = ris.position;
            if !ris.is_valid() || p.x < 0.0 || p.x > c.floor_width_m || p.y < 0.0 || p.y > c.floor_height_m {
                return bad(format!("RIS {i} has an invalid mount"));
            }
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !o.is_valid() || !c.strictly_inside(o.min) || !c.strictly_inside(o.max) {
                return bad(format!("obstacle {k} is malformed or not strictly inside the floor"));
            }
        }
        for (r, robot) in self.robots.iter().enumerate() {
            if robot.trajectory.len() != c.num_slots {
                return bad(format!("robot {r} has {} positions for {} slots", robot.trajectory.len(), c.num_slots));
            }
            if let Some(n) = robot.trajectory.iter().position(|p| !p.is_finite() || !c.strictly_inside(*p)) {
                return bad(format!("robot {r} leaves the floor at slot {n}"));
            }
            if !(robot.sinr_threshold.is_finite() && robot.sinr_threshold > 0.0) {
                return bad(format!("robot {r} has a non-positive SINR threshold"));
            }
            if robot.outage_limit == 0 {
                return bad(format!("robot {r} has K_r = 0"));
            }
        }
        Ok(())
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw a scenario. Pure in `(config, seed)`.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    let mut rng = stream(seed, PLACEMENT_STREAM);

    let base_stations = config.bs_positions.clone().unwrap_or_else(|| config.default_bs_positions());
    let obstacles = place_obstacles(config, &base_stations, &mut rng)?;
    let ris = place_ris(config, &base_stations, &obstacles, &mut rng)?;

    let mut qos_rng = stream(seed, QOS_STREAM);
    let mut robots = Vec::with_capacity(config.num_robots);
    for r in 0..config.num_robots {
        let mut robot_rng = stream(seed, ROBOT_STREAM_BASE + r as u64);
        let trajectory = walk(config, &base_stations, &obstacles, &mut robot_rng)
            .ok_or_else(|| ScenarioError::PlacementFailed { what: format!("robot {r}"), attempts: PLACEMENT_ATTEMPTS })?;
        let mut sinr_threshold = config.qos.sinr_threshold.sample(&mut qos_rng);
        if config.qos.sinr_threshold_in_db {
            sinr_threshold = 10f64.powf(sinr_threshold / 10.0);
        }
        let outage_limit = config.qos.outage_limit.sample(&mut qos_rng) as u32;
        robots.push(Robot { trajectory, sinr_threshold, outage_limit });
    }

    Ok(Scenario { config: config.clone(), seed: Some(seed), base_stations, ris, obstacles, robots })
}

fn place_obstacles(config: &ScenarioConfig, bs: &[Point2D], rng: &mut ChaCha8Rng) -> Result<Vec<Obstacle>, ScenarioError> {
    let (w, h) = (config.floor_width_m, config.floor_height_m);
    let mut obstacles = Vec::with_capacity(config.obstacle_count);
    for k in 0..config.obstacle_count {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let sw = rng.gen_range(config.obstacle_side_min_m..=config.obstacle_side_max_m);
            let sh = rng.gen_range(config.obstacle_side_min_m..=config.obstacle_side_max_m);
            if sw > w - 2.0 * WALL_MARGIN_M || sh > h - 2.0 * WALL_MARGIN_M {
                continue;
            }
            let x = rng.gen_range(WALL_MARGIN_M..=w - WALL_MARGIN_M - sw);
            let y = rng.gen_range(WALL_MARGIN_M..=h - WALL_MARGIN_M - sh);
            let o = Obstacle::new(Point2D::new(x, y), Point2D::new(x + sw, y + sh));
            if bs.iter().any(|&p| o.inflated(BS_CLEARANCE_M).contains(p)) {
                continue;
            }
            obstacles.push(o);
            placed = true;
            break;
        }
        if !placed {
            return Err(ScenarioError::PlacementFailed { what: format!("obstacle {k}"), attempts: PLACEMENT_ATTEMPTS });
        }
    }
    Ok(obstacles)
}

fn place_ris(
    config: &ScenarioConfig,
    bs: &[Point2D],
    obstacles: &[Obstacle],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<RisMount>, ScenarioError> {
    let (w, h) = (config.floor_width_m, config.floor_height_m);
    let fov = config.ris_fov_half_angle_deg.to_radians();
    let mut mounts: Vec<RisMount> = Vec::with_capacity(config.num_ris);
    for i in 0..config.num_ris {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let (position, normal) = match rng.gen_range(0..4) {
                0 => (Point2D::new(rng.gen_range(1.0..=w - 1.0), 0.0), Point2D::new(0.0, 1.0)),
                1 => (Point2D::new(w, rng.gen_range(1.0..=h - 1.0)), Point2D::new(-1.0, 0.0)),
                2 => (Point2D::new(rng.gen_range(1.0..=w - 1.0), h), Point2D::new(0.0, -1.0)),
                _ => (Point2D::new(0.0, rng.gen_range(1.0..=h - 1.0)), Point2D::new(1.0, 0.0)),
            };
            let ris = RisMount { position, normal, fov_half_angle: fov };
            let fed = bs.iter().any(|&b| ris.sees(b) && !los_blocked(b, position, obstacles));
            let spaced = mounts.iter().all(|m| m.position.distance(position) >= RIS_SPACING_M);
            if fed && spaced {
                mounts.push(ris);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ScenarioError::PlacementFailed { what: format!("RIS {i}"), attempts: PLACEMENT_ATTEMPTS });
        }
    }
    Ok(mounts)
}

fn robot_position_ok(config: &ScenarioConfig, bs: &[Point2D], obstacles: &[Obstacle], p: Point2D) -> bool {
    let m = ROBOT_WALL_MARGIN_M;
    p.x >= m
        && p.x <= config.floor_width_m - m
        && p.y >= m
        && p.y <= config.floor_height_m - m
        && !obstacles.iter().any(|o| o.inflated(ROBOT_OBSTACLE_CLEARANCE_M).contains(p))
        && bs.iter().all(|b| b.distance(p) >= BS_CLEARANCE_M)
}

/// Random start, then legs of `turn_interval_slots` straight steps. A leg's
/// heading is redrawn until the whole leg stays clear of walls and machines;
/// a robot with no clear heading waits in place for that leg.
fn walk(config: &ScenarioConfig, bs: &[Point2D], obstacles: &[Obstacle], rng: &mut ChaCha8Rng) -> Option<Vec<Point2D>> {
    let m = ROBOT_WALL_MARGIN_M;
    let start = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
        let p = Point2D::new(
            rng.gen_range(m..=config.floor_width_m - m),
            rng.gen_range(m..=config.floor_height_m - m),
        );
        robot_position_ok(config, bs, obstacles, p).then_some(p)
    })?;

    let inflated: Vec<Obstacle> = obstacles.iter().map(|o| o.inflated(ROBOT_OBSTACLE_CLEARANCE_M)).collect();
    let leg = config.turn_interval_slots;
    let mut trajectory = Vec::with_capacity(config.num_slots);
    trajectory.push(start);
    while trajectory.len() < config.num_slots {
        let origin = *trajectory.last().unwrap();
        let steps = leg.min(config.num_slots - trajectory.len());
        let heading = (0..LEG_ATTEMPTS).find_map(|_| {
            let dir = Point2D::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
            let clear = (1..=steps).all(|k| {
                let p = origin + dir * (config.robot_step_m * k as f64);
                robot_position_ok(config, bs, obstacles, p)
            }) && !los_blocked(origin, origin + dir * (config.robot_step_m * steps as f64), &inflated);
            clear.then_some(dir)
        });
        let dir = heading.unwrap_or(Point2D::new(0.0, 0.0));
        for k in 1..=steps {
            trajectory.push(origin + dir * (config.robot_step_m * k as f64));
        }
    }
    Some(trajectory)
}

/// Every coefficient the allocation problem needs, derived from a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedTables {
    pub coverage: CoverageMap,
    pub conflicts: ConflictSets,
    pub powers: LinkPowerTables,
    /// Effective `U`.
    pub max_concurrent: u32,
    pub noise_power_w: f64,
}

impl DerivedTables {
    pub fn num_slots(&self) -> usize {
        self.coverage.num_slots()
    }
}

pub fn precompute(scenario: &Scenario) -> DerivedTables {
    let coverage = build_coverage(scenario);
    let conflicts = build_conflicts(scenario, &coverage, scenario.config.conflict_separation_rad());
    let powers = build_link_tables(scenario, &coverage);
    DerivedTables {
        coverage,
        conflicts,
        noise_power_w: powers.noise_power_w,
        powers,
        max_concurrent: scenario.config.concurrent(),
    }
}

#[derive(Serialize)]
struct FileOut<'a> {
    format: &'static str,
    version: u32,
    #[serde(flatten)]
    scenario: &'a Scenario,
}

/// Pretty-printed JSON with a format tag and version.
pub fn serialize(scenario: &Scenario) -> String {
    let file = FileOut { format: FORMAT_NAME, version: FORMAT_VERSION, scenario };
    let mut text = serde_json::to_string_pretty(&file).expect("scenario serializes");
    text.push('\n');
    text
}

pub fn deserialize(text: &str) -> Result<Scenario, ScenarioError> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ScenarioError::Schema(format!("not valid JSON: {e}")))?;
    let obj = value.as_object_mut().ok_or_else(|| ScenarioError::Schema("top level must be an object".into()))?;
    match obj.remove("format") {
        Some(serde_json::Value::String(s)) if s == FORMAT_NAME => {}
        Some(other) => return Err(ScenarioError::Schema(format!("format must be \"{FORMAT_NAME}\", got {other}"))),
        None => return Err(ScenarioError::Schema("missing \"format\" field".into())),
    }
    let version = obj
        .remove("version")
        .ok_or_else(|| ScenarioError::Schema("missing \"version\" field".into()))?
        .as_u64()
        .ok_or_else(|| ScenarioError::Schema("\"version\" must be a non-negative integer".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(ScenarioError::UnsupportedVersion { found: version });
    }
    let scenario: Scenario = serde_json::from_value(value).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}
