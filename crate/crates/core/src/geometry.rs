//! Planar factory geometry: line-of-sight occlusion, conical beams, RIS
//! fields of view, coverage maps and same-arrival-angle conflict pairs.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

/// A point on the factory floor, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (other - self).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }
}

impl Add for Point2D {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2D {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2D {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Unsigned angle between two non-zero vectors, in `[0, π]`.
pub fn angle_between(a: Point2D, b: Point2D) -> f64 {
    a.cross(b).abs().atan2(a.dot(b))
}

/// Axis-aligned rectangular obstacle (a machine on the floor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min: Point2D,
    pub max: Point2D,
}

impl Obstacle {
    pub fn new(min: Point2D, max: Point2D) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x <= self.max.x && self.min.y <= self.max.y
    }

    /// Closed containment test.
    pub fn contains(&self, p: Point2D) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// The rectangle grown by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            min: Point2D::new(self.min.x - margin, self.min.y - margin),
            max: Point2D::new(self.max.x + margin, self.max.y + margin),
        }
    }

    /// Closed segment/rectangle intersection (Liang-Barsky clipping).
    pub fn intersects_segment(&self, p: Point2D, q: Point2D) -> bool {
        let d = q - p;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (start, delta, lo, hi) in [(p.x, d.x, self.min.x, self.max.x), (p.y, d.y, self.min.y, self.max.y)] {
            if delta == 0.0 {
                if start < lo || start > hi {
                    return false;
                }
                continue;
            }
            let a = (lo - start) / delta;
            let b = (hi - start) / delta;
            let (enter, exit) = if a <= b { (a, b) } else { (b, a) };
            t0 = t0.max(enter);
            t1 = t1.min(exit);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// Whether the segment `p`–`q` touches any obstacle. Grazing a corner or an
/// edge counts as blocked. The result is exactly symmetric in `p` and `q`.
pub fn los_blocked(p: Point2D, q: Point2D, obstacles: &[Obstacle]) -> bool {
    // Canonical endpoint order makes the floating-point path identical for (p, q) and (q, p).
    let (a, b) = if (p.x, p.y) <= (q.x, q.y) { (p, q) } else { (q, p) };
    obstacles.iter().any(|o| o.intersects_segment(a, b))
}

/// Diameter of a conical beam of full width `theta` at distance `d`.
pub fn footprint_diameter(theta: f64, d: f64) -> f64 {
    2.0 * (theta / 2.0).tan() * d
}

/// Whether `probe` sits inside the beam that `origin` points at `target`:
/// within `theta / 2` of the beam axis, in front of the origin, and with an
/// unobstructed path from the origin.
pub fn in_beam_cone(origin: Point2D, target: Point2D, probe: Point2D, theta: f64, obstacles: &[Obstacle]) -> bool {
    let axis = target - origin;
    let ray = probe - origin;
    if ray.norm() == 0.0 || axis.dot(ray) <= 0.0 {
        return false;
    }
    angle_between(axis, ray) <= theta / 2.0 && !los_blocked(origin, probe, obstacles)
}

/// A RIS panel mounted on a wall, reflecting into a sector around its normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisMount {
    pub position: Point2D,
    /// Inward-facing unit normal.
    pub normal: Point2D,
    /// Half-angle of the reflection sector, radians.
    pub fov_half_angle: f64,
}

impl RisMount {
    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && (self.normal.norm() - 1.0).abs() < 1e-9
            && self.fov_half_angle > 0.0
            && self.fov_half_angle <= std::f64::consts::FRAC_PI_2
    }

    /// Whether `p` lies strictly in front of the panel and inside its sector.
    pub fn sees(&self, p: Point2D) -> bool {
        let v = p - self.position;
        v.dot(self.normal) > 0.0 && angle_between(self.normal, v) <= self.fov_half_angle
    }
}

/// Per-slot line-of-sight coverage. Mounts are static but robots move, so
/// every table is indexed by slot first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    /// `bs_robot[n][b][r]`
    pub bs_robot: Vec<Vec<Vec<bool>>>,
    /// `ris_robot[n][i][r]`: LoS and inside the RIS sector.
    pub ris_robot: Vec<Vec<Vec<bool>>>,
    /// `bs_ris[n][b][i]`
    pub bs_ris: Vec<Vec<Vec<bool>>>,
    /// `serving_bs[n][i]`: nearest BS with LoS to RIS `i`, if any.
    pub serving_bs: Vec<Vec<Option<usize>>>,
}

impl CoverageMap {
    pub fn num_slots(&self) -> usize {
        self.bs_robot.len()
    }

    pub fn bs_covers(&self, b: usize, r: usize, n: usize) -> bool {
        self.bs_robot[n][b][r]
    }

    pub fn ris_covers(&self, i: usize, r: usize, n: usize) -> bool {
        self.ris_robot[n][i][r]
    }

    /// A RIS link is usable when the robot is covered and some BS feeds the RIS.
    pub fn ris_link_available(&self, i: usize, r: usize, n: usize) -> bool {
        self.ris_robot[n][i][r] && self.serving_bs[n][i].is_some()
    }
}

/// Compute the coverage map of every slot.
pub fn build_coverage(scenario: &Scenario) -> CoverageMap {
    let obstacles = &scenario.obstacles;
    let num_slots = scenario.num_slots();
    let mut map = CoverageMap {
        bs_robot: Vec::with_capacity(num_slots),
        ris_robot: Vec::with_capacity(num_slots),
        bs_ris: Vec::with_capacity(num_slots),
        serving_bs: Vec::with_capacity(num_slots),
    };

    for n in 0..num_slots {
        let robots: Vec<Point2D> = scenario.robots.iter().map(|r| r.trajectory[n]).collect();

        let bs_robot = scenario
            .base_stations
            .iter()
            .map(|&b| robots.iter().map(|&p| !los_blocked(b, p, obstacles)).collect())
            .collect();

        let ris_robot = scenario
            .ris
            .iter()
            .map(|ris| robots.iter().map(|&p| ris.sees(p) && !los_blocked(ris.position, p, obstacles)).collect())
            .collect();

        let bs_ris: Vec<Vec<bool>> = scenario
            .base_stations
            .iter()
            .map(|&b| scenario.ris.iter().map(|ris| !los_blocked(b, ris.position, obstacles)).collect())
            .collect();

        let serving_bs = (0..scenario.ris.len())
            .map(|i| {
                let pos = scenario.ris[i].position;
                (0..scenario.base_stations.len())
                    .filter(|&b| bs_ris[b][i])
                    .min_by(|&a, &b| {
                        let da = scenario.base_stations[a].distance(pos);
                        let db = scenario.base_stations[b].distance(pos);
                        da.total_cmp(&db).then(a.cmp(&b))
                    })
            })
            .collect();

        map.bs_robot.push(bs_robot);
        map.ris_robot.push(ris_robot);
        map.bs_ris.push(bs_ris);
        map.serving_bs.push(serving_bs);
    }
    map
}

/// Robot pairs `(r, r')` with `r < r'` that share an arrival angle at a RIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictSets {
    /// `pairs[n][i]`, sorted and deduplicated.
    pub pairs: Vec<Vec<Vec<(usize, usize)>>>,
}

impl ConflictSets {
    pub fn at(&self, i: usize, n: usize) -> &[(usize, usize)] {
        &self.pairs[n][i]
    }

    pub fn conflicting(&self, i: usize, n: usize, r: usize, s: usize) -> bool {
        let key = if r < s { (r, s) } else { (s, r) };
        self.pairs[n][i].binary_search(&key).is_ok()
    }

    pub fn total(&self) -> usize {
        self.pairs.iter().flatten().map(Vec::len).sum()
    }
}

/// Two RIS-covered robots conflict when their directions from the RIS are
/// separated by at most `separation` radians.
pub fn build_conflicts(scenario: &Scenario, coverage: &CoverageMap, separation: f64) -> ConflictSets {
    let num_robots = scenario.robots.len();
    let pairs = (0..scenario.num_slots())
        .map(|n| {
            scenario
                .ris
                .iter()
                .enumerate()
                .map(|(i, ris)| {
                    let mut out = Vec::new();
                    for r in 0..num_robots {
                        if !coverage.ris_covers(i, r, n) {
                            continue;
                        }
                        let dr = scenario.robots[r].trajectory[n] - ris.position;
                        for s in r + 1..num_robots {
                            if !coverage.ris_covers(i, s, n) {
                                continue;
                            }
                            let ds = scenario.robots[s].trajectory[n] - ris.position;
                            if angle_between(dr, ds) <= separation {
                                out.push((r, s));
                            }
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();
    ConflictSets { pairs }
}
