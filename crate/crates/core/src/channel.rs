//! Free-space mmWave link budget with RIS-cascaded paths, beam-gated
//! interference and per-robot SINR under an allocation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{AllocationSchedule, Assignment};
use crate::geometry::{in_beam_cone, CoverageMap};
use crate::scenario::Scenario;

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances are clamped to this value before the free-space formula.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Radio parameters shared by every BS, RIS and robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    pub tx_power_w: f64,
    pub carrier_hz: f64,
    pub beamwidth_deg: f64,
    pub ris_elements: u32,
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
    #[serde(default = "default_speed_of_light")]
    pub speed_of_light_m_s: f64,
    #[serde(default = "default_boltzmann")]
    pub boltzmann_j_k: f64,
}

fn default_speed_of_light() -> f64 {
    SPEED_OF_LIGHT
}

fn default_boltzmann() -> f64 {
    BOLTZMANN
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            tx_power_w: 1e-3,
            carrier_hz: 28e9,
            beamwidth_deg: 10.0,
            ris_elements: 200,
            temperature_k: 290.0,
            bandwidth_hz: 20e6,
            speed_of_light_m_s: SPEED_OF_LIGHT,
            boltzmann_j_k: BOLTZMANN,
        }
    }
}

impl PhysParams {
    pub fn beamwidth_rad(&self) -> f64 {
        self.beamwidth_deg.to_radians()
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("tx_power_w", self.tx_power_w),
            ("carrier_hz", self.carrier_hz),
            ("temperature_k", self.temperature_k),
            ("bandwidth_hz", self.bandwidth_hz),
            ("speed_of_light_m_s", self.speed_of_light_m_s),
            ("boltzmann_j_k", self.boltzmann_j_k),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be finite and positive, got {v}"));
            }
        }
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg < 180.0) {
            return Err(format!("beamwidth_deg must lie in (0, 180), got {}", self.beamwidth_deg));
        }
        if self.ris_elements == 0 {
            return Err("ris_elements must be at least 1".into());
        }
        Ok(())
    }

    /// Gain product of the transmit and receive antennas.
    pub fn gain_product(&self) -> f64 {
        let g = antenna_gain(self.beamwidth_rad());
        g * g
    }

    pub fn noise_power(&self) -> f64 {
        self.boltzmann_j_k * self.temperature_k * self.bandwidth_hz
    }

    pub fn path_gain(&self, d: f64) -> f64 {
        path_gain_with(self.speed_of_light_m_s, self.carrier_hz, d)
    }

    /// Received power of a direct BS link, antenna gains excluded.
    pub fn direct_power(&self, d: f64) -> f64 {
        let h = self.path_gain(d);
        self.tx_power_w * h * h
    }

    /// Received power through a RIS with optimal phases, antenna gains excluded.
    pub fn ris_power(&self, d_bs_ris: f64, d_ris_robot: f64) -> f64 {
        let h = self.path_gain(d_bs_ris) * f64::from(self.ris_elements) * self.path_gain(d_ris_robot);
        self.tx_power_w * h * h
    }
}

/// Gain of a conical antenna with full beamwidth `theta`.
pub fn antenna_gain(theta: f64) -> f64 {
    2.0 / (1.0 - (theta / 2.0).cos())
}

/// Free-space amplitude transfer `c / (4π f d)`, with `d` clamped to [`MIN_DISTANCE_M`].
pub fn path_gain(f: f64, d: f64) -> f64 {
    path_gain_with(SPEED_OF_LIGHT, f, d)
}

fn path_gain_with(c: f64, f: f64, d: f64) -> f64 {
    c / (4.0 * std::f64::consts::PI * f * d.max(MIN_DISTANCE_M))
}

/// Thermal noise power `k T V` in watts.
pub fn noise_power(temperature_k: f64, bandwidth_hz: f64) -> f64 {
    BOLTZMANN * temperature_k * bandwidth_hz
}

/// Largest `U >= 1` with `2U(U-1) < elements`: how many robots one RIS can
/// serve at once while nulling their mutual interference.
pub fn max_concurrent(elements: u32) -> u32 {
    let e = u64::from(elements);
    let mut u: u64 = 1;
    while 2 * (u + 1) * u < e {
        u += 1;
    }
    u as u32
}

/// Per-slot received powers and interference coefficients. Signal powers
/// exclude antenna gains; interference entries include them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPowerTables {
    /// `p_direct[n][b][r]`, zero when the pair is not covered.
    pub p_direct: Vec<Vec<Vec<f64>>>,
    /// `p_ris[n][i][r]` via the serving BS of `i`, zero when unavailable.
    pub p_ris: Vec<Vec<Vec<f64>>>,
    /// `xi_bs[n][b][r'][r]`: power leaking onto `r` from the beam `b -> r'`.
    pub xi_bs: Vec<Vec<Vec<Vec<f64>>>>,
    /// `xi_ris[n][i][r'][r]`: power leaking onto `r` from the reflected beam `i -> r'`.
    pub xi_ris: Vec<Vec<Vec<Vec<f64>>>>,
    pub gain_product: f64,
    pub noise_power_w: f64,
}

impl LinkPowerTables {
    pub fn num_slots(&self) -> usize {
        self.p_direct.len()
    }

    /// Gained signal power of `assignment` for robot `r` at slot `n`.
    pub fn signal(&self, assignment: Assignment, r: usize, n: usize) -> Option<f64> {
        match assignment {
            Assignment::Bs(b) => Some(self.p_direct[n][b][r] * self.gain_product),
            Assignment::Ris(i) => Some(self.p_ris[n][i][r] * self.gain_product),
            Assignment::Outage => None,
        }
    }

    /// Sum of the interference powers every non-outage robot `r' != r` imposes
    /// on `r`. Transmissions via `own_ris` are skipped: a RIS nulls the
    /// interference among the robots it serves.
    pub fn interference_sum(
        &self,
        schedule: &AllocationSchedule,
        r: usize,
        n: usize,
        own_ris: Option<usize>,
    ) -> f64 {
        let mut total = 0.0;
        for other in 0..schedule.num_robots() {
            if other == r {
                continue;
            }
            match schedule.get(other, n) {
                Assignment::Bs(b) => total += self.xi_bs[n][b][other][r],
                Assignment::Ris(i) if Some(i) != own_ris => total += self.xi_ris[n][i][other][r],
                _ => {}
            }
        }
        total
    }

    /// SINR of robot `r` at slot `n` under `schedule`.
    pub fn sinr(&self, schedule: &AllocationSchedule, r: usize, n: usize) -> Result<f64, ChannelError> {
        let assignment = schedule.get(r, n);
        let signal = self.signal(assignment, r, n).ok_or(ChannelError::Unallocated { robot: r, slot: n })?;
        let own_ris = match assignment {
            Assignment::Ris(i) => Some(i),
            _ => None,
        };
        Ok(signal / (self.noise_power_w + self.interference_sum(schedule, r, n, own_ris)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("robot {robot} has no link at slot {slot}")]
    Unallocated { robot: usize, slot: usize },
}

/// Fill the power and interference tables for every slot.
pub fn build_link_tables(scenario: &Scenario, coverage: &CoverageMap) -> LinkPowerTables {
    let phys = &scenario.config.phys;
    let theta = phys.beamwidth_rad();
    let gain = phys.gain_product();
    let obstacles = &scenario.obstacles;
    let nb = scenario.base_stations.len();
    let ni = scenario.ris.len();
    let nr = scenario.robots.len();

    let mut tables = LinkPowerTables {
        p_direct: Vec::new(),
        p_ris: Vec::new(),
        xi_bs: Vec::new(),
        xi_ris: Vec::new(),
        gain_product: gain,
        noise_power_w: phys.noise_power(),
    };

    for n in 0..scenario.num_slots() {
        let pos: Vec<_> = scenario.robots.iter().map(|r| r.trajectory[n]).collect();

        let mut p_direct = vec![vec![0.0; nr]; nb];
        for (b, &bs) in scenario.base_stations.iter().enumerate() {
            for r in 0..nr {
                if coverage.bs_covers(b, r, n) {
                    p_direct[b][r] = phys.direct_power(bs.distance(pos[r]));
                }
            }
        }

        // Received power at any point the reflected beam of `i` reaches, once
        // the RIS is fed by its serving BS.
        let mut p_ris = vec![vec![0.0; nr]; ni];
        let mut delta_ris = vec![vec![0.0; nr]; ni];
        for (i, ris) in scenario.ris.iter().enumerate() {
            let Some(feed) = coverage.serving_bs[n][i] else { continue };
            let d1 = scenario.base_stations[feed].distance(ris.position);
            for r in 0..nr {
                let p = phys.ris_power(d1, ris.position.distance(pos[r]));
                delta_ris[i][r] = p;
                if coverage.ris_link_available(i, r, n) {
                    p_ris[i][r] = p;
                }
            }
        }

        let mut xi_bs = vec![vec![vec![0.0; nr]; nr]; nb];
        for (b, &bs) in scenario.base_stations.iter().enumerate() {
            for aimed in 0..nr {
                if !coverage.bs_covers(b, aimed, n) {
                    continue;
                }
                for victim in 0..nr {
                    if victim != aimed && in_beam_cone(bs, pos[aimed], pos[victim], theta, obstacles) {
                        xi_bs[b][aimed][victim] = phys.direct_power(bs.distance(pos[victim])) * gain;
                    }
                }
            }
        }

        let mut xi_ris = vec![vec![vec![0.0; nr]; nr]; ni];
        for (i, ris) in scenario.ris.iter().enumerate() {
            for aimed in 0..nr {
                if !coverage.ris_link_available(i, aimed, n) {
                    continue;
                }
                for victim in 0..nr {
                    if victim != aimed && in_beam_cone(ris.position, pos[aimed], pos[victim], theta, obstacles) {
                        xi_ris[i][aimed][victim] = delta_ris[i][victim] * gain;
                    }
                }
            }
        }

        tables.p_direct.push(p_direct);
        tables.p_ris.push(p_ris);
        tables.xi_bs.push(xi_bs);
        tables.xi_ris.push(xi_ris);
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn antenna_gain_closed_form() {
        // 2 / (1 - cos 5°), evaluated independently.
        let expected = 2.0 / (1.0 - 0.996_194_698_091_745_5);
        assert_relative_eq!(antenna_gain(10f64.to_radians()), expected, max_relative = 1e-12);
        assert!((antenna_gain(10f64.to_radians()) - 525.58).abs() < 0.01);
        assert_relative_eq!(antenna_gain(std::f64::consts::PI), 2.0, max_relative = 1e-12);
        assert_relative_eq!(antenna_gain(60f64.to_radians()), 14.928, epsilon = 1e-3);
    }

    #[test]
    fn path_gain_scales_inversely() {
        let h = path_gain(28e9, 10.0);
        assert_relative_eq!(h, 8.521e-5, max_relative = 1e-3);
        assert_relative_eq!(path_gain(28e9, 20.0), h / 2.0, max_relative = 1e-12);
        assert_relative_eq!(path_gain(56e9, 10.0), h / 2.0, max_relative = 1e-12);
        // Clamped near field.
        assert_eq!(path_gain(28e9, 0.0), path_gain(28e9, MIN_DISTANCE_M));
    }

    #[test]
    fn noise_floor() {
        assert_relative_eq!(noise_power(290.0, 20e6), 8.008e-14, max_relative = 1e-3);
        assert_relative_eq!(noise_power(290.0, 40e6), 2.0 * noise_power(290.0, 20e6), max_relative = 1e-12);
        assert_relative_eq!(noise_power(290.0, 1.0), 4.004e-21, max_relative = 1e-3);
    }

    #[test]
    fn direct_and_ris_power() {
        let phys = PhysParams::default();
        assert_relative_eq!(phys.direct_power(10.0), 7.26e-12, max_relative = 1e-3);
        assert_relative_eq!(phys.direct_power(20.0), phys.direct_power(10.0) / 4.0, max_relative = 1e-12);
        let silent = PhysParams { tx_power_w: 0.0, ..PhysParams::default() };
        assert_eq!(silent.direct_power(10.0), 0.0);

        assert_relative_eq!(phys.ris_power(10.0, 5.0), 8.43e-15, max_relative = 2e-3);
        let doubled = PhysParams { ris_elements: 400, ..PhysParams::default() };
        assert_relative_eq!(doubled.ris_power(10.0, 5.0), 4.0 * phys.ris_power(10.0, 5.0), max_relative = 1e-12);
        assert_relative_eq!(phys.ris_power(5.0, 10.0), phys.ris_power(10.0, 5.0), max_relative = 1e-12);
    }

    /// Brute-force scan for the largest U with 2U(U-1) < E.
    fn scan_concurrent(e: u32) -> u32 {
        (1..=e.max(1)).filter(|&u| 2 * u64::from(u) * (u64::from(u) - 1) < u64::from(e)).max().unwrap_or(1)
    }

    #[test]
    fn concurrency_threshold() {
        assert_eq!(max_concurrent(200), 10);
        assert_eq!(max_concurrent(4), 1);
        assert_eq!(max_concurrent(1), 1);
        for e in 1..2_000 {
            assert_eq!(max_concurrent(e), scan_concurrent(e), "E = {e}");
        }
    }

    #[test]
    fn lone_robot_sinr() {
        let phys = PhysParams::default();
        let snr = phys.direct_power(10.0) * phys.gain_product() / phys.noise_power();
        assert_relative_eq!(snr, 7.261e-12 * 525.58 * 525.58 / 8.008e-14, max_relative = 2e-3);
    }

    proptest! {
        #[test]
        fn ris_power_factorizes(d1 in 0.2..80.0f64, d2 in 0.2..80.0f64, e in 1u32..1000, p in 1e-6..1.0f64) {
            let phys = PhysParams { ris_elements: e, tx_power_w: p, ..PhysParams::default() };
            let lhs = phys.ris_power(d1, d2);
            let rhs = phys.direct_power(d1) * phys.direct_power(d2) * f64::from(e).powi(2) / p;
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
        }

        #[test]
        fn powers_are_finite_and_positive(d in 1e-6..500.0f64, theta in 0.01..3.1f64) {
            let phys = PhysParams::default();
            for v in [phys.direct_power(d), phys.ris_power(d, d), antenna_gain(theta)] {
                prop_assert!(v.is_finite() && v > 0.0);
            }
        }
    }
}
