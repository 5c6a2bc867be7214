//! Greedy nearest-link baseline.
//!
//! Slot by slot, every robot proposes its nearest usable BS or RIS. Each RIS
//! then keeps a random conflict-free subset of its proposers, cuts that to `U`
//! at random, and drops everyone if the RIS is still reconfiguring. Finally
//! any link below its SINR threshold is dropped. Outage runs are not
//! considered while building; a service failure is only detected afterwards.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::allocation::{has_service_failure, AllocationSchedule, Assignment, ServiceFailure, SINR_RELATIVE_TOLERANCE};
use crate::scenario::{DerivedTables, Scenario};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HeuristicOptions {
    /// Repeat the SINR pass until no link is dropped, instead of a single pass.
    pub sinr_fixed_point: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicOutcome {
    pub schedule: AllocationSchedule,
    pub feasible: bool,
    pub failure: Option<ServiceFailure>,
}

pub fn allocate(tables: &DerivedTables, scenario: &Scenario, seed: u64) -> HeuristicOutcome {
    allocate_with(tables, scenario, seed, HeuristicOptions::default())
}

pub fn allocate_with(tables: &DerivedTables, scenario: &Scenario, seed: u64, options: HeuristicOptions) -> HeuristicOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nr = scenario.robots.len();
    let ns = scenario.num_slots();
    let ni = scenario.ris.len();
    let cap = tables.max_concurrent as usize;
    let delay = scenario.config.qos.reconfig_delay.max(1) as usize;
    let mut schedule = AllocationSchedule::all_outage(nr, ns);

    for n in 0..ns {
        for r in 0..nr {
            schedule.set(r, n, nearest_link(tables, scenario, r, n));
        }

        for i in 0..ni {
            let mut proposers: Vec<usize> = (0..nr).filter(|&r| schedule.x_ris(i, r, n)).collect();
            if proposers.is_empty() {
                continue;
            }
            proposers.shuffle(&mut rng);
            let mut kept: Vec<usize> = Vec::with_capacity(proposers.len());
            for &r in &proposers {
                if kept.iter().all(|&s| !tables.conflicts.conflicting(i, n, r, s)) {
                    kept.push(r);
                } else {
                    schedule.set(r, n, Assignment::Outage);
                }
            }
            if kept.len() > cap {
                kept.shuffle(&mut rng);
                for &r in &kept[cap..] {
                    schedule.set(r, n, Assignment::Outage);
                }
                kept.truncate(cap);
            }

            // Busy when more than U distinct robots used it within the window,
            // counting this slot's survivors.
            let start = (n + 1).saturating_sub(delay);
            let distinct = (0..nr).filter(|&r| (start..=n).any(|m| schedule.x_ris(i, r, m))).count();
            if distinct > cap {
                for &r in &kept {
                    schedule.set(r, n, Assignment::Outage);
                }
            }
        }

        loop {
            let violators: Vec<usize> = (0..nr)
                .filter(|&r| {
                    !schedule.get(r, n).is_outage() && {
                        let sinr = tables.powers.sinr(&schedule, r, n).expect("served robot");
                        sinr < scenario.robots[r].sinr_threshold * (1.0 - SINR_RELATIVE_TOLERANCE)
                    }
                })
                .collect();
            for &r in &violators {
                schedule.set(r, n, Assignment::Outage);
            }
            if violators.is_empty() || !options.sinr_fixed_point {
                break;
            }
        }
    }

    let failure = has_service_failure(&schedule, &scenario.outage_limits());
    HeuristicOutcome { schedule, feasible: failure.is_none(), failure }
}

/// Closest covered BS or usable RIS; BS first on ties, then lower index.
fn nearest_link(tables: &DerivedTables, scenario: &Scenario, r: usize, n: usize) -> Assignment {
    let pos = scenario.robots[r].trajectory[n];
    let cov = &tables.coverage;
    let bs = (0..scenario.base_stations.len())
        .filter(|&b| cov.bs_covers(b, r, n))
        .map(|b| (scenario.base_stations[b].distance(pos), Assignment::Bs(b)));
    let ris = (0..scenario.ris.len())
        .filter(|&i| cov.ris_link_available(i, r, n))
        .map(|i| (scenario.ris[i].position.distance(pos), Assignment::Ris(i)));
    let mut best = Assignment::Outage;
    let mut best_d = f64::INFINITY;
    // Strict comparison keeps the earliest candidate, and BSs come first.
    for (d, a) in bs.chain(ris) {
        if d < best_d {
            best_d = d;
            best = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{validate, ConstraintFamily};
    use crate::geometry::{Point2D, RisMount};
    use crate::scenario::{generate, precompute, Robot, ScenarioConfig};
    use proptest::prelude::*;

    fn hand_scenario(bs: Point2D, robot: Point2D, slots: usize) -> Scenario {
        let mut config = ScenarioConfig {
            floor_width_m: 20.0,
            floor_height_m: 15.0,
            num_bs: 1,
            num_ris: 1,
            num_robots: 1,
            num_slots: slots,
            obstacle_count: 0,
            ..ScenarioConfig::default()
        };
        config.qos.outage_limit = crate::scenario::ParamRange::discrete(3.0, 3.0);
        Scenario {
            config,
            seed: None,
            base_stations: vec![bs],
            ris: vec![RisMount {
                position: Point2D::new(10.0, 15.0),
                normal: Point2D::new(0.0, -1.0),
                fov_half_angle: 60f64.to_radians(),
            }],
            obstacles: vec![],
            robots: vec![Robot { trajectory: vec![robot; slots], sinr_threshold: 9.0, outage_limit: 3 }],
        }
    }

    #[test]
    fn lone_robot_is_always_served() {
        let sc = hand_scenario(Point2D::new(5.0, 10.0), Point2D::new(8.0, 10.0), 6);
        let t = precompute(&sc);
        let out = allocate(&t, &sc, 1);
        assert!(out.feasible);
        assert_eq!(out.schedule.total_outages(), 0);
        assert!((0..6).all(|n| out.schedule.get(0, n) == Assignment::Bs(0)));
    }

    #[test]
    fn distance_ties_go_to_the_bs() {
        // Robot at (10,10): 5 m from the RIS overhead and 5 m from the BS.
        let sc = hand_scenario(Point2D::new(5.0, 10.0), Point2D::new(10.0, 10.0), 2);
        let t = precompute(&sc);
        assert!(t.coverage.ris_link_available(0, 0, 0));
        assert_eq!(allocate(&t, &sc, 0).schedule.get(0, 0), Assignment::Bs(0));

        let sc = hand_scenario(Point2D::new(4.0, 10.0), Point2D::new(10.0, 10.0), 2);
        let t = precompute(&sc);
        assert_eq!(allocate(&t, &sc, 0).schedule.get(0, 0), Assignment::Ris(0));
    }

    fn small_config(robots: usize, slots: usize) -> ScenarioConfig {
        ScenarioConfig { num_robots: robots, num_slots: slots, ..ScenarioConfig::default() }
    }

    #[test]
    fn same_seed_same_outcome() {
        let sc = generate(&small_config(10, 20), 3).unwrap();
        let t = precompute(&sc);
        assert_eq!(allocate(&t, &sc, 11), allocate(&t, &sc, 11));
    }

    #[test]
    fn fixed_point_pass_stays_sound() {
        let sc = generate(&small_config(12, 20), 8).unwrap();
        let t = precompute(&sc);
        let fp = allocate_with(&t, &sc, 2, HeuristicOptions { sinr_fixed_point: true });
        assert!(validate(&sc, &t, &fp.schedule).families().iter().all(|f| *f == ConstraintFamily::OutageWindow));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn only_outage_windows_can_fail(seed in 0u64..1000, robots in 1usize..14, delay in 1u32..4, u in 1u32..4) {
            let mut config = small_config(robots, 12);
            config.qos.reconfig_delay = delay;
            config.qos.concurrent_override = Some(u);
            let sc = generate(&config, seed).unwrap();
            let t = precompute(&sc);
            let out = allocate(&t, &sc, seed ^ 0x5a);
            let report = validate(&sc, &t, &out.schedule);
            prop_assert!(report.families().iter().all(|f| *f == ConstraintFamily::OutageWindow));
            prop_assert_eq!(out.feasible, report.is_feasible());
            prop_assert_eq!(out.feasible, out.failure.is_none());
        }
    }
}
