//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use risnet::allocation::{AllocationSchedule, ConstraintFamily};
use risnet::channel::LinkPowerTables;
use risnet::geometry::{ConflictSets, CoverageMap, Obstacle, Point2D, RisMount};
use risnet::milp::{self, brute_force_optimum, Backend, MilpModel, ModelFormat, SizeGuard, SolveStatus, VarKind};
use risnet::scenario::{self, DerivedTables, ParamRange, Robot, Scenario, ScenarioConfig};

/// A cramped floor where robots are close enough to interfere and to share
/// RIS arrival angles.
pub fn tiny_config(rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        floor_width_m: rng.gen_range(8.0..14.0),
        floor_height_m: rng.gen_range(8.0..14.0),
        num_bs: rng.gen_range(1..=2),
        num_ris: rng.gen_range(0..=2),
        num_robots: rng.gen_range(1..=3),
        num_slots: rng.gen_range(1..=4),
        obstacle_count: rng.gen_range(0..=2),
        obstacle_side_min_m: 1.0,
        obstacle_side_max_m: 2.5,
        turn_interval_slots: rng.gen_range(1..=3),
        ..ScenarioConfig::default()
    };
    c.phys.beamwidth_deg = rng.gen_range(10.0..40.0);
    let psi = [1.0, 10.0, 100.0, 1e3, 1e4][rng.gen_range(0..5)];
    c.qos.sinr_threshold = ParamRange::discrete(psi, psi * 3.0);
    let k = rng.gen_range(1..=4) as f64;
    c.qos.outage_limit = ParamRange::discrete(k, k + 1.0);
    c.qos.reconfig_delay = rng.gen_range(1..=3);
    c.qos.concurrent_override = Some(rng.gen_range(1..=2));
    c
}

/// Tiny random instance `k` of a reproducible family.
pub fn random_tiny(family: u64, k: u64) -> (Scenario, DerivedTables) {
    let mut rng = ChaCha8Rng::seed_from_u64(family.wrapping_mul(1_000_003).wrapping_add(k));
    loop {
        let config = tiny_config(&mut rng);
        if let Ok(sc) = risnet::generate(&config, rng.gen()) {
            let t = risnet::precompute(&sc);
            return (sc, t);
        }
    }
}

/// Optimal objective and schedule, or `None` when infeasible.
pub fn ilp_optimum(sc: &Scenario, t: &DerivedTables, backend: &Backend) -> Option<(f64, AllocationSchedule)> {
    let model = milp::build_model(t, sc).expect("model builds");
    let res = milp::solve(&model, backend, None).expect("solver runs");
    match res.status {
        SolveStatus::Optimal => {
            let s = milp::extract_schedule(&model, &res, sc.num_robots(), sc.num_slots()).expect("extracts");
            Some((res.objective.unwrap(), s))
        }
        SolveStatus::Infeasible => None,
        SolveStatus::Timeout => panic!("unexpected timeout"),
    }
}

pub fn backends() -> Vec<Backend> {
    let mut v = vec![Backend::Bundled];
    if cfg!(feature = "highs") {
        v.push(Backend::Highs);
    }
    v
}

fn cube<T: Clone>(a: usize, b: usize, c: usize, v: T) -> Vec<Vec<Vec<T>>> {
    vec![vec![vec![v; c]; b]; a]
}

/// The six-robot, two-slot factory walked through in the design notes
/// (README, "Worked example"), with every table written by hand.
///
/// Indices are zero-based: `b0..b2`, `i0..i1`, `r0..r5` stand for
/// `b1..b3`, `i1..i2`, `r1..r6`. All thresholds are 10 and all covered links
/// deliver 100 times the noise.
///
/// * Slot 0: `b0` covers everyone. `r0` and `r1` leak 50 onto each other, and
///   `r0` is too weak to be served anyway.
/// * Slot 1: `i0` covers `r0..r3`, `i1` covers `r3..r5`, `b1` covers `r1, r3, r5`
///   and feeds both RIS. `r0` and `r1` share an angle at `i0`; `r3, r4, r5` share
///   one at `i1`. Serving `r1` from `b1` leaks 50 onto `r0`.
pub fn worked_example() -> (Scenario, DerivedTables) {
    let (nb, ni, nr, ns) = (3, 2, 6, 2);
    let mut config = ScenarioConfig {
        floor_width_m: 30.0,
        floor_height_m: 20.0,
        num_bs: nb,
        num_ris: ni,
        num_robots: nr,
        num_slots: ns,
        obstacle_count: 0,
        ..ScenarioConfig::default()
    };
    config.qos.reconfig_delay = 2;
    config.qos.concurrent_override = Some(2);
    config.qos.outage_limit = ParamRange::discrete(2.0, 2.0);
    config.qos.sinr_threshold = ParamRange::discrete(10.0, 10.0);
    let robot = |x: f64, y: f64| Robot {
        trajectory: vec![Point2D::new(x, y), Point2D::new(x + 1.0, y)],
        sinr_threshold: 10.0,
        outage_limit: 2,
    };
    let scenario = Scenario {
        config,
        seed: None,
        base_stations: vec![Point2D::new(5.0, 5.0), Point2D::new(25.0, 5.0), Point2D::new(15.0, 15.0)],
        ris: vec![
            RisMount { position: Point2D::new(0.0, 10.0), normal: Point2D::new(1.0, 0.0), fov_half_angle: 1.0 },
            RisMount { position: Point2D::new(30.0, 10.0), normal: Point2D::new(-1.0, 0.0), fov_half_angle: 1.0 },
        ],
        obstacles: vec![Obstacle::new(Point2D::new(12.0, 8.0), Point2D::new(14.0, 12.0))],
        robots: vec![robot(4.0, 12.0), robot(5.0, 13.0), robot(8.0, 9.0), robot(16.0, 9.0), robot(22.0, 12.0), robot(23.0, 8.0)],
    };

    let mut bs_robot = cube(ns, nb, nr, false);
    let mut ris_robot = cube(ns, ni, nr, false);
    let mut bs_ris = cube(ns, nb, ni, false);
    for r in 0..nr {
        bs_robot[0][0][r] = true;
    }
    for r in 0..4 {
        ris_robot[1][0][r] = true;
    }
    for r in 3..6 {
        ris_robot[1][1][r] = true;
    }
    for r in [1, 3, 5] {
        bs_robot[1][1][r] = true;
    }
    for n in 0..ns {
        bs_ris[n][1] = vec![true, true];
    }
    let coverage = CoverageMap { bs_robot, ris_robot, bs_ris, serving_bs: vec![vec![Some(1), Some(1)]; ns] };

    let mut pairs = cube(ns, ni, 0, (0usize, 0usize));
    pairs[1][0] = vec![(0, 1)];
    pairs[1][1] = vec![(3, 4), (3, 5), (4, 5)];
    let conflicts = ConflictSets { pairs };

    let noise = 1.0;
    let mut p_direct = cube(ns, nb, nr, 0.0);
    let mut p_ris = cube(ns, ni, nr, 0.0);
    for n in 0..ns {
        for b in 0..nb {
            for r in 0..nr {
                if coverage.bs_robot[n][b][r] {
                    p_direct[n][b][r] = 100.0;
                }
            }
        }
        for i in 0..ni {
            for r in 0..nr {
                if coverage.ris_robot[n][i][r] {
                    p_ris[n][i][r] = 100.0;
                }
            }
        }
    }
    p_direct[0][0][0] = 5.0;
    let mut xi_bs = vec![vec![vec![vec![0.0; nr]; nr]; nb]; ns];
    let mut xi_ris = vec![vec![vec![vec![0.0; nr]; nr]; ni]; ns];
    xi_bs[0][0][0][1] = 50.0;
    xi_bs[0][0][1][0] = 50.0;
    xi_bs[1][1][1][0] = 50.0;
    // Onto r3: from r4 via i1 and r5 via b1, and from i0's
    // other beams, which i0 nulls when r3 is on i0 too.
    xi_ris[1][1][4][3] = 2.0;
    xi_bs[1][1][5][3] = 3.0;
    xi_ris[1][0][0][3] = 1.0;
    xi_ris[1][0][2][3] = 1.0;
    let powers = LinkPowerTables { p_direct, p_ris, xi_bs, xi_ris, gain_product: 1.0, noise_power_w: noise };
    let tables = DerivedTables { coverage, conflicts, powers, max_concurrent: 2, noise_power_w: noise };
    (scenario, tables)
}

/// The unique optimum of [`worked_example`], two outages.
pub fn worked_example_optimum() -> AllocationSchedule {
    use risnet::Assignment::{Bs, Outage, Ris};
    let slot0 = vec![Outage, Bs(0), Bs(0), Bs(0), Bs(0), Bs(0)];
    let slot1 = vec![Ris(0), Outage, Ris(0), Bs(1), Ris(1), Bs(1)];
    AllocationSchedule::from_slots(vec![slot0, slot1], 6)
}

/// Links that add interference to `r3` when it is served through `i0` next to
/// `r2`, with `r4` on `i1` and `r5` on `b1`.
pub fn worked_example_interferers(t: &DerivedTables) -> Vec<(usize, risnet::Assignment, f64)> {
    use risnet::Assignment::{Bs, Outage, Ris};
    let mut s = AllocationSchedule::all_outage(6, 2);
    for (r, a) in [Outage, Outage, Ris(0), Ris(0), Ris(1), Bs(1)].into_iter().enumerate() {
        s.set(r, 1, a);
    }
    (0..6)
        .filter(|&other| other != 3)
        .filter_map(|other| {
            let mut alone = AllocationSchedule::all_outage(6, 2);
            alone.set(other, 1, s.get(other, 1));
            let xi = t.powers.interference_sum(&alone, 3, 1, Some(0));
            (xi > 0.0).then(|| (other, s.get(other, 1), xi))
        })
        .collect()
}

/// Solver objective against the exhaustive optimum on `count` instances of
/// `family`, every backend. Returns how many were feasible.
pub fn check_oracle(family: u64, count: u64) -> Result<usize, String> {
    let mut feasible = 0;
    for k in 0..count {
        let (sc, t) = random_tiny(family, k);
        let brute = brute_force_optimum(&t, &sc, SizeGuard::default()).map_err(|e| e.to_string())?;
        for backend in backends() {
            let got = ilp_optimum(&sc, &t, &backend);
            let (want, have) = (brute.as_ref().map(|b| b.0 as f64), got.as_ref().map(|g| g.0));
            if want != have {
                return Err(format!("instance {k} on {}: solver {have:?}, exhaustive {want:?}", backend.name()));
            }
            if let Some((_, schedule)) = got {
                let report = risnet::validate(&sc, &t, &schedule);
                if !report.is_feasible() {
                    return Err(format!("instance {k} on {}: {}", backend.name(), report));
                }
            }
        }
        feasible += usize::from(brute.is_some());
    }
    Ok(feasible)
}

type Columns = BTreeMap<String, (bool, u64, u64, u64)>;
type Rows = BTreeMap<String, (String, u64, BTreeMap<String, u64>)>;

/// Columns and rows keyed by name, floats compared bit for bit. LP files list
/// columns in order of first use, so positions are not preserved.
pub fn by_name(m: &MilpModel) -> (Columns, Rows) {
    let cols = m
        .variables
        .iter()
        .map(|v| {
            let key = (v.kind == VarKind::Integer, v.lower.to_bits(), v.upper.to_bits(), v.objective.to_bits());
            (v.name.clone(), key)
        })
        .collect();
    let rows = m
        .constraints
        .iter()
        .map(|c| {
            let terms = c.terms.iter().map(|&(j, a)| (m.variables[j].name.clone(), a.to_bits())).collect();
            (c.name.clone(), (c.sense.symbol().to_string(), c.rhs.to_bits(), terms))
        })
        .collect();
    (cols, rows)
}

/// LP and MPS export, parse back, compare, and solve the parsed model.
pub fn check_export_round_trip(family: u64, count: u64) -> Result<(), String> {
    for k in 0..count {
        let (sc, t) = random_tiny(family, k);
        let model = milp::build_model(&t, &sc).map_err(|e| e.to_string())?;
        let direct = milp::solve(&model, &Backend::Bundled, None).map_err(|e| e.to_string())?;
        for format in [ModelFormat::Lp, ModelFormat::Mps] {
            let parsed = milp::parse_model(&milp::export_model(&model, format), format)
                .map_err(|e| format!("instance {k} {format:?}: {e}"))?;
            if by_name(&parsed) != by_name(&model) {
                return Err(format!("instance {k} {format:?}: parsed model differs"));
            }
            let again = milp::solve(&parsed, &Backend::Bundled, None).map_err(|e| e.to_string())?;
            if (again.status, again.objective) != (direct.status, direct.objective) {
                return Err(format!("instance {k} {format:?}: parsed model solves differently"));
            }
        }
    }
    Ok(())
}

/// On `count` small shared instances: the heuristic breaks nothing but outage
/// windows, is repeatable, and never beats the ILP optimum. Returns how many
/// instances had a feasible heuristic schedule to compare.
pub fn check_heuristic_dominance(count: u64) -> Result<usize, String> {
    let backend = backends().pop().unwrap();
    let mut compared = 0;
    for seed in 0..count {
        let config = ScenarioConfig { num_robots: 4 + seed as usize % 4, num_slots: 12, ..ScenarioConfig::default() };
        let sc = risnet::generate(&config, seed).map_err(|e| e.to_string())?;
        let t = risnet::precompute(&sc);
        let heur = risnet::allocate(&t, &sc, seed);
        if risnet::allocate(&t, &sc, seed) != heur {
            return Err(format!("seed {seed}: heuristic is not repeatable"));
        }
        let report = risnet::validate(&sc, &t, &heur.schedule);
        if report.families().iter().any(|f| *f != ConstraintFamily::OutageWindow) || heur.feasible != report.is_feasible() {
            return Err(format!("seed {seed}: heuristic schedule {report}"));
        }
        let ilp = ilp_optimum(&sc, &t, &backend);
        if let Some((obj, schedule)) = &ilp {
            if !risnet::validate(&sc, &t, schedule).is_feasible() || *obj != schedule.total_outages() as f64 {
                return Err(format!("seed {seed}: ILP schedule does not validate"));
            }
        }
        if heur.feasible {
            match ilp {
                None => return Err(format!("seed {seed}: heuristic feasible, ILP infeasible")),
                Some((obj, _)) if obj > heur.schedule.total_outages() as f64 => {
                    return Err(format!("seed {seed}: heuristic {} beats ILP {obj}", heur.schedule.total_outages()))
                }
                Some(_) => compared += 1,
            }
        }
    }
    Ok(compared)
}

/// Generated scenarios survive a file round trip, tables included.
pub fn check_scenario_round_trip(count: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for k in 0..count {
        let config = ScenarioConfig {
            num_robots: rng.gen_range(0..12),
            num_slots: rng.gen_range(1..30),
            obstacle_count: rng.gen_range(0..10),
            ..ScenarioConfig::default()
        };
        let sc = risnet::generate(&config, rng.gen()).map_err(|e| e.to_string())?;
        let text = scenario::serialize(&sc);
        let back = scenario::deserialize(&text).map_err(|e| format!("case {k}: {e}"))?;
        if back != sc || scenario::serialize(&back) != text || risnet::precompute(&back) != risnet::precompute(&sc) {
            return Err(format!("case {k}: round trip changed the scenario"));
        }
    }
    Ok(())
}
