mod common;

use common::{check_heuristic_dominance, check_scenario_round_trip, ilp_optimum, random_tiny};
use risnet::heuristic::allocate;
use risnet::milp::Backend;
use risnet::scenario::{generate, precompute, Scenario, ScenarioConfig};

fn optimum(sc: &Scenario) -> Option<f64> {
    let t = precompute(sc);
    ilp_optimum(sc, &t, &Backend::Bundled).map(|o| o.0)
}

/// `None` (infeasible) ranks above every objective.
fn no_better(looser: Option<f64>, tighter: Option<f64>) -> bool {
    match (looser, tighter) {
        (Some(a), Some(b)) => a <= b,
        (None, Some(_)) => false,
        (_, None) => true,
    }
}

#[test]
fn relaxing_qos_never_hurts() {
    for k in 0..60 {
        let (sc, _) = random_tiny(10, k);
        let base = optimum(&sc);

        let mut more_u = sc.clone();
        more_u.config.qos.concurrent_override = Some(sc.config.concurrent() + 1);
        assert!(no_better(optimum(&more_u), base), "U, instance {k}");

        let mut longer_k = sc.clone();
        longer_k.robots.iter_mut().for_each(|r| r.outage_limit += 1);
        assert!(no_better(optimum(&longer_k), base), "K, instance {k}");

        let mut lower_psi = sc.clone();
        lower_psi.robots.iter_mut().for_each(|r| r.sinr_threshold *= 0.5);
        assert!(no_better(optimum(&lower_psi), base), "Ψ, instance {k}");

        assert!(no_better(base, optimum(&sc.without_ris())), "RIS removal, instance {k}");
    }
}

#[test]
fn heuristic_never_beats_the_optimum() {
    let compared = check_heuristic_dominance(50).unwrap();
    assert!(compared >= 25, "{compared}");
}

#[test]
fn heuristic_is_a_pure_function() {
    let config = ScenarioConfig { num_robots: 8, num_slots: 12, ..ScenarioConfig::default() };
    let sc = generate(&config, 21).unwrap();
    let first = allocate(&precompute(&sc), &sc, 99);
    for _ in 0..3 {
        assert_eq!(allocate(&precompute(&sc), &sc, 99), first);
    }
}

#[test]
fn scenario_files_round_trip() {
    check_scenario_round_trip(32).unwrap();
}
