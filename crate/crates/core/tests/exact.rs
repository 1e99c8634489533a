use fracvrp::brute::{enumerate_elementary_routes, BruteForce};
use fracvrp::exact::{corollary1_threshold, dinkelbach_reduced, solve_exact, ExactParams, ExactStatus};
use fracvrp::gen::random_feasible_instance;
use fracvrp::{Instance, ObjectiveKind, Ratio};

fn kind(seed: u64) -> ObjectiveKind {
    if seed.is_multiple_of(2) {
        ObjectiveKind::CostOverLoad
    } else {
        ObjectiveKind::ProfitOverTime
    }
}

fn small_params() -> ExactParams {
    ExactParams {
        tlim: 60.0,
        ..ExactParams::default()
    }
}

#[test]
fn matches_brute_force() {
    for seed in 0..40 {
        let n = 3 + (seed as usize % 5);
        let inst = random_feasible_instance(2000 + seed, kind(seed), n);
        let (z, _) = BruteForce::new(&inst).optimum().unwrap();
        let res = solve_exact(&inst, &small_params()).unwrap();
        assert_eq!(res.status, ExactStatus::Optimal, "seed {seed}");
        assert_eq!(res.value, z, "seed {seed}");
        assert_eq!(res.solution.value, z);
        assert!(res.dual_bound <= z.to_f64() + 1e-9);
        assert!(res.m_min <= res.m_max && res.m_max <= inst.m);
    }
}

#[test]
fn dominance_does_not_change_the_optimum() {
    for seed in 0..20 {
        let inst = random_feasible_instance(2100 + seed, kind(seed), 6);
        let on = solve_exact(&inst, &small_params()).unwrap();
        let off = solve_exact(
            &inst,
            &ExactParams {
                dominance: false,
                ..small_params()
            },
        )
        .unwrap();
        assert_eq!(on.value, off.value, "seed {seed}");
    }
}

#[test]
fn tight_route_limit_still_certifies_or_reports_the_limit() {
    for seed in 0..12 {
        let inst = random_feasible_instance(2200 + seed, kind(seed), 6);
        let (z, _) = BruteForce::new(&inst).optimum().unwrap();
        let params = ExactParams {
            delta_max: 2,
            eps1: 2.0,
            itermax: 2,
            ..small_params()
        };
        let res = solve_exact(&inst, &params).unwrap();
        assert!(res.value >= z);
        if res.status == ExactStatus::Optimal {
            assert_eq!(res.value, z, "seed {seed}: certified a non-optimal value");
        }
        assert!(res.trace.len() <= 2);
        assert!(res.trace.iter().all(|t| t.routes <= t.delta_max));
    }
}

#[test]
fn threshold_algebra() {
    assert_eq!(corollary1_threshold(5, 1.5, 1.5, 2.0, 3, 10), -2.0);
    assert_eq!(corollary1_threshold(5, 2.0, 1.0, 0.0, 1, 10), 5.0);
}

#[test]
fn dinkelbach_on_a_single_cover_stops_at_once() {
    let inst = random_feasible_instance(31, ObjectiveKind::CostOverLoad, 5);
    let (_, sol) = BruteForce::new(&inst).optimum().unwrap();
    let out = dinkelbach_reduced(&inst, &sol.routes, &(0..sol.routes.len()).collect::<Vec<_>>(), 1, inst.m, 60.0)
        .unwrap();
    assert_eq!(out.steps.len(), 1);
    assert_eq!(out.steps[0].scaled_value, 0);
    assert_eq!(out.value, sol.value);
    assert!(out.fp_optimal);
}

fn worst_start(inst: &Instance, routes: &[fracvrp::Route]) -> Vec<usize> {
    inst.mandatory().map(|v| routes.iter().position(|r| r.customers() == [v]).unwrap()).collect()
}

#[test]
fn dinkelbach_on_full_enumeration_reaches_the_optimum() {
    for seed in 0..16 {
        let inst = random_feasible_instance(2300 + seed, kind(seed), 6);
        let (z, _) = BruteForce::new(&inst).optimum().unwrap();
        let routes = enumerate_elementary_routes(&inst);
        let x0 = worst_start(&inst, &routes);
        if x0.len() > inst.m {
            continue;
        }
        let out = dinkelbach_reduced(&inst, &routes, &x0, 1, inst.m, 60.0).unwrap();
        assert_eq!(out.value, z, "seed {seed}");
        let rs: Vec<Ratio> = out.steps.iter().map(|s| s.r).collect();
        assert!(rs.windows(2).all(|w| w[1] < w[0]), "seed {seed}: {rs:?}");
    }
}

#[test]
fn dinkelbach_timeout_returns_the_incumbent() {
    let mut seen = 0;
    for seed in 0..16 {
        let inst = random_feasible_instance(2400 + seed, kind(seed), 7);
        let routes = enumerate_elementary_routes(&inst);
        let x0 = worst_start(&inst, &routes);
        if x0.len() > inst.m {
            continue;
        }
        let start = fracvrp::model::solution_value(&inst, &x0.iter().map(|&k| routes[k].clone()).collect::<Vec<_>>()).unwrap();
        let out = dinkelbach_reduced(&inst, &routes, &x0, 1, inst.m, 0.0).unwrap();
        assert!(out.value <= start);
        if !out.fp_optimal {
            seen += 1;
            assert_eq!(out.steps.len(), 1);
            assert_eq!(out.value, start);
        }
    }
    assert!(seen > 0, "no run hit the time limit");
}
