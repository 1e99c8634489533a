use fracvrp::brute::{enumerate_elementary_routes, BruteForce};
use fracvrp::gen::random_feasible_instance;
use fracvrp::matrix::Matrix;
use fracvrp::mip::{solve_fp, MipParams};
use fracvrp::model::route_from_customers;
use fracvrp::{Error, Instance, ObjectiveKind, Route};

fn kind(seed: u64) -> ObjectiveKind {
    if seed.is_multiple_of(2) {
        ObjectiveKind::CostOverLoad
    } else {
        ObjectiveKind::ProfitOverTime
    }
}

fn params(inst: &Instance) -> MipParams {
    MipParams {
        m_min: 1,
        m_max: inst.m,
        time_limit: 60.0,
        integral_costs: false,
    }
}

/// Least objective over feasible selections, by exhaustive search.
fn oracle(inst: &Instance, routes: &[Route], costs: &[f64], m_min: usize, m_max: usize) -> Option<f64> {
    let mandatory = inst.mandatory().fold(0u128, |m, i| m | 1u128 << i);
    #[allow(clippy::too_many_arguments)]
    fn rec(
        routes: &[Route],
        costs: &[f64],
        from: usize,
        used: u128,
        k: usize,
        acc: f64,
        ctx: (u128, usize, usize),
        best: &mut Option<f64>,
    ) {
        let (mandatory, m_min, m_max) = ctx;
        if used & mandatory == mandatory && k >= m_min && best.is_none_or(|b| acc < b) {
            *best = Some(acc);
        }
        if k == m_max {
            return;
        }
        for i in from..routes.len() {
            if routes[i].mask() & used == 0 {
                rec(routes, costs, i + 1, used | routes[i].mask(), k + 1, acc + costs[i], ctx, best);
            }
        }
    }
    let mut best = None;
    rec(routes, costs, 0, 0, 0, 0.0, (mandatory, m_min, m_max), &mut best);
    best
}

#[test]
fn disjoint_cover_is_found_without_branching() {
    let inst = Instance {
        name: "three".into(),
        n1: 3,
        n2: 0,
        service: vec![0, 1, 1, 1],
        cost: Matrix::from_fn(4, |i, j| if i == j { 0 } else { 5 }),
        time: Matrix::filled(4, 0),
        m: 3,
        max_time: 1,
        objective: ObjectiveKind::CostOverLoad,
    };
    let routes: Vec<Route> = (1..=3).map(|v| route_from_customers(&inst, &[v]).unwrap()).collect();
    let costs: Vec<f64> = routes.iter().map(|r| r.cost as f64).collect();
    let res = solve_fp(&inst, &routes, &costs, &params(&inst), None).unwrap();
    assert_eq!(res.x, vec![0, 1, 2]);
    assert!(res.proven_optimal);
    assert_eq!(res.objective, 30.0);
    assert_eq!(res.nodes, 1);
}

#[test]
fn matches_exhaustive_search() {
    for seed in 0..30 {
        let inst = random_feasible_instance(1000 + seed, kind(seed), 6);
        let routes = enumerate_elementary_routes(&inst);
        let r = (seed % 7) as f64 * 0.37 - 1.0;
        let costs: Vec<f64> = routes.iter().map(|l| l.cost as f64 - r * l.working_time as f64).collect();
        let m_min = 1 + (seed as usize % 2).min(inst.m - 1);
        let p = MipParams {
            m_min,
            ..params(&inst)
        };
        let want = oracle(&inst, &routes, &costs, m_min, inst.m);
        match solve_fp(&inst, &routes, &costs, &p, None) {
            Ok(res) => {
                let want = want.expect("oracle agrees on feasibility");
                assert!(res.proven_optimal);
                assert!((res.objective - want).abs() <= 1e-7 * (1.0 + want.abs()), "seed {seed}");
                assert!(res.root_bound <= res.objective + 1e-7 * (1.0 + want.abs()));
                let sum: f64 = res.x.iter().map(|&k| costs[k]).sum();
                assert!((sum - res.objective).abs() <= 1e-9 * (1.0 + sum.abs()));
            }
            Err(Error::Infeasible(_)) => assert!(want.is_none(), "seed {seed}"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn optimal_ratio_gives_zero_parametric_value() {
    for seed in 0..12 {
        let inst = random_feasible_instance(1100 + seed, kind(seed), 6);
        let (z, _) = BruteForce::new(&inst).optimum().unwrap();
        let routes = enumerate_elementary_routes(&inst);
        // Scaled by the denominator, the costs are integers.
        let costs: Vec<f64> =
            routes.iter().map(|l| (z.den() * l.cost - z.num() * l.working_time) as f64).collect();
        let p = MipParams {
            integral_costs: true,
            ..params(&inst)
        };
        let res = solve_fp(&inst, &routes, &costs, &p, None).unwrap();
        assert_eq!(res.objective, 0.0, "seed {seed}");
        assert!(res.proven_optimal);
    }
}

#[test]
fn warm_start_survives_a_zero_time_limit() {
    let inst = random_feasible_instance(77, ObjectiveKind::CostOverLoad, 6);
    let routes = enumerate_elementary_routes(&inst);
    let costs: Vec<f64> = routes.iter().map(|l| l.cost as f64).collect();
    // Singletons for every customer form a feasible, usually poor, selection.
    let warm: Vec<usize> = inst
        .customers()
        .filter(|&v| inst.is_mandatory(v))
        .map(|v| routes.iter().position(|r| r.customers() == [v]).unwrap())
        .collect();
    let p = MipParams {
        m_min: 1,
        m_max: inst.m.max(warm.len()),
        time_limit: 0.0,
        integral_costs: false,
    };
    let res = solve_fp(&inst, &routes, &costs, &p, Some(&warm)).unwrap();
    let mut sorted = warm.clone();
    sorted.sort_unstable();
    assert_eq!(res.x, sorted);
    assert_eq!(res.nodes, 0);
    let best = oracle(&inst, &routes, &costs, 1, p.m_max).unwrap();
    assert_eq!(res.proven_optimal, res.objective <= best + 1e-9);
}

#[test]
fn deterministic() {
    let inst = random_feasible_instance(88, ObjectiveKind::ProfitOverTime, 6);
    let routes = enumerate_elementary_routes(&inst);
    let costs: Vec<f64> = routes.iter().map(|l| l.cost as f64 + 0.3 * l.working_time as f64).collect();
    let a = solve_fp(&inst, &routes, &costs, &params(&inst), None).unwrap();
    let b = solve_fp(&inst, &routes, &costs, &params(&inst), None).unwrap();
    assert_eq!((a.x, a.nodes), (b.x, b.nodes));
}
