use fracvrp::bounds::{
    cb_g_recursion, ccf_duals_to_mu, ccf_program, ncf_duals_to_v, ncf_program, run_cb, run_cg, run_da, run_dk,
    theorem1_evaluate, theorem2_transform, CbParams, CgParams, DaParams,
};
use fracvrp::brute::{enumerate_elementary_routes, BruteForce};
use fracvrp::gen::random_feasible_instance;
use fracvrp::lp::{solve_lp, LpStatus};
use fracvrp::matrix::Matrix;
use fracvrp::ngpath::{default_ng_sets, phi_table, NgStateSpace};
use fracvrp::{Instance, ObjectiveKind, Route};

fn kind(seed: u64) -> ObjectiveKind {
    if seed.is_multiple_of(2) {
        ObjectiveKind::CostOverLoad
    } else {
        ObjectiveKind::ProfitOverTime
    }
}

fn space(inst: &Instance) -> NgStateSpace {
    NgStateSpace::forward(inst, &default_ng_sets(inst, 8))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn bounds_are_ordered_and_valid() {
    for seed in 0..24 {
        let inst = random_feasible_instance(seed, kind(seed), 6);
        let z = BruteForce::new(&inst).optimum().unwrap().0.to_f64();
        let sp = space(&inst);
        let cg = run_cg(&inst, &sp, &CgParams::default()).unwrap();
        let dk = run_dk(&inst, &sp, &CgParams::default()).unwrap();
        let da = run_da(&inst, &sp, &DaParams::default()).unwrap();
        let cb = run_cb(&inst, &sp, &CbParams::default()).unwrap();
        assert!(close(cg.dual_bound, dk.dual_bound, 1e-6), "seed {seed}: cg {} dk {}", cg.dual_bound, dk.dual_bound);
        assert!(da.dual_bound <= cg.dual_bound + 1e-6, "seed {seed}: da {} cg {}", da.dual_bound, cg.dual_bound);
        for b in [&cg, &dk, &da, &cb] {
            assert!(b.dual_bound <= z + 1e-6 * (1.0 + z.abs()), "seed {seed}: {} {} > {z}", b.name, b.dual_bound);
            if let Some(p) = &b.primal {
                assert!(p.value.to_f64() >= z - 1e-12, "seed {seed}: {} primal below optimum", b.name);
            }
        }
    }
}

#[test]
fn single_customer_bounds_are_exact() {
    let inst = Instance {
        name: "one".into(),
        n1: 1,
        n2: 0,
        service: vec![0, 4],
        cost: Matrix::from_vec(2, vec![0, 9, 5, 0]),
        time: Matrix::from_vec(2, vec![0, 1, 2, 0]),
        m: 2,
        max_time: 10,
        objective: ObjectiveKind::CostOverLoad,
    };
    let z = 14.0 / 7.0;
    let sp = space(&inst);
    for b in [
        run_cg(&inst, &sp, &CgParams::default()).unwrap(),
        run_dk(&inst, &sp, &CgParams::default()).unwrap(),
        run_da(&inst, &sp, &DaParams::default()).unwrap(),
        run_cb(&inst, &sp, &CbParams::default()).unwrap(),
    ] {
        assert!(close(b.dual_bound, z, 1e-6), "{}: {}", b.name, b.dual_bound);
        assert_eq!(b.primal.unwrap().value.to_f64(), z);
    }
}

#[test]
fn mapped_duals_are_feasible_on_every_route() {
    for seed in 0..20 {
        let inst = random_feasible_instance(100 + seed, kind(seed), 5);
        let sp = space(&inst);
        let da = run_da(&inst, &sp, &DaParams::default()).unwrap();
        let d = da.duals.expect("dual ascent returns duals");
        let (mu, omega) = theorem2_transform(&inst, &d.v, inst.beta() as f64);
        assert!(close(omega, d.value, 1e-12));
        let c0: f64 = inst.customers().map(|i| mu[i]).sum::<f64>() + inst.m as f64 * mu[0];
        assert!(c0.abs() <= 1e-7 * (1.0 + omega.abs()));
        for r in enumerate_elementary_routes(&inst) {
            let lhs: f64 = r.customers().iter().map(|&v| mu[v]).sum::<f64>() + mu[0] + r.working_time as f64 * omega;
            assert!(lhs <= r.cost as f64 + 1e-6 * (1.0 + r.cost.abs() as f64), "seed {seed}: {:?}", r.vertices);
        }
    }
}

#[test]
fn penalty_evaluation_on_full_enumeration_is_below_the_lp() {
    for seed in 0..20 {
        let inst = random_feasible_instance(200 + seed, kind(seed), 5);
        let routes = enumerate_elementary_routes(&inst);
        let pi: Vec<f64> = inst.service.iter().map(|&s| s as f64).collect();
        let eval = theorem1_evaluate(&inst, &vec![0.0; inst.n_vertices()], &pi, &routes).unwrap();
        let lp = solve_lp(&ncf_program(&inst, &routes)).unwrap();
        assert_eq!(lp.status, LpStatus::Optimal);
        assert!(eval.value <= lp.objective + 1e-7 * (1.0 + lp.objective.abs()), "seed {seed}");
    }
}

#[test]
fn both_linearisations_agree() {
    for seed in 0..20 {
        let inst = random_feasible_instance(300 + seed, kind(seed), 6);
        let routes = enumerate_elementary_routes(&inst);
        let ncf = solve_lp(&ncf_program(&inst, &routes)).unwrap();
        let ccf = solve_lp(&ccf_program(&inst, &routes)).unwrap();
        assert_eq!(ncf.status, LpStatus::Optimal);
        assert_eq!(ccf.status, LpStatus::Optimal);
        assert!(close(ncf.objective, ccf.objective, 1e-7), "seed {seed}: {} vs {}", ncf.objective, ccf.objective);
        // Mapped NCF duals are optimal for the Charnes–Cooper dual.
        let v = ncf_duals_to_v(&inst, &ncf.duals);
        let (mu, omega) = theorem2_transform(&inst, &v, inst.beta() as f64);
        assert!(close(omega, ccf.objective, 1e-7));
        let (mu_c, _) = ccf_duals_to_mu(&inst, &ccf.duals);
        assert_eq!(mu.len(), inst.n_vertices());
        assert_eq!(mu_c.len(), inst.n_vertices());
    }
}

/// Least `Σ(c − λ)` over `k` disjoint elementary routes with total time `t`.
fn partition_oracle(routes: &[Route], lambda: &[f64], k: usize, t: i64) -> f64 {
    fn rec(routes: &[Route], lambda: &[f64], from: usize, used: u128, k: usize, t: i64, acc: f64, best: &mut f64) {
        if k == 0 {
            if t == 0 && acc < *best {
                *best = acc;
            }
            return;
        }
        for i in from..routes.len() {
            let r = &routes[i];
            if r.mask() & used != 0 || r.working_time > t {
                continue;
            }
            let val = r.cost as f64 - r.customers().iter().map(|&v| lambda[v]).sum::<f64>();
            rec(routes, lambda, i + 1, used | r.mask(), k - 1, t - r.working_time, acc + val, best);
        }
    }
    let mut best = f64::INFINITY;
    rec(routes, lambda, 0, 0, k, t, 0.0, &mut best);
    best
}

#[test]
fn g_recursion_bounds_exact_partitions() {
    for seed in 0..12 {
        let inst = random_feasible_instance(400 + seed, kind(seed), 5);
        let sp = space(&inst);
        let lambda: Vec<f64> = (0..inst.n_vertices()).map(|i| if i == 0 { 0.0 } else { ((i * 7 + seed as usize) % 5) as f64 - 2.0 }).collect();
        let (phi, _) = phi_table(&inst, &sp, &lambda);
        let g = cb_g_recursion(&inst, &phi, 1);
        let routes = enumerate_elementary_routes(&inst);
        for k in 1..=inst.m {
            for t in 1..=(k as i64 * inst.max_time) {
                let exact = partition_oracle(&routes, &lambda, k, t);
                let relaxed = g.last(k, t as usize);
                assert!(relaxed <= exact + 1e-9, "seed {seed} k {k} t {t}: {relaxed} > {exact}");
            }
        }
    }
}

#[test]
fn vehicle_window_contains_optimal_fleet_sizes() {
    for seed in 0..16 {
        let inst = random_feasible_instance(500 + seed, kind(seed), 6);
        let bf = BruteForce::new(&inst);
        let sp = space(&inst);
        let cb = run_cb(&inst, &sp, &CbParams::default()).unwrap();
        let (lo, hi) = (cb.m_min.unwrap(), cb.m_max.unwrap());
        assert!(lo <= hi && hi <= inst.m);
        for k in bf.optimal_vehicle_counts() {
            assert!(lo <= k && k <= hi, "seed {seed}: {k} outside [{lo}, {hi}]");
        }
    }
}
