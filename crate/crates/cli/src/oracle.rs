//! Cross-checks on random instances small enough for exhaustive enumeration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Args;
use rayon::prelude::*;

use fracvrp::bounds::{run_cb, run_cg, run_da, run_dk, CbParams, CgParams, DaParams, DualSolution};
use fracvrp::brute::{enumerate_elementary_routes, BruteForce};
use fracvrp::exact::{solve_exact, ExactParams, ExactStatus};
use fracvrp::gen::random_feasible_instance;
use fracvrp::genr::{generate_reduced_set, GenrParams, Threshold};
use fracvrp::ngpath::{default_ng_sets, price_ng_routes, NgStateSpace, PricingDuals};
use fracvrp::{Instance, ObjectiveKind};

use crate::emit;

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Largest number of customers.
    #[arg(long, default_value_t = 7)]
    max_n: usize,
    /// Report file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corrupts every solver answer to exercise the mismatch report.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial)
}

fn check(inst: &Instance, inject_fault: bool) -> std::result::Result<(), String> {
    let bf = BruteForce::new(inst);
    let (z, _) = bf.optimum().ok_or("brute force found no solution")?;
    let zf = z.to_f64();
    let tol = 1e-6 * (1.0 + zf.abs());

    let res = solve_exact(inst, &ExactParams::default()).map_err(|e| format!("solve_exact: {e}"))?;
    let got = if inject_fault { fracvrp::Ratio::new(res.value.num() + 1, res.value.den()) } else { res.value };
    if got != z {
        return Err(format!("solve_exact returned {got}, enumeration gives {z}"));
    }
    if res.status != ExactStatus::Optimal {
        return Err(format!("status {}", res.status.as_str()));
    }
    for k in bf.optimal_vehicle_counts() {
        if !(res.m_min..=res.m_max).contains(&k) {
            return Err(format!("optimal fleet size {k} outside [{}, {}]", res.m_min, res.m_max));
        }
    }

    let space = NgStateSpace::forward(inst, &default_ng_sets(inst, 8));
    let err = |e: fracvrp::Error| e.to_string();
    let cg = run_cg(inst, &space, &CgParams::default()).map_err(err)?.dual_bound;
    let dk = run_dk(inst, &space, &CgParams::default()).map_err(err)?.dual_bound;
    let da = run_da(inst, &space, &DaParams::default()).map_err(err)?.dual_bound;
    let cb = run_cb(inst, &space, &CbParams::default()).map_err(err)?.dual_bound;
    if (cg - dk).abs() > tol || da > cg + tol {
        return Err(format!("bound order broken: CG {cg} DK {dk} DA {da}"));
    }
    if [cg, dk, da, cb].iter().any(|&b| b > zf + tol) {
        return Err(format!("a bound exceeds the optimum {zf}: CG {cg} DK {dk} DA {da} CB {cb}"));
    }

    let all = enumerate_elementary_routes(inst);
    let zero = DualSolution {
        v: Vec::new(),
        mu: vec![0.0; inst.n_vertices()],
        omega: 0.0,
        beta: 1.0,
        value: 0.0,
    };
    let unlimited = GenrParams {
        delta_max: usize::MAX,
        nstatb: usize::MAX,
        dominance: false,
        ..GenrParams::default()
    };
    let set = generate_reduced_set(inst, &zero, Threshold::Unbounded, &unlimited);
    let got: HashSet<&Vec<usize>> = set.routes.iter().map(|r| &r.vertices).collect();
    let want: HashSet<&Vec<usize>> = all.iter().map(|r| &r.vertices).collect();
    if got != want || set.len() != all.len() {
        return Err(format!("route generation gave {} routes, enumeration {}", set.len(), all.len()));
    }

    let duals = res.da.duals.clone().ok_or("dual ascent returned no duals")?;
    let floor = price_ng_routes(
        inst,
        &space,
        &PricingDuals::Ccf {
            mu: &duals.mu,
            omega: duals.omega,
        },
        f64::INFINITY,
        1,
    );
    let threshold = Threshold::Gap {
        z_star: zf,
        dual_bound: duals.omega,
        c_bar_0: duals.c_bar_0(inst),
        m_max: res.m_max,
        rc_floor: floor.first().map_or(0.0, |p| p.0).min(0.0),
    };
    for dominance in [false, true] {
        let set = generate_reduced_set(inst, &duals, threshold, &GenrParams { dominance, ..GenrParams::default() });
        let kept: HashSet<&Vec<usize>> = set.routes.iter().map(|r| &r.vertices).collect();
        if let Some(r) = bf.optimal_routes().iter().find(|r| !kept.contains(r)) {
            return Err(format!("optimal route {r:?} pruned (dominance {dominance})"));
        }
    }
    Ok(())
}

pub fn cmd_oracle_check(args: &OracleArgs) -> Result<ExitCode> {
    let outcomes: Vec<(u64, u64, Instance, std::result::Result<(), String>)> = (0..args.trials)
        .into_par_iter()
        .map(|k| {
            let kind = if k % 2 == 0 { ObjectiveKind::CostOverLoad } else { ObjectiveKind::ProfitOverTime };
            let seed = trial_seed(args.seed, k);
            let inst = random_feasible_instance(seed, kind, args.max_n.max(1));
            let verdict = check(&inst, args.inject_fault);
            (k, seed, inst, verdict)
        })
        .collect();
    let mut report = String::new();
    let mut failures = 0;
    for (k, seed, inst, verdict) in &outcomes {
        let head = format!("trial {k} seed {seed} {} n={}", inst.objective.as_str(), inst.n());
        match verdict {
            Ok(()) => {
                let _ = writeln!(report, "{head}: ok");
            }
            Err(msg) => {
                failures += 1;
                let _ = writeln!(report, "{head}: MISMATCH {msg}");
                let _ = write!(report, "COUNTEREXAMPLE\n{}END\n", inst.to_text());
            }
        }
    }
    let _ = writeln!(report, "passed {} of {}", outcomes.len() - failures, outcomes.len());
    emit(&args.out, &report)?;
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
