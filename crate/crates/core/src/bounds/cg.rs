//! Column generation on the Charnes–Cooper linearisation, and the
//! parametric (Dinkelbach) alternative on the linear relaxation.

use std::collections::HashSet;
use std::time::Instant;

use log::debug;

use super::{lagrangian_heuristic, singleton_routes, BoundReport, DualSolution};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lp::{LinearProgram, LpStatus, Relation, Simplex};
use crate::model::Route;
use crate::ngpath::{price_ng_routes, NgStateSpace, PricingDuals};

#[derive(Clone, Debug)]
pub struct CgParams {
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Columns added per pricing round.
    pub pricing_limit: usize,
    /// Extra routes seeded into the master.
    pub initial_routes: Vec<Route>,
}

impl Default for CgParams {
    fn default() -> Self {
        Self {
            time_limit: 3600.0,
            pricing_limit: 200,
            initial_routes: Vec::new(),
        }
    }
}

/// Largest artificial cost tried before a master is declared infeasible.
const BIG_M_CAP: f64 = 1e15;

/// Initial cost of the artificial column that keeps a master feasible.
pub(crate) fn big_m(inst: &Instance) -> f64 {
    let dmax = (0..inst.n_vertices())
        .flat_map(|i| (0..inst.n_vertices()).map(move |j| (i, j)))
        .map(|(i, j)| inst.cost[(i, j)].abs())
        .max()
        .unwrap_or(0) as f64;
    let smax = inst.service.iter().copied().max().unwrap_or(0) as f64;
    10.0 * (1.0 + (inst.n() + 1) as f64 * dmax) * (1.0 + smax)
}

/// Lower bound from any duals with `μ_C ≤ 0`, `μ_0 ≤ 0`, given a lower
/// bound `rc_min` on every route's reduced cost.
fn lagrangian_bound(inst: &Instance, mu: &[f64], omega: f64, rc_min: f64) -> f64 {
    let c0 = inst.customers().map(|i| mu[i]).sum::<f64>() + inst.m as f64 * mu[0];
    let num = c0 + inst.m as f64 * rc_min.min(0.0);
    omega + num.min(0.0) / inst.total_time_lower_bound() as f64
}

const ART_TOL: f64 = 1e-7;

struct Pool {
    seen: HashSet<Vec<usize>>,
    routes: Vec<Route>,
}

impl Pool {
    fn new() -> Self {
        Self {
            seen: HashSet::new(),
            routes: Vec::new(),
        }
    }

    fn insert(&mut self, r: Route) -> Option<&Route> {
        if self.seen.insert(r.vertices.clone()) {
            self.routes.push(r);
            self.routes.last()
        } else {
            None
        }
    }
}

fn seed_routes(inst: &Instance, extra: &[Route]) -> Vec<Route> {
    let mut out = singleton_routes(inst);
    out.extend(extra.iter().filter(|r| r.working_time <= inst.max_time).cloned());
    out
}

/// Column generation over ng-routes on the Charnes–Cooper master.
pub fn run_cg(inst: &Instance, space: &NgStateSpace, params: &CgParams) -> Result<BoundReport> {
    let start = Instant::now();
    let n = inst.n();
    let mut big = big_m(inst);
    // Variable 0 is u; then one artificial per mandatory customer.
    let mut p = LinearProgram::new(1);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 2];
    for row in rows.iter_mut().take(n) {
        row.push((0, -1.0));
    }
    rows[n].push((0, -(inst.m as f64)));
    for i in inst.mandatory() {
        let a = p.add_var(big);
        rows[i - 1].push((a, 1.0));
        rows[n + 1].push((a, inst.service[i] as f64));
    }
    for (k, coefs) in rows.into_iter().enumerate() {
        let (rel, rhs) = if k == n + 1 {
            (Relation::Eq, 1.0)
        } else if k == n || inst.is_optional(k + 1) {
            (Relation::Le, 0.0)
        } else {
            (Relation::Eq, 0.0)
        };
        p.add_row(coefs, rel, rhs);
    }
    let n_art = inst.n1;
    let mut lp = Simplex::new(&p)?;
    let mut pool = Pool::new();
    let add = |lp: &mut Simplex, r: &Route| {
        let mut coefs: Vec<(usize, f64)> = r.customers().iter().map(|&v| (v - 1, 1.0)).collect();
        coefs.push((n, 1.0));
        coefs.push((n + 1, r.working_time as f64));
        lp.add_column(r.cost as f64, &coefs);
    };
    for r in seed_routes(inst, &params.initial_routes) {
        if let Some(r) = pool.insert(r) {
            add(&mut lp, r);
        }
    }

    let mut report = BoundReport::new("CG", start);
    let mut best_bound = f64::NEG_INFINITY;
    let mut last;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let res = lp.solve();
        if res.status != LpStatus::Optimal {
            return Err(Error::Infeasible("master problem has no feasible solution".into()));
        }
        let (mu, omega) = super::ccf_duals_to_mu(inst, &res.duals);
        let cutoff = -1e-7 * (1.0 + res.objective.abs());
        let priced = price_ng_routes(inst, space, &PricingDuals::Ccf { mu: &mu, omega }, cutoff, params.pricing_limit);
        let rc_min = priced.first().map_or(cutoff, |p| p.0.min(cutoff));
        best_bound = best_bound.max(lagrangian_bound(inst, &mu, omega, rc_min));
        debug!("cg iter {iterations}: obj {:.6} priced {} bound {best_bound:.6}", res.objective, priced.len());
        last = (mu, omega, res.x.clone(), res.objective);
        let mut added = 0;
        for (_, r) in priced {
            if let Some(r) = pool.insert(r) {
                add(&mut lp, r);
                added += 1;
            }
        }
        if added == 0 {
            if last.2[1..=n_art].iter().all(|&a| a <= ART_TOL) {
                converged = true;
                break;
            }
            if big >= BIG_M_CAP {
                return Err(Error::Infeasible("no route set covers every mandatory customer".into()));
            }
            big *= 1e3;
            for a in 1..=n_art {
                lp.set_cost(a, big);
            }
            continue;
        }
        if start.elapsed().as_secs_f64() > params.time_limit {
            break;
        }
    }
    let (mu, omega, _, objective) = last;
    if converged {
        best_bound = best_bound.max(objective.min(omega));
    }
    report.dual_bound = best_bound;
    report.duals = Some(DualSolution {
        v: Vec::new(),
        mu,
        omega,
        beta: inst.beta() as f64,
        value: objective,
    });
    report.primal = lagrangian_heuristic(inst, &pool.routes);
    report.column_count = pool.routes.len();
    report.iterations = iterations;
    report.elapsed = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Parametric bound: Dinkelbach iterations on the linear relaxation, each
/// solved by column generation with costs `c − r·w`.
pub fn run_dk(inst: &Instance, space: &NgStateSpace, params: &CgParams) -> Result<BoundReport> {
    let start = Instant::now();
    let n = inst.n();
    let mut big = big_m(inst);
    let mut p = LinearProgram::new(0);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
    let mut art_w = Vec::new();
    for i in inst.mandatory() {
        let a = p.add_var(big);
        rows[i - 1].push((a, 1.0));
        art_w.push(inst.service[i] as f64);
    }
    for (k, coefs) in rows.into_iter().enumerate() {
        let (rel, rhs) = if k == n {
            (Relation::Le, inst.m as f64)
        } else if inst.is_optional(k + 1) {
            (Relation::Le, 1.0)
        } else {
            (Relation::Eq, 1.0)
        };
        p.add_row(coefs, rel, rhs);
    }
    let mut lp = Simplex::new(&p)?;
    let mut pool = Pool::new();
    let mut cols: Vec<(f64, f64)> = art_w.iter().map(|&w| (big, w)).collect();
    let seeds = seed_routes(inst, &params.initial_routes);
    let primal = lagrangian_heuristic(inst, &seeds);
    let dmax = (0..inst.n_vertices())
        .flat_map(|i| (0..inst.n_vertices()).map(move |j| (i, j)))
        .map(|(i, j)| inst.cost[(i, j)].abs())
        .max()
        .unwrap_or(0) as f64;
    let mut r = primal.as_ref().map_or((inst.n() + 1) as f64 * dmax, |s| s.value.to_f64());
    let add = |lp: &mut Simplex, cols: &mut Vec<(f64, f64)>, route: &Route, r: f64| {
        let mut coefs: Vec<(usize, f64)> = route.customers().iter().map(|&v| (v - 1, 1.0)).collect();
        coefs.push((n, 1.0));
        let (c, w) = (route.cost as f64, route.working_time as f64);
        lp.add_column(c - r * w, &coefs);
        cols.push((c, w));
    };
    for route in seeds {
        if let Some(route) = pool.insert(route) {
            add(&mut lp, &mut cols, route, r);
        }
    }

    let tbar = inst.total_time_lower_bound() as f64;
    let mut report = BoundReport::new("DK", start);
    let mut outer = 0;
    let mut best_bound = f64::NEG_INFINITY;
    let mut last_duals;
    loop {
        outer += 1;
        for (j, &(c, w)) in cols.iter().enumerate() {
            lp.set_cost(j, c - r * w);
        }
        // Column generation for the current parameter.
        let (x, value, converged) = loop {
            let res = lp.solve();
            if res.status != LpStatus::Optimal {
                return Err(Error::Infeasible("master problem has no feasible solution".into()));
            }
            let mut mu = vec![0.0; n + 1];
            mu[0] = res.duals[n];
            mu[1..=n].copy_from_slice(&res.duals[..n]);
            let cutoff = -1e-7 * (1.0 + res.objective.abs());
            let priced = price_ng_routes(inst, space, &PricingDuals::Ccf { mu: &mu, omega: r }, cutoff, params.pricing_limit);
            last_duals = (mu, r);
            let mut added = 0;
            for (_, route) in priced {
                if let Some(route) = pool.insert(route) {
                    add(&mut lp, &mut cols, route, r);
                    added += 1;
                }
            }
            if added == 0 {
                if res.x[..art_w.len()].iter().all(|&a| a <= ART_TOL) {
                    break (res.x, res.objective, true);
                }
                if big >= BIG_M_CAP {
                    return Err(Error::Infeasible("no route set covers every mandatory customer".into()));
                }
                big *= 1e3;
                for (j, &w) in art_w.iter().enumerate() {
                    cols[j].0 = big;
                    lp.set_cost(j, big - r * w);
                }
                continue;
            }
            if start.elapsed().as_secs_f64() > params.time_limit {
                break (res.x, res.objective, false);
            }
        };
        if !converged {
            break;
        }
        // For any solution, Σc − rΣw ≥ value, so its ratio is at least r + min(value, 0)/T̄.
        best_bound = best_bound.max(r + value.min(0.0) / tbar);
        let tol = 1e-9 * (1.0 + r.abs());
        debug!("dk iter {outer}: r {r:.9} value {value:.3e}");
        if value >= -tol {
            break;
        }
        let (c, w) = x.iter().zip(&cols).fold((0.0, 0.0), |acc, (&xj, &(c, w))| (acc.0 + xj * c, acc.1 + xj * w));
        let next = c / w;
        if !(next < r) {
            break;
        }
        r = next;
        if start.elapsed().as_secs_f64() > params.time_limit {
            break;
        }
    }
    report.dual_bound = best_bound;
    let (mu, omega) = last_duals;
    report.duals = Some(DualSolution {
        v: Vec::new(),
        mu,
        omega,
        beta: inst.beta() as f64,
        value: best_bound,
    });
    report.primal = lagrangian_heuristic(inst, &pool.routes).or(primal);
    report.column_count = pool.routes.len();
    report.iterations = outer;
    report.elapsed = start.elapsed().as_secs_f64();
    Ok(report)
}
