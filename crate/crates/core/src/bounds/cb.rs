//! Bound from the integer relaxation with fixed total time and fleet size.
//!
//! For penalties `λ`, `g_i(t, k)` is the least penalised cost of `k`
//! ng-routes ending at distinct customers among `1..=i` with total working
//! time `t`. Dividing by `t` bounds every solution with that time and size.

use std::time::Instant;

use log::debug;

use super::{lagrangian_heuristic, singleton_routes, BoundReport};
use crate::instance::Instance;
use crate::model::{evaluate_sequence, Ratio, Route, Solution};
use crate::ngpath::{penalised_costs, phi_from_labels, NgStateSpace, PhiTable};

#[derive(Clone, Debug)]
pub struct CbParams {
    pub max_iterations: usize,
    pub epsilon: f64,
    pub time_limit: f64,
    /// Known primal value; the own heuristic is used when absent or worse.
    pub upper_bound: Option<Ratio>,
}

impl Default for CbParams {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            epsilon: 1.0,
            time_limit: 3600.0,
            upper_bound: None,
        }
    }
}

/// The tables `g_i(t, k)` for `i = 0..=n`, `k = 0..=m`, `t = 0..=mT`.
#[derive(Clone, Debug)]
pub struct GTable {
    n: usize,
    m: usize,
    width: usize,
    g: Vec<f64>,
}

impl GTable {
    fn idx(&self, i: usize, k: usize, t: usize) -> usize {
        (i * (self.m + 1) + k) * self.width + t
    }

    pub fn get(&self, i: usize, k: usize, t: usize) -> f64 {
        self.g[self.idx(i, k, t)]
    }

    /// `g_n(t, k)`.
    pub fn last(&self, k: usize, t: usize) -> f64 {
        self.get(self.n, k, t)
    }

    pub fn max_total_time(&self) -> usize {
        self.width - 1
    }

    /// `(customer, route time)` pairs of a solution attaining `g_n(t, k)`.
    pub fn backtrack(&self, phi: &PhiTable, k: usize, t: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let (mut k, mut t) = (k, t);
        let mut i = self.n;
        while k > 0 && i > 0 {
            let here = self.get(i, k, t);
            if !here.is_finite() {
                break;
            }
            if here == self.get(i - 1, k, t) {
                i -= 1;
                continue;
            }
            let tmax = phi.max_time().min(t);
            let found = (1..=tmax).find(|&tp| {
                let prev = self.get(i - 1, k - 1, t - tp);
                prev.is_finite() && prev + phi.get(i, tp) == here
            });
            let Some(tp) = found else { break };
            out.push((i, tp));
            k -= 1;
            t -= tp;
            i -= 1;
        }
        out
    }
}

/// Runs the recursion on `phi`, ignoring route times below
/// `max(1, T̄ − (m − 1)T)`, which no solution can use.
pub fn cb_g_recursion(inst: &Instance, phi: &PhiTable, tbar: i64) -> GTable {
    let n = inst.n();
    let m = inst.m;
    let tcap = inst.max_time as usize;
    let width = m * tcap + 1;
    let floor = (tbar - (m as i64 - 1) * inst.max_time).max(1) as usize;
    let mut table = GTable {
        n,
        m,
        width,
        g: vec![f64::INFINITY; (n + 1) * (m + 1) * width],
    };
    table.g[0] = 0.0;
    for i in 1..=n {
        let support: Vec<(usize, f64)> =
            (floor..=tcap).map(|t| (t, phi.get(i, t))).filter(|e| e.1.is_finite()).collect();
        let (before, after) = table.g.split_at_mut(i * (m + 1) * width);
        let prev = &before[(i - 1) * (m + 1) * width..];
        let cur = &mut after[..(m + 1) * width];
        cur.copy_from_slice(prev);
        for k in 1..=m {
            let lim = (k * tcap).min(width - 1);
            for t in 1..=lim {
                let mut best = cur[k * width + t];
                for &(tp, val) in &support {
                    if tp > t {
                        break;
                    }
                    let base = prev[(k - 1) * width + t - tp];
                    if base + val < best {
                        best = base + val;
                    }
                }
                cur[k * width + t] = best;
            }
        }
    }
    table
}

/// Subgradient optimisation of the integer-relaxation bound.
pub fn run_cb(inst: &Instance, space: &NgStateSpace, params: &CbParams) -> crate::Result<BoundReport> {
    let start = Instant::now();
    let n = inst.n();
    let m = inst.m;
    let tcap = inst.max_time as usize;
    let tbar = inst.total_time_lower_bound().max(1);
    let tlo = tbar as usize;
    let thi = m * tcap;

    let mut lambda = vec![0.0; n + 1];
    let width = thi + 1;
    // Running maxima DB(t̄, m̄).
    let mut db = vec![f64::NEG_INFINITY; (m + 1) * width];
    let mut pool: Vec<Route> = singleton_routes(inst);
    let mut seen: std::collections::HashSet<Vec<usize>> = pool.iter().map(|r| r.vertices.clone()).collect();
    let mut primal: Option<Solution> = lagrangian_heuristic(inst, &pool);
    let mut best_bound = f64::NEG_INFINITY;
    let mut iterations = 0;

    while iterations < params.max_iterations && start.elapsed().as_secs_f64() < params.time_limit {
        iterations += 1;
        let arc = penalised_costs(inst, &lambda);
        let labels = space.label(&arc);
        let phi = phi_from_labels(inst, &labels, &arc);
        let g = cb_g_recursion(inst, &phi, tbar);
        let lsum: f64 = lambda[1..].iter().sum();

        let mut zstar = f64::INFINITY;
        let mut arg = None;
        let mut cur_best = f64::INFINITY;
        let mut cur_arg = None;
        for mb in 1..=m {
            for t in tlo..=(mb * tcap).min(thi) {
                if t.div_ceil(tcap) > mb {
                    continue;
                }
                let val = g.last(mb, t);
                let slot = &mut db[mb * width + t];
                if val.is_finite() {
                    let cur = (val + lsum) / t as f64;
                    *slot = slot.max(cur);
                    if cur < cur_best {
                        cur_best = cur;
                        cur_arg = Some((mb, t));
                    }
                } else {
                    *slot = f64::INFINITY;
                }
                if *slot < zstar {
                    zstar = *slot;
                    arg = Some((mb, t));
                }
            }
        }
        let improved = zstar > best_bound;
        best_bound = best_bound.max(zstar);

        // Solution for the subgradient: the one behind z*, or the current best.
        let target = match arg {
            Some((mb, t)) if g.last(mb, t).is_finite() => Some((mb, t)),
            _ => cur_arg,
        };
        let Some((mb, t)) = target else { break };
        let chosen = g.backtrack(&phi, mb, t);
        let mut theta = vec![0.0; n + 1];
        for &(i, tp) in &chosen {
            let s = phi.state(i, tp).expect("finite φ has a witness state");
            let seq = labels.route_sequence(s);
            let route = evaluate_sequence(inst, &seq).expect("ng-route within range");
            for &v in route.customers() {
                theta[v] += 1.0;
            }
            if route.elementary && seen.insert(route.vertices.clone()) {
                pool.push(route);
            }
        }
        if improved {
            if let Some(sol) = lagrangian_heuristic(inst, &pool) {
                if primal.as_ref().is_none_or(|p| sol.value < p.value) {
                    primal = Some(sol);
                }
            }
        }
        let norm2: f64 = theta[1..].iter().map(|&x| (x - 1.0) * (x - 1.0)).sum();
        debug!("cb iter {iterations}: z* {zstar:.6} routes {} |θ−1|² {norm2}", chosen.len());
        if norm2 == 0.0 || !zstar.is_finite() {
            break;
        }
        // z* is a ratio while λ is in cost units; T converts it to the cost of one full route.
        let gamma = (0.2 * zstar * inst.max_time as f64).abs() / norm2;
        for i in 1..=n {
            lambda[i] -= params.epsilon * gamma * (theta[i] - 1.0);
            if inst.is_optional(i) {
                lambda[i] = lambda[i].min(0.0);
            }
        }
    }

    let own = primal.as_ref().map(|s| s.value);
    let ub = match (own, params.upper_bound) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let mut by_vehicles = vec![f64::INFINITY; m + 1];
    for mb in 1..=m {
        for t in tlo..=(mb * tcap).min(thi) {
            if t.div_ceil(tcap) <= mb {
                by_vehicles[mb] = by_vehicles[mb].min(db[mb * width + t]);
            }
        }
    }
    let mut report = BoundReport::new("CB", start);
    if let Some(ub) = ub {
        let (lo, hi) = vehicle_window(&by_vehicles, ub.to_f64());
        report.m_min = lo;
        report.m_max = hi;
    }
    report.dual_bound = best_bound;
    report.primal = primal;
    report.db_by_vehicles = Some(by_vehicles);
    report.column_count = pool.len();
    report.iterations = iterations;
    report.elapsed = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Least and greatest fleet size whose bound does not exceed `ub`.
pub(crate) fn vehicle_window(by_vehicles: &[f64], ub: f64) -> (Option<usize>, Option<usize>) {
    let tol = 1e-9 * (1.0 + ub.abs());
    let ok: Vec<usize> = (1..by_vehicles.len()).filter(|&k| by_vehicles[k] <= ub + tol).collect();
    (ok.first().copied(), ok.last().copied())
}
