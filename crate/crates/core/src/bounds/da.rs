//! Dual ascent on the normalised formulation.
//!
//! Penalties `λ` define a feasible dual `v` in closed form over a core of
//! routes. Pricing grows the core until `v` is feasible for every ng-route,
//! and a supergradient step then moves `λ`.

use std::time::Instant;

use log::debug;

use super::{lagrangian_heuristic, ncf_column, singleton_routes, BoundReport, DualSolution};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::model::{Ratio, Route, Solution};
use crate::ngpath::{price_ng_routes, NgStateSpace, PricingDuals};

#[derive(Clone, Debug)]
pub struct DaParams {
    pub max_iterations: usize,
    pub time_limit: f64,
    /// Non-improving iterations before the step multiplier is halved.
    pub patience: usize,
    pub initial_step: f64,
    pub pricing_limit: usize,
    /// Routes added to the initial core.
    pub initial_routes: Vec<Route>,
    /// Known primal value, used as the step target when better than our own.
    pub upper_bound: Option<Ratio>,
}

impl Default for DaParams {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            time_limit: 100.0,
            patience: 20,
            initial_step: 1.0,
            pricing_limit: 200,
            initial_routes: Vec::new(),
            upper_bound: None,
        }
    }
}

/// Closed-form dual for given penalties.
#[derive(Clone, Debug)]
pub struct Theorem1Eval {
    /// Dual vector, fleet row first.
    pub v: Vec<f64>,
    /// Dual objective with right-hand sides `(1, …, 1, m)`.
    pub value: f64,
    /// For each mandatory customer, the core route attaining its minimum.
    pub argmin: Vec<Option<usize>>,
}

struct CoreColumn {
    abar: Vec<f64>,
    bbar: f64,
    cost: f64,
}

impl CoreColumn {
    fn new(inst: &Instance, r: &Route) -> Self {
        let (abar, bbar) = ncf_column(inst, r);
        Self {
            abar,
            bbar,
            cost: r.cost as f64,
        }
    }
}

fn evaluate(inst: &Instance, core: &[CoreColumn], lambda: &[f64], pi: &[f64]) -> Result<Theorem1Eval> {
    let nv = inst.n_vertices();
    let mut best = vec![f64::INFINITY; nv];
    let mut argmin = vec![None; nv];
    for (l, col) in core.iter().enumerate() {
        let mut reduced = col.cost - col.bbar * lambda[0];
        let mut weight = 0.0;
        for i in inst.customers() {
            reduced -= col.abar[i] * lambda[i];
            if inst.is_mandatory(i) {
                weight += col.abar[i] * pi[i];
            }
        }
        if weight <= 0.0 {
            continue;
        }
        let rho = reduced / weight;
        for i in inst.mandatory() {
            if col.abar[i] > 0.0 && rho < best[i] {
                best[i] = rho;
                argmin[i] = Some(l);
            }
        }
    }
    let mut v = lambda.to_vec();
    for i in inst.mandatory() {
        if argmin[i].is_none() {
            return Err(Error::IncompleteCore(i));
        }
        v[i] += pi[i] * best[i];
    }
    let value = inst.customers().map(|i| v[i]).sum::<f64>() + inst.m as f64 * v[0];
    Ok(Theorem1Eval { v, value, argmin })
}

/// Evaluates the closed-form dual for penalties `lambda` and weights `pi`
/// (both indexed by vertex, `lambda[0]` is the fleet penalty) over `core`.
pub fn theorem1_evaluate(inst: &Instance, lambda: &[f64], pi: &[f64], core: &[Route]) -> Result<Theorem1Eval> {
    let cols: Vec<CoreColumn> = core.iter().map(|r| CoreColumn::new(inst, r)).collect();
    evaluate(inst, &cols, lambda, pi)
}

/// Supergradient of the dual objective at `eval`.
fn supergradient(inst: &Instance, core: &[CoreColumn], eval: &Theorem1Eval, pi: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; core.len()];
    for i in inst.mandatory() {
        if let Some(l) = eval.argmin[i] {
            x[l] += pi[i];
        }
    }
    for (l, col) in core.iter().enumerate() {
        if x[l] > 0.0 {
            let weight: f64 = inst.mandatory().map(|i| col.abar[i] * pi[i]).sum();
            x[l] /= weight;
        }
    }
    let mut g = vec![0.0; inst.n_vertices()];
    g[0] = inst.m as f64;
    for i in inst.customers() {
        g[i] = 1.0;
    }
    for (l, col) in core.iter().enumerate() {
        if x[l] == 0.0 {
            continue;
        }
        for i in inst.customers() {
            g[i] -= col.abar[i] * x[l];
        }
        g[0] -= col.bbar * x[l];
    }
    g
}

/// Dual ascent with ng-route pricing.
pub fn run_da(inst: &Instance, space: &NgStateSpace, params: &DaParams) -> Result<BoundReport> {
    let start = Instant::now();
    let nv = inst.n_vertices();
    let beta = inst.beta() as f64;
    let pi: Vec<f64> = inst.service.iter().map(|&s| s as f64).collect();
    let tbar = inst.total_time_lower_bound() as f64;

    let mut routes: Vec<Route> = singleton_routes(inst);
    routes.extend(params.initial_routes.iter().filter(|r| r.working_time <= inst.max_time).cloned());
    let mut seen: std::collections::HashSet<Vec<usize>> = routes.iter().map(|r| r.vertices.clone()).collect();
    let mut core: Vec<CoreColumn> = routes.iter().map(|r| CoreColumn::new(inst, r)).collect();

    let mut primal: Option<Solution> = lagrangian_heuristic(inst, &routes);
    let target = |primal: &Option<Solution>| -> Option<f64> {
        let own = primal.as_ref().map(|s| s.value);
        match (own, params.upper_bound) {
            (Some(a), Some(b)) => Some(a.min(b).to_f64()),
            (a, b) => a.or(b).map(Ratio::to_f64),
        }
    };

    let mut lambda = vec![0.0; nv];
    let mut step = params.initial_step;
    let mut best_bound = f64::NEG_INFINITY;
    let mut best_v: Option<Vec<f64>> = None;
    let mut stale = 0;
    let mut iterations = 0;
    let mut last_heuristic = 0;
    while iterations < params.max_iterations && start.elapsed().as_secs_f64() < params.time_limit {
        iterations += 1;
        // Grow the core until no ng-route prices out.
        let eval = loop {
            let eval = evaluate(inst, &core, &lambda, &pi)?;
            let cutoff = -1e-7 * (1.0 + eval.value.abs());
            let priced = price_ng_routes(
                inst,
                space,
                &PricingDuals::Ncf { v: &eval.v, beta },
                cutoff,
                params.pricing_limit,
            );
            let rc_min = priced.first().map_or(cutoff, |p| p.0.min(cutoff));
            // The mapped duals have c̄_0 = 0 and the same reduced costs.
            let bound = eval.value + inst.m as f64 * rc_min / tbar;
            if bound > best_bound {
                if bound > best_bound + 1e-9 * (1.0 + best_bound.abs()) {
                    stale = 0;
                }
                best_bound = bound;
                best_v = Some(eval.v.clone());
            }
            let mut added = 0;
            for (_, r) in priced {
                if seen.insert(r.vertices.clone()) {
                    core.push(CoreColumn::new(inst, &r));
                    routes.push(r);
                    added += 1;
                }
            }
            if added == 0 || start.elapsed().as_secs_f64() >= params.time_limit {
                break eval;
            }
        };
        stale += 1;
        if stale > params.patience {
            step *= 0.5;
            stale = 0;
        }
        if iterations - last_heuristic >= 10 || iterations == 1 {
            last_heuristic = iterations;
            if let Some(sol) = lagrangian_heuristic(inst, &routes) {
                if primal.as_ref().is_none_or(|p| sol.value < p.value) {
                    primal = Some(sol);
                }
            }
        }

        let g = supergradient(inst, &core, &eval, &pi);
        let norm2: f64 = g.iter().map(|x| x * x).sum();
        if norm2 < 1e-18 {
            break;
        }
        let ub = target(&primal).unwrap_or(eval.value + eval.value.abs() * 0.1 + 1.0);
        let ub_hat = ub + 0.02 * ub.abs();
        let gap = (ub_hat - eval.value).max(0.0);
        if gap <= 0.0 {
            break;
        }
        let t = step * gap / norm2;
        for i in 0..nv {
            lambda[i] += t * g[i];
            if i == 0 || inst.is_optional(i) {
                lambda[i] = lambda[i].min(0.0);
            }
        }
        debug!("da iter {iterations}: z {:.6} best {best_bound:.6} step {step}", eval.value);
    }
    if let Some(sol) = lagrangian_heuristic(inst, &routes) {
        if primal.as_ref().is_none_or(|p| sol.value < p.value) {
            primal = Some(sol);
        }
    }

    let mut report = BoundReport::new("DA", start);
    report.dual_bound = best_bound;
    report.duals = best_v.map(|v| DualSolution::from_ncf(inst, v));
    report.primal = primal;
    report.column_count = core.len();
    report.iterations = iterations;
    report.elapsed = start.elapsed().as_secs_f64();
    Ok(report)
}
