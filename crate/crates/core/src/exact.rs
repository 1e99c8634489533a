//! The exact method: bounds, route reduction, and an integer Dinkelbach
//! loop over the reduced set-partitioning problem.
//!
//! Each iteration enumerates the routes whose reduced cost is small enough
//! to matter, solves the reduced problem, and checks whether the routes left
//! out can still improve on the incumbent.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::bounds::{run_cb, run_da, vehicle_window, BoundReport, CbParams, DaParams, DualSolution};
use crate::error::{Error, Result};
use crate::genr::{generate_reduced_set, GenrParams, Saturation, Threshold};
use crate::instance::Instance;
use crate::mip::{solve_fp, MipParams};
use crate::model::{Ratio, Route, Solution};
use crate::ngpath::{default_ng_sets, price_ng_routes, NgStateSpace, PricingDuals};

pub use crate::genr::corollary1_threshold;

#[derive(Clone, Debug)]
pub struct ExactParams {
    pub itermax: usize,
    pub delta_max: usize,
    /// Time limit in seconds for each reduced problem.
    pub tlim: f64,
    /// Relative gap at which the method stops; `+∞` disables the test.
    pub gapmax: f64,
    /// Growth factor of `delta_max` between iterations.
    pub eps1: f64,
    /// Increase of `tlim` between iterations.
    pub eps2: f64,
    pub nstatb: usize,
    /// Neighbourhood size for route enumeration.
    pub ng_delta: usize,
    /// Neighbourhood size for pricing in the bounding procedures.
    pub pricing_ng: usize,
    pub dominance: bool,
    pub cb: CbParams,
    pub da: DaParams,
}

impl Default for ExactParams {
    fn default() -> Self {
        Self {
            itermax: 3,
            delta_max: 300_000,
            tlim: 3600.0,
            gapmax: f64::INFINITY,
            eps1: 5.0,
            eps2: 3600.0,
            nstatb: 200_000_000,
            ng_delta: 12,
            pricing_ng: 8,
            dominance: true,
            cb: CbParams::default(),
            da: DaParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExactStatus {
    Optimal,
    GapReached,
    IterLimit,
}

impl ExactStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ExactStatus::Optimal => "Optimal",
            ExactStatus::GapReached => "GapReached",
            ExactStatus::IterLimit => "IterLimit",
        }
    }
}

/// One pass of route generation and reduced solve.
#[derive(Clone, Debug, Serialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub delta_max: usize,
    pub tlim: f64,
    pub routes: usize,
    /// `N` when the frontier limit stopped enumeration, `D` for the route limit.
    pub saturation: Option<char>,
    pub gapmin: f64,
    /// Value of the reduced problem's solution, minimisation form.
    pub value: Option<Ratio>,
    pub ip_timeout: bool,
    pub dinkelbach_iterations: usize,
    pub db_new: f64,
    pub routes_optimal: bool,
    pub elapsed: f64,
}

#[derive(Clone, Debug)]
pub struct ExactResult {
    pub status: ExactStatus,
    pub solution: Solution,
    /// Best value, minimisation form.
    pub value: Ratio,
    /// Best certified lower bound, minimisation form.
    pub dual_bound: f64,
    pub cb: BoundReport,
    pub da: BoundReport,
    pub m_min: usize,
    pub m_max: usize,
    pub trace: Vec<IterationTrace>,
    pub elapsed: f64,
}

impl ExactResult {
    /// `100·x/z*` in the reporting orientation (the sign cancels).
    fn pct(&self, x: f64) -> f64 {
        100.0 * x / self.value.to_f64()
    }

    /// The per-iteration table: `|R|`, `%z*`, IP timeout, Dinkelbach
    /// iterations, `%B` of the new bound and time.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("it,delta_max,tlim,|R|,%z*,IP,Iter,%B,Time\n");
        for t in &self.trace {
            let marker = t.saturation.map(String::from).unwrap_or_default();
            let z = t.value.map_or(String::from("-"), |v| format!("{:.2}", self.pct(v.to_f64())));
            let b = if t.db_new.is_finite() { format!("{:.2}", self.pct(t.db_new)) } else { String::from("-") };
            let _ = writeln!(
                out,
                "{},{},{},{}{},{},{},{},{},{:.2}",
                t.iteration,
                t.delta_max,
                t.tlim,
                t.routes,
                marker,
                z,
                if t.ip_timeout { "*" } else { "" },
                t.dinkelbach_iterations,
                b,
                t.elapsed
            );
        }
        out
    }
}

/// One parametric solve inside the Dinkelbach loop.
#[derive(Clone, Debug)]
pub struct DinkelbachStep {
    pub r: Ratio,
    /// `z(FP(r))` times the denominator of `r`, exactly.
    pub scaled_value: i128,
    pub proven_optimal: bool,
    pub n: i64,
    pub d: i64,
}

#[derive(Clone, Debug)]
pub struct DinkelbachOutcome {
    pub value: Ratio,
    pub x: Vec<usize>,
    pub fp_optimal: bool,
    pub steps: Vec<DinkelbachStep>,
}

fn totals(routes: &[Route], x: &[usize]) -> (i64, i64) {
    x.iter().fold((0, 0), |(n, d), &k| (n + routes[k].cost, d + routes[k].working_time))
}

fn certificate(msg: String) -> Error {
    Error::Certificate(msg)
}

/// Integer Dinkelbach iterations from the feasible selection `x0`.
///
/// Every parametric problem is solved with costs `q·c − p·w` for `r = p/q`,
/// which are integers, and the sign of its value is checked exactly.
pub fn dinkelbach_reduced(
    inst: &Instance,
    routes: &[Route],
    x0: &[usize],
    m_min: usize,
    m_max: usize,
    tlim: f64,
) -> Result<DinkelbachOutcome> {
    let start = Instant::now();
    let (n0, d0) = totals(routes, x0);
    if d0 <= 0 {
        return Err(Error::Input("starting selection has no working time".into()));
    }
    let mut x = x0.to_vec();
    let mut r = Ratio::new(n0, d0);
    let mut steps: Vec<DinkelbachStep> = Vec::new();
    loop {
        let (p, q) = (r.num() as i128, r.den() as i128);
        let scaled: Vec<i128> = routes.iter().map(|l| q * l.cost as i128 - p * l.working_time as i128).collect();
        let exact = scaled.iter().all(|v| v.unsigned_abs() < 1 << 53);
        let costs: Vec<f64> = if exact {
            scaled.iter().map(|&v| v as f64).collect()
        } else {
            let rf = r.to_f64();
            routes.iter().map(|l| l.cost as f64 - rf * l.working_time as f64).collect()
        };
        let params = MipParams {
            m_min,
            m_max,
            time_limit: (tlim - start.elapsed().as_secs_f64()).max(0.0),
            integral_costs: exact,
        };
        let res = solve_fp(inst, routes, &costs, &params, Some(&x))?;
        let value: i128 = res.x.iter().map(|&k| scaled[k]).sum();
        let (n, d) = totals(routes, &res.x);
        steps.push(DinkelbachStep {
            r,
            scaled_value: value,
            proven_optimal: res.proven_optimal,
            n,
            d,
        });
        if value >= 0 {
            // The warm start has value 0, so the solve can never end above it.
            if value != 0 {
                return Err(certificate(format!("parametric value {value} above the warm start at r = {r}")));
            }
            let outcome = DinkelbachOutcome {
                value: Ratio::new(n, d),
                x: res.x,
                fp_optimal: res.proven_optimal,
                steps,
            };
            if outcome.value != r {
                return Err(certificate(format!("terminal ratio {} differs from r = {r}", outcome.value)));
            }
            check_convergence(&outcome)?;
            return Ok(outcome);
        }
        let next = Ratio::new(n, d);
        // The ratio strictly decreases whenever the parametric value is negative.
        if next >= r {
            return Err(certificate(format!("ratio did not decrease: {r} then {next}")));
        }
        if let [.., prev, cur] = steps.as_slice() {
            // Along negative steps solved to optimality the denominator strictly decreases.
            if prev.proven_optimal && cur.proven_optimal && cur.d >= prev.d {
                return Err(certificate(format!("denominator did not decrease: {} then {}", prev.d, cur.d)));
            }
        }
        x = res.x;
        r = next;
    }
}

/// Post-hoc contraction check `(r̄ − r_{i+1})/(r̄ − r_i) ≤ 1 − d(x̄)/d(x^i)`
/// for every step with `r_i ≠ r̄`, valid when every solve was optimal.
fn check_convergence(out: &DinkelbachOutcome) -> Result<()> {
    if !out.steps.iter().all(|s| s.proven_optimal) {
        return Ok(());
    }
    let rbar = out.value;
    let dbar = out.steps.last().map_or(0, |s| s.d) as i128;
    for s in &out.steps {
        if s.r == rbar {
            continue;
        }
        // r_{i+1} = n_i/d_i. Compare (r_{i+1} − r̄)·d_i ≤ (d_i − d̄)(r_i − r̄).
        let (a, b) = (rbar.num() as i128, rbar.den() as i128);
        let (ri_p, ri_q) = (s.r.num() as i128, s.r.den() as i128);
        let (n_i, d_i) = (s.n as i128, s.d as i128);
        // Both sides multiplied by ri_q·b > 0.
        let lhs = (n_i * b - a * d_i) * ri_q;
        let rhs = (d_i - dbar) * (ri_p * b - a * ri_q);
        if lhs > rhs {
            return Err(certificate(format!("contraction failed at r = {} towards {rbar}", s.r)));
        }
    }
    Ok(())
}

/// Lower bound on any solution whose routes all have reduced cost at least
/// `rc_floor`, with one route at least `first`.
fn gap_bound(inst: &Instance, duals: &DualSolution, m_max: usize, first: f64, rc_floor: f64) -> f64 {
    if first == f64::INFINITY {
        return f64::INFINITY;
    }
    let num = first + duals.c_bar_0(inst) + (m_max as f64 - 1.0) * rc_floor.min(0.0);
    let w = if num >= 0.0 { (m_max as i64 * inst.max_time) as f64 } else { inst.total_time_lower_bound().max(1) as f64 };
    duals.omega + num / w
}

/// Checks `z ≥ ω + (Σ c̄ + c̄_0)/Σ w` on a feasible solution.
fn check_gap_identity(inst: &Instance, duals: &DualSolution, sol: &Solution) -> Result<()> {
    let rc: f64 = sol.routes.iter().map(|r| duals.reduced_cost(r)).sum();
    let w = sol.total_time() as f64;
    let rhs = duals.omega + (rc + duals.c_bar_0(inst)) / w;
    let z = sol.value.to_f64();
    if z < rhs - 1e-6 * (1.0 + z.abs().max(rhs.abs())) {
        return Err(certificate(format!("solution value {z} below the dual gap bound {rhs}")));
    }
    Ok(())
}

/// Runs the exact method.
pub fn solve_exact(inst: &Instance, params: &ExactParams) -> Result<ExactResult> {
    let start = Instant::now();
    inst.validate()?;
    if !(params.eps1 > 1.0 && params.eps2 > 0.0) {
        return Err(Error::Input("eps1 must exceed 1 and eps2 must be positive".into()));
    }
    let space = NgStateSpace::forward(inst, &default_ng_sets(inst, params.pricing_ng));

    let cb = run_cb(inst, &space, &params.cb)?;
    let mut da_params = params.da.clone();
    da_params.upper_bound = cb.primal.as_ref().map(|s| s.value);
    let da = run_da(inst, &space, &da_params)?;
    let duals = da.duals.clone().ok_or_else(|| Error::Infeasible("dual ascent produced no duals".into()))?;

    let mut best: Option<Solution> = None;
    for sol in [&cb.primal, &da.primal].into_iter().flatten() {
        check_gap_identity(inst, &duals, sol)?;
        if best.as_ref().is_none_or(|b| sol.value < b.value) {
            best = Some(sol.clone());
        }
    }
    let (m_min, m_max) = match (&best, &cb.db_by_vehicles) {
        (Some(b), Some(by)) => match vehicle_window(by, b.value.to_f64()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => (1, inst.m),
        },
        _ => (1, inst.m),
    };
    // Floor on every route's reduced cost under the mapped duals.
    let priced = price_ng_routes(
        inst,
        &space,
        &PricingDuals::Ccf {
            mu: &duals.mu,
            omega: duals.omega,
        },
        f64::INFINITY,
        1,
    );
    let rc_floor = priced.first().map_or(0.0, |p| p.0).min(0.0);
    let lower = cb.dual_bound.max(da.dual_bound);
    info!(
        "bounds: CB {:.6} DA {:.6} UB {:?} window [{m_min}, {m_max}] rc floor {rc_floor:.3e}",
        cb.dual_bound,
        da.dual_bound,
        best.as_ref().map(|b| b.value.to_string())
    );

    let mut delta_max = params.delta_max;
    let mut tlim = params.tlim;
    let mut trace = Vec::new();
    let mut status = ExactStatus::IterLimit;
    let mut dual_bound = lower;
    for iteration in 1.. {
        let it_start = Instant::now();
        let threshold = match &best {
            Some(b) => Threshold::Gap {
                z_star: b.value.to_f64(),
                dual_bound: duals.omega,
                c_bar_0: duals.c_bar_0(inst),
                m_max,
                rc_floor,
            },
            None => Threshold::Unbounded,
        };
        let genr = GenrParams {
            delta_max,
            nstatb: params.nstatb,
            ng_delta: params.ng_delta,
            dominance: params.dominance,
        };
        let set = generate_reduced_set(inst, &duals, threshold, &genr);
        info!("iteration {iteration}: {} routes, gapmin {:.6}, complete {}", set.len(), set.gapmin, set.optimal);

        // The incumbent's routes join the reduced set.
        let mut routes = set.routes.clone();
        let mut index: HashMap<Vec<usize>, usize> =
            routes.iter().enumerate().map(|(k, r)| (r.vertices.clone(), k)).collect();
        let x0: Option<Vec<usize>> = best.as_ref().map(|b| {
            b.routes
                .iter()
                .map(|r| {
                    *index.entry(r.vertices.clone()).or_insert_with(|| {
                        routes.push(r.clone());
                        routes.len() - 1
                    })
                })
                .collect()
        });
        let x0 = match x0 {
            Some(x) => Some(x),
            None => first_feasible(inst, &routes, m_min, m_max, tlim)?,
        };

        let mut entry = IterationTrace {
            iteration,
            delta_max,
            tlim,
            routes: set.len(),
            saturation: set.saturation.map(|s| match s {
                Saturation::Nstatb => 'N',
                Saturation::DeltaMax => 'D',
            }),
            gapmin: set.gapmin,
            value: None,
            ip_timeout: false,
            dinkelbach_iterations: 0,
            db_new: gap_bound(inst, &duals, m_max, set.gapmin, rc_floor),
            routes_optimal: set.optimal,
            elapsed: 0.0,
        };
        let mut fp_optimal = false;
        if let Some(x0) = x0 {
            let out = dinkelbach_reduced(inst, &routes, &x0, m_min, m_max, tlim)?;
            fp_optimal = out.fp_optimal;
            entry.value = Some(out.value);
            entry.ip_timeout = !out.fp_optimal;
            entry.dinkelbach_iterations = out.steps.len();
            let sol = Solution::new(inst, out.x.iter().map(|&k| routes[k].clone()).collect())?;
            check_gap_identity(inst, &duals, &sol)?;
            if best.as_ref().is_none_or(|b| sol.value < b.value) {
                best = Some(sol);
            }
        }
        entry.elapsed = it_start.elapsed().as_secs_f64();
        let db_new = entry.db_new;
        trace.push(entry);

        let z = best.as_ref().map(|b| b.value.to_f64());
        if fp_optimal {
            // Either the reduced set holds every candidate route, or those
            // left out cannot beat the incumbent.
            if let Some(z) = z {
                dual_bound = dual_bound.max(db_new.min(z));
                if set.optimal || z <= db_new {
                    status = ExactStatus::Optimal;
                    dual_bound = z;
                    break;
                }
            } else if set.optimal {
                return Err(Error::Infeasible("no selection of routes covers every mandatory customer".into()));
            }
        }
        if iteration >= params.itermax {
            break;
        }
        // Measured against the certified bound: DB_new alone only covers
        // solutions that use a route outside the reduced set.
        if let Some(z) = z {
            if params.gapmax.is_finite() && (z - dual_bound) / dual_bound.abs() <= params.gapmax {
                status = ExactStatus::GapReached;
                break;
            }
        }
        delta_max = ((delta_max as f64) * params.eps1).min(usize::MAX as f64) as usize;
        tlim += params.eps2;
    }

    let solution = best.ok_or_else(|| Error::Infeasible("no feasible solution found".into()))?;
    Ok(ExactResult {
        status,
        value: solution.value,
        solution,
        dual_bound,
        cb,
        da,
        m_min,
        m_max,
        trace,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Any feasible selection, found by minimising total cost.
fn first_feasible(inst: &Instance, routes: &[Route], m_min: usize, m_max: usize, tlim: f64) -> Result<Option<Vec<usize>>> {
    let costs: Vec<f64> = routes.iter().map(|r| r.cost as f64).collect();
    let params = MipParams {
        m_min,
        m_max,
        time_limit: tlim,
        integral_costs: true,
    };
    match solve_fp(inst, routes, &costs, &params, None) {
        Ok(res) => Ok(Some(res.x)),
        Err(Error::Infeasible(_)) | Err(Error::TimeLimit(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
