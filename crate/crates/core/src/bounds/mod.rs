//! Dual bounds for the continuous and integer relaxations, the dual mapping
//! between the two linearisations, and the primal heuristic they share.

mod cb;
mod cg;
mod da;
mod heuristic;

pub use cb::{cb_g_recursion, run_cb, CbParams, GTable};
pub(crate) use cb::vehicle_window;
pub use cg::{run_cg, run_dk, CgParams};
pub use da::{run_da, theorem1_evaluate, DaParams, Theorem1Eval};
pub use heuristic::{improve_solution, lagrangian_heuristic};

use std::time::Instant;

use crate::instance::Instance;
use crate::lp::{LinearProgram, Relation};
use crate::model::{Route, Solution};

/// Duals of the normalised formulation (`v`) and of the Charnes–Cooper
/// formulation (`μ`, `ω`). Index 0 of `v` and `mu` is the fleet row.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
    pub omega: f64,
    pub beta: f64,
    pub value: f64,
}

impl DualSolution {
    /// `c̄_0 = Σ_{i∈F∪C} μ_i + m·μ_0`.
    pub fn c_bar_0(&self, inst: &Instance) -> f64 {
        inst.customers().map(|i| self.mu[i]).sum::<f64>() + inst.m as f64 * self.mu[0]
    }

    /// Charnes–Cooper reduced cost `c − Σ a μ − μ_0 − w ω`.
    pub fn reduced_cost(&self, route: &Route) -> f64 {
        let mut rc = route.cost as f64 - self.mu[0] - route.working_time as f64 * self.omega;
        for &v in route.customers() {
            rc -= self.mu[v];
        }
        rc
    }

    /// Builds the pair from normalised duals `v`.
    pub fn from_ncf(inst: &Instance, v: Vec<f64>) -> Self {
        let beta = inst.beta() as f64;
        let (mu, omega) = theorem2_transform(inst, &v, beta);
        let value = inst.customers().map(|i| v[i]).sum::<f64>() + inst.m as f64 * v[0];
        Self {
            v,
            mu,
            omega,
            beta,
            value,
        }
    }
}

/// Maps normalised duals `v` to Charnes–Cooper duals `(μ, ω)`.
pub fn theorem2_transform(inst: &Instance, v: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let omega = inst.customers().map(|i| v[i]).sum::<f64>() + inst.m as f64 * v[0];
    let mut mu = vec![0.0; inst.n_vertices()];
    mu[0] = beta * v[0];
    for i in inst.customers() {
        mu[i] = if inst.is_mandatory(i) {
            beta * v[i] - inst.service[i] as f64 * omega
        } else {
            beta * v[i]
        };
    }
    (mu, omega)
}

/// Outcome of a bounding procedure.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub name: &'static str,
    pub dual_bound: f64,
    pub primal: Option<Solution>,
    pub duals: Option<DualSolution>,
    pub m_min: Option<usize>,
    pub m_max: Option<usize>,
    /// Per vehicle count `m̄`, the least `DB(t̄, m̄)` over admissible `t̄` (CB only).
    pub db_by_vehicles: Option<Vec<f64>>,
    pub elapsed: f64,
    pub column_count: usize,
    pub iterations: usize,
}

impl BoundReport {
    pub(crate) fn new(name: &'static str, start: Instant) -> Self {
        Self {
            name,
            dual_bound: f64::NEG_INFINITY,
            primal: None,
            duals: None,
            m_min: None,
            m_max: None,
            db_by_vehicles: None,
            elapsed: start.elapsed().as_secs_f64(),
            column_count: 0,
            iterations: 0,
        }
    }
}

/// Sum of normalised coefficients used by both linearisations.
fn w_bar(inst: &Instance, route: &Route) -> f64 {
    let mand: i64 = route.customers().iter().filter(|&&v| inst.is_mandatory(v)).map(|&v| inst.service[v]).sum();
    (route.working_time - mand) as f64
}

/// Column of route `ℓ` in the normalised formulation: `(ā_iℓ for i = 1..n, b̄_ℓ)`.
pub fn ncf_column(inst: &Instance, route: &Route) -> (Vec<f64>, f64) {
    let beta = inst.beta() as f64;
    let wb = w_bar(inst, route);
    let a = route.visit_vector(inst.n_vertices());
    let abar = (0..inst.n_vertices())
        .map(|i| if i == 0 { 0.0 } else { beta * a[i] as f64 + wb })
        .collect();
    (abar, beta + inst.m as f64 * wb)
}

/// The normalised formulation over `routes`. Rows: customers `1..=n`, then the fleet row.
pub fn ncf_program(inst: &Instance, routes: &[Route]) -> LinearProgram {
    let n = inst.n();
    let mut p = LinearProgram::new(routes.len());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
    for (l, r) in routes.iter().enumerate() {
        p.costs[l] = r.cost as f64;
        let (abar, bbar) = ncf_column(inst, r);
        for i in 1..=n {
            if abar[i] != 0.0 {
                rows[i - 1].push((l, abar[i]));
            }
        }
        rows[n].push((l, bbar));
    }
    for (k, coefs) in rows.into_iter().enumerate() {
        let i = k + 1;
        if k == n {
            p.add_row(coefs, Relation::Le, inst.m as f64);
        } else if inst.is_mandatory(i) {
            p.add_row(coefs, Relation::Eq, 1.0);
        } else {
            p.add_row(coefs, Relation::Le, 1.0);
        }
    }
    p
}

/// The Charnes–Cooper formulation over `routes`. Variable 0 is `u`.
/// Rows: customers `1..=n`, the fleet row, then the normalisation row.
pub fn ccf_program(inst: &Instance, routes: &[Route]) -> LinearProgram {
    let n = inst.n();
    let mut p = LinearProgram::new(routes.len() + 1);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 2];
    for i in 0..n {
        rows[i].push((0, -1.0));
    }
    rows[n].push((0, -(inst.m as f64)));
    for (k, r) in routes.iter().enumerate() {
        let l = k + 1;
        p.costs[l] = r.cost as f64;
        let a = r.visit_vector(inst.n_vertices());
        for i in 1..=n {
            if a[i] > 0 {
                rows[i - 1].push((l, a[i] as f64));
            }
        }
        rows[n].push((l, 1.0));
        rows[n + 1].push((l, r.working_time as f64));
    }
    for (k, coefs) in rows.into_iter().enumerate() {
        let i = k + 1;
        if k == n + 1 {
            p.add_row(coefs, Relation::Eq, 1.0);
        } else if k == n {
            p.add_row(coefs, Relation::Le, 0.0);
        } else if inst.is_mandatory(i) {
            p.add_row(coefs, Relation::Eq, 0.0);
        } else {
            p.add_row(coefs, Relation::Le, 0.0);
        }
    }
    p
}

/// Converts row duals of [`ncf_program`] into the `v` vector (fleet first).
pub fn ncf_duals_to_v(inst: &Instance, duals: &[f64]) -> Vec<f64> {
    let n = inst.n();
    let mut v = vec![0.0; n + 1];
    v[0] = duals[n];
    v[1..=n].copy_from_slice(&duals[..n]);
    v
}

/// Converts row duals of [`ccf_program`] into `(μ, ω)` (fleet first).
pub fn ccf_duals_to_mu(inst: &Instance, duals: &[f64]) -> (Vec<f64>, f64) {
    let n = inst.n();
    let mut mu = vec![0.0; n + 1];
    mu[0] = duals[n];
    mu[1..=n].copy_from_slice(&duals[..n]);
    (mu, duals[n + 1])
}

/// Elementary routes `(0, i, 0)` that fit within `T`.
pub fn singleton_routes(inst: &Instance) -> Vec<Route> {
    inst.customers()
        .filter_map(|i| crate::model::route_from_sequence(inst, &[0, i, 0]).ok())
        .collect()
}
