//! Routes, solutions and exact ratio values.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, ObjectiveKind};

/// An exact rational `num/den` with `den > 0`, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    num: i64,
    den: i64,
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "ratio with zero denominator");
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = num.gcd(&den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn neg(self) -> Self {
        Self {
            num: -self.num,
            den: self.den,
        }
    }

    /// Sign of `n − self·d` computed exactly.
    pub fn parametric_sign(self, n: i64, d: i64) -> Ordering {
        let lhs = n as i128 * self.den as i128;
        let rhs = self.num as i128 * d as i128;
        lhs.cmp(&rhs)
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl std::str::FromStr for Ratio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("bad ratio '{s}'"));
        let (n, d) = s.trim().split_once('/').ok_or_else(bad)?;
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ok(Ratio::new(n, d))
    }
}

/// A route `(0, i_1, ..., i_r, 0)` with its cost and working time.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Route {
    pub vertices: Vec<usize>,
    pub cost: i64,
    pub working_time: i64,
    pub elementary: bool,
}

impl Route {
    /// The visited customers in order.
    pub fn customers(&self) -> &[usize] {
        &self.vertices[1..self.vertices.len() - 1]
    }

    /// Number of visits to customer `i`.
    pub fn visits(&self, i: usize) -> u32 {
        self.customers().iter().filter(|&&v| v == i).count() as u32
    }

    /// Per-vertex visit counts, indexed `0..n_vertices`.
    pub fn visit_vector(&self, n_vertices: usize) -> Vec<u32> {
        let mut a = vec![0u32; n_vertices];
        for &v in self.customers() {
            a[v] += 1;
        }
        a
    }

    /// Customer bitmask; only meaningful for elementary routes.
    pub fn mask(&self) -> u128 {
        self.customers().iter().fold(0u128, |m, &v| m | (1u128 << v))
    }
}

/// Builds a route from a full vertex sequence starting and ending at the depot.
pub fn route_from_sequence(inst: &Instance, seq: &[usize]) -> Result<Route> {
    let route = evaluate_sequence(inst, seq)?;
    if route.working_time > inst.max_time {
        return Err(Error::RouteInfeasible {
            working_time: route.working_time,
            limit: inst.max_time,
        });
    }
    Ok(route)
}

/// Like [`route_from_sequence`] but without the working-time check.
pub fn evaluate_sequence(inst: &Instance, seq: &[usize]) -> Result<Route> {
    if seq.len() < 3 || seq[0] != 0 || seq[seq.len() - 1] != 0 {
        return Err(Error::Input(
            "route must start and end at the depot and visit a customer".into(),
        ));
    }
    let n = inst.n();
    let mut seen = vec![false; n + 1];
    let mut elementary = true;
    for &v in &seq[1..seq.len() - 1] {
        if v == 0 || v > n {
            return Err(Error::Input(format!("vertex {v} out of range")));
        }
        if seen[v] {
            elementary = false;
        }
        seen[v] = true;
    }
    let mut cost = 0;
    let mut working_time = 0;
    for w in seq.windows(2) {
        cost += inst.cost[(w[0], w[1])];
        working_time += inst.time[(w[0], w[1])] + inst.service[w[1]];
    }
    Ok(Route {
        vertices: seq.to_vec(),
        cost,
        working_time,
        elementary,
    })
}

/// Builds a route from its customer list.
pub fn route_from_customers(inst: &Instance, customers: &[usize]) -> Result<Route> {
    let mut seq = Vec::with_capacity(customers.len() + 2);
    seq.push(0);
    seq.extend_from_slice(customers);
    seq.push(0);
    route_from_sequence(inst, &seq)
}

/// A feasible set of elementary routes together with its exact value.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub routes: Vec<Route>,
    pub value: Ratio,
}

impl Solution {
    pub fn new(inst: &Instance, routes: Vec<Route>) -> Result<Self> {
        let value = solution_value(inst, &routes)?;
        Ok(Self { routes, value })
    }

    pub fn total_cost(&self) -> i64 {
        self.routes.iter().map(|r| r.cost).sum()
    }

    pub fn total_time(&self) -> i64 {
        self.routes.iter().map(|r| r.working_time).sum()
    }

    /// Value in the reporting orientation: cost/load, or profit/time.
    pub fn reported_value(&self, kind: ObjectiveKind) -> Ratio {
        match kind {
            ObjectiveKind::CostOverLoad => self.value,
            ObjectiveKind::ProfitOverTime => self.value.neg(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.routes {
            let vs: Vec<String> = r.customers().iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{} {} : {}\n", r.cost, r.working_time, vs.join(" ")));
        }
        out.push_str(&format!("VALUE {}/{}\n", self.total_cost(), self.total_time()));
        out
    }

    pub fn from_text(inst: &Instance, text: &str) -> Result<Self> {
        let mut routes = Vec::new();
        let mut value = None;
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: &str| Error::Parse {
                line: k + 1,
                msg: msg.to_string(),
            };
            if let Some(v) = line.strip_prefix("VALUE") {
                value = Some(v.trim().parse::<Ratio>().map_err(|_| perr("bad VALUE"))?);
                continue;
            }
            let (head, tail) = line.split_once(':').ok_or_else(|| perr("expected ':'"))?;
            let nums: std::result::Result<Vec<i64>, _> =
                head.split_whitespace().map(str::parse).collect();
            let nums = nums.map_err(|_| perr("bad cost or working time"))?;
            let custs: std::result::Result<Vec<usize>, _> =
                tail.split_whitespace().map(str::parse).collect();
            let custs = custs.map_err(|_| perr("bad vertex"))?;
            let route = route_from_customers(inst, &custs)?;
            if nums.len() != 2 || nums[0] != route.cost || nums[1] != route.working_time {
                return Err(perr("stored cost or working time does not match the route"));
            }
            routes.push(route);
        }
        let sol = Solution::new(inst, routes)?;
        if let Some(v) = value {
            if v != sol.value {
                return Err(Error::Input(format!("VALUE {v} does not match {}", sol.value)));
            }
        }
        Ok(sol)
    }
}

/// Exact value `Σc / Σw` of a route set, checking the solution invariants.
pub fn solution_value(inst: &Instance, routes: &[Route]) -> Result<Ratio> {
    if routes.is_empty() {
        return Err(Error::InfeasibleSolution("no routes".into()));
    }
    if routes.len() > inst.m {
        return Err(Error::InfeasibleSolution(format!(
            "{} routes exceed the fleet size {}",
            routes.len(),
            inst.m
        )));
    }
    let mut count = vec![0u32; inst.n_vertices()];
    for r in routes {
        if !r.elementary {
            return Err(Error::InfeasibleSolution("route is not elementary".into()));
        }
        if r.working_time > inst.max_time {
            return Err(Error::InfeasibleSolution("route exceeds T".into()));
        }
        for &v in r.customers() {
            count[v] += 1;
        }
    }
    for i in inst.mandatory() {
        if count[i] != 1 {
            return Err(Error::InfeasibleSolution(format!(
                "mandatory customer {i} visited {} times",
                count[i]
            )));
        }
    }
    for i in inst.optional() {
        if count[i] > 1 {
            return Err(Error::InfeasibleSolution(format!(
                "optional customer {i} visited {} times",
                count[i]
            )));
        }
    }
    let c: i64 = routes.iter().map(|r| r.cost).sum();
    let w: i64 = routes.iter().map(|r| r.working_time).sum();
    Ok(Ratio::new(c, w))
}
