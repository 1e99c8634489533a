//! Best-first enumeration of the elementary routes whose reduced cost can
//! still matter.
//!
//! A forward path `P` is scored by `DB(P)`: its reduced cost so far plus the
//! cheapest backward ng-path completion that avoids the customers of `P`.
//! Paths are expanded in increasing `DB` order, so when enumeration stops
//! early the score of the last expanded path bounds every route left out.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, warn};

use crate::bounds::DualSolution;
use crate::instance::Instance;
use crate::matrix::Matrix;
use crate::model::{evaluate_sequence, Route};
use crate::ngpath::{build_ng_sets, reduced_arc_costs, NgSets, NgStateSpace, PricingDuals};

/// Entries allowed in the completion table before the ng sets are shrunk.
const MAX_TABLE_ENTRIES: usize = 1 << 25;

/// Paths kept in memory at once, whatever `nstatb` says.
const MAX_STORED_PATHS: usize = 20_000_000;

#[derive(Clone, Debug)]
pub struct GenrParams {
    /// Stop once this many routes are generated.
    pub delta_max: usize,
    /// Stop once the frontier holds more paths than this.
    pub nstatb: usize,
    /// Neighbourhood size of the backward ng sets.
    pub ng_delta: usize,
    pub dominance: bool,
}

impl Default for GenrParams {
    fn default() -> Self {
        Self {
            delta_max: 300_000,
            nstatb: 200_000_000,
            ng_delta: 12,
            dominance: true,
        }
    }
}

/// Reduced-cost threshold below which a route is kept.
#[derive(Clone, Copy, Debug)]
pub enum Threshold {
    /// Keep every feasible route.
    Unbounded,
    /// The bound-gap rule: a route `ℓ` is kept when
    /// `c̄_ℓ ≤ α_ℓ(z* − DB) − c̄_0 − (m_max − 1)·ρ`, with
    /// `α_ℓ = w_ℓ + (m_max − 1)T` and `ρ ≤ 0` a floor on every reduced cost.
    Gap {
        z_star: f64,
        dual_bound: f64,
        c_bar_0: f64,
        m_max: usize,
        rc_floor: f64,
    },
}

/// `γ_ℓ = α_ℓ z* − (α_ℓ DB + c̄_0)` with `α_ℓ = w_ℓ + (m_max − 1)T`.
pub fn corollary1_threshold(w: i64, z_star: f64, dual_bound: f64, c_bar_0: f64, m_max: usize, max_time: i64) -> f64 {
    let alpha = (w + (m_max as i64 - 1) * max_time) as f64;
    alpha * z_star - (alpha * dual_bound + c_bar_0)
}

impl Threshold {
    fn route(&self, w: i64, max_time: i64) -> f64 {
        match *self {
            Threshold::Unbounded => f64::INFINITY,
            Threshold::Gap {
                z_star,
                dual_bound,
                c_bar_0,
                m_max,
                rc_floor,
            } => {
                let slack = (m_max as f64 - 1.0) * rc_floor.min(0.0);
                corollary1_threshold(w, z_star, dual_bound, c_bar_0, m_max, max_time) - slack
            }
        }
    }

    /// Largest route threshold over every feasible working time.
    fn path(&self, max_time: i64) -> f64 {
        self.route(0, max_time).max(self.route(max_time, max_time))
    }
}

fn tolerance(gamma: f64) -> f64 {
    if gamma.is_finite() {
        1e-6 * (1.0 + gamma.abs())
    } else {
        0.0
    }
}

/// Least backward completion cost per end vertex, allowed memory and time budget.
pub struct CompletionBound {
    ng: NgSets,
    width: usize,
    offset: Vec<usize>,
    table: Vec<f64>,
    max_time: i64,
}

impl CompletionBound {
    /// Builds the table for modified arc costs `arc`, given in original
    /// orientation. Neighbour sets are the `ng_delta` nearest customers
    /// under `arc`, shrunk if the table would not fit in memory.
    pub fn new(inst: &Instance, arc: &Matrix<f64>, ng_delta: usize) -> Self {
        let width = inst.max_time as usize + 1;
        let mut delta = ng_delta.max(1);
        let ng = loop {
            let ng = build_ng_sets(inst, delta, arc);
            let entries: usize = inst.customers().map(|e| (1usize << (ng.members(e).len() - 1)) * width).sum();
            if entries <= MAX_TABLE_ENTRIES || delta == 1 {
                break ng;
            }
            warn!("completion table too large with ng size {delta}; shrinking");
            delta -= 1;
        };
        let space = NgStateSpace::backward(inst, &ng);
        let labels = space.label(arc);

        let mut offset = vec![0; inst.n_vertices() + 1];
        for e in 0..inst.n_vertices() {
            let size = if e == 0 { 0 } else { (1usize << (ng.members(e).len() - 1)) * width };
            offset[e + 1] = offset[e] + size;
        }
        let mut table = vec![f64::INFINITY; offset[inst.n_vertices()]];
        for s in 1..space.len() {
            let e = space.vertex(s);
            let mask = (space.memory(s) >> 1) as usize;
            let k = offset[e] + mask * width + space.time(s) as usize;
            table[k] = table[k].min(labels.cost(s));
        }
        for e in inst.customers() {
            let bits = ng.members(e).len() - 1;
            let block = &mut table[offset[e]..offset[e + 1]];
            // Least value over time budgets up to t.
            for row in block.chunks_mut(width) {
                for t in 1..width {
                    row[t] = row[t].min(row[t - 1]);
                }
            }
            // Least value over memory subsets.
            for b in 0..bits {
                for mask in 0..1usize << bits {
                    if mask >> b & 1 == 1 {
                        let (lo, hi) = block.split_at_mut(mask * width);
                        let sub = &lo[(mask ^ 1 << b) * width..][..width];
                        for (x, &y) in hi[..width].iter_mut().zip(sub) {
                            *x = x.min(y);
                        }
                    }
                }
            }
        }
        Self {
            ng,
            width,
            offset,
            table,
            max_time: inst.max_time,
        }
    }

    pub fn ng(&self) -> &NgSets {
        &self.ng
    }

    /// Least completion cost from `e` back to the depot that avoids the
    /// customers in `visited` (other than `e`) and fits in `budget`.
    pub fn get(&self, e: usize, visited: u128, budget: i64) -> f64 {
        if budget < 0 {
            return f64::INFINITY;
        }
        let t = budget.min(self.max_time) as usize;
        let mut mask = 0usize;
        for (p, &v) in self.ng.members(e).iter().enumerate().skip(1) {
            if visited >> v & 1 == 0 {
                mask |= 1 << (p - 1);
            }
        }
        self.table[self.offset[e] + mask * self.width + t]
    }
}

/// `DB(P)` for a forward path `seq = (0, i_1, …, i_k)`. A sequence that
/// returns to the depot is a full route and gets its exact reduced cost.
pub fn db_of_path(inst: &Instance, bound: &CompletionBound, arc: &Matrix<f64>, seq: &[usize]) -> f64 {
    assert_eq!(seq.first(), Some(&0), "paths start at the depot");
    if seq.len() == 1 {
        return inst
            .customers()
            .map(|j| db_of_path(inst, bound, arc, &[0, j]))
            .fold(f64::INFINITY, f64::min);
    }
    let mut prefix = 0.0;
    let mut time = 0;
    let mut visited = 0u128;
    for w in seq.windows(2) {
        prefix += arc[(w[0], w[1])];
        time += inst.time[(w[0], w[1])] + inst.service[w[1]];
        visited |= 1u128 << w[1];
    }
    let e = *seq.last().unwrap();
    if time > inst.max_time {
        return f64::INFINITY;
    }
    if e == 0 {
        return prefix;
    }
    prefix + bound.get(e, visited, inst.max_time - time + inst.service[e])
}

/// Why enumeration stopped before the frontier emptied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Saturation {
    DeltaMax,
    Nstatb,
}

/// Routes generated for the reduced problem.
#[derive(Clone, Debug)]
pub struct ReducedSet {
    pub routes: Vec<Route>,
    pub reduced_costs: Vec<f64>,
    /// Lower bound on the reduced cost of every route not generated
    /// because enumeration stopped early; `+∞` if it ran to completion.
    pub gapmin: f64,
    /// Whether the set holds every route of every optimal solution.
    pub optimal: bool,
    pub saturation: Option<Saturation>,
    pub paths: usize,
    pub elapsed: f64,
}

impl ReducedSet {
    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// One route per line: reduced cost, cost, working time, vertex sequence.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (r, rc) in self.routes.iter().zip(&self.reduced_costs) {
            let seq: Vec<String> = r.vertices.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{rc:.9} {} {} {}", r.cost, r.working_time, seq.join(" "));
        }
        out
    }
}

struct Path {
    parent: u32,
    end: u8,
    len: u8,
    dead: bool,
    time: i64,
    cost: i64,
    prefix: f64,
    db: f64,
    visited: u128,
}

#[derive(PartialEq)]
struct Entry {
    db: f64,
    len: u8,
    end: u8,
    id: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so that the max-heap yields the least DB, then the shorter
    // path, then the lower end vertex.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .db
            .total_cmp(&self.db)
            .then(other.len.cmp(&self.len))
            .then(other.end.cmp(&self.end))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dominance between paths with the same end vertex and customer set.
///
/// Only strict improvements are used, so no route of any optimal solution
/// is discarded. Equal time with lower cost always improves the ratio.
/// When every route has negative cost, lower time at no higher cost does
/// too.
struct Dominance {
    negative_costs: bool,
    live: HashMap<(u8, u128), Vec<u32>>,
}

impl Dominance {
    fn new(inst: &Instance) -> Self {
        let nv = inst.n_vertices();
        let negative_costs = (0..nv).all(|i| {
            (0..nv).filter(|&j| j != i).all(|j| if j == 0 { inst.cost[(i, j)] <= 0 } else { inst.cost[(i, j)] < 0 })
        });
        Self {
            negative_costs,
            live: HashMap::new(),
        }
    }

    /// Registers a new path unless an existing one dominates it; marks the
    /// paths it dominates as dead.
    fn admit(&mut self, paths: &mut [Path], key: (u8, u128), id: u32, ct: (i64, i64)) -> bool {
        let neg = self.negative_costs;
        let dominates = |a: (i64, i64), b: (i64, i64)| (a.1 == b.1 && a.0 < b.0) || (neg && a.0 <= b.0 && a.1 < b.1);
        let list = self.live.entry(key).or_default();
        if list.iter().any(|&o| dominates((paths[o as usize].cost, paths[o as usize].time), ct)) {
            return false;
        }
        list.retain(|&o| {
            let p = &mut paths[o as usize];
            let beaten = dominates(ct, (p.cost, p.time));
            p.dead |= beaten;
            !beaten
        });
        list.push(id);
        true
    }
}

fn sequence(paths: &[Path], id: u32) -> Vec<usize> {
    let mut seq = vec![0];
    let mut k = id;
    while paths[k as usize].len > 0 {
        seq.push(paths[k as usize].end as usize);
        k = paths[k as usize].parent;
    }
    seq.push(0);
    seq.reverse();
    seq
}

/// Modified arc costs `d̄_ij = d_ij − μ_j − (t_ij + s_j)ω`.
pub fn modified_costs(inst: &Instance, duals: &DualSolution) -> Matrix<f64> {
    reduced_arc_costs(
        inst,
        &PricingDuals::Ccf {
            mu: &duals.mu,
            omega: duals.omega,
        },
    )
}

/// Enumerates elementary routes in increasing order of path bound, keeping
/// those below `threshold`.
pub fn generate_reduced_set(
    inst: &Instance,
    duals: &DualSolution,
    threshold: Threshold,
    params: &GenrParams,
) -> ReducedSet {
    let start = Instant::now();
    let arc = modified_costs(inst, duals);
    let bound = CompletionBound::new(inst, &arc, params.ng_delta);
    enumerate(inst, &arc, &bound, threshold, params, start)
}

fn enumerate(
    inst: &Instance,
    arc: &Matrix<f64>,
    bound: &CompletionBound,
    threshold: Threshold,
    params: &GenrParams,
    start: Instant,
) -> ReducedSet {
    let tmax = inst.max_time;
    let gamma_path = threshold.path(tmax);
    let path_tol = tolerance(gamma_path);
    let mut dominance = params.dominance.then(|| Dominance::new(inst));
    let mut paths = vec![Path {
        parent: 0,
        end: 0,
        len: 0,
        dead: false,
        time: 0,
        cost: 0,
        prefix: 0.0,
        db: f64::NEG_INFINITY,
        visited: 0,
    }];
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        db: f64::NEG_INFINITY,
        len: 0,
        end: 0,
        id: 0,
    });
    let mut routes = Vec::new();
    let mut reduced_costs = Vec::new();
    let mut saturation = None;
    let mut gapmin = f64::INFINITY;

    'search: while let Some(top) = heap.pop() {
        let id = top.id;
        if paths[id as usize].dead {
            continue;
        }
        let (e, len, time, cost, prefix, visited, db) = {
            let p = &paths[id as usize];
            (p.end as usize, p.len, p.time, p.cost, p.prefix, p.visited, p.db)
        };
        if len > 0 && time + inst.time[(e, 0)] <= tmax {
            let rc = prefix + arc[(e, 0)];
            let w = time + inst.time[(e, 0)];
            let gamma = threshold.route(w, tmax);
            if rc < gamma + tolerance(gamma) {
                let mut seq = sequence(&paths, id);
                seq.pop();
                seq.push(0);
                let route = evaluate_sequence(inst, &seq).expect("path vertices are in range");
                debug_assert_eq!(route.cost, cost + inst.cost[(e, 0)]);
                routes.push(route);
                reduced_costs.push(rc);
                if routes.len() >= params.delta_max {
                    saturation = Some(Saturation::DeltaMax);
                    gapmin = db;
                    break 'search;
                }
            }
        }
        for j in inst.customers() {
            if visited >> j & 1 == 1 {
                continue;
            }
            let nt = time + inst.time[(e, j)] + inst.service[j];
            if nt > tmax {
                continue;
            }
            let nvis = visited | 1u128 << j;
            let nprefix = prefix + arc[(e, j)];
            let ndb = nprefix + bound.get(j, nvis, tmax - nt + inst.service[j]);
            if !(ndb < gamma_path + path_tol) {
                continue;
            }
            let nid = paths.len() as u32;
            let ncost = cost + inst.cost[(e, j)];
            if let Some(dom) = dominance.as_mut() {
                if !dom.admit(&mut paths, (j as u8, nvis), nid, (ncost, nt)) {
                    continue;
                }
            }
            paths.push(Path {
                parent: id,
                end: j as u8,
                len: len + 1,
                dead: false,
                time: nt,
                cost: ncost,
                prefix: nprefix,
                db: ndb,
                visited: nvis,
            });
            heap.push(Entry {
                db: ndb,
                len: len + 1,
                end: j as u8,
                id: nid,
            });
            if heap.len() > params.nstatb || paths.len() >= MAX_STORED_PATHS {
                saturation = Some(Saturation::Nstatb);
                gapmin = db;
                break 'search;
            }
        }
    }
    if saturation.is_some() {
        // Every path left behind scores at least the one being expanded.
        if let Some(top) = heap.peek() {
            gapmin = gapmin.min(top.db);
        }
        debug!("genr stopped early: {saturation:?}, gapmin {gapmin}");
    }
    ReducedSet {
        routes,
        reduced_costs,
        gapmin,
        optimal: saturation.is_none(),
        saturation,
        paths: paths.len(),
        elapsed: start.elapsed().as_secs_f64(),
    }
}
