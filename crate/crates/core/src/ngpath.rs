//! ng-route relaxation: neighbour sets, forward and backward label tables,
//! φ-tables and reduced-cost pricing.
//!
//! The set of reachable states `(NG, t, i)` depends only on times and
//! neighbour sets, never on arc costs. It is built once as an explicit
//! layered graph, and each cost vector is then a single pass over it.

use std::collections::HashMap;

use crate::instance::Instance;
use crate::matrix::Matrix;
use crate::model::{evaluate_sequence, Route};

/// Upper limit on `|N_i|`, fixed by the 32-bit memory encoding.
pub const MAX_NG_SIZE: usize = 32;

const NONE: u32 = u32::MAX;
const NO_POS: u8 = u8::MAX;

/// Neighbour sets `N_i`. Member 0 of `N_i` is `i` itself.
#[derive(Clone, Debug)]
pub struct NgSets {
    delta: usize,
    members: Vec<Vec<usize>>,
    pos: Matrix<u8>,
}

impl NgSets {
    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[i]
    }

    /// Bit position of `j` inside `N_i`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let p = self.pos[(i, j)];
        (p != NO_POS).then_some(p as usize)
    }

    /// Vertex set encoded by `mem` relative to `N_i`.
    pub fn decode(&self, i: usize, mem: u32) -> Vec<usize> {
        self.members[i]
            .iter()
            .enumerate()
            .filter(|(b, _)| mem >> b & 1 == 1)
            .map(|(_, &v)| v)
            .collect()
    }

    /// Memory after moving from `i` with memory `mem` to `j`: `(NG ∩ N_j) ∪ {j}`.
    #[inline]
    fn transition(&self, i: usize, mem: u32, j: usize) -> u32 {
        let mut out = 1u32;
        let mut bits = mem;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if let Some(p) = self.position(j, self.members[i][b]) {
                out |= 1 << p;
            }
        }
        out
    }
}

/// `N_i = {i}` plus the `delta − 1` customers nearest to `i` under `metric`.
pub fn build_ng_sets(inst: &Instance, delta: usize, metric: &Matrix<f64>) -> NgSets {
    assert!(delta >= 1, "neighbourhood size must be at least 1");
    let delta = delta.min(MAX_NG_SIZE);
    let nv = inst.n_vertices();
    let mut members = vec![vec![0]];
    for i in inst.customers() {
        let mut others: Vec<usize> = inst.customers().filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| metric[(i, a)].total_cmp(&metric[(i, b)]).then(a.cmp(&b)));
        let mut set = vec![i];
        set.extend(others.into_iter().take(delta - 1));
        members.push(set);
    }
    let mut pos = Matrix::filled(nv, NO_POS);
    for (i, set) in members.iter().enumerate() {
        for (b, &v) in set.iter().enumerate() {
            pos[(i, v)] = b as u8;
        }
    }
    NgSets { delta, members, pos }
}

/// Neighbour sets using the instance cost matrix as metric.
pub fn default_ng_sets(inst: &Instance, delta: usize) -> NgSets {
    build_ng_sets(inst, delta, &inst.cost.map(|x| x as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Shortest time from each vertex to the depot when following `time`
/// and paying service at intermediate vertices.
fn time_to_depot(time: &Matrix<i64>, service: &[i64]) -> Vec<i64> {
    let nv = time.dim();
    let mut dist: Vec<i64> = (0..nv).map(|j| time[(j, 0)]).collect();
    dist[0] = 0;
    loop {
        let mut changed = false;
        for j in 1..nv {
            for k in 1..nv {
                if k != j {
                    let cand = time[(j, k)] + service[k] + dist[k];
                    if cand < dist[j] {
                        dist[j] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// The layered graph of reachable ng-states.
///
/// States are sorted by time, so every predecessor has a smaller index.
/// State 0 is the depot start `({0}, 0, 0)`.
#[derive(Clone, Debug)]
pub struct NgStateSpace {
    direction: Direction,
    ng: NgSets,
    vertex: Vec<u8>,
    time: Vec<i32>,
    memory: Vec<u32>,
    pred_start: Vec<u32>,
    preds: Vec<u32>,
    closing_time: Vec<i64>,
    max_time: i64,
}

impl NgStateSpace {
    /// States of forward ng-paths leaving the depot.
    pub fn forward(inst: &Instance, ng: &NgSets) -> Self {
        Self::build(inst, ng, Direction::Forward)
    }

    /// States of backward ng-paths, built on the transposed time matrix.
    pub fn backward(inst: &Instance, ng: &NgSets) -> Self {
        Self::build(inst, ng, Direction::Backward)
    }

    fn build(inst: &Instance, ng: &NgSets, direction: Direction) -> Self {
        let time = match direction {
            Direction::Forward => inst.time.clone(),
            Direction::Backward => inst.time.transpose(),
        };
        let tmax = inst.max_time;
        let to_depot = time_to_depot(&time, &inst.service);
        let n = inst.n();

        let mut index: HashMap<(u8, i32, u32), u32> = HashMap::new();
        let mut vertex = vec![0u8];
        let mut stime = vec![0i32];
        let mut memory = vec![1u32];
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); tmax as usize + 1];
        buckets[0].push(0);
        let mut edges: Vec<(u32, u32)> = Vec::new();

        for t in 0..=tmax as usize {
            let mut k = 0;
            while k < buckets[t].len() {
                let u = buckets[t][k];
                k += 1;
                let i = vertex[u as usize] as usize;
                let mem = memory[u as usize];
                for j in 1..=n {
                    if let Some(p) = ng.position(i, j) {
                        if i != 0 && mem >> p & 1 == 1 {
                            continue;
                        }
                    }
                    let nt = t as i64 + time[(i, j)] + inst.service[j];
                    if nt + to_depot[j] > tmax {
                        continue;
                    }
                    let nmem = if i == 0 { 1 } else { ng.transition(i, mem, j) };
                    let key = (j as u8, nt as i32, nmem);
                    let v = *index.entry(key).or_insert_with(|| {
                        vertex.push(j as u8);
                        stime.push(nt as i32);
                        memory.push(nmem);
                        let id = (vertex.len() - 1) as u32;
                        buckets[nt as usize].push(id);
                        id
                    });
                    edges.push((v, u));
                }
            }
        }
        drop(index);

        // Renumber states in bucket order.
        let order: Vec<u32> = buckets.into_iter().flatten().collect();
        let mut rank = vec![0u32; order.len()];
        for (r, &s) in order.iter().enumerate() {
            rank[s as usize] = r as u32;
        }
        let vertex: Vec<u8> = order.iter().map(|&s| vertex[s as usize]).collect();
        let stime: Vec<i32> = order.iter().map(|&s| stime[s as usize]).collect();
        let memory: Vec<u32> = order.iter().map(|&s| memory[s as usize]).collect();
        for e in edges.iter_mut() {
            *e = (rank[e.0 as usize], rank[e.1 as usize]);
        }
        // Predecessors sorted by (vertex, memory) to fix tie-breaking.
        edges.sort_unstable_by_key(|&(v, u)| (v, vertex[u as usize], memory[u as usize]));
        let ns = vertex.len();
        let mut pred_start = vec![0u32; ns + 1];
        for &(v, _) in &edges {
            pred_start[v as usize + 1] += 1;
        }
        for s in 0..ns {
            pred_start[s + 1] += pred_start[s];
        }
        let preds: Vec<u32> = edges.into_iter().map(|(_, u)| u).collect();
        let closing_time = (0..=n).map(|i| time[(i, 0)]).collect();

        Self {
            direction,
            ng: ng.clone(),
            vertex,
            time: stime,
            memory,
            pred_start,
            preds,
            closing_time,
            max_time: tmax,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn ng(&self) -> &NgSets {
        &self.ng
    }

    pub fn len(&self) -> usize {
        self.vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.preds.len()
    }

    #[inline]
    pub fn vertex(&self, s: usize) -> usize {
        self.vertex[s] as usize
    }

    #[inline]
    pub fn time(&self, s: usize) -> i64 {
        self.time[s] as i64
    }

    #[inline]
    pub fn memory(&self, s: usize) -> u32 {
        self.memory[s]
    }

    #[inline]
    pub fn predecessors(&self, s: usize) -> &[u32] {
        &self.preds[self.pred_start[s] as usize..self.pred_start[s + 1] as usize]
    }

    /// Working time of the route closed from state `s`, if within `T`.
    #[inline]
    pub fn closed_time(&self, s: usize) -> Option<i64> {
        let t = self.time(s) + self.closing_time[self.vertex(s)];
        (t <= self.max_time).then_some(t)
    }

    /// Runs the label recursion for `arc_cost`, given in original orientation.
    pub fn label(&self, arc_cost: &Matrix<f64>) -> NgLabelTable<'_> {
        let ns = self.len();
        let mut cost = vec![f64::INFINITY; ns];
        let mut pred = vec![NONE; ns];
        if ns > 0 {
            cost[0] = 0.0;
        }
        let forward = self.direction == Direction::Forward;
        for v in 1..ns {
            let b = self.vertex(v);
            let mut best = f64::INFINITY;
            let mut arg = NONE;
            for &u in self.predecessors(v) {
                let a = self.vertex[u as usize] as usize;
                let c = if forward { arc_cost[(a, b)] } else { arc_cost[(b, a)] };
                let val = cost[u as usize] + c;
                if val < best {
                    best = val;
                    arg = u;
                }
            }
            cost[v] = best;
            pred[v] = arg;
        }
        NgLabelTable {
            space: self,
            cost,
            pred,
        }
    }
}

/// Label values `f(NG, t, i)` over an [`NgStateSpace`].
#[derive(Clone, Debug)]
pub struct NgLabelTable<'a> {
    space: &'a NgStateSpace,
    cost: Vec<f64>,
    pred: Vec<u32>,
}

impl<'a> NgLabelTable<'a> {
    pub fn space(&self) -> &'a NgStateSpace {
        self.space
    }

    #[inline]
    pub fn cost(&self, s: usize) -> f64 {
        self.cost[s]
    }

    /// Looks up `f(NG, t, i)` with `NG` given as a vertex set.
    pub fn value(&self, ng_set: &[usize], t: i64, i: usize) -> f64 {
        let ng = self.space.ng();
        let mut mem = 0u32;
        for &v in ng_set {
            match ng.position(i, v) {
                Some(p) => mem |= 1 << p,
                None => return f64::INFINITY,
            }
        }
        (0..self.space.len())
            .find(|&s| {
                self.space.vertex(s) == i && self.space.time(s) == t && self.space.memory(s) == mem
            })
            .map_or(f64::INFINITY, |s| self.cost[s])
    }

    /// Vertices of the optimal ng-path into state `s`, depot first.
    ///
    /// For a backward table the result is in traversal order of the
    /// original graph, ending at the depot.
    pub fn path(&self, s: usize) -> Vec<usize> {
        let mut seq = Vec::new();
        let mut cur = s as u32;
        while cur != NONE {
            seq.push(self.space.vertex(cur as usize));
            cur = self.pred[cur as usize];
        }
        if self.space.direction() == Direction::Forward {
            seq.reverse();
        }
        seq
    }

    /// Full route `(0, ..., i, 0)` closed from forward state `s`.
    pub fn route_sequence(&self, s: usize) -> Vec<usize> {
        debug_assert_eq!(self.space.direction(), Direction::Forward);
        let mut seq = self.path(s);
        seq.push(0);
        seq
    }
}

/// Forward label table for `arc_cost`.
pub fn forward_ng_dp<'a>(space: &'a NgStateSpace, arc_cost: &Matrix<f64>) -> NgLabelTable<'a> {
    debug_assert_eq!(space.direction(), Direction::Forward);
    space.label(arc_cost)
}

/// Backward label table for `arc_cost`, computed on the transposed matrices.
pub fn backward_ng_dp<'a>(space: &'a NgStateSpace, arc_cost: &Matrix<f64>) -> NgLabelTable<'a> {
    debug_assert_eq!(space.direction(), Direction::Backward);
    space.label(arc_cost)
}

/// Lower bounds `φ_i^t` on the modified cost of routes ending at `i`
/// with working time `t`.
#[derive(Clone, Debug)]
pub struct PhiTable {
    max_time: usize,
    phi: Vec<f64>,
    state: Vec<u32>,
}

impl PhiTable {
    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.phi[i * (self.max_time + 1) + t]
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    /// Forward state that attains `φ_i^t`.
    pub fn state(&self, i: usize, t: usize) -> Option<usize> {
        let s = self.state[i * (self.max_time + 1) + t];
        (s != NONE).then_some(s as usize)
    }
}

/// Modified arc costs `d_ij − λ_j` with `λ_0 = 0`.
pub fn penalised_costs(inst: &Instance, lambda: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(inst.n_vertices(), |i, j| {
        inst.cost[(i, j)] as f64 - if j == 0 { 0.0 } else { lambda[j] }
    })
}

/// φ-table for penalties `lambda` (indexed by vertex, entry 0 unused).
pub fn phi_table(inst: &Instance, space: &NgStateSpace, lambda: &[f64]) -> (PhiTable, Matrix<f64>) {
    let arc = penalised_costs(inst, lambda);
    let table = space.label(&arc);
    (phi_from_labels(inst, &table, &arc), arc)
}

/// φ-table from forward labels computed with arc costs `arc`.
pub fn phi_from_labels(inst: &Instance, table: &NgLabelTable<'_>, arc: &Matrix<f64>) -> PhiTable {
    let space = table.space();
    let tmax = inst.max_time as usize;
    let nv = inst.n_vertices();
    let mut phi = vec![f64::INFINITY; nv * (tmax + 1)];
    let mut state = vec![NONE; nv * (tmax + 1)];
    for s in 1..space.len() {
        let i = space.vertex(s);
        if let Some(t) = space.closed_time(s) {
            let val = table.cost(s) + arc[(i, 0)];
            let k = i * (tmax + 1) + t as usize;
            if val < phi[k] {
                phi[k] = val;
                state[k] = s as u32;
            }
        }
    }
    PhiTable {
        max_time: tmax,
        phi,
        state,
    }
}

/// Duals used to price columns.
#[derive(Clone, Debug)]
pub enum PricingDuals<'a> {
    /// Normalised-formulation duals `v` (index 0 is the fleet row) and `β`.
    Ncf { v: &'a [f64], beta: f64 },
    /// Charnes–Cooper duals `μ` (index 0 is the fleet row) and `ω`.
    Ccf { mu: &'a [f64], omega: f64 },
}

/// Arc costs whose sum along a route equals its reduced cost.
pub fn reduced_arc_costs(inst: &Instance, duals: &PricingDuals<'_>) -> Matrix<f64> {
    let nv = inst.n_vertices();
    match *duals {
        PricingDuals::Ccf { mu, omega } => Matrix::from_fn(nv, |i, j| {
            inst.cost[(i, j)] as f64
                - mu[j]
                - (inst.time[(i, j)] + inst.service[j]) as f64 * omega
        }),
        PricingDuals::Ncf { v, beta } => {
            let m = inst.m as f64;
            let omega_hat: f64 = inst.customers().map(|i| v[i]).sum::<f64>() + m * v[0];
            Matrix::from_fn(nv, |i, j| {
                let s = if inst.is_optional(j) { inst.service[j] } else { 0 };
                inst.cost[(i, j)] as f64 - beta * v[j] - omega_hat * (inst.time[(i, j)] + s) as f64
            })
        }
    }
}

/// Up to `limit` ng-routes with reduced cost below `cutoff`, most negative first.
pub fn price_ng_routes(
    inst: &Instance,
    space: &NgStateSpace,
    duals: &PricingDuals<'_>,
    cutoff: f64,
    limit: usize,
) -> Vec<(f64, Route)> {
    let arc = reduced_arc_costs(inst, duals);
    price_with_arc_costs(inst, space, &arc, cutoff, limit)
}

/// Pricing for explicit reduced arc costs.
pub fn price_with_arc_costs(
    inst: &Instance,
    space: &NgStateSpace,
    arc: &Matrix<f64>,
    cutoff: f64,
    limit: usize,
) -> Vec<(f64, Route)> {
    let table = space.label(arc);
    let mut cands: Vec<(f64, usize)> = (1..space.len())
        .filter(|&s| space.closed_time(s).is_some())
        .map(|s| (table.cost(s) + arc[(space.vertex(s), 0)], s))
        .filter(|&(rc, _)| rc < cutoff)
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cands.truncate(limit);
    cands
        .into_iter()
        .map(|(rc, s)| {
            let seq = table.route_sequence(s);
            let route = evaluate_sequence(inst, &seq).expect("ng-route within range");
            (rc, route)
        })
        .collect()
}
