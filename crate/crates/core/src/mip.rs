//! Branch and bound for set partitioning over a fixed route set.
//!
//! Minimises `Σ cost_ℓ x_ℓ` subject to every mandatory customer covered
//! exactly once, every optional one at most once, and `m_min ≤ Σ x ≤ m_max`.

use std::collections::HashMap;
use std::time::Instant;

use log::debug;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Relation};
use crate::model::Route;

/// Nodes explored depth-first between jumps to the best open bound.
const RESTART_EVERY: usize = 1000;

const INT_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct MipParams {
    pub m_min: usize,
    pub m_max: usize,
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Costs are integers, so bounds may be rounded up before pruning.
    pub integral_costs: bool,
}

#[derive(Clone, Debug)]
pub struct MipResult {
    /// Indices of the selected routes, ascending.
    pub x: Vec<usize>,
    pub objective: f64,
    pub proven_optimal: bool,
    pub root_bound: f64,
    pub elapsed: f64,
    pub nodes: usize,
}

struct Column {
    index: usize,
    mask: u128,
    cost: f64,
}

struct Node {
    bound: f64,
    /// Branching decisions `(column, value)` on top of the root.
    fixed: Vec<(u32, bool)>,
}

struct Search<'a> {
    inst: &'a Instance,
    cols: Vec<Column>,
    params: &'a MipParams,
    /// Columns removed for good by root reduced costs.
    banned: Vec<bool>,
    best: Option<(f64, Vec<usize>)>,
}

enum NodeLp {
    Infeasible,
    Solved { value: f64, x: Vec<(usize, f64)> },
}

impl Search<'_> {
    fn tol(&self, z: f64) -> f64 {
        1e-9 * (1.0 + z.abs())
    }

    /// Whether a node with lower bound `lb` may still beat the incumbent.
    fn promising(&self, lb: f64) -> bool {
        let Some((inc, _)) = &self.best else { return true };
        let lb = if self.params.integral_costs { (lb - INT_TOL).ceil() } else { lb };
        lb < inc - self.tol(*inc)
    }

    fn offer(&mut self, value: f64, mut sel: Vec<usize>) {
        if self.best.as_ref().is_none_or(|(inc, _)| value < inc - self.tol(*inc)) {
            sel.sort_unstable();
            debug!("mip incumbent {value}");
            self.best = Some((value, sel));
        }
    }

    /// Solves the LP of a node given by its decisions.
    fn solve_node(&self, fixed: &[(u32, bool)]) -> (NodeLp, Vec<f64>, Vec<usize>) {
        let mut covered = 0u128;
        let mut ones = 0usize;
        let mut base = 0.0;
        let mut zero = vec![];
        for &(c, v) in fixed {
            if v {
                let col = &self.cols[c as usize];
                if covered & col.mask != 0 {
                    return (NodeLp::Infeasible, vec![], vec![]);
                }
                covered |= col.mask;
                ones += 1;
                base += col.cost;
            } else {
                zero.push(c as usize);
            }
        }
        zero.sort_unstable();
        if ones > self.params.m_max {
            return (NodeLp::Infeasible, vec![], vec![]);
        }
        let free: Vec<usize> = (0..self.cols.len())
            .filter(|&c| {
                !self.banned[c]
                    && self.cols[c].mask & covered == 0
                    && zero.binary_search(&c).is_err()
            })
            .collect();
        let n = self.inst.n();
        let mut p = LinearProgram::new(free.len());
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + 1];
        for (k, &c) in free.iter().enumerate() {
            p.costs[k] = self.cols[c].cost;
            let mut bits = self.cols[c].mask;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                rows[v].push((k, 1.0));
            }
        }
        let mut row_of: Vec<Option<usize>> = vec![None; n + 1];
        for v in self.inst.customers() {
            if covered >> v & 1 == 1 {
                continue;
            }
            let coefs = std::mem::take(&mut rows[v]);
            if self.inst.is_mandatory(v) {
                if coefs.is_empty() {
                    return (NodeLp::Infeasible, vec![], vec![]);
                }
                row_of[v] = Some(p.add_row(coefs, Relation::Eq, 1.0));
            } else if !coefs.is_empty() {
                row_of[v] = Some(p.add_row(coefs, Relation::Le, 1.0));
            }
        }
        let fleet_from = p.rows.len();
        let all: Vec<(usize, f64)> = (0..free.len()).map(|k| (k, 1.0)).collect();
        p.add_row(all.clone(), Relation::Le, (self.params.m_max - ones) as f64);
        if self.params.m_min > ones {
            p.add_row(all, Relation::Ge, (self.params.m_min - ones) as f64);
        }
        let res = solve_lp(&p).expect("node LP is well formed");
        if res.status != LpStatus::Optimal {
            return (NodeLp::Infeasible, vec![], vec![]);
        }
        let x = free.iter().zip(&res.x).filter(|(_, &v)| v > INT_TOL).map(|(&c, &v)| (c, v)).collect();
        let fleet: f64 = res.duals[fleet_from..].iter().sum();
        let rc: Vec<f64> = free
            .iter()
            .map(|&c| {
                let col = &self.cols[c];
                let mut rc = col.cost - fleet;
                let mut bits = col.mask;
                while bits != 0 {
                    let v = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    rc -= row_of[v].map_or(0.0, |r| res.duals[r]);
                }
                rc
            })
            .collect();
        (
            NodeLp::Solved {
                value: base + res.objective,
                x,
            },
            rc,
            free,
        )
    }
}

/// Solves the set-partitioning problem over `routes` with objective `costs`.
///
/// `warm` is a known feasible selection used as the first incumbent.
pub fn solve_fp(
    inst: &Instance,
    routes: &[Route],
    costs: &[f64],
    params: &MipParams,
    warm: Option<&[usize]>,
) -> Result<MipResult> {
    let start = Instant::now();
    assert_eq!(routes.len(), costs.len(), "one cost per route");
    if params.m_min > params.m_max {
        return Err(Error::Input(format!("vehicle window [{}, {}] is empty", params.m_min, params.m_max)));
    }
    // Keep the cheapest column per customer set.
    let mut by_mask: HashMap<u128, usize> = HashMap::new();
    for (k, r) in routes.iter().enumerate() {
        if !r.elementary || r.working_time > inst.max_time {
            continue;
        }
        by_mask
            .entry(r.mask())
            .and_modify(|e| {
                if costs[k] < costs[*e] {
                    *e = k;
                }
            })
            .or_insert(k);
    }
    let mut keep: Vec<usize> = by_mask.into_values().collect();
    keep.sort_unstable();
    let cols: Vec<Column> = keep
        .iter()
        .map(|&k| Column {
            index: k,
            mask: routes[k].mask(),
            cost: costs[k],
        })
        .collect();
    let mut search = Search {
        inst,
        banned: vec![false; cols.len()],
        cols,
        params,
        best: None,
    };
    if let Some(sel) = warm {
        if let Some(value) = selection_value(inst, routes, costs, params, sel) {
            search.offer(value, sel.to_vec());
        }
    }

    let mut nodes = 0;
    let (root, rc, free) = search.solve_node(&[]);
    let root_bound = match &root {
        NodeLp::Infeasible => f64::INFINITY,
        NodeLp::Solved { value, .. } => *value,
    };
    if let (NodeLp::Solved { value, .. }, Some((inc, _))) = (&root, &search.best) {
        let gap = inc - value;
        for (k, &c) in free.iter().enumerate() {
            if rc[k] > gap + search.tol(*inc) + 1e-7 * (1.0 + rc[k].abs()) {
                search.banned[c] = true;
            }
        }
    }
    let mut open = vec![Node {
        bound: root_bound,
        fixed: Vec::new(),
    }];
    let mut pending_root = Some(root);
    let mut timed_out = false;
    while let Some(node) = open.pop() {
        if start.elapsed().as_secs_f64() > params.time_limit {
            open.push(node);
            timed_out = true;
            break;
        }
        if !search.promising(node.bound) {
            continue;
        }
        nodes += 1;
        let lp = match pending_root.take() {
            Some(r) if node.fixed.is_empty() => r,
            _ => search.solve_node(&node.fixed).0,
        };
        let NodeLp::Solved { value, x } = lp else { continue };
        if !search.promising(value) {
            continue;
        }
        // Most fractional column, ties to the lower route index.
        let frac = x
            .iter()
            .filter(|(_, v)| *v < 1.0 - INT_TOL)
            .min_by(|a, b| {
                (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()).then(search.cols[a.0].index.cmp(&search.cols[b.0].index))
            })
            .map(|&(c, _)| c);
        match frac {
            None => {
                let mut sel: Vec<usize> =
                    node.fixed.iter().filter(|f| f.1).map(|f| search.cols[f.0 as usize].index).collect();
                sel.extend(x.iter().map(|&(c, _)| search.cols[c].index));
                if let Some(v) = selection_value(inst, routes, costs, params, &sel) {
                    search.offer(v, sel);
                }
            }
            Some(c) => {
                let mut zero = node.fixed.clone();
                zero.push((c as u32, false));
                let mut one = node.fixed;
                one.push((c as u32, true));
                open.push(Node { bound: value, fixed: zero });
                open.push(Node { bound: value, fixed: one });
            }
        }
        if nodes % RESTART_EVERY == 0 && !open.is_empty() {
            let k = (0..open.len()).min_by(|&a, &b| open[a].bound.total_cmp(&open[b].bound)).unwrap();
            let last = open.len() - 1;
            open.swap(k, last);
        }
    }
    let proven_optimal = !timed_out || open.iter().all(|n| !search.promising(n.bound));
    let elapsed = start.elapsed().as_secs_f64();
    match search.best {
        Some((objective, x)) => Ok(MipResult {
            x,
            objective,
            proven_optimal,
            root_bound,
            elapsed,
            nodes,
        }),
        None if timed_out => Err(Error::TimeLimit("no feasible selection found in time".into())),
        None => Err(Error::Infeasible("no selection of routes covers every mandatory customer".into())),
    }
}

/// Objective of a selection, or `None` if it is not feasible.
fn selection_value(inst: &Instance, routes: &[Route], costs: &[f64], params: &MipParams, sel: &[usize]) -> Option<f64> {
    let mut covered = 0u128;
    for &k in sel {
        let r = routes.get(k)?;
        if !r.elementary || r.working_time > inst.max_time || covered & r.mask() != 0 {
            return None;
        }
        covered |= r.mask();
    }
    let mandatory = inst.mandatory().fold(0u128, |m, i| m | 1u128 << i);
    if covered & mandatory != mandatory || sel.len() < params.m_min || sel.len() > params.m_max {
        return None;
    }
    Some(sel.iter().map(|&k| costs[k]).sum())
}
