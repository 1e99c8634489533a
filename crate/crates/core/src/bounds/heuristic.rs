//! Primal heuristic over a pool of elementary routes.

use std::collections::HashSet;

use crate::instance::Instance;
use crate::model::{evaluate_sequence, Ratio, Route, Solution};

/// Number of distinct first routes tried by the greedy construction.
const STARTS: usize = 24;

fn ratio(c: i64, w: i64) -> Ratio {
    Ratio::new(c, w.max(1))
}

/// Greedy selection by resulting ratio, insertion repair, then local search.
///
/// Returns the best feasible solution found, or `None` if the pool cannot
/// be completed into one.
pub fn lagrangian_heuristic(inst: &Instance, pool: &[Route]) -> Option<Solution> {
    let mandatory: u128 = inst.mandatory().fold(0, |m, i| m | (1u128 << i));
    let mut seen = HashSet::new();
    let mut cands: Vec<&Route> = pool
        .iter()
        .filter(|r| r.elementary && r.working_time <= inst.max_time && seen.insert(r.vertices.clone()))
        .collect();
    cands.sort_by(|a, b| {
        ratio(a.cost, a.working_time)
            .cmp(&ratio(b.cost, b.working_time))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });

    let firsts: Vec<usize> = (0..cands.len())
        .filter(|&k| cands[k].mask() & mandatory != 0)
        .take(STARTS)
        .collect();
    let mut best: Option<Solution> = None;
    for first in firsts {
        let mut chosen = vec![cands[first].clone()];
        greedy_extend(inst, &cands, mandatory, &mut chosen);
        if let Some(sol) = repair(inst, chosen).and_then(|routes| Solution::new(inst, routes).ok()) {
            let sol = improve_solution(inst, sol);
            if best.as_ref().is_none_or(|b| sol.value < b.value) {
                best = Some(sol);
            }
        }
    }
    best
}

fn greedy_extend(inst: &Instance, cands: &[&Route], mandatory: u128, chosen: &mut Vec<Route>) {
    let mut covered = chosen.iter().fold(0u128, |m, r| m | r.mask());
    let mut c: i64 = chosen.iter().map(|r| r.cost).sum();
    let mut w: i64 = chosen.iter().map(|r| r.working_time).sum();
    while chosen.len() < inst.m {
        let done = covered & mandatory == mandatory;
        let mut pick: Option<(Ratio, usize)> = None;
        for (k, r) in cands.iter().enumerate() {
            let rm = r.mask();
            if rm & covered != 0 || (!done && rm & mandatory == 0) {
                continue;
            }
            let val = ratio(c + r.cost, w + r.working_time);
            if done && val >= ratio(c, w) {
                continue;
            }
            if pick.is_none_or(|p| val < p.0) {
                pick = Some((val, k));
            }
        }
        let Some((_, k)) = pick else { break };
        covered |= cands[k].mask();
        c += cands[k].cost;
        w += cands[k].working_time;
        chosen.push(cands[k].clone());
    }
}

/// Cheapest feasible insertion of `v` into `route`: `(Δcost, new route)`.
fn best_insertion(inst: &Instance, route: &Route, v: usize) -> Option<(i64, Route)> {
    let mut best: Option<(i64, Route)> = None;
    for pos in 1..route.vertices.len() {
        let mut seq = route.vertices.clone();
        seq.insert(pos, v);
        let r = evaluate_sequence(inst, &seq).ok()?;
        if r.working_time > inst.max_time {
            continue;
        }
        let delta = r.cost - route.cost;
        if best.as_ref().is_none_or(|b| delta < b.0) {
            best = Some((delta, r));
        }
    }
    best
}

/// Inserts every uncovered mandatory customer, opening new routes when allowed.
fn repair(inst: &Instance, mut routes: Vec<Route>) -> Option<Vec<Route>> {
    let covered = routes.iter().fold(0u128, |m, r| m | r.mask());
    for v in inst.mandatory() {
        if covered & (1u128 << v) != 0 {
            continue;
        }
        let mut best: Option<(i64, Option<usize>, Route)> = None;
        for (k, r) in routes.iter().enumerate() {
            if let Some((d, nr)) = best_insertion(inst, r, v) {
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, Some(k), nr));
                }
            }
        }
        if routes.len() < inst.m {
            if let Ok(nr) = crate::model::route_from_sequence(inst, &[0, v, 0]) {
                if best.as_ref().is_none_or(|b| nr.cost < b.0) {
                    best = Some((nr.cost, None, nr));
                }
            }
        }
        let (_, slot, nr) = best?;
        match slot {
            Some(k) => routes[k] = nr,
            None => routes.push(nr),
        }
    }
    Some(routes)
}

/// 2-opt and relocation inside one route while the cost drops and `T` holds.
fn improve_route(inst: &Instance, route: Route) -> Route {
    let mut best = route;
    loop {
        let len = best.vertices.len();
        let mut improved = false;
        'search: for i in 1..len - 1 {
            for j in i + 1..len - 1 {
                let mut seq = best.vertices.clone();
                seq[i..=j].reverse();
                if let Ok(r) = evaluate_sequence(inst, &seq) {
                    if r.working_time <= inst.max_time && r.cost < best.cost {
                        best = r;
                        improved = true;
                        break 'search;
                    }
                }
            }
            for j in 1..len - 1 {
                if j == i {
                    continue;
                }
                let mut seq = best.vertices.clone();
                let v = seq.remove(i);
                seq.insert(j, v);
                if let Ok(r) = evaluate_sequence(inst, &seq) {
                    if r.working_time <= inst.max_time && r.cost < best.cost {
                        best = r;
                        improved = true;
                        break 'search;
                    }
                }
            }
        }
        if !improved {
            return best;
        }
    }
}

enum Move {
    Replace(usize, Route),
    Open(Route),
    Drop(usize),
}

/// Local search on a feasible solution: route reordering, then adding or
/// dropping optional customers while the ratio strictly improves.
pub fn improve_solution(inst: &Instance, sol: Solution) -> Solution {
    let mut routes: Vec<Route> = sol.routes.into_iter().map(|r| improve_route(inst, r)).collect();
    loop {
        let c: i64 = routes.iter().map(|r| r.cost).sum();
        let w: i64 = routes.iter().map(|r| r.working_time).sum();
        let current = ratio(c, w);
        let covered = routes.iter().fold(0u128, |m, r| m | r.mask());
        let mut best: Option<(Ratio, Move)> = None;
        let consider = |val: Ratio, mv: Move, best: &mut Option<(Ratio, Move)>| {
            if val < current && best.as_ref().is_none_or(|b| val < b.0) {
                *best = Some((val, mv));
            }
        };
        for v in inst.optional() {
            if covered & (1u128 << v) != 0 {
                for (k, r) in routes.iter().enumerate() {
                    if r.visits(v) == 0 || r.customers().len() == 1 {
                        continue;
                    }
                    let seq: Vec<usize> = r.vertices.iter().copied().filter(|&x| x != v).collect();
                    if let Ok(nr) = crate::model::route_from_sequence(inst, &seq) {
                        let val = ratio(c - r.cost + nr.cost, w - r.working_time + nr.working_time);
                        consider(val, Move::Replace(k, nr), &mut best);
                    }
                }
            } else {
                for (k, r) in routes.iter().enumerate() {
                    if let Some((d, nr)) = best_insertion(inst, r, v) {
                        let val = ratio(c + d, w - r.working_time + nr.working_time);
                        consider(val, Move::Replace(k, nr), &mut best);
                    }
                }
                if routes.len() < inst.m {
                    if let Ok(nr) = crate::model::route_from_sequence(inst, &[0, v, 0]) {
                        let val = ratio(c + nr.cost, w + nr.working_time);
                        consider(val, Move::Open(nr), &mut best);
                    }
                }
            }
        }
        // Whole optional-only routes may also be dropped.
        for (k, r) in routes.iter().enumerate() {
            if routes.len() > 1 && r.customers().iter().all(|&v| inst.is_optional(v)) {
                consider(ratio(c - r.cost, w - r.working_time), Move::Drop(k), &mut best);
            }
        }
        let Some((_, mv)) = best else { break };
        match mv {
            Move::Replace(k, nr) => routes[k] = improve_route(inst, nr),
            Move::Open(nr) => routes.push(nr),
            Move::Drop(k) => {
                routes.remove(k);
            }
        }
    }
    Solution::new(inst, routes).expect("local search keeps feasibility")
}
