//! Exhaustive reference solver for tiny instances.
//!
//! Used as an independent oracle: it shares no code with the bounding,
//! enumeration or branch-and-bound machinery.

use std::collections::HashSet;

use crate::instance::Instance;
use crate::model::{Ratio, Route, Solution};

/// Every elementary route with working time at most `T`, by depth-first search.
pub fn enumerate_elementary_routes(inst: &Instance) -> Vec<Route> {
    fn dfs(inst: &Instance, seq: &mut Vec<usize>, used: &mut [bool], cost: i64, time: i64, out: &mut Vec<Route>) {
        let last = *seq.last().unwrap();
        if last != 0 {
            let w = time + inst.time[(last, 0)];
            if w <= inst.max_time {
                let mut vertices = seq.clone();
                vertices.push(0);
                out.push(Route {
                    vertices,
                    cost: cost + inst.cost[(last, 0)],
                    working_time: w,
                    elementary: true,
                });
            }
        }
        for j in inst.customers() {
            if used[j] {
                continue;
            }
            let t = time + inst.time[(last, j)] + inst.service[j];
            if t > inst.max_time {
                continue;
            }
            used[j] = true;
            seq.push(j);
            dfs(inst, seq, used, cost + inst.cost[(last, j)], t, out);
            seq.pop();
            used[j] = false;
        }
    }
    let mut out = Vec::new();
    let mut used = vec![false; inst.n_vertices()];
    dfs(inst, &mut vec![0], &mut used, 0, 0, &mut out);
    out
}

const INF: i64 = i64::MAX / 4;

/// Partition dynamic program over customer subsets.
///
/// `dp[k][mask][W]` is the least total cost of exactly `k` disjoint routes
/// whose customers form `mask` and whose working times sum to `W`.
pub struct BruteForce<'a> {
    inst: &'a Instance,
    routes: Vec<Route>,
    /// For each customer mask, `(w, cost, route index)` with least cost per `w`.
    by_mask: Vec<Vec<(i64, i64, usize)>>,
    dp: Vec<Vec<Vec<i64>>>,
    width: usize,
}

impl<'a> BruteForce<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let n = inst.n();
        assert!(n <= 12, "brute force is limited to tiny instances");
        let routes = enumerate_elementary_routes(inst);
        let full = 1usize << n;
        let tmax = inst.max_time as usize;
        let mut best = vec![vec![(INF, usize::MAX); tmax + 1]; full];
        for (idx, r) in routes.iter().enumerate() {
            let mask = (r.mask() >> 1) as usize;
            let slot = &mut best[mask][r.working_time as usize];
            if r.cost < slot.0 {
                *slot = (r.cost, idx);
            }
        }
        let by_mask: Vec<Vec<(i64, i64, usize)>> = best
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .enumerate()
                    .filter(|(_, (c, _))| *c < INF)
                    .map(|(w, (c, idx))| (w as i64, c, idx))
                    .collect()
            })
            .collect();

        let width = inst.m * tmax + 1;
        let mut dp = vec![vec![vec![INF; width]; full]; inst.m + 1];
        dp[0][0][0] = 0;
        for k in 1..=inst.m {
            for mask in 1..full {
                let low = mask & mask.wrapping_neg();
                let mut sub = mask;
                while sub > 0 {
                    if sub & low != 0 && !by_mask[sub].is_empty() {
                        let rest = mask ^ sub;
                        for wi in 0..width {
                            let prev = dp[k - 1][rest][wi];
                            if prev >= INF {
                                continue;
                            }
                            for &(w, c, _) in &by_mask[sub] {
                                let tot = wi + w as usize;
                                if tot < width && prev + c < dp[k][mask][tot] {
                                    dp[k][mask][tot] = prev + c;
                                }
                            }
                        }
                    }
                    sub = (sub - 1) & mask;
                }
            }
        }
        Self {
            inst,
            routes,
            by_mask,
            dp,
            width,
        }
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    fn mandatory_mask(&self) -> usize {
        (1usize << self.inst.n1) - 1
    }

    /// Optimal ratio and one optimal solution, or `None` if infeasible.
    pub fn optimum(&self) -> Option<(Ratio, Solution)> {
        let fmask = self.mandatory_mask();
        let mut best: Option<(Ratio, usize, usize, usize)> = None;
        for k in 1..=self.inst.m {
            for mask in 0..self.dp[k].len() {
                if mask & fmask != fmask {
                    continue;
                }
                for w in 1..self.width {
                    let c = self.dp[k][mask][w];
                    if c >= INF {
                        continue;
                    }
                    let r = Ratio::new(c, w as i64);
                    if best.is_none_or(|b| r < b.0) {
                        best = Some((r, k, mask, w));
                    }
                }
            }
        }
        let (r, k, mask, w) = best?;
        let routes = self.reconstruct(k, mask, w);
        let sol = Solution::new(self.inst, routes).expect("oracle solution is feasible");
        debug_assert_eq!(sol.value, r);
        Some((r, sol))
    }

    fn reconstruct(&self, k: usize, mask: usize, w: usize) -> Vec<Route> {
        if k == 0 {
            return Vec::new();
        }
        let target = self.dp[k][mask][w];
        let low = mask & mask.wrapping_neg();
        let mut sub = mask;
        while sub > 0 {
            if sub & low != 0 {
                let rest = mask ^ sub;
                for &(rw, c, idx) in &self.by_mask[sub] {
                    let rw = rw as usize;
                    if rw <= w && self.dp[k - 1][rest][w - rw] < INF && self.dp[k - 1][rest][w - rw] + c == target {
                        let mut out = self.reconstruct(k - 1, rest, w - rw);
                        out.push(self.routes[idx].clone());
                        return out;
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
        unreachable!("dp entry without witness")
    }

    /// Sequences of every route that belongs to at least one optimal solution.
    pub fn optimal_routes(&self) -> HashSet<Vec<usize>> {
        let Some((z, _)) = self.optimum() else {
            return HashSet::new();
        };
        let (p, q) = (z.num() as i128, z.den() as i128);
        let full = self.dp[0].len();
        let fmask = self.mandatory_mask();
        // comp[rest][W]: least cost of at most m−1 routes covering exactly `rest`.
        let mut comp = vec![vec![INF; self.width]; full];
        for k in 0..self.inst.m {
            for rest in 0..full {
                for w in 0..self.width {
                    comp[rest][w] = comp[rest][w].min(self.dp[k][rest][w]);
                }
            }
        }
        let mut out = HashSet::new();
        for r in &self.routes {
            let rm = (r.mask() >> 1) as usize;
            let mut found = false;
            'outer: for rest in 0..full {
                if rest & rm != 0 || (rest | rm) & fmask != fmask {
                    continue;
                }
                for w in 0..self.width {
                    let c = comp[rest][w];
                    if c >= INF {
                        continue;
                    }
                    let num = (r.cost + c) as i128;
                    let den = r.working_time as i128 + w as i128;
                    if q * num == p * den {
                        found = true;
                        break 'outer;
                    }
                }
            }
            if found {
                out.insert(r.vertices.clone());
            }
        }
        out
    }

    /// Vehicle counts used by at least one optimal solution.
    pub fn optimal_vehicle_counts(&self) -> Vec<usize> {
        let Some((z, _)) = self.optimum() else {
            return Vec::new();
        };
        let fmask = self.mandatory_mask();
        (1..=self.inst.m)
            .filter(|&k| {
                (0..self.dp[k].len()).any(|mask| {
                    mask & fmask == fmask
                        && (1..self.width).any(|w| {
                            let c = self.dp[k][mask][w];
                            c < INF && Ratio::new(c, w as i64) == z
                        })
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::ObjectiveKind;
    use crate::matrix::Matrix;

    /// Checks every assignment of customers to routes directly.
    fn naive_optimum(inst: &Instance) -> Option<Ratio> {
        let routes = enumerate_elementary_routes(inst);
        let mut best: Option<Ratio> = None;
        fn rec(inst: &Instance, routes: &[Route], start: usize, used: u128, chosen: &mut Vec<usize>, best: &mut Option<Ratio>) {
            let fmask: u128 = ((1u128 << inst.n1) - 1) << 1;
            if used & fmask == fmask && !chosen.is_empty() {
                let c: i64 = chosen.iter().map(|&i| routes[i].cost).sum();
                let w: i64 = chosen.iter().map(|&i| routes[i].working_time).sum();
                let r = Ratio::new(c, w);
                if best.is_none_or(|b| r < b) {
                    *best = Some(r);
                }
            }
            if chosen.len() == inst.m {
                return;
            }
            for i in start..routes.len() {
                let m = routes[i].mask();
                if m & used == 0 {
                    chosen.push(i);
                    rec(inst, routes, i + 1, used | m, chosen, best);
                    chosen.pop();
                }
            }
        }
        rec(inst, &routes, 0, 0, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn agrees_with_naive_search() {
        for seed in 0..30 {
            let kind = if seed % 2 == 0 { ObjectiveKind::CostOverLoad } else { ObjectiveKind::ProfitOverTime };
            let inst = crate::gen::random_instance(seed, kind, 4);
            if inst.validate().is_err() {
                continue;
            }
            let bf = BruteForce::new(&inst);
            assert_eq!(bf.optimum().map(|o| o.0), naive_optimum(&inst), "seed {seed}");
        }
    }

    #[test]
    fn single_route_instance() {
        let inst = Instance {
            name: "one".into(),
            n1: 1,
            n2: 0,
            service: vec![0, 7],
            cost: Matrix::from_vec(2, vec![0, 10, 10, 0]),
            time: Matrix::filled(2, 0),
            m: 1,
            max_time: 10,
            objective: ObjectiveKind::CostOverLoad,
        };
        let bf = BruteForce::new(&inst);
        assert_eq!(bf.optimum().unwrap().0, Ratio::new(20, 7));
        assert_eq!(bf.optimal_routes().len(), 1);
    }
}
