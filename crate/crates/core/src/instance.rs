//! Problem data: TSPLIB CVRP ingestion, the VRPFO instance type, and the
//! generators for the two benchmark classes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A capacitated VRP read from a TSPLIB file. Vertex 0 is the depot.
#[derive(Clone, Debug, PartialEq)]
pub struct CvrpInstance {
    pub name: String,
    pub coords: Vec<(f64, f64)>,
    pub demands: Vec<i64>,
    pub capacity: i64,
    pub n_vehicles: usize,
    pub cost: Matrix<i64>,
}

impl CvrpInstance {
    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    /// Builds an instance from coordinates, computing the EUC_2D matrix.
    pub fn from_coords(
        name: &str,
        coords: Vec<(f64, f64)>,
        demands: Vec<i64>,
        capacity: i64,
        n_vehicles: usize,
    ) -> Result<Self> {
        if coords.len() != demands.len() {
            return Err(Error::Input(format!(
                "{} coordinates but {} demands",
                coords.len(),
                demands.len()
            )));
        }
        if coords.is_empty() {
            return Err(Error::Input("instance has no vertices".into()));
        }
        let n = coords.len();
        let cost = Matrix::from_fn(n, |i, j| euclid2d_cost(coords[i], coords[j]));
        Ok(Self {
            name: name.to_string(),
            coords,
            demands,
            capacity,
            n_vehicles,
            cost,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ObjectiveKind {
    /// Minimise total cost over total load.
    CostOverLoad,
    /// Maximise total profit over total time; stored with negated profits.
    ProfitOverTime,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::CostOverLoad => "CostOverLoad",
            ObjectiveKind::ProfitOverTime => "ProfitOverTime",
        }
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CostOverLoad" => Ok(ObjectiveKind::CostOverLoad),
            "ProfitOverTime" => Ok(ObjectiveKind::ProfitOverTime),
            other => Err(Error::Input(format!("unknown objective kind '{other}'"))),
        }
    }
}

/// A VRP with a fractional objective.
///
/// Customers `1..=n1` are mandatory, `n1+1..=n1+n2` optional.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub n1: usize,
    pub n2: usize,
    pub service: Vec<i64>,
    pub cost: Matrix<i64>,
    pub time: Matrix<i64>,
    pub m: usize,
    pub max_time: i64,
    pub objective: ObjectiveKind,
}

impl Instance {
    /// Number of customers `n = n1 + n2`.
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n_vertices(&self) -> usize {
        self.n() + 1
    }

    pub fn is_mandatory(&self, i: usize) -> bool {
        i >= 1 && i <= self.n1
    }

    pub fn is_optional(&self, i: usize) -> bool {
        i > self.n1 && i <= self.n()
    }

    pub fn customers(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n()
    }

    pub fn mandatory(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n1
    }

    pub fn optional(&self) -> std::ops::RangeInclusive<usize> {
        self.n1 + 1..=self.n()
    }

    /// β: total service time of the mandatory customers.
    pub fn beta(&self) -> i64 {
        self.mandatory().map(|i| self.service[i]).sum()
    }

    /// Lower bound on the total working time of any feasible solution.
    pub fn total_time_lower_bound(&self) -> i64 {
        let n = self.n();
        self.mandatory()
            .map(|i| {
                let entry = (0..=n).filter(|&j| j != i).map(|j| self.time[(j, i)]).min();
                self.service[i] + entry.unwrap_or(0)
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.n_vertices();
        if self.n1 == 0 {
            return Err(Error::InvalidInstance("no mandatory customers".into()));
        }
        if self.service.len() != nv || self.cost.dim() != nv || self.time.dim() != nv {
            return Err(Error::InvalidInstance("dimension mismatch".into()));
        }
        if self.service[0] != 0 {
            return Err(Error::InvalidInstance("depot service time must be 0".into()));
        }
        if self.m == 0 {
            return Err(Error::InvalidInstance("fleet size must be positive".into()));
        }
        if self.max_time <= 0 {
            return Err(Error::InvalidInstance("working time limit must be positive".into()));
        }
        if self.n() > 127 {
            return Err(Error::InvalidInstance("at most 127 customers supported".into()));
        }
        for i in self.customers() {
            if self.service[i] <= 0 {
                return Err(Error::InvalidInstance(format!(
                    "customer {i} has non-positive service time"
                )));
            }
        }
        for i in 0..nv {
            for j in 0..nv {
                if self.time[(i, j)] < 0 {
                    return Err(Error::InvalidInstance(format!("negative time t[{i}][{j}]")));
                }
            }
        }
        for i in self.mandatory() {
            let w = self.service[i] + self.time[(0, i)] + self.time[(i, 0)];
            if w > self.max_time {
                return Err(Error::InvalidInstance(format!(
                    "mandatory customer {i} cannot be served within T"
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the `VRPFO v1` text format.
    pub fn to_text(&self) -> String {
        let nv = self.n_vertices();
        let mut out = String::new();
        out.push_str("VRPFO v1\n");
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.n1,
            self.n2,
            self.m,
            self.max_time,
            self.objective.as_str()
        );
        for i in 0..nv {
            let _ = writeln!(out, "{} {}", i, self.service[i]);
        }
        for (label, mat) in [("D", &self.cost), ("Tt", &self.time)] {
            out.push_str(label);
            out.push('\n');
            for i in 0..nv {
                let row: Vec<String> = (0..nv).map(|j| mat[(i, j)].to_string()).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    /// Parses the `VRPFO v1` text format. The instance name is supplied by the caller.
    pub fn from_text(name: &str, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };

        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
        if header != "VRPFO v1" {
            return Err(perr(ln, "expected header 'VRPFO v1'"));
        }
        let (ln, dims) = lines.next().ok_or_else(|| perr(ln + 1, "missing dimensions"))?;
        let toks: Vec<&str> = dims.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(perr(ln, "expected 'n1 n2 m T objective_kind'"));
        }
        let num = |s: &str| s.parse::<i64>().map_err(|_| perr(ln, "bad integer"));
        let n1 = num(toks[0])? as usize;
        let n2 = num(toks[1])? as usize;
        let m = num(toks[2])? as usize;
        let max_time = num(toks[3])?;
        let objective: ObjectiveKind = toks[4].parse().map_err(|_| perr(ln, "bad objective kind"))?;
        let nv = n1 + n2 + 1;

        let mut service = vec![0i64; nv];
        for expect in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "missing service line"))?;
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() != 2 || t[0].parse::<usize>().ok() != Some(expect) {
                return Err(perr(ln, "expected 'i s_i'"));
            }
            service[expect] = t[1].parse().map_err(|_| perr(ln, "bad service time"))?;
        }

        let mut read_matrix = |label: &str| -> Result<Matrix<i64>> {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "missing matrix"))?;
            if l != label {
                return Err(perr(ln, &format!("expected '{label}'")));
            }
            let mut data = Vec::with_capacity(nv * nv);
            for _ in 0..nv {
                let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated matrix"))?;
                let row: std::result::Result<Vec<i64>, _> =
                    l.split_whitespace().map(str::parse).collect();
                let row = row.map_err(|_| perr(ln, "bad matrix entry"))?;
                if row.len() != nv {
                    return Err(perr(ln, "wrong row length"));
                }
                data.extend(row);
            }
            Ok(Matrix::from_vec(nv, data))
        };
        let cost = read_matrix("D")?;
        let time = read_matrix("Tt")?;

        let inst = Instance {
            name: name.to_string(),
            n1,
            n2,
            service,
            cost,
            time,
            m,
            max_time,
            objective,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// TSPLIB `nint` of the Euclidean distance.
pub fn euclid2d_cost(p: (f64, f64), q: (f64, f64)) -> i64 {
    let dx = p.0 - q.0;
    let dy = p.1 - q.1;
    (dx * dx + dy * dy).sqrt().round() as i64
}

/// Parses a TSPLIB CVRP file with EUC_2D weights.
pub fn parse_tsplib(text: &str) -> Result<CvrpInstance> {
    #[derive(PartialEq)]
    enum Section {
        Header,
        Coords,
        Demands,
        Depot,
    }

    let mut name = None;
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<i64> = None;
    let mut vehicles: Option<usize> = None;
    let mut weight_type = None;
    let mut coords: Vec<Option<(f64, f64)>> = Vec::new();
    let mut demands: Vec<Option<i64>> = Vec::new();
    let mut depot: Option<usize> = None;
    let mut seen_demand = false;
    let mut seen_coords = false;
    let mut section = Section::Header;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        if line == "EOF" {
            break;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("NODE_COORD_SECTION") {
            let dim = dimension.ok_or_else(|| perr("DIMENSION must precede sections"))?;
            coords = vec![None; dim];
            seen_coords = true;
            section = Section::Coords;
            continue;
        }
        if upper.starts_with("DEMAND_SECTION") {
            let dim = dimension.ok_or_else(|| perr("DIMENSION must precede sections"))?;
            demands = vec![None; dim];
            seen_demand = true;
            section = Section::Demands;
            continue;
        }
        if upper.starts_with("DEPOT_SECTION") {
            section = Section::Depot;
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            if !key.trim().chars().any(|c| c.is_ascii_digit()) {
                let key = key.trim().to_ascii_uppercase();
                let value = value.trim();
                match key.as_str() {
                    "NAME" => name = Some(value.to_string()),
                    "DIMENSION" => {
                        dimension = Some(value.parse().map_err(|_| perr("bad DIMENSION"))?)
                    }
                    "CAPACITY" => capacity = Some(value.parse().map_err(|_| perr("bad CAPACITY"))?),
                    "VEHICLES" => vehicles = Some(value.parse().map_err(|_| perr("bad VEHICLES"))?),
                    "EDGE_WEIGHT_TYPE" => weight_type = Some(value.to_string()),
                    _ => {}
                }
                section = Section::Header;
                continue;
            }
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Header => return Err(perr("unexpected line outside any section")),
            Section::Coords => {
                if toks.len() != 3 {
                    return Err(perr("expected 'id x y'"));
                }
                let id: usize = toks[0].parse().map_err(|_| perr("bad node id"))?;
                let x: f64 = toks[1].parse().map_err(|_| perr("bad coordinate"))?;
                let y: f64 = toks[2].parse().map_err(|_| perr("bad coordinate"))?;
                if id == 0 || id > coords.len() {
                    return Err(perr("node id out of range"));
                }
                coords[id - 1] = Some((x, y));
            }
            Section::Demands => {
                if toks.len() != 2 {
                    return Err(perr("expected 'id demand'"));
                }
                let id: usize = toks[0].parse().map_err(|_| perr("bad node id"))?;
                let q: i64 = toks[1].parse().map_err(|_| perr("bad demand"))?;
                if id == 0 || id > demands.len() {
                    return Err(perr("node id out of range"));
                }
                if q < 0 {
                    return Err(perr("negative demand"));
                }
                demands[id - 1] = Some(q);
            }
            Section::Depot => {
                let v: i64 = toks[0].parse().map_err(|_| perr("bad depot id"))?;
                if v == -1 {
                    section = Section::Header;
                } else if depot.is_none() {
                    if v < 1 {
                        return Err(perr("bad depot id"));
                    }
                    depot = Some(v as usize);
                }
            }
        }
    }

    let missing = |what: &str| Error::Parse {
        line: text.lines().count(),
        msg: format!("missing {what}"),
    };
    let name = name.ok_or_else(|| missing("NAME"))?;
    let capacity = capacity.ok_or_else(|| missing("CAPACITY"))?;
    match weight_type.as_deref() {
        Some("EUC_2D") => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("EDGE_WEIGHT_TYPE {other}"))),
        None => return Err(missing("EDGE_WEIGHT_TYPE")),
    }
    if !seen_coords {
        return Err(missing("NODE_COORD_SECTION"));
    }
    if !seen_demand {
        return Err(missing("DEMAND_SECTION"));
    }
    let depot = depot.ok_or_else(|| missing("DEPOT_SECTION"))?;
    let coords: Vec<(f64, f64)> = coords
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| missing("coordinates for some nodes"))?;
    let demands: Vec<i64> = demands
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| missing("demands for some nodes"))?;
    if depot > coords.len() {
        return Err(missing("valid depot id"));
    }
    let n_vehicles = match vehicles {
        Some(k) => k,
        None => vehicles_from_name(&name).ok_or_else(|| missing("'-kK' suffix in NAME"))?,
    };

    // Depot first, then the remaining vertices in file order.
    let d = depot - 1;
    let order: Vec<usize> = std::iter::once(d).chain((0..coords.len()).filter(|&i| i != d)).collect();
    let coords: Vec<(f64, f64)> = order.iter().map(|&i| coords[i]).collect();
    let mut demands: Vec<i64> = order.iter().map(|&i| demands[i]).collect();
    demands[0] = 0;
    if let Some(&q) = demands.iter().find(|&&q| q > capacity) {
        return Err(Error::InvalidInstance(format!("demand {q} exceeds capacity {capacity}")));
    }
    CvrpInstance::from_coords(&name, coords, demands, capacity, n_vehicles)
}

fn vehicles_from_name(name: &str) -> Option<usize> {
    let pos = name.rfind("-k")?;
    let digits: String = name[pos + 2..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Exact bin packing by depth-first branch and bound.
pub fn bpp_min_bins(weights: &[i64], capacity: i64) -> Result<usize> {
    if capacity <= 0 {
        return Err(Error::Input("capacity must be positive".into()));
    }
    if let Some(&w) = weights.iter().find(|&&w| w > capacity || w < 0) {
        return Err(Error::Infeasible(format!("item {w} does not fit capacity {capacity}")));
    }
    let mut items: Vec<i64> = weights.iter().copied().filter(|&w| w > 0).collect();
    if items.is_empty() {
        return Ok(0);
    }
    items.sort_unstable_by(|a, b| b.cmp(a));
    let total: i64 = items.iter().sum();
    let lower = ((total + capacity - 1) / capacity) as usize;

    // First-fit decreasing upper bound.
    let mut ffd: Vec<i64> = Vec::new();
    for &w in &items {
        match ffd.iter_mut().find(|r| **r >= w) {
            Some(r) => *r -= w,
            None => ffd.push(capacity - w),
        }
    }
    let mut best = ffd.len();
    if best == lower {
        return Ok(best);
    }

    struct Search<'a> {
        items: &'a [i64],
        suffix: Vec<i64>,
        capacity: i64,
        best: usize,
        lower: usize,
        nodes: u64,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize, bins: &mut Vec<i64>) {
            if self.best == self.lower || self.nodes > 50_000_000 {
                return;
            }
            self.nodes += 1;
            if k == self.items.len() {
                self.best = self.best.min(bins.len());
                return;
            }
            let free: i64 = bins.iter().sum();
            let extra = (self.suffix[k] - free).max(0);
            let need = bins.len() + ((extra + self.capacity - 1) / self.capacity) as usize;
            if need >= self.best {
                return;
            }
            let w = self.items[k];
            let mut tried: Vec<i64> = Vec::new();
            for b in 0..bins.len() {
                if bins[b] >= w && !tried.contains(&bins[b]) {
                    tried.push(bins[b]);
                    bins[b] -= w;
                    self.go(k + 1, bins);
                    bins[b] += w;
                }
            }
            if bins.len() + 1 < self.best {
                bins.push(self.capacity - w);
                self.go(k + 1, bins);
                bins.pop();
            }
        }
    }
    let mut suffix = vec![0i64; items.len() + 1];
    for k in (0..items.len()).rev() {
        suffix[k] = suffix[k + 1] + items[k];
    }
    let mut s = Search {
        items: &items,
        suffix,
        capacity,
        best,
        lower,
        nodes: 0,
    };
    s.go(0, &mut Vec::new());
    best = s.best;
    Ok(best)
}

fn mandatory_count(n_customers: usize, alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha {alpha} outside (0,1)")));
    }
    let n1 = (alpha * n_customers as f64 + 1e-9).floor() as usize;
    if n1 == 0 {
        return Err(Error::InvalidInstance("alpha leaves no mandatory customers".into()));
    }
    Ok(n1)
}

/// Class CA: cost over load. `d = c`, `t = 0`, `T = Q`, `s_i = q_i`.
pub fn make_class_ca(cvrp: &CvrpInstance, alpha: f64, name: &str) -> Result<Instance> {
    let nv = cvrp.n_vertices();
    let n = nv - 1;
    let n1 = mandatory_count(n, alpha)?;
    if let Some(i) = (1..nv).find(|&i| cvrp.demands[i] == 0) {
        return Err(Error::InvalidInstance(format!("customer {i} has zero demand")));
    }
    let mandatory_demands: Vec<i64> = cvrp.demands[1..=n1].to_vec();
    let bins = bpp_min_bins(&mandatory_demands, cvrp.capacity)?;
    let m = (bins + 1).min(cvrp.n_vehicles);
    let inst = Instance {
        name: name.to_string(),
        n1,
        n2: n - n1,
        service: cvrp.demands.clone(),
        cost: cvrp.cost.clone(),
        time: Matrix::filled(nv, 0),
        m,
        max_time: cvrp.capacity,
        objective: ObjectiveKind::CostOverLoad,
    };
    inst.validate()?;
    Ok(inst)
}

/// Class PA: profit over time. Profits are collected on entering a customer.
///
/// Service times, `T` and `m` come from a sweep solution of the CVRP.
pub fn make_class_pa(cvrp: &CvrpInstance, alpha: f64, name: &str) -> Result<Instance> {
    let nv = cvrp.n_vertices();
    let n = nv - 1;
    let n1 = mandatory_count(n, alpha)?;
    let service: Vec<i64> = (0..nv)
        .map(|i| if i == 0 { 0 } else { ((cvrp.demands[i] + 1) / 2).max(1) })
        .collect();
    let routes = sweep_routes(cvrp);
    let mut longest = 0i64;
    for r in &routes {
        let mut prev = 0;
        let mut dur = 0;
        for &v in r {
            dur += cvrp.cost[(prev, v)] + service[v];
            prev = v;
        }
        dur += cvrp.cost[(prev, 0)];
        longest = longest.max(dur);
    }
    let mut max_time = (longest * 105 + 99) / 100;
    for i in 1..nv {
        max_time = max_time.max(service[i] + cvrp.cost[(0, i)] + cvrp.cost[(i, 0)]);
    }
    let cost = Matrix::from_fn(nv, |_, j| if j == 0 { 0 } else { -cvrp.demands[j] });
    let inst = Instance {
        name: name.to_string(),
        n1,
        n2: n - n1,
        service,
        cost,
        time: cvrp.cost.clone(),
        m: routes.len().max(1),
        max_time,
        objective: ObjectiveKind::ProfitOverTime,
    };
    inst.validate()?;
    Ok(inst)
}

/// Customers by polar angle around the depot, cut into routes at capacity.
fn sweep_routes(cvrp: &CvrpInstance) -> Vec<Vec<usize>> {
    let (x0, y0) = cvrp.coords[0];
    let mut order: Vec<(f64, usize)> = (1..cvrp.n_vertices())
        .map(|i| {
            let (x, y) = cvrp.coords[i];
            ((y - y0).atan2(x - x0), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut routes = Vec::new();
    let mut current = Vec::new();
    let mut load = 0;
    for (_, i) in order {
        let q = cvrp.demands[i];
        if load + q > cvrp.capacity && !current.is_empty() {
            routes.push(std::mem::take(&mut current));
            load = 0;
        }
        current.push(i);
        load += q;
    }
    if !current.is_empty() {
        routes.push(current);
    }
    routes
}
