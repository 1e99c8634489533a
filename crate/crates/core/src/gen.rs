//! Seeded random instances for property tests and oracle checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brute::BruteForce;
use crate::instance::{euclid2d_cost, Instance, ObjectiveKind};
use crate::matrix::Matrix;

/// Largest working-time limit produced by the generator.
pub const MAX_RANDOM_T: i64 = 30;

/// A random instance with `n` customers and `T ≤ 30`.
///
/// Cost-over-load instances mimic the CA class (zero travel times, service
/// equal to demand). Profit-over-time instances mimic the PA class (profits
/// collected on arc entry, Euclidean travel times).
pub fn random_instance(seed: u64, kind: ObjectiveKind, n: usize) -> Instance {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let nv = n + 1;
    let n1 = rng.gen_range(1..=n);
    let m = rng.gen_range(1..=3usize);
    match kind {
        ObjectiveKind::CostOverLoad => {
            let coords: Vec<(f64, f64)> =
                (0..nv).map(|_| (rng.gen_range(0..=20) as f64, rng.gen_range(0..=20) as f64)).collect();
            let max_time = rng.gen_range(12..=MAX_RANDOM_T);
            let service: Vec<i64> = (0..nv)
                .map(|i| if i == 0 { 0 } else { rng.gen_range(1..=max_time.min(12)) })
                .collect();
            Instance {
                name: format!("rand-ca-{seed}"),
                n1,
                n2: n - n1,
                service,
                cost: Matrix::from_fn(nv, |i, j| euclid2d_cost(coords[i], coords[j])),
                time: Matrix::filled(nv, 0),
                m,
                max_time,
                objective: kind,
            }
        }
        ObjectiveKind::ProfitOverTime => {
            let coords: Vec<(f64, f64)> =
                (0..nv).map(|_| (rng.gen_range(0..=6) as f64, rng.gen_range(0..=6) as f64)).collect();
            let profit: Vec<i64> = (0..nv).map(|i| if i == 0 { 0 } else { rng.gen_range(1..=10) }).collect();
            let service: Vec<i64> = (0..nv).map(|i| if i == 0 { 0 } else { rng.gen_range(1..=3) }).collect();
            let time = Matrix::from_fn(nv, |i, j| euclid2d_cost(coords[i], coords[j]));
            let need = (1..nv).map(|i| service[i] + time[(0, i)] + time[(i, 0)]).max().unwrap_or(1);
            let max_time = rng.gen_range(need..=MAX_RANDOM_T.max(need));
            Instance {
                name: format!("rand-pa-{seed}"),
                n1,
                n2: n - n1,
                service,
                cost: Matrix::from_fn(nv, |_, j| -profit[j]),
                time,
                m,
                max_time,
                objective: kind,
            }
        }
    }
}

/// A random instance that is valid and has at least one feasible solution.
///
/// Draws successive sub-seeds until the brute-force oracle confirms
/// feasibility, so the result is still a pure function of `seed`.
pub fn random_feasible_instance(seed: u64, kind: ObjectiveKind, max_n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(1..=max_n);
        let sub = rng.gen::<u64>();
        let inst = random_instance(sub, kind, n);
        if inst.validate().is_ok() && inst.max_time <= MAX_RANDOM_T && BruteForce::new(&inst).optimum().is_some() {
            return inst;
        }
    }
}
