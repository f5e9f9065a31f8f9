//! Exact solvers for small instances.

use crate::error::{Error, Result};
use crate::instance::{SparseGraph, TspInstance};
use crate::search::Tour;

pub const BRUTEFORCE_MAX_N: usize = 10;
pub const HELD_KARP_MAX_N: usize = 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    Bruteforce,
    HeldKarpDp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Canonical form, see [`Tour::canonical`].
    pub tour: Tour,
    pub length: f64,
    pub method: OracleMethod,
}

fn result(inst: &TspInstance, order: Vec<usize>, method: OracleMethod) -> OracleResult {
    let tour = Tour::from_order(order).expect("oracle builds permutations").canonical();
    let length = inst.tour_length(tour.order());
    OracleResult { tour, length, method }
}

/// In-place lexicographic successor; false once `v` is the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Tries all `(n − 1)! / 2` canonical tours; the lexicographically smallest
/// canonical order wins ties.
pub fn exact_bruteforce(inst: &TspInstance) -> Result<OracleResult> {
    let n = inst.n();
    if n > BRUTEFORCE_MAX_N {
        return Err(Error::TooLarge { solver: "exact_bruteforce", n, limit: BRUTEFORCE_MAX_N });
    }
    let d = inst.distance_matrix();
    let mut rest: Vec<usize> = (1..n).collect();
    let mut best = f64::INFINITY;
    let mut best_rest = rest.clone();
    loop {
        if rest[0] < rest[n - 2] {
            let mut len = d[rest[0]] + d[rest[n - 2]];
            for w in rest.windows(2) {
                len += d[w[0] * n + w[1]];
            }
            if len < best {
                best = len;
                best_rest.copy_from_slice(&rest);
            }
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    let mut order = Vec::with_capacity(n);
    order.push(0);
    order.extend(best_rest);
    Ok(result(inst, order, OracleMethod::Bruteforce))
}

/// Bitmask dynamic program over subsets of nodes `1..n`, `O(n² 2ⁿ)`.
pub fn exact_held_karp(inst: &TspInstance) -> Result<OracleResult> {
    let n = inst.n();
    if n > HELD_KARP_MAX_N {
        return Err(Error::TooLarge { solver: "exact_held_karp", n, limit: HELD_KARP_MAX_N });
    }
    let d = inst.distance_matrix();
    let m = n - 1; // node k + 1 is bit k
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (1 << m) * m];
    let mut parent = vec![u8::MAX; (1 << m) * m];
    for k in 0..m {
        dp[(1 << k) * m + k] = d[k + 1];
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = dp[mask * m + j];
            if here == f64::INFINITY {
                continue;
            }
            let row = (j + 1) * n;
            let mut rest = full & !mask;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let idx = (mask | (1 << k)) * m + k;
                let cand = here + d[row + k + 1];
                if cand < dp[idx] {
                    dp[idx] = cand;
                    parent[idx] = j as u8;
                }
            }
        }
    }
    let mut best = (f64::INFINITY, 0);
    for j in 0..m {
        let c = dp[full * m + j] + d[(j + 1) * n];
        if c < best.0 {
            best = (c, j);
        }
    }
    let mut order = Vec::with_capacity(n);
    let (mut mask, mut j) = (full, best.1);
    loop {
        order.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    Ok(result(inst, order, OracleMethod::HeldKarpDp))
}

/// Whether the optimal tour is unique up to `tol`.
///
/// Keeps the three cheapest Hamiltonian paths per DP state. Every undirected
/// tour is generated twice (once per direction), so the optimum is unique
/// exactly when the third cheapest closed path is worse by more than `tol`.
pub fn optimum_is_unique(inst: &TspInstance, tol: f64) -> Result<bool> {
    let n = inst.n();
    if n > HELD_KARP_MAX_N {
        return Err(Error::TooLarge { solver: "optimum_is_unique", n, limit: HELD_KARP_MAX_N });
    }
    let d = inst.distance_matrix();
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut dp = vec![[f64::INFINITY; 3]; (1 << m) * m];
    for k in 0..m {
        dp[(1 << k) * m + k][0] = d[k + 1];
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = dp[mask * m + j];
            if here[0] == f64::INFINITY {
                continue;
            }
            let row = (j + 1) * n;
            let mut rest = full & !mask;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let c = d[row + k + 1];
                let slot = &mut dp[(mask | (1 << k)) * m + k];
                for &v in &here {
                    insert_top3(slot, v + c);
                }
            }
        }
    }
    let mut top = [f64::INFINITY; 3];
    for j in 0..m {
        let c = d[(j + 1) * n];
        for &v in &dp[full * m + j] {
            insert_top3(&mut top, v + c);
        }
    }
    Ok(top[2] - top[0] > tol)
}

fn insert_top3(slot: &mut [f64; 3], v: f64) {
    if v >= slot[2] {
        return;
    }
    if v < slot[0] {
        *slot = [v, slot[0], slot[1]];
    } else if v < slot[1] {
        *slot = [slot[0], v, slot[1]];
    } else {
        slot[2] = v;
    }
}

/// Indicator over the flat edges of `graph`: directed edge on the optimal tour.
pub fn optimal_edges(inst: &TspInstance, graph: &SparseGraph) -> Result<Vec<bool>> {
    let opt = exact_held_karp(inst)?;
    Ok(tour_edge_indicator(graph, &opt.tour))
}

/// Marks every directed edge of `graph` whose undirected edge lies on `tour`.
pub fn tour_edge_indicator(graph: &SparseGraph, tour: &Tour) -> Vec<bool> {
    let gamma = graph.gamma();
    let mut out = vec![false; graph.edge_count()];
    for i in 0..graph.n() {
        let (p, s) = (tour.pred(i), tour.succ(i));
        for (slot, &j) in graph.neighbors(i).iter().enumerate() {
            out[i * gamma + slot] = j == p || j == s;
        }
    }
    out
}
