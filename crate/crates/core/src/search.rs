//! Candidate-restricted sequential λ-opt local search and multi-trial driver.
//!
//! A move is grown as an alternating chain `t1 t2 … t2k`: tour edges
//! `(t2i−1, t2i)` are removed and edges `(t2i, t2i+1)` plus the closing edge
//! `(t2k, t1)` are added. Added edges must be candidates of one of their
//! endpoints, partial gains must stay positive, and the closed chain must
//! reconnect the tour segments into a single cycle. For each base node the
//! chain length is deepened from 2 to `lambda_max`, so shorter exchanges are
//! always tried first; the first improving exchange is applied.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::candidates::CandidateSet;
use crate::cost::{CostView, EdgeCost};
use crate::error::{Error, Result};
use crate::instance::TspInstance;
use crate::rng::rng_from_seed;
use crate::subgrad::PiVector;

/// Minimum penalised gain for an exchange to count as an improvement.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

pub const DEFAULT_LAMBDA_MAX: usize = 5;
/// Deepest supported move.
pub const MAX_LAMBDA: usize = 5;

/// A Hamiltonian cycle as a permutation plus its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tour {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl Tour {
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut position = vec![usize::MAX; n];
        for (p, &v) in order.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::InvalidArgument(format!("not a permutation of 0..{n}")));
            }
            position[v] = p;
        }
        Ok(Self { order, position })
    }

    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect(), position: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    #[inline]
    pub fn succ(&self, v: usize) -> usize {
        let p = self.position[v] + 1;
        self.order[if p == self.order.len() { 0 } else { p }]
    }

    #[inline]
    pub fn pred(&self, v: usize) -> usize {
        let p = self.position[v];
        self.order[if p == 0 { self.order.len() - 1 } else { p - 1 }]
    }

    #[inline]
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.succ(a) == b || self.pred(a) == b
    }

    /// Rotated to start at node 0 and oriented so the second node is smaller than the last.
    pub fn canonical(&self) -> Tour {
        let n = self.n();
        let start = self.position[0];
        let mut order: Vec<usize> = (0..n).map(|k| self.order[(start + k) % n]).collect();
        if n > 2 && order[1] > order[n - 1] {
            order[1..].reverse();
        }
        Tour::from_order(order).expect("rotation of a permutation")
    }

    /// Undirected edge set as sorted pairs.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = (0..self.n())
            .map(|p| {
                let (a, b) = (self.order[p], self.order[(p + 1) % self.n()]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges
    }
}

/// Penalised view `c(i, j) = s(i, j) + π_i + π_j`.
pub fn transform_distances(inst: &TspInstance, pi: &PiVector) -> Result<CostView> {
    if pi.len() != inst.n() {
        return Err(Error::InvalidArgument("penalty vector length".into()));
    }
    Ok(CostView::penalized(inst, pi.values()))
}

/// Fisher-Yates shuffle under the project generator.
pub fn random_tour(n: usize, seed: u64) -> Result<Tour> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("tour needs n >= 3, got {n}")));
    }
    Ok(random_tour_with(n, &mut rng_from_seed(seed)))
}

pub fn random_tour_with<R: Rng>(n: usize, rng: &mut R) -> Tour {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Tour::from_order(order).expect("shuffled permutation")
}

pub fn tour_length<C: EdgeCost + ?Sized>(costs: &C, tour: &Tour) -> f64 {
    costs.tour_cost(tour.order())
}

/// Removes the `2 Σ π` offset every tour carries under penalised costs.
pub fn restore_length(penalized: f64, pi: &PiVector) -> f64 {
    penalized - 2.0 * pi.sum()
}

/// Rebuilds the tour after removing `removed` and adding `added`, or `None`
/// when the exchange does not yield a single Hamiltonian cycle.
fn reconnect(tour: &Tour, removed: &[(usize, usize)], added: &[(usize, usize)]) -> Option<Vec<usize>> {
    let n = tour.n();
    let k = removed.len();
    // a removed edge (a, succ a) is identified by the position of a
    let mut cuts: Vec<usize> = removed
        .iter()
        .map(|&(a, b)| if tour.succ(a) == b { tour.position(a) } else { tour.position(b) })
        .collect();
    cuts.sort_unstable();
    // segment s runs forward from position cuts[s] + 1 to cuts[s + 1]
    let seg_first = |s: usize| tour.order[(cuts[s] + 1) % n];
    let seg_last = |s: usize| tour.order[cuts[(s + 1) % k] % n];

    let find_segment = |v: usize| -> (usize, bool) {
        for s in 0..k {
            if seg_first(s) == v {
                return (s, true);
            }
            if seg_last(s) == v {
                return (s, false);
            }
        }
        unreachable!("added edges only touch segment endpoints")
    };

    let mut used = [false; MAX_LAMBDA];
    let mut visited = [false; MAX_LAMBDA];
    let mut walk: Vec<(usize, bool)> = Vec::with_capacity(k);
    let (mut seg, mut forward) = (0usize, true);
    loop {
        if visited[seg] {
            break;
        }
        visited[seg] = true;
        walk.push((seg, forward));
        let exit = if forward { seg_last(seg) } else { seg_first(seg) };
        let Some(e) = (0..added.len()).find(|&e| !used[e] && (added[e].0 == exit || added[e].1 == exit)) else {
            return None;
        };
        used[e] = true;
        let next = if added[e].0 == exit { added[e].1 } else { added[e].0 };
        let (s, enter_first) = find_segment(next);
        // single-node segments can be entered from either end
        seg = s;
        forward = enter_first;
    }
    if walk.len() != k || seg != 0 || !forward {
        return None;
    }
    let mut order = Vec::with_capacity(n);
    for &(s, fwd) in &walk {
        let start = cuts[s] + 1;
        let end = if s + 1 < k { cuts[s + 1] } else { cuts[0] + n };
        if fwd {
            order.extend((start..=end).map(|p| tour.order[p % n]));
        } else {
            order.extend((start..=end).rev().map(|p| tour.order[p % n]));
        }
    }
    debug_assert_eq!(order.len(), n);
    Some(order)
}

struct Chain {
    t: Vec<usize>,
    removed: Vec<(usize, usize)>,
    added: Vec<(usize, usize)>,
}

impl Chain {
    fn new() -> Self {
        Self { t: Vec::with_capacity(10), removed: Vec::with_capacity(5), added: Vec::with_capacity(5) }
    }

    fn is_removed(&self, a: usize, b: usize) -> bool {
        self.removed.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    fn is_added(&self, a: usize, b: usize) -> bool {
        self.added.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

/// Result of a successful exchange.
struct Exchange {
    order: Vec<usize>,
    touched: Vec<usize>,
}

struct MoveSearch<'a, C: EdgeCost> {
    tour: &'a Tour,
    cands: &'a CandidateSet,
    costs: &'a C,
}

impl<C: EdgeCost> MoveSearch<'_, C> {
    fn from_base(&self, t1: usize, lambda_max: usize) -> Option<Exchange> {
        let mut chain = Chain::new();
        for depth in 2..=lambda_max {
            for t2 in [self.tour.succ(t1), self.tour.pred(t1)] {
                chain.t.clear();
                chain.removed.clear();
                chain.added.clear();
                chain.t.extend([t1, t2]);
                chain.removed.push((t1, t2));
                if let Some(ex) = self.extend(&mut chain, depth, self.costs.cost(t1, t2)) {
                    return Some(ex);
                }
            }
        }
        None
    }

    /// `gain` is the removed-minus-added length so far, before adding an edge at the chain end.
    fn extend(&self, chain: &mut Chain, depth: usize, gain: f64) -> Option<Exchange> {
        let tour = self.tour;
        let t1 = chain.t[0];
        let last = *chain.t.last().expect("chain has t1, t2");
        for &t3 in self.cands.neighbors(last) {
            if t3 == last || tour.has_edge(last, t3) || chain.is_added(last, t3) {
                continue;
            }
            let g1 = gain - self.costs.cost(last, t3);
            if g1 <= 0.0 {
                continue;
            }
            for t4 in [tour.succ(t3), tour.pred(t3)] {
                if chain.is_removed(t3, t4) {
                    continue;
                }
                let g2 = g1 + self.costs.cost(t3, t4);
                chain.t.extend([t3, t4]);
                chain.added.push((last, t3));
                chain.removed.push((t3, t4));
                let found = if chain.removed.len() == depth {
                    self.close(chain, t1, t4, g2)
                } else {
                    self.extend(chain, depth, g2)
                };
                chain.t.truncate(chain.t.len() - 2);
                chain.added.pop();
                chain.removed.pop();
                if found.is_some() {
                    return found;
                }
            }
        }
        None
    }

    fn close(&self, chain: &mut Chain, t1: usize, t_end: usize, gain: f64) -> Option<Exchange> {
        if t_end == t1 || self.tour.has_edge(t_end, t1) || chain.is_added(t_end, t1) {
            return None;
        }
        if !self.cands.allows(t_end, t1) {
            return None;
        }
        if gain - self.costs.cost(t_end, t1) <= IMPROVEMENT_EPS {
            return None;
        }
        chain.added.push((t_end, t1));
        let order = reconnect(self.tour, &chain.removed, &chain.added);
        chain.added.pop();
        order.map(|order| Exchange { order, touched: chain.t.clone() })
    }
}

/// One scan over all base nodes in id order; returns the tour after the
/// first improving exchange, or `None` at a local optimum.
pub fn lambda_opt_improve<C: EdgeCost>(tour: &Tour, cands: &CandidateSet, costs: &C, lambda_max: usize) -> Option<Tour> {
    assert!((2..=MAX_LAMBDA).contains(&lambda_max), "lambda_max must lie in [2, 5]");
    let search = MoveSearch { tour, cands, costs };
    (0..tour.n())
        .find_map(|t1| search.from_base(t1, lambda_max))
        .map(|ex| Tour::from_order(ex.order).expect("reconnect yields a permutation"))
}

/// Outcome of one local-search descent.
#[derive(Clone, Debug)]
pub struct Descent {
    pub tour: Tour,
    pub improvements: usize,
    pub interrupted: bool,
}

/// Runs exchanges to a local optimum using don't-look bits, finishing with
/// a full scan so the result is optimal with respect to every base node.
pub fn descend<C: EdgeCost>(
    start: Tour,
    cands: &CandidateSet,
    costs: &C,
    lambda_max: usize,
    deadline: Option<Instant>,
) -> Descent {
    assert!((2..=MAX_LAMBDA).contains(&lambda_max), "lambda_max must lie in [2, 5]");
    let n = start.n();
    let mut tour = start;
    let mut improvements = 0;
    let mut queue: VecDeque<usize> = tour.order().iter().copied().collect();
    let mut queued = vec![true; n];
    let out_of_time = || deadline.is_some_and(|d| Instant::now() >= d);
    loop {
        while let Some(t1) = queue.pop_front() {
            queued[t1] = false;
            if out_of_time() {
                return Descent { tour, improvements, interrupted: true };
            }
            let found = MoveSearch { tour: &tour, cands, costs }.from_base(t1, lambda_max);
            if let Some(ex) = found {
                tour = Tour::from_order(ex.order).expect("reconnect yields a permutation");
                improvements += 1;
                for v in std::iter::once(t1).chain(ex.touched) {
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        // confirm: any improving base re-seeds the queue
        let mut confirmed = true;
        for t1 in 0..n {
            if out_of_time() {
                return Descent { tour, improvements, interrupted: true };
            }
            let found = MoveSearch { tour: &tour, cands, costs }.from_base(t1, lambda_max);
            if let Some(ex) = found {
                tour = Tour::from_order(ex.order).expect("reconnect yields a permutation");
                improvements += 1;
                for v in std::iter::once(t1).chain(ex.touched) {
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
                confirmed = false;
                break;
            }
        }
        if confirmed {
            return Descent { tour, improvements, interrupted: false };
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub best_penalized: f64,
    pub best_original: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchStats {
    pub trials_run: usize,
    pub improvements: usize,
    /// Best tour length in the original metric.
    pub best_length: f64,
    pub best_penalized: f64,
    /// Running best after each trial.
    pub trace: Vec<TrialRecord>,
    pub elapsed: Duration,
    /// The time limit cut a trial short.
    pub interrupted: bool,
}

impl SearchStats {
    /// `trial best_penalized best_original elapsed_ms` per line.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            writeln!(out, "{} {:.17e} {:.17e} {:.3}", r.trial, r.best_penalized, r.best_original, r.elapsed_ms).unwrap();
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrialConfig {
    pub trials: usize,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub lambda_max: usize,
}

impl TrialConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self { trials, time_limit: None, seed, lambda_max: DEFAULT_LAMBDA_MAX }
    }
}

/// Independent random-restart trials under penalised distances.
pub fn run_trials(inst: &TspInstance, cands: &CandidateSet, pi: &PiVector, cfg: &TrialConfig) -> Result<(Tour, SearchStats)> {
    let costs = transform_distances(inst, pi)?;
    run_trials_with(&costs, cands, pi, cfg)
}

pub fn run_trials_with(costs: &CostView, cands: &CandidateSet, pi: &PiVector, cfg: &TrialConfig) -> Result<(Tour, SearchStats)> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(2..=5).contains(&cfg.lambda_max) {
        return Err(Error::InvalidArgument(format!("lambda_max must lie in [2, 5], got {}", cfg.lambda_max)));
    }
    let n = costs.n();
    if cands.n() != n {
        return Err(Error::InvalidArgument("candidate set size differs from instance".into()));
    }
    let start = Instant::now();
    let deadline = cfg.time_limit.map(|t| start + t);
    let mut rng = rng_from_seed(cfg.seed);
    let mut best: Option<(Tour, f64)> = None;
    let mut trace = Vec::with_capacity(cfg.trials);
    let mut improvements = 0;
    let mut interrupted = false;
    let mut trials_run = 0;
    for trial in 0..cfg.trials {
        if trial > 0 && deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let init = random_tour_with(n, &mut rng);
        let d = descend(init, cands, costs, cfg.lambda_max, deadline);
        improvements += d.improvements;
        trials_run += 1;
        let len = tour_length(costs, &d.tour);
        if best.as_ref().is_none_or(|(_, b)| len < *b) {
            best = Some((d.tour, len));
        }
        let best_pen = best.as_ref().expect("set above").1;
        trace.push(TrialRecord {
            trial,
            best_penalized: best_pen,
            best_original: restore_length(best_pen, pi),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if d.interrupted {
            interrupted = true;
            break;
        }
    }
    let (tour, best_penalized) = best.expect("at least one trial");
    let stats = SearchStats {
        trials_run,
        improvements,
        best_length: restore_length(best_penalized, pi),
        best_penalized,
        trace,
        elapsed: start.elapsed(),
        interrupted,
    };
    Ok((tour, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::from_nearest;
    use crate::instance::generate_uniform;
    use crate::oracle::exact_bruteforce;
    use crate::testutil::unit_square;

    fn sq_costs() -> CostView {
        CostView::new(&unit_square())
    }

    #[test]
    fn tour_basics() {
        let t = Tour::from_order(vec![2, 0, 3, 1]).unwrap();
        assert_eq!(t.succ(1), 2);
        assert_eq!(t.pred(2), 1);
        assert_eq!(t.canonical().order(), &[0, 2, 1, 3]);
        assert!(Tour::from_order(vec![0, 0, 1]).is_err());
        assert!(Tour::from_order(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn lengths() {
        let c = sq_costs();
        assert_eq!(tour_length(&c, &Tour::identity(4)), 4.0);
        let crossing = Tour::from_order(vec![0, 2, 1, 3]).unwrap();
        assert!((tour_length(&c, &crossing) - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
        let inst = generate_uniform(12, 4).unwrap();
        let c = CostView::new(&inst);
        let t = random_tour(12, 3).unwrap();
        let mut rev = t.order().to_vec();
        rev.reverse();
        let r = Tour::from_order(rev).unwrap();
        assert!((tour_length(&c, &t) - tour_length(&c, &r)).abs() < 1e-12);
    }

    #[test]
    fn penalised_view() {
        let sq = unit_square();
        let pi = PiVector::from(vec![0.1, -0.2, 0.0, 0.0]);
        let v = transform_distances(&sq, &pi).unwrap();
        assert!((v.cost(0, 1) - (1.0 + 0.1 - 0.2)).abs() < 1e-15);
        let zero = transform_distances(&sq, &PiVector::zeros(4)).unwrap();
        assert_eq!(zero.cost(0, 2), 2f64.sqrt());
        let t = random_tour(4, 1).unwrap();
        assert!((restore_length(tour_length(&v, &t), &pi) - sq.tour_length(t.order())).abs() < 1e-12);
        assert!((restore_length(4.0 - 0.2, &PiVector::from(vec![-0.1, 0.0, 0.0, 0.0])) - 4.0).abs() < 1e-15);
        assert_eq!(restore_length(3.5, &PiVector::zeros(4)), 3.5);
    }

    #[test]
    fn random_tour_determinism() {
        assert_eq!(random_tour(20, 5).unwrap(), random_tour(20, 5).unwrap());
        assert_ne!(random_tour(20, 5).unwrap(), random_tour(20, 6).unwrap());
        assert!(random_tour(2, 0).is_err());
    }

    #[test]
    fn uncrosses_square() {
        let sq = unit_square();
        let c = sq_costs();
        let sides = from_nearest(&sq, 2).unwrap();
        let crossing = Tour::from_order(vec![0, 2, 1, 3]).unwrap();
        let better = lambda_opt_improve(&crossing, &sides, &c, 2).unwrap();
        assert_eq!(tour_length(&c, &better), 4.0);
        assert!(lambda_opt_improve(&Tour::identity(4), &sides, &c, 2).is_none());
    }

    #[test]
    fn reconnect_rejects_two_cycles() {
        let t = Tour::identity(6);
        // removing (0,1),(3,4) and adding (1,3),(4,0) closes 1-2-3 and 4-5-0 separately
        assert!(reconnect(&t, &[(0, 1), (3, 4)], &[(1, 3), (4, 0)]).is_none());
        let two_opt = reconnect(&t, &[(0, 1), (3, 4)], &[(1, 4), (3, 0)]).unwrap();
        assert_eq!(Tour::from_order(two_opt).unwrap().edge_set().len(), 6);
    }

    #[test]
    fn trials_on_square_and_determinism() {
        let sq = unit_square();
        let cands = from_nearest(&sq, 3).unwrap();
        let (tour, stats) = run_trials(&sq, &cands, &PiVector::zeros(4), &TrialConfig::new(1, 9)).unwrap();
        assert_eq!(stats.best_length, 4.0);
        assert_eq!(sq.tour_length(tour.order()), 4.0);

        let inst = generate_uniform(40, 8).unwrap();
        let cands = from_nearest(&inst, 5).unwrap();
        let pi = PiVector::from((0..40).map(|i| (i % 3) as f64 * 0.01).collect::<Vec<_>>());
        let cfg = TrialConfig::new(5, 77);
        let (a, sa) = run_trials(&inst, &cands, &pi, &cfg).unwrap();
        let (b, sb) = run_trials(&inst, &cands, &pi, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa.trace.iter().map(|r| r.best_penalized).collect::<Vec<_>>(), sb.trace.iter().map(|r| r.best_penalized).collect::<Vec<_>>());
        assert!((sa.best_length - inst.tour_length(a.order())).abs() < 1e-9);
        assert_eq!(sa.trace_text().lines().count(), 5);
    }

    #[test]
    fn small_instances_reach_optimum() {
        for seed in 0..10 {
            let inst = generate_uniform(9, 300 + seed).unwrap();
            let opt = exact_bruteforce(&inst).unwrap().length;
            let cands = CandidateSet::complete(&inst);
            let (_, stats) = run_trials(&inst, &cands, &PiVector::zeros(9), &TrialConfig::new(20, seed)).unwrap();
            assert!((stats.best_length - opt).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn zero_time_limit_still_returns_a_tour() {
        let inst = generate_uniform(200, 1).unwrap();
        let cands = from_nearest(&inst, 5).unwrap();
        let mut cfg = TrialConfig::new(10, 1);
        cfg.time_limit = Some(Duration::ZERO);
        let (tour, stats) = run_trials(&inst, &cands, &PiVector::zeros(200), &cfg).unwrap();
        assert!(stats.interrupted);
        assert_eq!(stats.trials_run, 1);
        assert_eq!(tour.n(), 200);
    }

    #[test]
    fn rejects_bad_config() {
        let sq = unit_square();
        let cands = from_nearest(&sq, 2).unwrap();
        assert!(run_trials(&sq, &cands, &PiVector::zeros(4), &TrialConfig::new(0, 1)).is_err());
        let mut cfg = TrialConfig::new(1, 1);
        cfg.lambda_max = 6;
        assert!(run_trials(&sq, &cands, &PiVector::zeros(4), &cfg).is_err());
    }
}
