//! Dense distance tables and the penalised view `c(i, j) = s(i, j) + π_i + π_j`.

use std::sync::Arc;

use crate::instance::TspInstance;

/// Symmetric edge costs over `n` nodes.
pub trait EdgeCost {
    fn n(&self) -> usize;
    fn cost(&self, i: usize, j: usize) -> f64;

    fn tour_cost(&self, order: &[usize]) -> f64 {
        let n = order.len();
        (0..n).map(|k| self.cost(order[k], order[(k + 1) % n])).sum()
    }
}

/// Distances plus node penalties. The distance table is shared, so
/// re-penalising an instance in a loop does not copy it.
#[derive(Clone, Debug)]
pub struct CostView {
    n: usize,
    dist: Arc<[f64]>,
    pi: Vec<f64>,
}

impl CostView {
    pub fn new(inst: &TspInstance) -> Self {
        let n = inst.n();
        Self { n, dist: inst.distance_matrix().into(), pi: vec![0.0; n] }
    }

    pub fn penalized(inst: &TspInstance, pi: &[f64]) -> Self {
        Self::new(inst).with_penalties(pi)
    }

    /// Same distances under different penalties.
    pub fn with_penalties(&self, pi: &[f64]) -> Self {
        assert_eq!(pi.len(), self.n, "penalty vector length");
        Self { n: self.n, dist: Arc::clone(&self.dist), pi: pi.to_vec() }
    }

    pub fn penalties(&self) -> &[f64] {
        &self.pi
    }

    /// Unpenalised distance.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn penalty_sum(&self) -> f64 {
        self.pi.iter().sum()
    }
}

impl EdgeCost for CostView {
    fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j] + self.pi[i] + self.pi[j]
    }
}
