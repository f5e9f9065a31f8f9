//! Minimum spanning trees, minimum 1-trees and α-nearness.
//!
//! The spanning tree of a 1-tree covers every node except the special node,
//! which is attached through its two cheapest edges. For a non-special pair
//! `(i, j)` the α-value is `c(i, j)` minus the heaviest edge on the tree path
//! between `i` and `j`; for the special node it is `c(s, j)` minus the cost
//! of its second special edge.

use std::cmp::Ordering;

use crate::cost::{CostView, EdgeCost};
use crate::error::{Error, Result};
use crate::instance::{SparseGraph, TspInstance};
use crate::subgrad::PiVector;

const NONE: usize = usize::MAX;

/// Prim key: cost first, then the endpoint ids of the edge.
#[derive(Clone, Copy, Debug)]
struct Key {
    cost: f64,
    lo: usize,
    hi: usize,
}

impl Key {
    const INF: Key = Key { cost: f64::INFINITY, lo: NONE, hi: NONE };

    fn edge(cost: f64, a: usize, b: usize) -> Self {
        Key { cost, lo: a.min(b), hi: a.max(b) }
    }

    fn cmp(&self, other: &Key) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanningTree {
    /// Undirected edges `(parent, child)` in insertion order.
    pub edges: Vec<(usize, usize)>,
    pub length: f64,
}

/// Dense Prim over every node except `exclude`, optionally seeded with a
/// forced edge whose endpoints start inside the tree.
fn prim(costs: &CostView, exclude: Option<usize>, forced: Option<(usize, usize)>) -> Result<SpanningTree> {
    let n = costs.n();
    let included = n - usize::from(exclude.is_some());
    if included < 2 {
        return Err(Error::DegenerateInstance(format!("spanning tree over {included} nodes")));
    }
    let mut in_tree = vec![false; n];
    let mut key = vec![Key::INF; n];
    let mut parent = vec![NONE; n];
    if let Some(x) = exclude {
        in_tree[x] = true;
    }
    let mut edges = Vec::with_capacity(included - 1);
    let mut length = 0.0;

    let mut frontier: Vec<usize> = Vec::with_capacity(2);
    match forced {
        Some((a, b)) => {
            let c = costs.cost(a, b);
            edges.push((a, b));
            length += c;
            frontier.extend([a, b]);
        }
        None => frontier.push((0..n).find(|&v| !in_tree[v]).expect("non-empty")),
    }
    for &u in &frontier {
        in_tree[u] = true;
    }
    for &u in &frontier {
        relax(costs, u, &in_tree, &mut key, &mut parent);
    }
    while edges.len() < included - 1 {
        let mut best = NONE;
        for v in 0..n {
            if !in_tree[v] && (best == NONE || key[v].cmp(&key[best]) == Ordering::Less) {
                best = v;
            }
        }
        in_tree[best] = true;
        edges.push((parent[best], best));
        length += key[best].cost;
        relax(costs, best, &in_tree, &mut key, &mut parent);
    }
    Ok(SpanningTree { edges, length })
}

fn relax(costs: &CostView, u: usize, in_tree: &[bool], key: &mut [Key], parent: &mut [usize]) {
    for v in 0..in_tree.len() {
        if in_tree[v] {
            continue;
        }
        let cand = Key::edge(costs.cost(u, v), u, v);
        if cand.cmp(&key[v]) == Ordering::Less {
            key[v] = cand;
            parent[v] = u;
        }
    }
}

/// MST under `c(i, j) = s(i, j) + π_i + π_j`, skipping `exclude` if given.
pub fn minimum_spanning_tree(inst: &TspInstance, pi: &PiVector, exclude: Option<usize>) -> Result<SpanningTree> {
    check_pi(inst, pi)?;
    minimum_spanning_tree_with(&CostView::penalized(inst, pi.values()), exclude)
}

pub fn minimum_spanning_tree_with(costs: &CostView, exclude: Option<usize>) -> Result<SpanningTree> {
    prim(costs, exclude, None)
}

fn check_pi(inst: &TspInstance, pi: &PiVector) -> Result<()> {
    if pi.len() != inst.n() {
        return Err(Error::InvalidArgument(format!(
            "penalty vector has {} entries for {} nodes",
            pi.len(),
            inst.n()
        )));
    }
    Ok(())
}

/// Node whose nearest neighbour is furthest away, lowest id on ties.
pub fn select_special(costs: &CostView) -> usize {
    let n = costs.n();
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..n {
        let nearest = (0..n)
            .filter(|&j| j != i)
            .map(|j| costs.distance(i, j))
            .fold(f64::INFINITY, f64::min);
        if nearest > best.0 {
            best = (nearest, i);
        }
    }
    best.1
}

/// The two cheapest edges at `special`, optionally skipping one neighbour.
fn cheapest_special_edges(costs: &CostView, special: usize, skip: Option<usize>) -> [(usize, f64); 2] {
    let mut first = (NONE, f64::INFINITY);
    let mut second = (NONE, f64::INFINITY);
    for j in 0..costs.n() {
        if j == special || Some(j) == skip {
            continue;
        }
        let c = costs.cost(special, j);
        if c < first.1 {
            second = first;
            first = (j, c);
        } else if c < second.1 {
            second = (j, c);
        }
    }
    [first, second]
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneTree {
    pub special: usize,
    /// `n − 2` edges spanning every node but `special`.
    pub tree_edges: Vec<(usize, usize)>,
    /// `(special, j)` in ascending cost order.
    pub special_edges: [(usize, usize); 2],
    pub degrees: Vec<usize>,
    /// Total penalised length over all `n` edges.
    pub length: f64,
    /// Spanning-tree parent (`usize::MAX` for the root and the special node).
    pub parent: Vec<usize>,
    pub depth: Vec<usize>,
    /// Cost of the second special edge, the α threshold for special edges.
    pub second_special_cost: f64,
}

impl OneTree {
    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// All `n` edges, spanning-tree edges first.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.tree_edges.iter().copied().chain(self.special_edges)
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        if i == self.special || j == self.special {
            let other = if i == self.special { j } else { i };
            return self.special_edges.iter().any(|&(_, m)| m == other);
        }
        self.parent[i] == j || self.parent[j] == i
    }

    /// True when every node has degree 2, i.e. the 1-tree is a tour.
    pub fn is_tour(&self) -> bool {
        self.degrees.iter().all(|&d| d == 2)
    }

    /// The tour when [`OneTree::is_tour`] holds.
    pub fn as_tour(&self) -> Option<Vec<usize>> {
        if !self.is_tour() {
            return None;
        }
        let n = self.n();
        let mut adj = vec![Vec::with_capacity(2); n];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut order = Vec::with_capacity(n);
        let (mut prev, mut cur) = (NONE, 0);
        for _ in 0..n {
            order.push(cur);
            let next = if adj[cur][0] != prev { adj[cur][0] } else { adj[cur][1] };
            prev = cur;
            cur = next;
        }
        (cur == 0).then_some(order)
    }
}

pub fn minimum_one_tree(inst: &TspInstance, pi: &PiVector) -> Result<OneTree> {
    check_pi(inst, pi)?;
    let costs = CostView::penalized(inst, pi.values());
    let special = select_special(&costs);
    minimum_one_tree_with(&costs, special)
}

/// Minimum 1-tree for a given special node.
pub fn minimum_one_tree_with(costs: &CostView, special: usize) -> Result<OneTree> {
    let n = costs.n();
    if n < 3 {
        return Err(Error::InvalidSize(format!("1-tree needs n >= 3, got {n}")));
    }
    let mst = prim(costs, Some(special), None)?;
    let [first, second] = cheapest_special_edges(costs, special, None);

    let mut degrees = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &mst.edges {
        degrees[a] += 1;
        degrees[b] += 1;
        adj[a].push(b);
        adj[b].push(a);
    }
    degrees[special] = 2;
    degrees[first.0] += 1;
    degrees[second.0] += 1;

    // root the spanning tree at its first node
    let root = mst.edges[0].0;
    let mut parent = vec![NONE; n];
    let mut depth = vec![0usize; n];
    let mut stack = vec![root];
    let mut seen = vec![false; n];
    seen[root] = true;
    seen[special] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = u;
                depth[v] = depth[u] + 1;
                stack.push(v);
            }
        }
    }

    Ok(OneTree {
        special,
        tree_edges: mst.edges,
        special_edges: [(special, first.0), (special, second.0)],
        degrees,
        length: mst.length + first.1 + second.1,
        parent,
        depth,
        second_special_cost: second.1,
    })
}

/// α-values for every directed edge of `graph`, indexed like the graph's flat edge array.
pub fn alpha_measures(inst: &TspInstance, pi: &PiVector, graph: &SparseGraph) -> Result<Vec<f64>> {
    check_pi(inst, pi)?;
    let costs = CostView::penalized(inst, pi.values());
    let tree = minimum_one_tree_with(&costs, select_special(&costs))?;
    Ok(alpha_measures_with(&costs, &tree, graph))
}

pub fn alpha_measures_with(costs: &CostView, tree: &OneTree, graph: &SparseGraph) -> Vec<f64> {
    let n = costs.n();
    let s = tree.special;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &tree.tree_edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let gamma = graph.gamma();
    let mut alpha = vec![0.0; graph.edge_count()];
    // heaviest tree edge on the path from `root` to every node
    let mut maxpath = vec![f64::NEG_INFINITY; n];
    let mut stack = Vec::with_capacity(n);
    let mut from = vec![NONE; n];
    for root in 0..n {
        let row = &graph.targets()[root * gamma..(root + 1) * gamma];
        if root == s {
            for (slot, &j) in row.iter().enumerate() {
                alpha[root * gamma + slot] = special_alpha(costs, tree, j);
            }
            continue;
        }
        maxpath[root] = f64::NEG_INFINITY;
        from[root] = root;
        stack.clear();
        stack.push(root);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if v != from[u] {
                    from[v] = u;
                    maxpath[v] = maxpath[u].max(costs.cost(u, v));
                    stack.push(v);
                }
            }
        }
        for (slot, &j) in row.iter().enumerate() {
            alpha[root * gamma + slot] = if j == s {
                special_alpha(costs, tree, root)
            } else {
                (costs.cost(root, j) - maxpath[j]).max(0.0)
            };
        }
    }
    alpha
}

fn special_alpha(costs: &CostView, tree: &OneTree, j: usize) -> f64 {
    if tree.special_edges.iter().any(|&(_, m)| m == j) {
        0.0
    } else {
        (costs.cost(tree.special, j) - tree.second_special_cost).max(0.0)
    }
}

/// α by definition: rebuild the minimum 1-tree forced to contain `edge`.
pub fn alpha_bruteforce(inst: &TspInstance, pi: &PiVector, edge: (usize, usize)) -> Result<f64> {
    check_pi(inst, pi)?;
    let costs = CostView::penalized(inst, pi.values());
    let special = select_special(&costs);
    let base = minimum_one_tree_with(&costs, special)?;
    Ok(forced_one_tree_length(&costs, special, edge)? - base.length)
}

/// Length of the minimum 1-tree (fixed special node) that contains `edge`.
pub fn forced_one_tree_length(costs: &CostView, special: usize, (i, j): (usize, usize)) -> Result<f64> {
    let n = costs.n();
    if i == j || i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("not an edge: ({i}, {j})")));
    }
    if i == special || j == special {
        let other = if i == special { j } else { i };
        let mst = prim(costs, Some(special), None)?;
        let [cheapest, _] = cheapest_special_edges(costs, special, Some(other));
        Ok(mst.length + costs.cost(special, other) + cheapest.1)
    } else {
        let mst = prim(costs, Some(special), Some((i, j)))?;
        let [a, b] = cheapest_special_edges(costs, special, None);
        Ok(mst.length + a.1 + b.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_sparse_graph, generate_uniform};
    use crate::rng::rng_from_seed;
    use crate::testutil::{points, unit_square};
    use rand::Rng;

    /// Decodes a Prüfer sequence over `labels` into tree edges.
    fn prufer_edges(seq: &[usize], labels: &[usize]) -> Vec<(usize, usize)> {
        let m = labels.len();
        let mut degree = vec![1usize; m];
        for &x in seq {
            degree[x] += 1;
        }
        let mut edges = Vec::with_capacity(m - 1);
        for &x in seq {
            let leaf = (0..m).find(|&v| degree[v] == 1).unwrap();
            edges.push((labels[leaf], labels[x]));
            degree[leaf] -= 1;
            degree[x] -= 1;
        }
        let rest: Vec<usize> = (0..m).filter(|&v| degree[v] == 1).collect();
        edges.push((labels[rest[0]], labels[rest[1]]));
        edges
    }

    /// Minimum over every labelled spanning tree on `labels`.
    fn brute_mst(costs: &CostView, labels: &[usize]) -> f64 {
        let m = labels.len();
        if m == 2 {
            return costs.cost(labels[0], labels[1]);
        }
        let len = m - 2;
        let total = m.pow(len as u32);
        let mut best = f64::INFINITY;
        let mut seq = vec![0usize; len];
        for code in 0..total {
            let mut c = code;
            for s in seq.iter_mut() {
                *s = c % m;
                c /= m;
            }
            let l: f64 = prufer_edges(&seq, labels).iter().map(|&(a, b)| costs.cost(a, b)).sum();
            best = best.min(l);
        }
        best
    }

    fn random_pi(n: usize, amp: f64, seed: u64) -> PiVector {
        let mut rng = rng_from_seed(seed);
        PiVector::from((0..n).map(|_| rng.random_range(-amp..=amp)).collect::<Vec<_>>())
    }

    #[test]
    fn square_mst_and_one_tree() {
        let sq = unit_square();
        let pi = PiVector::zeros(4);
        let mst = minimum_spanning_tree(&sq, &pi, None).unwrap();
        assert_eq!(mst.length, 3.0);
        let t = minimum_one_tree(&sq, &pi).unwrap();
        assert_eq!(t.length, 4.0);
        assert!(t.is_tour());
        assert_eq!(t.degrees.iter().sum::<usize>(), 8);
        let tour = t.as_tour().unwrap();
        assert_eq!(sq.tour_length(&tour), 4.0);
    }

    #[test]
    fn uniform_shift_keeps_edges() {
        let inst = generate_uniform(12, 3).unwrap();
        let a = minimum_spanning_tree(&inst, &PiVector::zeros(12), None).unwrap();
        let b = minimum_spanning_tree(&inst, &PiVector::from(vec![0.25; 12]), None).unwrap();
        assert_eq!(a.edges, b.edges);
    }

    #[test]
    fn mst_matches_prufer_enumeration() {
        for seed in 0..4 {
            let inst = generate_uniform(8, 100 + seed).unwrap();
            let pi = random_pi(8, 0.1, seed);
            let costs = CostView::penalized(&inst, pi.values());
            let labels: Vec<usize> = (0..8).collect();
            let mst = minimum_spanning_tree_with(&costs, None).unwrap();
            assert!((mst.length - brute_mst(&costs, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn one_tree_matches_enumeration_on_collinear_points() {
        let line = points(&(0..7).map(|i| [i as f64, 0.0]).collect::<Vec<_>>());
        let costs = CostView::new(&line);
        let t = minimum_one_tree_with(&costs, select_special(&costs)).unwrap();
        // all 1-trees: spanning tree on V \ {s} plus any pair of special edges
        let labels: Vec<usize> = (0..7).filter(|&v| v != t.special).collect();
        let mut pair_best = f64::INFINITY;
        for a in 0..labels.len() {
            for b in (a + 1)..labels.len() {
                pair_best = pair_best.min(costs.cost(t.special, labels[a]) + costs.cost(t.special, labels[b]));
            }
        }
        let brute = brute_mst(&costs, &labels) + pair_best;
        assert!((t.length - brute).abs() < 1e-12);
        assert_eq!(t.special, 0);
        // the endpoint is special and pulls in a doubled edge
        assert_eq!(t.degrees[0], 2);
        assert_eq!(t.degrees.iter().sum::<usize>(), 14);
        assert!(!t.is_tour());
    }

    #[test]
    fn one_tree_invariants() {
        let inst = generate_uniform(30, 8).unwrap();
        let pi = random_pi(30, 0.05, 8);
        let t = minimum_one_tree(&inst, &pi).unwrap();
        assert_eq!(t.tree_edges.len(), 28);
        assert_eq!(t.edges().count(), 30);
        assert_eq!(t.degrees.iter().sum::<usize>(), 60);
        assert_eq!(t.degrees[t.special], 2);
        let costs = CostView::penalized(&inst, pi.values());
        let sum: f64 = t.edges().map(|(a, b)| costs.cost(a, b)).sum();
        assert!((sum - t.length).abs() < 1e-9);
        for v in 0..30 {
            if v != t.special && t.parent[v] != NONE {
                assert_eq!(t.depth[v], t.depth[t.parent[v]] + 1);
            }
        }
    }

    #[test]
    fn alpha_zero_on_tree_edges_and_square_diagonal() {
        let sq = unit_square();
        let pi = PiVector::zeros(4);
        let full = build_sparse_graph(&sq, 3).unwrap();
        let alpha = alpha_measures(&sq, &pi, &full).unwrap();
        let t = minimum_one_tree(&sq, &pi).unwrap();
        for i in 0..4 {
            for (slot, &j) in full.neighbors(i).iter().enumerate() {
                let a = alpha[i * 3 + slot];
                assert!((a - alpha_bruteforce(&sq, &pi, (i, j)).unwrap()).abs() < 1e-12);
                if t.contains_edge(i, j) {
                    assert_eq!(a, 0.0);
                }
            }
        }
        let diag = alpha_bruteforce(&sq, &pi, (0, 2)).unwrap();
        assert!((diag - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn alpha_positive_for_long_collinear_edge() {
        let line = points(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        let a = alpha_bruteforce(&line, &PiVector::zeros(4), (1, 3)).unwrap();
        assert!(a > 0.0);
    }

    #[test]
    fn alpha_matches_bruteforce_random() {
        for seed in 0..10 {
            let inst = generate_uniform(10, 500 + seed).unwrap();
            let pi = random_pi(10, 0.1, seed);
            let g = build_sparse_graph(&inst, 9).unwrap();
            let alpha = alpha_measures(&inst, &pi, &g).unwrap();
            for i in 0..10 {
                for (slot, &j) in g.neighbors(i).iter().enumerate() {
                    let e = i * 9 + slot;
                    let brute = alpha_bruteforce(&inst, &pi, (i, j)).unwrap();
                    assert!((alpha[e] - brute).abs() < 1e-9, "seed {seed} edge ({i},{j})");
                    let back = g.edge_index(j, i).unwrap();
                    assert!((alpha[e] - alpha[back]).abs() < 1e-9);
                    assert!(alpha[e] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn errors() {
        let sq = unit_square();
        assert!(minimum_spanning_tree(&sq, &PiVector::zeros(3), None).is_err());
        let tri = points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let costs = CostView::new(&tri);
        assert!(minimum_spanning_tree_with(&costs, Some(0)).is_ok());
        assert!(alpha_bruteforce(&sq, &PiVector::zeros(4), (1, 1)).is_err());
    }
}
