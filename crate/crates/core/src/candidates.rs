//! Candidate edge sets and their quality against a known optimal tour.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instance::{SparseGraph, TspInstance};
use crate::search::Tour;

/// Default number of candidates per node.
pub const DEFAULT_K: usize = 5;

/// Per-node neighbour lists in descending priority.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    k: usize,
    lists: Vec<Vec<usize>>,
    priority: Vec<Vec<f64>>,
}

impl CandidateSet {
    /// Validates and wraps raw lists.
    pub fn new(k: usize, lists: Vec<Vec<usize>>, priority: Vec<Vec<f64>>) -> Result<Self> {
        let n = lists.len();
        if priority.len() != n {
            return Err(Error::InvalidArgument("priority rows do not match lists".into()));
        }
        for (i, (row, prio)) in lists.iter().zip(&priority).enumerate() {
            if row.len() != prio.len() {
                return Err(Error::InvalidArgument(format!("node {i}: {} neighbours, {} priorities", row.len(), prio.len())));
            }
            if row.len() > k {
                return Err(Error::InvalidArgument(format!("node {i} lists {} > k = {k} candidates", row.len())));
            }
            for (pos, &j) in row.iter().enumerate() {
                if j >= n {
                    return Err(Error::InvalidArgument(format!("node {i}: neighbour {j} out of range")));
                }
                if j == i {
                    return Err(Error::InvalidArgument(format!("node {i}: self loop")));
                }
                if row[..pos].contains(&j) {
                    return Err(Error::InvalidArgument(format!("node {i}: duplicate neighbour {j}")));
                }
            }
            if prio.windows(2).any(|w| !(w[0] >= w[1])) {
                return Err(Error::InvalidArgument(format!("node {i}: priorities not non-increasing")));
            }
        }
        Ok(Self { k, lists, priority })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn priorities(&self, i: usize) -> &[f64] {
        &self.priority[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.lists[i].contains(&j)
    }

    /// True if either endpoint lists the other.
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.contains(i, j) || self.contains(j, i)
    }

    /// Every other node as a candidate, nearest first.
    pub fn complete(inst: &TspInstance) -> Self {
        from_nearest(inst, inst.n() - 1).expect("k = n - 1 is valid")
    }

    /// `candidates <n> <k>`, then `<id> <m> <nbr> <prio> ...` per node.
    pub fn write(&self) -> String {
        let mut out = String::new();
        writeln!(out, "candidates {} {}", self.n(), self.k).unwrap();
        for (i, (row, prio)) in self.lists.iter().zip(&self.priority).enumerate() {
            write!(out, "{i} {}", row.len()).unwrap();
            for (&j, &p) in row.iter().zip(prio) {
                write!(out, " {j} {p:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn read(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty document"))?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 || head[0] != "candidates" {
            return Err(Error::parse(1, format!("bad header `{header}`")));
        }
        let n: usize = head[1].parse().map_err(|e| Error::parse(1, e))?;
        let k: usize = head[2].parse().map_err(|e| Error::parse(1, e))?;
        let mut lists = vec![None; n];
        let mut priority = vec![Vec::new(); n];
        for (idx, line) in lines {
            let ln = idx + 1;
            let mut tok = line.split_whitespace();
            let mut next = |what: &str| tok.next().ok_or_else(|| Error::parse(ln, format!("missing {what}")));
            let id: usize = next("id")?.parse().map_err(|e| Error::parse(ln, e))?;
            let m: usize = next("count")?.parse().map_err(|e| Error::parse(ln, e))?;
            if id >= n || lists[id].is_some() {
                return Err(Error::parse(ln, format!("bad or repeated node id {id}")));
            }
            let mut row = Vec::with_capacity(m);
            let mut prio = Vec::with_capacity(m);
            for _ in 0..m {
                row.push(next("neighbour")?.parse::<usize>().map_err(|e| Error::parse(ln, e))?);
                prio.push(next("priority")?.parse::<f64>().map_err(|e| Error::parse(ln, e))?);
            }
            if tok.next().is_some() {
                return Err(Error::parse(ln, "trailing tokens"));
            }
            lists[id] = Some(row);
            priority[id] = prio;
        }
        let lists: Vec<Vec<usize>> = lists
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::parse(0, format!("node {i} missing"))))
            .collect::<Result<_>>()?;
        CandidateSet::new(k, lists, priority).map_err(|e| Error::parse(0, e))
    }
}

/// Top-`k` per node of `graph` by descending `priority`, ties by ascending
/// distance then node id.
pub fn from_priorities(graph: &SparseGraph, priority: &[f64], k: usize) -> Result<CandidateSet> {
    if priority.len() != graph.edge_count() {
        return Err(Error::InvalidArgument(format!(
            "{} priorities for {} edges",
            priority.len(),
            graph.edge_count()
        )));
    }
    let gamma = graph.gamma();
    let mut lists = Vec::with_capacity(graph.n());
    let mut prios = Vec::with_capacity(graph.n());
    let mut slots: Vec<usize> = Vec::with_capacity(gamma);
    for i in 0..graph.n() {
        let base = i * gamma;
        let nbrs = graph.neighbors(i);
        let dist = graph.distances(i);
        slots.clear();
        slots.extend(0..gamma);
        slots.sort_by(|&a, &b| {
            priority[base + b]
                .total_cmp(&priority[base + a])
                .then(dist[a].total_cmp(&dist[b]))
                .then(nbrs[a].cmp(&nbrs[b]))
        });
        let take = k.min(gamma);
        lists.push(slots[..take].iter().map(|&s| nbrs[s]).collect());
        prios.push(slots[..take].iter().map(|&s| priority[base + s]).collect());
    }
    Ok(CandidateSet { k, lists, priority: prios })
}

/// The `k` smallest-α neighbours per node, priority `−α`.
///
/// `alpha` is indexed like the flat edges of `graph`; a node with fewer than
/// `k` scored edges keeps them all.
pub fn from_alpha(graph: &SparseGraph, alpha: &[f64], k: usize) -> Result<CandidateSet> {
    let prio: Vec<f64> = alpha.iter().map(|a| -a).collect();
    from_priorities(graph, &prio, k)
}

/// The `k` highest-scoring out-edges per node.
pub fn from_scores(graph: &SparseGraph, beta: &[f64], k: usize) -> Result<CandidateSet> {
    if k > graph.gamma() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds gamma = {}", graph.gamma())));
    }
    from_priorities(graph, beta, k)
}

/// The `k` nearest neighbours per node, priority `−distance`.
pub fn from_nearest(inst: &TspInstance, k: usize) -> Result<CandidateSet> {
    let n = inst.n();
    if k >= n || k == 0 {
        return Err(Error::InvalidArgument(format!("k must lie in [1, n-1], got {k} for n = {n}")));
    }
    let mut lists = Vec::with_capacity(n);
    let mut prios = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (inst.dist(i, j), j)).collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        row.truncate(k);
        lists.push(row.iter().map(|&(_, j)| j).collect());
        prios.push(row.iter().map(|&(d, _)| -d).collect());
    }
    Ok(CandidateSet { k, lists, priority: prios })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateQuality {
    /// Share of the `2n` directed tour edges absent from the set.
    pub missed_fraction: f64,
    /// Mean 1-based list position of the present tour edges.
    pub avg_rank: Option<f64>,
}

pub fn candidate_quality(set: &CandidateSet, optimal_tour: &Tour) -> CandidateQuality {
    let n = optimal_tour.n();
    let mut missed = 0usize;
    let mut rank_sum = 0usize;
    let mut present = 0usize;
    for i in 0..n {
        for j in [optimal_tour.pred(i), optimal_tour.succ(i)] {
            match set.neighbors(i).iter().position(|&m| m == j) {
                Some(p) => {
                    present += 1;
                    rank_sum += p + 1;
                }
                None => missed += 1,
            }
        }
    }
    CandidateQuality {
        missed_fraction: missed as f64 / (2 * n) as f64,
        avg_rank: (present > 0).then(|| rank_sum as f64 / present as f64),
    }
}

/// Mean of per-instance qualities; ranks averaged over instances that have one.
pub fn mean_quality(items: &[CandidateQuality]) -> CandidateQuality {
    if items.is_empty() {
        return CandidateQuality { missed_fraction: 0.0, avg_rank: None };
    }
    let missed = items.iter().map(|q| q.missed_fraction).sum::<f64>() / items.len() as f64;
    let ranks: Vec<f64> = items.iter().filter_map(|q| q.avg_rank).collect();
    let avg_rank = (!ranks.is_empty()).then(|| ranks.iter().sum::<f64>() / ranks.len() as f64);
    CandidateQuality { missed_fraction: missed, avg_rank }
}
