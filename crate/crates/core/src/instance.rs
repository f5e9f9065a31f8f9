//! Instances, generators, TSPLIB input and the sparse γ-nearest graph.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Standard deviation of the Gaussian around each cluster centre.
pub const CLUSTER_SIGMA: f64 = 0.05;

/// Largest TSPLIB instance the parser accepts.
pub const TSPLIB_MAX_NODES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Plain Euclidean distance.
    ContinuousEuclidean,
    /// TSPLIB `EUC_2D`: Euclidean distance rounded to the nearest integer.
    TsplibRounded,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ContinuousEuclidean => "continuous-euclidean",
            Metric::TsplibRounded => "tsplib-rounded-euclidean",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous-euclidean" => Ok(Metric::ContinuousEuclidean),
            "tsplib-rounded-euclidean" => Ok(Metric::TsplibRounded),
            other => Err(Error::UnsupportedFormat(format!("unknown metric `{other}`"))),
        }
    }
}

/// Where a point of a mixed instance was drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointSource {
    Uniform,
    Clustered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TspInstance {
    coords: Vec<[f64; 2]>,
    metric: Metric,
    name: Option<String>,
}

impl TspInstance {
    pub fn new(coords: Vec<[f64; 2]>, metric: Metric, name: Option<String>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::InvalidSize(format!(
                "an instance needs at least 3 nodes, got {}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidArgument(format!("coordinate of node {i} is not finite")));
        }
        Ok(Self { coords, metric, name })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Distance between two distinct nodes under the instance metric.
    pub fn distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::InvalidArgument(format!("node out of range: ({i}, {j}), n = {n}")));
        }
        if i == j {
            return Err(Error::InvalidArgument(format!("distance from node {i} to itself")));
        }
        Ok(self.dist(i, j))
    }

    /// Unchecked distance; `dist(i, i)` is 0.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        let [xi, yi] = self.coords[i];
        let [xj, yj] = self.coords[j];
        // squared form keeps dist(i, j) == dist(j, i) bit for bit
        let dx = xi - xj;
        let dy = yi - yj;
        let d = (dx * dx + dy * dy).sqrt();
        match self.metric {
            Metric::ContinuousEuclidean => d,
            Metric::TsplibRounded => (d + 0.5).floor(),
        }
    }

    /// Dense row-major `n × n` distance matrix.
    pub fn distance_matrix(&self) -> Vec<f64> {
        let n = self.n();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.dist(i, j);
                m[i * n + j] = d;
                m[j * n + i] = d;
            }
        }
        m
    }

    /// Length of the closed tour visiting `order` under the instance metric.
    pub fn tour_length(&self, order: &[usize]) -> f64 {
        let n = order.len();
        (0..n).map(|k| self.dist(order[k], order[(k + 1) % n])).sum()
    }

    /// Translates and scales the instance so the longer axis spans `[0, 1]`.
    ///
    /// Returns the scaled copy and the factor with
    /// `original length = scaled length × scale`.
    pub fn normalize_unit_square(&self) -> Result<(TspInstance, f64)> {
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &[x, y] in &self.coords {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        let scale = (max_x - min_x).max(max_y - min_y);
        if scale <= 0.0 {
            return Err(Error::DegenerateInstance("all points coincide".into()));
        }
        let coords = self
            .coords
            .iter()
            .map(|&[x, y]| [(x - min_x) / scale, (y - min_y) / scale])
            .collect();
        // Rounding only makes sense in the original units.
        let inst = TspInstance {
            coords,
            metric: Metric::ContinuousEuclidean,
            name: self.name.clone(),
        };
        Ok((inst, scale))
    }

    /// Native text form: `tsp <n> <metric> <name>` followed by one `x y` line per node.
    pub fn to_native(&self) -> String {
        let mut out = String::with_capacity(48 * self.n() + 64);
        let name = match self.name.as_deref() {
            Some(s) if !s.is_empty() => s.split_whitespace().collect::<Vec<_>>().join("_"),
            _ => "-".to_string(),
        };
        writeln!(out, "tsp {} {} {}", self.n(), self.metric, name).unwrap();
        for &[x, y] in &self.coords {
            writeln!(out, "{x:.16e} {y:.16e}").unwrap();
        }
        out
    }

    pub fn from_native(text: &str) -> Result<TspInstance> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty document"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "tsp" {
            return Err(Error::UnsupportedFormat(format!("bad instance header `{header}`")));
        }
        let n: usize = fields[1].parse().map_err(|e| Error::parse(1, e))?;
        let metric: Metric = fields[2].parse()?;
        let name = (fields[3] != "-").then(|| fields[3].to_string());
        let mut coords = Vec::with_capacity(n);
        for (idx, line) in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::parse(idx + 1, "missing coordinate"))?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(idx + 1, e))
            };
            coords.push([next()?, next()?]);
        }
        if coords.len() != n {
            return Err(Error::parse(
                0,
                format!("header declares {n} nodes, found {}", coords.len()),
            ));
        }
        TspInstance::new(coords, metric, name)
    }

    /// Writes the instance as a TSPLIB `EUC_2D` document.
    pub fn to_tsplib(&self) -> String {
        let mut out = String::new();
        writeln!(out, "NAME : {}", self.name.as_deref().unwrap_or("unnamed")).unwrap();
        writeln!(out, "TYPE : TSP").unwrap();
        writeln!(out, "DIMENSION : {}", self.n()).unwrap();
        writeln!(out, "EDGE_WEIGHT_TYPE : EUC_2D").unwrap();
        writeln!(out, "NODE_COORD_SECTION").unwrap();
        for (i, &[x, y]) in self.coords.iter().enumerate() {
            writeln!(out, "{} {} {}", i + 1, x, y).unwrap();
        }
        writeln!(out, "EOF").unwrap();
        out
    }
}

fn check_size(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidSize(format!("need at least {min} nodes, got {n}")));
    }
    Ok(())
}

fn uniform_points<R: Rng>(rng: &mut R, n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn clustered_points<R: Rng>(rng: &mut R, n: usize, clusters: usize) -> Vec<[f64; 2]> {
    let centers = uniform_points(rng, clusters);
    let normal = Normal::new(0.0, CLUSTER_SIGMA).expect("valid sigma");
    (0..n)
        .map(|_| {
            let [cx, cy] = centers[rng.random_range(0..clusters)];
            loop {
                let x = cx + normal.sample(rng);
                let y = cy + normal.sample(rng);
                if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                    break [x, y];
                }
            }
        })
        .collect()
}

/// `n` i.i.d. points in the unit square.
pub fn generate_uniform(n: usize, seed: u64) -> Result<TspInstance> {
    check_size(n, 3)?;
    let mut rng = rng_from_seed(seed);
    TspInstance::new(uniform_points(&mut rng, n), Metric::ContinuousEuclidean, None)
}

/// Gaussian clusters around `clusters` uniform centres, rejection-sampled into the unit square.
pub fn generate_clustered(n: usize, clusters: usize, seed: u64) -> Result<TspInstance> {
    if !(3..=8).contains(&clusters) {
        return Err(Error::InvalidArgument(format!(
            "cluster count must lie in [3, 8], got {clusters}"
        )));
    }
    check_size(n, clusters)?;
    let mut rng = rng_from_seed(seed);
    TspInstance::new(clustered_points(&mut rng, n, clusters), Metric::ContinuousEuclidean, None)
}

/// Half uniform, half clustered (3 to 8 clusters, drawn from the seed), shuffled.
pub fn generate_mixed(n: usize, seed: u64) -> Result<TspInstance> {
    generate_mixed_with_sources(n, seed).map(|(inst, _)| inst)
}

/// Like [`generate_mixed`] but also reports the origin of each point.
pub fn generate_mixed_with_sources(n: usize, seed: u64) -> Result<(TspInstance, Vec<PointSource>)> {
    check_size(n, 6)?;
    let mut rng = rng_from_seed(seed);
    let n_uniform = n.div_ceil(2);
    let n_clustered = n / 2;
    let clusters = rng.random_range(3..=8).min(n_clustered);
    let mut tagged: Vec<([f64; 2], PointSource)> = uniform_points(&mut rng, n_uniform)
        .into_iter()
        .map(|p| (p, PointSource::Uniform))
        .collect();
    tagged.extend(
        clustered_points(&mut rng, n_clustered, clusters.max(1))
            .into_iter()
            .map(|p| (p, PointSource::Clustered)),
    );
    tagged.shuffle(&mut rng);
    let (coords, sources) = tagged.into_iter().unzip();
    Ok((TspInstance::new(coords, Metric::ContinuousEuclidean, None)?, sources))
}

/// Parses the `EUC_2D` subset of TSPLIB.
pub fn parse_tsplib(text: &str) -> Result<TspInstance> {
    let mut name = None;
    let mut dimension: Option<usize> = None;
    let mut problem_type = None;
    let mut weight_type = None;
    let mut nodes: Vec<(i64, [f64; 2])> = Vec::new();
    let mut in_coords = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                // any other section terminates the coordinate block
                if fields[0].chars().all(|c| c.is_ascii_uppercase() || c == '_') {
                    in_coords = false;
                    continue;
                }
                return Err(Error::parse(line_no, format!("expected `id x y`, got `{line}`")));
            }
            let id: i64 = fields[0].parse().map_err(|e| Error::parse(line_no, e))?;
            let x: f64 = fields[1].parse().map_err(|e| Error::parse(line_no, e))?;
            let y: f64 = fields[2].parse().map_err(|e| Error::parse(line_no, e))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::parse(line_no, "non-finite coordinate"));
            }
            nodes.push((id, [x, y]));
            continue;
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            if line.ends_with("_SECTION") {
                return Err(Error::UnsupportedFormat(format!("section `{line}` is not supported")));
            }
            return Err(Error::parse(line_no, format!("expected `KEY : VALUE`, got `{line}`")));
        };
        let value = value.trim();
        match key.trim() {
            "NAME" => name = Some(value.to_string()),
            "TYPE" => problem_type = Some(value.to_string()),
            "DIMENSION" => {
                dimension = Some(value.parse().map_err(|e| Error::parse(line_no, e))?);
            }
            "EDGE_WEIGHT_TYPE" => weight_type = Some(value.to_string()),
            _ => {}
        }
    }

    match problem_type.as_deref() {
        Some("TSP") => {}
        other => {
            return Err(Error::UnsupportedFormat(format!("TYPE must be TSP, got {other:?}")));
        }
    }
    match weight_type.as_deref() {
        Some("EUC_2D") => {}
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "EDGE_WEIGHT_TYPE must be EUC_2D, got {other:?}"
            )));
        }
    }
    if let Some(d) = dimension {
        if d != nodes.len() {
            return Err(Error::parse(0, format!("DIMENSION {d} but {} coordinates", nodes.len())));
        }
    }
    if nodes.len() > TSPLIB_MAX_NODES {
        return Err(Error::UnsupportedFormat(format!(
            "{} nodes exceeds the supported {TSPLIB_MAX_NODES}",
            nodes.len()
        )));
    }
    nodes.sort_by_key(|&(id, _)| id);
    if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::parse(0, "duplicate node id"));
    }
    let coords = nodes.into_iter().map(|(_, p)| p).collect();
    TspInstance::new(coords, Metric::TsplibRounded, name)
}

/// Marker in [`SparseGraph::reverse_index`] for an absent opposite edge.
pub const NO_REVERSE: usize = usize::MAX;

/// Directed graph holding the `gamma` nearest out-neighbours of every node.
///
/// Edge `(i, slot)` has flat index `i * gamma + slot`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    n: usize,
    gamma: usize,
    neighbors: Vec<usize>,
    dist: Vec<f64>,
    reverse: Vec<usize>,
}

impl SparseGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.gamma
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.gamma..(i + 1) * self.gamma]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.dist[i * self.gamma..(i + 1) * self.gamma]
    }

    /// Flat target array, `neighbors[e]` is the head of edge `e`.
    pub fn targets(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn edge_distances(&self) -> &[f64] {
        &self.dist
    }

    /// Flat index of the opposite edge for every edge, or [`NO_REVERSE`].
    pub fn reverse_index(&self) -> &[usize] {
        &self.reverse
    }

    /// Flat index of edge `(i, j)` if present.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors(i).iter().position(|&m| m == j).map(|s| i * self.gamma + s)
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SparseGraph {
        let g = self.gamma;
        let mut neighbors = vec![0; self.neighbors.len()];
        let mut dist = vec![0.0; self.dist.len()];
        for i in 0..self.n {
            let dst = perm[i] * g;
            for s in 0..g {
                neighbors[dst + s] = perm[self.neighbors[i * g + s]];
                dist[dst + s] = self.dist[i * g + s];
            }
        }
        let mut out = SparseGraph { n: self.n, gamma: g, neighbors, dist, reverse: Vec::new() };
        out.reverse = out.compute_reverse();
        out
    }

    fn compute_reverse(&self) -> Vec<usize> {
        (0..self.edge_count())
            .map(|e| {
                let i = e / self.gamma;
                let j = self.neighbors[e];
                self.edge_index(j, i).unwrap_or(NO_REVERSE)
            })
            .collect()
    }
}

/// γ nearest out-neighbours per node, ascending by distance then node id.
pub fn build_sparse_graph(inst: &TspInstance, gamma: usize) -> Result<SparseGraph> {
    let n = inst.n();
    if gamma == 0 || gamma >= n {
        return Err(Error::InvalidArgument(format!("gamma must lie in [1, n-1], got {gamma} for n = {n}")));
    }
    let mut neighbors = Vec::with_capacity(n * gamma);
    let mut dist = Vec::with_capacity(n * gamma);
    let mut row: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| (inst.dist(i, j), j)));
        row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d, j) in &row[..gamma] {
            neighbors.push(j);
            dist.push(d);
        }
    }
    let mut graph = SparseGraph { n, gamma, neighbors, dist, reverse: Vec::new() };
    graph.reverse = graph.compute_reverse();
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::unit_square;
    use approx::assert_relative_eq;

    #[test]
    fn distances() {
        let sq = unit_square();
        assert_eq!(sq.distance(0, 1).unwrap(), 1.0);
        assert_relative_eq!(sq.distance(0, 2).unwrap(), 2f64.sqrt());
        let rounded = TspInstance::new(sq.coords().to_vec(), Metric::TsplibRounded, None).unwrap();
        assert_eq!(rounded.distance(0, 2).unwrap(), 1.0);
        assert!(matches!(sq.distance(1, 1), Err(Error::InvalidArgument(_))));
        let line = TspInstance::new(vec![[0.0, 0.0], [0.0, 3.0], [5.0, 5.0]], Metric::TsplibRounded, None)
            .unwrap();
        assert_eq!(line.distance(0, 1).unwrap(), 3.0);
    }

    #[test]
    fn rejects_tiny_and_non_finite() {
        assert!(matches!(generate_uniform(2, 0), Err(Error::InvalidSize(_))));
        assert!(matches!(generate_mixed(5, 0), Err(Error::InvalidSize(_))));
        assert!(matches!(generate_clustered(50, 2, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_clustered(50, 9, 0), Err(Error::InvalidArgument(_))));
        let bad = TspInstance::new(vec![[0.0, f64::NAN], [1.0, 0.0], [0.0, 1.0]], Metric::ContinuousEuclidean, None);
        assert!(bad.is_err());
    }

    #[test]
    fn uniform_generator() {
        let a = generate_uniform(4, 11).unwrap();
        assert!(a.coords().iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
        let b = generate_uniform(100, 1).unwrap();
        assert_eq!(b, generate_uniform(100, 1).unwrap());
        for axis in 0..2 {
            let mean = b.coords().iter().map(|p| p[axis]).sum::<f64>() / 100.0;
            assert!((mean - 0.5).abs() < 0.1, "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn clustered_generator_in_range_and_deterministic() {
        let a = generate_clustered(50, 3, 5).unwrap();
        assert!(a.coords().iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));
        assert_eq!(a, generate_clustered(50, 3, 5).unwrap());
    }

    #[test]
    fn mixed_generator_split() {
        let (inst, sources) = generate_mixed_with_sources(10, 4).unwrap();
        assert_eq!(inst.n(), 10);
        assert_eq!(sources.iter().filter(|s| **s == PointSource::Uniform).count(), 5);
        assert_eq!(sources.iter().filter(|s| **s == PointSource::Clustered).count(), 5);
        let (odd, sources) = generate_mixed_with_sources(11, 4).unwrap();
        assert_eq!(odd.n(), 11);
        assert_eq!(sources.iter().filter(|s| **s == PointSource::Uniform).count(), 6);
        assert_eq!(generate_mixed(100, 3).unwrap(), generate_mixed(100, 3).unwrap());
        assert_ne!(generate_mixed(100, 3).unwrap(), generate_uniform(100, 3).unwrap());
    }

    #[test]
    fn normalization() {
        let big = TspInstance::new(vec![[0.0, 0.0], [80.0, 0.0], [80.0, 80.0], [0.0, 40.0]], Metric::ContinuousEuclidean, None)
            .unwrap();
        let (norm, scale) = big.normalize_unit_square().unwrap();
        assert_eq!(scale, 80.0);
        assert!(norm.coords().iter().flatten().all(|&c| (0.0..=1.0).contains(&c)));

        let sq = unit_square();
        let (same, scale) = sq.normalize_unit_square().unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(same.coords(), sq.coords());

        let rect = TspInstance::new(vec![[0.0, 0.0], [10.0, 0.0], [10.0, 5.0], [0.0, 5.0]], Metric::ContinuousEuclidean, None)
            .unwrap();
        let (r, scale) = rect.normalize_unit_square().unwrap();
        assert_eq!(scale, 10.0);
        assert_eq!(r.coords()[2], [1.0, 0.5]);

        let flat = TspInstance::new(vec![[1.0, 1.0]; 3], Metric::ContinuousEuclidean, None).unwrap();
        assert!(matches!(flat.normalize_unit_square(), Err(Error::DegenerateInstance(_))));
    }

    #[test]
    fn tsplib_parsing() {
        let doc = "NAME : tiny\nCOMMENT : test\nTYPE : TSP\nDIMENSION : 3\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n1 0 0\n2 0 3\n3 4 0\nEOF\n";
        let inst = parse_tsplib(doc).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.metric(), Metric::TsplibRounded);
        assert_eq!(inst.name(), Some("tiny"));
        assert_eq!(inst.distance(0, 1).unwrap(), 3.0);
        assert_eq!(parse_tsplib(&inst.to_tsplib()).unwrap().coords(), inst.coords());

        let geo = doc.replace("EUC_2D", "GEO");
        assert!(matches!(parse_tsplib(&geo), Err(Error::UnsupportedFormat(_))));
        let broken = doc.replace("2 0 3", "2 zero 3");
        assert!(matches!(parse_tsplib(&broken), Err(Error::Parse { .. })));
    }

    #[test]
    fn native_round_trip() {
        let inst = generate_uniform(17, 9).unwrap().with_name("u17");
        let back = TspInstance::from_native(&inst.to_native()).unwrap();
        assert_eq!(back, inst);
        let header = inst.to_native().lines().next().unwrap().to_string();
        assert_eq!(header, "tsp 17 continuous-euclidean u17");
    }

    #[test]
    fn sparse_graph_square() {
        let g = build_sparse_graph(&unit_square(), 2).unwrap();
        assert_eq!(g.neighbors(0), &[1, 3]);
        assert_eq!(g.neighbors(2), &[1, 3]);
        assert!(g.distances(0).iter().all(|&d| d == 1.0));
        for e in 0..g.edge_count() {
            let r = g.reverse_index()[e];
            assert_ne!(r, NO_REVERSE);
            assert_eq!(g.targets()[r], e / 2);
        }
        assert!(build_sparse_graph(&unit_square(), 4).is_err());
    }

    #[test]
    fn sparse_graph_uniform() {
        let inst = generate_uniform(100, 3).unwrap();
        let g = build_sparse_graph(&inst, 20).unwrap();
        for i in 0..100 {
            assert_eq!(g.neighbors(i).len(), 20);
            assert!(g.distances(i).windows(2).all(|w| w[0] <= w[1]));
            assert!(!g.neighbors(i).contains(&i));
        }
        for (e, &r) in g.reverse_index().iter().enumerate() {
            if r != NO_REVERSE {
                assert_eq!(g.targets()[r], e / 20);
            }
        }
    }
}
