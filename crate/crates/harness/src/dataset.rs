//! On-disk datasets: a `manifest.txt`, one native instance file per
//! instance and optional label files.
//!
//! The manifest is a block of `key=value` lines followed by one
//! `instance` line per entry:
//!
//! ```text
//! format=tsplab-dataset-1
//! generator=chacha8-v1
//! seed=1
//! metric=continuous-euclidean
//! scale=1
//! sizes=10x5,12x5
//! laws=uniform
//! label_source=oracle
//! instance 00000 10 uniform - 1234567 instances/00000.tsp labels/00000.label
//! ```

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use tsplab::instance::{build_sparse_graph, generate_clustered, generate_mixed, generate_uniform};
use tsplab::oracle::{exact_held_karp, optimum_is_unique, tour_edge_indicator, HELD_KARP_MAX_N};
use tsplab::rng::{derive_seed, rng_from_seed, GENERATOR_VERSION};
use tsplab::search::{run_trials, Tour, TrialConfig};
use tsplab::{Metric, PiVector, TspInstance};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "tsplab-dataset-1";
pub const MANIFEST_FILE: &str = "manifest.txt";
/// Tolerance for declaring a labelled optimum unique.
pub const UNIQUE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    Uniform,
    Clustered,
    Mixed,
}

impl Law {
    pub fn as_str(self) -> &'static str {
        match self {
            Law::Uniform => "uniform",
            Law::Clustered => "clustered",
            Law::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Law::Uniform),
            "clustered" => Ok(Law::Clustered),
            "mixed" => Ok(Law::Mixed),
            _ => Err(Error::Config(format!("unknown law {s:?} (uniform, clustered, mixed)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SizeGroup {
    pub n: usize,
    pub count: usize,
}

/// Parses `10x5,12x5` into size groups.
pub fn parse_sizes(text: &str) -> Result<Vec<SizeGroup>> {
    let groups: Result<Vec<SizeGroup>> = text
        .split(',')
        .map(|part| {
            let (n, count) = part
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("size group {part:?} is not of the form <n>x<count>")))?;
            let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad size group {part:?}")));
            Ok(SizeGroup { n: parse(n)?, count: parse(count)? })
        })
        .collect();
    let groups = groups?;
    if groups.is_empty() || groups.iter().any(|g| g.n < 3 || g.count == 0) {
        return Err(Error::Config(format!("size groups need n >= 3 and count >= 1: {text:?}")));
    }
    Ok(groups)
}

pub fn format_sizes(groups: &[SizeGroup]) -> String {
    groups.iter().map(|g| format!("{}x{}", g.n, g.count)).collect::<Vec<_>>().join(",")
}

/// What to generate.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub sizes: Vec<SizeGroup>,
    /// Instance `k` uses `laws[k % laws.len()]`.
    pub laws: Vec<Law>,
    pub seed: u64,
    pub metric: Metric,
    /// Coordinates are multiplied by this after generation.
    pub scale: f64,
}

impl DatasetSpec {
    pub fn uniform(n: usize, count: usize, seed: u64) -> Self {
        DatasetSpec {
            sizes: vec![SizeGroup { n, count }],
            laws: vec![Law::Uniform],
            seed,
            metric: Metric::ContinuousEuclidean,
            scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.laws.is_empty() {
            return Err(Error::Config("dataset needs at least one size group and one law".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LabelSource {
    /// Exact dynamic program.
    Oracle,
    /// Best tour of a seeded multi-trial search.
    Search { trials: usize, seed: u64 },
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSource::Oracle => f.write_str("oracle"),
            LabelSource::Search { trials, seed } => write!(f, "search:trials={trials}:seed={seed}"),
        }
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" {
            return Ok(LabelSource::Oracle);
        }
        let bad = || Error::Config(format!("bad label source {s:?}"));
        let rest = s.strip_prefix("search:").ok_or_else(bad)?;
        let (mut trials, mut seed) = (None, None);
        for kv in rest.split(':') {
            match kv.split_once('=') {
                Some(("trials", v)) => trials = v.parse().ok(),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => return Err(bad()),
            }
        }
        match (trials, seed) {
            (Some(trials), Some(seed)) if trials > 0 => Ok(LabelSource::Search { trials, seed }),
            _ => Err(bad()),
        }
    }
}

/// One manifest entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub id: String,
    pub n: usize,
    pub law: Law,
    pub clusters: Option<usize>,
    pub seed: u64,
    pub file: String,
    /// Label file, or the reason labelling failed.
    pub label: LabelStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LabelStatus {
    None,
    File(String),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub label_source: Option<LabelSource>,
    pub label_gamma: Option<usize>,
    pub entries: Vec<Entry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        writeln!(out, "format={FORMAT_VERSION}").unwrap();
        writeln!(out, "generator={GENERATOR_VERSION}").unwrap();
        writeln!(out, "seed={}", s.seed).unwrap();
        writeln!(out, "metric={}", s.metric).unwrap();
        writeln!(out, "scale={}", s.scale).unwrap();
        writeln!(out, "sizes={}", format_sizes(&s.sizes)).unwrap();
        writeln!(out, "laws={}", s.laws.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(",")).unwrap();
        match &self.label_source {
            Some(src) => writeln!(out, "label_source={src}").unwrap(),
            None => writeln!(out, "label_source=none").unwrap(),
        }
        if let Some(g) = self.label_gamma {
            writeln!(out, "label_gamma={g}").unwrap();
        }
        for e in &self.entries {
            let clusters = e.clusters.map_or("-".to_string(), |c| c.to_string());
            let label = match &e.label {
                LabelStatus::None => "-".to_string(),
                LabelStatus::File(f) => f.clone(),
                LabelStatus::Failed(why) => format!("!{}", why.replace(char::is_whitespace, "_")),
            };
            writeln!(out, "instance {} {} {} {} {} {} {}", e.id, e.n, e.law, clusters, e.seed, e.file, label).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = std::collections::BTreeMap::new();
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::Manifest(format!("line {}: {msg}", lineno + 1));
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("instance ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 7 {
                    return Err(bad("instance line needs 7 fields"));
                }
                let label = match f[6] {
                    "-" => LabelStatus::None,
                    s if s.starts_with('!') => LabelStatus::Failed(s[1..].to_string()),
                    s => LabelStatus::File(s.to_string()),
                };
                entries.push(Entry {
                    id: f[0].to_string(),
                    n: f[1].parse().map_err(|_| bad("bad node count"))?,
                    law: f[2].parse().map_err(|_| bad("bad law"))?,
                    clusters: if f[3] == "-" { None } else { Some(f[3].parse().map_err(|_| bad("bad cluster count"))?) },
                    seed: f[4].parse().map_err(|_| bad("bad seed"))?,
                    file: f[5].to_string(),
                    label,
                });
            } else if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.to_string(), v.to_string());
            } else {
                return Err(bad("expected key=value or an instance line"));
            }
        }
        let get = |k: &str| kv.get(k).cloned().ok_or_else(|| Error::Manifest(format!("missing key {k}")));
        if get("format")? != FORMAT_VERSION {
            return Err(Error::Manifest(format!("unsupported format {}", get("format")?)));
        }
        if get("generator")? != GENERATOR_VERSION {
            return Err(Error::Manifest(format!("instances were made by generator {}", get("generator")?)));
        }
        let spec = DatasetSpec {
            sizes: parse_sizes(&get("sizes")?)?,
            laws: get("laws")?.split(',').map(str::parse).collect::<Result<_>>()?,
            seed: get("seed")?.parse().map_err(|_| Error::Manifest("bad seed".into()))?,
            metric: get("metric")?.parse().map_err(|e: tsplab::Error| Error::Manifest(e.to_string()))?,
            scale: get("scale")?.parse().map_err(|_| Error::Manifest("bad scale".into()))?,
        };
        let label_source = match get("label_source")?.as_str() {
            "none" => None,
            s => Some(s.parse()?),
        };
        let label_gamma = kv.get("label_gamma").map(|g| g.parse()).transpose().map_err(|_| Error::Manifest("bad label_gamma".into()))?;
        Ok(Manifest { spec, label_source, label_gamma, entries })
    }
}

/// An opened dataset directory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

/// A loaded label file.
#[derive(Clone, Debug, PartialEq)]
pub struct Label {
    pub id: String,
    pub source: String,
    pub length: f64,
    /// Known only for oracle labels.
    pub unique: Option<bool>,
    pub tour: Tour,
    pub gamma: usize,
    /// Directed sparse-graph edges on the tour, `gamma` per node.
    pub edges: Vec<bool>,
}

impl Label {
    pub fn to_text(&self) -> String {
        let unique = self.unique.map_or("unknown".to_string(), |u| u.to_string());
        let mut out = format!(
            "label {} source={} length={} unique={} gamma={}\ntour",
            self.id, self.source, self.length, unique, self.gamma
        );
        for v in self.tour.order() {
            write!(out, " {v}").unwrap();
        }
        out.push_str("\nedges");
        for row in self.edges.chunks(self.gamma) {
            out.push(' ');
            out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
        }
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Manifest(format!("label file: {m}"));
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if head.len() != 6 || head[0] != "label" {
            return Err(bad("bad header"));
        }
        let field = |i: usize, key: &str| head[i].strip_prefix(key).ok_or_else(|| bad(&format!("expected {key}")));
        let tour_line = lines.next().and_then(|l| l.strip_prefix("tour")).ok_or_else(|| bad("missing tour"))?;
        let order: Vec<usize> =
            tour_line.split_whitespace().map(|t| t.parse().map_err(|_| bad("bad tour node"))).collect::<Result<_>>()?;
        let edges_line = lines.next().and_then(|l| l.strip_prefix("edges")).ok_or_else(|| bad("missing edges"))?;
        let edges: Vec<bool> = edges_line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                _ => Err(bad("bad edge flag")),
            })
            .collect::<Result<_>>()?;
        let unique = match field(4, "unique=")? {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        };
        let gamma: usize = field(5, "gamma=")?.parse().map_err(|_| bad("bad gamma"))?;
        let tour = Tour::from_order(order).map_err(|e| bad(&e.to_string()))?;
        if edges.len() != tour.n() * gamma {
            return Err(bad("edge flags do not match n * gamma"));
        }
        Ok(Label {
            id: head[1].to_string(),
            source: field(2, "source=")?.to_string(),
            length: field(3, "length=")?.parse().map_err(|_| bad("bad length"))?,
            unique,
            tour,
            gamma,
            edges,
        })
    }
}

fn generate(entry_law: Law, n: usize, clusters: Option<usize>, seed: u64) -> Result<TspInstance> {
    Ok(match entry_law {
        Law::Uniform => generate_uniform(n, seed)?,
        Law::Clustered => generate_clustered(n, clusters.unwrap_or(3), seed)?,
        Law::Mixed => generate_mixed(n, seed)?,
    })
}

/// Builds the instance of `entry` from its recorded seed.
pub fn regenerate(spec: &DatasetSpec, entry: &Entry) -> Result<TspInstance> {
    let base = generate(entry.law, entry.n, entry.clusters, entry.seed)?;
    let coords = base.coords().iter().map(|p| [p[0] * spec.scale, p[1] * spec.scale]).collect();
    Ok(TspInstance::new(coords, spec.metric, Some(entry.id.clone()))?)
}

fn plan(spec: &DatasetSpec) -> Vec<Entry> {
    let mut out = Vec::new();
    let mut index = 0u64;
    for group in &spec.sizes {
        for _ in 0..group.count {
            let law = spec.laws[index as usize % spec.laws.len()];
            let seed = derive_seed(spec.seed, index);
            // cluster counts come from a separate stream so they never shift point draws
            let clusters = (law == Law::Clustered)
                .then(|| rng_from_seed(derive_seed(seed, u64::MAX)).random_range(3..=8usize).min(group.n));
            let id = format!("{index:05}");
            out.push(Entry {
                file: format!("instances/{id}.tsp"),
                id,
                n: group.n,
                law,
                clusters,
                seed,
                label: LabelStatus::None,
            });
            index += 1;
        }
    }
    out
}

/// Writes `spec` to `root`. Re-running an identical spec is a no-op; a
/// different existing manifest is refused.
pub fn make_dataset(root: &Path, spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let manifest_path = root.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let existing = Manifest::parse(&fs::read_to_string(&manifest_path)?)?;
        if existing.spec != *spec {
            return Err(Error::RefuseOverwrite(root.display().to_string()));
        }
        return Dataset::open(root);
    }
    fs::create_dir_all(root.join("instances"))?;
    let entries = plan(spec);
    for e in &entries {
        let inst = regenerate(spec, e)?;
        fs::write(root.join(&e.file), inst.to_native())?;
    }
    let manifest = Manifest { spec: spec.clone(), label_source: None, label_gamma: None, entries };
    fs::write(&manifest_path, manifest.to_text())?;
    Ok(Dataset { root: root.to_path_buf(), manifest })
}

/// Labelling outcome; failures are recorded in the manifest as well.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelSummary {
    pub labeled: usize,
    pub failed: Vec<(String, String)>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let text = fs::read_to_string(root.join(MANIFEST_FILE))
            .map_err(|e| Error::Config(format!("cannot read dataset manifest in {}: {e}", root.display())))?;
        Ok(Dataset { root: root.to_path_buf(), manifest: Manifest::parse(&text)? })
    }

    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.entries.is_empty()
    }

    pub fn load_instance(&self, entry: &Entry) -> Result<TspInstance> {
        Ok(TspInstance::from_native(&fs::read_to_string(self.root.join(&entry.file))?)?)
    }

    pub fn load_label(&self, entry: &Entry) -> Result<Option<Label>> {
        match &entry.label {
            LabelStatus::File(f) => Ok(Some(Label::parse(&fs::read_to_string(self.root.join(f))?)?)),
            _ => Ok(None),
        }
    }

    /// Whether the label source is exact, so label lengths are optima.
    pub fn labels_are_optimal(&self) -> bool {
        self.manifest.label_source == Some(LabelSource::Oracle)
    }

    /// Checks that every instance file parses and matches its seed.
    pub fn verify(&self) -> Result<()> {
        for e in &self.manifest.entries {
            let stored = self.load_instance(e)?;
            let fresh = regenerate(&self.manifest.spec, e)?;
            if stored.to_native() != fresh.to_native() {
                return Err(Error::Manifest(format!("instance {} does not match its seed", e.id)));
            }
        }
        Ok(())
    }

    /// Writes a label file per instance and records `source` in the manifest.
    pub fn label(&mut self, source: &LabelSource, gamma: usize) -> Result<LabelSummary> {
        fs::create_dir_all(self.root.join("labels"))?;
        let mut summary = LabelSummary::default();
        for index in 0..self.manifest.entries.len() {
            let entry = self.manifest.entries[index].clone();
            let status = match self.label_one(&entry, source, gamma) {
                Ok(label) => {
                    let file = format!("labels/{}.label", entry.id);
                    fs::write(self.root.join(&file), label.to_text())?;
                    summary.labeled += 1;
                    LabelStatus::File(file)
                }
                Err(err) => {
                    summary.failed.push((entry.id.clone(), err.to_string()));
                    LabelStatus::Failed(err.to_string())
                }
            };
            self.manifest.entries[index].label = status;
        }
        self.manifest.label_source = Some(source.clone());
        self.manifest.label_gamma = Some(gamma);
        fs::write(self.root.join(MANIFEST_FILE), self.manifest.to_text())?;
        Ok(summary)
    }

    fn label_one(&self, entry: &Entry, source: &LabelSource, gamma: usize) -> Result<Label> {
        let inst = self.load_instance(entry)?;
        let (tour, length, unique) = match source {
            LabelSource::Oracle => {
                if inst.n() > HELD_KARP_MAX_N {
                    return Err(Error::Core(tsplab::Error::TooLarge {
                        solver: "exact_held_karp",
                        n: inst.n(),
                        limit: HELD_KARP_MAX_N,
                    }));
                }
                let opt = exact_held_karp(&inst)?;
                let unique = optimum_is_unique(&inst, UNIQUE_TOL)?;
                (opt.tour, opt.length, Some(unique))
            }
            LabelSource::Search { trials, seed } => {
                let cands = tsplab::CandidateSet::complete(&inst);
                let cfg = TrialConfig::new(*trials, derive_seed(*seed, entry.seed));
                let (tour, _) = run_trials(&inst, &cands, &PiVector::zeros(inst.n()), &cfg)?;
                let tour = tour.canonical();
                let length = inst.tour_length(tour.order());
                (tour, length, None)
            }
        };
        let gamma = gamma.min(inst.n() - 1);
        let graph = build_sparse_graph(&inst, gamma)?;
        Ok(Label {
            id: entry.id.clone(),
            source: match source {
                LabelSource::Oracle => "held-karp-dp".into(),
                other => other.to_string(),
            },
            length,
            unique,
            edges: tour_edge_indicator(&graph, &tour),
            tour,
            gamma,
        })
    }
}
