//! Evaluation reports.
//!
//! A report is plain text: `#` header lines, a tab-separated table with one
//! row per instance, `# aggregate` lines, and a `## trace` section holding
//! the best length after every trial. Numbers are written in shortest
//! round-trip form, so aggregates recomputed from parsed rows are exact.
//! Wall-clock columns appear only when timing is requested, which keeps
//! repeated runs byte-identical otherwise.

use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tsplab::candidates::{candidate_quality, CandidateQuality};
use tsplab::rng::derive_seed;
use tsplab::SgnModel32;

use crate::dataset::{Dataset, Manifest};
use crate::error::{Error, Result};
use crate::solver::{solve_instance, SolverConfig};

pub const REPORT_VERSION: &str = "tsplab-report-1";
const COLUMNS: [&str; 11] = ["id", "config", "n", "best", "oracle", "gap", "trials", "missed", "avg_rank", "bound", "status"];

/// Identity of a dataset's instances, independent of labels and location.
pub fn dataset_fingerprint(m: &Manifest) -> String {
    let mut h = Sha256::new();
    h.update(format!("{:?}\n", m.spec));
    for e in &m.entries {
        h.update(format!("{} {} {} {:?} {}\n", e.id, e.n, e.law, e.clusters, e.seed));
    }
    format!("{:x}", h.finalize())[..16].to_string()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub id: String,
    pub config: String,
    pub n: usize,
    pub best: Option<f64>,
    pub oracle: Option<f64>,
    /// `(best − oracle) / oracle` in parts per ten thousand.
    pub gap: Option<f64>,
    pub trials: usize,
    pub missed: Option<f64>,
    pub avg_rank: Option<f64>,
    pub bound: Option<f64>,
    /// `ok`, `ok:shorter-than-label`, or `error:<message>`.
    pub status: String,
    pub elapsed_ms: Option<f64>,
}

impl Row {
    pub fn failed(&self) -> bool {
        self.status.starts_with("error")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub config: String,
    pub timing: bool,
    pub rows: Vec<Row>,
    pub traces: Vec<(String, Vec<f64>)>,
}

/// Means over the rows that carry each value.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregates {
    pub instances: usize,
    pub failures: usize,
    pub mean_gap: Option<f64>,
    pub optimal_hits: Option<usize>,
    pub mean_best: Option<f64>,
    pub mean_missed: Option<f64>,
    pub mean_avg_rank: Option<f64>,
    pub mean_time_ms: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Gaps at or below this many ‱ count as optimal.
pub const OPTIMAL_GAP_TOL: f64 = 1e-6;

impl EvalReport {
    pub fn aggregates(&self) -> Aggregates {
        let ok: Vec<&Row> = self.rows.iter().filter(|r| !r.failed()).collect();
        let gaps: Vec<f64> = ok.iter().filter_map(|r| r.gap).collect();
        Aggregates {
            instances: self.rows.len(),
            failures: self.rows.len() - ok.len(),
            mean_gap: mean(gaps.iter().copied()),
            optimal_hits: (!gaps.is_empty()).then(|| gaps.iter().filter(|&&g| g <= OPTIMAL_GAP_TOL).count()),
            mean_best: mean(ok.iter().filter_map(|r| r.best)),
            mean_missed: mean(ok.iter().filter_map(|r| r.missed)),
            mean_avg_rank: mean(ok.iter().filter_map(|r| r.avg_rank)),
            mean_time_ms: if self.timing { mean(ok.iter().filter_map(|r| r.elapsed_ms)) } else { None },
        }
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
        let mut out = String::new();
        writeln!(out, "# {REPORT_VERSION}").unwrap();
        writeln!(out, "# dataset {}", self.dataset).unwrap();
        writeln!(out, "# config {}", self.config).unwrap();
        writeln!(out, "# timing {}", if self.timing { "on" } else { "off" }).unwrap();
        let mut header = COLUMNS.join("\t");
        if self.timing {
            header.push_str("\telapsed_ms");
        }
        writeln!(out, "{header}").unwrap();
        for r in &self.rows {
            write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.id,
                r.config,
                r.n,
                opt(r.best),
                opt(r.oracle),
                opt(r.gap),
                r.trials,
                opt(r.missed),
                opt(r.avg_rank),
                opt(r.bound),
                r.status
            )
            .unwrap();
            if self.timing {
                write!(out, "\t{}", opt(r.elapsed_ms)).unwrap();
            }
            out.push('\n');
        }
        let a = self.aggregates();
        writeln!(out, "# aggregate instances {}", a.instances).unwrap();
        writeln!(out, "# aggregate failures {}", a.failures).unwrap();
        writeln!(out, "# aggregate mean_gap {}", opt(a.mean_gap)).unwrap();
        writeln!(out, "# aggregate optimal_hits {}", a.optimal_hits.map_or("-".into(), |h| h.to_string())).unwrap();
        writeln!(out, "# aggregate mean_best {}", opt(a.mean_best)).unwrap();
        writeln!(out, "# aggregate mean_missed {}", opt(a.mean_missed)).unwrap();
        writeln!(out, "# aggregate mean_avg_rank {}", opt(a.mean_avg_rank)).unwrap();
        if self.timing {
            writeln!(out, "# aggregate mean_time_ms {}", opt(a.mean_time_ms)).unwrap();
        }
        writeln!(out, "## trace").unwrap();
        for (id, values) in &self.traces {
            write!(out, "trace\t{id}").unwrap();
            for v in values {
                write!(out, "\t{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::Report(format!("line {}: {m}", line + 1));
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String> {
            let (i, l) = lines.next().ok_or_else(|| Error::Report("truncated header".into()))?;
            l.strip_prefix("# ")
                .and_then(|l| if key.is_empty() { Some(l) } else { l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) })
                .map(str::to_string)
                .ok_or_else(|| bad(i, &format!("expected header {key:?}")))
        };
        if header("")? != REPORT_VERSION {
            return Err(Error::Report("not a report".into()));
        }
        let dataset = header("dataset")?;
        let config = header("config")?;
        let timing = header("timing")? == "on";
        lines.next();
        let mut rows = Vec::new();
        let mut traces = Vec::new();
        let mut in_trace = false;
        for (i, line) in lines {
            if line == "## trace" {
                in_trace = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if in_trace {
                if f.len() < 2 || f[0] != "trace" {
                    return Err(bad(i, "bad trace line"));
                }
                let values = f[2..].iter().map(|v| v.parse().map_err(|_| bad(i, "bad trace value"))).collect::<Result<_>>()?;
                traces.push((f[1].to_string(), values));
                continue;
            }
            if f.len() != COLUMNS.len() + timing as usize {
                return Err(bad(i, "wrong column count"));
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s == "-" {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(i, &format!("bad number {s:?}")))
                }
            };
            rows.push(Row {
                id: f[0].to_string(),
                config: f[1].to_string(),
                n: f[2].parse().map_err(|_| bad(i, "bad n"))?,
                best: opt(f[3])?,
                oracle: opt(f[4])?,
                gap: opt(f[5])?,
                trials: f[6].parse().map_err(|_| bad(i, "bad trials"))?,
                missed: opt(f[7])?,
                avg_rank: opt(f[8])?,
                bound: opt(f[9])?,
                status: f[10].to_string(),
                elapsed_ms: if timing { opt(f[11])? } else { None },
            });
        }
        Ok(EvalReport { dataset, config, timing, rows, traces })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Adds wall-clock columns; the report is then no longer reproducible byte for byte.
    pub timing: bool,
}

/// Label-free relative gap in ‱.
pub fn gap_permyriad(best: f64, reference: f64) -> f64 {
    (best - reference) / reference * 1e4
}

/// Runs `cfg` on every instance of `ds` in manifest order.
pub fn evaluate(ds: &Dataset, cfg: &SolverConfig, model: Option<&SgnModel32>, opts: EvalOptions) -> Result<EvalReport> {
    cfg.validate(model)?;
    let config = cfg.id();
    let optimal = ds.labels_are_optimal();
    let results: Vec<(Row, Vec<f64>)> = ds
        .manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(index, entry)| {
            let mut row = Row {
                id: entry.id.clone(),
                config: config.clone(),
                n: entry.n,
                best: None,
                oracle: None,
                gap: None,
                trials: 0,
                missed: None,
                avg_rank: None,
                bound: None,
                status: "ok".into(),
                elapsed_ms: None,
            };
            let mut run = || -> Result<Vec<f64>> {
                let inst = ds.load_instance(entry)?;
                let label = ds.load_label(entry)?;
                let out = solve_instance(&inst, cfg, model, derive_seed(cfg.seed, index as u64))?;
                row.best = Some(out.length);
                row.trials = out.trials_run;
                row.bound = out.bound;
                if opts.timing {
                    row.elapsed_ms = Some(out.elapsed.as_secs_f64() * 1e3);
                }
                if let Some(label) = label {
                    let CandidateQuality { missed_fraction, avg_rank } = candidate_quality(&out.candidates, &label.tour);
                    row.missed = Some(missed_fraction);
                    row.avg_rank = avg_rank;
                    if optimal {
                        row.oracle = Some(label.length);
                        row.gap = Some(gap_permyriad(out.length, label.length));
                    } else if out.length < label.length - 1e-9 {
                        row.status = "ok:shorter-than-label".into();
                    }
                }
                Ok(out.trace)
            };
            match run() {
                Ok(trace) => (row, trace),
                Err(e) => {
                    row.status = format!("error:{}", e.to_string().replace(char::is_whitespace, "_"));
                    (row, Vec::new())
                }
            }
        })
        .collect();
    let (rows, traces): (Vec<Row>, Vec<(String, Vec<f64>)>) =
        results.into_iter().map(|(row, trace)| { let id = row.id.clone(); (row, (id, trace)) }).unzip();
    Ok(EvalReport { dataset: dataset_fingerprint(&ds.manifest), config, timing: opts.timing, rows, traces })
}
