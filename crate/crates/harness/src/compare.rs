//! Side-by-side comparison of reports over the same dataset.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::report::EvalReport;

pub const COMPARE_VERSION: &str = "tsplab-compare-1";
/// Values closer than this are a tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Goal {
    Lower,
    Higher,
}

/// Index of the better report, or `None` for a tie or fewer than two values.
fn better(values: &[Option<f64>], goal: Goal) -> Option<usize> {
    let present: Vec<(usize, f64)> = values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    if present.len() < 2 {
        return None;
    }
    let key = |v: f64| if goal == Goal::Lower { v } else { -v };
    let (bi, bv) = present.iter().copied().min_by(|a, b| key(a.1).total_cmp(&key(b.1)))?;
    let runner_up = present.iter().filter(|&&(i, _)| i != bi).map(|&(_, v)| key(v)).min_by(f64::total_cmp)?;
    (runner_up - key(bv) > TIE_TOL).then_some(bi)
}

/// Mean best-so-far length over instances after each trial. Runs that
/// stopped early keep contributing their final value.
pub fn mean_trace(report: &EvalReport) -> Vec<f64> {
    let traces: Vec<&Vec<f64>> = report.traces.iter().map(|(_, t)| t).filter(|t| !t.is_empty()).collect();
    let len = traces.iter().map(|t| t.len()).max().unwrap_or(0);
    (0..len)
        .map(|j| traces.iter().map(|t| t[j.min(t.len() - 1)]).sum::<f64>() / traces.len() as f64)
        .collect()
}

/// Builds the comparison document. All reports must cover the same instances.
pub fn compare(reports: &[EvalReport]) -> Result<String> {
    let first = reports.first().ok_or_else(|| Error::InvalidArgument("nothing to compare".into()))?;
    let ids: Vec<&str> = first.rows.iter().map(|r| r.id.as_str()).collect();
    for (i, r) in reports.iter().enumerate().skip(1) {
        if r.dataset != first.dataset || r.rows.iter().map(|r| r.id.as_str()).ne(ids.iter().copied()) {
            return Err(Error::InvalidArgument(format!("report {i} covers a different dataset than report 0")));
        }
    }
    let aggs: Vec<_> = reports.iter().map(EvalReport::aggregates).collect();
    let mut metrics: Vec<(&str, Goal, Vec<Option<f64>>)> = vec![
        ("mean_gap", Goal::Lower, aggs.iter().map(|a| a.mean_gap).collect()),
        ("optimal_hits", Goal::Higher, aggs.iter().map(|a| a.optimal_hits.map(|h| h as f64)).collect()),
        ("mean_best", Goal::Lower, aggs.iter().map(|a| a.mean_best).collect()),
        ("mean_missed", Goal::Lower, aggs.iter().map(|a| a.mean_missed).collect()),
        ("mean_avg_rank", Goal::Lower, aggs.iter().map(|a| a.mean_avg_rank).collect()),
        ("failures", Goal::Lower, aggs.iter().map(|a| Some(a.failures as f64)).collect()),
    ];
    if reports.iter().all(|r| r.timing) {
        metrics.push(("mean_time_ms", Goal::Lower, aggs.iter().map(|a| a.mean_time_ms).collect()));
    }

    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
    let names: Vec<String> = (0..reports.len()).map(|i| format!("r{i}")).collect();
    let pair = reports.len() == 2;
    let mut out = String::new();
    writeln!(out, "# {COMPARE_VERSION}").unwrap();
    writeln!(out, "# dataset {}", first.dataset).unwrap();
    for (name, r) in names.iter().zip(reports) {
        writeln!(out, "# {name} {}", r.config).unwrap();
    }
    write!(out, "metric\t{}", names.join("\t")).unwrap();
    if pair {
        out.push_str("\tdelta");
    }
    out.push_str("\tbetter\n");
    for (metric, goal, values) in &metrics {
        write!(out, "{metric}").unwrap();
        for v in values {
            write!(out, "\t{}", opt(*v)).unwrap();
        }
        if pair {
            let delta = values[0].zip(values[1]).map(|(a, b)| b - a);
            write!(out, "\t{}", opt(delta)).unwrap();
        }
        let mark = if values.iter().filter(|v| v.is_some()).count() < 2 {
            "-".to_string()
        } else {
            better(values, *goal).map_or("tie".to_string(), |i| names[i].clone())
        };
        writeln!(out, "\t{mark}").unwrap();
    }
    writeln!(out, "## trace").unwrap();
    writeln!(out, "trial\t{}", names.join("\t")).unwrap();
    let series: Vec<Vec<f64>> = reports.iter().map(mean_trace).collect();
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    for j in 0..len {
        write!(out, "{}", j + 1).unwrap();
        for s in &series {
            let v = s.get(j).or(s.last());
            write!(out, "\t{}", opt(v.copied())).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn better_handles_ties_and_direction() {
        assert_eq!(better(&[Some(1.0), Some(2.0)], Goal::Lower), Some(0));
        assert_eq!(better(&[Some(1.0), Some(2.0)], Goal::Higher), Some(1));
        assert_eq!(better(&[Some(1.0), Some(1.0)], Goal::Lower), None);
        assert_eq!(better(&[Some(1.0), None], Goal::Lower), None);
        assert_eq!(better(&[Some(3.0), Some(1.0), Some(1.0)], Goal::Lower), None);
    }
}
