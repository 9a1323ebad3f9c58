//! Clustering quality against ground-truth behavior labels.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no items to evaluate")]
    Empty,
    #[error("{pred} predicted labels for {truth} ground-truth labels")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("ground-truth labels are missing")]
    MissingLabels,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn check<P, T>(pred: &[P], truth: &[T]) -> Result<(), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Maps arbitrary labels to dense indices in order of first appearance.
fn dense<L: Eq + Hash>(labels: &[L]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

fn contingency<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Vec<Vec<u64>> {
    let (p, np) = dense(pred);
    let (t, nt) = dense(truth);
    let mut table = vec![vec![0u64; nt]; np];
    for (i, j) in p.into_iter().zip(t) {
        table[i][j] += 1;
    }
    table
}

/// Fraction of items whose cluster's most frequent truth label is their own.
pub fn purity<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Result<f64, EvalError> {
    check(pred, truth)?;
    let correct: u64 = contingency(pred, truth)
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(correct as f64 / pred.len() as f64)
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand Index from the contingency table (Hubert-Arabie). Returns 0
/// when the maximum and expected index coincide, which happens only when both
/// partitions are the same trivial one (one cluster, or all singletons).
pub fn ari<P: Eq + Hash, T: Eq + Hash>(pred: &[P], truth: &[T]) -> Result<f64, EvalError> {
    check(pred, truth)?;
    let table = contingency(pred, truth);
    let index: f64 = table.iter().flatten().map(|&n| pairs(n)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..table[0].len())
        .map(|j| pairs(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = pairs(pred.len() as u64);
    if total == 0.0 {
        return Ok(0.0);
    }
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return Ok(0.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Most frequent label; ties go to the label occurring earliest.
pub fn majority_label<L: Eq + Hash>(labels: &[L]) -> Option<&L> {
    let mut counts: HashMap<&L, (usize, usize)> = HashMap::new();
    for (pos, l) in labels.iter().enumerate() {
        counts.entry(l).or_insert((0, pos)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(l, _)| l)
}

/// Frequency of the most common label over the interval length.
pub fn interval_uniformity<L: Eq + Hash>(labels: &[L]) -> Result<f64, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::MissingLabels);
    }
    let mut counts: HashMap<&L, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(max as f64 / labels.len() as f64)
}

/// Mean uniformity over a set of intervals, each given as its frame labels.
pub fn mean_uniformity<L: Eq + Hash>(intervals: &[&[L]]) -> Result<f64, EvalError> {
    if intervals.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut total = 0.0;
    for labels in intervals {
        total += interval_uniformity(labels)?;
    }
    Ok(total / intervals.len() as f64)
}

/// Per behavior, the number of distinct shots with at least one interval
/// whose majority label is that behavior. Input is `(shot_id, majority label)`.
pub fn count_intervals_per_behavior<S: AsRef<str>>(
    intervals: &[(u64, S)],
) -> BTreeMap<String, usize> {
    let mut shots: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    for (shot, label) in intervals {
        shots
            .entry(label.as_ref().to_owned())
            .or_default()
            .insert(*shot);
    }
    shots.into_iter().map(|(l, s)| (l, s.len())).collect()
}

/// One row of the metrics report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    pub purity: f64,
    pub ari: f64,
    pub num_intervals: usize,
    pub uniformity: f64,
}

pub const METRICS_HEADER: &str = "k,purity,ari,num_intervals,uniformity";

pub fn format_metrics(rows: &[MetricsRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.k, r.purity, r.ari, r.num_intervals, r.uniformity
        );
    }
    out
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>, EvalError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == METRICS_HEADER => {}
        _ => {
            return Err(EvalError::Parse {
                line: 1,
                message: format!("expected header {METRICS_HEADER:?}"),
            })
        }
    }
    lines
        .map(|(i, l)| {
            let err = |m: &str| EvalError::Parse {
                line: i + 1,
                message: m.to_owned(),
            };
            let f: Vec<&str> = l.trim().split(',').collect();
            if f.len() != 5 {
                return Err(err("expected 5 columns"));
            }
            Ok(MetricsRow {
                k: f[0].parse().map_err(|_| err("invalid k"))?,
                purity: f[1].parse().map_err(|_| err("invalid purity"))?,
                ari: f[2].parse().map_err(|_| err("invalid ari"))?,
                num_intervals: f[3].parse().map_err(|_| err("invalid num_intervals"))?,
                uniformity: f[4].parse().map_err(|_| err("invalid uniformity"))?,
            })
        })
        .collect()
}
