//! Interval dissimilarities from histogram intersection and complete-linkage
//! agglomerative clustering.

use std::fmt::Write as _;

use thiserror::Error;

use crate::codebook::BowHistogram;

/// Maximum tolerated asymmetry `|d(i, j) - d(j, i)|` of an input matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("histogram is flagged empty")]
    EmptyHistogram,
    #[error("histograms have {0} and {1} bins")]
    LengthMismatch(usize, usize),
    #[error("channel mismatch: expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("channel {0:?} has zero average dissimilarity")]
    ZeroVarianceChannel(String),
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("distance matrix has a non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("cannot cut {leaves} leaves into {k} clusters")]
    InvalidK { k: usize, leaves: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn histogram_intersection(a: &BowHistogram, b: &BowHistogram) -> Result<f64, ClusterError> {
    if a.empty || b.empty {
        return Err(ClusterError::EmptyHistogram);
    }
    if a.len() != b.len() {
        return Err(ClusterError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| x.min(*y))
        .sum())
}

/// `-exp(-(1 - HI(b_u, b_v)))`, in `[-1, -1/e]`.
pub fn interval_distance(b_u: &BowHistogram, b_v: &BowHistogram) -> Result<f64, ClusterError> {
    Ok(-(-(1.0 - histogram_intersection(b_u, b_v)?)).exp())
}

/// Channel names with the average `1 - HI` of each channel over all interval pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceConfig {
    pub channels: Vec<String>,
    pub channel_norms: Vec<f64>,
}

impl DistanceConfig {
    pub fn new(channels: Vec<String>, channel_norms: Vec<f64>) -> Result<Self, ClusterError> {
        if channels.len() != channel_norms.len() {
            return Err(ClusterError::ChannelMismatch {
                expected: channels.len(),
                got: channel_norms.len(),
            });
        }
        if let Some(i) = channel_norms.iter().position(|a| !(*a > 0.0)) {
            return Err(ClusterError::ZeroVarianceChannel(channels[i].clone()));
        }
        Ok(Self {
            channels,
            channel_norms,
        })
    }

    /// Computes each channel's normalizer over every unordered pair of
    /// intervals. `intervals[u][c]` is interval `u`'s histogram for channel `c`.
    pub fn fit(
        channels: Vec<String>,
        intervals: &[Vec<BowHistogram>],
    ) -> Result<Self, ClusterError> {
        let c = channels.len();
        let mut sums = vec![0.0; c];
        let mut pairs = 0usize;
        for (u, hu) in intervals.iter().enumerate() {
            if hu.len() != c {
                return Err(ClusterError::ChannelMismatch {
                    expected: c,
                    got: hu.len(),
                });
            }
            for hv in &intervals[u + 1..] {
                if hv.len() != c {
                    return Err(ClusterError::ChannelMismatch {
                        expected: c,
                        got: hv.len(),
                    });
                }
                for ch in 0..c {
                    sums[ch] += 1.0 - histogram_intersection(&hu[ch], &hv[ch])?;
                }
                pairs += 1;
            }
        }
        let norms = sums
            .into_iter()
            .map(|s| if pairs > 0 { s / pairs as f64 } else { 0.0 })
            .collect();
        Self::new(channels, norms)
    }
}

/// `-exp(-sum_i (1 - HI_i) / A_i)` over the configured channels.
pub fn multichannel_distance(
    channels_u: &[BowHistogram],
    channels_v: &[BowHistogram],
    cfg: &DistanceConfig,
) -> Result<f64, ClusterError> {
    let c = cfg.channels.len();
    for got in [channels_u.len(), channels_v.len()] {
        if got != c {
            return Err(ClusterError::ChannelMismatch { expected: c, got });
        }
    }
    let mut total = 0.0;
    for ((hu, hv), a) in channels_u.iter().zip(channels_v).zip(&cfg.channel_norms) {
        total += (1.0 - histogram_intersection(hu, hv)?) / a;
    }
    Ok(-(-total).exp())
}

/// Dense symmetric dissimilarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Fills the upper triangle from `f(i, j)` (`i < j`) and mirrors it.
    pub fn from_fn<E>(
        n: usize,
        mut f: impl FnMut(usize, usize) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j)?;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(Self { n, data })
    }

    /// Row-major `n x n` entries; rejected when asymmetric or non-finite.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ClusterError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(ClusterError::LengthMismatch(n, row.len()));
            }
            data.extend_from_slice(row);
        }
        let m = Self { n, data };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if !a.is_finite() || !b.is_finite() {
                    return Err(ClusterError::NonFinite(i, j));
                }
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(ClusterError::NotSymmetric(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&d| f(d)).collect(),
        }
    }
}

/// One agglomeration step. Leaves are nodes `0..n`; the node created by
/// step `s` is `n + s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_count: usize,
}

impl Dendrogram {
    /// Cluster id per leaf after applying the first `leaf_count - k` merges.
    /// Ids are numbered in order of each cluster's lowest leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        let n = self.leaf_count;
        if k == 0 || k > n {
            return Err(ClusterError::InvalidK { k, leaves: n });
        }
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            let node = n + s;
            let ra = find(&mut parent, m.a);
            let rb = find(&mut parent, m.b);
            parent[ra] = node;
            parent[rb] = node;
        }
        let mut ids = vec![usize::MAX; 2 * n];
        let mut next = 0;
        Ok((0..n)
            .map(|leaf| {
                let root = find(&mut parent, leaf);
                if ids[root] == usize::MAX {
                    ids[root] = next;
                    next += 1;
                }
                ids[root]
            })
            .collect())
    }

    /// Heights are non-decreasing in merge order.
    pub fn is_monotone(&self) -> bool {
        self.merges.windows(2).all(|w| w[0].height <= w[1].height)
    }
}

/// Complete-linkage agglomeration. Each step merges the pair of clusters with
/// the smallest maximum pairwise distance. A cluster is indexed by its lowest
/// leaf; ties go to the lexicographically smallest index pair.
pub fn linkage(matrix: &DistanceMatrix) -> Result<Dendrogram, ClusterError> {
    matrix.validate()?;
    let n = matrix.len();
    // upper triangle holds the current cluster-to-cluster distances
    let mut d = matrix.data.clone();
    let mut active = vec![true; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut row_min = vec![(f64::INFINITY, usize::MAX); n];

    let scan = |d: &[f64], active: &[bool], i: usize| {
        let mut best = (f64::INFINITY, usize::MAX);
        for l in i + 1..n {
            if active[l] && d[i * n + l] < best.0 {
                best = (d[i * n + l], l);
            }
        }
        best
    };
    for i in 0..n {
        row_min[i] = scan(&d, &active, i);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for i in 0..n {
            if active[i] && row_min[i].1 != usize::MAX && row_min[i].0 < best.0 {
                best = (row_min[i].0, i, row_min[i].1);
            }
        }
        let (height, i, j) = best;
        merges.push(Merge {
            a: node[i],
            b: node[j],
            height,
        });
        node[i] = n + step;
        active[j] = false;

        for l in 0..n {
            if !active[l] || l == i {
                continue;
            }
            let dil = if l < i { d[l * n + i] } else { d[i * n + l] };
            let djl = if l < j { d[l * n + j] } else { d[j * n + l] };
            let merged = dil.max(djl);
            if l < i {
                d[l * n + i] = merged;
            } else {
                d[i * n + l] = merged;
            }
        }
        row_min[i] = scan(&d, &active, i);
        for r in 0..j {
            if !active[r] || r == i {
                continue;
            }
            let (val, arg) = row_min[r];
            if arg == i || arg == j {
                row_min[r] = scan(&d, &active, r);
            } else if r < i {
                let dri = d[r * n + i];
                if dri < val || (dri == val && i < arg) {
                    row_min[r] = (dri, i);
                }
            }
        }
    }
    Ok(Dendrogram {
        merges,
        leaf_count: n,
    })
}

/// Complete-linkage clustering cut at `k` clusters.
pub fn hierarchical_cluster(
    matrix: &DistanceMatrix,
    k: usize,
) -> Result<(Vec<usize>, Dendrogram), ClusterError> {
    if k == 0 || k > matrix.len() {
        return Err(ClusterError::InvalidK {
            k,
            leaves: matrix.len(),
        });
    }
    let dendrogram = linkage(matrix)?;
    Ok((dendrogram.cut(k)?, dendrogram))
}

/// `merge <a> <b> <height>` per step.
pub fn format_dendrogram(d: &Dendrogram) -> String {
    let mut out = String::new();
    for m in &d.merges {
        let _ = writeln!(out, "merge {} {} {}", m.a, m.b, m.height);
    }
    out
}

/// `cluster <interval_index> <cluster_id>` per leaf.
pub fn format_assignment(interval_indices: &[usize], assignment: &[usize]) -> String {
    let mut out = String::new();
    for (i, c) in interval_indices.iter().zip(assignment) {
        let _ = writeln!(out, "cluster {i} {c}");
    }
    out
}

/// Contents of a cluster file: the dendrogram over clustered intervals, the
/// intervals left out for having no descriptors, and one assignment per cut.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFile {
    pub dendrogram: Dendrogram,
    /// Interval index of each dendrogram leaf.
    pub leaves: Vec<usize>,
    pub unclustered: Vec<usize>,
    /// `(k, cluster id per leaf)`.
    pub cuts: Vec<(usize, Vec<usize>)>,
}

impl ClusterFile {
    pub fn format(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "leaves");
        for l in &self.leaves {
            let _ = write!(out, " {l}");
        }
        out.push('\n');
        for u in &self.unclustered {
            let _ = writeln!(out, "unclustered {u}");
        }
        out.push_str(&format_dendrogram(&self.dendrogram));
        for (k, assignment) in &self.cuts {
            let _ = writeln!(out, "cut {k}");
            out.push_str(&format_assignment(&self.leaves, assignment));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ClusterError> {
        let mut leaves = None;
        let mut unclustered = Vec::new();
        let mut merges = Vec::new();
        let mut cuts: Vec<(usize, Vec<usize>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: &str| ClusterError::Parse {
                line,
                message: message.to_owned(),
            };
            let f: Vec<&str> = raw.split_ascii_whitespace().collect();
            let Some((&tag, rest)) = f.split_first() else {
                continue;
            };
            let ints = |s: &[&str]| -> Result<Vec<usize>, ClusterError> {
                s.iter()
                    .map(|v| v.parse().map_err(|_| err("invalid integer")))
                    .collect()
            };
            match (tag, rest.len()) {
                ("leaves", _) => leaves = Some(ints(rest)?),
                ("unclustered", 1) => unclustered.push(ints(rest)?[0]),
                ("merge", 3) => {
                    let ab = ints(&rest[..2])?;
                    let height = rest[2].parse().map_err(|_| err("invalid height"))?;
                    merges.push(Merge {
                        a: ab[0],
                        b: ab[1],
                        height,
                    });
                }
                ("cut", 1) => cuts.push((ints(rest)?[0], Vec::new())),
                ("cluster", 2) => {
                    let v = ints(rest)?;
                    let (_, assignment) = cuts
                        .last_mut()
                        .ok_or_else(|| err("cluster line before cut"))?;
                    assignment.push(v[1]);
                }
                _ => return Err(err("unrecognized record")),
            }
        }
        let leaves = leaves.ok_or(ClusterError::Parse {
            line: 1,
            message: "missing leaves line".into(),
        })?;
        Ok(Self {
            dendrogram: Dendrogram {
                merges,
                leaf_count: leaves.len(),
            },
            leaves,
            unclustered,
            cuts,
        })
    }
}
