//! k-means codebooks over descriptors and L1-normalized bag-of-words histograms.
//!
//! Training runs Lloyd's algorithm from several random initializations and
//! keeps the run with the lowest energy (within-cluster sum of squared
//! Euclidean distances). Assignment steps skip points using Hamerly's
//! distance bounds; a point is only skipped when its current centroid is
//! provably strictly closer than every other one, so the assignments match
//! a plain exhaustive Lloyd iteration.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodebookError {
    #[error("sample of {samples} descriptors is smaller than K = {k}; choose K <= {samples}")]
    TooFewSamples { samples: usize, k: usize },
    #[error("descriptor has {got} components, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid k-means config: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// K distinct input points chosen uniformly at random.
    #[default]
    Random,
    /// k-means++ seeding.
    KMeansPlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub init: Init,
    /// Standardize each descriptor component to zero mean, unit variance.
    pub standardize: bool,
    /// Training descriptors are subsampled without replacement beyond this count.
    pub sample_cap: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 800,
            restarts: 8,
            max_iters: 100,
            seed: 0,
            init: Init::Random,
            standardize: false,
            sample_cap: 1_000_000,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<(), CodebookError> {
        if self.k == 0 {
            return Err(CodebookError::Config("k must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(CodebookError::Config("restarts must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(CodebookError::Config("max_iters must be >= 1".into()));
        }
        if self.sample_cap < self.k {
            return Err(CodebookError::Config("sample_cap must be >= k".into()));
        }
        Ok(())
    }
}

/// Per-component affine map applied to descriptors before quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    fn fit(data: &[f64], dim: usize) -> Self {
        let n = (data.len() / dim) as f64;
        let mut mean = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in data.chunks_exact(dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) * s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<f64>,
    dim: usize,
    pub energy: f64,
    pub seed: u64,
    pub standardization: Option<Standardization>,
}

impl Codebook {
    pub fn new(
        centroids: Vec<Vec<f64>>,
        energy: f64,
        seed: u64,
        standardization: Option<Standardization>,
    ) -> Result<Self, CodebookError> {
        let dim = centroids.first().map_or(0, Vec::len);
        if centroids.is_empty() || dim == 0 {
            return Err(CodebookError::Config(
                "codebook needs at least one centroid".into(),
            ));
        }
        if let Some(bad) = centroids.iter().find(|c| c.len() != dim) {
            return Err(CodebookError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if let Some(s) = &standardization {
            if s.mean.len() != dim || s.scale.len() != dim {
                return Err(CodebookError::DimensionMismatch {
                    expected: dim,
                    got: s.mean.len().min(s.scale.len()),
                });
            }
        }
        Ok(Self {
            centroids: centroids.concat(),
            dim,
            energy,
            seed,
            standardization,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centroids(&self) -> impl Iterator<Item = &[f64]> {
        self.centroids.chunks_exact(self.dim)
    }
}

/// Diagnostics of one k-means restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub restart: usize,
    /// Energy after every centroid update, then the energy of the final assignment.
    pub energy_trace: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest and second-nearest centroid by squared distance; ties go to the lower index.
fn nearest_two(x: &[f64], centroids: &[f64], dim: usize) -> (usize, f64, f64) {
    let mut best = (0, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            second = best.1;
            best = (j, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}

fn nearest(x: &[f64], centroids: &[f64], dim: usize) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

// Relative slack on bound comparisons, absorbing rounding in the triangle
// inequality so a skipped point is never a near-tie.
const BOUND_SLACK: f64 = 1e-9;

struct Lloyd<'a> {
    data: &'a [f64],
    dim: usize,
    k: usize,
}

impl Lloyd<'_> {
    fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn init(&self, rng: &mut ChaCha8Rng, init: Init) -> Vec<f64> {
        let n = self.n();
        match init {
            Init::Random => index::sample(rng, n, self.k)
                .into_iter()
                .flat_map(|i| self.point(i).to_vec())
                .collect(),
            Init::KMeansPlusPlus => {
                let mut centroids = self.point(rng.random_range(0..n)).to_vec();
                let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(self.point(i), &centroids)).collect();
                while centroids.len() < self.k * self.dim {
                    let total: f64 = d2.iter().sum();
                    let pick = if total > 0.0 {
                        let mut r = rng.random::<f64>() * total;
                        let mut pick = n - 1;
                        for (i, &w) in d2.iter().enumerate() {
                            if r < w {
                                pick = i;
                                break;
                            }
                            r -= w;
                        }
                        pick
                    } else {
                        rng.random_range(0..n)
                    };
                    let c = self.point(pick).to_vec();
                    for (i, d) in d2.iter_mut().enumerate() {
                        *d = d.min(sq_dist(self.point(i), &c));
                    }
                    centroids.extend(c);
                }
                centroids
            }
        }
    }

    fn centroid<'c>(&self, centroids: &'c [f64], j: usize) -> &'c [f64] {
        &centroids[j * self.dim..(j + 1) * self.dim]
    }

    fn energy(&self, centroids: &[f64], assign: &[usize]) -> f64 {
        (0..self.n())
            .map(|i| sq_dist(self.point(i), self.centroid(centroids, assign[i])))
            .sum()
    }

    /// Moves every centroid to the mean of its points; empty clusters are
    /// re-seeded at the points farthest from their centroids.
    fn update(&self, assign: &[usize], centroids: &mut [f64]) {
        let (dim, k) = (self.dim, self.k);
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(self.point(i)) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for (c, s) in centroids[j * dim..(j + 1) * dim]
                    .iter_mut()
                    .zip(&sums[j * dim..(j + 1) * dim])
                {
                    *c = s * inv;
                }
            }
        }
        let empty: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        if !empty.is_empty() {
            let mut far: Vec<(f64, usize)> = (0..self.n())
                .map(|i| {
                    (
                        sq_dist(self.point(i), self.centroid(centroids, assign[i])),
                        i,
                    )
                })
                .collect();
            far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for (&j, &(_, i)) in empty.iter().zip(&far) {
                centroids[j * dim..(j + 1) * dim].copy_from_slice(self.point(i));
            }
        }
    }

    fn run(&self, restart: usize, centroids: Vec<f64>, max_iters: usize) -> (Vec<f64>, KMeansRun) {
        let grouped = self.n() * self.k.div_ceil(CENTROIDS_PER_GROUP) <= MAX_GROUP_BOUNDS;
        self.run_with(restart, centroids, max_iters, grouped)
    }

    fn run_with(
        &self,
        restart: usize,
        mut centroids: Vec<f64>,
        max_iters: usize,
        grouped: bool,
    ) -> (Vec<f64>, KMeansRun) {
        let mut bounds = if grouped {
            Bounds::yinyang(self, &centroids)
        } else {
            Bounds::hamerly(self, &centroids)
        };
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iters {
            iterations += 1;
            let old = centroids.clone();
            self.update(bounds.assign(), &mut centroids);
            push_energy(&mut trace, self.energy(&centroids, bounds.assign()));
            let drift: Vec<f64> = (0..self.k)
                .map(|j| sq_dist(self.centroid(&old, j), self.centroid(&centroids, j)).sqrt())
                .collect();
            if bounds.reassign(self, &centroids, &drift) == 0 {
                converged = true;
                break;
            }
        }
        let energy = self.energy(&centroids, bounds.assign());
        if !converged {
            push_energy(&mut trace, energy);
        }
        (
            centroids,
            KMeansRun {
                restart,
                energy_trace: trace,
                energy,
                iterations,
                converged,
            },
        )
    }
}

/// Appends to an energy trace, asserting it never increases beyond rounding.
fn push_energy(trace: &mut Vec<f64>, energy: f64) {
    if let Some(&last) = trace.last() {
        assert!(
            energy <= last * (1.0 + 1e-9) + 1e-12,
            "k-means energy increased from {last} to {energy}"
        );
    }
    trace.push(energy);
}

const CENTROIDS_PER_GROUP: usize = 10;

/// Group bounds (points times groups) above which Hamerly's single bound is used.
const MAX_GROUP_BOUNDS: usize = 1 << 25;

/// Largest `f32` not above `d`, so rounding never breaks a lower bound.
fn f32_below(d: f64) -> f32 {
    let v = d as f32;
    if f64::from(v) > d {
        v.next_down()
    } else {
        v
    }
}

/// Partitions the initial centroids into groups by a few Lloyd steps over
/// the centroids themselves.
fn centroid_groups(centroids: &[f64], dim: usize) -> Vec<Vec<usize>> {
    let k = centroids.len() / dim;
    let t = k.div_ceil(CENTROIDS_PER_GROUP);
    let mut means = centroids[..t * dim].to_vec();
    let mut label = vec![0usize; k];
    for _ in 0..5 {
        for (j, c) in centroids.chunks_exact(dim).enumerate() {
            label[j] = nearest(c, &means, dim);
        }
        let mut sums = vec![0.0; t * dim];
        let mut counts = vec![0usize; t];
        for (j, c) in centroids.chunks_exact(dim).enumerate() {
            counts[label[j]] += 1;
            for (s, x) in sums[label[j] * dim..(label[j] + 1) * dim].iter_mut().zip(c) {
                *s += x;
            }
        }
        for g in 0..t {
            if counts[g] > 0 {
                for (m, s) in means[g * dim..(g + 1) * dim]
                    .iter_mut()
                    .zip(&sums[g * dim..(g + 1) * dim])
                {
                    *m = s / counts[g] as f64;
                }
            }
        }
    }
    let mut groups = vec![Vec::new(); t];
    for (j, &g) in label.iter().enumerate() {
        groups[g].push(j);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

/// Current assignment with distance bounds: `upper[i]` bounds the distance
/// to the assigned centroid from above, `lower` bounds the others from below.
enum Bounds {
    Hamerly {
        assign: Vec<usize>,
        upper: Vec<f64>,
        /// Distance to the second-closest centroid.
        lower: Vec<f64>,
    },
    Yinyang {
        assign: Vec<usize>,
        upper: Vec<f64>,
        /// `lower[i * groups.len() + g]` bounds the distance to every
        /// centroid of group `g` other than the assigned one.
        lower: Vec<f32>,
        groups: Vec<Vec<usize>>,
        group_of: Vec<usize>,
    },
}

impl Bounds {
    fn hamerly(l: &Lloyd<'_>, centroids: &[f64]) -> Self {
        let (assign, (upper, lower)): (Vec<usize>, (Vec<f64>, Vec<f64>)) = (0..l.n())
            .into_par_iter()
            .map(|i| {
                let (j, d1, d2) = nearest_two(l.point(i), centroids, l.dim);
                (j, (d1.sqrt(), d2.sqrt()))
            })
            .unzip();
        Bounds::Hamerly {
            assign,
            upper,
            lower,
        }
    }

    fn yinyang(l: &Lloyd<'_>, centroids: &[f64]) -> Self {
        let groups = centroid_groups(centroids, l.dim);
        let mut group_of = vec![0usize; l.k];
        for (g, members) in groups.iter().enumerate() {
            for &j in members {
                group_of[j] = g;
            }
        }
        let t = groups.len();
        let mut assign = vec![0usize; l.n()];
        let mut upper = vec![0.0f64; l.n()];
        let mut lower = vec![0.0f32; l.n() * t];
        assign
            .par_iter_mut()
            .zip(upper.par_iter_mut())
            .zip(lower.par_chunks_mut(t))
            .enumerate()
            .for_each(|(i, ((a, u), lb))| {
                let x = l.point(i);
                let dist: Vec<f64> = centroids
                    .chunks_exact(l.dim)
                    .map(|c| sq_dist(x, c).sqrt())
                    .collect();
                let mut best = 0;
                for (j, &d) in dist.iter().enumerate() {
                    if d < dist[best] {
                        best = j;
                    }
                }
                (*a, *u) = (best, dist[best]);
                for (b, members) in lb.iter_mut().zip(&groups) {
                    let m = members
                        .iter()
                        .filter(|&&j| j != best)
                        .map(|&j| dist[j])
                        .fold(f64::INFINITY, f64::min);
                    *b = f32_below(m);
                }
            });
        Bounds::Yinyang {
            assign,
            upper,
            lower,
            groups,
            group_of,
        }
    }

    fn assign(&self) -> &[usize] {
        match self {
            Bounds::Hamerly { assign, .. } | Bounds::Yinyang { assign, .. } => assign,
        }
    }

    /// Loosens the bounds by the centroid drift, then reassigns every point
    /// whose bounds do not rule out a closer centroid. Returns the number of
    /// points that changed cluster.
    fn reassign(&mut self, l: &Lloyd<'_>, centroids: &[f64], drift: &[f64]) -> usize {
        let dim = l.dim;
        match self {
            Bounds::Hamerly {
                assign,
                upper,
                lower,
            } => {
                let k = l.k;
                // half the distance from each centroid to its nearest other one
                let nearest_other: Vec<f64> = (0..k)
                    .into_par_iter()
                    .map(|j| {
                        let cj = l.centroid(centroids, j);
                        (0..k)
                            .filter(|&m| m != j)
                            .map(|m| sq_dist(cj, l.centroid(centroids, m)))
                            .fold(f64::INFINITY, f64::min)
                            .sqrt()
                            * 0.5
                    })
                    .collect();
                let (mut max1, mut arg1, mut max2) = (0.0f64, usize::MAX, 0.0f64);
                for (j, &d) in drift.iter().enumerate() {
                    if d > max1 {
                        max2 = max1;
                        max1 = d;
                        arg1 = j;
                    } else if d > max2 {
                        max2 = d;
                    }
                }
                assign
                    .par_iter_mut()
                    .zip(upper.par_iter_mut())
                    .zip(lower.par_iter_mut())
                    .enumerate()
                    .map(|(i, ((a, u), lb))| {
                        *u += drift[*a];
                        *lb -= if *a == arg1 { max2 } else { max1 };
                        let bound = nearest_other[*a].max(*lb);
                        if *u * (1.0 + BOUND_SLACK) < bound {
                            return 0;
                        }
                        let x = l.point(i);
                        *u = sq_dist(x, l.centroid(centroids, *a)).sqrt();
                        if *u * (1.0 + BOUND_SLACK) < bound {
                            return 0;
                        }
                        let (j, d1, d2) = nearest_two(x, centroids, dim);
                        *u = d1.sqrt();
                        *lb = d2.sqrt();
                        usize::from(std::mem::replace(a, j) != j)
                    })
                    .sum()
            }
            Bounds::Yinyang {
                assign,
                upper,
                lower,
                groups,
                group_of,
            } => {
                let t = groups.len();
                let group_drift: Vec<f64> = groups
                    .iter()
                    .map(|m| m.iter().map(|&j| drift[j]).fold(0.0, f64::max))
                    .collect();
                let (groups, group_of) = (&*groups, &*group_of);
                assign
                    .par_iter_mut()
                    .zip(upper.par_iter_mut())
                    .zip(lower.par_chunks_mut(t))
                    .enumerate()
                    .map_init(
                        || (Vec::with_capacity(t), Vec::with_capacity(t)),
                        |(old, fresh), (i, ((a, u), lb))| {
                            old.clear();
                            old.extend(lb.iter().map(|&b| f64::from(b)));
                            fresh.clear();
                            fresh.extend(old.iter().zip(&group_drift).map(|(b, d)| b - d));
                            *u += drift[*a];
                            let global = fresh.iter().copied().fold(f64::INFINITY, f64::min);
                            let before = *a;
                            let skip = |u: f64, bound: f64| u * (1.0 + BOUND_SLACK) < bound;
                            if !skip(*u, global) {
                                let x = l.point(i);
                                *u = sq_dist(x, l.centroid(centroids, before)).sqrt();
                                if !skip(*u, global) {
                                    let displaced =
                                        |best: usize,
                                         d: f64,
                                         fresh: &mut [f64],
                                         scan: &mut f64,
                                         g: usize| {
                                            if group_of[best] == g {
                                                *scan = scan.min(d);
                                            } else {
                                                fresh[group_of[best]] =
                                                    fresh[group_of[best]].min(d);
                                            }
                                        };
                                    let mut best = (before, *u);
                                    for (g, members) in groups.iter().enumerate() {
                                        if skip(best.1, fresh[g]) {
                                            continue;
                                        }
                                        let mut scan = f64::INFINITY;
                                        for &j in members {
                                            if j == before {
                                                if best.0 != before {
                                                    scan = scan.min(*u);
                                                }
                                                continue;
                                            }
                                            let bound = old[g] - drift[j];
                                            if skip(best.1, bound) {
                                                scan = scan.min(bound);
                                                continue;
                                            }
                                            let d = sq_dist(x, l.centroid(centroids, j)).sqrt();
                                            if d < best.1 || (d == best.1 && j < best.0) {
                                                displaced(best.0, best.1, fresh, &mut scan, g);
                                                best = (j, d);
                                            } else {
                                                scan = scan.min(d);
                                            }
                                        }
                                        fresh[g] = scan;
                                    }
                                    (*a, *u) = best;
                                }
                            }
                            for (b, f) in lb.iter_mut().zip(fresh.iter()) {
                                *b = f32_below(*f);
                            }
                            usize::from(*a != before)
                        },
                    )
                    .sum()
            }
        }
    }
}

fn check_dims(descriptors: &[&[f64]]) -> Result<usize, CodebookError> {
    let dim = descriptors.first().map_or(0, |d| d.len());
    if let Some(bad) = descriptors.iter().find(|d| d.len() != dim) {
        return Err(CodebookError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if dim == 0 && !descriptors.is_empty() {
        return Err(CodebookError::Config(
            "descriptors have no components".into(),
        ));
    }
    Ok(dim)
}

/// Trains a codebook and returns the diagnostics of every restart.
pub fn build_codebook_with_runs(
    descriptors: &[&[f64]],
    cfg: &KMeansConfig,
) -> Result<(Codebook, Vec<KMeansRun>), CodebookError> {
    cfg.validate()?;
    let dim = check_dims(descriptors)?;
    if descriptors.len() < cfg.k {
        return Err(CodebookError::TooFewSamples {
            samples: descriptors.len(),
            k: cfg.k,
        });
    }

    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_rng.set_stream(u64::MAX);
    let mut data: Vec<f64> = if descriptors.len() > cfg.sample_cap {
        let mut picked =
            index::sample(&mut sample_rng, descriptors.len(), cfg.sample_cap).into_vec();
        picked.sort_unstable();
        picked
            .into_iter()
            .flat_map(|i| descriptors[i].iter().copied())
            .collect()
    } else {
        descriptors.concat()
    };
    let standardization = cfg.standardize.then(|| Standardization::fit(&data, dim));
    if let Some(s) = &standardization {
        data = data
            .chunks_exact(dim)
            .flat_map(|row| s.apply(row))
            .collect();
    }

    let lloyd = Lloyd {
        data: &data,
        dim,
        k: cfg.k,
    };
    let mut runs: Vec<(Vec<f64>, KMeansRun)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let init = lloyd.init(&mut rng, cfg.init);
            lloyd.run(r, init, cfg.max_iters)
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.energy.total_cmp(&b.1 .1.energy).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let diagnostics = runs.iter().map(|(_, r)| r.clone()).collect();
    let (centroids, run) = runs.swap_remove(best);
    let codebook = Codebook {
        centroids,
        dim,
        energy: run.energy,
        seed: cfg.seed,
        standardization,
    };
    Ok((codebook, diagnostics))
}

pub fn build_codebook(
    descriptors: &[&[f64]],
    cfg: &KMeansConfig,
) -> Result<Codebook, CodebookError> {
    build_codebook_with_runs(descriptors, cfg).map(|(c, _)| c)
}

/// Index of the nearest centroid (Euclidean); ties go to the lowest index.
pub fn quantize(descriptor: &[f64], codebook: &Codebook) -> Result<usize, CodebookError> {
    if descriptor.len() != codebook.dim {
        return Err(CodebookError::DimensionMismatch {
            expected: codebook.dim,
            got: descriptor.len(),
        });
    }
    Ok(match &codebook.standardization {
        Some(s) => nearest(&s.apply(descriptor), &codebook.centroids, codebook.dim),
        None => nearest(descriptor, &codebook.centroids, codebook.dim),
    })
}

/// L1-normalized codeword histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct BowHistogram {
    pub weights: Vec<f64>,
    /// Set when built from no codewords; the weights are then all zero.
    pub empty: bool,
}

impl BowHistogram {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

pub fn bow(codewords: &[usize], k: usize) -> BowHistogram {
    let mut weights = vec![0.0; k];
    for &c in codewords {
        weights[c] += 1.0;
    }
    if codewords.is_empty() {
        return BowHistogram {
            weights,
            empty: true,
        };
    }
    let total = codewords.len() as f64;
    weights.iter_mut().for_each(|w| *w /= total);
    BowHistogram {
        weights,
        empty: false,
    }
}

/// `codebook <K> <dim> <seed> <energy>`, optional `mean ...` / `scale ...`
/// lines when descriptors are standardized, then one centroid per line.
pub fn format_codebook(cb: &Codebook) -> String {
    let mut out = format!("codebook {} {} {} {}\n", cb.k(), cb.dim, cb.seed, cb.energy);
    let row = |out: &mut String, tag: &str, values: &[f64]| {
        out.push_str(tag);
        for (i, v) in values.iter().enumerate() {
            if i > 0 || !tag.is_empty() {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    };
    if let Some(s) = &cb.standardization {
        row(&mut out, "mean", &s.mean);
        row(&mut out, "scale", &s.scale);
    }
    for c in cb.centroids() {
        row(&mut out, "", c);
    }
    out
}

pub fn parse_codebook(text: &str) -> Result<Codebook, CodebookError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let perr = |line: usize, message: String| CodebookError::Parse { line, message };
    let (hline, header) = lines
        .next()
        .ok_or_else(|| perr(1, "missing codebook header".into()))?;
    let h: Vec<&str> = header.split_ascii_whitespace().collect();
    if h.len() != 5 || h[0] != "codebook" {
        return Err(perr(
            hline,
            "expected `codebook <K> <dim> <seed> <energy>`".into(),
        ));
    }
    let k: usize = h[1].parse().map_err(|_| perr(hline, "invalid K".into()))?;
    let dim: usize = h[2]
        .parse()
        .map_err(|_| perr(hline, "invalid dim".into()))?;
    let seed: u64 = h[3]
        .parse()
        .map_err(|_| perr(hline, "invalid seed".into()))?;
    let energy: f64 = h[4]
        .parse()
        .map_err(|_| perr(hline, "invalid energy".into()))?;

    let parse_row = |line: usize, s: &str| -> Result<Vec<f64>, CodebookError> {
        let row = s
            .split_ascii_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| perr(line, format!("invalid number {v:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != dim {
            return Err(perr(
                line,
                format!("{} components, expected {dim}", row.len()),
            ));
        }
        Ok(row)
    };

    let mut mean = None;
    let mut scale = None;
    let mut centroids = Vec::with_capacity(k);
    for (line, l) in lines {
        if let Some(rest) = l.strip_prefix("mean ") {
            mean = Some(parse_row(line, rest)?);
        } else if let Some(rest) = l.strip_prefix("scale ") {
            scale = Some(parse_row(line, rest)?);
        } else {
            centroids.push(parse_row(line, l)?);
        }
    }
    if centroids.len() != k {
        return Err(perr(
            hline,
            format!("{} centroids, header says {k}", centroids.len()),
        ));
    }
    let standardization = match (mean, scale) {
        (Some(mean), Some(scale)) => Some(Standardization { mean, scale }),
        (None, None) => None,
        _ => {
            return Err(perr(
                hline,
                "standardization needs both mean and scale".into(),
            ))
        }
    };
    Codebook::new(centroids, energy, seed, standardization)
}
