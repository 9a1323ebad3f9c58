//! Temporal partitioning of shots into single-pattern intervals.
//!
//! Shots are first split at pauses (runs of frames without articulated
//! motion). Within each piece, periodic sub-intervals are found from the
//! per-frame codeword sequence: every codeword's occurrence series is
//! transformed, magnitude spectra are summed over codewords and normalized to
//! unit non-DC energy, and a window qualifies when its highest admissible bin
//! holds at least `theta_h` of that energy. Periodic windows are peeled off
//! and the remainders searched again until nothing qualifies.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FrameMotionStats;

/// Pauses shorter than this many frames are ignored.
pub const MIN_PAUSE: usize = 3;
/// Remainders shorter than this are merged into a neighbour.
pub const MIN_REMAINDER: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    WholeShot,
    PauseSplit,
    Periodic,
    Remainder,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::WholeShot => "whole-shot",
            Origin::PauseSplit => "pause-split",
            Origin::Periodic => "periodic",
            Origin::Remainder => "remainder",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Origin::WholeShot,
            Origin::PauseSplit,
            Origin::Periodic,
            Origin::Remainder,
        ]
        .into_iter()
        .find(|o| o.name() == s)
        .ok_or_else(|| format!("unknown interval origin {s:?}"))
    }
}

/// Frames `start..end` of a shot.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub shot_id: u64,
    pub start: usize,
    pub end: usize,
    pub origin: Origin,
    /// Detected period in frames, for periodic intervals.
    pub period: Option<f64>,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicityConfig {
    pub theta_h: f64,
    pub min_period: usize,
    pub min_cycles: usize,
    /// Largest chance probability of a window's peak under white noise;
    /// 1 disables the test.
    pub significance: f64,
}

impl Default for PeriodicityConfig {
    fn default() -> Self {
        Self {
            theta_h: 0.1,
            min_period: 5,
            min_cycles: 3,
            significance: 1e-5,
        }
    }
}

impl PeriodicityConfig {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if !(self.theta_h > 0.0) {
            return Err(PartitionError::Config(format!(
                "theta_h must be > 0, got {}",
                self.theta_h
            )));
        }
        if self.min_period < 2 {
            return Err(PartitionError::Config("min_period must be >= 2".into()));
        }
        if self.min_cycles < 1 {
            return Err(PartitionError::Config("min_cycles must be >= 1".into()));
        }
        if !(self.significance > 0.0 && self.significance <= 1.0) {
            return Err(PartitionError::Config(format!(
                "significance must be in (0, 1], got {}",
                self.significance
            )));
        }
        Ok(())
    }

    /// Shortest window that can hold `min_cycles` cycles of `min_period`.
    pub fn min_window(&self) -> usize {
        self.min_period * self.min_cycles
    }
}

/// Which PoTs contribute to frame `t` of the codeword sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Indexing {
    /// PoTs whose window starts at `t`.
    #[default]
    Start,
    /// PoTs whose window covers `t`.
    Span,
}

/// Per-frame L1-normalized codeword histograms, stored sparsely as
/// `(codeword, weight)` pairs sorted by codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct BowSequence {
    pub k: usize,
    pub frames: Vec<Vec<(usize, f64)>>,
}

impl BowSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Builds a sequence from dense rows, keeping nonzero entries as given.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let k = rows.first().map_or(0, Vec::len);
        let frames = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(c, &w)| (c, w))
                    .collect()
            })
            .collect();
        Self { k, frames }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| {
                let mut row = vec![0.0; self.k];
                for &(c, w) in f {
                    row[c] = w;
                }
                row
            })
            .collect()
    }

    fn slice(&self, range: Range<usize>) -> Self {
        Self {
            k: self.k,
            frames: self.frames[range].to_vec(),
        }
    }
}

/// Maximal runs of at least [`MIN_PAUSE`] frames whose dispersion is below
/// `theta_f`, in frame order.
pub fn detect_pauses(stats: &FrameMotionStats, theta_f: f64) -> Vec<Range<usize>> {
    let frames = if stats.sigma.is_empty() {
        0
    } else {
        stats.sigma.len() + 1
    };
    let mut pauses = Vec::new();
    let mut run_start = None;
    for f in 0..=frames {
        let still = f < frames && stats.frame_dispersion(f) < theta_f;
        match (still, run_start) {
            (true, None) => run_start = Some(f),
            (false, Some(s)) => {
                if f - s >= MIN_PAUSE {
                    pauses.push(s..f);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    pauses
}

/// Codeword sequence over frames `range`. `pots` holds `(start_frame, codeword)`
/// for every selected PoT of the shot; `window` is the PoT length used by
/// span indexing.
pub fn framewise_codeword_sequence(
    range: Range<usize>,
    pots: &[(usize, usize)],
    k: usize,
    window: usize,
    indexing: Indexing,
) -> BowSequence {
    let len = range.end.saturating_sub(range.start);
    let mut counts: Vec<HashMap<usize, usize>> = vec![HashMap::new(); len];
    for &(f, c) in pots {
        let covered = match indexing {
            Indexing::Start => f..f + 1,
            Indexing::Span => f..f + window.max(1),
        };
        for t in covered.start.max(range.start)..covered.end.min(range.end) {
            *counts[t - range.start].entry(c).or_default() += 1;
        }
    }
    let frames = counts
        .into_iter()
        .map(|m| {
            let total: usize = m.values().sum();
            let mut v: Vec<(usize, f64)> = m
                .into_iter()
                .map(|(c, n)| (c, n as f64 / total as f64))
                .collect();
            v.sort_unstable_by_key(|e| e.0);
            v
        })
        .collect();
    BowSequence { k, frames }
}

/// A detected periodic window, in sequence coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicWindow {
    pub start: usize,
    pub end: usize,
    pub period: f64,
    /// Share of non-DC energy in the peak bin.
    pub peak: f64,
}

/// Spectral summary of one window.
#[derive(Debug, Clone, Copy)]
struct WindowEval {
    bin: usize,
    peak: f64,
    /// Peak magnitude in excess of the magnitude the threshold share requires.
    score: f64,
}

/// Probability that white noise puts a share of at least `share` of the
/// two-sided non-DC energy into one of `bins` candidate bins of a window of
/// `len` frames (Fisher's g statistic with a union bound over bins).
fn peak_chance(share: f64, len: usize, bins: usize) -> f64 {
    let one_sided = (len - 1) / 2;
    let g = (2.0 * share).min(1.0);
    (bins as f64 * (1.0 - g).powi(one_sided as i32 - 1)).min(1.0)
}

/// Abscissa of the maximum of the parabola through three points, if it opens
/// downwards.
fn parabola_vertex(
    (x0, y0): (f64, f64),
    (x1, y1): (f64, f64),
    (x2, y2): (f64, f64),
) -> Option<f64> {
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    let curvature = (y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0);
    (curvature < 0.0 && den != 0.0).then(|| (x1 - 0.5 * num / den).clamp(x0, x2))
}

/// Sum over codewords of the transform magnitude of the mean-subtracted
/// series at `nu` cycles per window.
fn summed_magnitude(series: &[(Vec<(usize, f64)>, f64)], len: usize, nu: f64) -> f64 {
    let theta = TAU * nu / len as f64;
    let one = Complex::new(1.0, 0.0);
    // transform of the constant series 1 over the window
    let geometric = (one - Complex::from_polar(1.0, -theta * len as f64))
        / (one - Complex::from_polar(1.0, -theta));
    series
        .iter()
        .map(|(s, mean)| {
            let mut acc = Complex::new(0.0, 0.0);
            for &(t, w) in s {
                acc += Complex::from_polar(w, -theta * t as f64);
            }
            (acc - geometric * *mean).norm()
        })
        .sum()
}

/// Codewords whose series has (relatively) no variance carry only DC.
const FLAT_TOLERANCE: f64 = 1e-12;

struct Detector<'a> {
    seq: &'a BowSequence,
    cfg: PeriodicityConfig,
    planner: FftPlanner<f64>,
    ffts: HashMap<usize, Arc<dyn Fft<f64>>>,
    cache: HashMap<(usize, usize), Option<WindowEval>>,
}

impl<'a> Detector<'a> {
    fn new(seq: &'a BowSequence, cfg: PeriodicityConfig) -> Self {
        Self {
            seq,
            cfg,
            planner: FftPlanner::new(),
            ffts: HashMap::new(),
            cache: HashMap::new(),
        }
    }

    /// Occurrence series of every non-flat codeword in `start..end`, as
    /// `(offset, weight)` lists with the series mean.
    fn series(&self, start: usize, end: usize) -> Vec<(Vec<(usize, f64)>, f64)> {
        let len = end - start;
        let mut by_codeword: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        for (t, frame) in self.seq.frames[start..end].iter().enumerate() {
            for &(c, w) in frame {
                by_codeword.entry(c).or_default().push((t, w));
            }
        }
        let mut out: Vec<(usize, Vec<(usize, f64)>)> = by_codeword.into_iter().collect();
        out.sort_unstable_by_key(|e| e.0);
        out.into_iter()
            .filter_map(|(_, s)| {
                let sum: f64 = s.iter().map(|e| e.1).sum();
                let sq: f64 = s.iter().map(|e| e.1 * e.1).sum();
                let mean = sum / len as f64;
                let var = sq - sum * mean;
                (var > FLAT_TOLERANCE * sq).then_some((s, mean))
            })
            .collect()
    }

    /// Summed magnitude spectrum for bins `0..=len / 2` (bin 0 is left at 0).
    fn spectrum(&mut self, series: &[(Vec<(usize, f64)>, f64)], len: usize) -> Vec<f64> {
        let half = len / 2;
        let mut total = vec![0.0; half + 1];
        let twiddle: Vec<Complex<f64>> = (0..len)
            .map(|j| Complex::from_polar(1.0, -TAU * j as f64 / len as f64))
            .collect();
        let dense_above = 4 * (usize::BITS - len.leading_zeros()) as usize;
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (s, _) in series {
            if s.len() > dense_above {
                buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
                for &(t, w) in s {
                    buf[t] = Complex::new(w, 0.0);
                }
                let fft = self
                    .ffts
                    .entry(len)
                    .or_insert_with(|| self.planner.plan_fft_forward(len))
                    .clone();
                fft.process(&mut buf);
                for k in 1..=half {
                    total[k] += buf[k].norm();
                }
            } else {
                for k in 1..=half {
                    let mut acc = Complex::new(0.0, 0.0);
                    for &(t, w) in s {
                        acc += twiddle[(k * t) % len] * w;
                    }
                    total[k] += acc.norm();
                }
            }
        }
        total
    }

    fn evaluate(&mut self, start: usize, end: usize) -> Option<WindowEval> {
        if let Some(e) = self.cache.get(&(start, end)) {
            return *e;
        }
        let e = self.evaluate_uncached(start, end);
        self.cache.insert((start, end), e);
        e
    }

    fn evaluate_uncached(&mut self, start: usize, end: usize) -> Option<WindowEval> {
        let len = end - start;
        let lo = self.cfg.min_cycles.max(1);
        let hi = len / self.cfg.min_period;
        if lo > hi {
            return None;
        }
        let series = self.series(start, end);
        let spectrum = self.spectrum(&series, len);
        let energy: Vec<f64> = spectrum.iter().map(|s| s * s).collect();
        // two-sided: bins k and len - k mirror each other
        let total: f64 = (1..len).map(|k| energy[k.min(len - k)]).sum();
        if !(total > 0.0) {
            return None;
        }
        let bin = (lo..=hi).fold(
            lo,
            |best, k| if energy[k] > energy[best] { k } else { best },
        );
        // a peak between bins leaks into both; look for it off the grid,
        // within the admissible frequency range
        let top = (len as f64 / self.cfg.min_period as f64).min((len as f64 - 1.0) / 2.0);
        let clamp = |nu: f64| nu.clamp(lo as f64, top.max(lo as f64));
        let mut grid: Vec<(f64, f64)> = Vec::with_capacity(5);
        for o in [-0.5, -0.25, 0.0, 0.25, 0.5] {
            let nu = clamp(bin as f64 + o);
            if grid.last().is_some_and(|g| g.0 == nu) {
                continue;
            }
            let m = if nu == bin as f64 {
                spectrum[bin]
            } else {
                summed_magnitude(&series, len, nu)
            };
            grid.push((nu, m));
        }
        let i = (0..grid.len()).fold(0, |b, i| if grid[i].1 > grid[b].1 { i } else { b });
        let mut magnitude = grid[i].1;
        if i > 0 && i + 1 < grid.len() {
            if let Some(nu) = parabola_vertex(grid[i - 1], grid[i], grid[i + 1]) {
                magnitude = magnitude.max(summed_magnitude(&series, len, clamp(nu)));
            }
        }
        let peak = magnitude * magnitude;
        let share = (peak / total).min(0.5);
        let chance = peak_chance(share, len, hi - lo + 1);
        (share >= self.cfg.theta_h && chance <= self.cfg.significance).then(|| WindowEval {
            bin,
            peak: share,
            score: peak.sqrt() - (self.cfg.theta_h * total).sqrt(),
        })
    }

    fn better(
        &mut self,
        a: (usize, usize),
        b: Option<(usize, usize, f64)>,
    ) -> Option<(usize, usize, f64)> {
        match (self.evaluate(a.0, a.1), b) {
            (Some(e), Some(best)) if e.score > best.2 => Some((a.0, a.1, e.score)),
            (Some(e), None) => Some((a.0, a.1, e.score)),
            (_, best) => best,
        }
    }

    /// Best window inside `range` on the coarse grid, then refined.
    fn search(&mut self, range: Range<usize>) -> Option<(usize, usize)> {
        let total = range.end - range.start;
        let min_len = self.cfg.min_window();
        if total < min_len {
            return None;
        }
        let mut lengths = Vec::new();
        let mut l = min_len as f64;
        while (l.round() as usize) < total {
            let len = l.round() as usize;
            if lengths.last() != Some(&len) {
                lengths.push(len);
            }
            l *= 1.25;
        }
        lengths.push(total);

        let mut best = None;
        for &len in &lengths {
            let stride = (len / 8).max(1);
            let last = range.end - len;
            let mut s = range.start;
            loop {
                best = self.better((s, s + len), best);
                if s == last {
                    break;
                }
                s = (s + stride).min(last);
            }
        }
        let (mut s, mut e, mut score) = best?;

        // alternate line searches over each boundary until neither moves
        let reach = ((e - s) / 8).max(3);
        loop {
            let before = (s, e);
            for s2 in s.saturating_sub(reach).max(range.start)..=(s + reach).min(e - min_len) {
                if let Some(found) = self.better((s2, e), Some((s, e, score))) {
                    (s, e, score) = found;
                }
            }
            for e2 in (e.saturating_sub(reach)).max(s + min_len)..=(e + reach).min(range.end) {
                if let Some(found) = self.better((s, e2), Some((s, e, score))) {
                    (s, e, score) = found;
                }
            }
            if (s, e) == before {
                break;
            }
        }
        Some((s, e))
    }

    /// Period of the peak in `start..end`, refined between neighbouring bins.
    fn period(&self, start: usize, end: usize, bin: usize) -> f64 {
        let len = end - start;
        let series = self.series(start, end);
        let steps = 100;
        let lo = (bin as f64 - 1.0).max(0.5);
        let hi = bin as f64 + 1.0;
        let mut best = (bin as f64, summed_magnitude(&series, len, bin as f64));
        for i in 0..=steps {
            let nu = lo + (hi - lo) * i as f64 / steps as f64;
            let m = summed_magnitude(&series, len, nu);
            if m > best.1 {
                best = (nu, m);
            }
        }
        len as f64 / best.0
    }

    /// Searches `range`, then re-searches inside the result until the window
    /// reproduces itself.
    fn detect(&mut self, range: Range<usize>) -> Option<PeriodicWindow> {
        let (mut s, mut e) = self.search(range)?;
        while let Some((ns, ne)) = self.search(s..e) {
            if (ns, ne) == (s, e) {
                break;
            }
            (s, e) = (ns, ne);
        }
        let eval = self.evaluate(s, e).expect("searched windows qualify");
        Some(PeriodicWindow {
            start: s,
            end: e,
            period: self.period(s, e, eval.bin),
            peak: eval.peak,
        })
    }
}

/// Best periodic window of `seq`, if any qualifies.
pub fn detect_periodic_interval(
    seq: &BowSequence,
    cfg: &PeriodicityConfig,
) -> Option<PeriodicWindow> {
    Detector::new(seq, *cfg).detect(0..seq.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub theta_f: f64,
    #[serde(flatten)]
    pub periodicity: PeriodicityConfig,
    pub indexing: Indexing,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            theta_f: 0.1,
            periodicity: PeriodicityConfig::default(),
            indexing: Indexing::Start,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<(), PartitionError> {
        if !(self.theta_f >= 0.0) {
            return Err(PartitionError::Config(format!(
                "theta_f must be >= 0, got {}",
                self.theta_f
            )));
        }
        self.periodicity.validate()
    }
}

/// Splits a shot into intervals. `pots` holds `(start_frame, codeword)` for
/// the shot's selected PoTs; `k` is the codebook size.
pub fn partition_shot(
    shot_id: u64,
    stats: &FrameMotionStats,
    pots: &[(usize, usize)],
    k: usize,
    cfg: &PartitionConfig,
) -> Vec<Interval> {
    let frames = if stats.sigma.is_empty() {
        0
    } else {
        stats.sigma.len() + 1
    };
    let pauses = detect_pauses(stats, cfg.theta_f);
    let mut pieces = Vec::new();
    let mut cursor = 0;
    for p in pauses
        .iter()
        .cloned()
        .chain(std::iter::once(frames..frames))
    {
        if p.start > cursor {
            pieces.push(cursor..p.start);
        }
        cursor = p.end;
    }
    let origin = if pauses.is_empty() {
        Origin::WholeShot
    } else {
        Origin::PauseSplit
    };
    let seq = framewise_codeword_sequence(0..frames, pots, k, stats.window, cfg.indexing);
    let mut out = Vec::new();
    for piece in pieces {
        out.extend(partition_range(
            shot_id,
            &seq,
            piece,
            origin,
            &cfg.periodicity,
        ));
    }
    out
}

/// Peels periodic windows off `range` of a codeword sequence.
pub fn partition_range(
    shot_id: u64,
    seq: &BowSequence,
    range: Range<usize>,
    origin: Origin,
    cfg: &PeriodicityConfig,
) -> Vec<Interval> {
    let local = seq.slice(range.clone());
    let mut detector = Detector::new(&local, *cfg);
    let mut found = Vec::new();
    peel(&mut detector, 0..local.len(), &mut found);
    found.sort_by_key(|w| w.start);

    if found.is_empty() {
        return vec![Interval {
            shot_id,
            start: range.start,
            end: range.end,
            origin,
            period: None,
        }];
    }
    let mut pieces = Vec::new();
    let mut cursor = 0;
    for w in &found {
        if w.start > cursor {
            pieces.push((cursor, w.start, Origin::Remainder, None));
        }
        pieces.push((w.start, w.end, Origin::Periodic, Some(w.period)));
        cursor = w.end;
    }
    if cursor < local.len() {
        pieces.push((cursor, local.len(), Origin::Remainder, None));
    }
    merge_short_remainders(&mut pieces);
    pieces
        .into_iter()
        .map(|(s, e, origin, period)| Interval {
            shot_id,
            start: range.start + s,
            end: range.start + e,
            origin,
            period,
        })
        .collect()
}

fn peel(detector: &mut Detector<'_>, range: Range<usize>, found: &mut Vec<PeriodicWindow>) {
    let Some(w) = detector.detect(range.clone()) else {
        return;
    };
    found.push(w);
    peel(detector, range.start..w.start, found);
    peel(detector, w.end..range.end, found);
}

type Piece = (usize, usize, Origin, Option<f64>);

/// Folds remainders shorter than [`MIN_REMAINDER`] into the preceding piece,
/// or the following one at the start.
fn merge_short_remainders(pieces: &mut Vec<Piece>) {
    let mut i = 0;
    while i < pieces.len() {
        let (s, e, origin, _) = pieces[i];
        if origin != Origin::Remainder || e - s >= MIN_REMAINDER || pieces.len() == 1 {
            i += 1;
            continue;
        }
        pieces.remove(i);
        if i > 0 {
            pieces[i - 1].1 = e;
        } else {
            pieces[0].0 = s;
        }
    }
}

/// `interval <shot_id> <start> <end> <origin> [<period>]` lines.
pub fn format_intervals(intervals: &[Interval]) -> String {
    let mut out = String::new();
    for iv in intervals {
        out.push_str(&format!(
            "interval {} {} {} {}",
            iv.shot_id, iv.start, iv.end, iv.origin
        ));
        if let Some(p) = iv.period {
            out.push_str(&format!(" {p}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_intervals(text: &str) -> Result<Vec<Interval>, PartitionError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| PartitionError::Parse {
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f[0] != "interval" || !(5..=6).contains(&f.len()) {
            return Err(err(format!(
                "expected `interval <shot> <start> <end> <origin> [<period>]`, got {line:?}"
            )));
        }
        let int = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("invalid {what} {s:?}")))
        };
        let iv = Interval {
            shot_id: f[1]
                .parse()
                .map_err(|_| err(format!("invalid shot id {:?}", f[1])))?,
            start: int(f[2], "start")?,
            end: int(f[3], "end")?,
            origin: f[4].parse().map_err(err)?,
            period: f
                .get(5)
                .map(|p| {
                    p.parse::<f64>()
                        .map_err(|_| err(format!("invalid period {p:?}")))
                })
                .transpose()?,
        };
        if iv.start >= iv.end {
            return Err(err(format!("empty interval {}..{}", iv.start, iv.end)));
        }
        out.push(iv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stats_from_sigma(sigma: Vec<f64>) -> FrameMotionStats {
        FrameMotionStats {
            window: 10,
            median_velocity: vec![None; sigma.len()],
            articulation_score: vec![],
            sigma,
        }
    }

    /// Frames `still` have zero dispersion: both adjacent transitions are 0.
    fn stats_with_still(frames: usize, still: Range<usize>) -> FrameMotionStats {
        let sigma = (0..frames - 1)
            .map(|k| {
                if still.contains(&k) && still.contains(&(k + 1)) {
                    0.0
                } else {
                    0.8
                }
            })
            .collect();
        stats_from_sigma(sigma)
    }

    fn sinusoid(len: usize, period: f64) -> BowSequence {
        let rows: Vec<Vec<f64>> = (0..len)
            .map(|t| {
                let a = 0.5 + 0.5 * (TAU * t as f64 / period).sin();
                vec![a, 1.0 - a]
            })
            .collect();
        BowSequence::from_dense(&rows)
    }

    fn noise(len: usize, k: usize, per_frame: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..len)
            .map(|_| {
                let mut row = vec![0.0; k];
                for _ in 0..per_frame {
                    row[rng.random_range(0..k)] += 1.0 / per_frame as f64;
                }
                row
            })
            .collect()
    }

    #[test]
    fn pauses_from_still_frames() {
        assert!(detect_pauses(&stats_from_sigma(vec![0.5; 40]), 0.1).is_empty());
        assert_eq!(
            detect_pauses(&stats_with_still(40, 10..15), 0.1),
            vec![10..15]
        );
        assert!(detect_pauses(&stats_with_still(40, 10..12), 0.1).is_empty());
        assert_eq!(detect_pauses(&stats_with_still(40, 0..3), 0.1), vec![0..3]);
        assert_eq!(
            detect_pauses(&stats_with_still(40, 36..40), 0.1),
            vec![36..40]
        );
        assert!(detect_pauses(&stats_from_sigma(vec![]), 0.1).is_empty());
    }

    #[test]
    fn pause_split_intervals() {
        let stats = stats_with_still(40, 10..15);
        let iv = partition_shot(3, &stats, &[], 4, &PartitionConfig::default());
        let ranges: Vec<_> = iv.iter().map(|i| (i.start, i.end, i.origin)).collect();
        assert_eq!(
            ranges,
            vec![(0, 10, Origin::PauseSplit), (15, 40, Origin::PauseSplit)]
        );
        assert!(iv.iter().all(|i| i.shot_id == 3));
    }

    #[test]
    fn no_pots_one_whole_shot_interval() {
        let iv = partition_shot(
            0,
            &stats_from_sigma(vec![1.0; 59]),
            &[],
            8,
            &PartitionConfig::default(),
        );
        assert_eq!(iv.len(), 1);
        assert_eq!(
            (iv[0].start, iv[0].end, iv[0].origin),
            (0, 60, Origin::WholeShot)
        );
    }

    #[test]
    fn codeword_sequences() {
        let empty = framewise_codeword_sequence(0..5, &[], 4, 10, Indexing::Start);
        assert_eq!(empty.to_dense(), vec![vec![0.0; 4]; 5]);

        let pots: Vec<_> = (0..6).map(|f| (f, 2)).collect();
        let seq = framewise_codeword_sequence(0..6, &pots, 4, 10, Indexing::Start);
        assert!(seq
            .to_dense()
            .iter()
            .all(|r| r == &vec![0.0, 0.0, 1.0, 0.0]));

        let pots: Vec<_> = (0..6).map(|f| (f, f % 2)).collect();
        let seq = framewise_codeword_sequence(1..5, &pots, 2, 10, Indexing::Start);
        assert_eq!(
            seq.to_dense(),
            vec![
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0]
            ]
        );

        let pots = [(0, 0), (0, 1), (0, 1), (2, 0)];
        let seq = framewise_codeword_sequence(0..4, &pots, 2, 2, Indexing::Span);
        let d = seq.to_dense();
        assert_eq!(d[0], vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(d[1], vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(d[2], vec![1.0, 0.0]);
        assert_eq!(d[3], vec![1.0, 0.0]);
    }

    #[test]
    fn constant_sequence_has_no_period() {
        let seq = BowSequence::from_dense(&vec![vec![0.25, 0.75]; 100]);
        assert_eq!(
            detect_periodic_interval(&seq, &PeriodicityConfig::default()),
            None
        );
        let seq = BowSequence::from_dense(&vec![vec![0.0, 0.0]; 100]);
        assert_eq!(
            detect_periodic_interval(&seq, &PeriodicityConfig::default()),
            None
        );
    }

    #[test]
    fn short_sequence_has_no_period() {
        assert_eq!(
            detect_periodic_interval(&sinusoid(14, 5.0), &PeriodicityConfig::default()),
            None
        );
    }

    #[test]
    fn sinusoid_period_and_peak() {
        let w =
            detect_periodic_interval(&sinusoid(40, 10.0), &PeriodicityConfig::default()).unwrap();
        assert!((w.period - 10.0).abs() <= 1.0, "{w:?}");
        // a pure sinusoid over whole cycles puts all energy in bins k and L - k
        assert!(w.peak > 0.4, "{w:?}");
        // frame 0 sits exactly at the mean, so dropping it changes nothing
        assert!(w.start <= 1 && w.end == 40, "{w:?}");
    }

    #[test]
    fn single_bin_share_of_a_whole_cycle_sinusoid() {
        let seq = sinusoid(40, 10.0);
        let mut d = Detector::new(&seq, PeriodicityConfig::default());
        let e = d.evaluate(0, 40).unwrap();
        assert_eq!(e.bin, 4);
        assert!((e.peak - 0.5).abs() < 1e-9, "{}", e.peak);
    }

    #[test]
    fn white_noise_rarely_detected() {
        let cfg = PeriodicityConfig::default();
        let mut single = 0;
        let mut multi = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
            single += usize::from(
                detect_periodic_interval(&BowSequence::from_dense(&rows), &cfg).is_some(),
            );
            let rows = noise(200, 12, 10, &mut rng);
            multi += usize::from(
                detect_periodic_interval(&BowSequence::from_dense(&rows), &cfg).is_some(),
            );
        }
        assert!(single <= 5, "single codeword: {single} of 100");
        assert!(multi <= 5, "12 codewords: {multi} of 100");
    }

    #[test]
    fn vertex_of_sampled_parabola() {
        let f = |x: f64| 3.0 - (x - 14.3).powi(2);
        let v = parabola_vertex((14.0, f(14.0)), (14.25, f(14.25)), (14.8, f(14.8))).unwrap();
        assert!((v - 14.3).abs() < 1e-12);
        assert_eq!(parabola_vertex((0.0, 0.0), (1.0, 1.0), (2.0, 2.0)), None);
    }

    #[test]
    fn scaling_weights_does_not_change_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = noise(120, 12, 6, &mut rng);
        for (t, row) in rows.iter_mut().enumerate().skip(30).take(60) {
            row.iter_mut().for_each(|w| *w *= 0.1);
            row[0] += 0.9 * (0.5 + 0.5 * (TAU * t as f64 / 8.0).cos());
        }
        let a = detect_periodic_interval(
            &BowSequence::from_dense(&rows),
            &PeriodicityConfig::default(),
        );
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|w| w * 7.5).collect())
            .collect();
        let b = detect_periodic_interval(
            &BowSequence::from_dense(&scaled),
            &PeriodicityConfig::default(),
        );
        let (a, b) = (a.unwrap(), b.unwrap());
        assert_eq!((a.start, a.end), (b.start, b.end));
        assert!((a.period - b.period).abs() < 1e-9);
        assert!((a.peak - b.peak).abs() < 1e-9);
    }

    #[test]
    fn dense_and_sparse_spectra_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // 3 codewords take the FFT path, 40 the sparse one
        for codewords in [3, 40] {
            let rows = noise(64, codewords, 4, &mut rng);
            let seq = BowSequence::from_dense(&rows);
            let mut d = Detector::new(&seq, PeriodicityConfig::default());
            let series = d.series(5, 60);
            let fast = d.spectrum(&series, 55);
            // direct transform of every mean-subtracted codeword series
            let len = 55;
            for k in 1..=len / 2 {
                let mut sum = 0.0;
                for c in 0..codewords {
                    let mean: f64 = rows[5..60].iter().map(|r| r[c]).sum::<f64>() / len as f64;
                    let mut acc = Complex::new(0.0, 0.0);
                    for t in 0..len {
                        acc += Complex::from_polar(
                            rows[5 + t][c] - mean,
                            -TAU * (k * t) as f64 / len as f64,
                        );
                    }
                    sum += acc.norm();
                }
                assert!(
                    (fast[k] - sum).abs() < 1e-9 * sum.max(1.0),
                    "bin {k}: {} vs {sum}",
                    fast[k]
                );
                let off_grid = summed_magnitude(&series, len, k as f64);
                assert!((off_grid - sum).abs() < 1e-9 * sum.max(1.0));
            }
        }
    }

    #[test]
    fn periodic_walk_then_pause_then_aperiodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = 30;
        // period-8 walk on frames 0..64, pause 64..69, drift 69..110
        let mut pots = Vec::new();
        for f in 0..64 {
            for c in 0..4 {
                let phase = TAU * (f as f64 / 8.0 - c as f64 / 4.0);
                let count = (2.0 * (1.0 + phase.cos())).round() as usize;
                pots.extend(std::iter::repeat_n((f, c), count));
            }
        }
        for f in 69..110 {
            for _ in 0..4 {
                pots.push((f, 16 + rng.random_range(0..k - 16)));
            }
        }
        let stats = stats_with_still(110, 64..69);
        let iv = partition_shot(0, &stats, &pots, k, &PartitionConfig::default());
        assert_eq!(iv.len(), 2, "{iv:?}");
        assert_eq!(iv[0].origin, Origin::Periodic);
        assert!(iv[0].start <= 3 && iv[0].end == 64, "{iv:?}");
        assert!((iv[0].period.unwrap() - 8.0).abs() <= 1.0);
        assert_eq!((iv[1].start, iv[1].end), (69, 110));
    }

    #[test]
    fn emitted_intervals_partition_again_to_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rows = noise(150, 20, 5, &mut rng);
        for (t, row) in rows.iter_mut().enumerate().skip(40).take(70) {
            *row = vec![0.0; 20];
            row[t % 6] = 1.0;
        }
        let seq = BowSequence::from_dense(&rows);
        let cfg = PeriodicityConfig::default();
        let first = partition_range(0, &seq, 0..150, Origin::WholeShot, &cfg);
        assert!(
            first.iter().any(|i| i.origin == Origin::Periodic),
            "{first:?}"
        );
        for iv in &first {
            let again = partition_range(0, &seq, iv.range(), iv.origin, &cfg);
            assert_eq!(again.len(), 1, "{iv:?} -> {again:?}");
            assert_eq!(again[0].range(), iv.range());
        }
    }

    #[test]
    fn short_remainders_merge() {
        let mut p = vec![
            (0, 3, Origin::Remainder, None),
            (3, 40, Origin::Periodic, Some(8.0)),
            (40, 44, Origin::Remainder, None),
            (44, 80, Origin::Periodic, Some(6.0)),
            (80, 100, Origin::Remainder, None),
        ];
        merge_short_remainders(&mut p);
        assert_eq!(
            p,
            vec![
                (0, 44, Origin::Periodic, Some(8.0)),
                (44, 80, Origin::Periodic, Some(6.0)),
                (80, 100, Origin::Remainder, None),
            ]
        );
    }

    #[test]
    fn interval_lines_round_trip() {
        let iv = vec![
            Interval {
                shot_id: 2,
                start: 0,
                end: 40,
                origin: Origin::Periodic,
                period: Some(8.25),
            },
            Interval {
                shot_id: 2,
                start: 45,
                end: 90,
                origin: Origin::Remainder,
                period: None,
            },
        ];
        let text = format_intervals(&iv);
        assert_eq!(
            text,
            "interval 2 0 40 periodic 8.25\ninterval 2 45 90 remainder\n"
        );
        assert_eq!(parse_intervals(&text).unwrap(), iv);
        assert!(parse_intervals("interval 1 5 5 remainder").is_err());
        assert!(parse_intervals("interval 1 0 5 sideways").is_err());
        assert!(parse_intervals("span 1 0 5 remainder").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(PeriodicityConfig::default().validate().is_ok());
        assert!(PeriodicityConfig {
            theta_h: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PeriodicityConfig {
            min_period: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PeriodicityConfig {
            min_cycles: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PeriodicityConfig {
            significance: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(PeriodicityConfig::default().min_window(), 15);
    }
}
