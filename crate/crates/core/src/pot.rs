//! Pairs of trajectories (PoTs): candidate generation, anchor/swing ordering,
//! scoring, per-frame selection and the relative-motion descriptor. Also holds
//! the single-trajectory shape descriptor used as a baseline channel.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle, Vec2};
use crate::ingest::{FrameMotionStats, Shot, Trajectory};

/// Total displacement below which a pair (or a single trajectory) is treated as rigid.
pub const MIN_TOTAL_DISPLACEMENT: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PotError {
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error("no foreground median velocity at transition {0}")]
    AbsentMedian(usize),
    #[error("trajectory {id} does not cover frames [{first}, {last}] in the foreground")]
    NotCovered { id: u64, first: usize, last: usize },
    #[error("total displacement {0:e} is too small to normalize")]
    Degenerate(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// PoT length in frames.
    pub n: usize,
    /// Fraction of candidates retained per frame.
    pub theta_p: f64,
    /// Articulation score below which a frame is pruned.
    pub theta_f: f64,
    /// Optional cap on the anchor-swing distance in the first frame (pixels).
    pub max_pair_distance: Option<f64>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            n: 10,
            theta_p: 0.15,
            theta_f: 0.1,
            max_pair_distance: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), PotError> {
        if self.n < 2 {
            return Err(PotError::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.theta_p > 0.0 && self.theta_p <= 1.0) {
            return Err(PotError::Config(format!(
                "theta_p must be in (0, 1], got {}",
                self.theta_p
            )));
        }
        if !(self.theta_f >= 0.0) {
            return Err(PotError::Config(format!(
                "theta_f must be >= 0, got {}",
                self.theta_f
            )));
        }
        if let Some(d) = self.max_pair_distance {
            if !(d > 0.0) {
                return Err(PotError::Config(format!(
                    "max_pair_distance must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// Descriptor dimensionality `2 (n - 1) + 1`.
    pub fn descriptor_dim(&self) -> usize {
        2 * (self.n - 1) + 1
    }
}

/// An ordered candidate pair starting at `start_frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotCandidate {
    pub anchor_id: u64,
    pub swing_id: u64,
    pub start_frame: usize,
    pub window: usize,
    pub score: f64,
}

/// Relative-motion descriptor of an ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PotDescriptor {
    /// Angle of the anchor-to-swing vector in the first frame, in `[-pi, pi)`.
    pub theta: f64,
    /// Frame-to-frame changes of the anchor-to-swing vector, divided by their
    /// total length.
    pub displacements: Vec<Vec2>,
    /// Sum of displacement magnitudes before normalization (pixels).
    pub total_displacement: f64,
}

impl PotDescriptor {
    pub fn dim(&self) -> usize {
        2 * self.displacements.len() + 1
    }

    /// `(theta, dx2, dy2, ..., dxn, dyn)`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.push(self.theta);
        for d in &self.displacements {
            out.push(d.x);
            out.push(d.y);
        }
        out
    }
}

/// A selected PoT with its descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Pot {
    pub candidate: PotCandidate,
    pub descriptor: PotDescriptor,
}

/// `||v^k - v_m^k||` for `k` in `f..f + n`, or an error when the trajectory
/// or the median is missing somewhere in the window.
fn deviations(
    t: &Trajectory,
    stats: &FrameMotionStats,
    f: usize,
    n: usize,
) -> Result<Vec<f64>, PotError> {
    if !t.fg_throughout(f, f + n) {
        return Err(PotError::NotCovered {
            id: t.id(),
            first: f,
            last: f + n,
        });
    }
    (f..f + n)
        .map(|k| {
            let vm = stats
                .median_velocity
                .get(k)
                .copied()
                .flatten()
                .ok_or(PotError::AbsentMedian(k))?;
            let v = t.velocity(k).expect("covered window");
            Ok((v - vm).norm())
        })
        .collect()
}

/// `sum_k (dev_b[k] - dev_a[k])`: positive when `a` is closer to the median.
fn deviation_gap(dev_a: &[f64], dev_b: &[f64]) -> f64 {
    dev_a.iter().zip(dev_b).map(|(a, b)| b - a).sum()
}

fn order_by_gap(id_i: u64, id_j: u64, gap: f64) -> (u64, u64) {
    if gap > 0.0 || (gap == 0.0 && id_i < id_j) {
        (id_i, id_j)
    } else {
        (id_j, id_i)
    }
}

/// Orders a pair into `(anchor, swing)`: the anchor deviates less from the
/// median foreground velocity over the window's `n` transitions. Ties go to
/// the lower id.
///
/// Both trajectories must be foreground on frames `f..=f + n`, since the
/// velocity at transition `k` is `p[k + 1] - p[k]`.
pub fn order_pair(
    t_i: &Trajectory,
    t_j: &Trajectory,
    stats: &FrameMotionStats,
    f: usize,
    n: usize,
) -> Result<(u64, u64), PotError> {
    let dev_i = deviations(t_i, stats, f, n)?;
    let dev_j = deviations(t_j, stats, f, n)?;
    Ok(order_by_gap(
        t_i.id(),
        t_j.id(),
        deviation_gap(&dev_i, &dev_j),
    ))
}

/// `S = sum_k ||v_s^k - v_m^k|| - ||v_a^k - v_m^k||` over the window.
pub fn score_candidate(
    anchor: &Trajectory,
    swing: &Trajectory,
    stats: &FrameMotionStats,
    f: usize,
    n: usize,
) -> Result<f64, PotError> {
    let dev_a = deviations(anchor, stats, f, n)?;
    let dev_s = deviations(swing, stats, f, n)?;
    Ok(deviation_gap(&dev_a, &dev_s))
}

/// Number of candidates kept out of `m`: `ceil(theta_p * m)`, never more than `m`.
pub fn retained_count(theta_p: f64, m: usize) -> usize {
    if m == 0 {
        return 0;
    }
    // 0.15 * 20 evaluates to 3.0000000000000004; absorb representation error
    let keep = (theta_p * m as f64 - 1e-9).ceil().max(1.0) as usize;
    keep.min(m)
}

/// Selects PoTs per start frame. Frames whose articulation score is below
/// `theta_f` get no PoTs; otherwise the best `ceil(theta_p * M)` of the `M`
/// valid pairs are kept, ranked by score and then by (anchor id, swing id).
pub fn select_pots(
    shot: &Shot,
    stats: &FrameMotionStats,
    cfg: &SelectionConfig,
) -> Result<BTreeMap<usize, Vec<PotCandidate>>, PotError> {
    cfg.validate()?;
    let n = cfg.n;
    let mut selected = BTreeMap::new();

    for f in 0..stats.articulation_score.len() {
        if stats.is_pruned(f, cfg.theta_f) {
            continue;
        }
        let mut eligible: Vec<(&Trajectory, Vec<f64>)> = shot
            .trajectories
            .iter()
            .filter_map(|t| deviations(t, stats, f, n).ok().map(|d| (t, d)))
            .collect();
        eligible.sort_by_key(|(t, _)| t.id());

        let mut candidates = Vec::new();
        for (i, (ti, dev_i)) in eligible.iter().enumerate() {
            for (tj, dev_j) in &eligible[i + 1..] {
                if let Some(cap) = cfg.max_pair_distance {
                    let d = (tj.position(f).expect("covered") - ti.position(f).expect("covered"))
                        .norm();
                    if d > cap {
                        continue;
                    }
                }
                let gap = deviation_gap(dev_i, dev_j);
                let (anchor_id, swing_id) = order_by_gap(ti.id(), tj.id(), gap);
                candidates.push(PotCandidate {
                    anchor_id,
                    swing_id,
                    start_frame: f,
                    window: n,
                    score: gap.abs(),
                });
            }
        }
        if candidates.is_empty() {
            continue;
        }
        let keep = retained_count(cfg.theta_p, candidates.len());
        candidates.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.anchor_id.cmp(&b.anchor_id))
                .then(a.swing_id.cmp(&b.swing_id))
        });
        candidates.truncate(keep);
        selected.insert(f, candidates);
    }
    Ok(selected)
}

/// Computes the descriptor of an ordered pair over frames `f..f + n`.
pub fn compute_descriptor(
    anchor: &Trajectory,
    swing: &Trajectory,
    f: usize,
    n: usize,
) -> Result<PotDescriptor, PotError> {
    let relative: Vec<Vec2> = (f..f + n)
        .map(|k| match (anchor.position(k), swing.position(k)) {
            (Some(a), Some(s)) => Ok(s - a),
            (None, _) => Err(PotError::NotCovered {
                id: anchor.id(),
                first: f,
                last: f + n - 1,
            }),
            (_, None) => Err(PotError::NotCovered {
                id: swing.id(),
                first: f,
                last: f + n - 1,
            }),
        })
        .collect::<Result<_, _>>()?;
    let theta = wrap_angle(relative[0].y.atan2(relative[0].x));
    let raw: Vec<Vec2> = relative.windows(2).map(|w| w[1] - w[0]).collect();
    let total: f64 = raw.iter().map(|d| d.norm()).sum();
    if !(total >= MIN_TOTAL_DISPLACEMENT) {
        return Err(PotError::Degenerate(total));
    }
    Ok(PotDescriptor {
        theta,
        displacements: raw.into_iter().map(|d| d * (1.0 / total)).collect(),
        total_displacement: total,
    })
}

/// Single-trajectory shape descriptor: the `n - 1` frame-to-frame
/// displacements over `f..f + n`, each divided by the sum of their magnitudes,
/// flattened as `(dx1, dy1, ...)`.
pub fn compute_ts_descriptor(t: &Trajectory, f: usize, n: usize) -> Result<Vec<f64>, PotError> {
    let not_covered = PotError::NotCovered {
        id: t.id(),
        first: f,
        last: f + n - 1,
    };
    if n < 2 || f < t.start_frame() || f + n > t.end_frame() {
        return Err(not_covered);
    }
    let pts = &t.points()[f - t.start_frame()..f - t.start_frame() + n];
    let raw: Vec<Vec2> = pts.windows(2).map(|w| w[1] - w[0]).collect();
    let total: f64 = raw.iter().map(|d| d.norm()).sum();
    if !(total >= MIN_TOTAL_DISPLACEMENT) {
        return Err(PotError::Degenerate(total));
    }
    Ok(raw
        .iter()
        .flat_map(|d| [d.x / total, d.y / total])
        .collect())
}

/// Selects and describes the PoTs of a shot, ordered by (frame, rank).
/// Rigid pairs are dropped.
pub fn extract_pots(
    shot: &Shot,
    stats: &FrameMotionStats,
    cfg: &SelectionConfig,
) -> Result<Vec<Pot>, PotError> {
    let selected = select_pots(shot, stats, cfg)?;
    let mut pots = Vec::new();
    for candidate in selected.into_values().flatten() {
        let anchor = shot
            .trajectory(candidate.anchor_id)
            .expect("selected ids exist");
        let swing = shot
            .trajectory(candidate.swing_id)
            .expect("selected ids exist");
        match compute_descriptor(anchor, swing, candidate.start_frame, candidate.window) {
            Ok(descriptor) => pots.push(Pot {
                candidate,
                descriptor,
            }),
            Err(PotError::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(pots)
}

/// Shape descriptors of every foreground trajectory for every window start.
pub fn extract_ts(shot: &Shot, n: usize) -> Vec<TsRecord> {
    let mut out = Vec::new();
    for f in 0..shot.num_frames.saturating_sub(n - 1) {
        for t in &shot.trajectories {
            if !t.fg_throughout(f, f + n - 1) {
                continue;
            }
            if let Ok(descriptor) = compute_ts_descriptor(t, f, n) {
                out.push(TsRecord {
                    shot_id: shot.shot_id,
                    start_frame: f,
                    trajectory_id: t.id(),
                    descriptor,
                });
            }
        }
    }
    out
}

/// One line of the PoT dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PotRecord {
    pub shot_id: u64,
    pub start_frame: usize,
    pub anchor_id: u64,
    pub swing_id: u64,
    pub score: f64,
    /// Flattened descriptor `(theta, dx2, dy2, ...)`.
    pub descriptor: Vec<f64>,
}

impl PotRecord {
    pub fn new(shot_id: u64, pot: &Pot) -> Self {
        Self {
            shot_id,
            start_frame: pot.candidate.start_frame,
            anchor_id: pot.candidate.anchor_id,
            swing_id: pot.candidate.swing_id,
            score: pot.candidate.score,
            descriptor: pot.descriptor.flatten(),
        }
    }
}

/// One line of the shape-descriptor dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TsRecord {
    pub shot_id: u64,
    pub start_frame: usize,
    pub trajectory_id: u64,
    pub descriptor: Vec<f64>,
}

/// `pot <shot_id> <f> <anchor_id> <swing_id> <score> <theta> <dx2> <dy2> ...`
pub fn format_pots(records: &[PotRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = write!(
            out,
            "pot {} {} {} {} {}",
            r.shot_id, r.start_frame, r.anchor_id, r.swing_id, r.score
        );
        for v in &r.descriptor {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

/// `ts <shot_id> <f> <trajectory_id> <dx1> <dy1> ...`
pub fn format_ts(records: &[TsRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = write!(
            out,
            "ts {} {} {}",
            r.shot_id, r.start_frame, r.trajectory_id
        );
        for v in &r.descriptor {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

fn numbers<'a, T: std::str::FromStr>(
    fields: impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<Vec<T>, PotError> {
    fields
        .map(|s| {
            s.parse().map_err(|_| PotError::Parse {
                line,
                message: format!("invalid number {s:?}"),
            })
        })
        .collect()
}

fn record_lines<'a>(
    text: &'a str,
    tag: &'a str,
) -> impl Iterator<Item = Result<(usize, Vec<&'a str>), PotError>> + 'a {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(move |(line, l)| {
            let fields: Vec<&str> = l.split_ascii_whitespace().collect();
            if fields[0] != tag {
                return Err(PotError::Parse {
                    line,
                    message: format!("expected a {tag:?} record, got {:?}", fields[0]),
                });
            }
            Ok((line, fields))
        })
}

pub fn parse_pots(text: &str) -> Result<Vec<PotRecord>, PotError> {
    record_lines(text, "pot")
        .map(|r| {
            let (line, fields) = r?;
            if fields.len() < 7 {
                return Err(PotError::Parse {
                    line,
                    message: "truncated pot record".into(),
                });
            }
            let head: Vec<u64> = numbers(fields[1..5].iter().copied(), line)?;
            let values: Vec<f64> = numbers(fields[5..].iter().copied(), line)?;
            Ok(PotRecord {
                shot_id: head[0],
                start_frame: head[1] as usize,
                anchor_id: head[2],
                swing_id: head[3],
                score: values[0],
                descriptor: values[1..].to_vec(),
            })
        })
        .collect()
}

pub fn parse_ts(text: &str) -> Result<Vec<TsRecord>, PotError> {
    record_lines(text, "ts")
        .map(|r| {
            let (line, fields) = r?;
            if fields.len() < 6 {
                return Err(PotError::Parse {
                    line,
                    message: "truncated ts record".into(),
                });
            }
            let head: Vec<u64> = numbers(fields[1..4].iter().copied(), line)?;
            Ok(TsRecord {
                shot_id: head[0],
                start_frame: head[1] as usize,
                trajectory_id: head[2],
                descriptor: numbers(fields[4..].iter().copied(), line)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(id: u64, pts: &[Vec2]) -> Trajectory {
        Trajectory::new(id, 0, pts.to_vec(), vec![true; pts.len()]).unwrap()
    }

    /// Trajectory whose velocity at each transition is given.
    fn from_velocities(id: u64, v: &[Vec2]) -> Trajectory {
        let mut p = Vec2::ZERO;
        let mut pts = vec![p];
        for &d in v {
            p += d;
            pts.push(p);
        }
        traj(id, &pts)
    }

    fn stats_with_median(median: Vec<Vec2>, n: usize) -> FrameMotionStats {
        let len = median.len();
        FrameMotionStats {
            window: n,
            median_velocity: median.into_iter().map(Some).collect(),
            sigma: vec![1.0; len],
            articulation_score: vec![1.0; (len + 1).saturating_sub(n)],
        }
    }

    #[test]
    fn zero_deviation_trajectory_is_anchor() {
        let vm = vec![Vec2::new(1.0, 0.0); 10];
        let stats = stats_with_median(vm.clone(), 10);
        let on_median = from_velocities(7, &vm);
        let off = from_velocities(2, &[Vec2::new(1.0, 1.0); 10]);
        assert_eq!(order_pair(&on_median, &off, &stats, 0, 10).unwrap(), (7, 2));
        assert_eq!(order_pair(&off, &on_median, &stats, 0, 10).unwrap(), (7, 2));
    }

    #[test]
    fn identical_trajectories_tie_to_lower_id() {
        let v = vec![Vec2::new(0.5, 0.5); 10];
        let stats = stats_with_median(vec![Vec2::ZERO; 10], 10);
        let a = from_velocities(9, &v);
        let b = from_velocities(4, &v);
        assert_eq!(order_pair(&a, &b, &stats, 0, 10).unwrap(), (4, 9));
        assert_eq!(score_candidate(&b, &a, &stats, 0, 10).unwrap(), 0.0);
    }

    #[test]
    fn smaller_deviation_sum_wins() {
        // deviations over 3 transitions: t1 sums to 3.0, t2 to 1.2
        let stats = stats_with_median(vec![Vec2::ZERO; 3], 3);
        let t1 = from_velocities(
            1,
            &[
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.5),
                Vec2::new(0.5, 0.0),
            ],
        );
        let t2 = from_velocities(
            2,
            &[
                Vec2::new(0.2, 0.0),
                Vec2::new(0.0, 0.5),
                Vec2::new(-0.5, 0.0),
            ],
        );
        assert_eq!(order_pair(&t1, &t2, &stats, 0, 3).unwrap(), (2, 1));
        let s = score_candidate(&t2, &t1, &stats, 0, 3).unwrap();
        assert!((s - 1.8).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let vm = vec![Vec2::new(2.0, -1.0); 10];
        let stats = stats_with_median(vm.clone(), 10);
        let anchor = from_velocities(0, &vm);
        let swing = from_velocities(1, &[Vec2::new(2.0, 1.0); 10]);
        assert_eq!(
            score_candidate(&anchor, &swing, &stats, 0, 10).unwrap(),
            20.0
        );

        let stats = stats_with_median(vec![Vec2::ZERO; 10], 10);
        let anchor = from_velocities(0, &[Vec2::new(0.5, 0.0); 10]);
        let swing = from_velocities(1, &[Vec2::new(0.0, -1.5); 10]);
        assert_eq!(
            score_candidate(&anchor, &swing, &stats, 0, 10).unwrap(),
            10.0
        );
    }

    #[test]
    fn absent_median_rejects_candidate() {
        let mut stats = stats_with_median(vec![Vec2::ZERO; 4], 4);
        stats.median_velocity[2] = None;
        let a = from_velocities(0, &[Vec2::new(1.0, 0.0); 4]);
        let b = from_velocities(1, &[Vec2::new(2.0, 0.0); 4]);
        assert_eq!(
            order_pair(&a, &b, &stats, 0, 4),
            Err(PotError::AbsentMedian(2))
        );
    }

    #[test]
    fn retention_count_is_ceiling() {
        assert_eq!(retained_count(0.15, 10), 2);
        assert_eq!(retained_count(0.15, 20), 3);
        assert_eq!(retained_count(0.15, 1), 1);
        assert_eq!(retained_count(1.0, 7), 7);
        assert_eq!(retained_count(0.5, 0), 0);
    }

    fn five_point_shot() -> (Shot, FrameMotionStats) {
        // five foreground points, distinct constant velocities; 12 frames
        let speeds = [0.0, 1.0, 3.0, 6.0, 10.0];
        let trajectories = speeds
            .iter()
            .enumerate()
            .map(|(i, &s)| from_velocities(i as u64, &[Vec2::new(s, 0.0); 11]))
            .collect();
        let shot = Shot {
            shot_id: 0,
            num_frames: 12,
            trajectories,
            frame_labels: None,
        };
        let stats = crate::ingest::compute_frame_motion_stats(&shot, 10);
        (shot, stats)
    }

    #[test]
    fn ten_pairs_keep_two() {
        let (shot, stats) = five_point_shot();
        // median velocity is 3; deviations per transition: 3, 2, 0, 3, 7
        let cfg = SelectionConfig::default();
        let sel = select_pots(&shot, &stats, &cfg).unwrap();
        assert_eq!(sel.len(), 2);
        for cands in sel.values() {
            // oracle: pair scores |dev_i - dev_j| * 10; best are (2,4)=70, (1,4)=50
            let got: Vec<_> = cands
                .iter()
                .map(|c| (c.anchor_id, c.swing_id, c.score))
                .collect();
            assert_eq!(got, vec![(2, 4, 70.0), (1, 4, 50.0)]);
        }
    }

    #[test]
    fn static_shot_yields_no_pots() {
        let trajectories = (0..4)
            .map(|i| from_velocities(i, &vec![Vec2::ZERO; 14]))
            .collect();
        let shot = Shot {
            shot_id: 0,
            num_frames: 15,
            trajectories,
            frame_labels: None,
        };
        let stats = crate::ingest::compute_frame_motion_stats(&shot, 10);
        let sel = select_pots(&shot, &stats, &SelectionConfig::default()).unwrap();
        assert!(sel.is_empty());
    }

    #[test]
    fn background_only_shot_is_empty_not_error() {
        let t =
            Trajectory::new(0, 0, vec![Vec2::ZERO, Vec2::new(1.0, 0.0)], vec![false; 2]).unwrap();
        let shot = Shot {
            shot_id: 0,
            num_frames: 2,
            trajectories: vec![t],
            frame_labels: None,
        };
        let stats = crate::ingest::compute_frame_motion_stats(&shot, 10);
        assert!(extract_pots(&shot, &stats, &SelectionConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn distance_cap_limits_candidates() {
        let (shot, stats) = five_point_shot();
        let cfg = SelectionConfig {
            max_pair_distance: Some(0.5),
            ..Default::default()
        };
        // all points start at the origin, so frame 0 keeps every pair; frame 1 keeps none
        let sel = select_pots(&shot, &stats, &cfg).unwrap();
        assert_eq!(sel.keys().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn hand_computed_descriptor() {
        let anchor = traj(0, &[Vec2::ZERO; 3]);
        let swing = traj(
            1,
            &[
                Vec2::new(1.0, 0.0),
                Vec2::new(1.1, 0.0),
                Vec2::new(1.2, 0.0),
            ],
        );
        let d = compute_descriptor(&anchor, &swing, 0, 3).unwrap();
        assert_eq!(d.theta, 0.0);
        assert!((d.total_displacement - 0.2).abs() < 1e-12);
        for v in &d.displacements {
            assert!((v.x - 0.5).abs() < 1e-12 && v.y == 0.0);
        }
        assert_eq!(d.flatten().len(), 5);
    }

    #[test]
    fn rigid_pair_is_degenerate() {
        let a = traj(0, &[Vec2::ZERO, Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)]);
        let b = traj(
            1,
            &[
                Vec2::new(3.0, 0.0),
                Vec2::new(4.0, 1.0),
                Vec2::new(5.0, 2.0),
            ],
        );
        assert!(matches!(
            compute_descriptor(&a, &b, 0, 3),
            Err(PotError::Degenerate(_))
        ));
    }

    #[test]
    fn theta_is_in_half_open_range() {
        let a = traj(0, &[Vec2::ZERO, Vec2::ZERO]);
        let b = traj(1, &[Vec2::new(-1.0, 0.0), Vec2::new(-2.0, 0.0)]);
        let d = compute_descriptor(&a, &b, 0, 2).unwrap();
        assert_eq!(d.theta, -std::f64::consts::PI);
    }

    #[test]
    fn ts_uniform_motion() {
        let t = from_velocities(0, &[Vec2::new(1.0, 0.0); 9]);
        let d = compute_ts_descriptor(&t, 0, 10).unwrap();
        assert_eq!(d.len(), 18);
        for pair in d.chunks(2) {
            assert!((pair[0] - 1.0 / 9.0).abs() < 1e-15 && pair[1] == 0.0);
        }
    }

    #[test]
    fn ts_reversing_motion_keeps_signs() {
        let mut v = vec![Vec2::new(1.0, 0.0); 4];
        v.extend(vec![Vec2::new(-1.0, 0.0); 5]);
        let d = compute_ts_descriptor(&from_velocities(0, &v), 0, 10).unwrap();
        for (k, pair) in d.chunks(2).enumerate() {
            let expected = if k < 4 { 1.0 / 9.0 } else { -1.0 / 9.0 };
            assert!((pair[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn ts_static_is_degenerate() {
        let t = traj(0, &[Vec2::new(3.0, 3.0); 10]);
        assert!(matches!(
            compute_ts_descriptor(&t, 0, 10),
            Err(PotError::Degenerate(_))
        ));
        assert!(matches!(
            compute_ts_descriptor(&t, 1, 10),
            Err(PotError::NotCovered { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SelectionConfig::default().validate().is_ok());
        assert_eq!(SelectionConfig::default().descriptor_dim(), 19);
        for bad in [
            SelectionConfig {
                n: 1,
                ..Default::default()
            },
            SelectionConfig {
                theta_p: 0.0,
                ..Default::default()
            },
            SelectionConfig {
                theta_p: 1.5,
                ..Default::default()
            },
            SelectionConfig {
                theta_f: -0.1,
                ..Default::default()
            },
            SelectionConfig {
                theta_f: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn dump_round_trip() {
        let recs = vec![
            PotRecord {
                shot_id: 3,
                start_frame: 17,
                anchor_id: 2,
                swing_id: 11,
                score: 12.5,
                descriptor: vec![-3.0, 0.1, 0.2, 0.3, 0.4],
            },
            PotRecord {
                shot_id: 4,
                start_frame: 0,
                anchor_id: 0,
                swing_id: 1,
                score: 0.0,
                descriptor: vec![1.0, 0.5, -0.5],
            },
        ];
        let text = format_pots(&recs);
        assert!(text.starts_with("pot 3 17 2 11 12.5 -3 0.1 0.2"));
        assert_eq!(parse_pots(&text).unwrap(), recs);

        let ts = vec![TsRecord {
            shot_id: 1,
            start_frame: 2,
            trajectory_id: 3,
            descriptor: vec![0.5, 0.0, -0.5, 0.0],
        }];
        assert_eq!(parse_ts(&format_ts(&ts)).unwrap(), ts);
        assert!(matches!(
            parse_pots("pot 1 2 3\n"),
            Err(PotError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_pots("ts 1 2 3 4 5 6\n"),
            Err(PotError::Parse { .. })
        ));
    }
}
