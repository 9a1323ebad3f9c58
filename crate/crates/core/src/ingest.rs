//! Trajectory data model, the line-oriented dataset format, and per-frame
//! foreground motion statistics.
//!
//! A dataset file is a sequence of shots:
//!
//! ```text
//! shot <shot_id> <num_frames>
//! traj <id> <start_frame> <x0> <y0> <fg0> <x1> <y1> <fg1> ...
//! labels <l0> <l1> ... <l_{num_frames-1}>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geom::Vec2;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("shot {shot_id}: {message}")]
    Validation { shot_id: u64, message: String },
    #[error("invalid trajectory {id}: {message}")]
    Trajectory { id: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A tracked point over a contiguous frame range.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: u64,
    start_frame: usize,
    points: Vec<Vec2>,
    fg: Vec<bool>,
}

impl Trajectory {
    pub fn new(
        id: u64,
        start_frame: usize,
        points: Vec<Vec2>,
        fg: Vec<bool>,
    ) -> Result<Self, IngestError> {
        let bad = |message: String| IngestError::Trajectory { id, message };
        if points.len() < 2 {
            return Err(bad(format!(
                "needs at least 2 points, got {}",
                points.len()
            )));
        }
        if fg.len() != points.len() {
            return Err(bad(format!(
                "{} foreground flags for {} points",
                fg.len(),
                points.len()
            )));
        }
        if let Some(k) = points.iter().position(|p| !p.is_finite()) {
            return Err(bad(format!("non-finite coordinate at offset {k}")));
        }
        Ok(Self {
            id,
            start_frame,
            points,
            fg,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn start_frame(&self) -> usize {
        self.start_frame
    }

    /// One past the last frame.
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.points.len()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn fg(&self) -> &[bool] {
        &self.fg
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, frame: usize) -> Option<Vec2> {
        frame
            .checked_sub(self.start_frame)
            .and_then(|k| self.points.get(k).copied())
    }

    pub fn is_fg(&self, frame: usize) -> bool {
        frame
            .checked_sub(self.start_frame)
            .and_then(|k| self.fg.get(k).copied())
            .unwrap_or(false)
    }

    /// Velocity over transition `frame -> frame + 1`.
    pub fn velocity(&self, frame: usize) -> Option<Vec2> {
        Some(self.position(frame + 1)? - self.position(frame)?)
    }

    /// True when the trajectory exists and is foreground on every frame of
    /// `[first, last]`.
    pub fn fg_throughout(&self, first: usize, last: usize) -> bool {
        first >= self.start_frame
            && last < self.end_frame()
            && self.fg[first - self.start_frame..=last - self.start_frame]
                .iter()
                .all(|&f| f)
    }

    /// Applies `f` to every point, keeping ids and flags.
    pub fn map_points(&self, f: impl Fn(usize, Vec2) -> Vec2) -> Self {
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(k, &p)| f(self.start_frame + k, p))
            .collect();
        Self {
            points,
            ..self.clone()
        }
    }
}

/// A contiguous video segment: the unit every stage processes independently.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub shot_id: u64,
    pub num_frames: usize,
    pub trajectories: Vec<Trajectory>,
    /// Ground-truth behavior label per frame, when known.
    pub frame_labels: Option<Vec<String>>,
}

impl Shot {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |message: String| IngestError::Validation {
            shot_id: self.shot_id,
            message,
        };
        let mut ids = HashSet::with_capacity(self.trajectories.len());
        for t in &self.trajectories {
            if !ids.insert(t.id()) {
                return Err(bad(format!("duplicate trajectory id {}", t.id())));
            }
            if t.end_frame() > self.num_frames {
                return Err(bad(format!(
                    "trajectory {} spans frames [{}, {}) beyond {} frames",
                    t.id(),
                    t.start_frame(),
                    t.end_frame(),
                    self.num_frames
                )));
            }
        }
        if let Some(labels) = &self.frame_labels {
            if labels.len() != self.num_frames {
                return Err(bad(format!(
                    "{} labels for {} frames",
                    labels.len(),
                    self.num_frames
                )));
            }
            if let Some(l) = labels
                .iter()
                .find(|l| l.is_empty() || l.chars().any(char::is_whitespace))
            {
                return Err(bad(format!("label {l:?} is empty or contains whitespace")));
            }
        }
        Ok(())
    }

    pub fn trajectory(&self, id: u64) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id() == id)
    }

    pub fn has_foreground(&self) -> bool {
        self.trajectories.iter().any(|t| t.fg().iter().any(|&f| f))
    }
}

pub fn parse_dataset(text: &str) -> Result<Vec<Shot>, IngestError> {
    let mut shots: Vec<Shot> = Vec::new();
    let mut shot_ids = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| IngestError::Parse { line, message };
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut fields = raw.split_ascii_whitespace();
        let tag = fields.next().unwrap_or_default();
        match tag {
            "shot" => {
                let shot_id: u64 = parse_field(fields.next(), "shot id", line)?;
                let num_frames: usize = parse_field(fields.next(), "frame count", line)?;
                if fields.next().is_some() {
                    return Err(err("trailing fields after shot header".into()));
                }
                if !shot_ids.insert(shot_id) {
                    return Err(err(format!("duplicate shot id {shot_id}")));
                }
                if let Some(prev) = shots.last() {
                    prev.validate()?;
                }
                shots.push(Shot {
                    shot_id,
                    num_frames,
                    trajectories: Vec::new(),
                    frame_labels: None,
                });
            }
            "traj" => {
                let shot = shots
                    .last_mut()
                    .ok_or_else(|| err("trajectory before any shot header".into()))?;
                let id: u64 = parse_field(fields.next(), "trajectory id", line)?;
                let start: usize = parse_field(fields.next(), "start frame", line)?;
                let rest: Vec<&str> = fields.collect();
                if !rest.len().is_multiple_of(3) {
                    return Err(err(format!(
                        "trajectory {id}: {} values is not a multiple of (x, y, fg)",
                        rest.len()
                    )));
                }
                let mut points = Vec::with_capacity(rest.len() / 3);
                let mut fg = Vec::with_capacity(rest.len() / 3);
                for chunk in rest.chunks_exact(3) {
                    let x: f64 = parse_field(Some(chunk[0]), "x coordinate", line)?;
                    let y: f64 = parse_field(Some(chunk[1]), "y coordinate", line)?;
                    if !(x.is_finite() && y.is_finite()) {
                        return Err(err(format!("trajectory {id}: non-finite coordinate")));
                    }
                    points.push(Vec2::new(x, y));
                    fg.push(match chunk[2] {
                        "0" => false,
                        "1" => true,
                        other => {
                            return Err(err(format!(
                                "foreground flag must be 0 or 1, got {other:?}"
                            )))
                        }
                    });
                }
                let traj =
                    Trajectory::new(id, start, points, fg).map_err(|e| err(e.to_string()))?;
                shot.trajectories.push(traj);
            }
            "labels" => {
                let shot = shots
                    .last_mut()
                    .ok_or_else(|| err("labels before any shot header".into()))?;
                if shot.frame_labels.is_some() {
                    return Err(err("duplicate labels line".into()));
                }
                shot.frame_labels = Some(fields.map(str::to_owned).collect());
            }
            other => return Err(err(format!("unknown record type {other:?}"))),
        }
    }
    if let Some(last) = shots.last() {
        last.validate()?;
    }
    Ok(shots)
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    what: &str,
    line: usize,
) -> Result<T, IngestError> {
    let field = field.ok_or_else(|| IngestError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    field.parse().map_err(|_| IngestError::Parse {
        line,
        message: format!("invalid {what} {field:?}"),
    })
}

/// Serializes shots. Coordinates use the shortest representation that parses
/// back to the same `f64`, so `parse_dataset(format_dataset(d)) == d`.
pub fn format_dataset(shots: &[Shot]) -> String {
    let mut out = String::new();
    for shot in shots {
        let _ = writeln!(out, "shot {} {}", shot.shot_id, shot.num_frames);
        for t in &shot.trajectories {
            let _ = write!(out, "traj {} {}", t.id(), t.start_frame());
            for (p, &f) in t.points().iter().zip(t.fg()) {
                let _ = write!(out, " {} {} {}", p.x, p.y, u8::from(f));
            }
            out.push('\n');
        }
        if let Some(labels) = &shot.frame_labels {
            out.push_str("labels");
            for l in labels {
                out.push(' ');
                out.push_str(l);
            }
            out.push('\n');
        }
    }
    out
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Shot>, IngestError> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn save_dataset(path: impl AsRef<Path>, shots: &[Shot]) -> Result<(), IngestError> {
    for shot in shots {
        shot.validate()?;
    }
    fs::write(path, format_dataset(shots))?;
    Ok(())
}

/// Per-frame statistics of foreground motion.
///
/// Transition `k` is the step from frame `k` to frame `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMotionStats {
    /// PoT window length the articulation score was computed with.
    pub window: usize,
    /// Component-wise median foreground velocity per transition; `None` when no
    /// trajectory is foreground on both ends of the transition.
    pub median_velocity: Vec<Option<Vec2>>,
    /// Standard deviation of foreground speeds divided by their mean.
    pub sigma: Vec<f64>,
    /// `articulation_score[f]` is the mean of `sigma[f..f + window]`.
    pub articulation_score: Vec<f64>,
}

impl FrameMotionStats {
    pub fn num_transitions(&self) -> usize {
        self.sigma.len()
    }

    /// Dispersion attributed to a frame: the smaller of the dispersions of the
    /// transitions entering and leaving it. A frame is at rest if the object
    /// did not move either into or out of it.
    pub fn frame_dispersion(&self, frame: usize) -> f64 {
        let t = self.sigma.len();
        if t == 0 {
            return 0.0;
        }
        let leaving = self.sigma.get(frame).copied();
        let entering = frame
            .checked_sub(1)
            .and_then(|k| self.sigma.get(k).copied());
        match (entering, leaving) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        }
    }

    /// Whether a PoT window starting at `f` is pruned for lack of articulated motion.
    pub fn is_pruned(&self, f: usize, theta_f: f64) -> bool {
        self.articulation_score.get(f).is_none_or(|&s| s < theta_f)
    }
}

/// Lower middle element after sorting (the lower of the two middle values for
/// even counts). Returns `None` for empty input.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mid = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*m)
}

pub fn compute_frame_motion_stats(shot: &Shot, n: usize) -> FrameMotionStats {
    assert!(n >= 1, "window length must be positive");
    let transitions = shot.num_frames.saturating_sub(1);
    let mut median_velocity = Vec::with_capacity(transitions);
    let mut sigma = Vec::with_capacity(transitions);

    let mut vx = Vec::new();
    let mut vy = Vec::new();
    let mut speeds = Vec::new();
    for k in 0..transitions {
        vx.clear();
        vy.clear();
        speeds.clear();
        for t in &shot.trajectories {
            if t.is_fg(k) && t.is_fg(k + 1) {
                // both frames exist since both are flagged
                let v = t.velocity(k).expect("flagged frames exist");
                vx.push(v.x);
                vy.push(v.y);
                speeds.push(v.norm());
            }
        }
        match (lower_median(&mut vx), lower_median(&mut vy)) {
            (Some(mx), Some(my)) => {
                median_velocity.push(Some(Vec2::new(mx, my)));
                sigma.push(normalized_dispersion(&speeds));
            }
            _ => {
                median_velocity.push(None);
                sigma.push(0.0);
            }
        }
    }

    // Summed per window rather than with a running sum so identical sigmas
    // give exactly that sigma back.
    let articulation_score = sigma
        .windows(n)
        .map(|w| w.iter().sum::<f64>() / n as f64)
        .collect();

    FrameMotionStats {
        window: n,
        median_velocity,
        sigma,
        articulation_score,
    }
}

/// Population standard deviation over mean; zero when the mean is zero.
fn normalized_dispersion(speeds: &[f64]) -> f64 {
    let count = speeds.len() as f64;
    let mean = speeds.iter().sum::<f64>() / count;
    if mean <= 0.0 {
        return 0.0;
    }
    let var = speeds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / count;
    var.sqrt() / mean
}

/// Text dump of per-shot motion statistics:
/// `motion <shot_id> <k> <vx> <vy> <sigma> <s>` with `-` for absent values.
pub fn format_stats(shot_id: u64, stats: &FrameMotionStats) -> String {
    let mut out = String::new();
    for (k, (v, s)) in stats.median_velocity.iter().zip(&stats.sigma).enumerate() {
        let _ = write!(out, "motion {shot_id} {k} ");
        match v {
            Some(v) => {
                let _ = write!(out, "{} {}", v.x, v.y);
            }
            None => out.push_str("- -"),
        }
        let _ = write!(out, " {s} ");
        match stats.articulation_score.get(k) {
            Some(a) => {
                let _ = writeln!(out, "{a}");
            }
            None => out.push_str("-\n"),
        }
    }
    out
}
