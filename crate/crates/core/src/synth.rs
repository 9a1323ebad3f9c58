//! Synthetic side-view articulated skeletons performing scripted behaviors.
//!
//! The skeleton has a rigid torso (3 points), a neck/head chain (3 points)
//! and two legs of two segments each (mid-thigh, knee and foot points), 12
//! foreground trajectories in total. Behaviors are joint-angle programs:
//!
//! - `walk`: legs swing in antiphase about a translating torso, the head bobs;
//! - `run`: the same with a shorter period, larger swing and higher speed;
//! - `turn-head`: the head chain rotates about the neck base on a smooth ramp;
//! - `stretch`: the front leg lifts forward and back once;
//! - `still`: no motion; the observed positions are frozen, noise included.
//!
//! Positions get Gaussian jitter every moving frame. Background distractor
//! trajectories are flagged as not foreground.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::ingest::{Shot, Trajectory};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    Walk,
    Run,
    TurnHead,
    Stretch,
    Still,
}

impl Behavior {
    pub const ALL: [Behavior; 5] = [
        Behavior::Walk,
        Behavior::Run,
        Behavior::TurnHead,
        Behavior::Stretch,
        Behavior::Still,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Behavior::Walk => "walk",
            Behavior::Run => "run",
            Behavior::TurnHead => "turn-head",
            Behavior::Stretch => "stretch",
            Behavior::Still => "still",
        }
    }

    fn is_periodic(self) -> bool {
        matches!(self, Behavior::Walk | Behavior::Run)
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Behavior {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Behavior::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| SynthError::Invalid(format!("unknown behavior {s:?}")))
    }
}

/// One scripted behavior. Unset parameters take the behavior's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub behavior: Behavior,
    pub duration: usize,
    /// Cycle length in frames (walk, run).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Joint swing amplitude in radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Forward speed in pixels per frame at unit scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
}

impl Segment {
    pub fn new(behavior: Behavior, duration: usize) -> Self {
        Self {
            behavior,
            duration,
            period: None,
            amplitude: None,
            velocity: None,
        }
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }

    fn period(&self) -> f64 {
        self.period.unwrap_or(match self.behavior {
            Behavior::Run => 6.0,
            _ => 10.0,
        })
    }

    fn amplitude(&self) -> f64 {
        self.amplitude.unwrap_or(match self.behavior {
            Behavior::Walk => 0.45,
            Behavior::Run => 0.8,
            Behavior::TurnHead => 0.9,
            Behavior::Stretch => 1.2,
            Behavior::Still => 0.0,
        })
    }

    fn velocity(&self) -> f64 {
        self.velocity.unwrap_or(match self.behavior {
            Behavior::Walk => 2.0,
            Behavior::Run => 4.5,
            _ => 0.0,
        })
    }
}

/// Segment lengths of the skeleton at unit scale, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Skeleton {
    pub torso: f64,
    pub neck: f64,
    pub head: f64,
    pub thigh: f64,
    pub shin: f64,
}

impl Default for Skeleton {
    fn default() -> Self {
        Self {
            torso: 24.0,
            neck: 10.0,
            head: 6.0,
            thigh: 14.0,
            shin: 14.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Background {
    pub count: usize,
    /// Pixels per frame.
    pub velocity: [f64; 2],
}

impl Default for Background {
    fn default() -> Self {
        Self {
            count: 4,
            velocity: [-1.5, 0.0],
        }
    }
}

/// Everything needed to generate one shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorScript {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub skeleton: Skeleton,
    /// Positional jitter standard deviation in pixels.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub background: Background,
    /// Skeleton scale range; each shot draws its scale uniformly from it.
    #[serde(default = "default_scale")]
    pub scale: [f64; 2],
}

fn default_noise() -> f64 {
    0.3
}

fn default_scale() -> [f64; 2] {
    [0.5, 2.0]
}

impl BehaviorScript {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self {
            segments,
            skeleton: Skeleton::default(),
            noise: default_noise(),
            background: Background::default(),
            scale: default_scale(),
        }
    }

    pub fn num_frames(&self) -> usize {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.segments.is_empty() {
            return bad("script has no segments".into());
        }
        for s in &self.segments {
            if s.duration < 1 {
                return bad(format!("{} segment has zero duration", s.behavior));
            }
            if s.behavior.is_periodic() && !(s.period() >= 2.0) {
                return bad(format!(
                    "{} period must be >= 2, got {}",
                    s.behavior,
                    s.period()
                ));
            }
        }
        if self.num_frames() < 2 {
            return bad("script must span at least 2 frames".into());
        }
        if !(self.noise >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if !(self.scale[0] > 0.0 && self.scale[0] <= self.scale[1]) {
            return bad(format!("invalid scale range {:?}", self.scale));
        }
        Ok(())
    }
}

/// Skeleton part a foreground trajectory belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Torso,
    Head,
    Leg,
}

pub const NUM_SKELETON_POINTS: u64 = 12;
/// Background trajectories are numbered from here.
pub const BACKGROUND_ID_BASE: u64 = 100;

/// Part of the skeleton carrying trajectory `id`, `None` for background.
pub fn skeleton_part(id: u64) -> Option<Part> {
    match id {
        0..=2 => Some(Part::Torso),
        3..=5 => Some(Part::Head),
        6..=11 => Some(Part::Leg),
        _ => None,
    }
}

/// Joint configuration in body coordinates (y up, hip at the origin).
#[derive(Debug, Clone, Copy, Default)]
struct Pose {
    root_x: f64,
    /// Hip angles from straight down, positive forward.
    hip: [f64; 2],
    /// Knee flexion, positive bends the shin backwards.
    knee: [f64; 2],
    /// Head-chain rotation about the neck base, positive forward.
    neck: f64,
}

const STANCE: f64 = 0.15;

impl Pose {
    fn neutral(root_x: f64) -> Self {
        Self {
            root_x,
            hip: [STANCE, -STANCE],
            knee: [0.1, 0.1],
            neck: 0.0,
        }
    }

    /// The 12 skeleton points in body coordinates, ordered by trajectory id.
    fn points(&self, sk: &Skeleton) -> [Vec2; 12] {
        let down = |angle: f64| Vec2::new(angle.sin(), -angle.cos());
        let neck_base = Vec2::new(0.0, sk.torso);
        // forward tilt is a clockwise rotation in y-up coordinates
        let head = |p: Vec2| neck_base + p.rotate(-self.neck);
        let mut out = [Vec2::ZERO; 12];
        out[0] = Vec2::new(0.0, 0.3 * sk.torso);
        out[1] = Vec2::new(0.0, 0.65 * sk.torso);
        out[2] = Vec2::new(0.0, sk.torso);
        out[3] = head(Vec2::new(0.0, 0.5 * sk.neck));
        out[4] = head(Vec2::new(0.0, sk.neck));
        out[5] = head(Vec2::new(sk.head, sk.neck));
        for leg in 0..2 {
            let thigh = down(self.hip[leg]);
            let knee = thigh * sk.thigh;
            let foot = knee + down(self.hip[leg] - self.knee[leg]) * sk.shin;
            out[6 + 3 * leg] = thigh * (0.5 * sk.thigh);
            out[7 + 3 * leg] = knee;
            out[8 + 3 * leg] = foot;
        }
        for p in &mut out {
            p.x += self.root_x;
        }
        out
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Body pose at `t` frames into `seg`, with the body at `root_x` when the
/// segment started.
fn program(seg: &Segment, t: usize, root_x: f64, scale: f64, phase: f64, head_dir: f64) -> Pose {
    let t = t as f64;
    let d = seg.duration as f64;
    match seg.behavior {
        Behavior::Walk | Behavior::Run => {
            let psi = TAU * t / seg.period() + phase;
            let a = seg.amplitude();
            let bend = if seg.behavior == Behavior::Run {
                0.9
            } else {
                0.5
            };
            let knee = |p: f64| bend * (0.5 + 0.5 * (p + 1.0).sin());
            Pose {
                root_x: root_x + seg.velocity() * scale * t,
                hip: [a * psi.sin(), a * (psi + PI).sin()],
                knee: [knee(psi), knee(psi + PI)],
                neck: 0.2 * (2.0 * psi).sin(),
            }
        }
        Behavior::TurnHead => Pose {
            neck: head_dir * seg.amplitude() * smoothstep(t / (d - 1.0).max(1.0)),
            ..Pose::neutral(root_x)
        },
        Behavior::Stretch => {
            let mut p = Pose::neutral(root_x);
            let lift = (PI * t / (d - 1.0).max(1.0)).sin();
            p.hip[0] = STANCE + seg.amplitude() * lift;
            p.knee[0] = 0.1 * (1.0 - lift);
            p
        }
        Behavior::Still => Pose::neutral(root_x),
    }
}

/// Generates a shot from a script. Deterministic given `seed`; the shot id is 0.
pub fn generate_shot(script: &BehaviorScript, seed: u64) -> Result<Shot, SynthError> {
    script.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = script.num_frames();
    let sk = &script.skeleton;
    let scale = if script.scale[0] < script.scale[1] {
        rng.random_range(script.scale[0]..=script.scale[1])
    } else {
        script.scale[0]
    };
    let origin = Vec2::new(
        rng.random_range(80.0..160.0),
        rng.random_range(180.0..240.0),
    );
    let jitter = Normal::new(0.0, script.noise).expect("validated noise");

    let mut tracks: Vec<Vec<Vec2>> = vec![Vec::with_capacity(n); NUM_SKELETON_POINTS as usize];
    let mut labels = Vec::with_capacity(n);
    let mut root_x = 0.0;
    let mut last_pose = Pose::neutral(0.0);
    for seg in &script.segments {
        let phase = rng.random_range(0.0..TAU);
        let head_dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut frozen: Option<Vec<Vec2>> = None;
        for t in 0..seg.duration {
            labels.push(seg.behavior.name().to_owned());
            if seg.behavior == Behavior::Still {
                if frozen.is_none() {
                    // held where the body last was, so the first still frame is the pause onset
                    frozen = Some(observe(&last_pose, sk, scale, origin, &jitter, &mut rng));
                }
                for (track, p) in tracks.iter_mut().zip(frozen.as_ref().expect("set above")) {
                    track.push(*p);
                }
                continue;
            }
            let pose = program(seg, t, root_x, scale, phase, head_dir);
            for (track, p) in tracks
                .iter_mut()
                .zip(observe(&pose, sk, scale, origin, &jitter, &mut rng))
            {
                track.push(p);
            }
            last_pose = pose;
        }
        if seg.behavior != Behavior::Still {
            root_x = last_pose.root_x + seg.velocity() * scale;
        }
    }

    let mut trajectories: Vec<Trajectory> = tracks
        .into_iter()
        .enumerate()
        .map(|(id, pts)| {
            Trajectory::new(id as u64, 0, pts, vec![true; n]).expect("script spans >= 2 frames")
        })
        .collect();

    let bg_velocity = Vec2::new(script.background.velocity[0], script.background.velocity[1]);
    for b in 0..script.background.count {
        let start = rng.random_range(0..=n / 3);
        let end = rng.random_range((2 * n / 3).max(start + 2)..=n);
        let mut p = Vec2::new(rng.random_range(0.0..400.0), rng.random_range(20.0..300.0));
        let mut pts = Vec::with_capacity(end - start);
        for _ in start..end {
            pts.push(quantize(
                p + Vec2::new(jitter.sample(&mut rng), jitter.sample(&mut rng)),
            ));
            p += bg_velocity;
        }
        let len = pts.len();
        trajectories.push(
            Trajectory::new(BACKGROUND_ID_BASE + b as u64, start, pts, vec![false; len])
                .expect("background spans >= 2 frames"),
        );
    }

    Ok(Shot {
        shot_id: 0,
        num_frames: n,
        trajectories,
        frame_labels: Some(labels),
    })
}

/// Image coordinates (y down) of a pose, with jitter, rounded to 6 decimals.
fn observe(
    pose: &Pose,
    sk: &Skeleton,
    scale: f64,
    origin: Vec2,
    jitter: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec2> {
    pose.points(sk)
        .iter()
        .map(|b| {
            // root_x already carries the scale
            let body = Vec2::new(pose.root_x + (b.x - pose.root_x) * scale, b.y * scale);
            let p = Vec2::new(origin.x + body.x, origin.y - body.y);
            quantize(p + Vec2::new(jitter.sample(rng), jitter.sample(rng)))
        })
        .collect()
}

fn quantize(p: Vec2) -> Vec2 {
    let q = |v: f64| (v * 1e6).round() / 1e6;
    Vec2::new(q(p.x), q(p.y))
}

/// A multi-shot dataset description: shared settings plus a list of scenarios
/// that shots cycle through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub skeleton: Skeleton,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub background: Background,
    #[serde(default = "default_scale")]
    pub scale: [f64; 2],
    /// Relative per-shot randomization of segment durations and periods.
    #[serde(default)]
    pub variation: f64,
    pub scenario: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub segments: Vec<Segment>,
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.scenario.is_empty() {
            return Err(SynthError::Invalid("no scenarios".into()));
        }
        if !(0.0..0.5).contains(&self.variation) {
            return Err(SynthError::Invalid(format!(
                "variation must be in [0, 0.5), got {}",
                self.variation
            )));
        }
        for s in &self.scenario {
            self.script(s.segments.clone()).validate()?;
        }
        Ok(())
    }

    fn script(&self, segments: Vec<Segment>) -> BehaviorScript {
        BehaviorScript {
            segments,
            skeleton: self.skeleton,
            noise: self.noise,
            background: self.background,
            scale: self.scale,
        }
    }

    /// Script for shot `index`, with durations and periods randomized.
    pub fn shot_script(&self, index: usize, rng: &mut impl Rng) -> BehaviorScript {
        let base = &self.scenario[index % self.scenario.len()];
        let v = self.variation;
        let segments = base
            .segments
            .iter()
            .map(|s| {
                let mut s = *s;
                if v > 0.0 {
                    // pauses keep their exact length
                    if s.behavior != Behavior::Still {
                        let f = rng.random_range(1.0 - v..=1.0 + v);
                        s.duration = ((s.duration as f64 * f).round() as usize).max(1);
                    }
                    if s.behavior.is_periodic() {
                        let f = rng.random_range(1.0 - v / 2.0..=1.0 + v / 2.0);
                        s.period = Some((s.period() * f).max(2.0));
                    }
                }
                s
            })
            .collect();
        self.script(segments)
    }

    /// Generates `shots` shots with ids `0..shots`.
    pub fn generate(&self, shots: usize, seed: u64) -> Result<Vec<Shot>, SynthError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..shots)
            .map(|i| {
                let script = self.shot_script(i, &mut rng);
                let shot_seed = rng.random::<u64>();
                let mut shot = generate_shot(&script, shot_seed)?;
                shot.shot_id = i as u64;
                Ok(shot)
            })
            .collect()
    }

    /// Five behaviors in ten scenarios, with and without pauses between them.
    pub fn benchmark() -> Self {
        use Behavior::*;
        let s = |b, d| Segment::new(b, d);
        let scenario = |segments: Vec<Segment>| Scenario { segments };
        Self {
            skeleton: Skeleton::default(),
            noise: default_noise(),
            background: Background::default(),
            scale: default_scale(),
            variation: 0.15,
            scenario: vec![
                scenario(vec![s(Walk, 90)]),
                scenario(vec![s(Run, 70)]),
                scenario(vec![s(Walk, 70), s(Still, 5), s(TurnHead, 40)]),
                scenario(vec![s(Run, 60), s(Still, 4), s(Stretch, 40)]),
                scenario(vec![s(TurnHead, 40), s(Still, 6), s(Walk, 70)]),
                scenario(vec![s(Stretch, 40), s(Still, 5), s(Run, 60)]),
                scenario(vec![s(Walk, 70), s(Run, 60)]),
                scenario(vec![s(Still, 15), s(Walk, 60), s(Still, 4), s(Stretch, 40)]),
                scenario(vec![s(TurnHead, 40), s(Still, 3), s(Stretch, 40)]),
                scenario(vec![s(Run, 60), s(Still, 5), s(Walk, 70)]),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{compute_frame_motion_stats, format_dataset, parse_dataset};

    #[test]
    fn still_script_has_no_motion() {
        let shot = generate_shot(
            &BehaviorScript::new(vec![Segment::new(Behavior::Still, 30)]),
            1,
        )
        .unwrap();
        for t in shot
            .trajectories
            .iter()
            .filter(|t| t.id() < NUM_SKELETON_POINTS)
        {
            assert!((0..29).all(|k| t.velocity(k) == Some(Vec2::ZERO)));
        }
        let stats = compute_frame_motion_stats(&shot, 10);
        assert!(stats.sigma.iter().all(|&s| s == 0.0));
        assert!(shot.frame_labels.unwrap().iter().all(|l| l == "still"));
    }

    #[test]
    fn walk_repeats_with_its_period() {
        let mut script =
            BehaviorScript::new(vec![Segment::new(Behavior::Walk, 80).with_period(8.0)]);
        script.scale = [1.0, 1.0];
        script.noise = 0.0;
        let shot = generate_shot(&script, 3).unwrap();
        let v_global = 2.0;
        for t in shot
            .trajectories
            .iter()
            .filter(|t| t.id() < NUM_SKELETON_POINTS)
        {
            for k in 0..72 {
                let dx = t.points()[k + 8].x - t.points()[k].x;
                let dy = t.points()[k + 8].y - t.points()[k].y;
                assert!(
                    (dx - 8.0 * v_global).abs() < 1e-5,
                    "traj {} frame {k}: {dx}",
                    t.id()
                );
                assert!(dy.abs() < 1e-5);
            }
        }
    }

    #[test]
    fn same_seed_same_shot() {
        let script = BehaviorScript::new(vec![
            Segment::new(Behavior::Walk, 30),
            Segment::new(Behavior::Still, 4),
            Segment::new(Behavior::TurnHead, 20),
        ]);
        let a = generate_shot(&script, 99).unwrap();
        let b = generate_shot(&script, 99).unwrap();
        assert_eq!(
            format_dataset(std::slice::from_ref(&a)),
            format_dataset(&[b])
        );
        assert_ne!(a, generate_shot(&script, 100).unwrap());
    }

    #[test]
    fn coordinates_survive_the_file_format() {
        let shots = SynthConfig::benchmark().generate(3, 5).unwrap();
        for shot in &shots {
            shot.validate().unwrap();
            assert_eq!(shot.trajectories.len(), 16);
        }
        assert_eq!(parse_dataset(&format_dataset(&shots)).unwrap(), shots);
    }

    #[test]
    fn labels_follow_the_script() {
        let script = BehaviorScript::new(vec![
            Segment::new(Behavior::Run, 12),
            Segment::new(Behavior::Stretch, 8),
        ]);
        let shot = generate_shot(&script, 0).unwrap();
        let labels = shot.frame_labels.unwrap();
        assert_eq!(labels.len(), 20);
        assert!(labels[..12].iter().all(|l| l == "run"));
        assert!(labels[12..].iter().all(|l| l == "stretch"));
    }

    #[test]
    fn torso_follows_median_and_legs_deviate() {
        let script = BehaviorScript::new(vec![Segment::new(Behavior::Walk, 60)]);
        let shot = generate_shot(&script, 8).unwrap();
        let stats = compute_frame_motion_stats(&shot, 10);
        let dev = |id: u64| -> f64 {
            let t = shot.trajectory(id).unwrap();
            (0..59)
                .map(|k| (t.velocity(k).unwrap() - stats.median_velocity[k].unwrap()).norm())
                .fold(0.0, f64::max)
        };
        for id in 0..3 {
            // noise on two frames, 5 standard deviations per coordinate
            assert!(
                dev(id) < 2.0 * 5.0 * 0.3 * 2f64.sqrt(),
                "torso {id}: {}",
                dev(id)
            );
        }
        for id in [8, 11] {
            assert!(dev(id) > 3.0, "foot {id}: {}", dev(id));
        }
    }

    #[test]
    fn invalid_scripts() {
        assert!(BehaviorScript::new(vec![]).validate().is_err());
        assert!(BehaviorScript::new(vec![Segment::new(Behavior::Walk, 0)])
            .validate()
            .is_err());
        assert!(
            BehaviorScript::new(vec![Segment::new(Behavior::Walk, 10).with_period(1.0)])
                .validate()
                .is_err()
        );
        assert!(BehaviorScript::new(vec![Segment::new(Behavior::Still, 1)])
            .validate()
            .is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = SynthConfig::benchmark();
        let back = SynthConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let text = r#"
            noise = 0.2
            [[scenario]]
            segments = [
              { behavior = "walk", duration = 40, period = 8 },
              { behavior = "still", duration = 5 },
              { behavior = "turn-head", duration = 20 },
            ]
        "#;
        let cfg = SynthConfig::from_toml(text).unwrap();
        assert_eq!(cfg.scenario[0].segments[0].period, Some(8.0));
        assert_eq!(cfg.background, Background::default());
        assert!(SynthConfig::from_toml("noise = 0.1\nscenario = []\n").is_err());
        assert!("jump".parse::<Behavior>().is_err());
    }
}
