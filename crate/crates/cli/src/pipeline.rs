//! Stage implementations and the end-to-end orchestrator.
//!
//! Stages communicate only through the files in the artifacts directory; every
//! stage can also be run on its own from the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use potminer::cluster::{
    interval_distance, linkage, multichannel_distance, ClusterFile, DistanceConfig, DistanceMatrix,
};
use potminer::codebook::{build_codebook, format_codebook, quantize};
use potminer::eval::{
    ari, count_intervals_per_behavior, majority_label, mean_uniformity, purity, MetricsRow,
};
use potminer::ingest::{compute_frame_motion_stats, format_stats, load_dataset};
use potminer::partition::{format_intervals, partition_shot, Indexing};
use potminer::pot::{extract_pots, extract_ts, format_pots, format_ts, PotRecord, TsRecord};
use potminer::{
    bow, BowHistogram, Codebook, FrameMotionStats, Interval, KMeansConfig, PartitionConfig,
    SelectionConfig, Shot,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Channel, KRange, PipelineConfig};
use crate::report;

pub const CONFIG: &str = "config.toml";
pub const STATS: &str = "stats.txt";
pub const POTS: &str = "pots.txt";
pub const TS: &str = "ts.txt";
pub const CODEBOOK: &str = "codebook.cb";
pub const TS_CODEBOOK: &str = "ts_codebook.cb";
pub const INTERVALS: &str = "intervals.txt";
pub const CLUSTERS: &str = "clusters.txt";
pub const METRICS: &str = "metrics.csv";
pub const BEHAVIORS: &str = "behaviors.csv";
pub const REPORT_SVG: &str = "report.svg";
pub const GALLERY: &str = "gallery.txt";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Stats,
    Pot,
    Codebook,
    Partition,
    Cluster,
    Eval,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Stats,
        Stage::Pot,
        Stage::Codebook,
        Stage::Partition,
        Stage::Cluster,
        Stage::Eval,
        Stage::Report,
    ];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Stats => "stats",
            Stage::Pot => "pot",
            Stage::Codebook => "codebook",
            Stage::Partition => "partition",
            Stage::Cluster => "cluster",
            Stage::Eval => "eval",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn motion_stats(shots: &[Shot], n: usize) -> Vec<FrameMotionStats> {
    shots
        .par_iter()
        .map(|s| compute_frame_motion_stats(s, n))
        .collect()
}

pub fn format_all_stats(shots: &[Shot], stats: &[FrameMotionStats]) -> String {
    shots
        .iter()
        .zip(stats)
        .map(|(s, st)| format_stats(s.shot_id, st))
        .collect()
}

/// Selected PoTs of every shot, in shot order.
pub fn select_all_pots(
    shots: &[Shot],
    stats: &[FrameMotionStats],
    cfg: &SelectionConfig,
) -> Result<Vec<PotRecord>> {
    let per_shot: Vec<Vec<PotRecord>> = shots
        .par_iter()
        .zip(stats)
        .map(|(shot, st)| {
            let pots =
                extract_pots(shot, st, cfg).with_context(|| format!("shot {}", shot.shot_id))?;
            Ok(pots
                .iter()
                .map(|p| PotRecord::new(shot.shot_id, p))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_shot.concat())
}

pub fn all_ts(shots: &[Shot], n: usize) -> Vec<TsRecord> {
    shots
        .par_iter()
        .map(|s| extract_ts(s, n))
        .collect::<Vec<_>>()
        .concat()
}

pub fn train(descriptors: &[&[f64]], cfg: &KMeansConfig) -> Result<Codebook> {
    Ok(build_codebook(descriptors, cfg)?)
}

pub fn quantize_all<'a>(
    descriptors: impl IndexedParallelIterator<Item = &'a [f64]>,
    codebook: &Codebook,
) -> Result<Vec<usize>> {
    Ok(descriptors
        .map(|d| quantize(d, codebook))
        .collect::<Result<_, _>>()?)
}

/// A descriptor reduced to what partitioning and clustering need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Word {
    pub shot_id: u64,
    pub start_frame: usize,
    pub codeword: usize,
}

fn words_by_shot(words: &[Word]) -> BTreeMap<u64, Vec<(usize, usize)>> {
    let mut by_shot: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for w in words {
        by_shot
            .entry(w.shot_id)
            .or_default()
            .push((w.start_frame, w.codeword));
    }
    for v in by_shot.values_mut() {
        v.sort_unstable();
    }
    by_shot
}

/// Intervals of every shot, in shot order.
pub fn partition_all(
    shots: &[Shot],
    stats: &[FrameMotionStats],
    words: &[Word],
    k: usize,
    cfg: &PartitionConfig,
) -> Vec<Interval> {
    let by_shot = words_by_shot(words);
    shots
        .par_iter()
        .zip(stats)
        .map(|(shot, st)| {
            let pots = by_shot.get(&shot.shot_id).map_or(&[][..], Vec::as_slice);
            partition_shot(shot.shot_id, st, pots, k, cfg)
        })
        .collect::<Vec<_>>()
        .concat()
}

/// Frames of `iv` that PoT starts may occupy under `indexing`.
fn start_range(iv: &Interval, indexing: Indexing, window: usize) -> Range<usize> {
    match indexing {
        Indexing::Start => iv.range(),
        Indexing::Span => iv.start..(iv.end + 1).saturating_sub(window).max(iv.start),
    }
}

/// One histogram per interval from the descriptors assigned to it.
pub fn interval_histograms(
    intervals: &[Interval],
    words: &[Word],
    k: usize,
    indexing: Indexing,
    window: usize,
) -> Vec<BowHistogram> {
    let by_shot = words_by_shot(words);
    intervals
        .par_iter()
        .map(|iv| {
            let pots = by_shot.get(&iv.shot_id).map_or(&[][..], Vec::as_slice);
            let r = start_range(iv, indexing, window);
            let lo = pots.partition_point(|&(f, _)| f < r.start);
            let hi = pots.partition_point(|&(f, _)| f < r.end);
            let codewords: Vec<usize> = pots[lo..hi].iter().map(|&(_, c)| c).collect();
            bow(&codewords, k)
        })
        .collect()
}

/// Clusters the intervals whose histograms are non-empty in every channel.
/// `channels[c][u]` is interval `u`'s histogram in channel `c`.
pub fn cluster_intervals(
    names: &[Channel],
    channels: &[Vec<BowHistogram>],
    k_range: KRange,
) -> Result<ClusterFile> {
    let total = channels.first().map_or(0, Vec::len);
    let (leaves, unclustered): (Vec<usize>, Vec<usize>) =
        (0..total).partition(|&u| channels.iter().all(|ch| !ch[u].empty));
    let matrix = if channels.len() == 1 {
        let ch = &channels[0];
        DistanceMatrix::from_fn(leaves.len(), |i, j| {
            interval_distance(&ch[leaves[i]], &ch[leaves[j]])
        })?
    } else {
        let per_interval: Vec<Vec<BowHistogram>> = leaves
            .iter()
            .map(|&u| channels.iter().map(|ch| ch[u].clone()).collect())
            .collect();
        let cfg = DistanceConfig::fit(
            names.iter().map(|c| c.name().to_owned()).collect(),
            &per_interval,
        )?;
        DistanceMatrix::from_fn(leaves.len(), |i, j| {
            multichannel_distance(&per_interval[i], &per_interval[j], &cfg)
        })?
    };
    let dendrogram = linkage(&matrix)?;
    let cuts = k_range
        .iter()
        .take_while(|&k| k <= leaves.len())
        .map(|k| Ok((k, dendrogram.cut(k)?)))
        .collect::<Result<_>>()?;
    Ok(ClusterFile {
        dendrogram,
        leaves,
        unclustered,
        cuts,
    })
}

/// Majority frame label of every interval.
pub fn interval_labels<'a>(shots: &'a [Shot], intervals: &[Interval]) -> Result<Vec<&'a str>> {
    let by_id: BTreeMap<u64, &Shot> = shots.iter().map(|s| (s.shot_id, s)).collect();
    intervals
        .iter()
        .map(|iv| {
            let shot = by_id
                .get(&iv.shot_id)
                .ok_or_else(|| anyhow!("interval refers to unknown shot {}", iv.shot_id))?;
            let labels = shot
                .frame_labels
                .as_ref()
                .ok_or_else(|| anyhow!("shot {} has no frame labels", iv.shot_id))?;
            let frames = labels.get(iv.range()).ok_or_else(|| {
                anyhow!(
                    "interval {}..{} exceeds shot {}",
                    iv.start,
                    iv.end,
                    iv.shot_id
                )
            })?;
            majority_label(frames).map(String::as_str).ok_or_else(|| {
                anyhow!(
                    "empty interval {}..{} in shot {}",
                    iv.start,
                    iv.end,
                    iv.shot_id
                )
            })
        })
        .collect()
}

/// Mean uniformity of the given intervals against the frame labels.
pub fn uniformity(shots: &[Shot], intervals: &[Interval]) -> Result<f64> {
    let by_id: BTreeMap<u64, &Shot> = shots.iter().map(|s| (s.shot_id, s)).collect();
    let frames: Vec<&[String]> = intervals
        .iter()
        .map(|iv| {
            by_id
                .get(&iv.shot_id)
                .and_then(|s| s.frame_labels.as_ref())
                .and_then(|l| l.get(iv.range()))
                .ok_or_else(|| {
                    anyhow!(
                        "no frame labels for shot {} frames {}..{}",
                        iv.shot_id,
                        iv.start,
                        iv.end
                    )
                })
        })
        .collect::<Result<_>>()?;
    Ok(mean_uniformity(&frames)?)
}

/// Whole shots as intervals, the baseline for uniformity.
pub fn whole_shots(shots: &[Shot]) -> Vec<Interval> {
    shots
        .iter()
        .filter(|s| s.num_frames > 0)
        .map(|s| Interval {
            shot_id: s.shot_id,
            start: 0,
            end: s.num_frames,
            origin: potminer::Origin::WholeShot,
            period: None,
        })
        .collect()
}

/// Metrics per dendrogram cut, plus distinct-shot interval counts per behavior.
pub fn evaluate(
    shots: &[Shot],
    intervals: &[Interval],
    clusters: &ClusterFile,
) -> Result<(Vec<MetricsRow>, BTreeMap<String, usize>)> {
    let labels = interval_labels(shots, intervals)?;
    let uniformity = uniformity(shots, intervals)?;
    let truth: Vec<&str> = clusters.leaves.iter().map(|&u| labels[u]).collect();
    let mut rows = Vec::new();
    for (k, pred) in &clusters.cuts {
        rows.push(MetricsRow {
            k: *k,
            purity: purity(pred, &truth)?,
            ari: ari(pred, &truth)?,
            num_intervals: truth.len(),
            uniformity,
        });
    }
    let per_interval: Vec<(u64, &str)> = intervals
        .iter()
        .zip(&labels)
        .map(|(iv, &l)| (iv.shot_id, l))
        .collect();
    Ok((rows, count_intervals_per_behavior(&per_interval)))
}

pub fn format_behaviors(counts: &BTreeMap<String, usize>) -> String {
    let mut out = String::from("behavior,shots\n");
    for (b, n) in counts {
        out.push_str(&format!("{b},{n}\n"));
    }
    out
}

pub fn pot_words(pots: &[PotRecord], codewords: &[usize]) -> Vec<Word> {
    pots.iter()
        .zip(codewords)
        .map(|(p, &codeword)| Word {
            shot_id: p.shot_id,
            start_frame: p.start_frame,
            codeword,
        })
        .collect()
}

pub fn ts_words(ts: &[TsRecord], codewords: &[usize]) -> Vec<Word> {
    ts.iter()
        .zip(codewords)
        .map(|(t, &codeword)| Word {
            shot_id: t.shot_id,
            start_frame: t.start_frame,
            codeword,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub codebook: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ts_codebook: Option<u64>,
}

/// Everything needed to reproduce an artifacts directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub dataset: PathBuf,
    pub dataset_sha256: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub completed: Vec<Stage>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = read(&dir.join(MANIFEST))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", dir.join(MANIFEST).display()))
    }
}

/// Writes artifacts and keeps the manifest current after every stage, so the
/// outputs of completed stages survive a later failure.
struct Run<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        write(&self.dir.join(name), contents)?;
        self.manifest.artifacts.retain(|a| a.name != name);
        self.manifest.artifacts.push(Artifact {
            name: name.to_owned(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    fn finish(&mut self, stage: Stage) -> Result<()> {
        self.manifest.completed.push(stage);
        let json = serde_json::to_string_pretty(&self.manifest)? + "\n";
        write(&self.dir.join(MANIFEST), &json)
    }
}

/// Runs every stage up to and including `until`, writing artifacts into `out`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    dataset: &Path,
    out: &Path,
    until: Stage,
) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let raw = fs::read(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    let shots = load_dataset(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let config_text = cfg.to_toml();
    let use_ts = cfg.channels_include(Channel::Ts);
    let mut run = Run {
        dir: out,
        manifest: Manifest {
            tool: format!("potminer {}", env!("CARGO_PKG_VERSION")),
            dataset: dataset.to_path_buf(),
            dataset_sha256: sha256_hex(&raw),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seeds: Seeds {
                codebook: cfg.codebook.seed,
                ts_codebook: use_ts.then_some(cfg.ts_codebook.seed),
            },
            completed: Vec::new(),
            artifacts: Vec::new(),
        },
    };
    run.put(CONFIG, &config_text)?;

    let n = cfg.selection.n;
    let stage = |s: Stage| s <= until;

    // stats
    let stats = motion_stats(&shots, n);
    run.put(STATS, &format_all_stats(&shots, &stats))?;
    run.finish(Stage::Stats)?;
    if !stage(Stage::Pot) {
        return Ok(run.manifest);
    }

    let pots = select_all_pots(&shots, &stats, &cfg.selection).context("stage pot")?;
    run.put(POTS, &format_pots(&pots))?;
    let ts = if use_ts {
        let ts = all_ts(&shots, n);
        run.put(TS, &format_ts(&ts))?;
        ts
    } else {
        Vec::new()
    };
    run.finish(Stage::Pot)?;
    if !stage(Stage::Codebook) {
        return Ok(run.manifest);
    }

    let descriptors: Vec<&[f64]> = pots.iter().map(|p| p.descriptor.as_slice()).collect();
    let codebook = train(&descriptors, &cfg.codebook).context("stage codebook")?;
    run.put(CODEBOOK, &format_codebook(&codebook))?;
    let ts_codebook = if use_ts {
        let d: Vec<&[f64]> = ts.iter().map(|t| t.descriptor.as_slice()).collect();
        let cb = train(&d, &cfg.ts_codebook).context("stage codebook (ts channel)")?;
        run.put(TS_CODEBOOK, &format_codebook(&cb))?;
        Some(cb)
    } else {
        None
    };
    run.finish(Stage::Codebook)?;
    if !stage(Stage::Partition) {
        return Ok(run.manifest);
    }

    let codewords = quantize_all(pots.par_iter().map(|p| p.descriptor.as_slice()), &codebook)
        .context("stage partition")?;
    let words = pot_words(&pots, &codewords);
    let intervals = partition_all(&shots, &stats, &words, codebook.k(), &cfg.partition);
    run.put(INTERVALS, &format_intervals(&intervals))?;
    run.finish(Stage::Partition)?;
    if !stage(Stage::Cluster) {
        return Ok(run.manifest);
    }

    let mut channels = Vec::new();
    for &c in &cfg.cluster.channels {
        let hist = match c {
            Channel::Pot => {
                interval_histograms(&intervals, &words, codebook.k(), cfg.partition.indexing, n)
            }
            Channel::Ts => {
                let cb = ts_codebook
                    .as_ref()
                    .expect("trained when the channel is on");
                let cw = quantize_all(ts.par_iter().map(|t| t.descriptor.as_slice()), cb)
                    .context("stage cluster")?;
                interval_histograms(
                    &intervals,
                    &ts_words(&ts, &cw),
                    cb.k(),
                    cfg.partition.indexing,
                    n,
                )
            }
        };
        channels.push(hist);
    }
    let clusters = cluster_intervals(&cfg.cluster.channels, &channels, cfg.cluster.k_range)
        .context("stage cluster")?;
    run.put(CLUSTERS, &clusters.format())?;
    run.finish(Stage::Cluster)?;
    if !stage(Stage::Eval) {
        return Ok(run.manifest);
    }

    let (rows, behaviors) = evaluate(&shots, &intervals, &clusters).context("stage eval")?;
    if rows.is_empty() {
        bail!(
            "stage eval: no cluster count in {} fits the {} clustered intervals",
            cfg.cluster.k_range,
            clusters.leaves.len()
        );
    }
    run.put(METRICS, &potminer::eval::format_metrics(&rows))?;
    run.put(BEHAVIORS, &format_behaviors(&behaviors))?;
    run.finish(Stage::Eval)?;
    if !stage(Stage::Report) {
        return Ok(run.manifest);
    }

    run.put(REPORT_SVG, &report::render_svg(&rows))?;
    let gallery = report::gallery(
        &shots,
        &intervals,
        &clusters,
        &pots,
        cfg.partition.indexing,
        &cfg.report,
    );
    run.put(GALLERY, &gallery)?;
    run.finish(Stage::Report)?;
    Ok(run.manifest)
}
