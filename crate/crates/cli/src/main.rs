use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use potminer::cluster::ClusterFile;
use potminer::codebook::{format_codebook, parse_codebook, Init};
use potminer::eval::{format_metrics, parse_metrics};
use potminer::ingest::{load_dataset, save_dataset};
use potminer::partition::{format_intervals, parse_intervals, Indexing};
use potminer::pot::{format_pots, format_ts, parse_pots, parse_ts};
use potminer::SynthConfig;
use potminer_cli::config::{Channel, KRange, PipelineConfig};
use potminer_cli::pipeline::{self as stages, Manifest, Stage};
use potminer_cli::report;
use rayon::prelude::*;

#[derive(Parser)]
#[command(
    name = "potminer",
    version,
    about = "Unsupervised discovery of articulated motion patterns"
)]
struct Cli {
    /// Worker threads for per-shot and per-point parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Pipeline config file plus per-threshold overrides.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML pipeline config; defaults apply to anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// PoT length in frames.
    #[arg(long)]
    n: Option<usize>,
    /// Fraction of candidate pairs kept per frame.
    #[arg(long)]
    theta_p: Option<f64>,
    /// Articulation threshold for frame pruning and pause detection.
    #[arg(long)]
    theta_f: Option<f64>,
    /// Spectral energy ratio a periodic window must reach.
    #[arg(long)]
    theta_h: Option<f64>,
    /// Chance probability a periodic window must stay under.
    #[arg(long)]
    significance: Option<f64>,
    #[arg(long)]
    min_period: Option<usize>,
    #[arg(long)]
    min_cycles: Option<usize>,
    /// Codebook size used by the pipeline.
    #[arg(long)]
    codewords: Option<usize>,
    /// k-means restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Codebook seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    indexing: Option<IndexingArg>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum IndexingArg {
    Start,
    Span,
}

#[derive(Args, Debug, Default)]
struct KArgs {
    /// Single cluster count.
    #[arg(long, conflicts_with = "k_range")]
    k: Option<usize>,
    /// Cluster-count sweep `lo:hi`, cut from one dendrogram.
    #[arg(long)]
    k_range: Option<KRange>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.selection.n = n;
        }
        if let Some(v) = self.theta_p {
            cfg.selection.theta_p = v;
        }
        if let Some(v) = self.theta_f {
            cfg.selection.theta_f = v;
            cfg.partition.theta_f = v;
        }
        let periodicity = &mut cfg.partition.periodicity;
        if let Some(v) = self.theta_h {
            periodicity.theta_h = v;
        }
        if let Some(v) = self.significance {
            periodicity.significance = v;
        }
        if let Some(v) = self.min_period {
            periodicity.min_period = v;
        }
        if let Some(v) = self.min_cycles {
            periodicity.min_cycles = v;
        }
        if let Some(v) = self.codewords {
            cfg.codebook.k = v;
        }
        if let Some(v) = self.restarts {
            cfg.codebook.restarts = v;
        }
        if let Some(v) = self.seed {
            cfg.codebook.seed = v;
        }
        if let Some(v) = self.indexing {
            cfg.partition.indexing = match v {
                IndexingArg::Start => Indexing::Start,
                IndexingArg::Span => Indexing::Span,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl KArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(k) = self.k {
            cfg.cluster.k_range = KRange::single(k);
        }
        if let Some(r) = self.k_range {
            cfg.cluster.k_range = r;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic skeleton dataset.
    Synth {
        /// TOML behavior script; the built-in benchmark script when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        shots: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        out: PathBuf,
    },
    /// Per-frame foreground motion statistics.
    Stats {
        #[command(flatten)]
        cfg: ConfigArgs,
        dataset: PathBuf,
        out: PathBuf,
    },
    /// Select and describe pairs of trajectories.
    Pot {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write single-trajectory shape descriptors here.
        #[arg(long)]
        ts: Option<PathBuf>,
        dataset: PathBuf,
        out: PathBuf,
    },
    /// Train a k-means codebook on a PoT (or shape) dump.
    Codebook {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Codebook size.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        kmeans_plus_plus: bool,
        #[arg(long)]
        standardize: bool,
        /// Input is a shape-descriptor dump rather than a PoT dump.
        #[arg(long)]
        ts: bool,
        input: PathBuf,
        out: PathBuf,
    },
    /// Split shots into pauses, periodic and remaining intervals.
    Partition {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        codebook: PathBuf,
        dataset: PathBuf,
        pots: PathBuf,
        out: PathBuf,
    },
    /// Complete-linkage clustering of interval histograms.
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        ks: KArgs,
        #[arg(long)]
        codebook: PathBuf,
        /// Shape-descriptor dump, adding a second channel.
        #[arg(long, requires = "ts_codebook")]
        ts: Option<PathBuf>,
        #[arg(long, requires = "ts")]
        ts_codebook: Option<PathBuf>,
        pots: PathBuf,
        intervals: PathBuf,
        out: PathBuf,
    },
    /// Purity, ARI and uniformity per cluster count.
    Eval {
        dataset: PathBuf,
        intervals: PathBuf,
        clusters: PathBuf,
        out: PathBuf,
        /// Also write distinct-shot interval counts per behavior.
        #[arg(long)]
        behaviors: Option<PathBuf>,
    },
    /// Render the metrics plot and cluster gallery of a pipeline run.
    Report { artifacts: PathBuf },
    /// Run every stage, writing all artifacts and a manifest.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        ks: KArgs,
        /// Last stage to run.
        #[arg(long, value_enum, default_value_t = Stage::Report)]
        stage: Stage,
        dataset: PathBuf,
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Synth {
            script,
            shots,
            seed,
            out,
        } => {
            let synth = match script {
                Some(path) => SynthConfig::from_toml(&stages::read(&path)?)
                    .with_context(|| format!("in script {}", path.display()))?,
                None => SynthConfig::benchmark(),
            };
            let data = synth.generate(shots, seed)?;
            save_dataset(&out, &data).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Stats { cfg, dataset, out } => {
            let cfg = cfg.load()?;
            let shots = load(&dataset)?;
            let stats = stages::motion_stats(&shots, cfg.selection.n);
            stages::write(&out, &stages::format_all_stats(&shots, &stats))?;
        }
        Command::Pot {
            cfg,
            ts,
            dataset,
            out,
        } => {
            let cfg = cfg.load()?;
            let shots = load(&dataset)?;
            let stats = stages::motion_stats(&shots, cfg.selection.n);
            let pots = stages::select_all_pots(&shots, &stats, &cfg.selection)?;
            stages::write(&out, &format_pots(&pots))?;
            if let Some(path) = ts {
                stages::write(&path, &format_ts(&stages::all_ts(&shots, cfg.selection.n)))?;
            }
        }
        Command::Codebook {
            cfg,
            k,
            max_iters,
            kmeans_plus_plus,
            standardize,
            ts,
            input,
            out,
        } => {
            let cfg = cfg.load()?;
            let mut km = if ts { cfg.ts_codebook } else { cfg.codebook };
            if let Some(k) = k {
                km.k = k;
            }
            if let Some(m) = max_iters {
                km.max_iters = m;
            }
            if kmeans_plus_plus {
                km.init = Init::KMeansPlusPlus;
            }
            km.standardize |= standardize;
            let text = stages::read(&input)?;
            let descriptors: Vec<Vec<f64>> = if ts {
                parse_ts(&text)?.into_iter().map(|r| r.descriptor).collect()
            } else {
                parse_pots(&text)?
                    .into_iter()
                    .map(|r| r.descriptor)
                    .collect()
            };
            let refs: Vec<&[f64]> = descriptors.iter().map(Vec::as_slice).collect();
            let cb = stages::train(&refs, &km)?;
            stages::write(&out, &format_codebook(&cb))?;
        }
        Command::Partition {
            cfg,
            codebook,
            dataset,
            pots,
            out,
        } => {
            let cfg = cfg.load()?;
            let shots = load(&dataset)?;
            let cb = parse_codebook(&stages::read(&codebook)?)?;
            let pots = parse_pots(&stages::read(&pots)?)?;
            let cw = stages::quantize_all(pots.par_iter().map(|p| p.descriptor.as_slice()), &cb)?;
            let stats = stages::motion_stats(&shots, cfg.selection.n);
            let intervals = stages::partition_all(
                &shots,
                &stats,
                &stages::pot_words(&pots, &cw),
                cb.k(),
                &cfg.partition,
            );
            stages::write(&out, &format_intervals(&intervals))?;
        }
        Command::Cluster {
            cfg,
            ks,
            codebook,
            ts,
            ts_codebook,
            pots,
            intervals,
            out,
        } => {
            let mut cfg = cfg.load()?;
            ks.apply(&mut cfg);
            let intervals = parse_intervals(&stages::read(&intervals)?)?;
            let n = cfg.selection.n;
            let indexing = cfg.partition.indexing;
            let cb = parse_codebook(&stages::read(&codebook)?)?;
            let pots = parse_pots(&stages::read(&pots)?)?;
            let cw = stages::quantize_all(pots.par_iter().map(|p| p.descriptor.as_slice()), &cb)?;
            let mut names = vec![Channel::Pot];
            let mut channels = vec![stages::interval_histograms(
                &intervals,
                &stages::pot_words(&pots, &cw),
                cb.k(),
                indexing,
                n,
            )];
            if let (Some(ts), Some(ts_cb)) = (ts, ts_codebook) {
                let cb = parse_codebook(&stages::read(&ts_cb)?)?;
                let ts = parse_ts(&stages::read(&ts)?)?;
                let cw = stages::quantize_all(ts.par_iter().map(|t| t.descriptor.as_slice()), &cb)?;
                names.push(Channel::Ts);
                channels.push(stages::interval_histograms(
                    &intervals,
                    &stages::ts_words(&ts, &cw),
                    cb.k(),
                    indexing,
                    n,
                ));
            }
            let clusters = stages::cluster_intervals(&names, &channels, cfg.cluster.k_range)?;
            stages::write(&out, &clusters.format())?;
        }
        Command::Eval {
            dataset,
            intervals,
            clusters,
            out,
            behaviors,
        } => {
            let shots = load(&dataset)?;
            let intervals = parse_intervals(&stages::read(&intervals)?)?;
            let clusters = ClusterFile::parse(&stages::read(&clusters)?)?;
            let (rows, counts) = stages::evaluate(&shots, &intervals, &clusters)?;
            stages::write(&out, &format_metrics(&rows))?;
            if let Some(path) = behaviors {
                stages::write(&path, &stages::format_behaviors(&counts))?;
            }
        }
        Command::Report { artifacts } => render_report(&artifacts)?,
        Command::Pipeline {
            cfg,
            ks,
            stage,
            dataset,
            out,
        } => {
            let mut cfg = cfg.load()?;
            ks.apply(&mut cfg);
            cfg.validate()?;
            let manifest = stages::run_pipeline(&cfg, &dataset, &out, stage)?;
            eprintln!(
                "completed {} stage(s); {} artifact(s) in {}",
                manifest.completed.len(),
                manifest.artifacts.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<Vec<potminer::Shot>> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn render_report(dir: &Path) -> Result<()> {
    let metrics_path = dir.join(stages::METRICS);
    if !metrics_path.exists() {
        bail!("no metrics in {}; run the eval stage first", dir.display());
    }
    let rows = parse_metrics(&stages::read(&metrics_path)?)?;
    stages::write(&dir.join(stages::REPORT_SVG), &report::render_svg(&rows))?;

    let manifest = Manifest::load(dir)?;
    let cfg = PipelineConfig::from_toml(&stages::read(&dir.join(stages::CONFIG))?)?;
    let shots = load(&manifest.dataset)?;
    let intervals = parse_intervals(&stages::read(&dir.join(stages::INTERVALS))?)?;
    let clusters = ClusterFile::parse(&stages::read(&dir.join(stages::CLUSTERS))?)?;
    let pots = parse_pots(&stages::read(&dir.join(stages::POTS))?)?;
    let gallery = report::gallery(
        &shots,
        &intervals,
        &clusters,
        &pots,
        cfg.partition.indexing,
        &cfg.report,
    );
    stages::write(&dir.join(stages::GALLERY), &gallery)
}
