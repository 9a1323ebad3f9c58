//! Pipeline configuration, loaded from TOML.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use potminer::{KMeansConfig, PartitionConfig, SelectionConfig};
use serde::{Deserialize, Serialize};

/// Descriptor channel used by the interval distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Pair-of-trajectory descriptors.
    Pot,
    /// Single-trajectory shape descriptors.
    Ts,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Pot => "pot",
            Channel::Ts => "ts",
        }
    }
}

/// Inclusive range of cluster counts, written `lo:hi` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

impl KRange {
    pub fn single(k: usize) -> Self {
        Self { lo: k, hi: k }
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

impl fmt::Display for KRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for KRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid cluster count {v:?}"))
        };
        let range = match s.split_once(':') {
            Some((lo, hi)) => Self {
                lo: parse(lo)?,
                hi: parse(hi)?,
            },
            None => Self::single(parse(s)?),
        };
        if range.lo == 0 || range.lo > range.hi {
            return Err(format!("cluster range {s:?} must satisfy 1 <= lo <= hi"));
        }
        Ok(range)
    }
}

impl TryFrom<String> for KRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<KRange> for String {
    fn from(r: KRange) -> String {
        r.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Cluster counts to cut the dendrogram at.
    pub k_range: KRange,
    pub channels: Vec<Channel>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k_range: KRange { lo: 2, hi: 12 },
            channels: vec![Channel::Pot],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Cluster count whose clusters are listed in the gallery.
    pub gallery_k: usize,
    /// PoTs shown per gallery interval.
    pub pots_per_interval: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            gallery_k: 5,
            pots_per_interval: 3,
        }
    }
}

/// Every stage parameter of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub selection: SelectionConfig,
    pub codebook: KMeansConfig,
    /// Codebook for the shape channel, used only when `ts` is a channel.
    pub ts_codebook: KMeansConfig,
    pub partition: PartitionConfig,
    pub cluster: ClusterConfig,
    pub report: ReportConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            selection: SelectionConfig::default(),
            codebook: KMeansConfig::default(),
            ts_codebook: KMeansConfig {
                k: 4000,
                seed: 1,
                ..KMeansConfig::default()
            },
            partition: PartitionConfig::default(),
            cluster: ClusterConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid pipeline config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.selection.validate().context("[selection]")?;
        self.codebook.validate().context("[codebook]")?;
        if self.channels_include(Channel::Ts) {
            self.ts_codebook.validate().context("[ts_codebook]")?;
        }
        self.partition.validate().context("[partition]")?;
        if self.cluster.channels.is_empty() {
            bail!("[cluster] needs at least one channel");
        }
        let mut seen = self.cluster.channels.clone();
        seen.sort_by_key(|c| c.name());
        seen.dedup();
        if seen.len() != self.cluster.channels.len() {
            bail!("[cluster] lists a channel twice");
        }
        let KRange { lo, hi } = self.cluster.k_range;
        if lo == 0 || lo > hi {
            bail!("[cluster] k_range must satisfy 1 <= lo <= hi");
        }
        if self.report.gallery_k == 0 {
            bail!("[report] gallery_k must be >= 1");
        }
        Ok(())
    }

    pub fn channels_include(&self, channel: Channel) -> bool {
        self.cluster.channels.contains(&channel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_survive_a_toml_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_tables_keep_other_defaults() {
        let cfg = PipelineConfig::from_toml(
            "[codebook]\nk = 50\n[partition]\ntheta_h = 0.2\n[cluster]\nk_range = \"3:7\"\n",
        )
        .unwrap();
        assert_eq!(cfg.codebook.k, 50);
        assert_eq!(cfg.codebook.restarts, 8);
        assert_eq!(cfg.partition.periodicity.theta_h, 0.2);
        assert_eq!(cfg.partition.periodicity.min_period, 5);
        assert_eq!(cfg.cluster.k_range, KRange { lo: 3, hi: 7 });
    }

    #[test]
    fn invalid_values_are_rejected_at_load() {
        for bad in [
            "[selection]\ntheta_p = 0.0\n",
            "[codebook]\nk = 0\n",
            "[partition]\ntheta_h = -1.0\n",
            "[cluster]\nk_range = \"5:2\"\n",
            "[cluster]\nchannels = []\n",
            "[cluster]\nchannels = [\"pot\", \"pot\"]\n",
            "[selection]\nbogus = 1\n",
        ] {
            assert!(PipelineConfig::from_toml(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn k_range_syntax() {
        assert_eq!("4".parse::<KRange>().unwrap(), KRange::single(4));
        assert_eq!("12:34".parse::<KRange>().unwrap().iter().count(), 23);
        assert!("0:3".parse::<KRange>().is_err());
        assert!("a:b".parse::<KRange>().is_err());
    }
}
