//! Unsupervised discovery of articulated motion patterns from point trajectories.
//!
//! The pipeline runs per shot: foreground motion statistics ([`ingest`]),
//! pair-of-trajectory selection and description ([`pot`]), temporal
//! partitioning into single-pattern intervals ([`partition`]); then across the
//! whole collection: codebook and bag-of-words histograms ([`codebook`]),
//! complete-linkage clustering of intervals ([`cluster`]) and evaluation
//! against ground-truth labels ([`eval`]). [`synth`] generates labelled
//! articulated-skeleton datasets.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cluster;
pub mod codebook;
pub mod eval;
pub mod geom;
pub mod ingest;
pub mod partition;
pub mod pot;
pub mod synth;

pub use cluster::{ClusterError, Dendrogram, DistanceConfig, DistanceMatrix, Merge};
pub use codebook::{bow, quantize, BowHistogram, Codebook, CodebookError, KMeansConfig};
pub use eval::{EvalError, MetricsRow};
pub use geom::Vec2;
pub use ingest::{FrameMotionStats, IngestError, Shot, Trajectory};
pub use partition::{Interval, Origin, PartitionConfig, PeriodicityConfig};
pub use pot::{Pot, PotCandidate, PotDescriptor, PotError, PotRecord, SelectionConfig, TsRecord};
pub use synth::{Behavior, BehaviorScript, Segment, SynthConfig, SynthError};
