//! Orchestration for the `potminer` command: pipeline configuration, the
//! stage implementations behind each subcommand, and report rendering.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::{Channel, KRange, PipelineConfig};
pub use pipeline::{run_pipeline, Manifest, Stage};
