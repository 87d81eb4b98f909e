//! Test-instance gallery and replicated coverage experiments.

mod coverage;
mod gallery;

pub use coverage::{
    coverage_experiment, BoundComparison, ChainSpec, CoverageOutcome, CoverageSummary, EstimatorConfig,
    ExperimentConfig, ReplicationRecord, QUANTILE_LEVELS,
};
pub use gallery::{
    g2_variant, gallery, identity, lazy_cycle, near_disconnected_bias_demo, resolve_chain,
    resolve_gallery, two_islands, two_state, BiasDemoReport, GalleryEntry,
};
