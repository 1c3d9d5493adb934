//! Experiment plumbing: dataset ingestion, the floating-point reference MLP,
//! run artifacts, and parameter sweeps.

pub mod dataset;
pub mod experiment;
pub mod oracle;
pub mod report;
pub mod sweep;

pub use dataset::{load_dataset, normalize_split, parse_dataset, DatasetRecord, Split, IRIS_CLASSES};
pub use report::RunReport;
