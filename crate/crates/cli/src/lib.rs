//! Operational surface of the wind scenario toolkit: CSV ingestion and
//! persistence, pipeline configuration, and the end-to-end post-processing
//! plus verification run behind the `windecc` binary.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod report;

pub use config::PipelineConfig;
pub use pipeline::{derive_products, run_pipeline, Products};
pub use report::VerificationReport;
