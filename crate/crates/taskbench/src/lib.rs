//! Benchmark harness for the predict-then-optimize scheduling stack: task
//! fixtures and synthetic data, decision metrics, the continual-learning
//! stream runner, report emission, and the command-line interface.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod report;
pub mod stream;

pub use config::BenchConfig;
pub use dataset::{from_csv, generate_synthetic, to_csv, Dataset, WARMUP_DAYS};
pub use error::BenchError;
pub use metrics::{metric_fm, metric_gap, metric_rr};
pub use stream::{run_stream, run_stream_prepared, Bench, StreamReport};
