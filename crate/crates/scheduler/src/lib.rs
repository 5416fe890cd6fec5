//! Discrete berth-allocation / quay-crane scheduler producing ground-truth
//! day-ahead plans: deterministic greedy construction plus local search for
//! production sizes, an exhaustive oracle for tiny instances, and the
//! memory-set builder feeding the differentiable surrogate.

pub mod brute;
pub mod config;
pub mod error;
pub mod export;
pub mod memory;
pub mod plan;
pub mod search;

pub use brute::brute_force_tiny;
pub use config::SearchConfig;
pub use error::SchedError;
pub use export::{gantt_csv, solution_to_json};
pub use memory::{build_memory_set, MemoryEntry};
pub use search::{solve_logistics, SolveOutcome};
