//! Forecasting models for day-ahead electricity prices and port net load: a
//! permutation-invariant encoder over the day's vessel arrivals feeding an
//! MLP head, with all normalization statistics carried in the checkpoint.

pub mod error;
pub mod features;
pub mod model;

pub use error::ForecastError;
pub use features::{build_context, context_dim, vessel_features, vessel_matrix, LOOKBACK_HOURS};
pub use model::{mae, mse, ForecastModel, ModelConfig, Normalization};
