//! Random-forest classification of per-pixel feature vectors and accuracy
//! metrics.

mod forest;
mod metrics;

pub use forest::{
    load_forest, predict, save_forest, train_forest, ForestModel, ForestParams, Samples,
};
pub use metrics::{evaluate, Metrics};
