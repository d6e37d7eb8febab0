//! Morphological attribute profiles for raster classification.
//!
//! The crate covers the whole feature pipeline: building hierarchical image
//! representations ([`hierarchy`]), accumulating node statistics
//! ([`attributes`]), filtering under a decision rule ([`filtering`]),
//! stacking filtered images into profiles ([`profiles`]), PCA band reduction
//! ([`spectral`]) and random-forest classification with accuracy metrics
//! ([`learn`]). [`pipeline`] wires these into the extract / reduce /
//! classify / eval workflow used by the command-line tool.

pub mod attributes;
pub mod error;
pub mod filtering;
pub mod hierarchy;
pub mod learn;
pub mod pipeline;
pub mod profiles;
pub mod raster;
pub mod spectral;

pub use error::{Error, Result};
