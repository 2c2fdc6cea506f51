//! Task attribute distance (TAD) between few-shot learning tasks.
//!
//! Categories are described by per-attribute conditional distributions
//! ([`attr_model`]). The distance between two categories is the mean total
//! variation distance over attributes ([`distance`]); the distance between two
//! tasks averages it over a minimum-weight matching of their categories
//! ([`matching`], [`tad`]). The remaining modules build on the metric:
//! episode sampling and analysis ([`episodes`]), application procedures on a
//! synthetic attribute world ([`apps`]), and a timing harness ([`bench`]).

pub mod apps;
pub mod attr_model;
pub mod bench;
pub mod distance;
pub mod episodes;
pub mod error;
pub mod jsonl;
pub mod matching;
pub mod tad;

pub use attr_model::{
    AttributeSchema, AttributeTable, CategoryProfile, FeatureRecord, InstanceAnnotation,
};
pub use error::{Result, TadError};
pub use tad::{TaskSpec, Tables, TadResult, Variant};

/// Name of the random number generator used for every seeded draw.
pub const RNG_NAME: &str = "ChaCha8Rng";
