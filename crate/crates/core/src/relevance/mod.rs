//! Relevance bookkeeping: per (object, task class) records of last use, the
//! train/forget arithmetic, relevance-proportional selection, task-class
//! clocks and splitting, and the maintenance sweep.
//!
//! Only two numbers are stored per object and class. The current relevance is
//! always recomputed from them on demand, so a committed run touches only the
//! objects that were part of the solution.

mod key;
mod math;
mod params;
mod store;

use thiserror::Error;

pub use key::ObjectKey;
pub use math::{forget, sample_index, selection_distribution, train_closed_form, train_step};
pub(crate) use math::relative_weights;
pub use params::{ParamWarning, RkfParams, TrainBaseMode, CONSERVATIVE_V, DEGENERATE_BASIS};
pub use store::{RelevanceRecord, RelevanceStore, RewardMap, START_RELEVANCE};

#[derive(Debug, Error)]
pub enum RelevanceError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{what} {value} is outside [0, 1]")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("no candidates to choose from")]
    EmptyChoice,
    #[error("no relevance record for {key} in task class {class:?}")]
    MissingRecord { key: ObjectKey, class: String },
    #[error("relevance of {key} requested at run {as_of}, before its last use at run {last_use}")]
    TimeTravel { key: ObjectKey, as_of: u64, last_use: u64 },
    #[error("unknown task class {0:?}")]
    UnknownClass(String),
    #[error("task class {0:?} already exists")]
    ClassExists(String),
    #[error("{key} is already registered in task class {class:?}")]
    DuplicateObject { key: ObjectKey, class: String },
    #[error("malformed object key {0:?}")]
    BadKey(String),
    #[error("invalid store document: {0}")]
    Document(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
