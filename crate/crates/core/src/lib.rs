//! Relevance-guided product configuration.
//!
//! A configurator builds component trees from a taxonomy and a partonomy,
//! choosing specializations and part counts at random with probabilities
//! proportional to learned relevance. Relevance grows when users reward the
//! objects of a solution and fades while they go unused.
//!
//! ```
//! use rkf::{bundled, configure, ConfigRequest, RelevanceStore, RkfParams};
//!
//! let schema = bundled::simple_pc();
//! let mut store = RelevanceStore::new(RkfParams::new(1.4, 1.1, 1.9).unwrap());
//! store.add_class(bundled::HOME_PC).unwrap();
//! for key in schema.objects() {
//!     store.register_object(key, bundled::HOME_PC, None).unwrap();
//! }
//! let request = ConfigRequest { root: "PC-System".into(), task_class: bundled::HOME_PC.into(), rng_seed: 7 };
//! let solution = configure(&schema, &request, &store).unwrap();
//! let rewards = bundled::home_pc_rewards().rate(&solution, 1).unwrap();
//! store.commit_run(&rewards, bundled::HOME_PC).unwrap();
//! ```

pub mod bundled;
pub mod domain;
pub mod enumerate;
pub mod experiment;
pub mod par;
pub mod relevance;
pub mod reward;
pub mod search;

pub use domain::{load_domain, DomainError, DomainFragment, DomainSchema, RelationSemantics};
pub use enumerate::{count_combinations, enumerate_combinations, Enumeration};
pub use experiment::{run_experiment, Experiment, ExperimentError, ExperimentOutcome, ExperimentSpec};
pub use par::Parallelism;
pub use relevance::{ObjectKey, RelevanceError, RelevanceStore, RewardMap, RkfParams, TrainBaseMode};
pub use reward::{RewardError, RewardMode, RewardScript};
pub use search::{check_relations, configure, ComponentInstance, ConfigRequest, Configurator, SearchError, Solution};
