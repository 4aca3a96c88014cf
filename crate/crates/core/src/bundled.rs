//! The Simple PC domain and its reward tables, compiled into the library.
//!
//! The same files live in `crates/core/data/` for use with the CLI.

use crate::domain::{DomainFragment, DomainSchema};
use crate::reward::RewardScript;

pub const SIMPLE_PC_DOMAIN: &str = include_str!("../data/simple-pc.domain.json");
pub const SIMPLE_PC_EXTENSION: &str = include_str!("../data/simple-pc-extension.domain.json");
pub const HOME_PC_REWARDS: &str = include_str!("../data/home-pc.rewards.json");

/// Task class the bundled rewards are written for.
pub const HOME_PC: &str = "Home-PC";
pub const PC_SYSTEM: &str = "PC-System";

/// Absolute path of the bundled data directory.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Four hard disks.
pub fn simple_pc() -> DomainSchema {
    DomainSchema::from_json(SIMPLE_PC_DOMAIN).expect("bundled domain is valid")
}

/// IDE22 and IDE27.
pub fn simple_pc_extension() -> DomainFragment {
    DomainFragment::from_json(SIMPLE_PC_EXTENSION).expect("bundled fragment is valid")
}

/// Six hard disks.
pub fn simple_pc_extended() -> DomainSchema {
    simple_pc().add_concepts(&simple_pc_extension()).expect("extension applies")
}

pub fn home_pc_rewards() -> RewardScript {
    RewardScript::from_json(HOME_PC_REWARDS).expect("bundled rewards are valid")
}
