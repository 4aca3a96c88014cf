//! Scripted rewards and timed domain events for batch experiments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, DomainFragment, DomainSchema};
use crate::relevance::{ObjectKey, RelevanceError, RelevanceStore, RewardMap};
use crate::search::Solution;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("cannot parse reward document: {0}")]
    Parse(String),
    #[error("reward {value} for {what} is outside [0, 1]")]
    OutOfRange { what: String, value: f64 },
    #[error("reward windows of {0} overlap or are reversed")]
    BadWindows(String),
    #[error("no reward for {key} at run {run}")]
    Uncovered { key: ObjectKey, run: u64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    PerComponent,
    /// Every decision object receives one solution-level value.
    WholeSolutionBroadcast,
}

/// A reward valid for runs `from..=to` (open ended when `to` is absent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWindow {
    pub from: u64,
    #[serde(default)]
    pub to: Option<u64>,
    pub reward: f64,
}

impl RewardWindow {
    fn contains(&self, run: u64) -> bool {
        run >= self.from && self.to.is_none_or(|to| run <= to)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardScript {
    #[serde(default)]
    pub mode: RewardMode,
    #[serde(default)]
    pub concepts: BTreeMap<String, Vec<RewardWindow>>,
    /// relation id -> count -> reward
    #[serde(default)]
    pub counts: BTreeMap<String, BTreeMap<u32, f64>>,
    /// param id -> value index -> reward
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, BTreeMap<u32, f64>>,
}

fn check_reward(what: impl Into<String>, value: f64) -> Result<(), RewardError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(RewardError::OutOfRange { what: what.into(), value })
    }
}

impl RewardScript {
    pub fn from_json(text: &str) -> Result<Self, RewardError> {
        let script: Self = serde_json::from_str(text).map_err(|e| RewardError::Parse(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RewardError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RewardError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    /// Checks value ranges and that each concept's windows are disjoint.
    pub fn validate(&self) -> Result<(), RewardError> {
        for (concept, windows) in &self.concepts {
            let mut sorted = windows.clone();
            sorted.sort_by_key(|w| w.from);
            for w in &sorted {
                check_reward(format!("concept {concept}"), w.reward)?;
                if w.to.is_some_and(|to| to < w.from) {
                    return Err(RewardError::BadWindows(concept.clone()));
                }
            }
            for pair in sorted.windows(2) {
                if pair[0].to.is_none_or(|to| to >= pair[1].from) {
                    return Err(RewardError::BadWindows(concept.clone()));
                }
            }
        }
        for (rel, table) in self.counts.iter().chain(&self.params) {
            for (n, &r) in table {
                check_reward(format!("{rel}:{n}"), r)?;
            }
        }
        Ok(())
    }

    /// Table value of one object at `run`.
    pub fn reward_for(&self, key: &ObjectKey, run: u64) -> Result<f64, RewardError> {
        let found = match key {
            ObjectKey::Concept(c) => {
                self.concepts.get(c).and_then(|ws| ws.iter().find(|w| w.contains(run))).map(|w| w.reward)
            }
            ObjectKey::Count { relation, count } => self.counts.get(relation).and_then(|t| t.get(count)).copied(),
            ObjectKey::Param { param, value_index } => self.params.get(param).and_then(|t| t.get(value_index)).copied(),
        };
        found.ok_or_else(|| RewardError::Uncovered { key: key.clone(), run })
    }

    /// Rewards for every decision object of `solution`. In broadcast mode the
    /// solution value is the mean of the table values.
    pub fn rate(&self, solution: &Solution, run: u64) -> Result<RewardMap, RewardError> {
        let keys = solution.distinct_decisions();
        let mut out = RewardMap::new();
        for key in keys {
            let r = self.reward_for(&key, run)?;
            out.insert(key, r);
        }
        if self.mode == RewardMode::WholeSolutionBroadcast && !out.is_empty() {
            let mean = out.values().sum::<f64>() / out.len() as f64;
            out.values_mut().for_each(|r| *r = mean);
        }
        Ok(out)
    }

    /// Choice objects of `schema` with no table entry at some run in
    /// `1..=horizon`.
    pub fn uncovered(&self, schema: &DomainSchema, horizon: u64) -> Vec<ObjectKey> {
        let targets: Vec<&str> = schema.parts().iter().map(|p| p.part.as_str()).collect();
        schema
            .objects()
            .into_iter()
            .filter(|key| match key {
                // only concepts that are drawn as a specialization need a reward
                ObjectKey::Concept(c) => targets.iter().any(|t| t != c && schema.subsumes(t, c)),
                _ => true,
            })
            .filter(|key| match key {
                ObjectKey::Concept(_) => {
                    let mut windows: Vec<RewardWindow> = match self.concepts.get(key.as_concept().unwrap()) {
                        Some(ws) => ws.clone(),
                        None => return true,
                    };
                    windows.sort_by_key(|w| w.from);
                    let mut next = 1;
                    for w in windows {
                        if w.from > next {
                            return true;
                        }
                        match w.to {
                            None => return false,
                            Some(to) => next = next.max(to + 1),
                        }
                    }
                    next <= horizon
                }
                _ => self.reward_for(key, 1).is_err(),
            })
            .collect()
    }
}

/// The same reward for every decision object.
pub fn broadcast(solution: &Solution, value: f64) -> Result<RewardMap, RewardError> {
    check_reward("broadcast", value)?;
    Ok(solution.distinct_decisions().into_iter().map(|k| (k, value)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FragmentRef {
    Path(PathBuf),
    Inline(DomainFragment),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    AddConcepts(FragmentRef),
    /// Marker only: reward changes are expressed through script windows.
    SwitchRewards,
}

/// Takes effect right after the commit of run `at_run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainEvent {
    pub at_run: u64,
    pub action: EventAction,
}

/// Parses an event list, loading fragment files relative to `base_dir`.
pub fn parse_events(text: &str, base_dir: &Path) -> Result<Vec<DomainEvent>, RewardError> {
    let mut events: Vec<DomainEvent> = serde_json::from_str(text).map_err(|e| RewardError::Parse(e.to_string()))?;
    for ev in &mut events {
        if let EventAction::AddConcepts(FragmentRef::Path(p)) = &ev.action {
            let path = base_dir.join(p);
            let fragment = DomainFragment::load(&path)?;
            ev.action = EventAction::AddConcepts(FragmentRef::Inline(fragment));
        }
    }
    events.sort_by_key(|e| e.at_run);
    Ok(events)
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<DomainEvent>, RewardError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RewardError::Io { path: path.into(), source })?;
    parse_events(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Events that can never fire within `1..=horizon`.
pub fn events_beyond(events: &[DomainEvent], horizon: u64) -> Vec<&DomainEvent> {
    events.iter().filter(|e| e.at_run > horizon || e.at_run == 0).collect()
}

/// Applies the events scheduled for `run`: new concepts join the schema and
/// every new object is registered at the start relevance in all task
/// classes. Returns the new objects.
pub fn apply_events(
    schema: &mut DomainSchema,
    store: &mut RelevanceStore,
    events: &[DomainEvent],
    run: u64,
) -> Result<Vec<ObjectKey>, RewardError> {
    let mut added = Vec::new();
    for ev in events.iter().filter(|e| e.at_run == run) {
        let fragment = match &ev.action {
            EventAction::SwitchRewards => continue,
            EventAction::AddConcepts(FragmentRef::Inline(f)) => f.clone(),
            EventAction::AddConcepts(FragmentRef::Path(p)) => DomainFragment::load(p)?,
        };
        let next = schema.add_concepts(&fragment)?;
        let fresh = next.objects_added_since(schema);
        for key in &fresh {
            store.register_everywhere(key, None)?;
        }
        *schema = next;
        added.extend(fresh);
    }
    Ok(added)
}
