use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::math::{forget, relative_weights, sample_index, train_step};
use super::{ObjectKey, RelevanceError, RkfParams, TrainBaseMode};

/// Relevance given to an object when it is first stored and nobody supplied a
/// better estimate.
pub const START_RELEVANCE: f64 = 0.5;

/// Rewards for the objects of one accepted solution.
pub type RewardMap = BTreeMap<ObjectKey, f64>;

/// The two numbers kept per object and task class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRecord {
    /// Run index of the last training (or of registration).
    pub last_use: u64,
    /// Relevance right after that run.
    pub last_use_rel: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct ClassState {
    /// Completed runs in this class.
    clock: u64,
    records: HashMap<ObjectKey, RelevanceRecord>,
}

/// Relevance records for every registered object in every task class.
///
/// Mutations on one class must be externally ordered; `&self` methods only
/// read and may run concurrently.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceStore {
    params: RkfParams,
    classes: BTreeMap<String, ClassState>,
}

impl RelevanceStore {
    pub fn new(params: RkfParams) -> Self {
        Self { params, classes: BTreeMap::new() }
    }

    pub fn params(&self) -> &RkfParams {
        &self.params
    }

    pub fn add_class(&mut self, class: impl Into<String>) -> Result<(), RelevanceError> {
        let class = class.into();
        if self.classes.contains_key(&class) {
            return Err(RelevanceError::ClassExists(class));
        }
        self.classes.insert(class, ClassState::default());
        Ok(())
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.classes.contains_key(class)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    /// Completed runs in `class`.
    pub fn clock(&self, class: &str) -> Result<u64, RelevanceError> {
        Ok(self.class(class)?.clock)
    }

    fn class(&self, class: &str) -> Result<&ClassState, RelevanceError> {
        self.classes.get(class).ok_or_else(|| RelevanceError::UnknownClass(class.to_string()))
    }

    fn class_mut(&mut self, class: &str) -> Result<&mut ClassState, RelevanceError> {
        self.classes.get_mut(class).ok_or_else(|| RelevanceError::UnknownClass(class.to_string()))
    }

    /// Stores a new object in `class`, stamped with the class clock.
    pub fn register_object(
        &mut self,
        key: ObjectKey,
        class: &str,
        initial_rel: Option<f64>,
    ) -> Result<(), RelevanceError> {
        let rel = initial_rel.unwrap_or(START_RELEVANCE);
        if !(0.0..=1.0).contains(&rel) {
            return Err(RelevanceError::OutOfRange { what: "initial relevance", value: rel });
        }
        let state = self.class_mut(class)?;
        if state.records.contains_key(&key) {
            return Err(RelevanceError::DuplicateObject { key, class: class.to_string() });
        }
        let record = RelevanceRecord { last_use: state.clock, last_use_rel: rel };
        state.records.insert(key, record);
        Ok(())
    }

    /// Registers `key` in every class where it is not yet present.
    pub fn register_everywhere(&mut self, key: &ObjectKey, initial_rel: Option<f64>) -> Result<(), RelevanceError> {
        let classes: Vec<String> = self
            .classes
            .iter()
            .filter(|(_, s)| !s.records.contains_key(key))
            .map(|(c, _)| c.clone())
            .collect();
        for class in classes {
            self.register_object(key.clone(), &class, initial_rel)?;
        }
        Ok(())
    }

    pub fn is_registered(&self, key: &ObjectKey, class: &str) -> bool {
        self.classes.get(class).is_some_and(|s| s.records.contains_key(key))
    }

    pub fn record(&self, key: &ObjectKey, class: &str) -> Result<&RelevanceRecord, RelevanceError> {
        self.class(class)?
            .records
            .get(key)
            .ok_or_else(|| RelevanceError::MissingRecord { key: key.clone(), class: class.to_string() })
    }

    /// Records of `class` in key order.
    pub fn records(&self, class: &str) -> Result<Vec<(&ObjectKey, &RelevanceRecord)>, RelevanceError> {
        let mut out: Vec<_> = self.class(class)?.records.iter().collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        Ok(out)
    }

    /// Total number of stored records over all classes.
    pub fn record_count(&self) -> usize {
        self.classes.values().map(|s| s.records.len()).sum()
    }

    /// Distinct objects registered in at least one class.
    pub fn objects(&self) -> BTreeSet<ObjectKey> {
        self.classes.values().flat_map(|s| s.records.keys().cloned()).collect()
    }

    /// Relevance of `key` at run `as_of_run`, decayed since its last use.
    pub fn state_relevance(&self, key: &ObjectKey, as_of_run: u64, class: &str) -> Result<f64, RelevanceError> {
        let record = self.record(key, class)?;
        if as_of_run < record.last_use {
            return Err(RelevanceError::TimeTravel { key: key.clone(), as_of: as_of_run, last_use: record.last_use });
        }
        Ok(forget(record.last_use_rel, self.params.b_f(), as_of_run - record.last_use))
    }

    /// Relevance as seen by the next run of `class`.
    pub fn current_relevance(&self, key: &ObjectKey, class: &str) -> Result<f64, RelevanceError> {
        self.state_relevance(key, self.clock(class)?, class)
    }

    /// Selection probabilities of `candidates` as seen by the next run.
    pub fn selection_probabilities(&self, candidates: &[ObjectKey], class: &str) -> Result<Vec<f64>, RelevanceError> {
        let clock = self.clock(class)?;
        let rels = candidates
            .iter()
            .map(|k| self.state_relevance(k, clock, class))
            .collect::<Result<Vec<_>, _>>()?;
        super::selection_distribution(&rels, self.params.v())
    }

    /// Picks one of `candidates` with probability proportional to
    /// `relevance^v`.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        candidates: &[ObjectKey],
        class: &str,
        as_of_run: u64,
        rng: &mut R,
    ) -> Result<ObjectKey, RelevanceError> {
        if candidates.is_empty() {
            return Err(RelevanceError::EmptyChoice);
        }
        let rels = candidates
            .iter()
            .map(|k| self.state_relevance(k, as_of_run, class))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = relative_weights(&rels, self.params.v());
        Ok(candidates[sample_index(&weights, rng)].clone())
    }

    /// Trains every rewarded object and advances the class clock by one.
    /// Returns the index of the committed run.
    ///
    /// Nothing is modified if any key or reward is invalid.
    pub fn commit_run(&mut self, rewards: &RewardMap, class: &str) -> Result<u64, RelevanceError> {
        let b_t = self.params.b_t();
        let b_f = self.params.b_f();
        let mode = self.params.mode();
        let state = self.class_mut(class)?;
        let run = state.clock + 1;
        let mut updates = Vec::with_capacity(rewards.len());
        for (key, &reward) in rewards {
            let record = state
                .records
                .get(key)
                .ok_or_else(|| RelevanceError::MissingRecord { key: key.clone(), class: class.to_string() })?;
            let base_age = match mode {
                TrainBaseMode::StrictEq19 => run - 1 - record.last_use,
                TrainBaseMode::LazySec42 => run - record.last_use,
            };
            let base = forget(record.last_use_rel, b_f, base_age);
            let trained = train_step(base, reward, b_t)?;
            updates.push((key, trained));
        }
        for (key, rel) in updates {
            let record = state.records.get_mut(key).expect("validated above");
            record.last_use = run;
            record.last_use_rel = rel;
        }
        state.clock = run;
        Ok(run)
    }

    /// Refines `class` into `c1` and `c2`: `class` is renamed to `c1` and `c2`
    /// starts as an exact copy of it.
    pub fn split_task_class(&mut self, class: &str, c1: &str, c2: &str) -> Result<(), RelevanceError> {
        if !self.classes.contains_key(class) {
            return Err(RelevanceError::UnknownClass(class.to_string()));
        }
        if c1 == c2 {
            return Err(RelevanceError::ClassExists(c2.to_string()));
        }
        for target in [c1, c2] {
            if target != class && self.classes.contains_key(target) {
                return Err(RelevanceError::ClassExists(target.to_string()));
            }
        }
        let state = self.classes.remove(class).expect("checked above");
        self.classes.insert(c2.to_string(), state.clone());
        self.classes.insert(c1.to_string(), state);
        Ok(())
    }

    /// Deletes every object whose highest relevance over all classes is below
    /// `threshold`. Classes missing from `as_of` are evaluated at their clock.
    pub fn maintenance_sweep(
        &mut self,
        threshold: f64,
        as_of: &BTreeMap<String, u64>,
    ) -> Result<Vec<ObjectKey>, RelevanceError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(RelevanceError::OutOfRange { what: "threshold", value: threshold });
        }
        let mut best: BTreeMap<ObjectKey, f64> = BTreeMap::new();
        for (class, state) in &self.classes {
            let at = as_of.get(class).copied().unwrap_or(state.clock);
            for (key, record) in &state.records {
                if at < record.last_use {
                    return Err(RelevanceError::TimeTravel { key: key.clone(), as_of: at, last_use: record.last_use });
                }
                let rel = forget(record.last_use_rel, self.params.b_f(), at - record.last_use);
                let entry = best.entry(key.clone()).or_insert(rel);
                *entry = entry.max(rel);
            }
        }
        let doomed: Vec<ObjectKey> = best.into_iter().filter(|(_, r)| *r < threshold).map(|(k, _)| k).collect();
        for state in self.classes.values_mut() {
            for key in &doomed {
                state.records.remove(key);
            }
        }
        Ok(doomed)
    }

    /// Sweep evaluated at every class clock.
    pub fn sweep_at_clocks(&mut self, threshold: f64) -> Result<Vec<ObjectKey>, RelevanceError> {
        self.maintenance_sweep(threshold, &BTreeMap::new())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StoreDocument::from(self)).expect("store serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RelevanceError> {
        let doc: StoreDocument = serde_json::from_str(text).map_err(|e| RelevanceError::Document(e.to_string()))?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RelevanceError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RelevanceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk form. Floats are written in shortest round-trip notation, which
/// restores every stored value bit for bit.
#[derive(Serialize, Deserialize)]
struct StoreDocument {
    params: RkfParams,
    clocks: BTreeMap<String, u64>,
    records: BTreeMap<String, BTreeMap<ObjectKey, RelevanceRecord>>,
}

impl From<&RelevanceStore> for StoreDocument {
    fn from(store: &RelevanceStore) -> Self {
        StoreDocument {
            params: store.params,
            clocks: store.classes.iter().map(|(c, s)| (c.clone(), s.clock)).collect(),
            records: store
                .classes
                .iter()
                .map(|(c, s)| (c.clone(), s.records.iter().map(|(k, r)| (k.clone(), *r)).collect()))
                .collect(),
        }
    }
}

impl TryFrom<StoreDocument> for RelevanceStore {
    type Error = RelevanceError;

    fn try_from(doc: StoreDocument) -> Result<Self, Self::Error> {
        let mut store = RelevanceStore::new(doc.params);
        for (class, clock) in doc.clocks {
            store.classes.insert(class, ClassState { clock, records: HashMap::new() });
        }
        for (class, records) in doc.records {
            let state = store
                .classes
                .get_mut(&class)
                .ok_or_else(|| RelevanceError::Document(format!("records for class {class:?} without a clock")))?;
            for (key, record) in records {
                if !(0.0..=1.0).contains(&record.last_use_rel) {
                    return Err(RelevanceError::Document(format!("{key}: relevance {} outside [0, 1]", record.last_use_rel)));
                }
                if record.last_use > state.clock {
                    return Err(RelevanceError::Document(format!(
                        "{key}: last use {} after class clock {}",
                        record.last_use, state.clock
                    )));
                }
                state.records.insert(key, record);
            }
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const HOME: &str = "Home-PC";

    fn store(b_t: f64, b_f: f64, v: f64) -> RelevanceStore {
        let mut s = RelevanceStore::new(RkfParams::new(b_t, b_f, v).unwrap());
        s.add_class(HOME).unwrap();
        s
    }

    fn rewards(pairs: &[(&ObjectKey, f64)]) -> RewardMap {
        pairs.iter().map(|(k, r)| ((*k).clone(), *r)).collect()
    }

    #[test]
    fn registration_defaults_to_start_relevance() {
        let mut s = store(1.4, 1.1, 1.9);
        let k = ObjectKey::concept("IDE13");
        s.register_object(k.clone(), HOME, None).unwrap();
        assert_eq!(s.record(&k, HOME).unwrap().last_use_rel, 0.5);
        let k2 = ObjectKey::concept("IDE20");
        s.register_object(k2.clone(), HOME, Some(0.8)).unwrap();
        assert_eq!(s.record(&k2, HOME).unwrap().last_use_rel, 0.8);
        assert!(matches!(
            s.register_object(k.clone(), HOME, None),
            Err(RelevanceError::DuplicateObject { .. })
        ));
        assert!(s.register_object(ObjectKey::concept("x"), HOME, Some(1.5)).is_err());
        assert!(matches!(s.register_object(ObjectKey::concept("x"), "nope", None), Err(RelevanceError::UnknownClass(_))));
    }

    #[test]
    fn late_registration_starts_at_age_zero() {
        let mut s = store(1.4, 1.1, 1.9);
        for _ in 0..100 {
            s.commit_run(&RewardMap::new(), HOME).unwrap();
        }
        let k = ObjectKey::concept("IDE22");
        s.register_object(k.clone(), HOME, None).unwrap();
        assert_eq!(s.record(&k, HOME).unwrap().last_use, 100);
        assert_eq!(s.state_relevance(&k, 100, HOME).unwrap(), 0.5);
    }

    #[test]
    fn state_relevance_errors() {
        let mut s = store(1.4, 1.1, 1.9);
        let k = ObjectKey::concept("a");
        assert!(matches!(s.state_relevance(&k, 0, HOME), Err(RelevanceError::MissingRecord { .. })));
        s.commit_run(&RewardMap::new(), HOME).unwrap();
        s.register_object(k.clone(), HOME, None).unwrap();
        assert!(matches!(s.state_relevance(&k, 0, HOME), Err(RelevanceError::TimeTravel { .. })));
    }

    #[test]
    fn consecutive_training_chains_without_decay() {
        let mut s = store(2.0, 1.1, 1.0);
        let k = ObjectKey::concept("o");
        s.register_object(k.clone(), HOME, None).unwrap();
        for _ in 0..3 {
            s.commit_run(&rewards(&[(&k, 1.0)]), HOME).unwrap();
        }
        // 1 - 0.5 * 0.5^3
        assert_abs_diff_eq!(s.record(&k, HOME).unwrap().last_use_rel, 0.9375, epsilon = 1e-15);
        assert_eq!(s.clock(HOME).unwrap(), 3);
    }

    #[test]
    fn lazy_mode_inserts_one_decay_step() {
        let mut s = RelevanceStore::new(RkfParams::with_mode(2.0, 1.1, 1.0, TrainBaseMode::LazySec42).unwrap());
        s.add_class(HOME).unwrap();
        let k = ObjectKey::concept("o");
        s.register_object(k.clone(), HOME, None).unwrap();
        s.commit_run(&rewards(&[(&k, 1.0)]), HOME).unwrap();
        let base = 0.5 / 1.1;
        assert_abs_diff_eq!(s.record(&k, HOME).unwrap().last_use_rel, base + (1.0 - base) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_commit_only_advances_the_clock() {
        let mut s = store(1.4, 1.1, 1.9);
        let k = ObjectKey::concept("o");
        s.register_object(k.clone(), HOME, None).unwrap();
        let before = *s.record(&k, HOME).unwrap();
        assert_eq!(s.commit_run(&RewardMap::new(), HOME).unwrap(), 1);
        assert_eq!(*s.record(&k, HOME).unwrap(), before);
        assert_eq!(s.clock(HOME).unwrap(), 1);
    }

    #[test]
    fn zero_reward_refreshes_last_use_only() {
        let mut s = store(1.4, 1.1, 1.9);
        let k = ObjectKey::concept("o");
        s.register_object(k.clone(), HOME, None).unwrap();
        s.commit_run(&rewards(&[(&k, 1.0)]), HOME).unwrap();
        let rel = s.record(&k, HOME).unwrap().last_use_rel;
        s.commit_run(&rewards(&[(&k, 0.0)]), HOME).unwrap();
        let rec = s.record(&k, HOME).unwrap();
        assert_eq!(rec.last_use_rel, rel);
        assert_eq!(rec.last_use, 2);
    }

    #[test]
    fn invalid_commit_changes_nothing() {
        let mut s = store(1.4, 1.1, 1.9);
        let k = ObjectKey::concept("o");
        s.register_object(k.clone(), HOME, None).unwrap();
        let snapshot = s.clone();
        let unknown = ObjectKey::concept("ghost");
        assert!(s.commit_run(&rewards(&[(&k, 1.0), (&unknown, 1.0)]), HOME).is_err());
        assert!(s.commit_run(&rewards(&[(&k, 1.5)]), HOME).is_err());
        assert!(s.commit_run(&rewards(&[(&k, 1.0)]), "Server-PC").is_err());
        assert_eq!(s, snapshot);
    }

    #[test]
    fn untouched_records_decay_lazily() {
        let mut s = store(1.4, 1.1, 1.9);
        let a = ObjectKey::concept("a");
        let b = ObjectKey::concept("b");
        s.register_object(a.clone(), HOME, None).unwrap();
        s.register_object(b.clone(), HOME, None).unwrap();
        for _ in 0..5 {
            s.commit_run(&rewards(&[(&a, 1.0)]), HOME).unwrap();
        }
        assert_eq!(*s.record(&b, HOME).unwrap(), RelevanceRecord { last_use: 0, last_use_rel: 0.5 });
        assert_abs_diff_eq!(s.current_relevance(&b, HOME).unwrap(), 0.5 / 1.1f64.powi(5), epsilon = 1e-15);
    }

    #[test]
    fn split_copies_records_and_clock() {
        let mut s = store(1.4, 1.1, 1.9);
        let a = ObjectKey::concept("a");
        s.register_object(a.clone(), HOME, None).unwrap();
        s.commit_run(&rewards(&[(&a, 1.0)]), HOME).unwrap();
        s.split_task_class(HOME, "Game-PC", "Internet-PC").unwrap();
        assert!(!s.has_class(HOME));
        assert_eq!(s.record(&a, "Game-PC").unwrap(), s.record(&a, "Internet-PC").unwrap());
        assert_eq!(s.clock("Game-PC").unwrap(), s.clock("Internet-PC").unwrap());

        s.commit_run(&rewards(&[(&a, 0.5)]), "Game-PC").unwrap();
        assert_eq!(s.clock("Internet-PC").unwrap(), 1);
        assert_eq!(s.record(&a, "Internet-PC").unwrap().last_use, 1);
        assert_eq!(s.record(&a, "Game-PC").unwrap().last_use, 2);
    }

    #[test]
    fn split_of_empty_class_and_errors() {
        let mut s = store(1.4, 1.1, 1.9);
        s.split_task_class(HOME, HOME, "Server-PC").unwrap();
        assert_eq!(s.clock(HOME).unwrap(), 0);
        assert_eq!(s.clock("Server-PC").unwrap(), 0);
        assert_eq!(s.record_count(), 0);
        assert!(matches!(s.split_task_class("nope", "x", "y"), Err(RelevanceError::UnknownClass(_))));
        assert!(matches!(s.split_task_class(HOME, "x", "Server-PC"), Err(RelevanceError::ClassExists(_))));
        assert!(matches!(s.split_task_class(HOME, "x", "x"), Err(RelevanceError::ClassExists(_))));
    }

    #[test]
    fn sweep_examples() {
        let mut s = store(1.4, 1.1, 1.9);
        let old = ObjectKey::concept("old");
        s.register_object(old.clone(), HOME, None).unwrap();
        for _ in 0..200 {
            s.commit_run(&RewardMap::new(), HOME).unwrap();
        }
        assert!(s.sweep_at_clocks(0.0).unwrap().is_empty());
        // 0.5 * 1.1^-200 is about 2.6e-9.
        assert_eq!(s.sweep_at_clocks(0.01).unwrap(), vec![old.clone()]);
        assert_eq!(s.record_count(), 0);
    }

    #[test]
    fn sweep_keeps_objects_relevant_somewhere() {
        let mut s = store(1.4, 1.1, 1.9);
        s.add_class("Server-PC").unwrap();
        let k = ObjectKey::concept("disk");
        s.register_object(k.clone(), HOME, Some(0.9)).unwrap();
        s.register_object(k.clone(), "Server-PC", Some(1e-9)).unwrap();
        assert!(s.sweep_at_clocks(0.5).unwrap().is_empty());
        let mut as_of = BTreeMap::new();
        as_of.insert(HOME.to_string(), 100);
        assert_eq!(s.maintenance_sweep(0.5, &as_of).unwrap(), vec![k]);
        assert!(s.sweep_at_clocks(1.5).is_err());
    }

    #[test]
    fn draw_edge_cases() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut s = store(1.4, 1.1, 1.0);
        let a = ObjectKey::concept("a");
        let b = ObjectKey::concept("b");
        s.register_object(a.clone(), HOME, Some(0.0)).unwrap();
        s.register_object(b.clone(), HOME, Some(1.0)).unwrap();
        assert_eq!(s.draw(std::slice::from_ref(&a), HOME, 0, &mut rng).unwrap(), a);
        for _ in 0..1000 {
            assert_eq!(s.draw(&[b.clone(), a.clone()], HOME, 0, &mut rng).unwrap(), b);
        }
        assert!(matches!(s.draw(&[], HOME, 0, &mut rng), Err(RelevanceError::EmptyChoice)));
    }

    #[test]
    fn draw_is_deterministic_per_seed() {
        use rand::SeedableRng;
        let mut s = store(1.4, 1.1, 1.9);
        let keys: Vec<_> = (0..5).map(|i| ObjectKey::concept(format!("c{i}"))).collect();
        for (i, k) in keys.iter().enumerate() {
            s.register_object(k.clone(), HOME, Some(0.1 + 0.15 * i as f64)).unwrap();
        }
        let run = |seed| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| s.draw(&keys, HOME, 0, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn document_round_trip_is_exact() {
        let mut s = store(1.4, 1.1, 1.9);
        s.add_class("Server-PC").unwrap();
        let a = ObjectKey::concept("a");
        let c = ObjectKey::count("controller-harddisk", 2);
        s.register_object(a.clone(), HOME, None).unwrap();
        s.register_object(c.clone(), HOME, Some(0.1)).unwrap();
        s.register_object(a.clone(), "Server-PC", Some(1.0 / 3.0)).unwrap();
        for i in 0..7 {
            s.commit_run(&rewards(&[(&a, 0.37 * (i as f64 % 3.0) / 2.0), (&c, 0.1)]), HOME).unwrap();
        }
        let back = RelevanceStore::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        for (k, r) in s.records(HOME).unwrap() {
            assert_eq!(back.record(k, HOME).unwrap().last_use_rel.to_bits(), r.last_use_rel.to_bits());
        }
    }

    #[test]
    fn document_validation() {
        let bad_rel = r#"{"params":{"b_t":1.4,"b_f":1.1,"v":1.9},"clocks":{"A":1},"records":{"A":{"concept:x":{"last_use":0,"last_use_rel":1.5}}}}"#;
        assert!(RelevanceStore::from_json(bad_rel).is_err());
        let future = r#"{"params":{"b_t":1.4,"b_f":1.1,"v":1.9},"clocks":{"A":1},"records":{"A":{"concept:x":{"last_use":5,"last_use_rel":0.5}}}}"#;
        assert!(RelevanceStore::from_json(future).is_err());
        let orphan = r#"{"params":{"b_t":1.4,"b_f":1.1,"v":1.9},"clocks":{},"records":{"A":{}}}"#;
        assert!(RelevanceStore::from_json(orphan).is_err());
        let bad_key = r#"{"params":{"b_t":1.4,"b_f":1.1,"v":1.9},"clocks":{"A":1},"records":{"A":{"x":{"last_use":0,"last_use_rel":0.5}}}}"#;
        assert!(RelevanceStore::from_json(bad_key).is_err());
    }
}
