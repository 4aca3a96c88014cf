//! Batch experiments: repeated learning runs with scripted rewards, traced
//! per run and averaged over repetitions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, DomainSchema};
use crate::par::{self, Parallelism};
use crate::relevance::{selection_distribution, ObjectKey, RelevanceError, RelevanceStore, RkfParams};
use crate::reward::{apply_events, events_beyond, load_events, DomainEvent, RewardError, RewardScript};
use crate::search::{Configurator, SearchError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Experiment description as stored on disk. Paths are relative to the
/// spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub domain: PathBuf,
    pub root: String,
    pub task_class: String,
    pub rewards: PathBuf,
    #[serde(default)]
    pub events: Option<PathBuf>,
    pub runs: u64,
    pub repetitions: u64,
    pub params: RkfParams,
    pub tracked: Vec<ObjectKey>,
    pub seed: u64,
}

/// A spec with its files loaded and checked.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub schema: DomainSchema,
    pub rewards: RewardScript,
    pub events: Vec<DomainEvent>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Invalid(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Experiment, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let spec = Self::from_json(&text)?;
        spec.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    /// Loads the referenced files relative to `base`.
    pub fn resolve(self, base: &Path) -> Result<Experiment, ExperimentError> {
        let schema = DomainSchema::load(base.join(&self.domain))?;
        let rewards = RewardScript::load(base.join(&self.rewards))?;
        let events = match &self.events {
            Some(p) => load_events(base.join(p))?,
            None => Vec::new(),
        };
        Experiment::new(self, schema, rewards, events)
    }
}

impl Experiment {
    pub fn new(
        spec: ExperimentSpec,
        schema: DomainSchema,
        rewards: RewardScript,
        events: Vec<DomainEvent>,
    ) -> Result<Self, ExperimentError> {
        if spec.runs == 0 || spec.repetitions == 0 {
            return Err(ExperimentError::Invalid("runs and repetitions must be at least 1".into()));
        }
        schema.require_root(&spec.root)?;
        for ev in events_beyond(&events, spec.runs) {
            log::warn!("event at run {} lies outside runs 1..={} and never fires", ev.at_run, spec.runs);
        }
        // everything the domain can contain once all events have fired
        let mut full = schema.clone();
        let mut scratch = RelevanceStore::new(spec.params);
        for run in 1..=spec.runs {
            apply_events(&mut full, &mut scratch, &events, run)?;
        }
        let known = full.objects();
        if let Some(key) = spec.tracked.iter().find(|k| !known.contains(k)) {
            return Err(ExperimentError::Invalid(format!("tracked object {key} never exists in the domain")));
        }
        let gaps = rewards.uncovered(&full, spec.runs);
        if !gaps.is_empty() {
            let list: Vec<String> = gaps.iter().map(ToString::to_string).collect();
            return Err(ExperimentError::Invalid(format!("reward script has no entry for {}", list.join(", "))));
        }
        Ok(Self { spec, schema, rewards, events })
    }

    /// Loads one of the bundled spec files by file name.
    pub fn bundled(file: &str) -> Result<Self, ExperimentError> {
        ExperimentSpec::load(crate::bundled::data_dir().join(file))
    }
}

/// One tracked object right before a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedSample {
    pub object: ObjectKey,
    pub relevance: f64,
    /// Selection probability among the tracked objects present at this run.
    pub probability: f64,
    /// Whether the run's solution used the object.
    pub chosen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub backtracks: u64,
    pub combinations_tested: u64,
    pub decisions: Vec<ObjectKey>,
    pub tracked: Vec<TrackedSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionTrace {
    pub repetition: u64,
    pub seed: u64,
    pub runs: Vec<RunRecord>,
}

impl RepetitionTrace {
    pub fn sample(&self, run: u64, object: &ObjectKey) -> Option<&TrackedSample> {
        let record = self.runs.get(run.checked_sub(1)? as usize)?;
        record.tracked.iter().find(|s| &s.object == object)
    }

    /// Mean probability of `object` over `runs`, counting absent runs as 0.
    pub fn mean_probability(&self, object: &ObjectKey, runs: std::ops::RangeInclusive<u64>) -> f64 {
        let n = runs.clone().count() as f64;
        runs.map(|r| self.sample(r, object).map_or(0.0, |s| s.probability)).sum::<f64>() / n
    }

    /// Tracked object with the highest selection probability before `run`.
    pub fn favourite(&self, run: u64) -> Option<&ObjectKey> {
        let record = self.runs.get(run.checked_sub(1)? as usize)?;
        record.tracked.iter().max_by(|a, b| a.probability.total_cmp(&b.probability)).map(|s| &s.object)
    }
}

/// Average over repetitions of one (run, object) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSample {
    pub run: u64,
    pub object: ObjectKey,
    pub relevance: f64,
    pub probability: f64,
    pub backtracks: f64,
    /// Fraction of repetitions whose solution used the object.
    pub chosen: f64,
    pub repetitions: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionFailure {
    pub repetition: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub traces: Vec<RepetitionTrace>,
    pub failures: Vec<RepetitionFailure>,
}

/// Runs one repetition with its own store and random stream.
pub fn run_repetition(exp: &Experiment, repetition: u64) -> Result<RepetitionTrace, ExperimentError> {
    let spec = &exp.spec;
    let class = spec.task_class.as_str();
    let seed = spec.seed.wrapping_add(repetition);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut schema = exp.schema.clone();
    let mut store = RelevanceStore::new(spec.params);
    store.add_class(class)?;
    for key in schema.objects() {
        store.register_object(key, class, None)?;
    }
    let mut configurator_schema = schema.clone();
    let mut runs = Vec::with_capacity(spec.runs as usize);
    for run in 1..=spec.runs {
        let present: Vec<&ObjectKey> = spec.tracked.iter().filter(|k| store.is_registered(k, class)).collect();
        let rels = present.iter().map(|k| store.current_relevance(k, class)).collect::<Result<Vec<_>, _>>()?;
        let probs = if rels.is_empty() { Vec::new() } else { selection_distribution(&rels, spec.params.v())? };

        let solution = Configurator::new(&configurator_schema).configure_with_rng(&spec.root, class, &store, &mut rng)?;
        let rewards = exp.rewards.rate(&solution, run)?;
        store.commit_run(&rewards, class)?;
        if !apply_events(&mut schema, &mut store, &exp.events, run)?.is_empty() {
            configurator_schema = schema.clone();
        }

        let tracked = present
            .into_iter()
            .zip(rels.into_iter().zip(probs))
            .map(|(k, (relevance, probability))| TrackedSample {
                object: k.clone(),
                relevance,
                probability,
                chosen: solution.decisions.contains(k),
            })
            .collect();
        runs.push(RunRecord {
            run,
            backtracks: solution.stats.backtracks,
            combinations_tested: solution.stats.combinations_tested,
            decisions: solution.decisions,
            tracked,
        });
    }
    Ok(RepetitionTrace { repetition, seed, runs })
}

/// Runs every repetition. A failing repetition is reported and skipped.
pub fn run_experiment(exp: &Experiment, mode: Parallelism) -> ExperimentOutcome {
    let results = par::map(mode, (0..exp.spec.repetitions).collect(), |rep| (rep, run_repetition(exp, rep)));
    let mut outcome = ExperimentOutcome { traces: Vec::new(), failures: Vec::new() };
    for (repetition, result) in results {
        match result {
            Ok(trace) => outcome.traces.push(trace),
            Err(e) => {
                log::error!("repetition {repetition} failed: {e}");
                outcome.failures.push(RepetitionFailure { repetition, error: e.to_string() });
            }
        }
    }
    outcome
}

impl ExperimentOutcome {
    /// Per (run, object) means over the repetitions in which the object
    /// existed at that run.
    pub fn means(&self) -> Vec<MeanSample> {
        let mut cells: BTreeMap<(u64, usize), MeanSample> = BTreeMap::new();
        let mut order: Vec<ObjectKey> = Vec::new();
        for trace in &self.traces {
            for record in &trace.runs {
                for s in &record.tracked {
                    let slot = match order.iter().position(|o| o == &s.object) {
                        Some(i) => i,
                        None => {
                            order.push(s.object.clone());
                            order.len() - 1
                        }
                    };
                    let cell = cells.entry((record.run, slot)).or_insert_with(|| MeanSample {
                        run: record.run,
                        object: s.object.clone(),
                        relevance: 0.0,
                        probability: 0.0,
                        backtracks: 0.0,
                        chosen: 0.0,
                        repetitions: 0,
                    });
                    cell.relevance += s.relevance;
                    cell.probability += s.probability;
                    cell.backtracks += record.backtracks as f64;
                    cell.chosen += f64::from(u8::from(s.chosen));
                    cell.repetitions += 1;
                }
            }
        }
        cells
            .into_values()
            .map(|mut m| {
                let n = m.repetitions as f64;
                m.relevance /= n;
                m.probability /= n;
                m.backtracks /= n;
                m.chosen /= n;
                m
            })
            .collect()
    }

    /// Mean backtracks per run index over all repetitions.
    pub fn mean_backtracks(&self) -> Vec<f64> {
        let runs = self.traces.iter().map(|t| t.runs.len()).max().unwrap_or(0);
        (0..runs)
            .map(|i| {
                let vals: Vec<f64> = self.traces.iter().filter_map(|t| t.runs.get(i)).map(|r| r.backtracks as f64).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect()
    }

    pub fn mean_probability(&self, run: u64, object: &ObjectKey) -> Option<f64> {
        self.means().into_iter().find(|m| m.run == run && &m.object == object).map(|m| m.probability)
    }
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    run: u64,
    repetition: String,
    object: &'a ObjectKey,
    relevance: f64,
    probability: f64,
    backtracks: f64,
    chosen: f64,
}

fn trace_rows(trace: &RepetitionTrace) -> impl Iterator<Item = CsvRow<'_>> {
    trace.runs.iter().flat_map(move |r| {
        r.tracked.iter().map(move |s| CsvRow {
            run: r.run,
            repetition: trace.repetition.to_string(),
            object: &s.object,
            relevance: s.relevance,
            probability: s.probability,
            backtracks: r.backtracks as f64,
            chosen: f64::from(u8::from(s.chosen)),
        })
    })
}

fn write_csv<'a>(path: &Path, rows: impl Iterator<Item = CsvRow<'a>>) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    name: Option<&'a str>,
    params: RkfParams,
    runs: u64,
    repetitions: u64,
    seed: u64,
    completed: usize,
    failures: &'a [RepetitionFailure],
    mean_backtracks: Vec<f64>,
    final_probabilities: BTreeMap<String, f64>,
}

/// Writes `trace-<rep>.csv` per repetition, the merged `trace.csv`,
/// `mean.csv` and `summary.json` into `dir`. Returns the written paths.
pub fn write_outputs(exp: &Experiment, outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let width = exp.spec.repetitions.saturating_sub(1).to_string().len();
    for trace in &outcome.traces {
        let path = dir.join(format!("trace-{:0width$}.csv", trace.repetition));
        write_csv(&path, trace_rows(trace))?;
        written.push(path);
    }
    let merged = dir.join("trace.csv");
    write_csv(&merged, outcome.traces.iter().flat_map(trace_rows))?;
    written.push(merged);

    let means = outcome.means();
    let mean_path = dir.join("mean.csv");
    write_csv(
        &mean_path,
        means.iter().map(|m| CsvRow {
            run: m.run,
            repetition: "mean".into(),
            object: &m.object,
            relevance: m.relevance,
            probability: m.probability,
            backtracks: m.backtracks,
            chosen: m.chosen,
        }),
    )?;
    written.push(mean_path);

    let last = exp.spec.runs;
    let summary = Summary {
        name: exp.spec.name.as_deref(),
        params: exp.spec.params,
        runs: exp.spec.runs,
        repetitions: exp.spec.repetitions,
        seed: exp.spec.seed,
        completed: outcome.traces.len(),
        failures: &outcome.failures,
        mean_backtracks: outcome.mean_backtracks(),
        final_probabilities: means.iter().filter(|m| m.run == last).map(|m| (m.object.to_string(), m.probability)).collect(),
    };
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&summary_path, text + "\n").map_err(io_err(&summary_path))?;
    written.push(summary_path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: u64, reps: u64) -> Experiment {
        let mut exp = Experiment::bundled("learning.spec.json").unwrap();
        exp.spec.runs = runs;
        exp.spec.repetitions = reps;
        exp
    }

    #[test]
    fn first_run_sees_uniform_disks() {
        let exp = small(1, 1);
        let out = run_experiment(&exp, Parallelism::Sequential);
        assert!(out.failures.is_empty());
        let record = &out.traces[0].runs[0];
        assert_eq!(record.tracked.len(), 4);
        for s in &record.tracked {
            assert_eq!(s.relevance, 0.5);
            assert!((s.probability - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let out = run_experiment(&small(120, 2), Parallelism::Sequential);
        for t in &out.traces {
            for r in &t.runs {
                let sum: f64 = r.tracked.iter().map(|s| s.probability).sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert_eq!(r.tracked.len(), if r.run <= 100 { 4 } else { 6 });
            }
        }
    }

    #[test]
    fn new_disks_enter_at_start_relevance() {
        let out = run_experiment(&small(101, 1), Parallelism::Sequential);
        let t = &out.traces[0];
        assert!(t.sample(100, &ObjectKey::concept("IDE22")).is_none());
        assert_eq!(t.sample(101, &ObjectKey::concept("IDE22")).unwrap().relevance, 0.5);
    }

    #[test]
    fn validation_errors() {
        let exp = small(10, 1);
        let mut spec = exp.spec.clone();
        spec.tracked.push(ObjectKey::concept("Floppy"));
        let err = Experiment::new(spec, exp.schema.clone(), exp.rewards.clone(), exp.events.clone()).unwrap_err();
        assert!(matches!(err, ExperimentError::Invalid(_)));
        let mut spec = exp.spec.clone();
        spec.runs = 0;
        assert!(Experiment::new(spec, exp.schema.clone(), exp.rewards.clone(), exp.events.clone()).is_err());
    }
}
