//! Build-and-test configurator: depth-first construction where every
//! specialization, part count and parameter value is drawn by relevance,
//! followed by a relation check on the complete configuration and
//! chronological backtracking on failure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, DomainSchema, RelationSemantics};
use crate::relevance::{relative_weights, sample_index, ObjectKey, RelevanceError, RelevanceStore};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error("{key} is a candidate but has no relevance record in task class {class:?}")]
    Unregistered { key: ObjectKey, class: String },
    #[error("no configuration satisfies the relations ({tested} combinations tested)")]
    NoSolution { tested: u64 },
    #[error("gave up after {tested} combinations without a valid configuration")]
    LimitReached { tested: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRequest {
    pub root: String,
    pub task_class: String,
    pub rng_seed: u64,
}

/// A component of a configuration. Its concept is always a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentInstance {
    pub instance_id: u32,
    pub concept: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<PartGroup>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
}

/// The ordered components filling one part relation of their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartGroup {
    pub relation: String,
    pub components: Vec<ComponentInstance>,
}

impl ComponentInstance {
    /// This instance and all descendants, depth first.
    pub fn walk(&self) -> Vec<&ComponentInstance> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            for group in node.children.iter().rev() {
                stack.extend(group.components.iter().rev());
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().flat_map(|g| &g.components).map(ComponentInstance::size).sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Complete combinations rejected by the relation check.
    pub backtracks: u64,
    pub combinations_tested: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub root: ComponentInstance,
    /// Every choice the configuration embodies, in the order it was made.
    pub decisions: Vec<ObjectKey>,
    pub stats: SearchStats,
}

impl Solution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    /// Decision objects without repetitions, in key order.
    pub fn distinct_decisions(&self) -> Vec<ObjectKey> {
        let mut keys = self.decisions.clone();
        keys.sort();
        keys.dedup();
        keys
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub relation: String,
    /// Instances of the constrained kind that do not satisfy the relation.
    pub offenders: Vec<u32>,
}

/// Checks every n:m relation of `schema` on a complete configuration.
pub fn check_relations(schema: &DomainSchema, root: &ComponentInstance) -> Vec<Violation> {
    let nodes: Vec<(u32, Option<usize>)> =
        root.walk().into_iter().map(|n| (n.instance_id, schema.concept_index(&n.concept))).collect();
    let mut out = Vec::new();
    for (r, rel) in schema.relations().iter().enumerate() {
        let mut offenders = Vec::new();
        for (forcing, forced) in endpoints(schema, r) {
            let dim = schema.dimension_ix(forced);
            let triggered = nodes.iter().any(|(_, c)| c.is_some_and(|c| schema.subsumes_ix(forcing, c)));
            if !triggered {
                continue;
            }
            for (id, c) in &nodes {
                if let Some(c) = *c {
                    if schema.subsumes_ix(dim, c) && !schema.subsumes_ix(forced, c) && !offenders.contains(id) {
                        offenders.push(*id);
                    }
                }
            }
        }
        if !offenders.is_empty() {
            offenders.sort_unstable();
            out.push(Violation { relation: rel.id.clone(), offenders });
        }
    }
    out
}

/// (forcing, forced) concept pairs of relation `r`.
fn endpoints(schema: &DomainSchema, r: usize) -> Vec<(usize, usize)> {
    let rel = &schema.relations()[r];
    let left = schema.concept_index(&rel.left).expect("validated");
    let right = schema.concept_index(&rel.right).expect("validated");
    match rel.semantics {
        RelationSemantics::LeftForcesRight => vec![(left, right)],
        RelationSemantics::Mutual => vec![(left, right), (right, left)],
    }
}

/// Relation check over bare concept indices; same semantics as
/// [`check_relations`].
pub(crate) struct RelationChecker {
    /// (forcing, forced, dimension of forced)
    rules: Vec<(usize, usize, usize)>,
}

impl RelationChecker {
    pub(crate) fn new(schema: &DomainSchema) -> Self {
        let rules = (0..schema.relations().len())
            .flat_map(|r| endpoints(schema, r))
            .map(|(forcing, forced)| (forcing, forced, schema.dimension_ix(forced)))
            .collect();
        Self { rules }
    }

    pub(crate) fn holds(&self, schema: &DomainSchema, concepts: impl Iterator<Item = usize> + Clone) -> bool {
        self.rules.iter().all(|&(forcing, forced, dim)| {
            !concepts.clone().any(|c| schema.subsumes_ix(forcing, c))
                || concepts.clone().all(|c| !schema.subsumes_ix(dim, c) || schema.subsumes_ix(forced, c))
        })
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
enum Step {
    Spawn { parent: u32, rel: u32 },
    Specialize { node: u32 },
    Decompose { node: u32, rel: u32 },
    Param { node: u32, param: u32 },
}

#[derive(Clone, Copy, Debug)]
enum Choice {
    Concept(u32),
    Count(u32, u32),
    Param(u32, u32),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    concept: u32,
    parent: u32,
    rel: u32,
}

struct ChoicePoint {
    step: Step,
    agenda: Vec<Step>,
    nodes_len: usize,
    params_len: usize,
    decisions_len: usize,
    prior_concept: u32,
    /// Untried alternatives with their relevance.
    remaining: Vec<(Choice, f64)>,
}

/// Relevance of every object of the schema as seen by the next run.
struct RelevanceView {
    concepts: Vec<Option<f64>>,
    counts: Vec<Vec<Option<f64>>>,
    params: Vec<Vec<Option<f64>>>,
}

impl RelevanceView {
    fn new(schema: &DomainSchema, store: &RelevanceStore, class: &str) -> Result<Self, SearchError> {
        let clock = store.clock(class)?;
        let rel = |key: ObjectKey| {
            if store.is_registered(&key, class) {
                store.state_relevance(&key, clock, class).map(Some)
            } else {
                Ok(None)
            }
        };
        let concepts = schema.concepts().iter().map(|c| rel(ObjectKey::concept(&c.id))).collect::<Result<_, _>>()?;
        let counts = schema
            .parts()
            .iter()
            .map(|p| (p.min..=p.max).map(|n| rel(ObjectKey::count(&p.id, n))).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let params = schema
            .params()
            .iter()
            .map(|p| (0..p.values.len() as u32).map(|i| rel(ObjectKey::param(&p.id, i))).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        Ok(Self { concepts, counts, params })
    }
}

/// Runs configurations over one schema.
pub struct Configurator<'a> {
    schema: &'a DomainSchema,
    checker: RelationChecker,
    /// Concept of the components each part relation spawns.
    part_concepts: Vec<u32>,
    limit: Option<u64>,
}

/// One-shot convenience around [`Configurator`].
pub fn configure(schema: &DomainSchema, request: &ConfigRequest, store: &RelevanceStore) -> Result<Solution, SearchError> {
    Configurator::new(schema).configure(request, store)
}

impl<'a> Configurator<'a> {
    pub fn new(schema: &'a DomainSchema) -> Self {
        let part_concepts =
            schema.parts().iter().map(|p| schema.concept_index(&p.part).expect("validated") as u32).collect();
        Self { schema, checker: RelationChecker::new(schema), part_concepts, limit: None }
    }

    /// Stop after `max` tested combinations instead of exhausting the space.
    pub fn with_limit(mut self, max: u64) -> Self {
        self.limit = Some(max);
        self
    }

    pub fn configure(&self, request: &ConfigRequest, store: &RelevanceStore) -> Result<Solution, SearchError> {
        let mut rng = ChaCha8Rng::seed_from_u64(request.rng_seed);
        self.configure_with_rng(&request.root, &request.task_class, store, &mut rng)
    }

    pub fn configure_with_rng<R: Rng + ?Sized>(
        &self,
        root: &str,
        class: &str,
        store: &RelevanceStore,
        rng: &mut R,
    ) -> Result<Solution, SearchError> {
        let schema = self.schema;
        schema.require_root(root)?;
        let view = RelevanceView::new(schema, store, class)?;
        let mut search = Search {
            schema,
            part_concepts: &self.part_concepts,
            view: &view,
            class,
            v: store.params().v(),
            nodes: vec![Node { concept: schema.concept_index(root).expect("root exists") as u32, parent: NO_PARENT, rel: 0 }],
            params: Vec::new(),
            decisions: Vec::new(),
            agenda: vec![Step::Specialize { node: 0 }],
            stack: Vec::new(),
        };
        let mut stats = SearchStats::default();
        loop {
            search.build(rng)?;
            stats.combinations_tested += 1;
            if self.checker.holds(schema, search.nodes.iter().map(|n| n.concept as usize)) {
                return Ok(search.solution(stats));
            }
            stats.backtracks += 1;
            if self.limit.is_some_and(|max| stats.combinations_tested >= max) {
                return Err(SearchError::LimitReached { tested: stats.combinations_tested });
            }
            if !search.backtrack(rng) {
                return Err(SearchError::NoSolution { tested: stats.combinations_tested });
            }
        }
    }
}

struct Search<'s> {
    schema: &'s DomainSchema,
    part_concepts: &'s [u32],
    view: &'s RelevanceView,
    class: &'s str,
    v: f64,
    nodes: Vec<Node>,
    params: Vec<(u32, u32, u32)>,
    decisions: Vec<Choice>,
    agenda: Vec<Step>,
    stack: Vec<ChoicePoint>,
}

impl Search<'_> {
    fn key(&self, choice: Choice) -> ObjectKey {
        let schema = self.schema;
        match choice {
            Choice::Concept(c) => ObjectKey::concept(&schema.concepts()[c as usize].id),
            Choice::Count(r, n) => ObjectKey::count(&schema.parts()[r as usize].id, n),
            Choice::Param(p, i) => ObjectKey::param(&schema.params()[p as usize].id, i),
        }
    }

    fn options(&self, step: Step) -> Result<Vec<(Choice, f64)>, SearchError> {
        let schema = self.schema;
        let choices: Vec<(Choice, Option<f64>)> = match step {
            Step::Specialize { node } => schema
                .children_ix(self.nodes[node as usize].concept as usize)
                .iter()
                .map(|&c| (Choice::Concept(c as u32), self.view.concepts[c]))
                .collect(),
            Step::Decompose { rel, .. } => {
                let part = &schema.parts()[rel as usize];
                (part.min..=part.max)
                    .map(|n| (Choice::Count(rel, n), self.view.counts[rel as usize][(n - part.min) as usize]))
                    .collect()
            }
            Step::Param { param, .. } => self.view.params[param as usize]
                .iter()
                .enumerate()
                .map(|(i, r)| (Choice::Param(param, i as u32), *r))
                .collect(),
            Step::Spawn { .. } => unreachable!("spawn is not a choice"),
        };
        choices
            .into_iter()
            .map(|(choice, rel)| match rel {
                Some(r) => Ok((choice, r)),
                None => Err(SearchError::Unregistered { key: self.key(choice), class: self.class.to_string() }),
            })
            .collect()
    }

    fn pick<R: Rng + ?Sized>(&self, options: &mut Vec<(Choice, f64)>, rng: &mut R) -> Choice {
        let rels: Vec<f64> = options.iter().map(|o| o.1).collect();
        let idx = sample_index(&relative_weights(&rels, self.v), rng);
        options.remove(idx).0
    }

    /// Runs the agenda until the configuration is complete.
    fn build<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), SearchError> {
        while let Some(step) = self.agenda.pop() {
            match step {
                Step::Spawn { parent, rel } => {
                    self.nodes.push(Node { concept: self.part_concepts[rel as usize], parent, rel });
                    self.agenda.push(Step::Specialize { node: (self.nodes.len() - 1) as u32 });
                }
                Step::Specialize { node } => {
                    let concept = self.nodes[node as usize].concept as usize;
                    if self.schema.children_ix(concept).is_empty() {
                        for &p in self.schema.leaf_params_ix(concept).iter().rev() {
                            self.agenda.push(Step::Param { node, param: p as u32 });
                        }
                        for &r in self.schema.leaf_parts_ix(concept).iter().rev() {
                            self.agenda.push(Step::Decompose { node, rel: r as u32 });
                        }
                    } else {
                        self.choose(step, rng)?;
                    }
                }
                Step::Decompose { .. } | Step::Param { .. } => self.choose(step, rng)?,
            }
        }
        Ok(())
    }

    fn choose<R: Rng + ?Sized>(&mut self, step: Step, rng: &mut R) -> Result<(), SearchError> {
        let mut options = self.options(step)?;
        let choice = self.pick(&mut options, rng);
        if !options.is_empty() {
            let prior_concept = match step {
                Step::Specialize { node } => self.nodes[node as usize].concept,
                _ => 0,
            };
            self.stack.push(ChoicePoint {
                step,
                agenda: self.agenda.clone(),
                nodes_len: self.nodes.len(),
                params_len: self.params.len(),
                decisions_len: self.decisions.len(),
                prior_concept,
                remaining: options,
            });
        }
        self.apply(step, choice);
        Ok(())
    }

    fn apply(&mut self, step: Step, choice: Choice) {
        self.decisions.push(choice);
        match (step, choice) {
            (Step::Specialize { node }, Choice::Concept(c)) => {
                self.nodes[node as usize].concept = c;
                self.agenda.push(Step::Specialize { node });
            }
            (Step::Decompose { node, rel }, Choice::Count(_, n)) => {
                for _ in 0..n {
                    self.agenda.push(Step::Spawn { parent: node, rel });
                }
            }
            (Step::Param { node, param }, Choice::Param(_, i)) => self.params.push((node, param, i)),
            _ => unreachable!("choice does not match its step"),
        }
    }

    /// Rewinds to the most recent choice point with an untried alternative
    /// and takes one. False when none is left.
    fn backtrack<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        while let Some(mut cp) = self.stack.pop() {
            self.agenda.clone_from(&cp.agenda);
            self.nodes.truncate(cp.nodes_len);
            self.params.truncate(cp.params_len);
            self.decisions.truncate(cp.decisions_len);
            if let Step::Specialize { node } = cp.step {
                self.nodes[node as usize].concept = cp.prior_concept;
            }
            if cp.remaining.is_empty() {
                continue;
            }
            let choice = self.pick(&mut cp.remaining, rng);
            let step = cp.step;
            if !cp.remaining.is_empty() {
                self.stack.push(cp);
            }
            self.apply(step, choice);
            return true;
        }
        false
    }

    fn solution(&self, stats: SearchStats) -> Solution {
        Solution { root: self.instance(0), decisions: self.decisions.iter().map(|&c| self.key(c)).collect(), stats }
    }

    fn instance(&self, idx: usize) -> ComponentInstance {
        let schema = self.schema;
        let node = self.nodes[idx];
        let children = schema
            .leaf_parts_ix(node.concept as usize)
            .iter()
            .map(|&r| PartGroup {
                relation: schema.parts()[r].id.clone(),
                components: (idx + 1..self.nodes.len())
                    .filter(|&j| self.nodes[j].parent == idx as u32 && self.nodes[j].rel == r as u32)
                    .map(|j| self.instance(j))
                    .collect(),
            })
            .collect();
        let params = self
            .params
            .iter()
            .filter(|(n, _, _)| *n == idx as u32)
            .map(|&(_, p, i)| {
                let def = &schema.params()[p as usize];
                (def.id.clone(), def.values[i as usize].clone())
            })
            .collect();
        ComponentInstance { instance_id: idx as u32, concept: schema.concepts()[node.concept as usize].id.clone(), children, params }
    }
}
