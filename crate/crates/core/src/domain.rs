//! Configuration domains: a taxonomy (specialization), a composition with
//! finite part counts (decomposition), n:m compatibility relations checked on
//! complete configurations, and optional discrete parameters.
//!
//! Domains are read from JSON documents:
//!
//! ```json
//! {
//!   "name": "...",
//!   "concepts":  [{"id": "Harddisk", "name": "Hard disk", "parent": "Drive"}],
//!   "parts":     [{"id": "controller-harddisk", "whole": "Controller", "part": "Harddisk", "min": 0, "max": 2}],
//!   "relations": [{"id": "r1", "left": "NN-Board", "right": "NN-Controller", "semantics": "left_forces_right"}],
//!   "roots":     ["PC-System"],
//!   "params":    [{"id": "colour", "owner": "Case", "values": ["black", "grey"]}]
//! }
//! ```
//!
//! A part relation applies to every concept below its `whole`, so leaves
//! inherit the composition of their ancestors. The same holds for parameters.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relevance::ObjectKey;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("cannot parse domain document: {0}")]
    Parse(String),
    #[error("{what} {id:?} is declared twice")]
    Duplicate { what: &'static str, id: String },
    #[error("{owner:?} refers to unknown {what} {id:?}")]
    Dangling { owner: String, what: &'static str, id: String },
    #[error("unknown {what} {id:?}")]
    Unknown { what: &'static str, id: String },
    #[error("part relation {0:?} has an unbounded maximum; every cardinality must be finite")]
    InfiniteCardinality(String),
    #[error("part relation {relation:?} has invalid cardinality [{min}..{max}]")]
    InvalidCardinality { relation: String, min: u32, max: u32 },
    #[error("taxonomy cycle through concept {0:?}")]
    TaxonomyCycle(String),
    #[error("composition cycle through concept {0:?}")]
    CompositionCycle(String),
    #[error("parameter {0:?} has no values")]
    EmptyParam(String),
    #[error("{0:?} is not a declared root concept")]
    NotRoot(String),
    #[error("count {count} outside [{min}..{max}] of part relation {relation:?}")]
    CountOutOfRange { relation: String, count: u32, min: u32, max: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPart")]
pub struct PartRelation {
    pub id: String,
    pub whole: String,
    pub part: String,
    pub min: u32,
    pub max: u32,
}

/// A cardinality bound as written in a file: a number, or a word such as
/// `"unbounded"` that is rejected.
#[derive(Deserialize)]
#[serde(untagged)]
enum Bound {
    Finite(u32),
    Word(String),
}

#[derive(Deserialize)]
struct RawPart {
    id: String,
    whole: String,
    part: String,
    min: u32,
    max: Bound,
}

impl TryFrom<RawPart> for PartRelation {
    type Error = String;

    fn try_from(raw: RawPart) -> Result<Self, String> {
        let max = match raw.max {
            Bound::Finite(n) => n,
            Bound::Word(w) => {
                return Err(match w.to_ascii_lowercase().as_str() {
                    "unbounded" | "inf" | "infinity" | "infinite" | "*" | "n" | "∞" => {
                        DomainError::InfiniteCardinality(raw.id).to_string()
                    }
                    _ => format!("part relation {:?}: bad maximum {w:?}", raw.id),
                })
            }
        };
        Ok(PartRelation { id: raw.id, whole: raw.whole, part: raw.part, min: raw.min, max })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationSemantics {
    /// If any component is a `left`, every component of `right`'s kind (the
    /// taxonomy parent of `right`) must be a `right`.
    #[default]
    LeftForcesRight,
    /// `LeftForcesRight` in both directions.
    Mutual,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NmRelation {
    pub id: String,
    pub left: String,
    pub right: String,
    #[serde(default)]
    pub semantics: RelationSemantics,
}

/// A parameter with a finite list of values, collected by every leaf below
/// `owner`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub id: String,
    pub owner: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub parts: Vec<PartRelation>,
    #[serde(default)]
    pub relations: Vec<NmRelation>,
    #[serde(default)]
    pub roots: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<ParamDef>,
}

/// Additions to an existing domain (new concepts and whatever hangs off them).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainFragment {
    #[serde(default)]
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub parts: Vec<PartRelation>,
    #[serde(default)]
    pub relations: Vec<NmRelation>,
    #[serde(default)]
    pub params: Vec<ParamDef>,
}

impl DomainFragment {
    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        serde_json::from_str(text).map_err(|e| DomainError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DomainError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty() && self.parts.is_empty() && self.relations.is_empty() && self.params.is_empty()
    }
}

/// A validated domain. Immutable; [`DomainSchema::add_concepts`] returns a new
/// schema.
#[derive(Clone, Debug)]
pub struct DomainSchema {
    doc: DomainDocument,
    concept_ix: HashMap<String, usize>,
    part_ix: HashMap<String, usize>,
    param_ix: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    leaf_parts: Vec<Vec<usize>>,
    leaf_params: Vec<Vec<usize>>,
}

impl PartialEq for DomainSchema {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

/// Parses and validates a domain document.
pub fn load_domain(text: &str) -> Result<DomainSchema, DomainError> {
    DomainSchema::from_json(text)
}

impl DomainSchema {
    pub fn from_json(text: &str) -> Result<Self, DomainError> {
        let doc: DomainDocument = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // Surface the dedicated error for unbounded cardinalities.
            match msg.split_once("part relation ").filter(|_| msg.contains("unbounded maximum")) {
                Some((_, rest)) => {
                    let id = rest.split('"').nth(1).unwrap_or_default().to_string();
                    DomainError::InfiniteCardinality(id)
                }
                None => DomainError::Parse(msg),
            }
        })?;
        Self::from_document(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DomainError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_document(doc: DomainDocument) -> Result<Self, DomainError> {
        let mut concept_ix = HashMap::new();
        for (i, c) in doc.concepts.iter().enumerate() {
            if concept_ix.insert(c.id.clone(), i).is_some() {
                return Err(DomainError::Duplicate { what: "concept", id: c.id.clone() });
            }
        }
        let lookup = |owner: &str, id: &str| {
            concept_ix.get(id).copied().ok_or_else(|| DomainError::Dangling {
                owner: owner.to_string(),
                what: "concept",
                id: id.to_string(),
            })
        };

        let mut parent = vec![None; doc.concepts.len()];
        let mut children = vec![Vec::new(); doc.concepts.len()];
        for (i, c) in doc.concepts.iter().enumerate() {
            if let Some(p) = &c.parent {
                let p = lookup(&c.id, p)?;
                parent[i] = Some(p);
                children[p].push(i);
            }
        }
        for start in 0..doc.concepts.len() {
            let mut cur = parent[start];
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if p == start || steps > doc.concepts.len() {
                    return Err(DomainError::TaxonomyCycle(doc.concepts[start].id.clone()));
                }
                cur = parent[p];
            }
        }

        let mut part_ix = HashMap::new();
        for (i, r) in doc.parts.iter().enumerate() {
            if part_ix.insert(r.id.clone(), i).is_some() {
                return Err(DomainError::Duplicate { what: "part relation", id: r.id.clone() });
            }
            lookup(&r.id, &r.whole)?;
            lookup(&r.id, &r.part)?;
            if r.min > r.max {
                return Err(DomainError::InvalidCardinality { relation: r.id.clone(), min: r.min, max: r.max });
            }
        }

        let mut seen = HashSet::new();
        for rel in &doc.relations {
            if !seen.insert(rel.id.as_str()) {
                return Err(DomainError::Duplicate { what: "relation", id: rel.id.clone() });
            }
            lookup(&rel.id, &rel.left)?;
            lookup(&rel.id, &rel.right)?;
        }

        let mut param_ix = HashMap::new();
        for (i, p) in doc.params.iter().enumerate() {
            if param_ix.insert(p.id.clone(), i).is_some() {
                return Err(DomainError::Duplicate { what: "parameter", id: p.id.clone() });
            }
            lookup(&p.id, &p.owner)?;
            if p.values.is_empty() {
                return Err(DomainError::EmptyParam(p.id.clone()));
            }
        }

        for root in &doc.roots {
            lookup("roots", root)?;
        }

        let ancestor_or_self = |anc: usize, mut c: usize| loop {
            if c == anc {
                return true;
            }
            match parent[c] {
                Some(p) => c = p,
                None => return false,
            }
        };
        let leaf_parts: Vec<Vec<usize>> = (0..doc.concepts.len())
            .map(|c| {
                (0..doc.parts.len())
                    .filter(|&r| ancestor_or_self(concept_ix[&doc.parts[r].whole], c))
                    .collect()
            })
            .collect();
        let leaf_params: Vec<Vec<usize>> = (0..doc.concepts.len())
            .map(|c| {
                (0..doc.params.len())
                    .filter(|&p| ancestor_or_self(concept_ix[&doc.params[p].owner], c))
                    .collect()
            })
            .collect();

        let schema = DomainSchema { doc, concept_ix, part_ix, param_ix, parent, children, leaf_parts, leaf_params };
        schema.check_composition_acyclic()?;
        Ok(schema)
    }

    /// Every expansion path (specialize, then instantiate parts) must be
    /// finite.
    fn check_composition_acyclic(&self) -> Result<(), DomainError> {
        let n = self.doc.concepts.len();
        let successors = |c: usize| -> Vec<usize> {
            let mut out = self.children[c].clone();
            out.extend(self.leaf_parts[c].iter().map(|&r| self.concept_ix[&self.doc.parts[r].part]));
            out
        };
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut color = vec![0u8; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, successors(start), 0usize)];
            color[start] = 1;
            while let Some((node, succ, pos)) = stack.last_mut() {
                if *pos < succ.len() {
                    let next = succ[*pos];
                    *pos += 1;
                    match color[next] {
                        0 => {
                            color[next] = 1;
                            let s = successors(next);
                            stack.push((next, s, 0));
                        }
                        1 => return Err(DomainError::CompositionCycle(self.doc.concepts[next].id.clone())),
                        _ => {}
                    }
                } else {
                    color[*node] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    pub fn document(&self) -> &DomainDocument {
        &self.doc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("domain serializes")
    }

    pub fn name(&self) -> Option<&str> {
        self.doc.name.as_deref()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.doc.concepts
    }

    pub fn parts(&self) -> &[PartRelation] {
        &self.doc.parts
    }

    pub fn relations(&self) -> &[NmRelation] {
        &self.doc.relations
    }

    pub fn roots(&self) -> &[String] {
        &self.doc.roots
    }

    pub fn params(&self) -> &[ParamDef] {
        &self.doc.params
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concept_ix.get(id).map(|&i| &self.doc.concepts[i])
    }

    pub fn part(&self, id: &str) -> Option<&PartRelation> {
        self.part_ix.get(id).map(|&i| &self.doc.parts[i])
    }

    pub fn param(&self, id: &str) -> Option<&ParamDef> {
        self.param_ix.get(id).map(|&i| &self.doc.params[i])
    }

    pub fn is_root(&self, id: &str) -> bool {
        self.doc.roots.iter().any(|r| r == id)
    }

    pub fn require_root(&self, id: &str) -> Result<(), DomainError> {
        if self.is_root(id) {
            Ok(())
        } else if self.concept_ix.contains_key(id) {
            Err(DomainError::NotRoot(id.to_string()))
        } else {
            Err(DomainError::Unknown { what: "concept", id: id.to_string() })
        }
    }

    fn ix(&self, id: &str) -> Result<usize, DomainError> {
        self.concept_ix
            .get(id)
            .copied()
            .ok_or_else(|| DomainError::Unknown { what: "concept", id: id.to_string() })
    }

    pub fn is_leaf(&self, id: &str) -> Result<bool, DomainError> {
        Ok(self.children[self.ix(id)?].is_empty())
    }

    /// Direct taxonomy children of `id`, in declaration order.
    pub fn specialization_candidates(&self, id: &str) -> Result<Vec<&str>, DomainError> {
        Ok(self.children[self.ix(id)?].iter().map(|&c| self.doc.concepts[c].id.as_str()).collect())
    }

    /// Every admissible part count of relation `id`, ascending.
    pub fn count_candidates(&self, id: &str) -> Result<Vec<u32>, DomainError> {
        let r = self.part(id).ok_or_else(|| DomainError::Unknown { what: "part relation", id: id.to_string() })?;
        Ok((r.min..=r.max).collect())
    }

    /// Key for choosing `count` parts of relation `relation`.
    pub fn count_key(&self, relation: &str, count: u32) -> Result<ObjectKey, DomainError> {
        let r = self
            .part(relation)
            .ok_or_else(|| DomainError::Unknown { what: "part relation", id: relation.to_string() })?;
        if !(r.min..=r.max).contains(&count) {
            return Err(DomainError::CountOutOfRange { relation: relation.to_string(), count, min: r.min, max: r.max });
        }
        Ok(ObjectKey::count(relation, count))
    }

    /// True if `concept` is `ancestor` or lies below it in the taxonomy.
    pub fn subsumes(&self, ancestor: &str, concept: &str) -> bool {
        match (self.concept_ix.get(ancestor), self.concept_ix.get(concept)) {
            (Some(&a), Some(&c)) => self.subsumes_ix(a, c),
            _ => false,
        }
    }

    /// Part relations a component of type `id` must decompose, in declaration
    /// order (inherited from its ancestors).
    pub fn parts_of(&self, id: &str) -> Result<Vec<&PartRelation>, DomainError> {
        Ok(self.leaf_parts[self.ix(id)?].iter().map(|&r| &self.doc.parts[r]).collect())
    }

    pub fn params_of(&self, id: &str) -> Result<Vec<&ParamDef>, DomainError> {
        Ok(self.leaf_params[self.ix(id)?].iter().map(|&p| &self.doc.params[p]).collect())
    }

    /// Every object a relevance store needs a record for.
    pub fn objects(&self) -> Vec<ObjectKey> {
        let mut out: Vec<ObjectKey> = self.doc.concepts.iter().map(|c| ObjectKey::concept(&c.id)).collect();
        for r in &self.doc.parts {
            out.extend((r.min..=r.max).map(|n| ObjectKey::count(&r.id, n)));
        }
        for p in &self.doc.params {
            out.extend((0..p.values.len() as u32).map(|i| ObjectKey::param(&p.id, i)));
        }
        out
    }

    /// Objects a configuration rooted at `root` can involve.
    pub fn reachable_objects(&self, root: &str) -> Result<Vec<ObjectKey>, DomainError> {
        let start = self.ix(root)?;
        let mut seen = vec![false; self.doc.concepts.len()];
        let mut parts = vec![false; self.doc.parts.len()];
        let mut params = vec![false; self.doc.params.len()];
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            if std::mem::replace(&mut seen[c], true) {
                continue;
            }
            stack.extend(self.children[c].iter().copied());
            for &r in &self.leaf_parts[c] {
                parts[r] = true;
                stack.push(self.concept_ix[&self.doc.parts[r].part]);
            }
            for &p in &self.leaf_params[c] {
                params[p] = true;
            }
        }
        Ok(self
            .objects()
            .into_iter()
            .filter(|k| match k {
                ObjectKey::Concept(c) => seen[self.concept_ix[c]],
                ObjectKey::Count { relation, .. } => parts[self.part_ix[relation]],
                ObjectKey::Param { param, .. } => params[self.param_ix[param]],
            })
            .collect())
    }

    /// New schema with `additions` merged in.
    pub fn add_concepts(&self, additions: &DomainFragment) -> Result<DomainSchema, DomainError> {
        if additions.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = self.doc.clone();
        doc.concepts.extend(additions.concepts.iter().cloned());
        doc.parts.extend(additions.parts.iter().cloned());
        doc.relations.extend(additions.relations.iter().cloned());
        doc.params.extend(additions.params.iter().cloned());
        DomainSchema::from_document(doc)
    }

    /// Objects of `self` that are not present in `before`.
    pub fn objects_added_since(&self, before: &DomainSchema) -> Vec<ObjectKey> {
        let old: HashSet<ObjectKey> = before.objects().into_iter().collect();
        self.objects().into_iter().filter(|k| !old.contains(k)).collect()
    }

    pub(crate) fn concept_count(&self) -> usize {
        self.doc.concepts.len()
    }

    pub(crate) fn concept_index(&self, id: &str) -> Option<usize> {
        self.concept_ix.get(id).copied()
    }

    pub(crate) fn children_ix(&self, c: usize) -> &[usize] {
        &self.children[c]
    }

    pub(crate) fn leaf_parts_ix(&self, c: usize) -> &[usize] {
        &self.leaf_parts[c]
    }

    pub(crate) fn leaf_params_ix(&self, c: usize) -> &[usize] {
        &self.leaf_params[c]
    }

    pub(crate) fn subsumes_ix(&self, ancestor: usize, mut c: usize) -> bool {
        loop {
            if c == ancestor {
                return true;
            }
            match self.parent[c] {
                Some(p) => c = p,
                None => return false,
            }
        }
    }

    /// The kind of component a relation endpoint constrains: its taxonomy
    /// parent, or itself for a taxonomy root.
    pub(crate) fn dimension_ix(&self, c: usize) -> usize {
        self.parent[c].unwrap_or(c)
    }
}
