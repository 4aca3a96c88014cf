use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::RelevanceError;

/// Anything a relevance value is kept for: a concept picked during
/// specialization, a part count picked during decomposition, or a discrete
/// parameter value.
///
/// The textual form is `concept:<id>`, `count:<relation>:<n>` or
/// `param:<id>:<value index>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectKey {
    Concept(String),
    Count { relation: String, count: u32 },
    Param { param: String, value_index: u32 },
}

impl ObjectKey {
    pub fn concept(id: impl Into<String>) -> Self {
        ObjectKey::Concept(id.into())
    }

    pub fn count(relation: impl Into<String>, count: u32) -> Self {
        ObjectKey::Count { relation: relation.into(), count }
    }

    pub fn param(param: impl Into<String>, value_index: u32) -> Self {
        ObjectKey::Param { param: param.into(), value_index }
    }

    pub fn as_concept(&self) -> Option<&str> {
        match self {
            ObjectKey::Concept(id) => Some(id),
            _ => None,
        }
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectKey::Concept(id) => write!(f, "concept:{id}"),
            ObjectKey::Count { relation, count } => write!(f, "count:{relation}:{count}"),
            ObjectKey::Param { param, value_index } => write!(f, "param:{param}:{value_index}"),
        }
    }
}

impl FromStr for ObjectKey {
    type Err = RelevanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RelevanceError::BadKey(s.to_string());
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "concept" if !rest.is_empty() => Ok(ObjectKey::Concept(rest.to_string())),
            "count" | "param" => {
                let (id, n) = rest.rsplit_once(':').ok_or_else(bad)?;
                let n: u32 = n.parse().map_err(|_| bad())?;
                if id.is_empty() {
                    return Err(bad());
                }
                Ok(if kind == "count" {
                    ObjectKey::count(id, n)
                } else {
                    ObjectKey::param(id, n)
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for ObjectKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObjectKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
