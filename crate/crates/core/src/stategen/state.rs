//! Configuration states and their canonical keys.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::taint::{ParamId, ParamValue};

pub type Assignment = BTreeMap<ParamId, ParamValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Followed,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub dependency: String,
    pub mark: Mark,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    component: String,
    param: String,
    value: ParamValue,
}

fn ser_assign<S: Serializer>(a: &Assignment, s: S) -> Result<S::Ok, S::Error> {
    let list: Vec<Entry> = a
        .iter()
        .map(|(p, v)| Entry {
            component: p.component.clone(),
            param: p.name.clone(),
            value: v.clone(),
        })
        .collect();
    list.serialize(s)
}

fn de_assign<'de, D: Deserializer<'de>>(d: D) -> Result<Assignment, D::Error> {
    let list = Vec::<Entry>::deserialize(d)?;
    Ok(list
        .into_iter()
        .map(|e| (ParamId::new(e.component, e.param), e.value))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigState {
    pub id: String,
    /// Explicitly set parameters; everything else takes its default.
    #[serde(serialize_with = "ser_assign", deserialize_with = "de_assign")]
    pub assignments: Assignment,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub depth: usize,
    /// Violating only: the state breaks more than its target and no
    /// single-parameter repair helps.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub entangled: bool,
}

impl ConfigState {
    pub fn root() -> Self {
        Self {
            id: "s0".to_string(),
            assignments: Assignment::new(),
            provenance: Vec::new(),
            parent: None,
            depth: 0,
            entangled: false,
        }
    }

    /// Dependencies this state was built to violate.
    pub fn violated(&self) -> Vec<&str> {
        self.provenance
            .iter()
            .filter(|p| p.mark == Mark::Violated)
            .map(|p| p.dependency.as_str())
            .collect()
    }
}

/// Order-independent identity of a state: sorted (component, param, value)
/// triples of the explicit assignments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalKey(pub Vec<(String, String, String)>);

pub fn canonicalize(assign: &Assignment) -> CanonicalKey {
    CanonicalKey(
        assign
            .iter()
            .map(|(p, v)| (p.component.clone(), p.name.clone(), v.to_string()))
            .collect(),
    )
}

/// Build an assignment from (param, value) pairs in any order; later pairs
/// win, as on a command line.
pub fn assignment_from_pairs<I: IntoIterator<Item = (ParamId, ParamValue)>>(
    pairs: I,
) -> Assignment {
    pairs.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: &str) -> ParamId {
        ParamId::new("mini-mkfs", n)
    }

    #[test]
    fn reordering_does_not_change_the_key() {
        let a = assignment_from_pairs([
            (p("b"), ParamValue::Int(1024)),
            (p("C"), ParamValue::Int(2048)),
        ]);
        let b = assignment_from_pairs([
            (p("C"), ParamValue::Int(2048)),
            (p("b"), ParamValue::Int(1024)),
        ]);
        assert_eq!(canonicalize(&a), canonicalize(&b));
    }

    #[test]
    fn root_key_is_empty() {
        assert!(canonicalize(&Assignment::new()).0.is_empty());
    }

    #[test]
    fn values_distinguish_keys() {
        let a = assignment_from_pairs([(p("b"), ParamValue::Int(1024))]);
        let b = assignment_from_pairs([(p("b"), ParamValue::Int(2048))]);
        assert_ne!(canonicalize(&a), canonicalize(&b));
    }

    #[test]
    fn state_json_round_trip() {
        let mut s = ConfigState::root();
        s.assignments
            .insert(p("resize_inode"), ParamValue::Flag(true));
        s.assignments
            .insert(p("blocksize"), ParamValue::Text("4k".into()));
        let text = serde_json::to_string(&s).unwrap();
        let back: ConfigState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
