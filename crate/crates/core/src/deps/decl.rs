//! Dependencies read straight from a configuration-specification table.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::model::{Constraint, DepSource, Dependency, Polarity};
use crate::taint::{ParamId, ParamKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclEntry {
    pub key: String,
    #[serde(rename = "type")]
    pub ty: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclarativeTable {
    /// Component the keys belong to.
    pub component: String,
    pub entries: Vec<DeclEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum DeclError {
    #[error("table does not match the schema: {0}")]
    Schema(String),
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("entry {key} refers to unknown key {target}")]
    Dangling { key: String, target: String },
}

pub fn load_decl_table(text: &str) -> Result<DeclarativeTable, DeclError> {
    serde_json::from_str(text).map_err(|e| DeclError::Schema(e.to_string()))
}

pub fn extract_declarative(table: &DeclarativeTable) -> Result<Vec<Dependency>, DeclError> {
    let mut keys = BTreeSet::new();
    for e in &table.entries {
        if !keys.insert(e.key.as_str()) {
            return Err(DeclError::DuplicateKey(e.key.clone()));
        }
    }
    let id = |k: &str| ParamId::new(&table.component, k);
    let mut out = Vec::new();
    let mut conflicts = BTreeSet::new();
    for e in &table.entries {
        for t in e.requires.iter().chain(&e.conflicts) {
            if !keys.contains(t.as_str()) {
                return Err(DeclError::Dangling {
                    key: e.key.clone(),
                    target: t.clone(),
                });
            }
        }
        out.push(Dependency::new(
            vec![id(&e.key)],
            Constraint::DataType { kind: e.ty },
            DepSource::ExtractedDeclarative,
        ));
        if e.min.is_some() || e.max.is_some() || !e.choices.is_empty() {
            out.push(Dependency::new(
                vec![id(&e.key)],
                Constraint::ValueRange {
                    min: e.min,
                    max: e.max,
                    excluded: Vec::new(),
                    power_of_two: false,
                    choices: e.choices.clone(),
                },
                DepSource::ExtractedDeclarative,
            ));
        }
        for r in &e.requires {
            out.push(Dependency::new(
                vec![id(&e.key), id(r)],
                Constraint::Control {
                    polarity: Polarity::Requires,
                },
                DepSource::ExtractedDeclarative,
            ));
        }
        for c in &e.conflicts {
            let pair = if e.key <= *c {
                (e.key.clone(), c.clone())
            } else {
                (c.clone(), e.key.clone())
            };
            if conflicts.insert(pair.clone()) {
                out.push(Dependency::new(
                    vec![id(&pair.0), id(&pair.1)],
                    Constraint::Control {
                        polarity: Polarity::Conflicts,
                    },
                    DepSource::ExtractedDeclarative,
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::Subkind;

    fn table(entries: &str) -> DeclarativeTable {
        load_decl_table(&format!(
            r#"{{ "component": "wt", "entries": [{entries}] }}"#
        ))
        .unwrap()
    }

    #[test]
    fn int_entry_yields_type_and_range() {
        let t = table(r#"{ "key": "cache_size", "type": "int", "min": 1, "max": 1024 }"#);
        let deps = extract_declarative(&t).unwrap();
        assert_eq!(deps.len(), 2);
        assert_eq!(
            deps[0].constraint,
            Constraint::DataType {
                kind: ParamKind::Int
            }
        );
        assert!(matches!(
            deps[1].constraint,
            Constraint::ValueRange {
                min: Some(1),
                max: Some(1024),
                ..
            }
        ));
    }

    #[test]
    fn conflicts_edge_yields_control_cpd() {
        let t = table(
            r#"{ "key": "log", "type": "flag", "conflicts": ["in_memory"] },
               { "key": "in_memory", "type": "flag", "conflicts": ["log"] }"#,
        );
        let deps = extract_declarative(&t).unwrap();
        let cpds: Vec<_> = deps
            .iter()
            .filter(|d| d.subkind == Subkind::Control)
            .collect();
        assert_eq!(cpds.len(), 1);
        assert_eq!(
            cpds[0].constraint,
            Constraint::Control {
                polarity: Polarity::Conflicts
            }
        );
    }

    #[test]
    fn dangling_reference_is_an_error() {
        let t = table(r#"{ "key": "log", "type": "flag", "requires": ["nope"] }"#);
        assert!(matches!(
            extract_declarative(&t),
            Err(DeclError::Dangling { .. })
        ));
    }
}
