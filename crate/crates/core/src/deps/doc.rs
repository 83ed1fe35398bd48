//! The canonical dependency document.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::model::{Constraint, Dependency, Level};

pub const DOC_FORMAT: &str = "confdep-deps";
pub const DOC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyDocument {
    pub format: String,
    pub version: u32,
    pub ecosystem: String,
    /// Creation stamp. The only field allowed to differ between runs.
    pub generated_at: String,
    pub tool_version: String,
    pub dependencies: Vec<Dependency>,
}

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("dependency document does not match the schema: {0}")]
    Schema(String),
    #[error("dependency {id}: {message}")]
    Invalid { id: String, message: String },
}

fn sort_key(d: &Dependency) -> (Level, Vec<(String, String)>, String) {
    (
        d.level,
        d.participants
            .iter()
            .map(|p| (p.component.clone(), p.name.clone()))
            .collect(),
        format!("{}{:?}", d.subkind, d.constraint),
    )
}

/// Deduplicate, order by (level, participants) and assign ids.
pub fn emit_dependency_doc(
    ecosystem: &str,
    deps: Vec<Dependency>,
    generated_at: &str,
) -> DependencyDocument {
    let mut seen = BTreeSet::new();
    let mut unique: Vec<Dependency> = Vec::new();
    for d in deps {
        if seen.insert(d.key()) {
            unique.push(d);
        }
    }
    unique.sort_by_key(sort_key);
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for d in &mut unique {
        let base = d.base_id();
        let n = used.entry(base.clone()).or_insert(0);
        *n += 1;
        d.id = if *n == 1 { base } else { format!("{base}#{n}") };
    }
    DependencyDocument {
        format: DOC_FORMAT.to_string(),
        version: DOC_VERSION,
        ecosystem: ecosystem.to_string(),
        generated_at: generated_at.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        dependencies: unique,
    }
}

impl DependencyDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes") + "\n"
    }

    pub fn get(&self, id: &str) -> Option<&Dependency> {
        self.dependencies.iter().find(|d| d.id == id)
    }

    /// Copy with the timestamp cleared, for run-to-run comparison.
    pub fn without_timestamp(&self) -> Self {
        Self {
            generated_at: String::new(),
            ..self.clone()
        }
    }
}

pub fn load_dependency_doc(text: &str) -> Result<DependencyDocument, DocError> {
    let doc: DependencyDocument =
        serde_json::from_str(text).map_err(|e| DocError::Schema(e.to_string()))?;
    if doc.format != DOC_FORMAT {
        return Err(DocError::Schema(format!(
            "unexpected format {:?}",
            doc.format
        )));
    }
    let mut ids = BTreeSet::new();
    let mut keys = BTreeSet::new();
    for d in &doc.dependencies {
        let invalid = |message: &str| DocError::Invalid {
            id: d.id.clone(),
            message: message.to_string(),
        };
        if !ids.insert(d.id.as_str()) {
            return Err(invalid("duplicate id"));
        }
        if !keys.insert(d.key()) {
            return Err(invalid("duplicate dependency"));
        }
        if d.constraint.subkind() != d.subkind {
            return Err(invalid("constraint does not match subkind"));
        }
        let ok = match (d.level, d.participants.as_slice()) {
            (Level::SD, [_]) => matches!(
                d.constraint,
                Constraint::DataType { .. } | Constraint::ValueRange { .. }
            ),
            (Level::CPD, [a, b]) => a.component == b.component && a != b,
            (Level::CCD, [a, b]) => a.component != b.component,
            _ => false,
        };
        if !ok {
            return Err(invalid("participants do not fit the level"));
        }
        if d.level != Level::SD
            && matches!(
                d.constraint,
                Constraint::DataType { .. } | Constraint::ValueRange { .. }
            )
        {
            return Err(invalid("pairwise dependency with a self constraint"));
        }
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::model::{DepSource, Polarity};
    use crate::taint::{ParamId, ParamKind};

    fn conflict() -> Dependency {
        Dependency::new(
            vec![
                ParamId::new("mini-mkfs", "meta_bg"),
                ParamId::new("mini-mkfs", "resize_inode"),
            ],
            Constraint::Control {
                polarity: Polarity::Conflicts,
            },
            DepSource::ExtractedTaint,
        )
    }

    #[test]
    fn duplicates_collapse() {
        let doc = emit_dependency_doc("t", vec![conflict(), conflict()], "now");
        assert_eq!(doc.dependencies.len(), 1);
        assert_eq!(
            doc.dependencies[0].id,
            "cpd.control.mini-mkfs.meta_bg.mini-mkfs.resize_inode"
        );
    }

    #[test]
    fn round_trip() {
        let sd = Dependency::new(
            vec![ParamId::new("c", "p")],
            Constraint::DataType {
                kind: ParamKind::Int,
            },
            DepSource::Manual,
        );
        let doc = emit_dependency_doc("t", vec![conflict(), sd], "now");
        let back = load_dependency_doc(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.dependencies[0].level, Level::SD);
    }

    #[test]
    fn missing_level_is_a_schema_error() {
        let doc = emit_dependency_doc("t", vec![conflict()], "now");
        let mut v: serde_json::Value = serde_json::from_str(&doc.to_json()).unwrap();
        v["dependencies"][0]
            .as_object_mut()
            .unwrap()
            .remove("level");
        let err = load_dependency_doc(&v.to_string()).unwrap_err();
        assert!(
            matches!(err, DocError::Schema(ref m) if m.contains("level")),
            "{err}"
        );
    }
}
