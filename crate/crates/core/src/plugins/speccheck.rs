//! Documentation consistency: every extracted dependency should be stated,
//! with the right polarity, in the parameter descriptions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{has_keyword, mentions, sentences};
use crate::deps::{Constraint, Dependency, DependencyDocument, Polarity};
use crate::taint::ParamId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub text: String,
}

/// Parameter descriptions per component.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocCorpus {
    pub components: BTreeMap<String, Vec<ParamBlock>>,
}

impl DocCorpus {
    pub fn block(&self, p: &ParamId) -> Option<&ParamBlock> {
        self.components
            .get(&p.component)?
            .iter()
            .find(|b| b.name == p.name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Syntax {
        file: String,
        line: usize,
        message: String,
    },
    #[error("no documentation for component {0}")]
    MissingComponent(String),
}

/// Parse one `.paramdoc` file: each `.PARAM name` line opens a block whose
/// text runs to the next header. Lines before the first header and lines
/// starting with `.\"` are ignored.
pub fn parse_paramdoc(file: &str, text: &str) -> Result<Vec<ParamBlock>, DocError> {
    let mut blocks: Vec<ParamBlock> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with(".\\\"") {
            continue;
        }
        if let Some(rest) = line.strip_prefix(".PARAM") {
            let name = rest.trim();
            let err = |message: String| DocError::Syntax {
                file: file.to_string(),
                line: i + 1,
                message,
            };
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(err("expected exactly one parameter name".into()));
            }
            if blocks.iter().any(|b| b.name == name) {
                return Err(err(format!("parameter {name} documented twice")));
            }
            blocks.push(ParamBlock {
                name: name.to_string(),
                text: String::new(),
            });
        } else if let Some(b) = blocks.last_mut() {
            b.text.push_str(line);
            b.text.push('\n');
        }
    }
    Ok(blocks)
}

/// Read every `<component>.paramdoc` in `dir`.
pub fn load_doc_corpus(dir: &Path) -> Result<DocCorpus, DocError> {
    let io = |e| DocError::Io {
        path: dir.display().to_string(),
        source: e,
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "paramdoc"))
        .collect();
    paths.sort();
    let mut corpus = DocCorpus::default();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(|e| DocError::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        let stem = p
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let blocks = parse_paramdoc(&p.display().to_string(), &text)?;
        corpus.components.insert(stem, blocks);
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keywords {
    pub conflicts: Vec<String>,
    pub requires: Vec<String>,
    pub comparative: Vec<String>,
}

impl Default for Keywords {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            conflicts: v(&[
                "disable",
                "cannot",
                "conflict",
                "mutually exclusive",
                "not allowed",
            ]),
            requires: v(&["require", "must", "enable", "need", "depend"]),
            comparative: v(&["equal", "greater", "less", "at least", "at most"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchKind {
    UndocumentedDependency,
    WrongDependency,
    UndocumentedRange,
    UndocumentedType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecMismatch {
    pub kind: MismatchKind,
    pub dependency: String,
    pub component: String,
    pub param: String,
    pub detail: String,
}

#[derive(Debug, PartialEq, Eq)]
enum Stated {
    Right,
    Wrong,
    Missing,
}

fn any_keyword(s: &str, words: &[String]) -> bool {
    words.iter().any(|w| has_keyword(s, w))
}

/// How `block` states the relation to `partner`: a sentence naming the
/// partner with a keyword of the expected class, or only of the opposite
/// class, or neither.
fn stated(
    block: Option<&ParamBlock>,
    partner: &str,
    expected: &[String],
    opposite: &[String],
) -> Stated {
    let Some(b) = block else {
        return Stated::Missing;
    };
    let near: Vec<String> = sentences(&b.text)
        .into_iter()
        .filter(|s| mentions(s, partner))
        .collect();
    if near.iter().any(|s| any_keyword(s, expected)) {
        Stated::Right
    } else if near.iter().any(|s| any_keyword(s, opposite)) {
        Stated::Wrong
    } else {
        Stated::Missing
    }
}

fn mismatch(kind: MismatchKind, d: &Dependency, at: &ParamId, detail: String) -> SpecMismatch {
    SpecMismatch {
        kind,
        dependency: d.id.clone(),
        component: at.component.clone(),
        param: at.name.clone(),
        detail,
    }
}

fn check_one(d: &Dependency, docs: &DocCorpus, kw: &Keywords) -> Option<SpecMismatch> {
    let p1 = d.participants.first()?;
    match &d.constraint {
        Constraint::DataType { kind } => docs.block(p1).is_none().then(|| {
            mismatch(
                MismatchKind::UndocumentedType,
                d,
                p1,
                format!("{} ({kind:?}) has no description", p1.name),
            )
        }),
        Constraint::ValueRange {
            min,
            max,
            power_of_two,
            ..
        } => {
            let text = docs.block(p1).map(|b| b.text.as_str()).unwrap_or("");
            let mut missing = Vec::new();
            for bound in [min, max].into_iter().flatten() {
                if !mentions(text, &bound.to_string()) {
                    missing.push(bound.to_string());
                }
            }
            if *power_of_two
                && !has_keyword(text, "power of 2")
                && !has_keyword(text, "power of two")
            {
                missing.push("power of 2".to_string());
            }
            (!missing.is_empty()).then(|| {
                mismatch(
                    MismatchKind::UndocumentedRange,
                    d,
                    p1,
                    format!("description of {} lacks {}", p1.name, missing.join(", ")),
                )
            })
        }
        Constraint::Control { polarity } => {
            let p2 = d.participants.get(1)?;
            let (expected, opposite) = match polarity {
                Polarity::Conflicts => (&kw.conflicts, &kw.requires),
                Polarity::Requires => (&kw.requires, &kw.conflicts),
            };
            let sides = [(p1, p2), (p2, p1)];
            let states: Vec<Stated> = sides
                .iter()
                .map(|(at, other)| stated(docs.block(at), &other.name, expected, opposite))
                .collect();
            if let Some(i) = states.iter().position(|s| *s == Stated::Wrong) {
                let (at, other) = sides[i];
                let word = match polarity {
                    Polarity::Conflicts => "conflicts with",
                    Polarity::Requires => "requires",
                };
                return Some(mismatch(
                    MismatchKind::WrongDependency,
                    d,
                    at,
                    format!(
                        "{} is described with the wrong polarity; extracted: {} {word} {}",
                        other.name, p1.name, p2.name
                    ),
                ));
            }
            let i = states.iter().position(|s| *s == Stated::Missing)?;
            let (at, other) = sides[i];
            Some(mismatch(
                MismatchKind::UndocumentedDependency,
                d,
                at,
                format!(
                    "description of {} does not state its dependency on {}",
                    at.name, other.name
                ),
            ))
        }
        Constraint::Value { op } => {
            let p2 = d.participants.get(1)?;
            let documented = [(p1, p2), (p2, p1)].iter().any(|(at, other)| {
                docs.block(at).is_some_and(|b| {
                    sentences(&b.text)
                        .iter()
                        .any(|s| mentions(s, &other.name) && any_keyword(s, &kw.comparative))
                })
            });
            (!documented).then(|| {
                mismatch(
                    MismatchKind::UndocumentedDependency,
                    d,
                    p1,
                    format!(
                        "no comparison between {} and {} ({} {} {})",
                        p1.name,
                        p2.name,
                        p1.name,
                        op.symbol(),
                        p2.name
                    ),
                )
            })
        }
        Constraint::Behavioral => None,
    }
}

/// Compare each dependency against the descriptions. Control dependencies
/// must be stated on both sides.
pub fn check_spec(
    deps: &DependencyDocument,
    docs: &DocCorpus,
    kw: &Keywords,
) -> Result<Vec<SpecMismatch>, DocError> {
    for d in &deps.dependencies {
        for c in d.components() {
            if !docs.components.contains_key(c) {
                return Err(DocError::MissingComponent(c.to_string()));
            }
        }
    }
    Ok(deps
        .dependencies
        .iter()
        .filter_map(|d| check_one(d, docs, kw))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deps::{emit_dependency_doc, DepSource};

    fn doc(deps: Vec<Dependency>) -> DependencyDocument {
        emit_dependency_doc("t", deps, "")
    }

    fn conflicts() -> Dependency {
        Dependency::new(
            vec![
                ParamId::new("mkfs", "meta_bg"),
                ParamId::new("mkfs", "resize_inode"),
            ],
            Constraint::Control {
                polarity: Polarity::Conflicts,
            },
            DepSource::ExtractedTaint,
        )
    }

    fn corpus(text: &str) -> DocCorpus {
        let mut c = DocCorpus::default();
        c.components.insert(
            "mkfs".into(),
            parse_paramdoc("mkfs.paramdoc", text).unwrap(),
        );
        c
    }

    #[test]
    fn both_sides_documented() {
        let c = corpus(
            ".PARAM meta_bg\nCannot be used with resize_inode.\n.PARAM resize_inode\nDisable meta_bg first.\n",
        );
        assert!(
            check_spec(&doc(vec![conflicts()]), &c, &Keywords::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn one_side_missing() {
        let c = corpus(".PARAM meta_bg\nCannot be used with resize_inode.\n.PARAM resize_inode\nReserve space.\n");
        let m = check_spec(&doc(vec![conflicts()]), &c, &Keywords::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, MismatchKind::UndocumentedDependency);
        assert_eq!(m[0].param, "resize_inode");
    }

    #[test]
    fn opposite_polarity_is_wrong() {
        let c =
            corpus(".PARAM meta_bg\nRequires resize_inode.\n.PARAM resize_inode\nNeeds meta_bg.\n");
        let m = check_spec(&doc(vec![conflicts()]), &c, &Keywords::default()).unwrap();
        assert_eq!(m[0].kind, MismatchKind::WrongDependency);
    }

    #[test]
    fn range_needs_bounds_and_pow2() {
        let d = Dependency::new(
            vec![ParamId::new("mkfs", "blocksize")],
            Constraint::ValueRange {
                min: Some(1024),
                max: Some(65536),
                excluded: vec![],
                power_of_two: true,
                choices: vec![],
            },
            DepSource::ExtractedTaint,
        );
        let ok = corpus(".PARAM blocksize\nBetween 1024 and 65536; a power of 2.\n");
        assert!(check_spec(&doc(vec![d.clone()]), &ok, &Keywords::default())
            .unwrap()
            .is_empty());
        let bad = corpus(".PARAM blocksize\nBetween 1024 and 65536.\n");
        let m = check_spec(&doc(vec![d]), &bad, &Keywords::default()).unwrap();
        assert_eq!(m[0].kind, MismatchKind::UndocumentedRange);
    }

    #[test]
    fn missing_component_is_an_error() {
        let c = DocCorpus::default();
        assert!(matches!(
            check_spec(&doc(vec![conflicts()]), &c, &Keywords::default()),
            Err(DocError::MissingComponent(_))
        ));
    }

    #[test]
    fn duplicate_block_is_an_error() {
        assert!(parse_paramdoc("x", ".PARAM a\n.PARAM a\n").is_err());
    }
}
