//! Dependency taxonomy and the dependency document.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::InstrRef;
use crate::taint::{ParamId, ParamKind, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    SD,
    CPD,
    CCD,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::SD => "SD",
            Level::CPD => "CPD",
            Level::CCD => "CCD",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subkind {
    DataType,
    ValueRange,
    Control,
    Value,
    Behavioral,
}

impl Subkind {
    pub fn as_str(self) -> &'static str {
        match self {
            Subkind::DataType => "data_type",
            Subkind::ValueRange => "value_range",
            Subkind::Control => "control",
            Subkind::Value => "value",
            Subkind::Behavioral => "behavioral",
        }
    }
}

impl fmt::Display for Subkind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// The first participant can only be enabled if the second is.
    Requires,
    /// The two participants cannot both be enabled.
    Conflicts,
}

/// Relation in a value template `P1 op P2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelOp {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

impl RelOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            RelOp::Ge => a >= b,
            RelOp::Gt => a > b,
            RelOp::Le => a <= b,
            RelOp::Lt => a < b,
        }
    }

    /// Same relation with the operands swapped.
    pub fn flip(self) -> Self {
        match self {
            RelOp::Ge => RelOp::Le,
            RelOp::Gt => RelOp::Lt,
            RelOp::Le => RelOp::Ge,
            RelOp::Lt => RelOp::Gt,
        }
    }

    pub fn negate(self) -> Self {
        match self {
            RelOp::Ge => RelOp::Lt,
            RelOp::Gt => RelOp::Le,
            RelOp::Le => RelOp::Gt,
            RelOp::Lt => RelOp::Ge,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
            RelOp::Le => "<=",
            RelOp::Lt => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Constraint {
    DataType {
        kind: ParamKind,
    },
    /// Conjunction of an inclusive interval, excluded points, an optional
    /// power-of-two requirement and an optional choice list.
    ValueRange {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min: Option<i64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max: Option<i64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        excluded: Vec<i64>,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        power_of_two: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        choices: Vec<String>,
    },
    Control {
        polarity: Polarity,
    },
    Value {
        op: RelOp,
    },
    Behavioral,
}

impl Constraint {
    pub fn subkind(&self) -> Subkind {
        match self {
            Constraint::DataType { .. } => Subkind::DataType,
            Constraint::ValueRange { .. } => Subkind::ValueRange,
            Constraint::Control { .. } => Subkind::Control,
            Constraint::Value { .. } => Subkind::Value,
            Constraint::Behavioral => Subkind::Behavioral,
        }
    }

    /// Whether an integer satisfies a value_range constraint. Other
    /// constraints accept everything.
    pub fn admits_int(&self, v: i64) -> bool {
        match self {
            Constraint::ValueRange {
                min,
                max,
                excluded,
                power_of_two,
                ..
            } => {
                min.is_none_or(|lo| v >= lo)
                    && max.is_none_or(|hi| v <= hi)
                    && !excluded.contains(&v)
                    && (!power_of_two || (v > 0 && v & (v - 1) == 0))
            }
            _ => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepSource {
    ExtractedTaint,
    ExtractedDeclarative,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub context: Vec<InstrRef>,
    pub instr: InstrRef,
    /// `file:line` of the instruction.
    pub loc: String,
}

impl Evidence {
    pub fn site(&self) -> Site {
        Site {
            context: self.context.clone(),
            instr: self.instr.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    /// Content-derived identifier, unique within a document.
    #[serde(default)]
    pub id: String,
    pub level: Level,
    pub subkind: Subkind,
    pub participants: Vec<ParamId>,
    pub constraint: Constraint,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<Evidence>,
    /// Diagnostic text of the error sink the evidence guards, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub source: DepSource,
}

impl Dependency {
    pub fn new(participants: Vec<ParamId>, constraint: Constraint, source: DepSource) -> Self {
        let level = match participants.as_slice() {
            [_] => Level::SD,
            [a, b] if a.component == b.component => Level::CPD,
            _ => Level::CCD,
        };
        Self {
            id: String::new(),
            level,
            subkind: constraint.subkind(),
            participants,
            constraint,
            evidence: Vec::new(),
            message: None,
            note: None,
            source,
        }
    }

    /// Identity used for deduplication.
    pub fn key(&self) -> (Level, Subkind, Vec<ParamId>, Constraint) {
        (
            self.level,
            self.subkind,
            self.participants.clone(),
            self.constraint.clone(),
        )
    }

    pub fn involves(&self, p: &ParamId) -> bool {
        self.participants.contains(p)
    }

    /// The other participant of a pairwise dependency.
    pub fn partner(&self, p: &ParamId) -> Option<&ParamId> {
        match self.participants.as_slice() {
            [a, b] if a == p => Some(b),
            [a, b] if b == p => Some(a),
            _ => None,
        }
    }

    /// Base identifier before collision suffixes.
    pub fn base_id(&self) -> String {
        let mut id = format!("{}.{}", self.level, self.subkind).to_lowercase();
        for p in &self.participants {
            id.push('.');
            id.push_str(&p.component);
            id.push('.');
            id.push_str(&p.name);
        }
        id
    }

    pub fn components(&self) -> BTreeSet<&str> {
        self.participants
            .iter()
            .map(|p| p.component.as_str())
            .collect()
    }

    /// Human-readable constraint, e.g. `cluster_size >= blocksize`.
    pub fn describe(&self) -> String {
        let names: Vec<&str> = self.participants.iter().map(|p| p.name.as_str()).collect();
        match (&self.constraint, names.as_slice()) {
            (Constraint::DataType { kind }, [a]) => format!("{a} is {kind}"),
            (
                Constraint::ValueRange {
                    min,
                    max,
                    excluded,
                    power_of_two,
                    choices,
                },
                [a],
            ) => {
                let mut parts = Vec::new();
                if min.is_some() || max.is_some() {
                    let lo = min.map_or("-inf".to_string(), |v| v.to_string());
                    let hi = max.map_or("inf".to_string(), |v| v.to_string());
                    parts.push(format!("in [{lo}, {hi}]"));
                }
                if !excluded.is_empty() {
                    parts.push(format!("not in {excluded:?}"));
                }
                if *power_of_two {
                    parts.push("a power of 2".to_string());
                }
                if !choices.is_empty() {
                    parts.push(format!("one of {}", choices.join("|")));
                }
                format!("{a} {}", parts.join(", "))
            }
            (
                Constraint::Control {
                    polarity: Polarity::Requires,
                },
                [a, b],
            ) => format!("{a} requires {b}"),
            (
                Constraint::Control {
                    polarity: Polarity::Conflicts,
                },
                [a, b],
            ) => format!("{a} conflicts with {b}"),
            (Constraint::Value { op }, [a, b]) => format!("{a} {} {b}", op.symbol()),
            (Constraint::Behavioral, [a, b]) => format!("{a} affects behavior with {b}"),
            _ => self.base_id(),
        }
    }
}
