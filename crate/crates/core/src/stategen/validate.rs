//! The validity oracle: direct evaluation of every dependency against an
//! assignment, with unset parameters at their defaults.

use serde::{Deserialize, Serialize};

use super::state::Assignment;
use crate::deps::{Constraint, Dependency, DependencyDocument, Polarity};
use crate::taint::{AnalysisInput, ParamId, ParamKind, ParamValue};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid { violated: Vec<String> },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }

    pub fn violated(&self) -> &[String] {
        match self {
            Validity::Valid => &[],
            Validity::Invalid { violated } => violated,
        }
    }
}

/// Value of `p` under `assign`, falling back to the declared default.
pub fn effective(assign: &Assignment, input: &AnalysisInput, p: &ParamId) -> Option<ParamValue> {
    assign
        .get(p)
        .cloned()
        .or_else(|| input.param(p).map(|m| m.effective_default()))
}

fn kind_matches(kind: ParamKind, v: &ParamValue) -> bool {
    matches!(
        (kind, v),
        (ParamKind::Flag, ParamValue::Flag(_))
            | (ParamKind::Int, ParamValue::Int(_))
            | (ParamKind::String | ParamKind::Enum, ParamValue::Text(_))
    )
}

/// Whether `assign` breaks `d`. Behavioral dependencies never do.
pub fn violates(d: &Dependency, assign: &Assignment, input: &AnalysisInput) -> bool {
    let eff = |i: usize| {
        d.participants
            .get(i)
            .and_then(|p| effective(assign, input, p))
    };
    match &d.constraint {
        Constraint::DataType { kind } => eff(0).is_some_and(|v| !kind_matches(*kind, &v)),
        Constraint::ValueRange { choices, .. } => match eff(0) {
            Some(ParamValue::Int(v)) => !d.constraint.admits_int(v),
            Some(ParamValue::Text(t)) if !choices.is_empty() => !choices.contains(&t),
            _ => false,
        },
        Constraint::Control { polarity } => {
            let (a, b) = (
                eff(0).and_then(|v| v.as_flag()),
                eff(1).and_then(|v| v.as_flag()),
            );
            matches!(
                (polarity, a, b),
                (Polarity::Requires, Some(true), Some(false))
                    | (Polarity::Conflicts, Some(true), Some(true))
            )
        }
        Constraint::Value { op } => match (
            eff(0).and_then(|v| v.as_int()),
            eff(1).and_then(|v| v.as_int()),
        ) {
            (Some(a), Some(b)) => !op.holds(a, b),
            _ => false,
        },
        Constraint::Behavioral => false,
    }
}

pub fn validate_state(
    assign: &Assignment,
    deps: &DependencyDocument,
    input: &AnalysisInput,
) -> Validity {
    let violated: Vec<String> = deps
        .dependencies
        .iter()
        .filter(|d| violates(d, assign, input))
        .map(|d| d.id.clone())
        .collect();
    if violated.is_empty() {
        Validity::Valid
    } else {
        Validity::Invalid { violated }
    }
}
