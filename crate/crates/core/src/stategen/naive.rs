//! A dependency-agnostic baseline: every ordered combination of option
//! tokens over a fixed number of command-line slots.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::state::{canonicalize, Assignment};
use super::validate::validate_state;
use crate::deps::DependencyDocument;
use crate::taint::{AnalysisInput, ParamId, ParamKind, ParamValue};

pub const NAIVE_SLOTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveReport {
    pub params: Vec<ParamId>,
    pub slots: usize,
    pub total: usize,
    pub duplicates: usize,
    pub invalid: usize,
}

impl NaiveReport {
    pub fn duplicate_pct(&self) -> f64 {
        pct(self.duplicates, self.total)
    }

    pub fn invalid_pct(&self) -> f64 {
        pct(self.invalid, self.total)
    }
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

/// Tokens the baseline draws from: both flag settings, and the domain
/// minimum and default of each integer.
pub fn naive_tokens(input: &AnalysisInput, params: &[ParamId]) -> Vec<(ParamId, ParamValue)> {
    let mut out = Vec::new();
    for p in params {
        let Some(m) = input.param(p) else { continue };
        match m.kind {
            ParamKind::Flag => {
                out.push((p.clone(), ParamValue::Flag(true)));
                out.push((p.clone(), ParamValue::Flag(false)));
            }
            ParamKind::Int => {
                let lo = m.domain.as_ref().and_then(|d| d.min);
                let def = m.default.as_ref().and_then(|v| v.as_int());
                for v in [lo, def].into_iter().flatten() {
                    let t = (p.clone(), ParamValue::Int(v));
                    if !out.contains(&t) {
                        out.push(t);
                    }
                }
            }
            ParamKind::String | ParamKind::Enum => {
                for c in m.domain.iter().flat_map(|d| &d.choices) {
                    out.push((p.clone(), ParamValue::Text(c.clone())));
                }
            }
        }
    }
    out
}

/// Fill `slots` positions with any token or nothing, later tokens winning,
/// and count states that repeat an earlier one or break a dependency.
pub fn naive_baseline(
    doc: &DependencyDocument,
    input: &AnalysisInput,
    params: &[ParamId],
    slots: usize,
) -> NaiveReport {
    let tokens = naive_tokens(input, params);
    let choices = tokens.len() + 1;
    let total = choices.pow(slots as u32);
    let mut seen = HashSet::new();
    let (mut duplicates, mut invalid) = (0, 0);
    for n in 0..total {
        let mut a = Assignment::new();
        let mut rest = n;
        for _ in 0..slots {
            let pick = rest % choices;
            rest /= choices;
            if let Some((p, v)) = tokens.get(pick) {
                a.insert(p.clone(), v.clone());
            }
        }
        if !seen.insert(canonicalize(&a)) {
            duplicates += 1;
        }
        if !validate_state(&a, doc, input).is_valid() {
            invalid += 1;
        }
    }
    NaiveReport {
        params: params.to_vec(),
        slots,
        total,
        duplicates,
        invalid,
    }
}
