//! Misconfiguration handling: run violating states through the scenario and
//! sort the outcome into one reaction.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::text::mentions;
use crate::deps::{Dependency, DependencyDocument};
use crate::ir::{IrProgram, Outcome, Value};
use crate::scenario::{args_from_assignment, run_scenario, ScenarioRun};
use crate::stategen::{Assignment, ConfigState};
use crate::taint::{AnalysisInput, ParamId, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reaction {
    EarlyTermination,
    FunctionalFailure,
    SilentViolation,
    SilentIgnorance,
    CrashHang,
    PartialReport,
    GoodHandling,
}

impl Reaction {
    pub const ALL: [Reaction; 7] = [
        Reaction::EarlyTermination,
        Reaction::FunctionalFailure,
        Reaction::SilentViolation,
        Reaction::SilentIgnorance,
        Reaction::CrashHang,
        Reaction::PartialReport,
        Reaction::GoodHandling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Reaction::EarlyTermination => "early_termination",
            Reaction::FunctionalFailure => "functional_failure",
            Reaction::SilentViolation => "silent_violation",
            Reaction::SilentIgnorance => "silent_ignorance",
            Reaction::CrashHang => "crash_hang",
            Reaction::PartialReport => "partial_report",
            Reaction::GoodHandling => "good_handling",
        }
    }

    pub fn is_bad(self) -> bool {
        self != Reaction::GoodHandling
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMismatch {
    pub param: String,
    pub field: String,
    pub requested: i64,
    pub observed: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionEvidence {
    /// (component, exit code) per executed step.
    pub exit_codes: Vec<(String, i32)>,
    /// Parameters the diagnostics name.
    pub mentioned: Vec<String>,
    pub missing: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub field_mismatches: Vec<FieldMismatch>,
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionReport {
    pub state: String,
    pub violated: Vec<String>,
    pub reaction: Reaction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub evidence: ReactionEvidence,
}

/// Whether the diagnostics pinpoint `p`: its name, or for non-flag values
/// the value that was asked for.
fn pinpointed(diag: &str, p: &ParamId, assign: &Assignment) -> bool {
    if mentions(diag, &p.name) {
        return true;
    }
    match assign.get(p) {
        Some(ParamValue::Flag(_)) | None => false,
        Some(v) => mentions(diag, &v.to_string()),
    }
}

fn field_mismatches(
    run: &ScenarioRun,
    assign: &Assignment,
    input: &AnalysisInput,
) -> Vec<FieldMismatch> {
    let Some(image) = &run.final_image else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (p, v) in assign {
        let Some(imf) = input.param(p).and_then(|m| m.image_field.as_ref()) else {
            continue;
        };
        let Some(requested) = imf.encoding.expected(v) else {
            continue;
        };
        let Some(Value::Int(raw)) = image.get(&imf.field) else {
            continue;
        };
        let observed = imf.encoding.observed(*raw);
        if observed != requested {
            out.push(FieldMismatch {
                param: p.to_string(),
                field: imf.field.clone(),
                requested,
                observed,
            });
        }
    }
    out
}

/// Sort one run into a reaction. `baseline` is the same scenario without
/// the violating assignments; `violated` the dependencies the state breaks.
pub fn classify_reaction(
    run: &ScenarioRun,
    baseline: &ScenarioRun,
    state: &ConfigState,
    violated: &[&Dependency],
    input: &AnalysisInput,
) -> (Reaction, Option<String>, ReactionEvidence) {
    let diag = run.diagnostics();
    let assign = &state.assignments;
    let mut evidence = ReactionEvidence {
        exit_codes: run
            .steps
            .iter()
            .map(|s| (s.component.clone(), s.result.exit_code))
            .collect(),
        diagnostics: diag.clone(),
        ..ReactionEvidence::default()
    };
    let mut params: Vec<&ParamId> = violated.iter().flat_map(|d| &d.participants).collect();
    params.sort();
    params.dedup();
    for p in &params {
        if pinpointed(&diag, p, assign) {
            evidence.mentioned.push(p.to_string());
        } else {
            evidence.missing.push(p.to_string());
        }
    }
    if run
        .steps
        .iter()
        .any(|s| s.result.outcome != Outcome::Completed)
    {
        return (Reaction::CrashHang, None, evidence);
    }
    if !params.is_empty() && evidence.missing.is_empty() {
        return (Reaction::GoodHandling, None, evidence);
    }
    if violated.len() >= 2 && !evidence.mentioned.is_empty() {
        return (Reaction::PartialReport, None, evidence);
    }
    let violating_step = params
        .iter()
        .filter_map(|p| input.step_of(&p.component))
        .max()
        .unwrap_or(0);
    if let Some((i, _)) = run
        .steps
        .iter()
        .enumerate()
        .find(|(_, s)| s.result.exit_code != 0)
    {
        if i <= violating_step {
            return (Reaction::EarlyTermination, None, evidence);
        }
    }
    if run.first_failure().is_some() || run.steps.len() < input.scenario.len() {
        return (Reaction::FunctionalFailure, None, evidence);
    }
    evidence.field_mismatches = field_mismatches(run, assign, input);
    if !evidence.field_mismatches.is_empty() {
        return (Reaction::SilentViolation, None, evidence);
    }
    if run.final_image.is_some() && run.final_image == baseline.final_image {
        return (Reaction::SilentIgnorance, None, evidence);
    }
    (
        Reaction::GoodHandling,
        Some("tolerated".to_string()),
        evidence,
    )
}

/// Run every state, and its baseline, in a fresh working directory.
pub fn run_handling_campaign(
    states: &[ConfigState],
    deps: &DependencyDocument,
    input: &AnalysisInput,
    prog: &IrProgram,
    step_budget: u64,
) -> std::io::Result<Vec<ReactionReport>> {
    let mut reports = Vec::new();
    for state in states {
        let violated: Vec<&Dependency> = state
            .violated()
            .iter()
            .filter_map(|id| deps.get(id))
            .collect();
        let target = violated
            .first()
            .map(|d| d.participants.clone())
            .unwrap_or_default();
        let base_assign: Assignment = state
            .assignments
            .iter()
            .filter(|(p, _)| !target.contains(p))
            .map(|(p, v)| (p.clone(), v.clone()))
            .collect();
        let exec = |a: &Assignment| -> std::io::Result<ScenarioRun> {
            let dir = tempfile::tempdir()?;
            Ok(run_scenario(
                prog,
                input,
                &args_from_assignment(a),
                dir.path(),
                step_budget,
                None,
            ))
        };
        let run = exec(&state.assignments)?;
        let baseline = exec(&base_assign)?;
        let (reaction, note, evidence) =
            classify_reaction(&run, &baseline, state, &violated, input);
        reports.push(ReactionReport {
            state: state.id.clone(),
            violated: state.violated().iter().map(|s| s.to_string()).collect(),
            reaction,
            note,
            evidence,
        });
    }
    Ok(reports)
}
