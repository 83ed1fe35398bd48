//! Running the usage scenario: each component in order, sharing one
//! working directory.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ir::{
    execute, ExecConfig, ExecutionResult, IrProgram, Outcome, RecordValue, DEFAULT_STEP_BUDGET,
};
use crate::taint::{AnalysisInput, ParamId, ParamValue};

/// Arguments per component, as (param, textual value) pairs.
pub type ScenarioArgs = BTreeMap<String, Vec<(String, String)>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRun {
    pub component: String,
    pub argv: Vec<(String, String)>,
    pub result: ExecutionResult,
    /// Whether the step met its functional oracle.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub steps: Vec<StepRun>,
    /// Last superblock image written by any step.
    pub final_image: Option<RecordValue>,
}

impl ScenarioRun {
    /// Index of the first step that failed its oracle.
    pub fn first_failure(&self) -> Option<usize> {
        self.steps.iter().position(|s| !s.passed)
    }

    pub fn diagnostics(&self) -> String {
        self.steps
            .iter()
            .map(|s| format!("{}{}", s.result.stdout, s.result.stderr))
            .collect()
    }
}

/// Arguments from a parameter assignment, grouped by component.
pub fn args_from_assignment(assign: &BTreeMap<ParamId, ParamValue>) -> ScenarioArgs {
    let mut out = ScenarioArgs::new();
    for (p, v) in assign {
        out.entry(p.component.clone())
            .or_default()
            .push((p.name.clone(), v.to_string()));
    }
    out
}

/// Execute the first `upto` scenario steps (all when `None`), stopping at
/// the first step that exits abnormally.
pub fn run_scenario(
    prog: &IrProgram,
    input: &AnalysisInput,
    args: &ScenarioArgs,
    workdir: &Path,
    step_budget: u64,
    upto: Option<usize>,
) -> ScenarioRun {
    let mut steps = Vec::new();
    let mut final_image = None;
    let n = upto
        .unwrap_or(input.scenario.len())
        .min(input.scenario.len());
    for step in &input.scenario[..n] {
        let argv = args.get(&step.component).cloned().unwrap_or_default();
        let config = ExecConfig {
            step_budget,
            defaults: input.exec_defaults(&step.component),
        };
        let result = execute(prog, &step.component, &argv, workdir, &config);
        let completed = result.outcome == Outcome::Completed;
        let passed = completed
            && result.exit_code == step.expect_exit
            && step
                .expect_stdout
                .as_ref()
                .is_none_or(|line| result.stdout.lines().any(|l| l == line));
        if result.image_after.is_some() {
            final_image = result.image_after.clone();
        }
        let stop = !completed || result.exit_code != 0;
        steps.push(StepRun {
            component: step.component.clone(),
            argv,
            result,
            passed,
        });
        if stop {
            break;
        }
    }
    ScenarioRun { steps, final_image }
}

/// Step budget from `CONFDEP_STEP_BUDGET`, else the default.
pub fn step_budget_from_env() -> u64 {
    std::env::var("CONFDEP_STEP_BUDGET")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_STEP_BUDGET)
}
