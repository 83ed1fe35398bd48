//! Line-oriented regression scripts.
//!
//! ```text
//! # comment
//! MKFS=mini-mkfs
//! IMG=fs.img
//! $MKFS -O sparse_super2 $IMG
//! expect-field s_feature_compat 512
//! expect-stdout mkfs: done
//! ```
//!
//! `VAR=value` lines bind variables. A line starting with `$VAR`, where the
//! variable names a component, invokes it: option tokens follow and the
//! image variable comes last. `expect-field` checks the image after the
//! last invocation, `expect-stdout` the last invocation's output. Every
//! invocation must exit 0.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ir::{execute, ExecConfig, IrProgram, Outcome, RecordValue, Value};
use crate::stategen::{parse_argv, RenderError};
use crate::taint::{AnalysisInput, ParamId, ParamKind, ParamValue};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    /// Zero-based line index.
    pub line: usize,
    pub component: String,
    /// Option tokens as written.
    pub argv: Vec<String>,
    /// The same options as (param, value) pairs.
    pub params: Vec<(String, String)>,
    /// Image token as written, e.g. `$IMG`.
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Run(usize),
    ExpectField { field: String, value: i64 },
    ExpectStdout(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestScript {
    pub path: PathBuf,
    pub lines: Vec<String>,
    pub vars: BTreeMap<String, String>,
    pub sites: Vec<Invocation>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}:{line}: {message}")]
pub struct ScriptError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

fn is_var_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

pub fn parse_script(
    path: &Path,
    text: &str,
    input: &AnalysisInput,
) -> Result<TestScript, ScriptError> {
    let mut script = TestScript {
        path: path.to_path_buf(),
        lines: text.lines().map(str::to_string).collect(),
        vars: BTreeMap::new(),
        sites: Vec::new(),
        steps: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let err = |message: String| ScriptError {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            if is_var_name(k) && !v.contains(char::is_whitespace) {
                script.vars.insert(k.to_string(), v.to_string());
                continue;
            }
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "expect-field" => {
                let [_, field, value] = words[..] else {
                    return Err(err("expect-field takes a field and an integer".into()));
                };
                let value = value
                    .parse()
                    .map_err(|_| err(format!("not an integer: {value}")))?;
                script.steps.push(Step::ExpectField {
                    field: field.to_string(),
                    value,
                });
            }
            "expect-stdout" => {
                let rest = line["expect-stdout".len()..].trim();
                script.steps.push(Step::ExpectStdout(rest.to_string()));
            }
            w if w.starts_with('$') => {
                let var = &w[1..];
                let component = script
                    .vars
                    .get(var)
                    .filter(|c| input.component(c).is_some())
                    .ok_or_else(|| err(format!("${var} does not name a component")))?
                    .clone();
                let Some((image, opts)) = words[1..].split_last() else {
                    return Err(err("invocation without an image".into()));
                };
                if !image.starts_with('$') || script.vars.get(&image[1..]) != Some(&input.image) {
                    return Err(err(format!("last argument {image} is not the image")));
                }
                let argv: Vec<String> = opts.iter().map(|s| s.to_string()).collect();
                if let Some(t) = argv
                    .iter()
                    .find(|t| t.contains(['$', '`', '"', '\'', '|', '(', ')']))
                {
                    return Err(err(format!("unsupported shell syntax in {t}")));
                }
                let params = parse_argv(input, &component, &argv)
                    .map_err(|e: RenderError| err(e.to_string()))?;
                script.steps.push(Step::Run(script.sites.len()));
                script.sites.push(Invocation {
                    line: i,
                    component,
                    argv,
                    params,
                    image: image.to_string(),
                });
            }
            other => return Err(err(format!("unrecognized line starting with {other}"))),
        }
    }
    Ok(script)
}

/// Typed value for a textual option value.
pub fn typed_value(input: &AnalysisInput, p: &ParamId, text: &str) -> ParamValue {
    let kind = input.param(p).map(|m| m.kind);
    match (kind, text) {
        (Some(ParamKind::Flag), "on") => ParamValue::Flag(true),
        (Some(ParamKind::Flag), "off") => ParamValue::Flag(false),
        (Some(ParamKind::Int), t) => t
            .parse()
            .map(ParamValue::Int)
            .unwrap_or_else(|_| ParamValue::Text(t.to_string())),
        (_, t) => ParamValue::Text(t.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRun {
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Execute a script against the compiled components in `workdir`. Stops at
/// the first failed check.
pub fn run_script(
    script: &TestScript,
    prog: &IrProgram,
    input: &AnalysisInput,
    workdir: &Path,
    step_budget: u64,
) -> ScriptRun {
    let mut image: Option<RecordValue> = None;
    let mut stdout = String::new();
    let fail = |msg: String| ScriptRun {
        passed: false,
        failures: vec![msg],
    };
    for step in &script.steps {
        match step {
            Step::Run(i) => {
                let site = &script.sites[*i];
                let config = ExecConfig {
                    step_budget,
                    defaults: input.exec_defaults(&site.component),
                };
                let r = execute(prog, &site.component, &site.params, workdir, &config);
                if r.outcome != Outcome::Completed || r.exit_code != 0 {
                    return fail(format!(
                        "line {}: {} exited {}: {}{}",
                        site.line + 1,
                        site.component,
                        r.exit_code,
                        r.stdout,
                        r.stderr
                    ));
                }
                if r.image_after.is_some() {
                    image = r.image_after.clone();
                }
                stdout = r.stdout;
            }
            Step::ExpectField { field, value } => {
                let got = image.as_ref().and_then(|im| im.get(field));
                if got != Some(&Value::Int(*value)) {
                    return fail(format!("expected {field} = {value}, found {got:?}"));
                }
            }
            Step::ExpectStdout(line) => {
                if !stdout.lines().any(|l| l == line) {
                    return fail(format!("expected output line {line:?}"));
                }
            }
        }
    }
    ScriptRun {
        passed: true,
        failures: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taint::parse_input;

    fn input() -> AnalysisInput {
        parse_input(include_str!("../../../../fixtures/minifs/input.json")).unwrap()
    }

    const HEADER: &str = "MKFS=mini-mkfs\nFSCK=mini-fsck\nIMG=fs.img\n";

    #[test]
    fn parses_invocations_and_checks() {
        let text = format!("{HEADER}# make it\n$MKFS -b 1024 -O sparse_super2 $IMG\nexpect-field s_feature_compat 512\n$FSCK -f $IMG\nexpect-stdout fsck: clean\n");
        let s = parse_script(Path::new("t"), &text, &input()).unwrap();
        assert_eq!(s.sites.len(), 2);
        assert_eq!(s.sites[0].line, 4);
        assert_eq!(
            s.sites[0].params,
            [
                ("blocksize".to_string(), "1024".to_string()),
                ("sparse_super2".to_string(), "on".to_string())
            ]
        );
        assert_eq!(s.steps.len(), 4);
    }

    #[test]
    fn shell_substitution_is_rejected() {
        let text = format!("{HEADER}$MKFS $(echo -b 2048) $IMG\n");
        let e = parse_script(Path::new("t"), &text, &input()).unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn unknown_component_variable() {
        let text = format!("{HEADER}$XFS $IMG\n");
        assert!(parse_script(Path::new("t"), &text, &input()).is_err());
    }
}
