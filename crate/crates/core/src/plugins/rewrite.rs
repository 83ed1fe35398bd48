//! Regression-script rewriting: put generated configuration states into
//! existing test cases.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::testscript::{typed_value, TestScript};
use crate::deps::DependencyDocument;
use crate::stategen::{render_component, validate_state, Assignment, ConfigState, RenderError};
use crate::taint::{AnalysisInput, ParamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteMode {
    /// Swap each invocation's options for the state's.
    Replace,
    /// Keep each invocation's options and add the state's where they do not
    /// clash.
    Append,
}

impl fmt::Display for RewriteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewriteMode::Replace => "replace",
            RewriteMode::Append => "append",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewrittenScript {
    pub source: PathBuf,
    pub state: String,
    pub mode: RewriteMode,
    pub text: String,
}

impl RewrittenScript {
    /// File name for the output: the source stem plus the state id.
    pub fn file_name(&self) -> String {
        let stem = self
            .source
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy();
        let ext = self
            .source
            .extension()
            .map(|e| format!(".{}", e.to_string_lossy()))
            .unwrap_or_default();
        format!("{stem}.{}{ext}", self.state)
    }
}

/// Options every invocation in the script already sets.
pub fn existing_assignment(script: &TestScript, input: &AnalysisInput) -> Assignment {
    let mut a = Assignment::new();
    for site in &script.sites {
        for (name, value) in &site.params {
            let p = ParamId::new(&site.component, name);
            let v = typed_value(input, &p, value);
            a.insert(p, v);
        }
    }
    a
}

/// State parameters that append mode may add: not already set by the
/// script, and not breaking anything the union did not already break.
pub fn appendable(
    script: &TestScript,
    state: &ConfigState,
    deps: &DependencyDocument,
    input: &AnalysisInput,
) -> Assignment {
    let mut union = existing_assignment(script, input);
    let mut added = Assignment::new();
    for (p, v) in &state.assignments {
        if union.contains_key(p) {
            continue;
        }
        let before = validate_state(&union, deps, input);
        let mut next = union.clone();
        next.insert(p.clone(), v.clone());
        let after = validate_state(&next, deps, input);
        if after
            .violated()
            .iter()
            .all(|id| before.violated().contains(id))
        {
            union = next;
            added.insert(p.clone(), v.clone());
        }
    }
    added
}

fn render_site(argv: &[String], component: &str, image: &str, extra: &[String]) -> String {
    let mut words = vec![component.to_string()];
    words.extend(argv.iter().cloned());
    words.extend(extra.iter().cloned());
    words.push(image.to_string());
    words.join(" ")
}

/// One rewritten script per state. Only invocation lines change, plus a
/// comment header naming the state and mode.
pub fn rewrite_tests(
    script: &TestScript,
    states: &[ConfigState],
    mode: RewriteMode,
    deps: &DependencyDocument,
    input: &AnalysisInput,
) -> Result<Vec<RewrittenScript>, RenderError> {
    let var_of = |component: &str| {
        script
            .vars
            .iter()
            .find(|(_, v)| v.as_str() == component)
            .map(|(k, _)| format!("${k}"))
            .unwrap_or_else(|| component.to_string())
    };
    let mut out = Vec::new();
    for state in states {
        let chosen = match mode {
            RewriteMode::Replace => state.assignments.clone(),
            RewriteMode::Append => appendable(script, state, deps, input),
        };
        let mut lines = script.lines.clone();
        for site in &script.sites {
            let rendered = render_component(&chosen, input, &site.component)?;
            let cmd = var_of(&site.component);
            lines[site.line] = match mode {
                RewriteMode::Replace => render_site(&rendered, &cmd, &site.image, &[]),
                RewriteMode::Append => render_site(&site.argv, &cmd, &site.image, &rendered),
            };
        }
        let header = format!(
            "# confdep: state {} ({mode}) from {}",
            state.id,
            script.path.display()
        );
        let mut text = header;
        text.push('\n');
        for l in lines {
            text.push_str(&l);
            text.push('\n');
        }
        out.push(RewrittenScript {
            source: script.path.clone(),
            state: state.id.clone(),
            mode,
            text,
        });
    }
    Ok(out)
}
