//! Command lines for a state, and the inverse parse.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::Assignment;
use crate::taint::{AnalysisInput, ParamValue, SyntaxRule, SyntaxStyle};

/// Stands in for the image path in rendered commands.
pub const IMG: &str = "<img>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub component: String,
    /// Option tokens, without the program name or the image.
    pub argv: Vec<String>,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.component)?;
        for a in &self.argv {
            write!(f, " {a}")?;
        }
        write!(f, " {IMG}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandPlan {
    /// In scenario order.
    pub commands: Vec<Command>,
    /// File name of the image inside the working directory.
    pub image: String,
}

impl CommandPlan {
    pub fn lines(&self) -> Vec<String> {
        self.commands.iter().map(|c| c.to_string()).collect()
    }

    pub fn command(&self, component: &str) -> Option<&Command> {
        self.commands.iter().find(|c| c.component == component)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("{component}: no syntax rule for parameter {param}")]
    NoRule { component: String, param: String },
    #[error("{component}: unknown option {token}")]
    UnknownOption { component: String, token: String },
    #[error("{component}: option {flag} needs a value")]
    MissingValue { component: String, flag: String },
    #[error("unknown component {0}")]
    UnknownComponent(String),
}

fn feature_item(rule: &SyntaxRule, v: &ParamValue) -> String {
    match v {
        ParamValue::Flag(true) => rule.key().to_string(),
        ParamValue::Flag(false) => format!("^{}", rule.key()),
        other => format!("{}={other}", rule.key()),
    }
}

fn extended_item(rule: &SyntaxRule, v: &ParamValue) -> String {
    match v {
        ParamValue::Flag(true) => rule.key().to_string(),
        other => format!("{}={other}", rule.key()),
    }
}

/// Option tokens for one component. Feature and extended parameters sharing
/// a flag collapse into one comma-separated token, placed where the first
/// rule for that flag appears.
pub fn render_component(
    assign: &Assignment,
    input: &AnalysisInput,
    component: &str,
) -> Result<Vec<String>, RenderError> {
    let cin = input
        .component(component)
        .ok_or_else(|| RenderError::UnknownComponent(component.to_string()))?;
    for p in assign.keys().filter(|p| p.component == component) {
        if cin.rule(&p.name).is_none() {
            return Err(RenderError::NoRule {
                component: component.to_string(),
                param: p.name.clone(),
            });
        }
    }
    let value = |r: &SyntaxRule| {
        assign
            .iter()
            .find(|(p, _)| p.component == component && p.name == r.param)
            .map(|(_, v)| v)
    };
    let mut argv = Vec::new();
    let mut grouped: Vec<&str> = Vec::new();
    for rule in &cin.syntax {
        match rule.style {
            SyntaxStyle::Value => {
                if let Some(v) = value(rule) {
                    argv.push(rule.flag.clone());
                    argv.push(v.to_string());
                }
            }
            SyntaxStyle::Switch => {
                if let Some(ParamValue::Flag(true)) = value(rule) {
                    argv.push(rule.flag.clone());
                }
            }
            SyntaxStyle::Feature | SyntaxStyle::Extended => {
                if grouped.contains(&rule.flag.as_str()) {
                    continue;
                }
                let items: Vec<String> = cin
                    .syntax
                    .iter()
                    .filter(|r| r.flag == rule.flag && r.style == rule.style)
                    .filter_map(|r| {
                        let v = value(r)?;
                        Some(if r.style == SyntaxStyle::Feature {
                            feature_item(r, v)
                        } else {
                            extended_item(r, v)
                        })
                    })
                    .collect();
                if !items.is_empty() {
                    grouped.push(&rule.flag);
                    argv.push(rule.flag.clone());
                    argv.push(items.join(","));
                }
            }
        }
    }
    Ok(argv)
}

pub fn render_commands(
    assign: &Assignment,
    input: &AnalysisInput,
) -> Result<CommandPlan, RenderError> {
    for p in assign.keys() {
        if input.step_of(&p.component).is_none() {
            return Err(RenderError::UnknownComponent(p.component.clone()));
        }
    }
    let commands = input
        .scenario
        .iter()
        .map(|s| {
            Ok(Command {
                component: s.component.clone(),
                argv: render_component(assign, input, &s.component)?,
            })
        })
        .collect::<Result<_, RenderError>>()?;
    Ok(CommandPlan {
        commands,
        image: input.image.clone(),
    })
}

fn flag_value(text: &str) -> String {
    match text {
        "" => "on".to_string(),
        t => t.to_string(),
    }
}

/// Inverse of [`render_component`]: option tokens back to (param, value)
/// pairs. A trailing image token is ignored.
pub fn parse_argv(
    input: &AnalysisInput,
    component: &str,
    tokens: &[String],
) -> Result<Vec<(String, String)>, RenderError> {
    let cin = input
        .component(component)
        .ok_or_else(|| RenderError::UnknownComponent(component.to_string()))?;
    let unknown = |t: &str| RenderError::UnknownOption {
        component: component.to_string(),
        token: t.to_string(),
    };
    let mut out = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        if tok == IMG || !tok.starts_with('-') {
            continue;
        }
        let rules: Vec<&SyntaxRule> = cin.syntax.iter().filter(|r| &r.flag == tok).collect();
        let Some(first) = rules.first() else {
            return Err(unknown(tok));
        };
        if first.style == SyntaxStyle::Switch {
            out.push((first.param.clone(), "on".to_string()));
            continue;
        }
        let arg = it.next().ok_or_else(|| RenderError::MissingValue {
            component: component.to_string(),
            flag: tok.clone(),
        })?;
        if first.style == SyntaxStyle::Value {
            out.push((first.param.clone(), arg.clone()));
            continue;
        }
        for item in arg.split(',').filter(|s| !s.is_empty()) {
            let (neg, item) = match item.strip_prefix('^') {
                Some(rest) if first.style == SyntaxStyle::Feature => (true, rest),
                _ => (false, item),
            };
            let (key, val) = item.split_once('=').unwrap_or((item, ""));
            let rule = rules
                .iter()
                .find(|r| r.key() == key)
                .ok_or_else(|| unknown(key))?;
            let val = if neg {
                "off".to_string()
            } else {
                flag_value(val)
            };
            out.push((rule.param.clone(), val));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taint::{parse_input, ParamId};

    fn input() -> AnalysisInput {
        parse_input(include_str!("../../../../fixtures/minifs/input.json")).unwrap()
    }

    fn assign(pairs: &[(&str, &str, ParamValue)]) -> Assignment {
        pairs
            .iter()
            .map(|(c, n, v)| (ParamId::new(*c, *n), v.clone()))
            .collect()
    }

    #[test]
    fn features_aggregate_into_one_token() {
        let a = assign(&[
            ("mini-mkfs", "resize_inode", ParamValue::Flag(true)),
            ("mini-mkfs", "sparse_super", ParamValue::Flag(true)),
        ]);
        let plan = render_commands(&a, &input()).unwrap();
        assert_eq!(
            plan.lines()[0],
            "mini-mkfs -O resize_inode,sparse_super <img>"
        );
    }

    #[test]
    fn disabled_feature_gets_a_caret() {
        let a = assign(&[
            ("mini-mkfs", "resize_inode", ParamValue::Flag(true)),
            ("mini-mkfs", "sparse_super", ParamValue::Flag(false)),
        ]);
        let plan = render_commands(&a, &input()).unwrap();
        assert_eq!(
            plan.lines()[0],
            "mini-mkfs -O resize_inode,^sparse_super <img>"
        );
    }

    #[test]
    fn root_renders_bare_commands_in_scenario_order() {
        let plan = render_commands(&Assignment::new(), &input()).unwrap();
        let comps: Vec<_> = plan.commands.iter().map(|c| c.component.as_str()).collect();
        assert_eq!(
            comps,
            ["mini-mkfs", "mini-mount", "mini-resize", "mini-fsck"]
        );
        assert_eq!(plan.lines()[0], "mini-mkfs <img>");
    }

    #[test]
    fn switch_renders_last_command() {
        let a = assign(&[("mini-fsck", "fix", ParamValue::Flag(true))]);
        let plan = render_commands(&a, &input()).unwrap();
        assert_eq!(plan.lines().last().unwrap(), "mini-fsck -f <img>");
    }

    #[test]
    fn values_and_extended_options() {
        let a = assign(&[
            ("mini-mkfs", "blocksize", ParamValue::Int(1024)),
            ("mini-mount", "dax", ParamValue::Flag(true)),
            ("mini-mount", "journal", ParamValue::Flag(false)),
        ]);
        let plan = render_commands(&a, &input()).unwrap();
        assert_eq!(plan.command("mini-mkfs").unwrap().argv, ["-b", "1024"]);
        assert_eq!(
            plan.command("mini-mount").unwrap().argv,
            ["-o", "dax,journal=off"]
        );
    }

    #[test]
    fn unknown_param_is_an_error() {
        let a = assign(&[("mini-mkfs", "nope", ParamValue::Flag(true))]);
        assert!(matches!(
            render_commands(&a, &input()),
            Err(RenderError::NoRule { .. })
        ));
    }

    #[test]
    fn parse_inverts_render() {
        let input = input();
        let a = assign(&[
            ("mini-mkfs", "blocksize", ParamValue::Int(2048)),
            ("mini-mkfs", "meta_bg", ParamValue::Flag(true)),
            ("mini-mkfs", "sparse_super", ParamValue::Flag(false)),
        ]);
        let argv = render_component(&a, &input, "mini-mkfs").unwrap();
        let mut pairs = parse_argv(&input, "mini-mkfs", &argv).unwrap();
        pairs.sort();
        assert_eq!(
            pairs,
            [
                ("blocksize".to_string(), "2048".to_string()),
                ("meta_bg".to_string(), "on".to_string()),
                ("sparse_super".to_string(), "off".to_string()),
            ]
        );
    }
}
