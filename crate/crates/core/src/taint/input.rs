//! The analysis input document: entry points, parameter metadata, the
//! superblock variable, CLI syntax and the usage scenario, all in one file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ir::{IrProgram, Op, Operand};

/// A parameter, qualified by the component that reads it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId {
    pub component: String,
    pub name: String,
}

impl ParamId {
    pub fn new(component: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            component: component.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Flag,
    Int,
    String,
    Enum,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Flag => "flag",
            ParamKind::Int => "int",
            ParamKind::String => "string",
            ParamKind::Enum => "enum",
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A concrete parameter value. Flags are booleans, rendered `on`/`off`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Flag(bool),
    Int(i64),
    Text(String),
}

impl ParamValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_flag(&self) -> Option<bool> {
        match self {
            ParamValue::Flag(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Flag(true) => f.write_str("on"),
            ParamValue::Flag(false) => f.write_str("off"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageNote {
    Local,
    Global,
    BitmapBit,
    SuperblockDirect,
}

/// How a requested value shows up in a superblock field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum FieldEncoding {
    Identity,
    #[serde(rename = "log2_minus_10")]
    Log2Minus10,
    FlagBit {
        bit: u32,
    },
}

impl FieldEncoding {
    /// Field contribution expected for `v`. Flag bits return the bit value
    /// (0 or 1) to compare against `(field >> bit) & 1`.
    pub fn expected(self, v: &ParamValue) -> Option<i64> {
        match (self, v) {
            (FieldEncoding::Identity, ParamValue::Int(i)) => Some(*i),
            (FieldEncoding::Log2Minus10, ParamValue::Int(i)) if *i > 0 => {
                Some(63 - i.leading_zeros() as i64 - 10)
            }
            (FieldEncoding::FlagBit { .. }, ParamValue::Flag(b)) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn observed(self, field: i64) -> i64 {
        match self {
            FieldEncoding::FlagBit { bit } => (field >> bit) & 1,
            _ => field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageField {
    pub field: String,
    #[serde(flatten)]
    pub encoding: FieldEncoding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    /// Filled from the enclosing component when omitted.
    #[serde(default)]
    pub component: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_note: Option<StorageNote>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_field: Option<ImageField>,
}

impl ParamMeta {
    pub fn id(&self) -> ParamId {
        ParamId::new(&self.component, &self.name)
    }

    /// Declared default, or off / 0 / empty.
    pub fn effective_default(&self) -> ParamValue {
        self.default.clone().unwrap_or(match self.kind {
            ParamKind::Flag => ParamValue::Flag(false),
            ParamKind::Int => ParamValue::Int(0),
            ParamKind::String | ParamKind::Enum => ParamValue::Text(String::new()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntaxStyle {
    /// Aggregated into one `-O f1,^f2` token per flag letter.
    Feature,
    /// `-b 1024`.
    Value,
    /// Bare `-f` when on, nothing when off.
    Switch,
    /// Aggregated into one `-E k=v,k2` token per flag letter.
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxRule {
    pub param: String,
    pub style: SyntaxStyle,
    pub flag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl SyntaxRule {
    pub fn key(&self) -> &str {
        self.key.as_deref().unwrap_or(&self.param)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentInput {
    pub source: String,
    pub entry_function: String,
    pub superblock_variable: String,
    #[serde(default)]
    pub error_sinks: Vec<String>,
    pub parameters: Vec<ParamMeta>,
    #[serde(default)]
    pub syntax: Vec<SyntaxRule>,
}

impl ComponentInput {
    pub fn param(&self, name: &str) -> Option<&ParamMeta> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn rule(&self, name: &str) -> Option<&SyntaxRule> {
        self.syntax.iter().find(|r| r.param == name)
    }
}

/// One step of the usage scenario and its functional oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub component: String,
    #[serde(default)]
    pub expect_exit: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_stdout: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisInput {
    pub ecosystem: String,
    #[serde(default = "default_image")]
    pub image: String,
    pub components: BTreeMap<String, ComponentInput>,
    pub scenario: Vec<ScenarioStep>,
}

fn default_image() -> String {
    "fs.img".to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("input is not valid JSON: {0}")]
    Json(String),
    #[error("component {component}: {message}")]
    Schema { component: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("component {component}: {message}")]
    Dangling { component: String, message: String },
}

#[derive(Deserialize)]
struct RawInput {
    ecosystem: String,
    #[serde(default = "default_image")]
    image: String,
    components: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    scenario: Vec<ScenarioStep>,
}

pub fn load_user_input(path: &Path) -> Result<AnalysisInput, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_input(&text)
}

/// Parse and validate. Components are decoded one at a time so schema
/// errors name the offending component.
pub fn parse_input(text: &str) -> Result<AnalysisInput, InputError> {
    let raw: RawInput = serde_json::from_str(text).map_err(|e| InputError::Json(e.to_string()))?;
    let mut components = BTreeMap::new();
    for (name, value) in raw.components {
        let mut c: ComponentInput =
            serde_json::from_value(value).map_err(|e| InputError::Schema {
                component: name.clone(),
                message: e.to_string(),
            })?;
        for p in &mut c.parameters {
            if p.component.is_empty() {
                p.component = name.clone();
            }
        }
        components.insert(name, c);
    }
    let input = AnalysisInput {
        ecosystem: raw.ecosystem,
        image: raw.image,
        components,
        scenario: raw.scenario,
    };
    input.validate()?;
    Ok(input)
}

impl AnalysisInput {
    pub fn component(&self, name: &str) -> Option<&ComponentInput> {
        self.components.get(name)
    }

    pub fn param(&self, id: &ParamId) -> Option<&ParamMeta> {
        self.components.get(&id.component)?.param(&id.name)
    }

    /// Every parameter, ordered by component then declaration.
    pub fn params(&self) -> impl Iterator<Item = &ParamMeta> {
        self.components.values().flat_map(|c| c.parameters.iter())
    }

    /// Index of a component in the scenario.
    pub fn step_of(&self, component: &str) -> Option<usize> {
        self.scenario.iter().position(|s| s.component == component)
    }

    /// Parameter defaults as the interpreter's textual argv values.
    pub fn exec_defaults(&self, component: &str) -> BTreeMap<String, String> {
        self.components
            .get(component)
            .map(|c| {
                c.parameters
                    .iter()
                    .filter_map(|p| p.default.as_ref().map(|d| (p.name.clone(), d.to_string())))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn validate(&self) -> Result<(), InputError> {
        for (name, c) in &self.components {
            let mut seen = BTreeSet::new();
            for p in &c.parameters {
                let schema = |message: String| InputError::Schema {
                    component: name.clone(),
                    message,
                };
                if !seen.insert(&p.name) {
                    return Err(schema(format!("duplicate parameter {}", p.name)));
                }
                if p.component != *name {
                    return Err(schema(format!(
                        "parameter {} names component {}",
                        p.name, p.component
                    )));
                }
                let ok_default = matches!(
                    (p.kind, &p.default),
                    (_, None)
                        | (ParamKind::Flag, Some(ParamValue::Flag(_)))
                        | (ParamKind::Int, Some(ParamValue::Int(_)))
                        | (
                            ParamKind::String | ParamKind::Enum,
                            Some(ParamValue::Text(_))
                        )
                );
                if !ok_default {
                    return Err(schema(format!(
                        "default of {} does not match kind {}",
                        p.name, p.kind
                    )));
                }
                if let (ParamKind::Int, Some(d)) = (p.kind, &p.domain) {
                    let v = p.default.as_ref().and_then(ParamValue::as_int);
                    let low = d.min.zip(d.max).is_some_and(|(lo, hi)| lo > hi);
                    let outside = v.is_some_and(|v| {
                        d.min.is_some_and(|lo| v < lo) || d.max.is_some_and(|hi| v > hi)
                    });
                    if low || outside {
                        return Err(schema(format!(
                            "default of {} lies outside its domain",
                            p.name
                        )));
                    }
                }
            }
            for r in &c.syntax {
                if c.param(&r.param).is_none() {
                    return Err(InputError::Dangling {
                        component: name.clone(),
                        message: format!("syntax rule for unknown parameter {}", r.param),
                    });
                }
            }
        }
        for s in &self.scenario {
            if !self.components.contains_key(&s.component) {
                return Err(InputError::Invalid(format!(
                    "scenario names unknown component {}",
                    s.component
                )));
            }
        }
        Ok(())
    }

    /// Cross-check against the lowered program. Returns warnings for
    /// parameters read in code but not declared.
    pub fn check_program(&self, prog: &IrProgram) -> Result<Vec<String>, InputError> {
        let mut warnings = Vec::new();
        for (name, c) in &self.components {
            let dangling = |message: String| InputError::Dangling {
                component: name.clone(),
                message,
            };
            let fs = prog
                .components
                .get(name)
                .ok_or_else(|| dangling("no source for this component".into()))?;
            if fs.function(&c.entry_function).is_none() {
                return Err(dangling(format!(
                    "entry function {} does not exist",
                    c.entry_function
                )));
            }
            if !fs.is_global(&c.superblock_variable) {
                return Err(dangling(format!(
                    "superblock variable {} is not a global",
                    c.superblock_variable
                )));
            }
            let mut read = BTreeSet::new();
            for f in &fs.functions {
                for i in f.instructions() {
                    if let Op::Builtin { name: b } = &i.op {
                        if b.starts_with("param_") {
                            if let Some(Operand::Str(p)) = i.operands.first() {
                                read.insert(p.clone());
                            }
                        }
                    }
                }
            }
            for p in read {
                if c.param(&p).is_none() {
                    warnings.push(format!(
                        "component {name}: parameter {p} is read but not declared"
                    ));
                }
            }
        }
        Ok(warnings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "ecosystem": "t",
        "components": {
            "c": {
                "source": "c.confc",
                "entry_function": "main",
                "superblock_variable": "sb",
                "parameters": [
                    { "name": "b", "kind": "int", "domain": { "min": 1, "max": 8 }, "default": 4 },
                    { "name": "f", "kind": "flag" }
                ]
            }
        },
        "scenario": [ { "component": "c" } ]
    }"#;

    #[test]
    fn parses_and_fills_component() {
        let input = parse_input(MINIMAL).unwrap();
        let p = input.param(&ParamId::new("c", "b")).unwrap();
        assert_eq!(p.component, "c");
        assert_eq!(p.default, Some(ParamValue::Int(4)));
        assert_eq!(
            input.exec_defaults("c").get("b").map(String::as_str),
            Some("4")
        );
    }

    #[test]
    fn missing_entry_function_names_component() {
        let text = MINIMAL.replace("\"entry_function\": \"main\",", "");
        let err = parse_input(&text).unwrap_err();
        assert!(
            matches!(&err, InputError::Schema { component, .. } if component == "c"),
            "{err}"
        );
        assert!(err.to_string().contains("entry_function"));
    }

    #[test]
    fn default_outside_domain_is_rejected() {
        let text = MINIMAL.replace("\"default\": 4", "\"default\": 9");
        assert!(parse_input(&text).is_err());
    }

    #[test]
    fn log2_encoding() {
        assert_eq!(
            FieldEncoding::Log2Minus10.expected(&ParamValue::Int(1024)),
            Some(0)
        );
        assert_eq!(
            FieldEncoding::Log2Minus10.expected(&ParamValue::Int(4096)),
            Some(2)
        );
        assert_eq!(FieldEncoding::FlagBit { bit: 9 }.observed(1 << 9), 1);
    }
}
