//! Taint analysis seeded at configuration-parameter reads.

mod engine;
mod input;

pub use engine::{
    analyze, link_cross_component, seed_and_propagate, Analysis, Context, FieldAccess, FieldEntry,
    FieldMap, Labels, Site, SiteTaint, TaintError, TaintOptions, TaintTrace, DEFAULT_CONTEXT_DEPTH,
};
pub use input::{
    load_user_input, parse_input, AnalysisInput, ComponentInput, Domain, FieldEncoding, ImageField,
    InputError, ParamId, ParamKind, ParamMeta, ParamValue, ScenarioStep, StorageNote, SyntaxRule,
    SyntaxStyle,
};
