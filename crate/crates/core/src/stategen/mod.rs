//! Configuration states guided by extracted dependencies.

mod naive;
mod render;
mod state;
mod tree;
mod validate;
mod violating;

pub use naive::{naive_baseline, naive_tokens, NaiveReport, NAIVE_SLOTS};
pub use render::{
    parse_argv, render_commands, render_component, Command, CommandPlan, RenderError, IMG,
};
pub use state::{
    assignment_from_pairs, canonicalize, Assignment, CanonicalKey, ConfigState, Mark, Provenance,
};
pub use tree::{build_tree, Edge, Policy, StateTree, TreeOptions, DEFAULT_DEPTH};
pub use validate::{effective, validate_state, violates, Validity};
