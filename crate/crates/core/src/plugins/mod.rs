//! Consumers of the dependency document: a documentation checker, a
//! misconfiguration-handling harness and a regression-script rewriter.

mod handling;
mod rewrite;
mod speccheck;
mod testscript;
mod text;

pub use handling::{
    classify_reaction, run_handling_campaign, FieldMismatch, Reaction, ReactionEvidence,
    ReactionReport,
};
pub use rewrite::{appendable, existing_assignment, rewrite_tests, RewriteMode, RewrittenScript};
pub use speccheck::{
    check_spec, load_doc_corpus, parse_paramdoc, DocCorpus, DocError, Keywords, MismatchKind,
    ParamBlock, SpecMismatch,
};
pub use testscript::{
    parse_script, run_script, typed_value, Invocation, ScriptError, ScriptRun, Step, TestScript,
};
pub use text::{has_keyword, mentions, sentences};
