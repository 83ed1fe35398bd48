//! Multilevel dependencies derived from taint traces or declarative tables.

mod decl;
mod doc;
mod guard;
mod model;
mod pairwise;
mod sd;

pub use decl::{extract_declarative, load_decl_table, DeclEntry, DeclError, DeclarativeTable};
pub use doc::{
    emit_dependency_doc, load_dependency_doc, DependencyDocument, DocError, DOC_FORMAT, DOC_VERSION,
};
pub use model::{Constraint, DepSource, Dependency, Evidence, Level, Polarity, RelOp, Subkind};
pub use pairwise::{derive_pairwise, Candidate, Classifier, INCOMPLETE_NOTE};
pub use sd::derive_sd;

use crate::ir::{IrProgram, DEFAULT_STEP_BUDGET};
use crate::taint::{analyze, Analysis, AnalysisInput, ParamKind, TaintError, TaintOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractOptions {
    pub taint: TaintOptions,
    /// Keep data_type SDs for flag parameters. A flag's type says nothing a
    /// user could get wrong, so the document leaves them out by default.
    pub flag_data_types: bool,
    pub step_budget: u64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            taint: TaintOptions::default(),
            flag_data_types: false,
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// Taint, link, derive. Dependencies come back in discovery order; pass
/// them to [`emit_dependency_doc`] for the canonical form.
pub fn extract(
    prog: &IrProgram,
    input: &AnalysisInput,
    opts: &ExtractOptions,
) -> Result<(Vec<Dependency>, Analysis), TaintError> {
    let analysis = analyze(prog, input, &opts.taint)?;
    let mut deps = Vec::new();
    for meta in input.params() {
        let trace = &analysis.traces[&meta.id()];
        for d in derive_sd(trace, meta, &analysis, prog, input) {
            let flag_type = matches!(
                d.constraint,
                Constraint::DataType {
                    kind: ParamKind::Flag
                }
            );
            if opts.flag_data_types || !flag_type {
                deps.push(d);
            }
        }
    }
    let classifier = Classifier {
        prog,
        input,
        analysis: &analysis,
        step_budget: opts.step_budget,
    };
    let traces: Vec<_> = analysis.traces.values().collect();
    for (i, ta) in traces.iter().enumerate() {
        for tb in &traces[i + 1..] {
            if let Some(c) = derive_pairwise(ta, tb) {
                if let Some(d) = classifier.classify(&c) {
                    deps.push(d);
                }
            }
        }
    }
    Ok((deps, analysis))
}
