#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use confdep::deps::{emit_dependency_doc, extract, DependencyDocument, ExtractOptions};
use confdep::ecosystem::compile_ecosystem;
use confdep::ir::IrProgram;
use confdep::taint::{load_user_input, AnalysisInput, ParamId};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/minifs")
}

pub struct Fixture {
    pub input: AnalysisInput,
    pub prog: IrProgram,
    pub doc: DependencyDocument,
}

pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let root = fixture_dir();
        let input = load_user_input(&root.join("input.json")).unwrap();
        let prog = compile_ecosystem(&input, &root.join("src")).unwrap();
        let (deps, _) = extract(&prog, &input, &ExtractOptions::default()).unwrap();
        let doc = emit_dependency_doc(&input.ecosystem, deps, "");
        Fixture { input, prog, doc }
    })
}

pub fn mkfs(name: &str) -> ParamId {
    ParamId::new("mini-mkfs", name)
}

/// The ten-parameter subset: every mkfs option plus the two mount options.
pub fn ten_params() -> Vec<ParamId> {
    let f = fixture();
    f.input
        .params()
        .filter(|m| m.component == "mini-mkfs" || m.component == "mini-mount")
        .map(|m| m.id())
        .collect()
}
