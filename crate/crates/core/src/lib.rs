//! Static extraction of configuration dependencies across the components of
//! a file-system ecosystem, plus the tooling that consumes them.

pub mod deps;
pub mod ecosystem;
pub mod frontend;
pub mod ir;
pub mod plugins;
pub mod scenario;
pub mod stategen;
pub mod taint;

/// The guide's chapters, so their snippets run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub mod pipeline {}
    #[doc = include_str!("../../../book/src/confc.md")]
    pub mod confc {}
    #[doc = include_str!("../../../book/src/taint.md")]
    pub mod taint {}
    #[doc = include_str!("../../../book/src/dependencies.md")]
    pub mod dependencies {}
    #[doc = include_str!("../../../book/src/states.md")]
    pub mod states {}
    #[doc = include_str!("../../../book/src/plugins.md")]
    pub mod plugins {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../book/src/reference/input.md")]
    pub mod reference_input {}
    #[doc = include_str!("../../../book/src/reference/deps.md")]
    pub mod reference_deps {}
    #[doc = include_str!("../../../book/src/reference/states.md")]
    pub mod reference_states {}
    #[doc = include_str!("../../../book/src/reference/paramdoc.md")]
    pub mod reference_paramdoc {}
    #[doc = include_str!("../../../book/src/reference/testscript.md")]
    pub mod reference_testscript {}
    #[doc = include_str!("../../../book/src/reference/ir.md")]
    pub mod reference_ir {}
    #[doc = include_str!("../../../book/src/reference/image.md")]
    pub mod reference_image {}
    #[doc = include_str!("../../../book/src/reference/decl-table.md")]
    pub mod reference_decl_table {}
}
