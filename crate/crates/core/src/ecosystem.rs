//! Loading a fixture ecosystem: analysis input plus ConfC sources.

use std::path::Path;

use crate::frontend::{compile_unit, FrontendError, SourceUnit};
use crate::ir::{IrProgram, ProgramError};
use crate::taint::{AnalysisInput, InputError};

#[derive(Debug, thiserror::Error)]
pub enum EcosystemError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Compile every component named in `input` from `srcdir` and check the
/// input's cross-references against the result. Warnings are logged.
pub fn compile_ecosystem(
    input: &AnalysisInput,
    srcdir: &Path,
) -> Result<IrProgram, EcosystemError> {
    let mut units = Vec::new();
    for (name, c) in &input.components {
        let path = srcdir.join(&c.source);
        let text = std::fs::read_to_string(&path).map_err(|source| EcosystemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let (_, fs) = compile_unit(&SourceUnit::new(name.clone(), c.source.clone(), text))?;
        units.push((name.clone(), fs));
    }
    let prog = IrProgram::assemble(units)?;
    for w in input.check_program(&prog)? {
        log::warn!("{w}");
    }
    Ok(prog)
}
