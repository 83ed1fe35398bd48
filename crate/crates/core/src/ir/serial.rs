use serde::{Deserialize, Serialize};

use super::{IrProgram, Op};

const FORMAT: &str = "confdep-ir";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IrDocumentError {
    #[error("IR document schema violation: {0}")]
    Schema(String),
    #[error("IR document is inconsistent: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct IrDocument {
    format: String,
    version: u32,
    program: IrProgram,
}

/// Pretty JSON with a trailing newline. Maps are ordered, so output is stable.
pub fn serialize_ir(prog: &IrProgram) -> String {
    let doc = IrDocument {
        format: FORMAT.to_string(),
        version: VERSION,
        program: prog.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("IR is always serializable");
    s.push('\n');
    s
}

pub fn deserialize_ir(text: &str) -> Result<IrProgram, IrDocumentError> {
    let doc: IrDocument =
        serde_json::from_str(text).map_err(|e| IrDocumentError::Schema(e.to_string()))?;
    if doc.format != FORMAT {
        return Err(IrDocumentError::Schema(format!(
            "unexpected format tag {:?}",
            doc.format
        )));
    }
    if doc.version != VERSION {
        return Err(IrDocumentError::Schema(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    validate(&doc.program)?;
    Ok(doc.program)
}

fn validate(prog: &IrProgram) -> Result<(), IrDocumentError> {
    let bad = |m: String| Err(IrDocumentError::Invalid(m));
    for (cname, fs) in &prog.components {
        let mut names = std::collections::BTreeSet::new();
        for f in &fs.functions {
            if !names.insert(&f.name) {
                return bad(format!("{cname}: duplicate function {}", f.name));
            }
            let nblocks = f.blocks.len() as u32;
            for (bi, b) in f.blocks.iter().enumerate() {
                if b.id != bi as u32 {
                    return bad(format!("{cname}::{}: block {bi} has id {}", f.name, b.id));
                }
                for (ii, ins) in b.instrs.iter().enumerate() {
                    if ins.block != b.id || ins.index != ii as u32 {
                        return bad(format!(
                            "{cname}::{}: misplaced instruction at bb{bi}.{ii}",
                            f.name
                        ));
                    }
                    if let Some(n) = ins.op.arity() {
                        if ins.operands.len() != n {
                            return bad(format!(
                                "{cname}::{}: {} expects {n} operands, found {}",
                                f.name,
                                ins.op.mnemonic(),
                                ins.operands.len()
                            ));
                        }
                    }
                    let targets = match ins.op {
                        Op::BrCond {
                            then_block,
                            else_block,
                        } => vec![then_block, else_block],
                        Op::Jump { target } => vec![target],
                        _ => vec![],
                    };
                    if targets.iter().any(|t| *t >= nblocks) {
                        return bad(format!("{cname}::{}: branch to missing block", f.name));
                    }
                    if ins.op.is_terminator() && ii + 1 != b.instrs.len() {
                        return bad(format!("{cname}::{}: terminator inside bb{bi}", f.name));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_round_trips() {
        let p = IrProgram::default();
        let doc = serialize_ir(&p);
        assert!(doc.contains("\"components\": {}"));
        assert_eq!(deserialize_ir(&doc).unwrap(), p);
    }

    #[test]
    fn unknown_opcode_is_named() {
        let doc = r#"{"format":"confdep-ir","version":1,"program":{"components":{"c":{"records":[],"globals":[],
            "functions":[{"name":"main","params":[],"loc":{"file":"f","line":1},"blocks":[{"id":0,"instrs":[
            {"op":{"opcode":"frobnicate"},"operands":[],"loc":{"file":"f","line":1},"block":0,"index":0}]}]}]}},
            "record_types":[]}}"#;
        let err = deserialize_ir(doc).unwrap_err();
        assert!(err.to_string().contains("frobnicate"), "{err}");
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let doc = r#"{"format":"confdep-ir","version":1,"program":{"components":{"c":{"records":[],"globals":[],
            "functions":[{"name":"main","params":[],"loc":{"file":"f","line":1},"blocks":[{"id":0,"instrs":[
            {"op":{"opcode":"copy"},"operands":[],"loc":{"file":"f","line":1},"block":0,"index":0}]}]}]}},
            "record_types":[]}}"#;
        assert!(matches!(
            deserialize_ir(doc),
            Err(IrDocumentError::Invalid(_))
        ));
    }
}
