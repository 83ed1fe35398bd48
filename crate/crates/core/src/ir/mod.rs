//! Three-address IR shared by every analysis, its JSON document form, and
//! a deterministic interpreter.

mod image;
mod interp;
mod serial;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::frontend::ast::{BinOp, ScalarType, UnOp};
pub use image::{decode_image, diff_images, encode_image, ImageError, RecordValue};
pub use interp::{execute, ExecConfig, ExecutionResult, Outcome, Value, DEFAULT_STEP_BUDGET};
pub use serial::{deserialize_ir, serialize_ir, IrDocumentError};

/// Source position carried by each instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SrcLoc {
    pub file: String,
    pub line: u32,
}

impl fmt::Display for SrcLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    /// Virtual register, assigned exactly once.
    Temp(u32),
    /// Function-local variable or parameter.
    Var(String),
    Global(String),
    Int(i64),
    Str(String),
}

impl Operand {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Operand::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Operand::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Operand::Int(_) | Operand::Str(_))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Temp(t) => write!(f, "%{t}"),
            Operand::Var(v) => f.write_str(v),
            Operand::Global(g) => write!(f, "@{g}"),
            Operand::Int(v) => write!(f, "{v}"),
            Operand::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    /// `error(msg...)`: prints to stderr and exits 1.
    Error,
    /// `exit(c)` with a nonzero constant.
    Exit(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "opcode", rename_all = "snake_case")]
pub enum Op {
    Const,
    Copy,
    Binop { op: BinOp },
    Unop { op: UnOp },
    LoadField { field: String },
    StoreField { field: String },
    Call { callee: String },
    Builtin { name: String },
    BrCond { then_block: u32, else_block: u32 },
    Jump { target: u32 },
    Ret,
    ErrorSink { sink: SinkKind },
}

impl Op {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Op::Const => "const",
            Op::Copy => "copy",
            Op::Binop { .. } => "binop",
            Op::Unop { .. } => "unop",
            Op::LoadField { .. } => "load_field",
            Op::StoreField { .. } => "store_field",
            Op::Call { .. } => "call",
            Op::Builtin { .. } => "builtin",
            Op::BrCond { .. } => "br_cond",
            Op::Jump { .. } => "jump",
            Op::Ret => "ret",
            Op::ErrorSink { .. } => "error_sink",
        }
    }

    /// Whether control leaves the block after this instruction.
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Op::BrCond { .. } | Op::Jump { .. } | Op::Ret | Op::ErrorSink { .. }
        ) || matches!(self, Op::Builtin { name } if name == "exit")
    }

    /// Expected operand count; `None` means variadic.
    pub fn arity(&self) -> Option<usize> {
        match self {
            Op::Const | Op::Copy | Op::Unop { .. } | Op::LoadField { .. } | Op::BrCond { .. } => {
                Some(1)
            }
            Op::Binop { .. } | Op::StoreField { .. } => Some(2),
            Op::Jump { .. } => Some(0),
            Op::Ret => None,
            Op::Call { .. } | Op::Builtin { .. } | Op::ErrorSink { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Op,
    pub operands: Vec<Operand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Operand>,
    pub loc: SrcLoc,
    pub block: u32,
    pub index: u32,
}

impl Instruction {
    pub fn is_error_sink(&self) -> bool {
        matches!(self.op, Op::ErrorSink { .. })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = &self.result {
            write!(f, "{r} = ")?;
        }
        write!(f, "{}", self.op.mnemonic())?;
        match &self.op {
            Op::Binop { op } => write!(f, " {}", op.symbol())?,
            Op::Unop { op } => write!(f, " {}", op.symbol())?,
            Op::LoadField { field } | Op::StoreField { field } => write!(f, " .{field}")?,
            Op::Call { callee } => write!(f, " {callee}")?,
            Op::Builtin { name } => write!(f, " {name}")?,
            Op::BrCond {
                then_block,
                else_block,
            } => write!(f, " bb{then_block} bb{else_block}")?,
            Op::Jump { target } => write!(f, " bb{target}")?,
            _ => {}
        }
        for o in &self.operands {
            write!(f, " {o}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: u32,
    pub instrs: Vec<Instruction>,
}

impl Block {
    pub fn successors(&self) -> Vec<u32> {
        match self.instrs.last().map(|i| &i.op) {
            Some(Op::BrCond {
                then_block,
                else_block,
            }) => vec![*then_block, *else_block],
            Some(Op::Jump { target }) => vec![*target],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub params: Vec<String>,
    pub blocks: Vec<Block>,
    pub loc: SrcLoc,
}

impl Function {
    pub fn instr(&self, block: u32, index: u32) -> Option<&Instruction> {
        self.blocks.get(block as usize)?.instrs.get(index as usize)
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.blocks.iter().flat_map(|b| b.instrs.iter())
    }

    /// Instruction defining a temp. Temps are single-assignment.
    pub fn temp_def(&self, temp: u32) -> Option<&Instruction> {
        self.instructions()
            .find(|i| i.result == Some(Operand::Temp(temp)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldType {
    pub name: String,
    pub ty: ScalarType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordType {
    pub name: String,
    pub fields: Vec<FieldType>,
}

impl RecordType {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalType {
    Scalar(ScalarType),
    Record(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalVar {
    pub name: String,
    pub ty: GlobalType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Operand>,
}

/// Lowered form of one component.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FunctionSet {
    pub records: Vec<RecordType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superblock: Option<String>,
    pub globals: Vec<GlobalVar>,
    pub functions: Vec<Function>,
}

impl FunctionSet {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn is_global(&self, name: &str) -> bool {
        self.globals.iter().any(|g| g.name == name)
    }
}

/// A whole ecosystem: components sharing one superblock layout.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IrProgram {
    pub components: BTreeMap<String, FunctionSet>,
    pub record_types: Vec<RecordType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_schema: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("component {component} declares record {record} differently from another component")]
    RecordMismatch { component: String, record: String },
    #[error("components disagree on the superblock record ({0} vs {1})")]
    SuperblockMismatch(String, String),
    #[error("duplicate component {0}")]
    DuplicateComponent(String),
}

impl IrProgram {
    /// Merge lowered components, checking that shared record layouts agree.
    pub fn assemble(units: Vec<(String, FunctionSet)>) -> Result<Self, ProgramError> {
        let mut prog = IrProgram::default();
        for (name, fs) in units {
            for rec in &fs.records {
                match prog.record_types.iter().find(|r| r.name == rec.name) {
                    Some(existing) if existing != rec => {
                        return Err(ProgramError::RecordMismatch {
                            component: name,
                            record: rec.name.clone(),
                        })
                    }
                    Some(_) => {}
                    None => prog.record_types.push(rec.clone()),
                }
            }
            if let Some(sb) = &fs.superblock {
                match &prog.image_schema {
                    Some(existing) if existing != sb => {
                        return Err(ProgramError::SuperblockMismatch(
                            existing.clone(),
                            sb.clone(),
                        ))
                    }
                    _ => prog.image_schema = Some(sb.clone()),
                }
            }
            if prog.components.insert(name.clone(), fs).is_some() {
                return Err(ProgramError::DuplicateComponent(name));
            }
        }
        Ok(prog)
    }

    pub fn record(&self, name: &str) -> Option<&RecordType> {
        self.record_types.iter().find(|r| r.name == name)
    }

    pub fn superblock_record(&self) -> Option<&RecordType> {
        self.image_schema.as_deref().and_then(|n| self.record(n))
    }
}

/// Identifies one instruction inside a program.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstrRef {
    pub component: String,
    pub function: String,
    pub block: u32,
    pub index: u32,
}

impl InstrRef {
    pub fn resolve<'p>(&self, prog: &'p IrProgram) -> Option<&'p Instruction> {
        prog.components
            .get(&self.component)?
            .function(&self.function)?
            .instr(self.block, self.index)
    }
}

impl fmt::Display for InstrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}::{}#bb{}.{}",
            self.component, self.function, self.block, self.index
        )
    }
}
