//! Recognising guards: branches whose condition leads to an error sink or
//! a superblock store.

use std::collections::BTreeSet;

use crate::ir::{BinOp, Function, InstrRef, Instruction, Op, Operand, UnOp};
use crate::taint::{Analysis, Labels, Site};

/// A comparison feeding a branch, after folding `!`.
#[derive(Debug, Clone)]
pub struct Comparison<'p> {
    pub op: BinOp,
    pub lhs: Operand,
    pub rhs: Operand,
    /// The instruction computing the comparison.
    pub def: &'p Instruction,
}

pub fn negate_cmp(op: BinOp) -> BinOp {
    match op {
        BinOp::Eq => BinOp::Ne,
        BinOp::Ne => BinOp::Eq,
        BinOp::Lt => BinOp::Ge,
        BinOp::Le => BinOp::Gt,
        BinOp::Gt => BinOp::Le,
        BinOp::Ge => BinOp::Lt,
        other => other,
    }
}

/// Mirror a comparison so its operands can be swapped.
pub fn swap_cmp(op: BinOp) -> BinOp {
    match op {
        BinOp::Lt => BinOp::Gt,
        BinOp::Le => BinOp::Ge,
        BinOp::Gt => BinOp::Lt,
        BinOp::Ge => BinOp::Le,
        other => other,
    }
}

pub fn temp_def<'p>(f: &'p Function, o: &Operand) -> Option<&'p Instruction> {
    match o {
        Operand::Temp(t) => f.temp_def(*t),
        _ => None,
    }
}

/// Decode the comparison behind a branch operand. `negated` folds any
/// number of `!` wrappers.
pub fn comparison<'p>(f: &'p Function, cond: &Operand) -> Option<Comparison<'p>> {
    let mut negated = false;
    let mut def = temp_def(f, cond)?;
    loop {
        match &def.op {
            Op::Unop { op: UnOp::Not } => {
                negated = !negated;
                def = temp_def(f, &def.operands[0])?;
            }
            Op::Binop { op } if op.is_comparison() => {
                let op = if negated { negate_cmp(*op) } else { *op };
                return Some(Comparison {
                    op,
                    lhs: def.operands[0].clone(),
                    rhs: def.operands[1].clone(),
                    def,
                });
            }
            _ => return None,
        }
    }
}

/// Error sink reached from `block` through straight-line code and
/// unconditional jumps.
pub fn sink_from<'p>(
    f: &'p Function,
    block: u32,
    extra_sinks: &[String],
) -> Option<&'p Instruction> {
    let mut seen = BTreeSet::new();
    let mut b = block;
    while seen.insert(b) {
        for ins in &f.blocks.get(b as usize)?.instrs {
            match &ins.op {
                Op::ErrorSink { .. } => return Some(ins),
                Op::Call { callee } if extra_sinks.contains(callee) => return Some(ins),
                Op::Jump { target } => {
                    b = *target;
                    break;
                }
                Op::BrCond { .. } | Op::Ret => return None,
                Op::Builtin { name } if name == "exit" => return None,
                _ => {}
            }
        }
    }
    None
}

/// Superblock store reached from `block` the same way.
pub fn store_from<'p>(f: &'p Function, block: u32, sb: &str) -> Option<&'p Instruction> {
    let mut seen = BTreeSet::new();
    let mut b = block;
    while seen.insert(b) {
        for ins in &f.blocks.get(b as usize)?.instrs {
            match &ins.op {
                Op::StoreField { .. } if matches!(&ins.operands[0], Operand::Var(n) | Operand::Global(n) if n == sb) => {
                    return Some(ins)
                }
                Op::Jump { target } => {
                    b = *target;
                    break;
                }
                op if op.is_terminator() => return None,
                _ => {}
            }
        }
    }
    None
}

/// Concatenated string operands of a sink, i.e. its diagnostic text.
pub fn sink_message(ins: &Instruction) -> Option<String> {
    let parts: Vec<&str> = ins.operands.iter().filter_map(Operand::as_str).collect();
    (!parts.is_empty()).then(|| parts.join(" "))
}

pub fn instr_ref(component: &str, f: &Function, ins: &Instruction) -> InstrRef {
    InstrRef {
        component: component.to_string(),
        function: f.name.clone(),
        block: ins.block,
        index: ins.index,
    }
}

/// Labels of operand `i` of `ins` as seen under `ctx`.
pub fn labels_at(
    analysis: &Analysis,
    ctx: &Site,
    component: &str,
    f: &Function,
    ins: &Instruction,
    i: usize,
) -> Labels {
    let site = Site {
        context: ctx.context.clone(),
        instr: instr_ref(component, f, ins),
    };
    analysis.operand_labels(&site, i)
}

/// Whether an operand is a plain value rather than a computed one.
pub fn is_plain(f: &Function, o: &Operand) -> bool {
    match o {
        Operand::Var(_) | Operand::Global(_) => true,
        Operand::Temp(_) => !matches!(
            temp_def(f, o).map(|d| &d.op),
            Some(Op::Binop { .. } | Op::Unop { .. })
        ),
        Operand::Int(_) | Operand::Str(_) => false,
    }
}
