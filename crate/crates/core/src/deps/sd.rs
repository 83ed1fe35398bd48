//! Self dependencies: data types and guarded value ranges.

use std::collections::BTreeSet;

use super::guard::{
    comparison, instr_ref, is_plain, labels_at, sink_from, sink_message, swap_cmp, temp_def,
};
use super::model::{Constraint, DepSource, Dependency, Evidence};
use crate::ir::{BinOp, Function, IrProgram, Op, Operand};
use crate::taint::{Analysis, AnalysisInput, ParamKind, ParamMeta, Site, TaintTrace};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
struct Range {
    min: Option<i64>,
    max: Option<i64>,
    excluded: BTreeSet<i64>,
    power_of_two: bool,
}

impl Range {
    /// Narrow by the complement of an erroring `v op k`.
    fn forbid(&mut self, op: BinOp, k: i64) -> bool {
        let lo = |r: &mut Range, v: i64| r.min = Some(r.min.map_or(v, |m| m.max(v)));
        let hi = |r: &mut Range, v: i64| r.max = Some(r.max.map_or(v, |m| m.min(v)));
        match op {
            BinOp::Lt => lo(self, k),
            BinOp::Le => lo(self, k.saturating_add(1)),
            BinOp::Gt => hi(self, k),
            BinOp::Ge => hi(self, k.saturating_sub(1)),
            BinOp::Eq => {
                self.excluded.insert(k);
            }
            BinOp::Ne => {
                lo(self, k);
                hi(self, k);
            }
            _ => return false,
        }
        true
    }
}

fn evidence(prog: &IrProgram, site: &Site) -> Evidence {
    let loc = site
        .instr
        .resolve(prog)
        .map(|i| i.loc.to_string())
        .unwrap_or_default();
    Evidence {
        context: site.context.clone(),
        instr: site.instr.clone(),
        loc,
    }
}

/// `(x & (x - 1))`, the power-of-two test.
fn is_pow2_test(f: &Function, o: &Operand) -> bool {
    let Some(and) = temp_def(f, o) else {
        return false;
    };
    if !matches!(and.op, Op::Binop { op: BinOp::And }) {
        return false;
    }
    let (a, b) = (&and.operands[0], &and.operands[1]);
    let minus_one = |x: &Operand, y: &Operand| {
        temp_def(f, y).is_some_and(|d| {
            matches!(d.op, Op::Binop { op: BinOp::Sub })
                && d.operands[0] == *x
                && d.operands[1] == Operand::Int(1)
        })
    };
    minus_one(a, b) || minus_one(b, a)
}

/// Data type from the `param_*` builtin that reads the parameter.
fn builtin_kind(prog: &IrProgram, trace: &TaintTrace) -> Option<ParamKind> {
    trace
        .sites
        .iter()
        .find_map(|s| match &s.instr.resolve(prog)?.op {
            Op::Builtin { name } => match name.as_str() {
                "param_int" => Some(ParamKind::Int),
                "param_flag" => Some(ParamKind::Flag),
                "param_str" => Some(ParamKind::String),
                _ => None,
            },
            _ => None,
        })
}

/// One data_type SD, plus one value_range SD merging every recognised guard.
pub fn derive_sd(
    trace: &TaintTrace,
    meta: &ParamMeta,
    analysis: &Analysis,
    prog: &IrProgram,
    input: &AnalysisInput,
) -> Vec<Dependency> {
    let p = &trace.param;
    let mut out = Vec::new();

    let mut dt = Dependency::new(
        vec![p.clone()],
        Constraint::DataType {
            kind: builtin_kind(prog, trace).unwrap_or(meta.kind),
        },
        DepSource::ExtractedTaint,
    );
    if let Some(src) = trace
        .sites
        .iter()
        .find(|s| matches!(s.instr.resolve(prog).map(|i| &i.op), Some(Op::Builtin { name }) if name.starts_with("param_")))
    {
        dt.evidence.push(evidence(prog, src));
    }
    out.push(dt);

    let mut range = Range::default();
    let mut ev = Vec::new();
    let mut message = None;
    for b in &trace.branch_sites {
        let Some(fs) = prog.components.get(&b.instr.component) else {
            continue;
        };
        let Some(f) = fs.function(&b.instr.function) else {
            continue;
        };
        let Some(br) = f.instr(b.instr.block, b.instr.index) else {
            continue;
        };
        let Op::BrCond {
            then_block,
            else_block,
        } = br.op
        else {
            continue;
        };
        let sinks = input
            .component(&b.instr.component)
            .map(|c| c.error_sinks.clone())
            .unwrap_or_default();
        let (sink, error_when_true) = match (
            sink_from(f, then_block, &sinks),
            sink_from(f, else_block, &sinks),
        ) {
            (Some(s), _) => (s, true),
            (None, Some(s)) => (s, false),
            (None, None) => continue,
        };
        let Some(cmp) = comparison(f, &br.operands[0]) else {
            log::debug!("{}: branch on {p} is not a comparison", b.instr);
            continue;
        };
        let op = if error_when_true {
            cmp.op
        } else {
            super::guard::negate_cmp(cmp.op)
        };
        let recognised = match (&cmp.lhs, &cmp.rhs) {
            (x, Operand::Int(0)) | (Operand::Int(0), x)
                if op == BinOp::Ne && is_pow2_test(f, x) =>
            {
                range.power_of_two = true;
                true
            }
            (x, Operand::Int(k)) | (Operand::Int(k), x) => {
                let op = if matches!(cmp.rhs, Operand::Int(_)) {
                    op
                } else {
                    swap_cmp(op)
                };
                let idx = if matches!(cmp.rhs, Operand::Int(_)) {
                    0
                } else {
                    1
                };
                let labels = labels_at(analysis, b, &b.instr.component, f, cmp.def, idx);
                is_plain(f, x) && labels.len() == 1 && labels.contains(p) && range.forbid(op, *k)
            }
            _ => false,
        };
        if recognised {
            ev.push(evidence(prog, b));
            let def = Site {
                context: b.context.clone(),
                instr: instr_ref(&b.instr.component, f, cmp.def),
            };
            ev.push(evidence(prog, &def));
            if message.is_none() {
                message = sink_message(sink);
            }
        } else {
            log::debug!("{}: guard on {p} not recognised", b.instr);
        }
    }
    if !ev.is_empty() {
        ev.sort();
        ev.dedup();
        let mut d = Dependency::new(
            vec![p.clone()],
            Constraint::ValueRange {
                min: range.min,
                max: range.max,
                excluded: range.excluded.into_iter().collect(),
                power_of_two: range.power_of_two,
                choices: Vec::new(),
            },
            DepSource::ExtractedTaint,
        );
        d.evidence = ev;
        d.message = message;
        out.push(d);
    }
    out
}
