//! AST to three-address IR.
//!
//! Each instruction takes the file and line of the statement it came from.
//! `&&` and `||` evaluate both operands (ConfC expressions have no side
//! effects beyond builtin calls), so every condition is a single `br_cond`.

use std::collections::BTreeSet;

use super::ast::*;
use crate::ir::{
    Block, FieldType, Function, FunctionSet, GlobalType, GlobalVar, Instruction, Op, Operand,
    RecordType, SinkKind, SrcLoc,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LowerError {
    #[error("{loc}: internal error: cannot lower {what}")]
    Unlowered { loc: Loc, what: String },
}

pub fn lower_unit(ast: &Ast) -> Result<FunctionSet, LowerError> {
    lower_unit_counted(ast).map(|(fs, _)| fs)
}

/// Lowers and also reports how many AST statements were visited.
pub fn lower_unit_counted(ast: &Ast) -> Result<(FunctionSet, usize), LowerError> {
    let records = ast
        .records
        .iter()
        .map(|r| RecordType {
            name: r.name.clone(),
            fields: r
                .fields
                .iter()
                .map(|f| FieldType {
                    name: f.name.clone(),
                    ty: f.ty,
                })
                .collect(),
        })
        .collect();
    let mut globals = Vec::new();
    for g in &ast.globals {
        let init = match g.init.as_ref().map(|e| &e.kind) {
            None => None,
            Some(ExprKind::Int(v)) => Some(Operand::Int(*v)),
            Some(ExprKind::Str(s)) => Some(Operand::Str(s.clone())),
            Some(_) => {
                return Err(LowerError::Unlowered {
                    loc: g.loc.clone(),
                    what: "non-literal global initializer".into(),
                })
            }
        };
        globals.push(GlobalVar {
            name: g.name.clone(),
            ty: match &g.ty {
                TypeName::Scalar(s) => GlobalType::Scalar(*s),
                TypeName::Record(r) => GlobalType::Record(r.clone()),
            },
            init,
        });
    }
    let global_names: BTreeSet<String> = ast.globals.iter().map(|g| g.name.clone()).collect();
    let mut functions = Vec::new();
    let mut count = 0;
    for f in &ast.functions {
        let mut lw = FnLowerer {
            globals: &global_names,
            blocks: vec![Vec::new()],
            current: 0,
            next_temp: 0,
            stmt_count: 0,
        };
        lw.stmts(&f.body)?;
        if !lw.terminated() {
            let loc = f
                .body
                .last()
                .map(|s| s.loc().clone())
                .unwrap_or_else(|| f.loc.clone());
            lw.emit(Op::Ret, vec![], None, &loc);
        }
        count += lw.stmt_count;
        functions.push(Function {
            name: f.name.clone(),
            params: f.params.iter().map(|p| p.name.clone()).collect(),
            blocks: lw.finish(),
            loc: src(&f.loc),
        });
    }
    Ok((
        FunctionSet {
            records,
            superblock: ast.superblock_record().map(|r| r.name.clone()),
            globals,
            functions,
        },
        count,
    ))
}

fn src(loc: &Loc) -> SrcLoc {
    SrcLoc {
        file: loc.file.clone(),
        line: loc.line,
    }
}

type PendingInstr = (Op, Vec<Operand>, Option<Operand>, SrcLoc);

struct FnLowerer<'a> {
    globals: &'a BTreeSet<String>,
    blocks: Vec<Vec<PendingInstr>>,
    current: u32,
    next_temp: u32,
    stmt_count: usize,
}

impl<'a> FnLowerer<'a> {
    fn finish(self) -> Vec<Block> {
        self.blocks
            .into_iter()
            .enumerate()
            .map(|(bi, instrs)| Block {
                id: bi as u32,
                instrs: instrs
                    .into_iter()
                    .enumerate()
                    .map(|(ii, (op, operands, result, loc))| Instruction {
                        op,
                        operands,
                        result,
                        loc,
                        block: bi as u32,
                        index: ii as u32,
                    })
                    .collect(),
            })
            .collect()
    }

    fn new_block(&mut self) -> u32 {
        self.blocks.push(Vec::new());
        (self.blocks.len() - 1) as u32
    }

    fn terminated(&self) -> bool {
        self.blocks[self.current as usize]
            .last()
            .is_some_and(|(op, ..)| op.is_terminator())
    }

    fn temp(&mut self) -> Operand {
        let t = Operand::Temp(self.next_temp);
        self.next_temp += 1;
        t
    }

    fn emit(&mut self, op: Op, operands: Vec<Operand>, result: Option<Operand>, loc: &Loc) {
        self.blocks[self.current as usize].push((op, operands, result, src(loc)));
    }

    fn var(&self, name: &str) -> Operand {
        if self.globals.contains(name) {
            Operand::Global(name.to_string())
        } else {
            Operand::Var(name.to_string())
        }
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<(), LowerError> {
        for s in stmts {
            if self.terminated() {
                // Code after an error or return lands in an unreachable block.
                self.current = self.new_block();
            }
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LowerError> {
        self.stmt_count += 1;
        match s {
            Stmt::Assign { target, value, loc } => {
                let dest = self.var(target);
                match &value.kind {
                    ExprKind::Int(v) => {
                        self.emit(Op::Const, vec![Operand::Int(*v)], Some(dest), loc)
                    }
                    ExprKind::Str(v) => {
                        self.emit(Op::Const, vec![Operand::Str(v.clone())], Some(dest), loc)
                    }
                    _ => {
                        let v = self.expr(value, loc)?;
                        self.emit(Op::Copy, vec![v], Some(dest), loc);
                    }
                }
            }
            Stmt::FieldAssign {
                base,
                field,
                value,
                loc,
            } => {
                let v = self.expr(value, loc)?;
                let b = self.var(base);
                self.emit(
                    Op::StoreField {
                        field: field.clone(),
                    },
                    vec![b, v],
                    None,
                    loc,
                );
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                loc,
            } => {
                let c = self.expr(cond, loc)?;
                let cond_block = self.current;
                let then_b = self.new_block();
                let else_b = else_body.as_ref().map(|_| self.new_block());
                let join = self.new_block();
                self.blocks[cond_block as usize].push((
                    Op::BrCond {
                        then_block: then_b,
                        else_block: else_b.unwrap_or(join),
                    },
                    vec![c],
                    None,
                    src(loc),
                ));
                self.current = then_b;
                self.stmts(then_body)?;
                if !self.terminated() {
                    self.emit(Op::Jump { target: join }, vec![], None, loc);
                }
                if let (Some(eb), Some(body)) = (else_b, else_body) {
                    self.current = eb;
                    self.stmts(body)?;
                    if !self.terminated() {
                        self.emit(Op::Jump { target: join }, vec![], None, loc);
                    }
                }
                self.current = join;
            }
            Stmt::While { cond, body, loc } => {
                let header = self.new_block();
                self.emit(Op::Jump { target: header }, vec![], None, loc);
                self.current = header;
                let c = self.expr(cond, loc)?;
                let body_b = self.new_block();
                let exit = self.new_block();
                self.emit(
                    Op::BrCond {
                        then_block: body_b,
                        else_block: exit,
                    },
                    vec![c],
                    None,
                    loc,
                );
                self.current = body_b;
                self.stmts(body)?;
                if !self.terminated() {
                    self.emit(Op::Jump { target: header }, vec![], None, loc);
                }
                self.current = exit;
            }
            Stmt::Return { value, loc } => {
                let ops = match value {
                    Some(v) => vec![self.expr(v, loc)?],
                    None => vec![],
                };
                self.emit(Op::Ret, ops, None, loc);
            }
            Stmt::Expr { expr, loc } => {
                self.expr(expr, loc)?;
            }
        }
        Ok(())
    }

    /// Lowers an expression; instructions take `stmt_loc`.
    fn expr(&mut self, e: &Expr, stmt_loc: &Loc) -> Result<Operand, LowerError> {
        Ok(match &e.kind {
            ExprKind::Int(v) => Operand::Int(*v),
            ExprKind::Str(s) => Operand::Str(s.clone()),
            ExprKind::Var(v) => self.var(v),
            ExprKind::Field { base, field } => {
                let b = self.expr(base, stmt_loc)?;
                let t = self.temp();
                self.emit(
                    Op::LoadField {
                        field: field.clone(),
                    },
                    vec![b],
                    Some(t.clone()),
                    stmt_loc,
                );
                t
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.expr(lhs, stmt_loc)?;
                let b = self.expr(rhs, stmt_loc)?;
                let t = self.temp();
                self.emit(Op::Binop { op: *op }, vec![a, b], Some(t.clone()), stmt_loc);
                t
            }
            ExprKind::Unary { op, operand } => {
                let a = self.expr(operand, stmt_loc)?;
                let t = self.temp();
                self.emit(Op::Unop { op: *op }, vec![a], Some(t.clone()), stmt_loc);
                t
            }
            ExprKind::Call { callee, args } => {
                let mut ops = Vec::with_capacity(args.len());
                for a in args {
                    ops.push(self.expr(a, stmt_loc)?);
                }
                match callee.as_str() {
                    "error" => {
                        self.emit(
                            Op::ErrorSink {
                                sink: SinkKind::Error,
                            },
                            ops,
                            None,
                            stmt_loc,
                        );
                        Operand::Int(0)
                    }
                    "exit" => {
                        match ops.first().and_then(Operand::as_int) {
                            Some(code) if code != 0 => self.emit(
                                Op::ErrorSink {
                                    sink: SinkKind::Exit(code),
                                },
                                ops,
                                None,
                                stmt_loc,
                            ),
                            _ => self.emit(
                                Op::Builtin {
                                    name: "exit".into(),
                                },
                                ops,
                                None,
                                stmt_loc,
                            ),
                        }
                        Operand::Int(0)
                    }
                    "print" | "warn" | "store_image" => {
                        self.emit(
                            Op::Builtin {
                                name: callee.clone(),
                            },
                            ops,
                            None,
                            stmt_loc,
                        );
                        Operand::Int(0)
                    }
                    name if is_builtin(name) => {
                        let t = self.temp();
                        self.emit(
                            Op::Builtin {
                                name: name.to_string(),
                            },
                            ops,
                            Some(t.clone()),
                            stmt_loc,
                        );
                        t
                    }
                    _ => {
                        let t = self.temp();
                        self.emit(
                            Op::Call {
                                callee: callee.clone(),
                            },
                            ops,
                            Some(t.clone()),
                            stmt_loc,
                        );
                        t
                    }
                }
            }
        })
    }
}
