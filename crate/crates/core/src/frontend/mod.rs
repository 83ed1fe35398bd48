//! ConfC frontend: lexing, parsing, semantic checks and lowering to IR.
//!
//! ConfC is a small imperative language standing in for the C sources of
//! ecosystem components. Its only I/O happens through builtins, and the
//! `param_*` builtins are the configuration reads that seed taint analysis.

pub mod ast;
mod lexer;
mod lower;
mod parser;
mod pretty;
mod sema;

use std::fmt;

pub use ast::{Ast, Loc, SourceUnit};
pub use lower::{lower_unit, lower_unit_counted, LowerError};
pub use parser::{parse_expr, parse_unit};
pub use pretty::pretty_print;
pub use sema::check_semantics;

/// A located message, printed as `file:line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub loc: Loc,
    pub message: String,
}

impl Diagnostic {
    pub fn new(loc: Loc, message: impl Into<String>) -> Self {
        Self {
            loc,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseDiagnostics(pub Vec<Diagnostic>);

impl fmt::Display for ParseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Errors from taking a source unit all the way to IR.
#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("{0}")]
    Parse(#[from] ParseDiagnostics),
    #[error("{}", render(.0))]
    Semantic(Vec<Diagnostic>),
    #[error(transparent)]
    Lower(#[from] LowerError),
}

fn render(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parse, check and lower one unit.
pub fn compile_unit(unit: &SourceUnit) -> Result<(Ast, crate::ir::FunctionSet), FrontendError> {
    let ast = parse_unit(unit)?;
    let diags = check_semantics(&ast);
    if !diags.is_empty() {
        return Err(FrontendError::Semantic(diags));
    }
    let fns = lower_unit(&ast)?;
    Ok((ast, fns))
}

/// Copy of `ast` with every location reset, for structural comparison.
pub fn strip_locations(ast: &Ast) -> Ast {
    use ast::*;
    fn l(_: &Loc) -> Loc {
        Loc::new("", 0, 0)
    }
    fn e(x: &Expr) -> Expr {
        let kind = match &x.kind {
            ExprKind::Field { base, field } => ExprKind::Field {
                base: Box::new(e(base)),
                field: field.clone(),
            },
            ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
                op: *op,
                lhs: Box::new(e(lhs)),
                rhs: Box::new(e(rhs)),
            },
            ExprKind::Unary { op, operand } => ExprKind::Unary {
                op: *op,
                operand: Box::new(e(operand)),
            },
            ExprKind::Call { callee, args } => ExprKind::Call {
                callee: callee.clone(),
                args: args.iter().map(e).collect(),
            },
            k => k.clone(),
        };
        Expr::new(kind, l(&x.loc))
    }
    fn s(st: &Stmt) -> Stmt {
        match st {
            Stmt::Assign { target, value, loc } => Stmt::Assign {
                target: target.clone(),
                value: e(value),
                loc: l(loc),
            },
            Stmt::FieldAssign {
                base,
                field,
                value,
                loc,
            } => Stmt::FieldAssign {
                base: base.clone(),
                field: field.clone(),
                value: e(value),
                loc: l(loc),
            },
            Stmt::If {
                cond,
                then_body,
                else_body,
                loc,
            } => Stmt::If {
                cond: e(cond),
                then_body: then_body.iter().map(s).collect(),
                else_body: else_body.as_ref().map(|b| b.iter().map(s).collect()),
                loc: l(loc),
            },
            Stmt::While { cond, body, loc } => Stmt::While {
                cond: e(cond),
                body: body.iter().map(s).collect(),
                loc: l(loc),
            },
            Stmt::Return { value, loc } => Stmt::Return {
                value: value.as_ref().map(e),
                loc: l(loc),
            },
            Stmt::Expr { expr, loc } => Stmt::Expr {
                expr: e(expr),
                loc: l(loc),
            },
        }
    }
    Ast {
        records: ast
            .records
            .iter()
            .map(|r| RecordDecl {
                name: r.name.clone(),
                fields: r
                    .fields
                    .iter()
                    .map(|f| FieldDecl {
                        name: f.name.clone(),
                        ty: f.ty,
                        loc: l(&f.loc),
                    })
                    .collect(),
                superblock: r.superblock,
                loc: l(&r.loc),
            })
            .collect(),
        globals: ast
            .globals
            .iter()
            .map(|g| GlobalDecl {
                name: g.name.clone(),
                ty: g.ty.clone(),
                init: g.init.as_ref().map(e),
                loc: l(&g.loc),
            })
            .collect(),
        functions: ast
            .functions
            .iter()
            .map(|f| FunctionDecl {
                name: f.name.clone(),
                params: f
                    .params
                    .iter()
                    .map(|p| Param {
                        name: p.name.clone(),
                        ty: p.ty.clone(),
                        loc: l(&p.loc),
                    })
                    .collect(),
                ret: f.ret.clone(),
                body: f.body.iter().map(s).collect(),
                loc: l(&f.loc),
            })
            .collect(),
    }
}
