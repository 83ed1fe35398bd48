//! Source printer. Output re-parses to the same tree (modulo locations);
//! binary and unary expressions are always parenthesized.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(ast: &Ast) -> String {
    let mut out = String::new();
    for r in &ast.records {
        if r.superblock {
            out.push_str("@superblock\n");
        }
        let _ = writeln!(out, "record {} {{", r.name);
        for f in &r.fields {
            let _ = writeln!(out, "    {}: {},", f.name, f.ty.keyword());
        }
        out.push_str("}\n\n");
    }
    for g in &ast.globals {
        let _ = write!(out, "global {}: {}", g.name, g.ty);
        if let Some(init) = &g.init {
            let _ = write!(out, " = {}", expr(init));
        }
        out.push_str(";\n");
    }
    if !ast.globals.is_empty() {
        out.push('\n');
    }
    for f in &ast.functions {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{}: {}", p.name, p.ty))
            .collect();
        let _ = write!(out, "fn {}({})", f.name, params.join(", "));
        if let Some(r) = &f.ret {
            let _ = write!(out, " -> {r}");
        }
        out.push_str(" {\n");
        stmts(&mut out, &f.body, 1);
        out.push_str("}\n\n");
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn stmts(out: &mut String, body: &[Stmt], level: usize) {
    for s in body {
        indent(out, level);
        match s {
            Stmt::Assign { target, value, .. } => {
                let _ = writeln!(out, "{target} = {};", expr(value));
            }
            Stmt::FieldAssign {
                base, field, value, ..
            } => {
                let _ = writeln!(out, "{base}.{field} = {};", expr(value));
            }
            Stmt::If {
                cond,
                then_body,
                else_body,
                ..
            } => {
                let _ = writeln!(out, "if ({}) {{", expr(cond));
                stmts(out, then_body, level + 1);
                indent(out, level);
                match else_body {
                    Some(b) => {
                        out.push_str("} else {\n");
                        stmts(out, b, level + 1);
                        indent(out, level);
                        out.push_str("}\n");
                    }
                    None => out.push_str("}\n"),
                }
            }
            Stmt::While { cond, body, .. } => {
                let _ = writeln!(out, "while ({}) {{", expr(cond));
                stmts(out, body, level + 1);
                indent(out, level);
                out.push_str("}\n");
            }
            Stmt::Return { value, .. } => match value {
                Some(v) => {
                    let _ = writeln!(out, "return {};", expr(v));
                }
                None => out.push_str("return;\n"),
            },
            Stmt::Expr { expr: e, .. } => {
                let _ = writeln!(out, "{};", expr(e));
            }
        }
    }
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(v) if *v < 0 => format!("(-{})", v.unsigned_abs()),
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Str(s) => format!("{s:?}"),
        ExprKind::Var(v) => v.clone(),
        ExprKind::Field { base, field } => format!("{}.{field}", expr(base)),
        ExprKind::Binary { op, lhs, rhs } => {
            format!("({} {} {})", expr(lhs), op.symbol(), expr(rhs))
        }
        ExprKind::Unary { op, operand } => format!("({}{})", op.symbol(), expr(operand)),
        ExprKind::Call { callee, args } => {
            let a: Vec<String> = args.iter().map(expr).collect();
            format!("{callee}({})", a.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::{BinOp, Loc, UnOp};
    use crate::frontend::{parse_expr, parse_unit, strip_locations, SourceUnit};
    use proptest::prelude::*;

    const BINOPS: [BinOp; 18] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Rem,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::LogicAnd,
        BinOp::LogicOr,
    ];

    fn mk(kind: ExprKind) -> Expr {
        Expr::new(kind, Loc::new("", 0, 0))
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0i64..1_000_000).prop_map(|v| mk(ExprKind::Int(v))),
            "[a-z ]{0,6}".prop_map(|s| mk(ExprKind::Str(s))),
            "x[a-z0-9_]{0,4}".prop_map(|v| mk(ExprKind::Var(v))),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                (inner.clone(), "f[a-z]{0,3}").prop_map(|(b, f)| mk(ExprKind::Field {
                    base: Box::new(b),
                    field: f
                })),
                (0..BINOPS.len(), inner.clone(), inner.clone()).prop_map(|(i, l, r)| mk(
                    ExprKind::Binary {
                        op: BINOPS[i],
                        lhs: Box::new(l),
                        rhs: Box::new(r)
                    }
                )),
                (
                    prop_oneof![Just(UnOp::Not), Just(UnOp::BitNot), Just(UnOp::Neg)],
                    inner.clone()
                )
                    .prop_map(|(op, e)| mk(ExprKind::Unary {
                        op,
                        operand: Box::new(e)
                    })),
                ("g[a-z]{0,3}", prop::collection::vec(inner, 0..3))
                    .prop_map(|(callee, args)| mk(ExprKind::Call { callee, args })),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_expressions_reparse_to_the_same_tree(e in arb_expr()) {
            let text = expr(&e);
            let back = parse_expr("p", &text).unwrap();
            prop_assert_eq!(expr(&back), text);
        }
    }

    #[test]
    fn fixture_sources_round_trip() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/minifs/src");
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let text = std::fs::read_to_string(&path).unwrap();
            let unit = SourceUnit::new("c", path.display().to_string(), text);
            let ast = parse_unit(&unit).unwrap();
            let printed = pretty_print(&ast);
            let again = parse_unit(&SourceUnit::new("c", "printed", printed.clone())).unwrap();
            assert_eq!(
                strip_locations(&again),
                strip_locations(&ast),
                "{}",
                path.display()
            );
            assert_eq!(pretty_print(&again), printed);
        }
    }
}
