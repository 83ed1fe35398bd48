//! Name and type resolution for a parsed unit.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::Diagnostic;

/// Static type of an expression as far as the checker can tell.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Ty {
    Scalar,
    Record(String),
    Unknown,
}

fn builtin_arity(name: &str) -> Option<(usize, Option<usize>)> {
    Some(match name {
        "param_int" | "param_flag" | "param_str" => (1, Some(1)),
        "error" | "warn" | "print" => (1, None),
        "exit" | "load_image" | "strint" => (1, Some(1)),
        "store_image" | "streq" => (2, Some(2)),
        _ => return None,
    })
}

pub fn check_semantics(ast: &Ast) -> Vec<Diagnostic> {
    let mut cx = Checker {
        ast,
        diags: Vec::new(),
        globals: BTreeMap::new(),
    };
    cx.check();
    cx.diags
}

struct Checker<'a> {
    ast: &'a Ast,
    diags: Vec<Diagnostic>,
    globals: BTreeMap<String, Ty>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, loc: &Loc, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(loc.clone(), msg));
    }

    fn ty_of_name(&self, t: &TypeName) -> Ty {
        match t {
            TypeName::Scalar(_) => Ty::Scalar,
            TypeName::Record(r) => Ty::Record(r.clone()),
        }
    }

    fn check_type_exists(&mut self, t: &TypeName, loc: &Loc) {
        if let TypeName::Record(r) = t {
            if self.ast.record(r).is_none() {
                self.err(loc, format!("unknown type {r}"));
            }
        }
    }

    fn check(&mut self) {
        let mut seen = BTreeSet::new();
        let mut superblocks = 0;
        for rec in &self.ast.records {
            if !seen.insert(rec.name.clone()) {
                self.err(&rec.loc, format!("duplicate record {}", rec.name));
            }
            if rec.superblock {
                superblocks += 1;
                if superblocks > 1 {
                    self.err(&rec.loc, "more than one record annotated @superblock");
                }
            }
            let mut fields = BTreeSet::new();
            for f in &rec.fields {
                if !fields.insert(f.name.as_str()) {
                    self.err(
                        &f.loc,
                        format!("duplicate field {} in record {}", f.name, rec.name),
                    );
                }
            }
        }
        for g in &self.ast.globals {
            self.check_type_exists(&g.ty, &g.loc);
            if self
                .globals
                .insert(g.name.clone(), self.ty_of_name(&g.ty))
                .is_some()
            {
                self.err(&g.loc, format!("duplicate global {}", g.name));
            }
            if let Some(init) = &g.init {
                if !matches!(init.kind, ExprKind::Int(_) | ExprKind::Str(_)) {
                    self.err(&init.loc, "global initializer must be a literal");
                }
            }
        }
        let mut fnames = BTreeSet::new();
        for f in &self.ast.functions {
            if is_builtin(&f.name) {
                self.err(&f.loc, format!("function {} shadows a builtin", f.name));
            }
            if !fnames.insert(f.name.clone()) {
                self.err(&f.loc, format!("duplicate function {}", f.name));
            }
        }
        for f in &self.ast.functions {
            self.check_function(f);
        }
    }

    fn check_function(&mut self, f: &FunctionDecl) {
        let mut locals: BTreeMap<String, Ty> = BTreeMap::new();
        for p in &f.params {
            self.check_type_exists(&p.ty, &p.loc);
            if locals
                .insert(p.name.clone(), self.ty_of_name(&p.ty))
                .is_some()
            {
                self.err(&p.loc, format!("duplicate parameter {}", p.name));
            }
        }
        if let Some(r) = &f.ret {
            self.check_type_exists(r, &f.loc);
        }
        // Locals are introduced by assignment anywhere in the body; their type
        // comes from the first assignment whose right-hand side has a known type.
        let mut assigned = Vec::new();
        collect_assignments(&f.body, &mut assigned);
        for _ in 0..2 {
            for (name, value) in &assigned {
                if self.globals.contains_key(name) {
                    continue;
                }
                let ty = self.expr_ty(value, &locals);
                match locals.get(name) {
                    Some(Ty::Unknown) | None => {
                        locals.insert(name.clone(), ty);
                    }
                    _ => {}
                }
            }
        }
        self.check_stmts(&f.body, &locals);
    }

    fn lookup(&self, name: &str, locals: &BTreeMap<String, Ty>) -> Option<Ty> {
        locals.get(name).or_else(|| self.globals.get(name)).cloned()
    }

    fn expr_ty(&self, e: &Expr, locals: &BTreeMap<String, Ty>) -> Ty {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Str(_) => Ty::Scalar,
            ExprKind::Var(v) => self.lookup(v, locals).unwrap_or(Ty::Unknown),
            ExprKind::Field { .. } | ExprKind::Binary { .. } | ExprKind::Unary { .. } => Ty::Scalar,
            ExprKind::Call { callee, .. } => {
                if callee == "load_image" {
                    match self.ast.superblock_record() {
                        Some(r) => Ty::Record(r.name.clone()),
                        None => Ty::Unknown,
                    }
                } else if is_builtin(callee) {
                    Ty::Scalar
                } else {
                    match self.ast.function(callee).and_then(|f| f.ret.as_ref()) {
                        Some(t) => self.ty_of_name(t),
                        None => Ty::Scalar,
                    }
                }
            }
        }
    }

    fn check_stmts(&mut self, stmts: &[Stmt], locals: &BTreeMap<String, Ty>) {
        for s in stmts {
            match s {
                Stmt::Assign { value, .. } => self.check_expr(value, locals),
                Stmt::FieldAssign {
                    base,
                    field,
                    value,
                    loc,
                } => {
                    match self.lookup(base, locals) {
                        None => self.err(loc, format!("undeclared variable {base}")),
                        Some(ty) => self.check_field(&ty, field, loc),
                    }
                    self.check_expr(value, locals);
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    ..
                } => {
                    self.check_expr(cond, locals);
                    self.check_stmts(then_body, locals);
                    if let Some(b) = else_body {
                        self.check_stmts(b, locals);
                    }
                }
                Stmt::While { cond, body, .. } => {
                    self.check_expr(cond, locals);
                    self.check_stmts(body, locals);
                }
                Stmt::Return { value, .. } => {
                    if let Some(v) = value {
                        self.check_expr(v, locals);
                    }
                }
                Stmt::Expr { expr, .. } => self.check_expr(expr, locals),
            }
        }
    }

    fn check_field(&mut self, ty: &Ty, field: &str, loc: &Loc) {
        match ty {
            Ty::Record(r) => match self.ast.record(r) {
                Some(rec) if rec.field(field).is_none() => {
                    self.err(loc, format!("unknown field {field} of record {r}"));
                }
                _ => {}
            },
            Ty::Scalar => self.err(loc, format!("field access .{field} on a non-record value")),
            Ty::Unknown => self.err(
                loc,
                format!("cannot resolve the record type for field .{field}"),
            ),
        }
    }

    fn check_expr(&mut self, e: &Expr, locals: &BTreeMap<String, Ty>) {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Str(_) => {}
            ExprKind::Var(v) => {
                if self.lookup(v, locals).is_none() {
                    self.err(&e.loc, format!("undeclared variable {v}"));
                }
            }
            ExprKind::Field { base, field } => {
                self.check_expr(base, locals);
                let ty = self.expr_ty(base, locals);
                self.check_field(&ty, field, &e.loc);
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.check_expr(lhs, locals);
                self.check_expr(rhs, locals);
            }
            ExprKind::Unary { operand, .. } => self.check_expr(operand, locals),
            ExprKind::Call { callee, args } => {
                for a in args {
                    self.check_expr(a, locals);
                }
                if let Some((min, max)) = builtin_arity(callee) {
                    let n = args.len();
                    if n < min || max.is_some_and(|m| n > m) {
                        self.err(&e.loc, format!("wrong number of arguments to {callee}"));
                    }
                    if callee.starts_with("param_")
                        && !matches!(args.first().map(|a| &a.kind), Some(ExprKind::Str(_)))
                    {
                        self.err(&e.loc, "parameter name must be a string literal");
                    }
                    if callee == "load_image" && self.ast.superblock_record().is_none() {
                        self.err(&e.loc, "load_image needs a superblock record declaration");
                    }
                } else {
                    match self.ast.function(callee) {
                        None => self.err(&e.loc, format!("unknown function {callee}")),
                        Some(f) if f.params.len() != args.len() => self.err(
                            &e.loc,
                            format!(
                                "function {callee} takes {} arguments, {} given",
                                f.params.len(),
                                args.len()
                            ),
                        ),
                        _ => {}
                    }
                }
            }
        }
    }
}

fn collect_assignments<'s>(stmts: &'s [Stmt], out: &mut Vec<(String, &'s Expr)>) {
    for s in stmts {
        match s {
            Stmt::Assign { target, value, .. } => out.push((target.clone(), value)),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                collect_assignments(then_body, out);
                if let Some(b) = else_body {
                    collect_assignments(b, out);
                }
            }
            Stmt::While { body, .. } => collect_assignments(body, out),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_unit;

    fn check(src: &str) -> Vec<String> {
        let ast = parse_unit(&SourceUnit::new("c", "c.confc", src)).unwrap();
        check_semantics(&ast)
            .into_iter()
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn declared_names_are_clean() {
        let src = r#"
            record Superblock { s_inode_size: int }
            global sb: Superblock;
            fn main() { isz = param_int("inode_size"); sb.s_inode_size = isz; store_image("fs.img", sb); }
        "#;
        assert_eq!(check(src), Vec::<String>::new());
    }

    #[test]
    fn unknown_field_is_reported() {
        let src = r#"
            record Superblock { s_inode_size: int }
            fn main() { sb = load_image("fs.img"); x = sb.nope; }
        "#;
        assert_eq!(check(src), vec!["unknown field nope of record Superblock"]);
    }

    #[test]
    fn parameter_names_must_be_literals() {
        let src = r#"fn main() { n = "blocksize"; b = param_int(n); }"#;
        assert_eq!(check(src), vec!["parameter name must be a string literal"]);
    }

    #[test]
    fn undeclared_variable_and_function() {
        let msgs = check("fn main() { x = y + 1; frob(x); }");
        assert!(msgs.contains(&"undeclared variable y".to_string()));
        assert!(msgs.contains(&"unknown function frob".to_string()));
    }

    #[test]
    fn arity_is_checked() {
        let msgs = check("fn f(a, b) { return a; } fn main() { x = f(1); store_image(\"a\"); }");
        assert_eq!(msgs.len(), 2, "{msgs:?}");
    }

    #[test]
    fn field_store_on_global_record() {
        let src = "record R { a: int } global r: R; fn main() { r.b = 1; }";
        assert_eq!(check(src), vec!["unknown field b of record R"]);
    }
}
