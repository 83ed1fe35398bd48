//! Recursive-descent parser for ConfC. Stops at the first syntax error.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{Diagnostic, ParseDiagnostics};

pub fn parse_unit(unit: &SourceUnit) -> Result<Ast, ParseDiagnostics> {
    let tokens = tokenize(&unit.path, &unit.text).map_err(|d| ParseDiagnostics(vec![d]))?;
    let mut p = Parser { tokens, pos: 0 };
    p.unit().map_err(|d| ParseDiagnostics(vec![d]))
}

/// Parses a standalone expression; used by tests and tooling.
pub fn parse_expr(file: &str, text: &str) -> Result<Expr, Diagnostic> {
    let tokens = tokenize(file, text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

fn binop_for(p: &str) -> Option<BinOp> {
    Some(match p {
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "/" => BinOp::Div,
        "%" => BinOp::Rem,
        "&" => BinOp::And,
        "|" => BinOp::Or,
        "^" => BinOp::Xor,
        "<<" => BinOp::Shl,
        ">>" => BinOp::Shr,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "&&" => BinOp::LogicAnd,
        "||" => BinOp::LogicOr,
        _ => return None,
    })
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn error_here(&self, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::new(self.peek().loc.clone(), msg)
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<Loc> {
        if self.is_punct(p) {
            return Ok(self.next().loc);
        }
        let found = self.peek().tok.describe();
        // A primary where a closer was expected means an operator is missing.
        let starts_operand = matches!(self.peek().tok, Tok::Ident(_) | Tok::Int(_) | Tok::Str(_));
        if starts_operand && matches!(p, ")" | ";" | ",") {
            Err(self.error_here(format!("expected operator or `{p}`, found {found}")))
        } else {
            Err(self.error_here(format!("expected `{p}`, found {found}")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<(String, Loc)> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                let loc = self.next().loc;
                Ok((s, loc))
            }
            other => Err(self.error_here(format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        match self.peek().tok {
            Tok::Eof => Ok(()),
            ref other => Err(self.error_here(format!("unexpected {}", other.describe()))),
        }
    }

    fn unit(&mut self) -> PResult<Ast> {
        let mut ast = Ast::default();
        loop {
            match self.peek().tok.clone() {
                Tok::Eof => return Ok(ast),
                Tok::At => {
                    let loc = self.next().loc;
                    let (name, _) = self.expect_ident("annotation name")?;
                    if name != "superblock" {
                        return Err(Diagnostic::new(loc, format!("unknown annotation @{name}")));
                    }
                    if !self.is_keyword("record") {
                        return Err(
                            self.error_here("@superblock must precede a record declaration")
                        );
                    }
                    let mut rec = self.record()?;
                    rec.superblock = true;
                    ast.records.push(rec);
                }
                Tok::Ident(kw) if kw == "record" => {
                    let rec = self.record()?;
                    ast.records.push(rec);
                }
                Tok::Ident(kw) if kw == "global" => {
                    let g = self.global()?;
                    ast.globals.push(g);
                }
                Tok::Ident(kw) if kw == "fn" => {
                    let f = self.function()?;
                    ast.functions.push(f);
                }
                other => {
                    return Err(self.error_here(format!(
                        "expected `record`, `global` or `fn`, found {}",
                        other.describe()
                    )))
                }
            }
        }
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let (name, _) = self.expect_ident("type name")?;
        Ok(match name.as_str() {
            "int" => TypeName::Scalar(ScalarType::Int),
            "flagword" => TypeName::Scalar(ScalarType::Flagword),
            "string" => TypeName::Scalar(ScalarType::String),
            _ => TypeName::Record(name),
        })
    }

    fn record(&mut self) -> PResult<RecordDecl> {
        let loc = self.next().loc; // `record`
        let (name, _) = self.expect_ident("record name")?;
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while !self.is_punct("}") {
            let (fname, floc) = self.expect_ident("field name")?;
            self.expect_punct(":")?;
            let ty = match self.type_name()? {
                TypeName::Scalar(s) => s,
                TypeName::Record(r) => {
                    return Err(Diagnostic::new(
                        floc,
                        format!("record field {fname} cannot have record type {r}"),
                    ))
                }
            };
            fields.push(FieldDecl {
                name: fname,
                ty,
                loc: floc,
            });
            if !self.is_punct("}") {
                self.expect_punct(",")?;
            }
        }
        self.expect_punct("}")?;
        Ok(RecordDecl {
            name,
            fields,
            superblock: false,
            loc,
        })
    }

    fn global(&mut self) -> PResult<GlobalDecl> {
        let loc = self.next().loc; // `global`
        let (name, _) = self.expect_ident("global name")?;
        self.expect_punct(":")?;
        let ty = self.type_name()?;
        let init = if self.is_punct("=") {
            self.next();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_punct(";")?;
        Ok(GlobalDecl {
            name,
            ty,
            init,
            loc,
        })
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let loc = self.next().loc; // `fn`
        let (name, _) = self.expect_ident("function name")?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        while !self.is_punct(")") {
            let (pname, ploc) = self.expect_ident("parameter name")?;
            let ty = if self.is_punct(":") {
                self.next();
                self.type_name()?
            } else {
                TypeName::Scalar(ScalarType::Int)
            };
            params.push(Param {
                name: pname,
                ty,
                loc: ploc,
            });
            if !self.is_punct(")") {
                self.expect_punct(",")?;
            }
        }
        self.expect_punct(")")?;
        let ret = if self.is_punct("->") {
            self.next();
            Some(self.type_name()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(FunctionDecl {
            name,
            params,
            ret,
            body,
            loc,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek().tok, Tok::Eof) {
                return Err(self.error_here("expected `}`, found end of input"));
            }
            stmts.push(self.stmt()?);
        }
        self.next();
        Ok(stmts)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.peek().loc.clone();
        if self.is_keyword("if") {
            return self.if_stmt();
        }
        if self.is_keyword("while") {
            self.next();
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body, loc });
        }
        if self.is_keyword("return") {
            self.next();
            let value = if self.is_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.expect_punct(";")?;
            return Ok(Stmt::Return { value, loc });
        }
        if let Tok::Ident(name) = self.peek().tok.clone() {
            if matches!(self.peek_at(1), Tok::Punct("=")) {
                self.next();
                self.next();
                let value = self.expr()?;
                self.expect_punct(";")?;
                return Ok(Stmt::Assign {
                    target: name,
                    value,
                    loc,
                });
            }
            if matches!(self.peek_at(1), Tok::Punct("."))
                && matches!(self.peek_at(2), Tok::Ident(_))
                && matches!(self.peek_at(3), Tok::Punct("="))
            {
                self.next();
                self.next();
                let (field, _) = self.expect_ident("field name")?;
                self.next();
                let value = self.expr()?;
                self.expect_punct(";")?;
                return Ok(Stmt::FieldAssign {
                    base: name,
                    field,
                    value,
                    loc,
                });
            }
        }
        let expr = self.expr()?;
        self.expect_punct(";")?;
        Ok(Stmt::Expr { expr, loc })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let loc = self.next().loc; // `if`
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then_body = self.block()?;
        let else_body = if self.is_keyword("else") {
            self.next();
            if self.is_keyword("if") {
                Some(vec![self.if_stmt()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_body,
            else_body,
            loc,
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Punct(p) = &self.peek().tok {
            let op = match binop_for(p) {
                Some(op) if op.precedence() > min_prec => op,
                _ => break,
            };
            let loc = self.next().loc;
            let rhs = self.binary(op.precedence())?;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                loc,
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match &self.peek().tok {
            Tok::Punct("!") => Some(UnOp::Not),
            Tok::Punct("~") => Some(UnOp::BitNot),
            Tok::Punct("-") => Some(UnOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            let loc = self.next().loc;
            let operand = self.unary()?;
            return Ok(Expr::new(
                ExprKind::Unary {
                    op,
                    operand: Box::new(operand),
                },
                loc,
            ));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.is_punct(".") {
            let loc = self.next().loc;
            let (field, _) = self.expect_ident("field name")?;
            e = Expr::new(
                ExprKind::Field {
                    base: Box::new(e),
                    field,
                },
                loc,
            );
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let tok = self.next();
        match tok.tok {
            Tok::Int(v) => Ok(Expr::new(ExprKind::Int(v), tok.loc)),
            Tok::Str(s) => Ok(Expr::new(ExprKind::Str(s), tok.loc)),
            Tok::Ident(name) => {
                if self.is_punct("(") {
                    self.next();
                    let mut args = Vec::new();
                    while !self.is_punct(")") {
                        args.push(self.expr()?);
                        if !self.is_punct(")") {
                            self.expect_punct(",")?;
                        }
                    }
                    self.next();
                    Ok(Expr::new(ExprKind::Call { callee: name, args }, tok.loc))
                } else {
                    Ok(Expr::new(ExprKind::Var(name), tok.loc))
                }
            }
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            other => Err(Diagnostic::new(
                tok.loc,
                format!("expected expression, found {}", other.describe()),
            )),
        }
    }
}
