//! Recursive-descent parser. Binary operators are parsed by precedence
//! climbing, loosest first:
//!
//! `? :` < `<==>` < `==>` (right) < `||` < `&&`/`and` < `==` `!=`
//! < `<` `<=` `>` `>=` `in` < `+` `-` `union` `intersection` `setminus`
//! < `*` `/` `\` `%` < unary `!` `-` < postfix `.f`.

use std::collections::BTreeSet;
use std::fmt;

use super::lexer::{tokenize, Token, TokenKind};
use super::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub pos: Pos,
    /// Sorted, deduplicated descriptions of what would have been accepted.
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    pub fn new(pos: Pos, expected: Vec<String>, found: &str) -> Self {
        let expected: BTreeSet<String> = expected.into_iter().collect();
        ParseError {
            pos,
            expected: expected.into_iter().collect(),
            found: found.to_string(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: ", self.pos)?;
        match self.expected.as_slice() {
            [] => write!(f, "unexpected {}", self.found),
            [one] => write!(f, "expected {one}, found {}", self.found),
            many => write!(f, "expected one of {}, found {}", many.join(", "), self.found),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "field", "domain", "function", "axiom", "predicate", "method", "returns", "requires",
    "ensures", "define", "var", "inhale", "exhale", "assert", "assume", "if", "elseif", "else",
    "while", "invariant", "fold", "unfold", "label", "forall", "exists", "acc", "old", "true",
    "false", "null", "write", "none", "result", "Set", "in", "union", "intersection", "setminus",
    "and", "Int", "Bool", "Ref", "Perm",
];

pub fn is_keyword(w: &str) -> bool {
    KEYWORDS.contains(&w)
}

/// Parses a whole program.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
        expected: Vec::new(),
    };
    p.program()
}

/// Parses a single expression (used by tests and tools).
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
        expected: Vec::new(),
    };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    /// Alternatives tried at the current token; reset whenever a token is consumed.
    expected: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &TokenKind {
        &self.toks[self.i].kind
    }

    fn peek_at(&self, k: usize) -> &TokenKind {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].kind
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        self.expected.clear();
        t
    }

    fn is_sym(&mut self, s: &'static str) -> bool {
        if *self.peek() == TokenKind::Sym(s) {
            true
        } else {
            self.expected.push(format!("`{s}`"));
            false
        }
    }

    fn is_word(&mut self, w: &str) -> bool {
        if matches!(self.peek(), TokenKind::Word(x) if x == w) {
            true
        } else {
            self.expected.push(format!("`{w}`"));
            false
        }
    }

    fn eat_sym(&mut self, s: &'static str) -> bool {
        let ok = self.is_sym(s);
        if ok {
            self.bump();
        }
        ok
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let ok = self.is_word(w);
        if ok {
            self.bump();
        }
        ok
    }

    fn error(&mut self) -> ParseError {
        let found = self.peek().to_string();
        ParseError::new(self.pos(), std::mem::take(&mut self.expected), &found)
    }

    fn error_expecting(&mut self, what: &str) -> ParseError {
        self.expected.push(what.to_string());
        self.error()
    }

    fn expect_sym(&mut self, s: &'static str) -> PResult<Pos> {
        let pos = self.pos();
        if self.eat_sym(s) {
            Ok(pos)
        } else {
            Err(self.error())
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<Pos> {
        let pos = self.pos();
        if self.eat_word(w) {
            Ok(pos)
        } else {
            Err(self.error())
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if *self.peek() == TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error_expecting("end of input"))
        }
    }

    fn ident(&mut self) -> PResult<(Ident, Pos)> {
        match self.peek().clone() {
            TokenKind::Word(w) if !is_keyword(&w) => {
                let pos = self.bump().pos;
                Ok((w, pos))
            }
            _ => Err(self.error_expecting("identifier")),
        }
    }

    fn eat_semis(&mut self) {
        while self.eat_sym(";") {}
    }

    // ---------------------------------------------------------------- declarations

    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        loop {
            self.eat_semis();
            if *self.peek() == TokenKind::Eof {
                return Ok(prog);
            }
            if self.is_word("field") {
                prog.fields.push(self.field()?);
            } else if self.is_word("domain") {
                prog.domains.push(self.domain()?);
            } else if self.is_word("function") {
                prog.functions.push(self.function()?);
            } else if self.is_word("predicate") {
                prog.predicates.push(self.predicate()?);
            } else if self.is_word("method") {
                prog.methods.push(self.method()?);
            } else if self.is_word("define") {
                prog.macros.push(self.macro_def()?);
            } else {
                return Err(self.error());
            }
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        let (t, _) = match self.peek().clone() {
            TokenKind::Word(w) => (w, self.pos()),
            _ => return Err(self.error_expecting("type")),
        };
        self.bump();
        Ok(match t.as_str() {
            "Int" => Type::Int,
            "Bool" => Type::Bool,
            "Ref" => Type::Ref,
            "Perm" => Type::Perm,
            "Set" => {
                self.expect_sym("[")?;
                let inner = self.ty()?;
                self.expect_sym("]")?;
                Type::Set(Box::new(inner))
            }
            w if !is_keyword(w) => Type::Domain(t),
            _ => {
                self.i -= 1;
                return Err(self.error_expecting("type"));
            }
        })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            let (name, pos) = self.ident()?;
            self.expect_sym(":")?;
            let ty = self.ty()?;
            out.push(Param { name, ty, pos });
            if self.eat_sym(")") {
                return Ok(out);
            }
            if !self.eat_sym(",") {
                return Err(self.error());
            }
        }
    }

    fn field(&mut self) -> PResult<FieldDecl> {
        self.expect_word("field")?;
        let (name, pos) = self.ident()?;
        self.expect_sym(":")?;
        let ty = self.ty()?;
        Ok(FieldDecl { name, ty, pos })
    }

    fn domain(&mut self) -> PResult<Domain> {
        let pos = self.expect_word("domain")?;
        let (name, _) = self.ident()?;
        self.expect_sym("{")?;
        let mut functions = Vec::new();
        let mut axioms = Vec::new();
        loop {
            self.eat_semis();
            if self.eat_sym("}") {
                break;
            }
            if self.is_word("function") {
                let fpos = self.bump().pos;
                let (fname, _) = self.ident()?;
                let params = self.params()?;
                self.expect_sym(":")?;
                let result = self.ty()?;
                functions.push(DomainFunction {
                    name: fname,
                    params,
                    result,
                    pos: fpos,
                });
            } else if self.is_word("axiom") {
                let apos = self.bump().pos;
                let aname = if self.is_sym("{") {
                    None
                } else {
                    Some(self.ident()?.0)
                };
                self.expect_sym("{")?;
                let body = self.expr()?;
                self.expect_sym("}")?;
                axioms.push(Axiom {
                    name: aname,
                    body,
                    pos: apos,
                });
            } else {
                return Err(self.error());
            }
        }
        Ok(Domain {
            name,
            functions,
            axioms,
            pos,
        })
    }

    fn contracts(&mut self, pres: &mut Vec<Expr>, posts: &mut Vec<Expr>) -> PResult<()> {
        loop {
            self.eat_semis();
            if self.eat_word("requires") {
                pres.push(self.expr()?);
            } else if self.eat_word("ensures") {
                posts.push(self.expr()?);
            } else {
                return Ok(());
            }
        }
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let pos = self.expect_word("function")?;
        let (name, _) = self.ident()?;
        let params = self.params()?;
        self.expect_sym(":")?;
        let result = self.ty()?;
        let (mut pres, mut posts) = (Vec::new(), Vec::new());
        self.contracts(&mut pres, &mut posts)?;
        let body = if self.eat_sym("{") {
            let e = self.expr()?;
            self.expect_sym("}")?;
            Some(e)
        } else {
            None
        };
        Ok(FunctionDecl {
            name,
            params,
            result,
            pres,
            posts,
            body,
            pos,
        })
    }

    fn predicate(&mut self) -> PResult<PredicateDecl> {
        let pos = self.expect_word("predicate")?;
        let (name, _) = self.ident()?;
        let params = self.params()?;
        let body = if self.eat_sym("{") {
            let e = self.expr()?;
            self.expect_sym("}")?;
            Some(e)
        } else {
            None
        };
        Ok(PredicateDecl {
            name,
            params,
            body,
            pos,
        })
    }

    fn method(&mut self) -> PResult<Method> {
        let pos = self.expect_word("method")?;
        let (name, _) = self.ident()?;
        let params = self.params()?;
        let returns = if self.eat_word("returns") {
            self.params()?
        } else {
            Vec::new()
        };
        let (mut pres, mut posts) = (Vec::new(), Vec::new());
        self.contracts(&mut pres, &mut posts)?;
        let body = if self.is_sym("{") {
            Some(self.block()?)
        } else {
            None
        };
        Ok(Method {
            name,
            params,
            returns,
            pres,
            posts,
            body,
            pos,
        })
    }

    fn macro_def(&mut self) -> PResult<Macro> {
        let pos = self.expect_word("define")?;
        let (name, _) = self.ident()?;
        let params = if self.eat_sym("(") {
            let mut ps = Vec::new();
            if !self.eat_sym(")") {
                loop {
                    ps.push(self.ident()?.0);
                    if self.eat_sym(")") {
                        break;
                    }
                    if !self.eat_sym(",") {
                        return Err(self.error());
                    }
                }
            }
            Some(ps)
        } else {
            None
        };
        let body = if self.is_sym("{") {
            MacroBody::Stmts(self.block()?)
        } else {
            MacroBody::Expr(self.expr()?)
        };
        Ok(Macro {
            name,
            params,
            body,
            pos,
        })
    }

    // ---------------------------------------------------------------- statements

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        loop {
            self.eat_semis();
            if self.eat_sym("}") {
                return Ok(out);
            }
            out.push(self.stmt()?);
        }
    }

    fn paren_expr(&mut self) -> PResult<Expr> {
        self.expect_sym("(")?;
        let e = self.expr()?;
        self.expect_sym(")")?;
        Ok(e)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kind = if self.eat_word("inhale") {
            StmtKind::Inhale(self.expr()?)
        } else if self.eat_word("exhale") {
            StmtKind::Exhale(self.expr()?)
        } else if self.eat_word("assert") {
            StmtKind::Assert(self.expr()?)
        } else if self.eat_word("assume") {
            StmtKind::Assume(self.expr()?)
        } else if self.eat_word("fold") {
            StmtKind::Fold(self.expr()?)
        } else if self.eat_word("unfold") {
            StmtKind::Unfold(self.expr()?)
        } else if self.eat_word("label") {
            StmtKind::Label(self.ident()?.0)
        } else if self.eat_word("var") {
            let (name, _) = self.ident()?;
            self.expect_sym(":")?;
            let ty = self.ty()?;
            let init = if self.eat_sym(":=") {
                Some(self.expr()?)
            } else {
                None
            };
            StmtKind::VarDecl { name, ty, init }
        } else if self.eat_word("if") {
            return self.if_rest(pos);
        } else if self.eat_word("while") {
            let cond = self.paren_expr()?;
            let mut invariants = Vec::new();
            loop {
                self.eat_semis();
                if !self.eat_word("invariant") {
                    break;
                }
                invariants.push(self.expr()?);
            }
            let body = self.block()?;
            StmtKind::While {
                cond,
                invariants,
                body,
            }
        } else if matches!(self.peek(), TokenKind::Word(w) if !is_keyword(w))
            && *self.peek_at(1) == TokenKind::Sym(",")
        {
            let mut targets = vec![self.ident()?.0];
            while self.eat_sym(",") {
                targets.push(self.ident()?.0);
            }
            self.expect_sym(":=")?;
            let (method, _) = self.ident()?;
            let args = self.args()?;
            StmtKind::Call {
                targets,
                method,
                args,
            }
        } else {
            let lhs = self.expr_or_statement_start()?;
            if self.eat_sym(":=") {
                let value = self.expr()?;
                match lhs.kind {
                    ExprKind::Var(target) => StmtKind::Assign { target, value },
                    ExprKind::Field(recv, field) => StmtKind::FieldWrite {
                        recv: *recv,
                        field,
                        value,
                    },
                    _ => {
                        return Err(ParseError::new(
                            lhs.pos,
                            vec!["assignable location".into()],
                            "expression",
                        ))
                    }
                }
            } else {
                match lhs.kind {
                    ExprKind::Call(method, args) => StmtKind::Call {
                        targets: vec![],
                        method,
                        args,
                    },
                    ExprKind::Var(name) => StmtKind::Call {
                        targets: vec![],
                        method: name,
                        args: vec![],
                    },
                    _ => return Err(self.error_expecting("`:=`")),
                }
            }
        };
        Ok(Stmt { kind, pos })
    }

    /// The start of an assignment, field write or call statement.
    fn expr_or_statement_start(&mut self) -> PResult<Expr> {
        if !matches!(self.peek(), TokenKind::Word(w) if !is_keyword(w))
            && *self.peek() != TokenKind::Sym("(")
        {
            return Err(self.error_expecting("statement"));
        }
        self.postfix()
    }

    fn if_rest(&mut self, pos: Pos) -> PResult<Stmt> {
        let cond = self.paren_expr()?;
        let then = self.block()?;
        let els = if self.eat_word("elseif") {
            let p = self.toks[self.i - 1].pos;
            Some(vec![self.if_rest(p)?])
        } else if self.eat_word("else") {
            if self.is_word("if") {
                let p = self.bump().pos;
                Some(vec![self.if_rest(p)?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If { cond, then, els },
            pos,
        })
    }

    // ---------------------------------------------------------------- expressions

    pub fn expr(&mut self) -> PResult<Expr> {
        let c = self.iff()?;
        if self.eat_sym("?") {
            let a = self.expr()?;
            self.expect_sym(":")?;
            let b = self.expr()?;
            let pos = c.pos;
            return Ok(Expr::new(
                ExprKind::Cond(Box::new(c), Box::new(a), Box::new(b)),
                pos,
            ));
        }
        Ok(c)
    }

    fn iff(&mut self) -> PResult<Expr> {
        let mut a = self.implies()?;
        while self.eat_sym("<==>") {
            let b = self.implies()?;
            a = Expr::binary(BinOp::Iff, a, b);
        }
        Ok(a)
    }

    fn implies(&mut self) -> PResult<Expr> {
        let a = self.or()?;
        if self.eat_sym("==>") {
            let b = self.implies()?;
            return Ok(Expr::binary(BinOp::Implies, a, b));
        }
        Ok(a)
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut a = self.and()?;
        while self.eat_sym("||") {
            let b = self.and()?;
            a = Expr::binary(BinOp::Or, a, b);
        }
        Ok(a)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut a = self.equality()?;
        while self.eat_sym("&&") || self.eat_word("and") {
            let b = self.equality()?;
            a = Expr::binary(BinOp::And, a, b);
        }
        Ok(a)
    }

    fn equality(&mut self) -> PResult<Expr> {
        let mut a = self.relation()?;
        loop {
            let op = if self.eat_sym("==") {
                BinOp::Eq
            } else if self.eat_sym("!=") {
                BinOp::Ne
            } else {
                return Ok(a);
            };
            let b = self.relation()?;
            a = Expr::binary(op, a, b);
        }
    }

    fn relation(&mut self) -> PResult<Expr> {
        let mut a = self.additive()?;
        loop {
            let op = if self.eat_sym("<=") {
                BinOp::Le
            } else if self.eat_sym(">=") {
                BinOp::Ge
            } else if self.eat_sym("<") {
                BinOp::Lt
            } else if self.eat_sym(">") {
                BinOp::Gt
            } else if self.eat_word("in") {
                BinOp::In
            } else {
                return Ok(a);
            };
            let b = self.additive()?;
            a = Expr::binary(op, a, b);
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut a = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else if self.eat_word("union") {
                BinOp::Union
            } else if self.eat_word("intersection") {
                BinOp::Intersection
            } else if self.eat_word("setminus") {
                BinOp::SetMinus
            } else {
                return Ok(a);
            };
            let b = self.multiplicative()?;
            a = Expr::binary(op, a, b);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut a = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else if self.eat_sym("\\") {
                BinOp::IntDiv
            } else if self.eat_sym("%") {
                BinOp::Mod
            } else {
                return Ok(a);
            };
            let b = self.unary()?;
            a = Expr::binary(op, a, b);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        if self.eat_sym("!") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), pos));
        }
        if self.eat_sym("-") {
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), pos));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.eat_sym(".") {
            let (f, _) = self.ident()?;
            let pos = e.pos;
            e = Expr::new(ExprKind::Field(Box::new(e), f), pos);
        }
        Ok(e)
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_sym("(")?;
        let mut out = Vec::new();
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_sym(")") {
                return Ok(out);
            }
            if !self.eat_sym(",") {
                return Err(self.error());
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let word = match self.peek().clone() {
            TokenKind::Int(i) => {
                self.bump();
                return Ok(Expr::new(ExprKind::Int(i), pos));
            }
            TokenKind::Sym("(") => {
                self.bump();
                let mut e = self.expr()?;
                self.expect_sym(")")?;
                // Keep the position of the opening parenthesis for error reports.
                e.pos = pos;
                return Ok(e);
            }
            TokenKind::Word(w) => w,
            _ => return Err(self.error_expecting("expression")),
        };
        let simple = match word.as_str() {
            "true" => Some(ExprKind::Bool(true)),
            "false" => Some(ExprKind::Bool(false)),
            "null" => Some(ExprKind::Null),
            "write" => Some(ExprKind::FullPerm),
            "none" => Some(ExprKind::NoPerm),
            "result" => Some(ExprKind::Result),
            _ => None,
        };
        if let Some(kind) = simple {
            self.bump();
            return Ok(Expr::new(kind, pos));
        }
        match word.as_str() {
            "acc" => {
                self.bump();
                self.expect_sym("(")?;
                let loc = self.expr()?;
                let perm = if self.eat_sym(",") {
                    Some(Box::new(self.expr()?))
                } else {
                    None
                };
                self.expect_sym(")")?;
                Ok(Expr::new(ExprKind::Acc(Box::new(loc), perm), pos))
            }
            "old" => {
                self.bump();
                let label = if self.eat_sym("[") {
                    let (l, _) = self.ident()?;
                    self.expect_sym("]")?;
                    Some(l)
                } else {
                    None
                };
                let e = self.paren_expr()?;
                Ok(Expr::new(ExprKind::Old(label, Box::new(e)), pos))
            }
            "forall" | "exists" => {
                self.bump();
                let q = if word == "forall" {
                    QuantKind::Forall
                } else {
                    QuantKind::Exists
                };
                let mut vars = Vec::new();
                loop {
                    let (v, _) = self.ident()?;
                    self.expect_sym(":")?;
                    vars.push((v, self.ty()?));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym("::")?;
                let mut triggers = Vec::new();
                while self.eat_sym("{") {
                    let mut trig = vec![self.expr()?];
                    while self.eat_sym(",") {
                        trig.push(self.expr()?);
                    }
                    self.expect_sym("}")?;
                    triggers.push(trig);
                }
                let body = self.expr()?;
                Ok(Expr::new(
                    ExprKind::Quant(q, vars, triggers, Box::new(body)),
                    pos,
                ))
            }
            "Set" => {
                self.bump();
                let ty = if self.eat_sym("[") {
                    let t = self.ty()?;
                    self.expect_sym("]")?;
                    Some(t)
                } else {
                    None
                };
                let elems = self.args()?;
                Ok(Expr::new(ExprKind::SetLit(ty, elems), pos))
            }
            _ => {
                let (name, _) = self.ident()?;
                if self.is_sym("(") {
                    let args = self.args()?;
                    Ok(Expr::new(ExprKind::Call(name, args), pos))
                } else {
                    Ok(Expr::new(ExprKind::Var(name), pos))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_program() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("  // nothing\n").unwrap().is_empty());
    }

    #[test]
    fn unbalanced_acc_reports_closing_brace() {
        let err = parse("method m() { inhale acc(x.f }").unwrap_err();
        assert_eq!(err.pos, Pos::new(1, 29));
        assert!(err.expected.contains(&"`)`".to_string()), "{err}");
        assert!(err.expected.contains(&"`,`".to_string()), "{err}");
        assert_eq!(err.found, "`}`");
    }

    #[test]
    fn implication_is_right_associative() {
        let e = parse_expr("a ==> b ==> c").unwrap();
        let ExprKind::Binary(BinOp::Implies, _, rhs) = e.kind else {
            panic!()
        };
        assert!(matches!(rhs.kind, ExprKind::Binary(BinOp::Implies, ..)));
    }

    #[test]
    fn and_keyword_is_conjunction() {
        let e = parse_expr("0 <= l and l < r").unwrap();
        assert!(matches!(e.kind, ExprKind::Binary(BinOp::And, ..)));
    }

    #[test]
    fn conditional_binds_loosest() {
        let e = parse_expr("a == b ? c == d : e == f").unwrap();
        assert!(matches!(e.kind, ExprKind::Cond(..)));
    }

    #[test]
    fn quantifier_with_triggers() {
        let e = parse_expr("forall n: Ref :: {n.left in nodes}{n in nodes, n.left} n in nodes").unwrap();
        let ExprKind::Quant(QuantKind::Forall, vars, trigs, _) = e.kind else {
            panic!()
        };
        assert_eq!(vars, vec![("n".to_string(), Type::Ref)]);
        assert_eq!(trigs.len(), 2);
        assert_eq!(trigs[1].len(), 2);
    }

    #[test]
    fn statements_parse() {
        let src = "method m(a: Int) returns (r: Int) {
            var x: Int := a \\ 2
            x := x + 1
            r := foo(x)
            r, x := bar(a)
            n.f := 3
            if (x == 1) { } elseif (x == 2) { } else { }
            while (x < 10) invariant x >= 0 { x := x + 1 }
            label l0
            fold acc(P(x), 1/2)
        }";
        let p = parse(src).unwrap();
        let body = p.methods[0].body.as_ref().unwrap();
        assert_eq!(body.len(), 9);
        assert!(matches!(body[3].kind, StmtKind::Call { ref targets, .. } if targets.len() == 2));
        assert!(matches!(body[4].kind, StmtKind::FieldWrite { .. }));
    }

    #[test]
    fn keyword_is_not_an_identifier() {
        assert!(parse("method field() {}").is_err());
    }
}
