//! Surface language: syntax tree, parser, pretty printer, macro expansion and
//! well-formedness checking.
//!
//! Assertions and expressions share one syntax, as in Viper. The
//! well-formedness pass classifies them and produces a [`checked::CheckedProgram`]
//! in which every assertion is a flat list of [`checked::Assertion`] conjuncts
//! and every iterated separating conjunction is in canonical form
//! `forall x: T :: c(x) ==> acc(e(x).f, p(x))`.

pub mod checked;
mod lexer;
mod macros;
mod parser;
mod printer;
mod wf;

use std::fmt;

pub use lexer::{Token, TokenKind};
pub use macros::{expand_macros, MacroError};
pub use parser::{parse, parse_expr, ParseError};
pub use wf::{check_wellformed, WfError, WfErrors};

/// Line and column, both 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl Pos {
    pub fn new(line: u32, col: u32) -> Self {
        Pos { line, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

pub type Ident = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Int,
    Bool,
    Ref,
    Perm,
    Set(Box<Type>),
    Domain(Ident),
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "Int"),
            Type::Bool => write!(f, "Bool"),
            Type::Ref => write!(f, "Ref"),
            Type::Perm => write!(f, "Perm"),
            Type::Set(t) => write!(f, "Set[{t}]"),
            Type::Domain(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    /// `/`: permission (rational) division.
    Div,
    /// `\`: integer division.
    IntDiv,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
    Iff,
    In,
    Union,
    Intersection,
    SetMinus,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            IntDiv => "\\",
            Mod => "%",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            And => "&&",
            Or => "||",
            Implies => "==>",
            Iff => "<==>",
            In => "in",
            Union => "union",
            Intersection => "intersection",
            SetMinus => "setminus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuantKind {
    Forall,
    Exists,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Null,
    /// `write`
    FullPerm,
    /// `none`
    NoPerm,
    /// `result`, in function postconditions.
    Result,
    Var(Ident),
    Field(Box<Expr>, Ident),
    Call(Ident, Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `old(e)` (label `None`) or `old[l](e)`.
    Old(Option<Ident>, Box<Expr>),
    /// `acc(loc)` or `acc(loc, perm)`; `loc` is a field access or predicate call.
    Acc(Box<Expr>, Option<Box<Expr>>),
    /// Bound variables, trigger sets, body. An empty trigger list asks for
    /// trigger inference.
    Quant(QuantKind, Vec<(Ident, Type)>, Vec<Vec<Expr>>, Box<Expr>),
    /// `Set(e, ...)` or `Set[T](e, ...)`.
    SetLit(Option<Type>, Vec<Expr>),
}

// Constructors named after the operators they build; not operator impls.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        let pos = a.pos;
        Expr::new(ExprKind::Binary(op, Box::new(a), Box::new(b)), pos)
    }

    pub fn not(e: Expr) -> Expr {
        let pos = e.pos;
        Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), pos)
    }

    pub fn tt(pos: Pos) -> Expr {
        Expr::new(ExprKind::Bool(true), pos)
    }

    /// Immediate subexpressions, triggers included.
    pub fn children(&self) -> Vec<&Expr> {
        use ExprKind::*;
        match &self.kind {
            Int(_) | Bool(_) | Null | FullPerm | NoPerm | Result | Var(_) => vec![],
            Field(e, _) | Unary(_, e) | Old(_, e) => vec![e],
            Call(_, args) | SetLit(_, args) => args.iter().collect(),
            Binary(_, a, b) => vec![a, b],
            Cond(c, a, b) => vec![c, a, b],
            Acc(l, p) => {
                let mut v = vec![&**l];
                if let Some(p) = p {
                    v.push(p);
                }
                v
            }
            Quant(_, _, trs, body) => {
                let mut v: Vec<&Expr> = trs.iter().flatten().collect();
                v.push(body);
                v
            }
        }
    }

    pub fn any(&self, pred: &mut impl FnMut(&Expr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    /// Overwrites every position in this tree.
    pub fn restamp(&mut self, pos: Pos) {
        self.pos = pos;
        self.for_each_child_mut(&mut |c| c.restamp(pos));
    }

    pub fn for_each_child_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        use ExprKind::*;
        match &mut self.kind {
            Int(_) | Bool(_) | Null | FullPerm | NoPerm | Result | Var(_) => {}
            Field(e, _) | Unary(_, e) | Old(_, e) => f(e),
            Call(_, args) | SetLit(_, args) => args.iter_mut().for_each(f),
            Binary(_, a, b) => {
                f(a);
                f(b)
            }
            Cond(c, a, b) => {
                f(c);
                f(a);
                f(b)
            }
            Acc(l, p) => {
                f(l);
                if let Some(p) = p {
                    f(p)
                }
            }
            Quant(_, _, trs, body) => {
                trs.iter_mut().flatten().for_each(&mut *f);
                f(body)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: Ident,
    pub ty: Type,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub name: Ident,
    pub ty: Type,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainFunction {
    pub name: Ident,
    pub params: Vec<Param>,
    pub result: Type,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axiom {
    pub name: Option<Ident>,
    pub body: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub name: Ident,
    pub functions: Vec<DomainFunction>,
    pub axioms: Vec<Axiom>,
    pub pos: Pos,
}

/// Heap-dependent function.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    pub result: Type,
    pub pres: Vec<Expr>,
    pub posts: Vec<Expr>,
    pub body: Option<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredicateDecl {
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Option<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Method {
    pub name: Ident,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub pres: Vec<Expr>,
    pub posts: Vec<Expr>,
    pub body: Option<Vec<Stmt>>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MacroBody {
    Expr(Expr),
    Stmts(Vec<Stmt>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Macro {
    pub name: Ident,
    /// `None` for `define X body` (no parameter list).
    pub params: Option<Vec<Ident>>,
    pub body: MacroBody,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Inhale(Expr),
    Exhale(Expr),
    Assert(Expr),
    Assume(Expr),
    VarDecl {
        name: Ident,
        ty: Type,
        init: Option<Expr>,
    },
    Assign {
        target: Ident,
        value: Expr,
    },
    FieldWrite {
        recv: Expr,
        field: Ident,
        value: Expr,
    },
    If {
        cond: Expr,
        then: Vec<Stmt>,
        els: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        invariants: Vec<Expr>,
        body: Vec<Stmt>,
    },
    /// Method call, or a statement macro use before expansion.
    Call {
        targets: Vec<Ident>,
        method: Ident,
        args: Vec<Expr>,
    },
    Fold(Expr),
    Unfold(Expr),
    Label(Ident),
}

/// A parsed program, in declaration order per kind.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub fields: Vec<FieldDecl>,
    pub domains: Vec<Domain>,
    pub functions: Vec<FunctionDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub methods: Vec<Method>,
    pub macros: Vec<Macro>,
}

impl Program {
    pub fn method(&self, name: &str) -> Option<&Method> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
            && self.domains.is_empty()
            && self.functions.is_empty()
            && self.predicates.is_empty()
            && self.methods.is_empty()
            && self.macros.is_empty()
    }
}

/// Parse, expand macros and check well-formedness in one go.
pub fn load(source: &str) -> Result<checked::CheckedProgram, FrontendError> {
    let parsed = parse(source)?;
    let expanded = expand_macros(parsed)?;
    Ok(check_wellformed(expanded)?)
}

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Macro(#[from] MacroError),
    #[error(transparent)]
    Wf(#[from] WfErrors),
}

impl FrontendError {
    pub fn pos(&self) -> Pos {
        match self {
            FrontendError::Parse(e) => e.pos,
            FrontendError::Macro(e) => e.pos(),
            FrontendError::Wf(e) => e.0.first().map(|e| e.pos).unwrap_or_default(),
        }
    }
}
