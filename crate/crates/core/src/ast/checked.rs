//! Well-formed programs: every assertion is a flat list of conjuncts, and every
//! iterated separating conjunction is in canonical form.

use std::fmt;

use super::{Domain, Expr, FieldDecl, Ident, Param, Pos, Type};

/// `acc(recv.field, perm)`, possibly under a guard from an enclosing
/// implication or conditional.
#[derive(Clone, Debug, PartialEq)]
pub struct AccAssertion {
    pub guard: Option<Expr>,
    pub recv: Expr,
    pub field: Ident,
    pub perm: Expr,
    pub pos: Pos,
}

/// Canonical iterated separating conjunction
/// `forall var: ty :: cond ==> acc(recv.field, perm)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Isc {
    pub var: Ident,
    pub ty: Type,
    pub cond: Expr,
    pub recv: Expr,
    pub field: Ident,
    pub perm: Expr,
    pub pos: Pos,
}

/// `acc(name(args), perm)`, possibly guarded.
#[derive(Clone, Debug, PartialEq)]
pub struct PredAssertion {
    pub guard: Option<Expr>,
    pub name: Ident,
    pub args: Vec<Expr>,
    pub perm: Expr,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Assertion {
    /// A boolean expression without permissions. Guards are folded in as an
    /// implication.
    Pure(Expr),
    Acc(AccAssertion),
    Isc(Isc),
    Pred(PredAssertion),
}

impl Assertion {
    pub fn pos(&self) -> Pos {
        match self {
            Assertion::Pure(e) => e.pos,
            Assertion::Acc(a) => a.pos,
            Assertion::Isc(i) => i.pos,
            Assertion::Pred(p) => p.pos,
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Assertion::Pure(_))
    }

    /// A pure conjunct that is a quantifier.
    pub fn is_pure_quantifier(&self) -> bool {
        matches!(self, Assertion::Pure(e) if matches!(e.kind, super::ExprKind::Quant(..)))
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let guard = |g: &Option<Expr>| match g {
            Some(g) => format!("{g} ==> "),
            None => String::new(),
        };
        match self {
            Assertion::Pure(e) => write!(f, "{e}"),
            Assertion::Acc(a) => write!(
                f,
                "{}acc({}.{}, {})",
                guard(&a.guard),
                a.recv,
                a.field,
                a.perm
            ),
            Assertion::Isc(i) => write!(
                f,
                "forall {}: {} :: {} ==> acc({}.{}, {})",
                i.var, i.ty, i.cond, i.recv, i.field, i.perm
            ),
            Assertion::Pred(p) => {
                let args: Vec<String> = p.args.iter().map(|a| a.to_string()).collect();
                write!(
                    f,
                    "{}acc({}({}), {})",
                    guard(&p.guard),
                    p.name,
                    args.join(", "),
                    p.perm
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CStmt {
    pub kind: CStmtKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CStmtKind {
    /// `inhale` and `assume`.
    Inhale(Vec<Assertion>),
    Exhale(Vec<Assertion>),
    /// Checks without consuming.
    Assert(Vec<Assertion>),
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
        then: Vec<CStmt>,
        els: Vec<CStmt>,
    },
    While {
        cond: Expr,
        invariants: Vec<Assertion>,
        body: Vec<CStmt>,
    },
    Call {
        targets: Vec<Ident>,
        method: Ident,
        args: Vec<Expr>,
    },
    Fold(PredAssertion),
    Unfold(PredAssertion),
    Label(Ident),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CFunction {
    pub name: Ident,
    pub params: Vec<Param>,
    pub result: Type,
    pub pres: Vec<Assertion>,
    /// Pure postconditions; may mention `result`.
    pub posts: Vec<Expr>,
    pub body: Option<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CPredicate {
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Option<Vec<Assertion>>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CMethod {
    pub name: Ident,
    pub params: Vec<Param>,
    pub returns: Vec<Param>,
    pub pres: Vec<Assertion>,
    pub posts: Vec<Assertion>,
    pub body: Option<Vec<CStmt>>,
    pub pos: Pos,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckedProgram {
    pub fields: Vec<FieldDecl>,
    pub domains: Vec<Domain>,
    pub functions: Vec<CFunction>,
    pub predicates: Vec<CPredicate>,
    pub methods: Vec<CMethod>,
}

impl CheckedProgram {
    pub fn field_type(&self, name: &str) -> Option<&Type> {
        self.fields.iter().find(|f| f.name == name).map(|f| &f.ty)
    }

    pub fn function(&self, name: &str) -> Option<&CFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&CPredicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&CMethod> {
        self.methods.iter().find(|m| m.name == name)
    }

    /// Signature of a domain function: parameter types and result type.
    pub fn domain_function(&self, name: &str) -> Option<(Vec<Type>, Type)> {
        self.domains
            .iter()
            .flat_map(|d| &d.functions)
            .find(|f| f.name == name)
            .map(|f| (f.params.iter().map(|p| p.ty.clone()).collect(), f.result.clone()))
    }
}
