//! Sorted first-order terms shared by the execution engine and the SMT backend.
//!
//! Terms are immutable and reference counted, so cloning is cheap and terms can
//! be shared freely between forked symbolic states. Every constructor checks the
//! sorts of its arguments; an ill-sorted construction is an internal bug and
//! panics. [`Term::check`] re-derives the sort of a term bottom-up and is used by
//! the property tests.

mod pool;
mod simplify;
mod subst;

pub use pool::SymbolPool;
pub use subst::SubstError;

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{One, Zero};

/// Exact permission amounts.
pub type Rational = Rational64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int,
    /// Permission amounts; rationals, encoded as `Real`.
    Perm,
    Ref,
    /// Opaque snapshot sort used as the argument sort of heap-dependent functions.
    Snap,
    Set(Box<Sort>),
    /// Partial value map for one field (defunctionalised as an uninterpreted sort).
    Pvm(Arc<str>),
    /// Total value map `Ref -> value` for one field. Symbols of this sort are
    /// declared as unary functions and only ever applied.
    ValueMap(Arc<str>, Box<Sort>),
    /// User-declared domain sort.
    Domain(Arc<str>),
}

impl Sort {
    pub fn set_of(elem: Sort) -> Sort {
        Sort::Set(Box::new(elem))
    }

    pub fn value_map(field: &str, value: Sort) -> Sort {
        Sort::ValueMap(field.into(), Box::new(value))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Sort::Int | Sort::Perm)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "Bool"),
            Sort::Int => write!(f, "Int"),
            Sort::Perm => write!(f, "Perm"),
            Sort::Ref => write!(f, "Ref"),
            Sort::Snap => write!(f, "Snap"),
            Sort::Set(e) => write!(f, "Set[{e}]"),
            Sort::Pvm(field) => write!(f, "PVM[{field}]"),
            Sort::ValueMap(field, v) => write!(f, "ValueMap[{field}: {v}]"),
            Sort::Domain(d) => write!(f, "{d}"),
        }
    }
}

/// A named, sorted symbol: a symbolic constant or a bound variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub name: Arc<str>,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: impl Into<Arc<str>>, sort: Sort) -> Self {
        Var {
            name: name.into(),
            sort,
        }
    }

    pub fn term(&self) -> Term {
        Term::var(self.clone())
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Where a function symbol comes from; decides how it is rendered and declared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FunKind {
    /// Declared by the user program (domain functions, heap-dependent functions).
    User,
    /// Fresh symbol introduced by the engine (inverse functions, permission macros).
    Fresh,
    /// Fixed background symbol (partial value map machinery).
    Builtin,
}

/// A function symbol, optionally with a macro definition (`define-fun`).
#[derive(Clone, Debug)]
pub struct Function {
    pub name: Arc<str>,
    pub params: Vec<Sort>,
    pub result: Sort,
    pub kind: FunKind,
    pub def: Option<FunDef>,
}

#[derive(Clone, Debug)]
pub struct FunDef {
    pub params: Vec<Var>,
    pub body: Term,
}

impl Function {
    pub fn uninterpreted(
        name: impl Into<Arc<str>>,
        params: Vec<Sort>,
        result: Sort,
        kind: FunKind,
    ) -> Arc<Function> {
        Arc::new(Function {
            name: name.into(),
            params,
            result,
            kind,
            def: None,
        })
    }
}

// Function names are unique within a verification task, so identity is the name.
impl PartialEq for Function {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}
impl Eq for Function {}
impl Hash for Function {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.name.hash(state)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Integer (Euclidean) division.
    Div,
    Mod,
    /// Rational division; operands and result are permissions.
    PermDiv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetOp {
    Union,
    Intersection,
    Minus,
}

/// One multi-pattern: the quantifier is instantiated when all terms match.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trigger(pub Vec<Term>);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantTerm {
    pub quantifier: Quantifier,
    pub vars: Vec<Var>,
    pub triggers: Vec<Trigger>,
    pub body: Term,
    /// Quantifier id, rendered as `:qid`.
    pub qid: Option<Arc<str>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TermNode {
    Var(Var),
    Bool(bool),
    Int(i64),
    Perm(Rational),
    Null,
    App(Arc<Function>, Vec<Term>),
    /// Application of a value map symbol to a receiver.
    VmApply(Var, Term),
    Not(Term),
    And(Vec<Term>),
    Or(Vec<Term>),
    Implies(Term, Term),
    Iff(Term, Term),
    Ite(Term, Term, Term),
    Eq(Term, Term),
    Cmp(CmpOp, Term, Term),
    Arith(ArithOp, Term, Term),
    Neg(Term),
    /// Integer to permission conversion.
    ToPerm(Term),
    SetMember(Term, Term),
    SetLit(Sort, Vec<Term>),
    SetOp(SetOp, Term, Term),
    Quant(QuantTerm),
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct TermInner {
    node: TermNode,
    sort: Sort,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Term(Arc<TermInner>);

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ill-sorted term: {0}")]
pub struct SortError(pub String);

fn expect_sort(t: &Term, sort: &Sort, ctx: &str) {
    assert!(
        t.sort() == sort,
        "{ctx}: expected {sort}, found {} in `{t}`",
        t.sort()
    );
}

// Constructors named after the operators they build; not operator impls.
#[allow(clippy::should_implement_trait)]
impl Term {
    fn mk(node: TermNode, sort: Sort) -> Term {
        Term(Arc::new(TermInner { node, sort }))
    }

    pub fn node(&self) -> &TermNode {
        &self.0.node
    }

    pub fn sort(&self) -> &Sort {
        &self.0.sort
    }

    pub fn var(v: Var) -> Term {
        let sort = v.sort.clone();
        Term::mk(TermNode::Var(v), sort)
    }

    pub fn bool(b: bool) -> Term {
        Term::mk(TermNode::Bool(b), Sort::Bool)
    }

    pub fn tt() -> Term {
        Term::bool(true)
    }

    pub fn ff() -> Term {
        Term::bool(false)
    }

    pub fn int(i: i64) -> Term {
        Term::mk(TermNode::Int(i), Sort::Int)
    }

    pub fn perm(r: Rational) -> Term {
        Term::mk(TermNode::Perm(r), Sort::Perm)
    }

    pub fn no_perm() -> Term {
        Term::perm(Rational::zero())
    }

    pub fn full_perm() -> Term {
        Term::perm(Rational::one())
    }

    pub fn null() -> Term {
        Term::mk(TermNode::Null, Sort::Ref)
    }

    pub fn app(f: &Arc<Function>, args: Vec<Term>) -> Term {
        assert_eq!(f.params.len(), args.len(), "arity of `{}`", f.name);
        for (a, s) in args.iter().zip(&f.params) {
            expect_sort(a, s, &f.name);
        }
        let sort = f.result.clone();
        Term::mk(TermNode::App(f.clone(), args), sort)
    }

    pub fn vm_apply(vm: &Var, recv: Term) -> Term {
        let value = match &vm.sort {
            Sort::ValueMap(_, v) => (**v).clone(),
            other => panic!("`{}` is not a value map but {other}", vm.name),
        };
        expect_sort(&recv, &Sort::Ref, "value map application");
        Term::mk(TermNode::VmApply(vm.clone(), recv), value)
    }

    pub fn not(t: Term) -> Term {
        expect_sort(&t, &Sort::Bool, "not");
        Term::mk(TermNode::Not(t), Sort::Bool)
    }

    pub fn and(ts: Vec<Term>) -> Term {
        match ts.len() {
            0 => Term::tt(),
            1 => ts.into_iter().next().unwrap(),
            _ => {
                for t in &ts {
                    expect_sort(t, &Sort::Bool, "and");
                }
                Term::mk(TermNode::And(ts), Sort::Bool)
            }
        }
    }

    pub fn or(ts: Vec<Term>) -> Term {
        match ts.len() {
            0 => Term::ff(),
            1 => ts.into_iter().next().unwrap(),
            _ => {
                for t in &ts {
                    expect_sort(t, &Sort::Bool, "or");
                }
                Term::mk(TermNode::Or(ts), Sort::Bool)
            }
        }
    }

    pub fn implies(a: Term, b: Term) -> Term {
        expect_sort(&a, &Sort::Bool, "implies");
        expect_sort(&b, &Sort::Bool, "implies");
        Term::mk(TermNode::Implies(a, b), Sort::Bool)
    }

    pub fn iff(a: Term, b: Term) -> Term {
        expect_sort(&a, &Sort::Bool, "iff");
        expect_sort(&b, &Sort::Bool, "iff");
        Term::mk(TermNode::Iff(a, b), Sort::Bool)
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        expect_sort(&c, &Sort::Bool, "ite condition");
        assert_eq!(a.sort(), b.sort(), "ite arms: `{a}` vs `{b}`");
        let sort = a.sort().clone();
        Term::mk(TermNode::Ite(c, a, b), sort)
    }

    pub fn eq(a: Term, b: Term) -> Term {
        assert_eq!(a.sort(), b.sort(), "equality: `{a}` vs `{b}`");
        Term::mk(TermNode::Eq(a, b), Sort::Bool)
    }

    pub fn ne(a: Term, b: Term) -> Term {
        Term::not(Term::eq(a, b))
    }

    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Term {
        assert!(
            a.sort().is_numeric() && a.sort() == b.sort(),
            "comparison: `{a}`: {} vs `{b}`: {}",
            a.sort(),
            b.sort()
        );
        Term::mk(TermNode::Cmp(op, a, b), Sort::Bool)
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::cmp(CmpOp::Lt, a, b)
    }

    pub fn le(a: Term, b: Term) -> Term {
        Term::cmp(CmpOp::Le, a, b)
    }

    pub fn arith(op: ArithOp, a: Term, b: Term) -> Term {
        let sort = match op {
            ArithOp::Div | ArithOp::Mod => {
                expect_sort(&a, &Sort::Int, "integer division");
                expect_sort(&b, &Sort::Int, "integer division");
                Sort::Int
            }
            ArithOp::PermDiv => {
                expect_sort(&a, &Sort::Perm, "permission division");
                expect_sort(&b, &Sort::Perm, "permission division");
                Sort::Perm
            }
            ArithOp::Add | ArithOp::Sub | ArithOp::Mul => {
                assert!(
                    a.sort().is_numeric() && a.sort() == b.sort(),
                    "arithmetic: `{a}`: {} vs `{b}`: {}",
                    a.sort(),
                    b.sort()
                );
                a.sort().clone()
            }
        };
        Term::mk(TermNode::Arith(op, a, b), sort)
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::arith(ArithOp::Add, a, b)
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::arith(ArithOp::Sub, a, b)
    }

    pub fn neg(a: Term) -> Term {
        assert!(a.sort().is_numeric(), "negation of {}", a.sort());
        let sort = a.sort().clone();
        Term::mk(TermNode::Neg(a), sort)
    }

    /// `min(a, b)`, encoded as `ite(a < b, a, b)`.
    pub fn min(a: Term, b: Term) -> Term {
        Term::ite(Term::lt(a.clone(), b.clone()), a, b)
    }

    pub fn to_perm(a: Term) -> Term {
        if a.sort() == &Sort::Perm {
            return a;
        }
        expect_sort(&a, &Sort::Int, "int to perm");
        if let TermNode::Int(i) = a.node() {
            return Term::perm(Rational::from_integer(*i));
        }
        Term::mk(TermNode::ToPerm(a), Sort::Perm)
    }

    pub fn set_member(elem: Term, set: Term) -> Term {
        match set.sort() {
            Sort::Set(e) if **e == *elem.sort() => {}
            other => panic!("membership of {} in {other}", elem.sort()),
        }
        Term::mk(TermNode::SetMember(elem, set), Sort::Bool)
    }

    pub fn set_lit(elem: Sort, elems: Vec<Term>) -> Term {
        for e in &elems {
            expect_sort(e, &elem, "set literal");
        }
        let sort = Sort::set_of(elem.clone());
        Term::mk(TermNode::SetLit(elem, elems), sort)
    }

    pub fn set_op(op: SetOp, a: Term, b: Term) -> Term {
        assert!(
            matches!(a.sort(), Sort::Set(_)) && a.sort() == b.sort(),
            "set operation on {} and {}",
            a.sort(),
            b.sort()
        );
        let sort = a.sort().clone();
        Term::mk(TermNode::SetOp(op, a, b), sort)
    }

    pub fn quant(q: QuantTerm) -> Term {
        expect_sort(&q.body, &Sort::Bool, "quantifier body");
        if q.vars.is_empty() {
            return q.body;
        }
        Term::mk(TermNode::Quant(q), Sort::Bool)
    }

    pub fn forall(vars: Vec<Var>, triggers: Vec<Trigger>, body: Term) -> Term {
        Term::quant(QuantTerm {
            quantifier: Quantifier::Forall,
            vars,
            triggers,
            body,
            qid: None,
        })
    }

    pub fn exists(vars: Vec<Var>, triggers: Vec<Trigger>, body: Term) -> Term {
        Term::quant(QuantTerm {
            quantifier: Quantifier::Exists,
            vars,
            triggers,
            body,
            qid: None,
        })
    }

    pub fn is_true(&self) -> bool {
        matches!(self.node(), TermNode::Bool(true))
    }

    pub fn is_false(&self) -> bool {
        matches!(self.node(), TermNode::Bool(false))
    }

    /// Syntactic zero check for permission terms.
    pub fn is_zero_perm(&self) -> bool {
        matches!(self.node(), TermNode::Perm(r) if r.is_zero())
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self.node() {
            TermNode::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn children(&self) -> Vec<&Term> {
        use TermNode::*;
        match self.node() {
            Var(_) | Bool(_) | Int(_) | Perm(_) | Null => vec![],
            App(_, args) | And(args) | Or(args) | SetLit(_, args) => args.iter().collect(),
            VmApply(_, t) | Not(t) | Neg(t) | ToPerm(t) => vec![t],
            Implies(a, b)
            | Iff(a, b)
            | Eq(a, b)
            | Cmp(_, a, b)
            | Arith(_, a, b)
            | SetMember(a, b)
            | SetOp(_, a, b) => vec![a, b],
            Ite(c, a, b) => vec![c, a, b],
            Quant(q) => {
                let mut out: Vec<&Term> = q.triggers.iter().flat_map(|t| t.0.iter()).collect();
                out.push(&q.body);
                out
            }
        }
    }

    /// Free variables (symbolic constants and unbound variables), excluding
    /// value-map heads.
    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut bound = Vec::new();
        collect_free(self, &mut bound, &mut out);
        out
    }

    /// Whether `v` occurs free in this term.
    pub fn mentions(&self, v: &Var) -> bool {
        fn go(t: &Term, v: &Var) -> bool {
            match t.node() {
                TermNode::Var(w) => w == v,
                TermNode::Quant(q) if q.vars.contains(v) => false,
                _ => t.children().into_iter().any(|c| go(c, v)),
            }
        }
        go(self, v)
    }

    /// Number of nodes, counting shared subterms once per occurrence.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    /// Visits every subterm in pre-order.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Re-derives sorts bottom-up and checks every sort constraint, including
    /// trigger well-formedness.
    pub fn check(&self) -> Result<Sort, SortError> {
        use TermNode::*;
        let err = |m: String| Err(SortError(m));
        let sort = match self.node() {
            Var(v) => v.sort.clone(),
            Bool(_) => Sort::Bool,
            Int(_) => Sort::Int,
            Perm(_) => Sort::Perm,
            Null => Sort::Ref,
            App(f, args) => {
                if f.params.len() != args.len() {
                    return err(format!("arity of {}", f.name));
                }
                for (a, s) in args.iter().zip(&f.params) {
                    if &a.check()? != s {
                        return err(format!("argument of {}", f.name));
                    }
                }
                f.result.clone()
            }
            VmApply(vm, r) => {
                if r.check()? != Sort::Ref {
                    return err("value map receiver".into());
                }
                match &vm.sort {
                    Sort::ValueMap(_, v) => (**v).clone(),
                    _ => return err("value map head".into()),
                }
            }
            Not(a) => {
                if a.check()? != Sort::Bool {
                    return err("not".into());
                }
                Sort::Bool
            }
            And(ts) | Or(ts) => {
                for t in ts {
                    if t.check()? != Sort::Bool {
                        return err("connective".into());
                    }
                }
                Sort::Bool
            }
            Implies(a, b) | Iff(a, b) => {
                if a.check()? != Sort::Bool || b.check()? != Sort::Bool {
                    return err("implication".into());
                }
                Sort::Bool
            }
            Ite(c, a, b) => {
                if c.check()? != Sort::Bool {
                    return err("ite condition".into());
                }
                let sa = a.check()?;
                if sa != b.check()? {
                    return err("ite arms".into());
                }
                sa
            }
            Eq(a, b) => {
                if a.check()? != b.check()? {
                    return err("equality".into());
                }
                Sort::Bool
            }
            Cmp(_, a, b) => {
                let sa = a.check()?;
                if !sa.is_numeric() || sa != b.check()? {
                    return err("comparison".into());
                }
                Sort::Bool
            }
            Arith(op, a, b) => {
                let (sa, sb) = (a.check()?, b.check()?);
                if sa != sb || !sa.is_numeric() {
                    return err("arithmetic".into());
                }
                match op {
                    ArithOp::Div | ArithOp::Mod if sa != Sort::Int => {
                        return err("integer division".into())
                    }
                    ArithOp::PermDiv if sa != Sort::Perm => return err("perm division".into()),
                    _ => sa,
                }
            }
            Neg(a) => {
                let s = a.check()?;
                if !s.is_numeric() {
                    return err("negation".into());
                }
                s
            }
            ToPerm(a) => {
                if a.check()? != Sort::Int {
                    return err("to_perm".into());
                }
                Sort::Perm
            }
            SetMember(e, s) => {
                let se = e.check()?;
                match s.check()? {
                    Sort::Set(inner) if *inner == se => Sort::Bool,
                    _ => return err("membership".into()),
                }
            }
            SetLit(elem, es) => {
                for e in es {
                    if &e.check()? != elem {
                        return err("set literal".into());
                    }
                }
                Sort::set_of(elem.clone())
            }
            SetOp(_, a, b) => {
                let sa = a.check()?;
                if !matches!(sa, Sort::Set(_)) || sa != b.check()? {
                    return err("set operation".into());
                }
                sa
            }
            Quant(q) => {
                if q.body.check()? != Sort::Bool {
                    return err("quantifier body".into());
                }
                for trig in &q.triggers {
                    if trig.0.is_empty() {
                        return err("empty trigger".into());
                    }
                    for t in &trig.0 {
                        t.check()?;
                    }
                    let covered: BTreeSet<_> = trig.0.iter().flat_map(|t| t.free_vars()).collect();
                    if q.vars.iter().any(|v| !covered.contains(v)) {
                        return err("trigger does not cover all bound variables".into());
                    }
                }
                Sort::Bool
            }
        };
        if &sort != self.sort() {
            return err(format!("cached sort {} differs from {sort}", self.sort()));
        }
        Ok(sort)
    }
}

fn collect_free(t: &Term, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
    match t.node() {
        TermNode::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        TermNode::Quant(q) => {
            let n = bound.len();
            bound.extend(q.vars.iter().cloned());
            for c in t.children() {
                collect_free(c, bound, out);
            }
            bound.truncate(n);
        }
        _ => {
            for c in t.children() {
                collect_free(c, bound, out);
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TermNode::*;
        let join = |ts: &[Term], sep: &str| {
            ts.iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(sep)
        };
        match self.node() {
            Var(v) => write!(f, "{}", v.name),
            Bool(b) => write!(f, "{b}"),
            Int(i) => write!(f, "{i}"),
            Perm(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Null => write!(f, "null"),
            App(fun, args) => write!(f, "{}({})", fun.name, join(args, ", ")),
            VmApply(vm, r) => write!(f, "{}({r})", vm.name),
            Not(a) => write!(f, "!({a})"),
            And(ts) => write!(f, "({})", join(ts, " && ")),
            Or(ts) => write!(f, "({})", join(ts, " || ")),
            Implies(a, b) => write!(f, "({a} ==> {b})"),
            Iff(a, b) => write!(f, "({a} <==> {b})"),
            Ite(c, a, b) => write!(f, "({c} ? {a} : {b})"),
            Eq(a, b) => write!(f, "({a} == {b})"),
            Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "({a} {s} {b})")
            }
            Arith(op, a, b) => {
                let s = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "\\",
                    ArithOp::Mod => "%",
                    ArithOp::PermDiv => "/",
                };
                write!(f, "({a} {s} {b})")
            }
            Neg(a) => write!(f, "-({a})"),
            ToPerm(a) => write!(f, "perm({a})"),
            SetMember(e, s) => write!(f, "({e} in {s})"),
            SetLit(_, es) => write!(f, "Set({})", join(es, ", ")),
            SetOp(op, a, b) => {
                let s = match op {
                    self::SetOp::Union => "union",
                    self::SetOp::Intersection => "intersection",
                    self::SetOp::Minus => "setminus",
                };
                write!(f, "({a} {s} {b})")
            }
            Quant(q) => {
                let kw = match q.quantifier {
                    Quantifier::Forall => "forall",
                    Quantifier::Exists => "exists",
                };
                let vars = q
                    .vars
                    .iter()
                    .map(|v| format!("{}: {}", v.name, v.sort))
                    .collect::<Vec<_>>()
                    .join(", ");
                write!(f, "({kw} {vars} ::")?;
                for t in &q.triggers {
                    write!(f, " {{{}}}", join(&t.0, ", "))?;
                }
                write!(f, " {})", q.body)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_is_encoded_as_ite() {
        let a = Var::new("a", Sort::Perm).term();
        let b = Var::new("b", Sort::Perm).term();
        let m = Term::min(a.clone(), b.clone());
        assert_eq!(m, Term::ite(Term::lt(a.clone(), b.clone()), a, b));
        assert_eq!(m.sort(), &Sort::Perm);
    }

    #[test]
    fn free_vars_skip_bound() {
        let x = Var::new("x", Sort::Int);
        let y = Var::new("y", Sort::Int);
        let body = Term::lt(x.term(), y.term());
        let q = Term::forall(vec![x.clone()], vec![], body);
        let fv = q.free_vars();
        assert!(fv.contains(&y));
        assert!(!fv.contains(&x));
        assert!(q.mentions(&y));
        assert!(!q.mentions(&x));
    }

    #[test]
    #[should_panic]
    fn ill_sorted_ite_panics() {
        Term::ite(Term::tt(), Term::int(1), Term::tt());
    }

    #[test]
    fn check_rejects_uncovering_trigger() {
        let x = Var::new("x", Sort::Int);
        let y = Var::new("y", Sort::Int);
        let f = Function::uninterpreted("f", vec![Sort::Int], Sort::Int, FunKind::User);
        let body = Term::lt(x.term(), y.term());
        let q = Term::forall(
            vec![x.clone(), y.clone()],
            vec![Trigger(vec![Term::app(&f, vec![x.term()])])],
            body,
        );
        assert!(q.check().is_err());
    }
}
