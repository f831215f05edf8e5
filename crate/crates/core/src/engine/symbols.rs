//! Program-level symbol tables and the translation of heap-independent
//! expressions (domain axioms, operators) to terms.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::ast::checked::{Assertion, CheckedProgram};
use crate::ast::{BinOp, Expr, ExprKind, QuantKind, Type, UnOp};
use crate::smt::triggers::user_or_inferred;
use crate::smt::{Background, PvmSymbols};
use crate::term::{ArithOp, CmpOp, FunKind, Function, Rational, SetOp, Sort, Term, Trigger, Var};

pub fn type_sort(t: &Type) -> Sort {
    match t {
        Type::Int => Sort::Int,
        Type::Bool => Sort::Bool,
        Type::Ref => Sort::Ref,
        Type::Perm => Sort::Perm,
        Type::Set(e) => Sort::set_of(type_sort(e)),
        Type::Domain(d) => Sort::Domain(d.as_str().into()),
    }
}

/// What a snapshot-carrying conjunct contributes to a snapshot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SnapPart {
    /// An ISC over a field: a partial value map.
    Isc(Arc<str>),
    /// A single field location: its value.
    Acc(Arc<str>, Sort),
    /// A nested predicate instance: its snapshot.
    Pred,
}

/// Snapshot parts of a conjunct list, in order; pure conjuncts contribute none.
pub fn snap_parts(prog: &CheckedProgram, assertions: &[Assertion]) -> Vec<SnapPart> {
    assertions
        .iter()
        .filter_map(|a| match a {
            Assertion::Pure(_) => None,
            Assertion::Isc(i) => Some(SnapPart::Isc(i.field.as_str().into())),
            Assertion::Acc(a) => {
                let ty = prog.field_type(&a.field).expect("declared field");
                Some(SnapPart::Acc(a.field.as_str().into(), type_sort(ty)))
            }
            Assertion::Pred(_) => Some(SnapPart::Pred),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct HeapFunction {
    /// Parameters first, then one snapshot argument per part.
    pub smt: Arc<Function>,
    pub parts: Vec<SnapPart>,
}

#[derive(Clone, Debug)]
pub struct Symbols {
    pub background: Background,
    pub domain_fns: HashMap<String, Arc<Function>>,
    pub heap_fns: HashMap<String, HeapFunction>,
    /// Per predicate: snapshot parts and their projection functions `Snap -> part`.
    pub pred_parts: HashMap<String, Vec<(SnapPart, Arc<Function>)>>,
    pub field_sorts: HashMap<String, Sort>,
}

fn part_sort(p: &SnapPart) -> Sort {
    match p {
        SnapPart::Isc(f) => Sort::Pvm(f.clone()),
        SnapPart::Acc(_, s) => s.clone(),
        SnapPart::Pred => Sort::Snap,
    }
}

/// Sort of a part when passed as a function argument; value maps travel as `Snap`.
fn arg_sort(p: &SnapPart) -> Sort {
    match p {
        SnapPart::Isc(_) => Sort::Snap,
        other => part_sort(other),
    }
}

impl Symbols {
    pub fn new(prog: &CheckedProgram) -> Result<Symbols, String> {
        let field_sorts: HashMap<String, Sort> = prog
            .fields
            .iter()
            .map(|f| (f.name.clone(), type_sort(&f.ty)))
            .collect();
        let mut background = Background::default();
        let mut domain_fns = HashMap::new();
        for d in &prog.domains {
            background.sorts.push(d.name.as_str().into());
            for f in &d.functions {
                let fun = Function::uninterpreted(
                    f.name.as_str(),
                    f.params.iter().map(|p| type_sort(&p.ty)).collect(),
                    type_sort(&f.result),
                    FunKind::User,
                );
                background.functions.push(fun.clone());
                domain_fns.insert(f.name.clone(), fun);
            }
        }

        let mut pvm_fields: BTreeSet<String> = BTreeSet::new();
        let mut collect = |asserts: &[Assertion]| {
            for a in asserts {
                if let Assertion::Isc(i) = a {
                    pvm_fields.insert(i.field.clone());
                }
            }
        };
        for f in &prog.functions {
            collect(&f.pres);
        }
        for p in &prog.predicates {
            if let Some(b) = &p.body {
                collect(b);
            }
        }
        for f in &pvm_fields {
            background.pvm.push(PvmSymbols::new(f, field_sorts[f].clone()));
        }

        let mut heap_fns = HashMap::new();
        for f in &prog.functions {
            let parts = snap_parts(prog, &f.pres);
            let mut params: Vec<Sort> = f.params.iter().map(|p| type_sort(&p.ty)).collect();
            params.extend(parts.iter().map(arg_sort));
            let smt = Function::uninterpreted(f.name.as_str(), params, type_sort(&f.result), FunKind::User);
            background.functions.push(smt.clone());
            heap_fns.insert(f.name.clone(), HeapFunction { smt, parts });
        }

        let mut pred_parts = HashMap::new();
        for p in &prog.predicates {
            let parts = p.body.as_deref().map(|b| snap_parts(prog, b)).unwrap_or_default();
            let projections: Vec<(SnapPart, Arc<Function>)> = parts
                .into_iter()
                .enumerate()
                .map(|(k, part)| {
                    let proj = Function::uninterpreted(
                        format!("$snap.{}.{k}", p.name),
                        vec![Sort::Snap],
                        part_sort(&part),
                        FunKind::Builtin,
                    );
                    background.functions.push(proj.clone());
                    (part, proj)
                })
                .collect();
            pred_parts.insert(p.name.clone(), projections);
        }

        let mut syms = Symbols {
            background,
            domain_fns,
            heap_fns,
            pred_parts,
            field_sorts,
        };
        let mut axioms = Vec::new();
        for d in &prog.domains {
            for ax in &d.axioms {
                let t = syms
                    .translate_pure(&ax.body, &HashMap::new())
                    .map_err(|m| format!("{}: {m}", ax.pos))?;
                axioms.push((ax.name.clone(), t));
            }
        }
        syms.background.axioms = axioms;
        Ok(syms)
    }

    pub fn field_sort(&self, field: &str) -> Sort {
        self.field_sorts[field].clone()
    }

    /// Translates a heap-independent expression; `env` binds variables.
    pub fn translate_pure(&self, e: &Expr, env: &HashMap<String, Term>) -> Result<Term, String> {
        use ExprKind::*;
        Ok(match &e.kind {
            Int(i) => Term::int(*i),
            Bool(b) => Term::bool(*b),
            Null => Term::null(),
            FullPerm => Term::full_perm(),
            NoPerm => Term::no_perm(),
            Var(x) => env
                .get(x)
                .cloned()
                .ok_or_else(|| format!("unbound variable `{x}`"))?,
            Call(name, args) => {
                let f = self
                    .domain_fns
                    .get(name)
                    .ok_or_else(|| format!("`{name}` is not a domain function"))?;
                let args = args
                    .iter()
                    .map(|a| self.translate_pure(a, env))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                apply(f, args)
            }
            Unary(op, a) => unary(*op, self.translate_pure(a, env)?),
            Binary(op, a, b) => binary(*op, self.translate_pure(a, env)?, self.translate_pure(b, env)?),
            Cond(c, a, b) => cond(
                self.translate_pure(c, env)?,
                self.translate_pure(a, env)?,
                self.translate_pure(b, env)?,
            ),
            SetLit(ty, elems) => {
                let elem = type_sort(ty.as_ref().ok_or("set literal without element type")?);
                let elems = elems
                    .iter()
                    .map(|x| self.translate_pure(x, env).map(|t| coerce(t, &elem)))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Term::set_lit(elem, elems)
            }
            Quant(kind, vars, trigs, body) => {
                let mut env = env.clone();
                let bound: Vec<crate::term::Var> = vars
                    .iter()
                    .map(|(n, t)| crate::term::Var::new(format!("{n}$"), type_sort(t)))
                    .collect();
                for ((n, _), v) in vars.iter().zip(&bound) {
                    env.insert(n.clone(), v.term());
                }
                let body = self.translate_pure(body, &env)?;
                let user = trigs
                    .iter()
                    .map(|ts| {
                        ts.iter()
                            .map(|t| self.translate_pure(t, &env))
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map(Trigger)
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let choice = user_or_inferred(user, &body, &bound);
                quantify(*kind, bound, choice.triggers, body)
            }
            Result | Field(..) | Old(..) | Acc(..) => {
                return Err(format!("`{e}` is not allowed in a heap-independent context"))
            }
        })
    }
}

pub fn quantify(kind: QuantKind, vars: Vec<Var>, triggers: Vec<Trigger>, body: Term) -> Term {
    match kind {
        QuantKind::Forall => Term::forall(vars, triggers, body),
        QuantKind::Exists => Term::exists(vars, triggers, body),
    }
}

/// Converts an integer to a permission where a permission is expected.
pub fn coerce(t: Term, want: &Sort) -> Term {
    if want == &Sort::Perm && t.sort() == &Sort::Int {
        Term::to_perm(t)
    } else {
        t
    }
}

fn unify_numeric(a: Term, b: Term) -> (Term, Term) {
    if a.sort() != b.sort() && a.sort().is_numeric() && b.sort().is_numeric() {
        (Term::to_perm(a), Term::to_perm(b))
    } else {
        (a, b)
    }
}

/// Applies a function, coercing integer arguments to permission parameters.
pub fn apply(f: &Arc<Function>, args: Vec<Term>) -> Term {
    let args = args
        .into_iter()
        .zip(&f.params)
        .map(|(a, s)| coerce(a, s))
        .collect();
    Term::app(f, args)
}

pub fn unary(op: UnOp, a: Term) -> Term {
    match op {
        UnOp::Not => Term::not(a),
        UnOp::Neg => match a.node() {
            crate::term::TermNode::Int(i) => Term::int(-i),
            _ => Term::neg(a),
        },
    }
}

pub fn cond(c: Term, a: Term, b: Term) -> Term {
    let (a, b) = unify_numeric(a, b);
    Term::ite(c, a, b)
}

pub fn binary(op: BinOp, a: Term, b: Term) -> Term {
    use BinOp::*;
    match op {
        Add | Sub | Mul => {
            let (a, b) = unify_numeric(a, b);
            let op = match op {
                Add => ArithOp::Add,
                Sub => ArithOp::Sub,
                _ => ArithOp::Mul,
            };
            Term::arith(op, a, b)
        }
        Div => {
            // Division of two literals is a permission literal.
            if let (Some(n), Some(d)) = (int_lit(&a), int_lit(&b)) {
                if d != 0 {
                    return Term::perm(Rational::new(n, d));
                }
            }
            Term::arith(ArithOp::PermDiv, Term::to_perm(a), Term::to_perm(b))
        }
        IntDiv => Term::arith(ArithOp::Div, a, b),
        Mod => Term::arith(ArithOp::Mod, a, b),
        Eq | Ne => {
            let (a, b) = unify_numeric(a, b);
            let eq = Term::eq(a, b);
            if op == Ne {
                Term::not(eq)
            } else {
                eq
            }
        }
        Lt | Le | Gt | Ge => {
            let (a, b) = unify_numeric(a, b);
            let op = match op {
                Lt => CmpOp::Lt,
                Le => CmpOp::Le,
                Gt => CmpOp::Gt,
                _ => CmpOp::Ge,
            };
            Term::cmp(op, a, b)
        }
        And => Term::and(vec![a, b]),
        Or => Term::or(vec![a, b]),
        Implies => Term::implies(a, b),
        Iff => Term::iff(a, b),
        In => {
            let a = match b.sort() {
                Sort::Set(e) => coerce(a, e),
                _ => a,
            };
            Term::set_member(a, b)
        }
        Union => Term::set_op(SetOp::Union, a, b),
        Intersection => Term::set_op(SetOp::Intersection, a, b),
        SetMinus => Term::set_op(SetOp::Minus, a, b),
    }
}

fn int_lit(t: &Term) -> Option<i64> {
    match t.node() {
        crate::term::TermNode::Int(i) => Some(*i),
        _ => None,
    }
}
