//! Rendering of sorts and terms to SMT-LIB 2 text, and collection of the
//! symbols a term needs declared.

use std::collections::HashSet;
use std::fmt::Write;
use std::sync::Arc;

use num_traits::Signed;

use crate::term::{ArithOp, CmpOp, FunKind, Function, Quantifier, Rational, SetOp, Sort, Term, TermNode, Var};

/// Names that must not be used verbatim for user symbols.
const RESERVED: &[&str] = &[
    "and", "or", "not", "xor", "=>", "ite", "distinct", "true", "false", "forall", "exists",
    "let", "match", "as", "par", "_", "!", "select", "store", "const", "div", "mod", "abs",
    "to_real", "to_int", "is_int", "union", "intersection", "setminus", "complement", "subset",
    "Int", "Real", "Bool", "Array", "String", "Seq", "Set", "BitVec", "assert", "check-sat",
    "push", "pop", "declare-fun", "declare-const", "declare-sort", "define-fun", "map",
    "lambda", "pattern", "qid", "weight", "min", "max",
];

/// SMT name of a user-declared symbol (domain sort, domain function,
/// heap-dependent function). Colliding names get a `U$` prefix, which cannot
/// be written in source programs.
pub fn user_name(name: &str) -> String {
    if RESERVED.contains(&name) {
        format!("U${name}")
    } else {
        name.to_string()
    }
}

pub const REF_SORT: &str = "$Ref";
pub const SNAP_SORT: &str = "$Snap";
pub const NULL: &str = "$null";

pub fn pvm_sort(field: &str) -> String {
    format!("$PVM.{field}")
}

pub fn to_snap(field: &str) -> String {
    format!("$toSnap.{field}")
}

pub fn domain_fn(field: &str) -> String {
    format!("$domain.{field}")
}

pub fn apply_fn(field: &str) -> String {
    format!("$apply.{field}")
}

pub fn sort(s: &Sort) -> String {
    match s {
        Sort::Bool => "Bool".into(),
        Sort::Int => "Int".into(),
        Sort::Perm => "Real".into(),
        Sort::Ref => REF_SORT.into(),
        Sort::Snap => SNAP_SORT.into(),
        Sort::Set(e) => format!("(Array {} Bool)", sort(e)),
        Sort::Pvm(f) => pvm_sort(f),
        Sort::Domain(d) => user_name(d),
        Sort::ValueMap(f, _) => panic!("value map sort for `{f}` is not first-class"),
    }
}

fn function_name(f: &Function) -> String {
    match f.kind {
        FunKind::User => user_name(&f.name),
        FunKind::Fresh | FunKind::Builtin => f.name.to_string(),
    }
}

fn rational(out: &mut String, r: &Rational) {
    let (n, d) = (r.numer().abs(), *r.denom());
    let neg = r.is_negative();
    if neg {
        out.push_str("(- ");
    }
    if d == 1 {
        let _ = write!(out, "{n}.0");
    } else {
        let _ = write!(out, "(/ {n}.0 {d}.0)");
    }
    if neg {
        out.push(')');
    }
}

/// Renders terms; `no_triggers` drops every pattern annotation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Renderer {
    pub no_triggers: bool,
}

impl Renderer {
    pub fn term(&self, t: &Term) -> String {
        let mut out = String::new();
        self.write(&mut out, t);
        out
    }

    fn nary(&self, out: &mut String, head: &str, args: &[&Term]) {
        out.push('(');
        out.push_str(head);
        for a in args {
            out.push(' ');
            self.write(out, a);
        }
        out.push(')');
    }

    pub fn write(&self, out: &mut String, t: &Term) {
        use TermNode::*;
        match t.node() {
            Var(v) => out.push_str(&v.name),
            Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Int(i) => {
                if *i < 0 {
                    let _ = write!(out, "(- {})", i.unsigned_abs());
                } else {
                    let _ = write!(out, "{i}");
                }
            }
            Perm(r) => rational(out, r),
            Null => out.push_str(NULL),
            App(f, args) => {
                if args.is_empty() {
                    out.push_str(&function_name(f));
                } else {
                    self.nary(out, &function_name(f), &args.iter().collect::<Vec<_>>());
                }
            }
            VmApply(vm, r) => self.nary(out, &vm.name, &[r]),
            Not(a) => self.nary(out, "not", &[a]),
            And(ts) => self.nary(out, "and", &ts.iter().collect::<Vec<_>>()),
            Or(ts) => self.nary(out, "or", &ts.iter().collect::<Vec<_>>()),
            Implies(a, b) => self.nary(out, "=>", &[a, b]),
            Iff(a, b) | Eq(a, b) => self.nary(out, "=", &[a, b]),
            Ite(c, a, b) => self.nary(out, "ite", &[c, a, b]),
            Cmp(op, a, b) => {
                let s = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                self.nary(out, s, &[a, b])
            }
            Arith(op, a, b) => {
                let s = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "div",
                    ArithOp::Mod => "mod",
                    ArithOp::PermDiv => "/",
                };
                self.nary(out, s, &[a, b])
            }
            Neg(a) => self.nary(out, "-", &[a]),
            ToPerm(a) => self.nary(out, "to_real", &[a]),
            SetMember(e, s) => self.nary(out, "select", &[s, e]),
            SetLit(elem, es) => {
                let mut acc = format!("((as const (Array {} Bool)) false)", sort(elem));
                for e in es {
                    let mut item = String::new();
                    self.write(&mut item, e);
                    acc = format!("(store {acc} {item} true)");
                }
                out.push_str(&acc);
            }
            SetOp(op, a, b) => {
                let s = match op {
                    self::SetOp::Union => "union",
                    self::SetOp::Intersection => "intersection",
                    self::SetOp::Minus => "setminus",
                };
                self.nary(out, s, &[a, b])
            }
            Quant(q) => {
                let kw = match q.quantifier {
                    Quantifier::Forall => "forall",
                    Quantifier::Exists => "exists",
                };
                let _ = write!(out, "({kw} (");
                for (i, v) in q.vars.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    let _ = write!(out, "({} {})", v.name, sort(&v.sort));
                }
                out.push_str(") ");
                let patterns = !self.no_triggers && !q.triggers.is_empty();
                if patterns || q.qid.is_some() {
                    out.push_str("(! ");
                    self.write(out, &q.body);
                    if patterns {
                        for trig in &q.triggers {
                            out.push_str(" :pattern (");
                            for (i, p) in trig.0.iter().enumerate() {
                                if i > 0 {
                                    out.push(' ');
                                }
                                self.write(out, p);
                            }
                            out.push(')');
                        }
                    }
                    if let Some(qid) = &q.qid {
                        let _ = write!(out, " :qid |{qid}|");
                    }
                    out.push(')');
                } else {
                    self.write(out, &q.body);
                }
                out.push(')');
            }
        }
    }
}

/// A symbol that has to be declared before a term mentioning it is sent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Decl {
    Const(Var),
    /// Value map `Ref -> T`, declared as a unary function.
    ValueMap(Var),
    /// Fresh uninterpreted function or `define-fun` macro.
    Fun(Arc<Function>),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Const(v) | Decl::ValueMap(v) => &v.name,
            Decl::Fun(f) => &f.name,
        }
    }

    pub fn render(&self, r: &Renderer) -> String {
        match self {
            Decl::Const(v) => format!("(declare-const {} {})", v.name, sort(&v.sort)),
            Decl::ValueMap(v) => match &v.sort {
                Sort::ValueMap(_, value) => {
                    format!("(declare-fun {} ({REF_SORT}) {})", v.name, sort(value))
                }
                other => panic!("value map `{}` has sort {other}", v.name),
            },
            Decl::Fun(f) => match &f.def {
                None => {
                    let params: Vec<String> = f.params.iter().map(sort).collect();
                    format!(
                        "(declare-fun {} ({}) {})",
                        f.name,
                        params.join(" "),
                        sort(&f.result)
                    )
                }
                Some(def) => {
                    let params: Vec<String> = def
                        .params
                        .iter()
                        .map(|p| format!("({} {})", p.name, sort(&p.sort)))
                        .collect();
                    format!(
                        "(define-fun {} ({}) {} {})",
                        f.name,
                        params.join(" "),
                        sort(&f.result),
                        r.term(&def.body)
                    )
                }
            },
        }
    }
}

/// Collects the declarations `t` depends on, dependencies first, skipping
/// bound variables and names in `skip`.
pub fn collect_decls(t: &Term, skip: &dyn Fn(&str) -> bool, out: &mut Vec<Decl>) {
    let mut seen: HashSet<Arc<str>> = out.iter().map(|d| Arc::from(d.name())).collect();
    let mut bound = Vec::new();
    collect(t, skip, &mut bound, &mut seen, out);
}

fn collect(
    t: &Term,
    skip: &dyn Fn(&str) -> bool,
    bound: &mut Vec<Var>,
    seen: &mut HashSet<Arc<str>>,
    out: &mut Vec<Decl>,
) {
    match t.node() {
        TermNode::Var(v) => {
            if !bound.contains(v) && !skip(&v.name) && seen.insert(v.name.clone()) {
                out.push(Decl::Const(v.clone()));
            }
        }
        TermNode::VmApply(vm, r) => {
            if !skip(&vm.name) && seen.insert(vm.name.clone()) {
                out.push(Decl::ValueMap(vm.clone()));
            }
            collect(r, skip, bound, seen, out);
        }
        TermNode::App(f, args) => {
            for a in args {
                collect(a, skip, bound, seen, out);
            }
            if f.kind == FunKind::Fresh && !skip(&f.name) && !seen.contains(&f.name) {
                if let Some(def) = &f.def {
                    let n = bound.len();
                    bound.extend(def.params.iter().cloned());
                    collect(&def.body, skip, bound, seen, out);
                    bound.truncate(n);
                }
                seen.insert(f.name.clone());
                out.push(Decl::Fun(f.clone()));
            }
        }
        TermNode::Quant(q) => {
            let n = bound.len();
            bound.extend(q.vars.iter().cloned());
            for c in t.children() {
                collect(c, skip, bound, seen, out);
            }
            bound.truncate(n);
        }
        _ => {
            for c in t.children() {
                collect(c, skip, bound, seen, out);
            }
        }
    }
}

/// Number of quantifier nodes in a term.
pub fn count_quantifiers(t: &Term) -> usize {
    let mut n = 0;
    t.visit(&mut |s| {
        if matches!(s.node(), TermNode::Quant(_)) {
            n += 1;
        }
    });
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{SymbolPool, Trigger};

    #[test]
    fn literals_render_as_smt() {
        let r = Renderer::default();
        assert_eq!(r.term(&Term::int(-3)), "(- 3)");
        assert_eq!(r.term(&Term::perm(Rational::new(1, 2))), "(/ 1.0 2.0)");
        assert_eq!(r.term(&Term::perm(Rational::new(-3, 4))), "(- (/ 3.0 4.0))");
        assert_eq!(r.term(&Term::full_perm()), "1.0");
        assert_eq!(r.term(&Term::null()), "$null");
    }

    #[test]
    fn quantifier_patterns_can_be_dropped() {
        let f = Function::uninterpreted("f", vec![Sort::Int], Sort::Int, FunKind::User);
        let x = Var::new("x", Sort::Int);
        let fx = Term::app(&f, vec![x.term()]);
        let q = Term::forall(
            vec![x.clone()],
            vec![Trigger(vec![fx.clone()])],
            Term::lt(Term::int(0), fx),
        );
        assert_eq!(
            Renderer::default().term(&q),
            "(forall ((x Int)) (! (< 0 (f x)) :pattern ((f x))))"
        );
        assert_eq!(
            Renderer { no_triggers: true }.term(&q),
            "(forall ((x Int)) (< 0 (f x)))"
        );
    }

    #[test]
    fn reserved_user_names_are_mangled() {
        assert_eq!(user_name("Array"), "U$Array");
        assert_eq!(user_name("loc"), "loc");
        assert_eq!(sort(&Sort::Domain("Array".into())), "U$Array");
    }

    #[test]
    fn declarations_come_dependencies_first() {
        let mut pool = SymbolPool::new();
        let y = pool.fresh("y", Sort::Int);
        let r = Var::new("r", Sort::Int);
        let inner = pool.define("q", vec![r.clone()], Term::add(r.term(), y.term()));
        let outer = pool.define("p", vec![r.clone()], Term::app(&inner, vec![r.term()]));
        let t = Term::eq(Term::app(&outer, vec![Term::int(1)]), Term::int(2));
        let mut decls = Vec::new();
        collect_decls(&t, &|_| false, &mut decls);
        let names: Vec<&str> = decls.iter().map(|d| d.name()).collect();
        assert_eq!(names, vec!["y@0", "q@0", "p@0"]);
        assert_eq!(
            decls[1].render(&Renderer::default()),
            "(define-fun q@0 ((r Int)) Int (+ r y@0))"
        );
    }
}
