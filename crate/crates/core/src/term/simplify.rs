use num_traits::{One, Zero};

use super::{ArithOp, CmpOp, Rational, Sort, Term, TermNode};

impl Term {
    /// Local, sort- and equivalence-preserving rewrites: constant folding,
    /// neutral elements and trivial conditionals. No context is consulted.
    pub fn simplify(&self) -> Term {
        let cs = self.children();
        let rebuilt = if cs.is_empty() {
            self.clone()
        } else {
            let new: Vec<Term> = cs.into_iter().map(Term::simplify).collect();
            self.with_children(new)
        };
        rewrite(rebuilt)
    }
}

fn num_lit(t: &Term) -> Option<Rational> {
    match t.node() {
        TermNode::Int(i) => Some(Rational::from_integer(*i)),
        TermNode::Perm(r) => Some(*r),
        _ => None,
    }
}

fn num_term(sort: &Sort, r: Rational) -> Term {
    match sort {
        Sort::Int => Term::int(r.to_integer()),
        _ => Term::perm(r),
    }
}

fn is_lit(t: &Term, v: i64) -> bool {
    num_lit(t) == Some(Rational::from_integer(v))
}

fn rewrite(t: Term) -> Term {
    use TermNode::*;
    match t.node() {
        Not(a) => match a.node() {
            Bool(b) => Term::bool(!b),
            Not(inner) => inner.clone(),
            _ => t,
        },
        And(ts) => {
            let mut out = Vec::new();
            for x in ts {
                match x.node() {
                    Bool(true) => {}
                    Bool(false) => return Term::ff(),
                    And(inner) => out.extend(inner.iter().cloned()),
                    _ => out.push(x.clone()),
                }
            }
            dedup(&mut out);
            Term::and(out)
        }
        Or(ts) => {
            let mut out = Vec::new();
            for x in ts {
                match x.node() {
                    Bool(false) => {}
                    Bool(true) => return Term::tt(),
                    Or(inner) => out.extend(inner.iter().cloned()),
                    _ => out.push(x.clone()),
                }
            }
            dedup(&mut out);
            Term::or(out)
        }
        Implies(a, b) => {
            if a.is_true() {
                b.clone()
            } else if a.is_false() || b.is_true() || a == b {
                Term::tt()
            } else if b.is_false() {
                Term::not(a.clone()).simplify()
            } else {
                t
            }
        }
        Iff(a, b) => {
            if a == b {
                Term::tt()
            } else if a.is_true() {
                b.clone()
            } else if b.is_true() {
                a.clone()
            } else {
                t
            }
        }
        Ite(c, a, b) => {
            if c.is_true() {
                a.clone()
            } else if c.is_false() || a == b {
                b.clone()
            } else if a.is_true() && b.is_false() {
                c.clone()
            } else if a.is_false() && b.is_true() {
                Term::not(c.clone()).simplify()
            } else {
                t
            }
        }
        Eq(a, b) => {
            if a == b {
                return Term::tt();
            }
            match (a.node(), b.node()) {
                (Bool(x), Bool(y)) => Term::bool(x == y),
                (Int(x), Int(y)) => Term::bool(x == y),
                (Perm(x), Perm(y)) => Term::bool(x == y),
                _ => t,
            }
        }
        Cmp(op, a, b) => match (num_lit(a), num_lit(b)) {
            (Some(x), Some(y)) => Term::bool(match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
            }),
            _ if a == b => Term::bool(matches!(op, CmpOp::Le | CmpOp::Ge)),
            _ => t,
        },
        Arith(op, a, b) => {
            let sort = t.sort().clone();
            if let (Some(x), Some(y)) = (num_lit(a), num_lit(b)) {
                let folded = match op {
                    ArithOp::Add => Some(x + y),
                    ArithOp::Sub => Some(x - y),
                    ArithOp::Mul => Some(x * y),
                    ArithOp::PermDiv if !y.is_zero() => Some(x / y),
                    ArithOp::Div if !y.is_zero() => Some(Rational::from_integer(
                        x.to_integer().div_euclid(y.to_integer()),
                    )),
                    ArithOp::Mod if !y.is_zero() => Some(Rational::from_integer(
                        x.to_integer().rem_euclid(y.to_integer()),
                    )),
                    _ => None,
                };
                if let Some(r) = folded {
                    return num_term(&sort, r);
                }
            }
            match op {
                ArithOp::Add if is_lit(a, 0) => b.clone(),
                ArithOp::Add | ArithOp::Sub if is_lit(b, 0) => a.clone(),
                ArithOp::Sub if a == b => num_term(&sort, Rational::zero()),
                ArithOp::Mul if is_lit(a, 1) => b.clone(),
                ArithOp::Mul if is_lit(b, 1) => a.clone(),
                ArithOp::Mul if is_lit(a, 0) || is_lit(b, 0) => num_term(&sort, Rational::zero()),
                ArithOp::PermDiv if num_lit(b) == Some(Rational::one()) => a.clone(),
                _ => t,
            }
        }
        Neg(a) => match num_lit(a) {
            Some(x) => num_term(t.sort(), -x),
            None => t,
        },
        Quant(q) => {
            if q.body.is_true() || q.body.is_false() {
                q.body.clone()
            } else {
                t
            }
        }
        _ => t,
    }
}

fn dedup(ts: &mut Vec<Term>) {
    let mut seen = std::collections::HashSet::new();
    ts.retain(|t| seen.insert(t.clone()));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Var;

    #[test]
    fn ite_with_equal_arms_collapses() {
        let c = Var::new("c", Sort::Bool).term();
        let t = Term::ite(c, Term::full_perm(), Term::full_perm());
        assert_eq!(t.simplify(), Term::full_perm());
    }

    #[test]
    fn min_is_not_rewritten_without_context() {
        let q = Var::new("q", Sort::Perm).term();
        let t = Term::min(q, Term::no_perm());
        assert_eq!(t.simplify(), t);
    }

    #[test]
    fn literal_comparison_folds() {
        assert_eq!(Term::lt(Term::int(0), Term::int(1)).simplify(), Term::tt());
    }

    #[test]
    fn self_subtraction_is_zero() {
        let c = Var::new("c", Sort::Bool).term();
        let p = Term::ite(c, Term::full_perm(), Term::no_perm());
        let t = Term::sub(p.clone(), p);
        assert!(t.simplify().is_zero_perm());
        assert!(Term::sub(Term::full_perm(), Term::full_perm())
            .simplify()
            .is_zero_perm());
    }

    #[test]
    fn euclidean_division_matches_smt_semantics() {
        let t = Term::arith(ArithOp::Div, Term::int(-7), Term::int(2));
        assert_eq!(t.simplify(), Term::int(-4));
        let m = Term::arith(ArithOp::Mod, Term::int(-7), Term::int(2));
        assert_eq!(m.simplify(), Term::int(1));
    }
}
