use std::collections::{BTreeMap, BTreeSet};

use super::{QuantTerm, Term, TermNode, Trigger, Var};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubstError {
    #[error("cannot substitute `{replacement}` of sort {found} for `{var}` of sort {expected}")]
    SortMismatch {
        var: String,
        expected: String,
        replacement: String,
        found: String,
    },
}

impl Term {
    /// Rebuilds this node with the given children, in the order returned by
    /// [`Term::children`].
    pub(crate) fn with_children(&self, cs: Vec<Term>) -> Term {
        use TermNode::*;
        let mut it = cs.into_iter();
        let mut next = || it.next().expect("child count matches node shape");
        match self.node() {
            Var(_) | Bool(_) | Int(_) | Perm(_) | Null => self.clone(),
            App(f, args) => Term::app(f, (0..args.len()).map(|_| next()).collect()),
            And(ts) => Term::and((0..ts.len()).map(|_| next()).collect()),
            Or(ts) => Term::or((0..ts.len()).map(|_| next()).collect()),
            SetLit(s, ts) => Term::set_lit(s.clone(), (0..ts.len()).map(|_| next()).collect()),
            VmApply(vm, _) => Term::vm_apply(vm, next()),
            Not(_) => Term::not(next()),
            Neg(_) => Term::neg(next()),
            ToPerm(_) => Term::to_perm(next()),
            Implies(..) => {
                let a = next();
                Term::implies(a, next())
            }
            Iff(..) => {
                let a = next();
                Term::iff(a, next())
            }
            Eq(..) => {
                let a = next();
                Term::eq(a, next())
            }
            Cmp(op, ..) => {
                let a = next();
                Term::cmp(*op, a, next())
            }
            Arith(op, ..) => {
                let a = next();
                Term::arith(*op, a, next())
            }
            SetMember(..) => {
                let a = next();
                Term::set_member(a, next())
            }
            SetOp(op, ..) => {
                let a = next();
                Term::set_op(*op, a, next())
            }
            Ite(..) => {
                let c = next();
                let a = next();
                Term::ite(c, a, next())
            }
            Quant(q) => {
                let triggers = q
                    .triggers
                    .iter()
                    .map(|t| Trigger((0..t.0.len()).map(|_| next()).collect()))
                    .collect();
                Term::quant(QuantTerm {
                    quantifier: q.quantifier,
                    vars: q.vars.clone(),
                    triggers,
                    body: next(),
                    qid: q.qid.clone(),
                })
            }
        }
    }

    /// Capture-avoiding simultaneous substitution.
    pub fn substitute(&self, bindings: &BTreeMap<Var, Term>) -> Result<Term, SubstError> {
        for (v, t) in bindings {
            if &v.sort != t.sort() {
                return Err(SubstError::SortMismatch {
                    var: v.name.to_string(),
                    expected: v.sort.to_string(),
                    replacement: t.to_string(),
                    found: t.sort().to_string(),
                });
            }
        }
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        Ok(subst_rec(self, bindings))
    }

    /// Substitutes a single variable.
    pub fn subst1(&self, v: &Var, t: &Term) -> Term {
        let mut b = BTreeMap::new();
        b.insert(v.clone(), t.clone());
        self.substitute(&b).expect("sort-preserving single substitution")
    }
}

fn subst_rec(t: &Term, bindings: &BTreeMap<Var, Term>) -> Term {
    match t.node() {
        TermNode::Var(v) => bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
        TermNode::Quant(q) => {
            let mut inner: BTreeMap<Var, Term> = bindings
                .iter()
                .filter(|(v, _)| !q.vars.contains(v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect();
            let relevant: BTreeMap<Var, Term> = {
                let fv = t.free_vars();
                inner
                    .iter()
                    .filter(|(v, _)| fv.contains(*v))
                    .map(|(v, t)| (v.clone(), t.clone()))
                    .collect()
            };
            if relevant.is_empty() {
                return t.clone();
            }
            let incoming: BTreeSet<Var> = relevant.values().flat_map(|r| r.free_vars()).collect();
            let mut taken: BTreeSet<String> = incoming.iter().map(|v| v.name.to_string()).collect();
            taken.extend(t.free_vars().iter().map(|v| v.name.to_string()));
            taken.extend(q.vars.iter().map(|v| v.name.to_string()));
            let mut vars = Vec::with_capacity(q.vars.len());
            for v in &q.vars {
                if incoming.iter().any(|w| w.name == v.name) {
                    let mut name = format!("{}'", v.name);
                    while taken.contains(&name) {
                        name.push('\'');
                    }
                    taken.insert(name.clone());
                    let renamed = Var::new(name, v.sort.clone());
                    inner.insert(v.clone(), renamed.term());
                    vars.push(renamed);
                } else {
                    vars.push(v.clone());
                }
            }
            let triggers = q
                .triggers
                .iter()
                .map(|tr| Trigger(tr.0.iter().map(|x| subst_rec(x, &inner)).collect()))
                .collect();
            Term::quant(QuantTerm {
                quantifier: q.quantifier,
                vars,
                triggers,
                body: subst_rec(&q.body, &inner),
                qid: q.qid.clone(),
            })
        }
        _ => {
            let cs = t.children();
            if cs.is_empty() {
                return t.clone();
            }
            let new: Vec<Term> = cs.into_iter().map(|c| subst_rec(c, bindings)).collect();
            t.with_children(new)
        }
    }
}
