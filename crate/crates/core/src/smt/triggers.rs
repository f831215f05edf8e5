//! Trigger selection for quantifiers sent to the solver.

use std::collections::{BTreeMap, BTreeSet};

use crate::term::{Term, TermNode, Trigger, Var};

/// Where the patterns of a quantifier come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    User,
    /// Fixed by the encoding (inverse axioms, value map definitions, ...).
    Schema,
    Inferred,
    /// No patterns; the solver picks its own.
    SolverAuto,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriggerChoice {
    pub triggers: Vec<Trigger>,
    pub provenance: Provenance,
}

impl TriggerChoice {
    fn auto() -> Self {
        TriggerChoice {
            triggers: Vec::new(),
            provenance: Provenance::SolverAuto,
        }
    }
}

fn mentions_any(t: &Term, vars: &[Var]) -> bool {
    vars.iter().any(|v| t.mentions(v))
}

/// Whether `t` may be used as a pattern term for a quantifier over `vars`:
/// an uninterpreted application, value map application or set membership,
/// whose subterms mentioning bound variables are of the same kind or are
/// bound variables themselves. Macros (`define-fun`) are not patterns.
pub fn is_legal_pattern(t: &Term, vars: &[Var]) -> bool {
    fn head_ok(t: &Term) -> bool {
        match t.node() {
            TermNode::App(f, args) => f.def.is_none() && !args.is_empty(),
            TermNode::VmApply(..) | TermNode::SetMember(..) => true,
            _ => false,
        }
    }
    fn inner_ok(t: &Term, vars: &[Var]) -> bool {
        if !mentions_any(t, vars) {
            return !matches!(t.node(), TermNode::Quant(_));
        }
        match t.node() {
            TermNode::Var(v) => vars.contains(v),
            _ => head_ok(t) && t.children().into_iter().all(|c| inner_ok(c, vars)),
        }
    }
    head_ok(t) && mentions_any(t, vars) && inner_ok(t, vars)
}

/// Whether a multi-pattern is legal and covers every bound variable.
pub fn is_legal_trigger(trig: &Trigger, vars: &[Var]) -> bool {
    if trig.0.is_empty() || !trig.0.iter().all(|t| is_legal_pattern(t, vars)) {
        return false;
    }
    let covered: BTreeSet<&Var> = vars
        .iter()
        .filter(|v| trig.0.iter().any(|t| t.mentions(v)))
        .collect();
    covered.len() == vars.len()
}

fn candidates(body: &Term, vars: &[Var]) -> Vec<Term> {
    let mut out: Vec<Term> = Vec::new();
    fn go(t: &Term, vars: &[Var], out: &mut Vec<Term>) {
        if let TermNode::Quant(q) = t.node() {
            // Patterns must not mention variables bound further in.
            if q.vars.iter().any(|v| vars.contains(v)) {
                return;
            }
            go(&q.body, vars, out);
            return;
        }
        if is_legal_pattern(t, vars) && !out.contains(t) {
            out.push(t.clone());
        }
        for c in t.children() {
            go(c, vars, out);
        }
    }
    go(body, vars, &mut out);
    // Inner quantifiers bind their own variables; skip candidates mentioning them.
    out.retain(|t| {
        t.free_vars()
            .iter()
            .all(|v| vars.contains(v) || !is_inner_bound(body, v))
    });
    out
}

fn is_inner_bound(body: &Term, v: &Var) -> bool {
    let mut found = false;
    body.visit(&mut |t| {
        if let TermNode::Quant(q) = t.node() {
            if q.vars.contains(v) {
                found = true;
            }
        }
    });
    found
}

/// Infers triggers for a quantifier over `vars` with the given body: all
/// minimal legal application subterms that cover every bound variable; if no
/// single term covers them, one multi-pattern assembled greedily; otherwise
/// none (left to the solver).
pub fn infer_triggers(body: &Term, vars: &[Var]) -> TriggerChoice {
    let cands = candidates(body, vars);
    let covers = |t: &Term| vars.iter().all(|v| t.mentions(v));
    let covering: Vec<&Term> = cands.iter().filter(|t| covers(t)).collect();
    // Candidates that would match their own instances cause matching loops;
    // they are used only if nothing else covers the variables.
    let non_looping: Vec<&Term> = covering
        .iter()
        .copied()
        .filter(|t| !self_loops(t, body, vars))
        .collect();
    let full = if non_looping.is_empty() { covering } else { non_looping };
    let minimal: Vec<Trigger> = full
        .iter()
        .filter(|t| {
            !full
                .iter()
                .any(|s| s != *t && is_subterm(s, t))
        })
        .map(|t| Trigger(vec![(*t).clone()]))
        .collect();
    if !minimal.is_empty() {
        return TriggerChoice {
            triggers: minimal,
            provenance: Provenance::Inferred,
        };
    }
    let mut chosen: Vec<Term> = Vec::new();
    let mut covered: BTreeSet<&Var> = BTreeSet::new();
    let mut pool: Vec<&Term> = cands.iter().collect();
    pool.sort_by_key(|t| std::cmp::Reverse(vars.iter().filter(|v| t.mentions(v)).count()));
    for t in pool {
        let adds: Vec<&Var> = vars
            .iter()
            .filter(|v| t.mentions(v) && !covered.contains(v))
            .collect();
        if !adds.is_empty() {
            covered.extend(adds);
            chosen.push(t.clone());
        }
    }
    if covered.len() == vars.len() && !chosen.is_empty() {
        TriggerChoice {
            triggers: vec![Trigger(chosen)],
            provenance: Provenance::Inferred,
        }
    } else {
        TriggerChoice::auto()
    }
}

/// Whether `pattern` matches a subterm of `body` other than itself with
/// some bound variable instantiated by a term that itself mentions a bound
/// variable: each instantiation would then produce a new match.
fn self_loops(pattern: &Term, body: &Term, vars: &[Var]) -> bool {
    let mut found = false;
    body.visit(&mut |t| {
        if found || t == pattern {
            return;
        }
        let mut sub = BTreeMap::new();
        if matches(pattern, t, vars, &mut sub)
            && sub
                .values()
                .any(|v: &&Term| !matches!(v.node(), TermNode::Var(_)) && vars.iter().any(|x| v.mentions(x)))
        {
            found = true;
        }
    });
    found
}

/// First-order matching of `pattern` (variables `vars`) against `t`.
fn matches<'t>(pattern: &Term, t: &'t Term, vars: &[Var], sub: &mut BTreeMap<Var, &'t Term>) -> bool {
    if let TermNode::Var(v) = pattern.node() {
        if vars.contains(v) {
            return match sub.get(v) {
                Some(bound) => *bound == t,
                None => {
                    sub.insert(v.clone(), t);
                    true
                }
            };
        }
    }
    let same_head = match (pattern.node(), t.node()) {
        (TermNode::App(f, _), TermNode::App(g, _)) => f == g,
        (TermNode::VmApply(f, _), TermNode::VmApply(g, _)) => f == g,
        (TermNode::SetMember(..), TermNode::SetMember(..)) => true,
        _ => return pattern == t,
    };
    let (ps, ts) = (pattern.children(), t.children());
    same_head && ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, c)| matches(p, c, vars, sub))
}

fn is_subterm(small: &Term, big: &Term) -> bool {
    let mut found = false;
    big.visit(&mut |t| {
        if t == small {
            found = true;
        }
    });
    found
}

/// User triggers if given and legal, otherwise inferred ones.
pub fn user_or_inferred(user: Vec<Trigger>, body: &Term, vars: &[Var]) -> TriggerChoice {
    let legal: Vec<Trigger> = user
        .into_iter()
        .filter(|t| is_legal_trigger(t, vars))
        .collect();
    if !legal.is_empty() {
        return TriggerChoice {
            triggers: legal,
            provenance: Provenance::User,
        };
    }
    infer_triggers(body, vars)
}

/// `Inv-1`: `{e⁻¹(r)}`.
pub fn inv1(inv_of_r: &Term) -> TriggerChoice {
    TriggerChoice {
        triggers: vec![Trigger(vec![inv_of_r.clone()])],
        provenance: Provenance::Schema,
    }
}

/// `Inv-2`: `{e(x)}` when the receiver is a legal pattern; otherwise each
/// legal fallback (typically the chunk's value map applied to `x`) as an
/// alternative; otherwise no patterns.
pub fn inv2(x: &Var, receiver: &Term, fallbacks: &[Term]) -> TriggerChoice {
    let vars = std::slice::from_ref(x);
    if is_legal_pattern(receiver, vars) {
        return TriggerChoice {
            triggers: vec![Trigger(vec![receiver.clone()])],
            provenance: Provenance::Schema,
        };
    }
    let triggers: Vec<Trigger> = fallbacks
        .iter()
        .filter(|t| is_legal_pattern(t, vars))
        .map(|t| Trigger(vec![t.clone()]))
        .collect();
    if triggers.is_empty() {
        TriggerChoice::auto()
    } else {
        TriggerChoice {
            triggers,
            provenance: Provenance::Schema,
        }
    }
}

/// `VmDefEq`: the two alternative singleton triggers `{fvf(r)}` and `{fvf_i(r)}`.
pub fn vm_def_eq(summary_app: &Term, chunk_app: &Term) -> TriggerChoice {
    TriggerChoice {
        triggers: vec![
            Trigger(vec![summary_app.clone()]),
            Trigger(vec![chunk_app.clone()]),
        ],
        provenance: Provenance::Schema,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{FunKind, Function, Sort};

    fn loc() -> std::sync::Arc<Function> {
        Function::uninterpreted(
            "loc",
            vec![Sort::Domain("Array".into()), Sort::Int],
            Sort::Ref,
            FunKind::User,
        )
    }

    #[test]
    fn inference_avoids_self_matching_candidates() {
        // n in nodes && fvf(n) != null ==> fvf(n) in nodes
        let n = Var::new("n", Sort::Ref);
        let nodes = Var::new("nodes@0", Sort::Set(Box::new(Sort::Ref)));
        let fvf = Var::new("fvf@0", Sort::value_map("left", Sort::Ref));
        let read = Term::vm_apply(&fvf, n.term());
        let body = Term::implies(
            Term::and(vec![
                Term::set_member(n.term(), nodes.term()),
                Term::ne(read.clone(), Term::null()),
            ]),
            Term::set_member(read.clone(), nodes.term()),
        );
        let c = infer_triggers(&body, &[n]);
        assert_eq!(c.triggers, vec![Trigger(vec![read])]);
    }

    #[test]
    fn inv2_uses_receiver_when_legal() {
        let a = Var::new("a@0", Sort::Domain("Array".into()));
        let x = Var::new("x", Sort::Int);
        let e = Term::app(&loc(), vec![a.term(), x.term()]);
        let c = inv2(&x, &e, &[]);
        assert_eq!(c.provenance, Provenance::Schema);
        assert_eq!(c.triggers, vec![Trigger(vec![e])]);
    }

    #[test]
    fn inv2_falls_back_to_value_map_for_identity_receiver() {
        let n = Var::new("n", Sort::Ref);
        let fvf = Var::new("fvf@0", Sort::value_map("left", Sort::Ref));
        let fallback = Term::vm_apply(&fvf, n.term());
        let c = inv2(&n, &n.term(), std::slice::from_ref(&fallback));
        assert_eq!(c.triggers, vec![Trigger(vec![fallback])]);
        assert_eq!(inv2(&n, &n.term(), &[]).provenance, Provenance::SolverAuto);
    }

    #[test]
    fn arithmetic_is_not_a_pattern() {
        let a = Var::new("a@0", Sort::Domain("Array".into()));
        let x = Var::new("x", Sort::Int);
        let shifted = Term::app(&loc(), vec![a.term(), Term::add(x.term(), Term::int(1))]);
        assert!(!is_legal_pattern(&shifted, std::slice::from_ref(&x)));
        assert!(!is_legal_pattern(&Term::add(x.term(), Term::int(1)), std::slice::from_ref(&x)));
    }

    #[test]
    fn inference_picks_minimal_covering_applications() {
        let a = Var::new("a@0", Sort::Domain("Array".into()));
        let i = Var::new("i", Sort::Int);
        let fvf = Var::new("fvf@1", Sort::value_map("val", Sort::Int));
        let read = Term::vm_apply(&fvf, Term::app(&loc(), vec![a.term(), i.term()]));
        let body = Term::implies(Term::le(Term::int(0), i.term()), Term::le(Term::int(0), read));
        let c = infer_triggers(&body, std::slice::from_ref(&i));
        assert_eq!(c.provenance, Provenance::Inferred);
        assert_eq!(
            c.triggers,
            vec![Trigger(vec![Term::app(&loc(), vec![a.term(), i.term()])])]
        );
    }

    #[test]
    fn inference_builds_multi_patterns() {
        let f = Function::uninterpreted("f", vec![Sort::Int], Sort::Int, FunKind::User);
        let x = Var::new("x", Sort::Int);
        let y = Var::new("y", Sort::Int);
        let body = Term::lt(Term::app(&f, vec![x.term()]), Term::app(&f, vec![y.term()]));
        let c = infer_triggers(&body, &[x.clone(), y.clone()]);
        assert_eq!(c.triggers.len(), 1);
        assert_eq!(c.triggers[0].0.len(), 2);
        assert!(is_legal_trigger(&c.triggers[0], &[x, y]));
    }
}
