//! Exhale: checking and removing permissions, and the footprints that
//! snapshots are built from.

use std::sync::Arc;

use crate::ast::checked::{AccAssertion, Assertion, Isc, PredAssertion};
use crate::ast::Pos;
use crate::smt::preamble::with_qid;
use crate::smt::triggers;
use crate::state::{receiver, Chunk, Heap};
use crate::term::{Sort, Term, TermNode, Var};

use super::eval::Ctx;
use super::symbols::type_sort;
use super::{Engine, ErrorKind, VerificationError, R};

/// What one permission conjunct covered, for building snapshots.
#[derive(Clone, Debug)]
pub(crate) enum Footprint {
    /// Receivers `r` with `0 < q(r)`.
    Isc { field: Arc<str>, q: Term },
    Acc { field: Arc<str>, recv: Term },
    Pred { snap: Term },
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Consumed {
    pub footprints: Vec<Footprint>,
    /// Values of the pure conjuncts.
    pub pure: Vec<Term>,
}

/// An ISC evaluated at a fresh instance `y` of its bound variable.
pub(crate) struct IscInstance {
    pub y: Var,
    pub cond: Term,
    pub recv: Term,
    pub perm: Term,
}

fn scaled(p: Term, scale: Option<&Term>) -> Term {
    let p = Term::to_perm(p);
    match scale {
        Some(s) => Term::arith(crate::term::ArithOp::Mul, p, s.clone()),
        None => p,
    }
}

fn is_nonneg_literal(t: &Term) -> bool {
    match t.simplify().node() {
        TermNode::Perm(r) => *r >= num_rational::Rational64::from_integer(0),
        TermNode::Int(i) => *i >= 0,
        _ => false,
    }
}

impl<'p> Engine<'p> {
    /// A macro over the receiver variable, `stem@k(r) := body`, applied to `r`.
    pub(crate) fn macro_r(&mut self, stem: &str, body: Term) -> Term {
        let body = body.simplify();
        if matches!(body.node(), TermNode::Perm(_) | TermNode::App(..)) {
            return body;
        }
        let r = receiver().clone();
        let f = self.pool.define(stem, vec![r.clone()], body);
        Term::app(&f, vec![r.term()])
    }

    /// Whether the receiver-indexed permission `t` is zero everywhere.
    pub(crate) fn check_zero_everywhere(&mut self, t: &Term, pos: Pos) -> R<bool> {
        let t = t.simplify();
        if t.is_zero_perm() {
            return Ok(true);
        }
        let r0 = self.pool.fresh_term("r", Sort::Ref);
        self.check(&Term::eq(t.subst1(receiver(), &r0), Term::no_perm()), pos)
    }

    pub(crate) fn check_nonneg(&mut self, guard: Term, p: &Term, pos: Pos) -> R<()> {
        if is_nonneg_literal(p) {
            return Ok(());
        }
        let ok = self.check(&Term::implies(guard, Term::le(Term::no_perm(), p.clone())), pos)?;
        if ok {
            Ok(())
        } else {
            Err(VerificationError::new(
                ErrorKind::IllFormed,
                pos,
                "permission amount might be negative",
            ))
        }
    }

    /// Evaluates condition, receiver and permission of an ISC at a fresh
    /// instance; receiver and permission are evaluated with the condition
    /// assumed.
    pub(crate) fn eval_isc(&mut self, ctx: &Ctx<'_>, isc: &Isc, scale: Option<&Term>) -> R<IscInstance> {
        let y = self.pool.fresh(&isc.var, type_sort(&isc.ty));
        let mut store = ctx.store.clone();
        store.insert(isc.var.clone(), y.term());
        let inner = ctx.with_store(&store);
        let cond = self.eval(&inner, &isc.cond)?;
        let mut vals = self.eval_under(&inner, cond.clone(), &[&isc.recv, &isc.perm])?;
        let perm = scaled(vals.pop().expect("perm"), scale);
        let recv = vals.pop().expect("receiver");
        Ok(IscInstance { y, cond, recv, perm })
    }

    /// Checks `c(y1) ∧ c(y2) ∧ e(y1) = e(y2) ⇒ y1 = y2`.
    pub(crate) fn check_injective(&mut self, inst: &IscInstance, isc: &Isc) -> R<()> {
        let y1 = self.pool.fresh(&isc.var, inst.y.sort.clone()).term();
        let y2 = self.pool.fresh(&isc.var, inst.y.sort.clone()).term();
        let at = |t: &Term, v: &Term| t.subst1(&inst.y, v);
        let goal = Term::implies(
            Term::and(vec![
                at(&inst.cond, &y1),
                at(&inst.cond, &y2),
                Term::eq(at(&inst.recv, &y1), at(&inst.recv, &y2)),
            ]),
            Term::eq(y1, y2),
        );
        if self.check(&goal, isc.pos)? {
            Ok(())
        } else {
            Err(VerificationError::new(
                ErrorKind::Injectivity,
                isc.pos,
                format!("receiver `{}` might not be injective", isc.recv),
            ))
        }
    }

    /// Introduces the inverse of the receiver, assumes both inverse axioms
    /// and returns the permission term `ite(c(inv(r)), p(inv(r)), 0)`.
    /// `fallback` builds extra Inv-2 trigger candidates from `e(x)`.
    pub(crate) fn invert(&mut self, inst: &IscInstance, var: &str, fallback: &dyn Fn(&Term) -> Vec<Term>) -> R<Term> {
        let r = receiver().clone();
        let inv = self.pool.fresh_function("inv", vec![Sort::Ref], inst.y.sort.clone());
        let inv_r = Term::app(&inv, vec![r.term()]);
        let at = |t: &Term, v: &Term| t.subst1(&inst.y, v);
        let c_inv = at(&inst.cond, &inv_r);
        let inv1 = Term::forall(
            vec![r.clone()],
            triggers::inv1(&inv_r).triggers,
            Term::implies(c_inv.clone(), Term::eq(at(&inst.recv, &inv_r), r.term())),
        );
        self.assume(with_qid(inv1, "inv_1"))?;

        let x = self.pool.fresh(var, inst.y.sort.clone());
        let ex = at(&inst.recv, &x.term());
        let inv_ex = Term::app(&inv, vec![ex.clone()]);
        let mut candidates = fallback(&ex);
        candidates.push(inv_ex.clone());
        let choice = triggers::inv2(&x, &ex, &candidates);
        let inv2 = Term::forall(
            vec![x.clone()],
            choice.triggers,
            Term::implies(at(&inst.cond, &x.term()), Term::eq(inv_ex, x.term())),
        );
        self.assume(with_qid(inv2, "inv_2"))?;
        let body = Term::ite(c_inv, at(&inst.perm, &inv_r), Term::no_perm());
        Ok(self.macro_r("q", body))
    }

    /// Exhales a conjunct list from `heap`; expressions are evaluated in
    /// `ctx.heap` (the state before the exhale). Without checks nothing is
    /// checked or removed and only footprints are computed.
    pub(crate) fn consume_all(
        &mut self,
        heap: &mut Heap,
        ctx: &Ctx<'_>,
        asserts: &[Assertion],
        scale: Option<&Term>,
        footprints: bool,
    ) -> R<Consumed> {
        let mut out = Consumed::default();
        for a in asserts {
            match a {
                Assertion::Pure(e) => {
                    let v = self.eval(ctx, e)?;
                    if ctx.checks && !self.check(&v, e.pos)? {
                        return Err(VerificationError::new(
                            ErrorKind::AssertionFailed,
                            e.pos,
                            format!("assertion `{e}` might not hold"),
                        ));
                    }
                    out.pure.push(v);
                }
                Assertion::Acc(acc) => {
                    let fp = self.consume_acc(heap, ctx, acc, scale, a)?;
                    if footprints {
                        out.footprints.push(fp);
                    }
                }
                Assertion::Isc(isc) => {
                    let inst = self.eval_isc(ctx, isc, scale)?;
                    if ctx.checks {
                        self.check_nonneg(inst.cond.clone(), &inst.perm, isc.pos)?;
                        self.check_injective(&inst, isc)?;
                    }
                    let q = self.invert(&inst, &isc.var, &|_| Vec::new())?;
                    if ctx.checks {
                        self.remove(heap, &isc.field, q.clone(), isc.pos, a)?;
                    }
                    if footprints {
                        out.footprints.push(Footprint::Isc {
                            field: isc.field.as_str().into(),
                            q,
                        });
                    }
                }
                Assertion::Pred(p) => {
                    let snap = self.consume_pred(heap, ctx, p, scale)?;
                    if footprints {
                        out.footprints.push(Footprint::Pred { snap });
                    }
                }
            }
        }
        Ok(out)
    }

    fn consume_acc(
        &mut self,
        heap: &mut Heap,
        ctx: &Ctx<'_>,
        acc: &AccAssertion,
        scale: Option<&Term>,
        whole: &Assertion,
    ) -> R<Footprint> {
        let guard = match &acc.guard {
            Some(g) => self.eval(ctx, g)?,
            None => Term::tt(),
        };
        let mut vals = self.eval_under(ctx, guard.clone(), &[&acc.recv, &acc.perm])?;
        let perm = scaled(vals.pop().expect("perm"), scale);
        let recv = vals.pop().expect("receiver");
        if ctx.checks {
            self.check_nonneg(guard.clone(), &perm, acc.pos)?;
            let r = receiver().term();
            let need = self.macro_r(
                "q",
                Term::ite(
                    Term::and(vec![guard, Term::eq(r, recv.clone())]),
                    perm,
                    Term::no_perm(),
                ),
            );
            self.remove(heap, &acc.field, need, acc.pos, whole)?;
        }
        Ok(Footprint::Acc {
            field: acc.field.as_str().into(),
            recv,
        })
    }

    fn consume_pred(&mut self, heap: &mut Heap, ctx: &Ctx<'_>, p: &PredAssertion, scale: Option<&Term>) -> R<Term> {
        let guard = match &p.guard {
            Some(g) => self.eval(ctx, g)?,
            None => Term::tt(),
        };
        let mut es: Vec<&crate::ast::Expr> = p.args.iter().collect();
        es.push(&p.perm);
        let mut vals = self.eval_under(ctx, guard.clone(), &es)?;
        let perm = scaled(vals.pop().expect("perm"), scale);
        let decl = self.prog.predicate(&p.name).expect("declared predicate");
        let args: Vec<Term> = vals
            .into_iter()
            .zip(&decl.params)
            .map(|(v, prm)| super::symbols::coerce(v, &type_sort(&prm.ty)))
            .collect();
        if !ctx.checks {
            return Ok(self.pool.fresh_term("snap", Sort::Snap));
        }
        self.check_nonneg(guard.clone(), &perm, p.pos)?;
        let need = Term::ite(guard, perm, Term::no_perm());
        self.remove_predicate(heap, &p.name, &args, need, p.pos)
    }

    /// Greedily removes `need(r)` permission to `field` from the chunks of
    /// `heap`, then checks that nothing is left over. With debug invariants
    /// on, the accounting is checked before a shortfall is reported.
    pub(crate) fn remove(&mut self, heap: &mut Heap, field: &str, need: Term, pos: Pos, what: &Assertion) -> R<()> {
        self.stats.remove_calls += 1;
        if need.simplify().is_zero_perm() {
            return Ok(());
        }
        let idxs = heap.field_chunks(field, self.cfg.reverse_chunk_order);
        let before: Vec<Term> = idxs.iter().map(|&i| heap.quantified(i).perm.clone()).collect();
        let mut needed = need.clone();
        let mut touched = Vec::new();
        let mut done = false;
        for (n, &i) in idxs.iter().enumerate() {
            let qi = heap.quantified(i).perm.clone();
            let take = self.macro_r("take", Term::min(qi.clone(), needed.clone()));
            let rest = self.macro_r("perm", Term::sub(qi, take.clone()));
            needed = self.macro_r("need", Term::sub(needed, take));
            if let Chunk::Quantified(c) = heap.get_mut(i) {
                c.perm = rest;
            }
            touched.push(i);
            if n + 1 < idxs.len() && self.check_zero_everywhere(&needed, pos)? {
                done = true;
                break;
            }
        }
        let sufficient = done || self.check_zero_everywhere(&needed, pos)?;
        if self.cfg.debug_invariants {
            self.stats.accounting_checks += 1;
            let after: Vec<Term> = idxs.iter().map(|&i| heap.quantified(i).perm.clone()).collect();
            let sum = |ts: Vec<Term>| ts.into_iter().reduce(Term::add).unwrap_or_else(Term::no_perm);
            let r0 = self.pool.fresh_term("r", Sort::Ref);
            let at = |t: Term| t.subst1(receiver(), &r0);
            // What was taken, need - needed, left the chunks: before - taken = after.
            let lhs = Term::sub(at(sum(before)), at(need));
            let rhs = Term::sub(at(sum(after)), at(needed));
            if !self.check(&Term::eq(lhs, rhs), pos)? {
                return Err(VerificationError::new(
                    ErrorKind::InvariantViolation,
                    pos,
                    "permission accounting is not precise",
                ));
            }
            for &i in &touched {
                let p = heap.quantified(i).perm.subst1(receiver(), &r0);
                if !self.check(&Term::le(Term::no_perm(), p), pos)? {
                    return Err(VerificationError::new(
                        ErrorKind::InvariantViolation,
                        pos,
                        "chunk permission might be negative after removal",
                    ));
                }
            }
        }
        if !sufficient {
            return Err(VerificationError::new(
                ErrorKind::InsufficientPermission,
                pos,
                format!("insufficient permission for `{what}`"),
            ));
        }
        self.drop_empty(heap, touched, pos)
    }

    /// Drops the given chunks if their permission is zero, syntactically or
    /// (when configured) provably.
    pub(crate) fn drop_empty(&mut self, heap: &mut Heap, candidates: Vec<usize>, pos: Pos) -> R<()> {
        let mut dead = Vec::new();
        for i in candidates {
            let perm = match heap.get(i) {
                Chunk::Quantified(c) => c.perm.clone(),
                Chunk::Predicate(p) => p.perm.clone(),
            };
            let zero = perm.simplify().is_zero_perm()
                || (self.cfg.drop_empty_with_solver && self.check_zero_everywhere(&perm, pos)?);
            if zero {
                dead.push(i);
            }
        }
        self.stats.chunks_dropped += dead.len() as u64;
        heap.remove_all(dead);
        Ok(())
    }

    /// Removes `need` permission to the predicate instance `name(args)`;
    /// chunks with syntactically equal arguments are visited first. Returns
    /// the snapshot of the instance.
    pub(crate) fn remove_predicate(&mut self, heap: &mut Heap, name: &str, args: &[Term], need: Term, pos: Pos) -> R<Term> {
        let mut idxs = heap.predicate_chunks(name, self.cfg.reverse_chunk_order);
        let syntactic = |i: &usize| match heap.get(*i) {
            Chunk::Predicate(c) => c.args == args,
            Chunk::Quantified(_) => false,
        };
        idxs.sort_by_key(|i| !syntactic(i));
        let mut needed = need;
        let mut alternatives = Vec::new();
        let mut touched = Vec::new();
        for (n, &i) in idxs.iter().enumerate() {
            let Chunk::Predicate(c) = heap.get(i).clone() else { continue };
            let eq = Term::and(
                c.args
                    .iter()
                    .zip(args)
                    .map(|(a, b)| Term::eq(a.clone(), b.clone()))
                    .collect(),
            )
            .simplify();
            if eq.is_false() {
                continue;
            }
            let take = Term::ite(eq.clone(), Term::min(c.perm.clone(), needed.clone()), Term::no_perm()).simplify();
            if let Chunk::Predicate(m) = heap.get_mut(i) {
                m.perm = Term::sub(c.perm.clone(), take.clone()).simplify();
            }
            needed = Term::sub(needed, take).simplify();
            alternatives.push((eq, c.snap.clone()));
            touched.push(i);
            if n + 1 < idxs.len() && self.check(&Term::eq(needed.clone(), Term::no_perm()), pos)? {
                break;
            }
        }
        if !self.check(&Term::eq(needed, Term::no_perm()), pos)? {
            let shown: Vec<String> = args.iter().map(|a| a.to_string()).collect();
            return Err(VerificationError::new(
                ErrorKind::InsufficientPermission,
                pos,
                format!("insufficient permission for predicate instance `{name}({})`", shown.join(", ")),
            ));
        }
        let fallback = self.pool.fresh_term("snap", Sort::Snap);
        let snap = alternatives
            .into_iter()
            .rev()
            .fold(fallback, |acc, (eq, s)| Term::ite(eq, s, acc).simplify());
        self.drop_empty(heap, touched, pos)?;
        Ok(snap)
    }

    /// Builds one snapshot part per footprint, reading values from `heap`.
    pub(crate) fn snapshot_parts(&mut self, heap: &Heap, fps: &[Footprint]) -> R<Vec<Term>> {
        let mut out = Vec::new();
        for fp in fps {
            match fp {
                Footprint::Isc { field, q } => {
                    let pvm = self
                        .syms
                        .background
                        .pvm_for(field)
                        .expect("value map machinery for field under an ISC")
                        .clone();
                    let s = self.summarise(heap, field, false)?;
                    let pvs = self.pool.fresh_term("pvs", Sort::Pvm(field.clone()));
                    let r = receiver().clone();
                    let dom = Term::app(&pvm.domain, vec![pvs.clone()]);
                    let member = Term::set_member(r.term(), dom);
                    let dom_ax = Term::forall(
                        vec![r.clone()],
                        vec![crate::term::Trigger(vec![member.clone()])],
                        Term::iff(member.clone(), Term::lt(Term::no_perm(), q.clone())),
                    );
                    self.assume(with_qid(dom_ax, "pvs_domain"))?;
                    let apply = Term::app(&pvm.apply, vec![pvs.clone(), r.term()]);
                    let val_ax = Term::forall(
                        vec![r.clone()],
                        vec![crate::term::Trigger(vec![apply.clone()])],
                        Term::implies(member, Term::eq(apply, s.value_at(r.term()))),
                    );
                    self.assume(with_qid(val_ax, "pvs_apply"))?;
                    out.push(pvs);
                }
                Footprint::Acc { field, recv } => {
                    let s = self.summarise(heap, field, false)?;
                    out.push(s.value_at(recv.clone()));
                }
                Footprint::Pred { snap } => out.push(snap.clone()),
            }
        }
        Ok(out)
    }
}
