//! Inhale: adding chunks and assuming pure facts.

use std::collections::BTreeMap;

use crate::ast::checked::Assertion;
use crate::smt::preamble::with_qid;
use crate::state::{receiver, Chunk, Heap, PredicateChunk, QuantifiedChunk, Store};
use crate::term::{Sort, Term, Trigger};

use super::eval::Ctx;
use super::symbols::{coerce, type_sort};
use super::{Engine, R};

/// Inhale options.
#[derive(Clone, Copy, Default)]
pub(crate) struct Produce<'a> {
    /// Multiplies every permission amount (predicate bodies under fractions).
    pub scale: Option<&'a Term>,
    /// Values the new chunks must agree with, one per permission conjunct
    /// (unfolding a predicate).
    pub snapshot: Option<&'a [Term]>,
    /// Check receiver injectivity of ISCs.
    pub injectivity: bool,
}

fn scaled(p: Term, scale: Option<&Term>) -> Term {
    let p = Term::to_perm(p);
    match scale {
        Some(s) => Term::arith(crate::term::ArithOp::Mul, p, s.clone()),
        None => p,
    }
}

impl<'p> Engine<'p> {
    /// Inhales a conjunct list into `heap`; each conjunct is evaluated in the
    /// heap produced so far.
    pub(crate) fn produce_all(
        &mut self,
        heap: &mut Heap,
        store: &Store,
        olds: &BTreeMap<String, Heap>,
        asserts: &[Assertion],
        opts: Produce<'_>,
    ) -> R<()> {
        let mut part = 0;
        for a in asserts {
            let now = heap.clone();
            let ctx = Ctx::new(&now, store, olds);
            let snap = match (a, opts.snapshot) {
                (Assertion::Pure(_), _) | (_, None) => None,
                (_, Some(parts)) => {
                    part += 1;
                    Some(parts[part - 1].clone())
                }
            };
            match a {
                Assertion::Pure(e) => {
                    let v = self.eval(&ctx, e)?;
                    self.assume(v)?;
                }
                Assertion::Acc(acc) => {
                    let guard = match &acc.guard {
                        Some(g) => self.eval(&ctx, g)?,
                        None => Term::tt(),
                    };
                    let mut vals = self.eval_under(&ctx, guard.clone(), &[&acc.recv, &acc.perm])?;
                    let perm = scaled(vals.pop().expect("perm"), opts.scale);
                    let recv = vals.pop().expect("receiver");
                    self.check_nonneg(guard.clone(), &perm, acc.pos)?;
                    let value = self.syms.field_sort(&acc.field);
                    let fvf = self.pool.fresh("fvf", Sort::value_map(&acc.field, value));
                    let r = receiver().term();
                    let q = self.macro_r(
                        "q",
                        Term::ite(
                            Term::and(vec![guard.clone(), Term::eq(r, recv.clone())]),
                            perm.clone(),
                            Term::no_perm(),
                        ),
                    );
                    self.assume(Term::implies(
                        Term::and(vec![guard.clone(), Term::lt(Term::no_perm(), perm)]),
                        Term::ne(recv.clone(), Term::null()),
                    ))?;
                    if let Some(v) = snap {
                        self.assume(Term::implies(guard, Term::eq(Term::vm_apply(&fvf, recv), v)))?;
                    }
                    add_quantified(heap, &acc.field, fvf, q, acc.pos);
                }
                Assertion::Isc(isc) => {
                    let inst = self.eval_isc(&ctx, isc, opts.scale)?;
                    self.check_nonneg(inst.cond.clone(), &inst.perm, isc.pos)?;
                    if opts.injectivity {
                        self.check_injective(&inst, isc)?;
                    }
                    let value = self.syms.field_sort(&isc.field);
                    let fvf = self.pool.fresh("fvf", Sort::value_map(&isc.field, value));
                    let fallback = |ex: &Term| vec![Term::vm_apply(&fvf, ex.clone())];
                    let q = self.invert(&inst, &isc.var, &fallback)?;
                    self.assume(Term::eq(q.subst1(receiver(), &Term::null()), Term::no_perm()))?;
                    if let Some(pvs) = snap {
                        let pvm = self
                            .syms
                            .background
                            .pvm_for(&isc.field)
                            .expect("value map machinery for predicate body field")
                            .clone();
                        let r = receiver().clone();
                        let here = Term::vm_apply(&fvf, r.term());
                        let there = Term::app(&pvm.apply, vec![pvs.clone(), r.term()]);
                        let member = Term::set_member(r.term(), Term::app(&pvm.domain, vec![pvs]));
                        let ax = Term::forall(
                            vec![r],
                            vec![Trigger(vec![here.clone()]), Trigger(vec![there.clone()])],
                            Term::implies(member, Term::eq(here, there)),
                        );
                        self.assume(with_qid(ax, "pvs_unfold"))?;
                    }
                    add_quantified(heap, &isc.field, fvf, q, isc.pos);
                }
                Assertion::Pred(p) => {
                    let guard = match &p.guard {
                        Some(g) => self.eval(&ctx, g)?,
                        None => Term::tt(),
                    };
                    let mut es: Vec<&crate::ast::Expr> = p.args.iter().collect();
                    es.push(&p.perm);
                    let mut vals = self.eval_under(&ctx, guard.clone(), &es)?;
                    let perm = scaled(vals.pop().expect("perm"), opts.scale);
                    self.check_nonneg(guard.clone(), &perm, p.pos)?;
                    let decl = self.prog.predicate(&p.name).expect("declared predicate");
                    let args: Vec<Term> = vals
                        .into_iter()
                        .zip(&decl.params)
                        .map(|(v, prm)| coerce(v, &type_sort(&prm.ty)))
                        .collect();
                    let snap = match snap {
                        Some(s) => s,
                        None => self.pool.fresh_term("snap", Sort::Snap),
                    };
                    let perm = Term::ite(guard, perm, Term::no_perm()).simplify();
                    if !perm.is_zero_perm() {
                        heap.add(Chunk::Predicate(PredicateChunk {
                            name: p.name.as_str().into(),
                            args,
                            snap,
                            perm,
                        }));
                    }
                }
            }
        }
        Ok(())
    }
}

fn add_quantified(heap: &mut Heap, field: &str, fvf: crate::term::Var, perm: Term, origin: crate::ast::Pos) {
    if perm.simplify().is_zero_perm() {
        return;
    }
    heap.add(Chunk::Quantified(QuantifiedChunk {
        field: field.into(),
        fvf,
        perm,
        origin,
    }));
}
