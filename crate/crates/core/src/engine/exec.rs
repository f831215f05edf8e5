//! Statements and method/function verification, in continuation-passing
//! style: branching forks the remaining work, and the first error aborts.

use std::collections::BTreeSet;

use crate::ast::checked::{Assertion, CFunction, CMethod, CStmt, CStmtKind, PredAssertion};
use crate::ast::Pos;
use crate::state::{receiver, Chunk, Heap, Store, SymbolicState, PRE_STATE};
use crate::term::{Sort, Term};

use super::eval::{bind_params, Ctx};
use super::produce::Produce;
use super::symbols::{coerce, type_sort};
use super::{Engine, ErrorKind, VerificationError, R};

/// Remaining work on one path.
#[derive(Clone, Copy)]
enum Cont<'p> {
    Stmts(&'p [CStmt]),
    /// Exhale at the end of a path: postconditions or a loop invariant.
    Exit(&'p [Assertion], &'static str),
}

pub(super) fn verify_method<'p>(en: &mut Engine<'p>, m: &'p CMethod) -> R<()> {
    let mut st = SymbolicState::default();
    for p in m.params.iter().chain(&m.returns) {
        let v = en.pool.fresh_term(&p.name, type_sort(&p.ty));
        st.store.insert(p.name.clone(), v);
    }
    let olds = st.olds.clone();
    en.produce_all(&mut st.heap, &st.store.clone(), &olds, &m.pres, Produce::default())?;
    st.capture_old(PRE_STATE).expect("fresh state");
    match &m.body {
        Some(body) => en.run(st, vec![Cont::Exit(&m.posts, "postcondition might not hold"), Cont::Stmts(body)]),
        None => {
            // Abstract: only check that the postconditions are well-defined.
            let store = st.store.clone();
            let olds = st.olds.clone();
            en.produce_all(&mut st.heap, &store, &olds, &m.posts, Produce::default())
        }
    }
}

pub(super) fn verify_function<'p>(en: &mut Engine<'p>, f: &'p CFunction) -> R<()> {
    let mut store = Store::new();
    for p in &f.params {
        let v = en.pool.fresh_term(&p.name, type_sort(&p.ty));
        store.insert(p.name.clone(), v);
    }
    let mut heap = Heap::new();
    let olds = Default::default();
    en.produce_all(&mut heap, &store, &olds, &f.pres, Produce::default())?;
    let ctx = Ctx::new(&heap, &store, &olds);
    let Some(body) = &f.body else { return Ok(()) };
    let v = coerce(en.eval(&ctx, body)?, &type_sort(&f.result));
    let pctx = Ctx {
        result: Some(&v),
        ..ctx
    };
    for post in &f.posts {
        let t = en.eval(&pctx, post)?;
        if !en.check(&t, post.pos)? {
            return Err(VerificationError::new(
                ErrorKind::AssertionFailed,
                post.pos,
                format!("postcondition `{post}` of function `{}` might not hold", f.name),
            ));
        }
    }
    Ok(())
}

/// Locals assigned anywhere in a statement list.
fn assigned(stmts: &[CStmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match &s.kind {
            CStmtKind::Assign { target, .. } => {
                out.insert(target.clone());
            }
            CStmtKind::Call { targets, .. } => out.extend(targets.iter().cloned()),
            CStmtKind::If { then, els, .. } => {
                assigned(then, out);
                assigned(els, out);
            }
            CStmtKind::While { body, .. } => assigned(body, out),
            _ => {}
        }
    }
}

impl<'p> Engine<'p> {
    fn run(&mut self, mut st: SymbolicState, mut k: Vec<Cont<'p>>) -> R<()> {
        while let Some(c) = k.pop() {
            match c {
                Cont::Stmts([]) => {}
                Cont::Stmts([s, rest @ ..]) => {
                    k.push(Cont::Stmts(rest));
                    self.cur_pos = s.pos;
                    if let CStmtKind::If { cond, then, els } = &s.kind {
                        let c = {
                            let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
                            self.eval(&ctx, cond)?
                        };
                        for (guard, block) in [(c.clone(), then), (Term::not(c), els)] {
                            self.push(Some(guard))?;
                            let r = if self.check(&Term::ff(), s.pos)? {
                                self.stats.pruned_branches += 1;
                                self.recheck_pruned(s.pos)
                            } else {
                                let mut k2 = k.clone();
                                k2.push(Cont::Stmts(block));
                                self.run(st.clone(), k2)
                            };
                            self.pop_branch()?;
                            r?;
                        }
                        return Ok(());
                    }
                    self.exec(&mut st, s)?;
                    if self.cfg.debug_invariants {
                        self.check_heap_nonneg(&st.heap, s.pos)?;
                    }
                }
                Cont::Exit(asserts, what) => {
                    let h0 = st.heap.clone();
                    let ctx = Ctx::new(&h0, &st.store, &st.olds);
                    self.consume_all(&mut st.heap, &ctx, asserts, None, false)
                        .map_err(|e| e.within(None, what))?;
                }
            }
        }
        Ok(())
    }

    /// In debug mode, re-checks in a fresh solver session that the
    /// flattened path condition of a pruned branch is unsatisfiable.
    fn recheck_pruned(&mut self, pos: Pos) -> R<()> {
        if !self.cfg.debug_invariants {
            return Ok(());
        }
        let renderer = crate::smt::Renderer {
            no_triggers: self.cfg.solver.no_triggers,
        };
        let (preamble, names) = self.syms.background.emit(&renderer);
        let mut cfg = self.cfg.solver.clone();
        cfg.dump_prefix = format!("{}.pruned", cfg.dump_prefix);
        let fail = |e: crate::smt::SolverError| VerificationError::new(ErrorKind::SolverFailure, pos, e.to_string());
        let mut s = crate::smt::Session::start(cfg, &preamble, &names).map_err(fail)?;
        s.assume(&self.pcs.flatten()).map_err(fail)?;
        let res = s.check(&Term::ff()).map_err(fail)?;
        if res.is_valid() {
            Ok(())
        } else {
            Err(VerificationError::new(
                ErrorKind::InvariantViolation,
                pos,
                "pruned branch is satisfiable",
            ))
        }
    }

    fn check_heap_nonneg(&mut self, heap: &Heap, pos: Pos) -> R<()> {
        for c in heap.chunks() {
            let p = match c {
                Chunk::Quantified(q) => {
                    let r0 = self.pool.fresh_term("r", Sort::Ref);
                    q.perm_at(&r0)
                }
                Chunk::Predicate(p) => p.perm.clone(),
            };
            if !self.check(&Term::le(Term::no_perm(), p), pos)? {
                return Err(VerificationError::new(
                    ErrorKind::InvariantViolation,
                    pos,
                    "chunk permission might be negative",
                ));
            }
        }
        Ok(())
    }

    pub(super) fn exec(&mut self, st: &mut SymbolicState, s: &'p CStmt) -> R<()> {
        match &s.kind {
            CStmtKind::Inhale(asserts) => {
                let store = st.store.clone();
                let olds = st.olds.clone();
                let opts = Produce {
                    injectivity: self.cfg.strict_inhale_injectivity,
                    ..Produce::default()
                };
                self.produce_all(&mut st.heap, &store, &olds, asserts, opts)
            }
            CStmtKind::Exhale(asserts) => {
                let h0 = st.heap.clone();
                let ctx = Ctx::new(&h0, &st.store, &st.olds);
                self.consume_all(&mut st.heap, &ctx, asserts, None, false)?;
                Ok(())
            }
            CStmtKind::Assert(asserts) => {
                let mut scratch = st.heap.clone();
                let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
                self.consume_all(&mut scratch, &ctx, asserts, None, false)?;
                Ok(())
            }
            CStmtKind::VarDecl { name, ty, init } => {
                let sort = type_sort(ty);
                let v = match init {
                    Some(e) => {
                        let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
                        coerce(self.eval(&ctx, e)?, &sort)
                    }
                    None => self.pool.fresh_term(name, sort),
                };
                st.store.insert(name.clone(), v);
                Ok(())
            }
            CStmtKind::Assign { target, value } => {
                let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
                let v = self.eval(&ctx, value)?;
                let sort = st.store[target].sort().clone();
                st.store.insert(target.clone(), coerce(v, &sort));
                Ok(())
            }
            CStmtKind::FieldWrite { recv, field, value } => self.exec_write(st, recv, field, value, s.pos),
            CStmtKind::If { .. } => unreachable!("branching is handled by run"),
            CStmtKind::While {
                cond,
                invariants,
                body,
            } => self.exec_loop(st, cond, invariants, body),
            CStmtKind::Call {
                targets,
                method,
                args,
            } => self.exec_call(st, targets, method, args, s.pos),
            CStmtKind::Fold(p) => self.exec_fold(st, p, s.pos),
            CStmtKind::Unfold(p) => self.exec_unfold(st, p, s.pos),
            CStmtKind::Label(l) => {
                st.capture_old(l)
                    .map_err(|e| VerificationError::new(ErrorKind::IllFormed, s.pos, e.to_string()))
            }
        }
    }

    /// `e1.f := e2` as `exhale acc(e1.f); inhale acc(e1.f); inhale e1.f == e2`
    /// with single-location chunks.
    fn exec_write(
        &mut self,
        st: &mut SymbolicState,
        recv: &crate::ast::Expr,
        field: &str,
        value: &crate::ast::Expr,
        pos: Pos,
    ) -> R<()> {
        let (r, v) = {
            let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
            let r = self.eval(&ctx, recv)?;
            let v = self.eval(&ctx, value)?;
            (r, v)
        };
        let v = coerce(v, &self.syms.field_sort(field));
        let at_r = |r0: &Term| Term::ite(Term::eq(receiver().term(), r0.clone()), Term::full_perm(), Term::no_perm());
        let need = self.macro_r("q", at_r(&r));
        let what = Assertion::Acc(crate::ast::checked::AccAssertion {
            guard: None,
            recv: recv.clone(),
            field: field.to_string(),
            perm: crate::ast::Expr::new(crate::ast::ExprKind::FullPerm, pos),
            pos,
        });
        self.remove(&mut st.heap, field, need, pos, &what)?;
        let fvf = self.pool.fresh("fvf", Sort::value_map(field, self.syms.field_sort(field)));
        let q = self.macro_r("q", at_r(&r));
        self.assume(Term::ne(r.clone(), Term::null()))?;
        self.assume(Term::eq(Term::vm_apply(&fvf, r), v))?;
        st.heap.add(Chunk::Quantified(crate::state::QuantifiedChunk {
            field: field.into(),
            fvf,
            perm: q,
            origin: pos,
        }));
        Ok(())
    }

    fn exec_loop(
        &mut self,
        st: &mut SymbolicState,
        cond: &'p crate::ast::Expr,
        invariants: &'p [Assertion],
        body: &'p [CStmt],
    ) -> R<()> {
        {
            let h0 = st.heap.clone();
            let ctx = Ctx::new(&h0, &st.store, &st.olds);
            self.consume_all(&mut st.heap, &ctx, invariants, None, false)
                .map_err(|e| e.within(None, "loop invariant might not hold on entry"))?;
        }
        let mut modified = BTreeSet::new();
        assigned(body, &mut modified);
        let havoc = |en: &mut Self, store: &Store| -> Store {
            let mut out = store.clone();
            for x in &modified {
                if let Some(old) = store.get(x) {
                    let sort = old.sort().clone();
                    out.insert(x.clone(), en.pool.fresh_term(x, sort));
                }
            }
            out
        };

        // The body, verified once for an arbitrary iteration.
        self.push(None)?;
        let r = (|| {
            let mut body_st = SymbolicState {
                heap: Heap::new(),
                store: havoc(self, &st.store),
                olds: st.olds.clone(),
            };
            let store = body_st.store.clone();
            self.produce_all(&mut body_st.heap, &store, &st.olds, invariants, Produce::default())?;
            let c = {
                let ctx = Ctx::new(&body_st.heap, &body_st.store, &body_st.olds);
                self.eval(&ctx, cond)?
            };
            self.assume(c)?;
            self.run(
                body_st,
                vec![Cont::Exit(invariants, "loop invariant might not be preserved"), Cont::Stmts(body)],
            )
        })();
        self.pop_branch()?;
        r?;

        // After the loop: the frame, a fresh invariant and the negated condition.
        st.store = havoc(self, &st.store);
        let store = st.store.clone();
        let olds = st.olds.clone();
        self.produce_all(&mut st.heap, &store, &olds, invariants, Produce::default())?;
        let c = {
            let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
            self.eval(&ctx, cond)?
        };
        self.assume(Term::not(c))
    }

    fn exec_call(
        &mut self,
        st: &mut SymbolicState,
        targets: &[String],
        method: &str,
        args: &[crate::ast::Expr],
        pos: Pos,
    ) -> R<()> {
        let m = self.prog.method(method).expect("declared method");
        let mut vals = Vec::new();
        {
            let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
            for (a, p) in args.iter().zip(&m.params) {
                vals.push(coerce(self.eval(&ctx, a)?, &type_sort(&p.ty)));
            }
        }
        let mut callee = bind_params(&m.params, &vals);
        let pre_heap = st.heap.clone();
        {
            let ctx = Ctx::new(&pre_heap, &callee, &st.olds);
            self.consume_all(&mut st.heap, &ctx, &m.pres, None, false)
                .map_err(|e| e.within(Some(pos), &format!("precondition of call to `{method}` might not hold")))?;
        }
        let mut rets = Vec::new();
        for p in &m.returns {
            let v = self.pool.fresh_term(&p.name, type_sort(&p.ty));
            callee.insert(p.name.clone(), v.clone());
            rets.push(v);
        }
        let mut olds = std::collections::BTreeMap::new();
        olds.insert(PRE_STATE.to_string(), pre_heap);
        self.produce_all(&mut st.heap, &callee, &olds, &m.posts, Produce::default())?;
        for (t, v) in targets.iter().zip(rets) {
            let sort = st.store[t].sort().clone();
            st.store.insert(t.clone(), coerce(v, &sort));
        }
        Ok(())
    }

    /// Evaluates a predicate instance: arguments and the permission amount.
    fn pred_instance(&mut self, st: &SymbolicState, p: &PredAssertion) -> R<(Vec<Term>, Term)> {
        let decl = self.prog.predicate(&p.name).expect("declared predicate");
        let ctx = Ctx::new(&st.heap, &st.store, &st.olds);
        let mut args = Vec::new();
        for (a, prm) in p.args.iter().zip(&decl.params) {
            args.push(coerce(self.eval(&ctx, a)?, &type_sort(&prm.ty)));
        }
        let perm = Term::to_perm(self.eval(&ctx, &p.perm)?);
        self.check_nonneg(Term::tt(), &perm, p.pos)?;
        Ok((args, perm))
    }

    fn exec_fold(&mut self, st: &mut SymbolicState, p: &'p PredAssertion, pos: Pos) -> R<()> {
        let decl = self.prog.predicate(&p.name).expect("declared predicate");
        let body = decl.body.as_ref().ok_or_else(|| {
            VerificationError::new(ErrorKind::IllFormed, pos, format!("cannot fold abstract predicate `{}`", p.name))
        })?;
        let (args, perm) = self.pred_instance(st, p)?;
        let store = bind_params(&decl.params, &args);
        let h0 = st.heap.clone();
        let consumed = {
            let ctx = Ctx::new(&h0, &store, &st.olds);
            self.consume_all(&mut st.heap, &ctx, body, Some(&perm), true)
                .map_err(|e| e.within(Some(pos), &format!("folding `{}` failed", p.name)))?
        };
        let parts = self.snapshot_parts(&h0, &consumed.footprints)?;
        let snap = self.pool.fresh_term("snap", Sort::Snap);
        let projections = self.syms.pred_parts[&p.name].clone();
        for ((_, proj), v) in projections.iter().zip(parts) {
            self.assume(Term::eq(Term::app(proj, vec![snap.clone()]), v))?;
        }
        st.heap.add(Chunk::Predicate(crate::state::PredicateChunk {
            name: p.name.as_str().into(),
            args,
            snap,
            perm,
        }));
        Ok(())
    }

    fn exec_unfold(&mut self, st: &mut SymbolicState, p: &'p PredAssertion, pos: Pos) -> R<()> {
        let decl = self.prog.predicate(&p.name).expect("declared predicate");
        let body = decl.body.as_ref().ok_or_else(|| {
            VerificationError::new(ErrorKind::IllFormed, pos, format!("cannot unfold abstract predicate `{}`", p.name))
        })?;
        let (args, perm) = self.pred_instance(st, p)?;
        let snap = self
            .remove_predicate(&mut st.heap, &p.name, &args, perm.clone(), pos)
            .map_err(|e| e.within(Some(pos), &format!("unfolding `{}` failed", p.name)))?;
        let parts: Vec<Term> = self.syms.pred_parts[&p.name]
            .iter()
            .map(|(_, proj)| Term::app(proj, vec![snap.clone()]))
            .collect();
        let store = bind_params(&decl.params, &args);
        let olds = st.olds.clone();
        let opts = Produce {
            scale: Some(&perm),
            snapshot: Some(&parts),
            injectivity: false,
        };
        self.produce_all(&mut st.heap, &store, &olds, body, opts)
    }
}

