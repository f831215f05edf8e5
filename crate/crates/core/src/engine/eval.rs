//! Evaluation of pure expressions to terms.

use std::collections::BTreeMap;

use crate::ast::checked::CFunction;
use crate::ast::{BinOp, Expr, ExprKind, Pos, QuantKind};
use crate::smt::triggers::{infer_triggers, is_legal_trigger, user_or_inferred};
use crate::state::{Heap, PcKind, Store, PRE_STATE};
use crate::term::{Rational, Term, TermNode, Trigger, Var};

use super::symbols::{self, coerce, type_sort};
use super::{Engine, ErrorKind, VerificationError, R};

/// What an expression is evaluated against.
#[derive(Clone, Copy)]
pub(crate) struct Ctx<'a> {
    pub heap: &'a Heap,
    pub store: &'a Store,
    pub olds: &'a BTreeMap<String, Heap>,
    pub result: Option<&'a Term>,
    /// Issue well-definedness checks (permissions for reads, function
    /// preconditions, divisors).
    pub checks: bool,
    /// Evaluating trigger terms: no checks, no new function axioms, and
    /// summaries and applications are reused.
    pub trigger: bool,
}

impl<'a> Ctx<'a> {
    pub fn new(heap: &'a Heap, store: &'a Store, olds: &'a BTreeMap<String, Heap>) -> Self {
        Ctx {
            heap,
            store,
            olds,
            result: None,
            checks: true,
            trigger: false,
        }
    }

    pub fn with_heap<'b>(&self, heap: &'b Heap) -> Ctx<'b>
    where
        'a: 'b,
    {
        Ctx { heap, ..*self }
    }

    pub fn with_store<'b>(&self, store: &'b Store) -> Ctx<'b>
    where
        'a: 'b,
    {
        Ctx { store, ..*self }
    }

    pub fn unchecked(&self) -> Ctx<'a> {
        Ctx { checks: false, ..*self }
    }
}

fn is_nonzero_literal(t: &Term) -> bool {
    match t.node() {
        TermNode::Int(i) => *i != 0,
        TermNode::Perm(r) => *r != Rational::from_integer(0),
        _ => false,
    }
}

impl<'p> Engine<'p> {
    pub(crate) fn eval(&mut self, ctx: &Ctx<'_>, e: &Expr) -> R<Term> {
        use ExprKind::*;
        Ok(match &e.kind {
            Int(i) => Term::int(*i),
            Bool(b) => Term::bool(*b),
            Null => Term::null(),
            FullPerm => Term::full_perm(),
            NoPerm => Term::no_perm(),
            Result => ctx
                .result
                .cloned()
                .ok_or_else(|| internal(e.pos, "`result` outside a function postcondition"))?,
            Var(x) => ctx
                .store
                .get(x)
                .cloned()
                .ok_or_else(|| internal(e.pos, &format!("unbound variable `{x}`")))?,
            Field(recv, field) => {
                let r = self.eval(ctx, recv)?;
                self.read_field(ctx, r, field, e)?
            }
            Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(ctx, a)?);
                }
                if let Some(f) = self.syms.domain_fns.get(name) {
                    symbols::apply(f, vals)
                } else {
                    let f = self
                        .prog
                        .function(name)
                        .ok_or_else(|| internal(e.pos, &format!("unknown function `{name}`")))?;
                    self.apply_function(ctx, f, vals, e.pos)?
                }
            }
            Unary(op, a) => symbols::unary(*op, self.eval(ctx, a)?),
            Binary(op, a, b) => self.eval_binary(ctx, *op, a, b, e.pos)?,
            Cond(c, a, b) => {
                let c = self.eval(ctx, c)?;
                let a = self.eval_under(ctx, c.clone(), &[a])?.remove(0);
                let b = self.eval_under(ctx, Term::not(c.clone()), &[b])?.remove(0);
                symbols::cond(c, a, b)
            }
            Old(label, inner) => {
                let label = label.as_deref().unwrap_or(PRE_STATE);
                let heap = ctx
                    .olds
                    .get(label)
                    .ok_or_else(|| internal(e.pos, &format!("no state labelled `{label}`")))?;
                self.eval(&ctx.with_heap(heap), inner)?
            }
            SetLit(ty, elems) => {
                let elem = type_sort(ty.as_ref().ok_or_else(|| internal(e.pos, "untyped set literal"))?);
                let mut vals = Vec::new();
                for x in elems {
                    vals.push(coerce(self.eval(ctx, x)?, &elem));
                }
                Term::set_lit(elem, vals)
            }
            Quant(kind, vars, trigs, body) => self.eval_quant(ctx, *kind, vars, trigs, body)?,
            Acc(..) => return Err(internal(e.pos, "permission in expression position")),
        })
    }

    fn eval_binary(&mut self, ctx: &Ctx<'_>, op: BinOp, a: &Expr, b: &Expr, pos: Pos) -> R<Term> {
        let av = self.eval(ctx, a)?;
        match op {
            BinOp::And => {
                let bv = self.eval_under(ctx, av.clone(), &[b])?.remove(0);
                Ok(Term::and(vec![av, bv]))
            }
            BinOp::Or => {
                let bv = self.eval_under(ctx, Term::not(av.clone()), &[b])?.remove(0);
                Ok(Term::or(vec![av, bv]))
            }
            BinOp::Implies => {
                let bv = self.eval_under(ctx, av.clone(), &[b])?.remove(0);
                Ok(Term::implies(av, bv))
            }
            BinOp::Div | BinOp::IntDiv | BinOp::Mod => {
                let bv = self.eval(ctx, b)?;
                if ctx.checks && !is_nonzero_literal(&bv) {
                    let zero = match bv.sort() {
                        crate::term::Sort::Perm => Term::no_perm(),
                        _ => Term::int(0),
                    };
                    if !self.check(&Term::ne(bv.clone(), zero), pos)? {
                        return Err(VerificationError::new(
                            ErrorKind::AssertionFailed,
                            b.pos,
                            format!("divisor `{b}` might be zero"),
                        ));
                    }
                }
                Ok(symbols::binary(op, av, bv))
            }
            _ => {
                let bv = self.eval(ctx, b)?;
                Ok(symbols::binary(op, av, bv))
            }
        }
    }

    /// Evaluates expressions under an assumed guard. Value map definitions
    /// produced on the way are kept unconditionally; every other new path
    /// condition is kept guarded.
    pub(crate) fn eval_under(&mut self, ctx: &Ctx<'_>, guard: Term, es: &[&Expr]) -> R<Vec<Term>> {
        let guard = guard.simplify();
        if guard.is_true() {
            return es.iter().map(|e| self.eval(ctx, e)).collect();
        }
        self.push(Some(guard.clone()))?;
        let mut vals = Vec::new();
        let mut err = None;
        for e in es {
            match self.eval(ctx, e) {
                Ok(v) => vals.push(v),
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        let scope = self.pop_hoisting()?;
        if let Some(e) = err {
            return Err(e);
        }
        let mut guarded = Vec::new();
        for (t, kind) in scope.terms {
            match kind {
                PcKind::VmDefEq => self.assume_def(t)?,
                PcKind::Plain => guarded.push(t),
            }
        }
        if !guarded.is_empty() {
            self.assume(Term::implies(guard, Term::and(guarded)))?;
        }
        Ok(vals)
    }

    /// Reads `recv.field`: checks for positive permission in the summary and
    /// returns the summary's value.
    pub(crate) fn read_field(&mut self, ctx: &Ctx<'_>, recv: Term, field: &str, at: &Expr) -> R<Term> {
        let s = self.summarise(ctx.heap, field, ctx.trigger)?;
        if ctx.checks && !ctx.trigger {
            let ok = self.check(&Term::lt(Term::no_perm(), s.perm_at(&recv)), at.pos)?;
            if !ok {
                return Err(VerificationError::new(
                    ErrorKind::InsufficientPermission,
                    at.pos,
                    format!("insufficient permission to access `{at}`"),
                ));
            }
        }
        Ok(s.value_at(recv))
    }

    fn eval_quant(
        &mut self,
        ctx: &Ctx<'_>,
        kind: QuantKind,
        vars: &[(String, crate::ast::Type)],
        trigs: &[Vec<Expr>],
        body: &Expr,
    ) -> R<Term> {
        let ys: Vec<Var> = vars.iter().map(|(n, t)| self.pool.fresh(n, type_sort(t))).collect();
        let mut store = ctx.store.clone();
        for ((n, _), y) in vars.iter().zip(&ys) {
            store.insert(n.clone(), y.term());
        }
        let inner = ctx.with_store(&store);
        self.push(None)?;
        let evaluated = self.eval(&inner, body).and_then(|b| {
            let tctx = Ctx {
                checks: false,
                trigger: true,
                ..inner
            };
            let mut user = Vec::new();
            for t in trigs {
                let mut terms = Vec::new();
                for e in t {
                    terms.push(self.eval(&tctx, e)?);
                }
                user.push(Trigger(terms));
            }
            Ok((b, user))
        });
        let scope = self.pop_hoisting()?;
        let (b, user) = evaluated?;

        let xs: Vec<Var> = vars.iter().map(|(n, t)| self.pool.fresh(n, type_sort(t))).collect();
        let bind: BTreeMap<Var, Term> = ys.iter().cloned().zip(xs.iter().map(Var::term)).collect();
        let rebind = |t: &Term| t.substitute(&bind).expect("sort-preserving renaming");
        let mut residue = Vec::new();
        for (t, k) in scope.terms {
            if ys.iter().any(|y| t.mentions(y)) {
                residue.push(rebind(&t));
            } else {
                match k {
                    PcKind::VmDefEq => self.assume_def(t)?,
                    PcKind::Plain => self.assume(t)?,
                }
            }
        }
        if !residue.is_empty() {
            let body = Term::and(residue);
            let choice = infer_triggers(&body, &xs);
            self.assume(Term::forall(xs.clone(), choice.triggers, body))?;
        }
        let body = rebind(&b);
        let user: Vec<Trigger> = user
            .into_iter()
            .map(|t| Trigger(t.0.iter().map(&rebind).collect()))
            .filter(|t| is_legal_trigger(t, &xs))
            .collect();
        let choice = user_or_inferred(user, &body, &xs);
        Ok(symbols::quantify(kind, xs, choice.triggers, body))
    }

    /// Applies a heap-dependent function: checks the precondition on a
    /// scratch copy of the heap, builds one snapshot argument per
    /// permission conjunct, and assumes the definitional axiom and the
    /// postconditions for this application.
    pub(crate) fn apply_function(&mut self, ctx: &Ctx<'_>, f: &'p CFunction, args: Vec<Term>, pos: Pos) -> R<Term> {
        let hf = self.syms.heap_fns[&f.name].clone();
        let args: Vec<Term> = args
            .into_iter()
            .zip(&f.params)
            .map(|(a, p)| coerce(a, &type_sort(&p.ty)))
            .collect();
        if ctx.trigger {
            if let Some((_, _, app)) = self
                .applications
                .iter()
                .rev()
                .find(|(n, a, _)| *n == f.name && *a == args)
            {
                return Ok(app.clone());
            }
        }
        let store: Store = f
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(args.iter().cloned())
            .collect();
        let fctx = Ctx {
            heap: ctx.heap,
            store: &store,
            olds: ctx.olds,
            result: None,
            checks: ctx.checks && !ctx.trigger,
            trigger: false,
        };
        let mut scratch = ctx.heap.clone();
        let out = self
            .consume_all(&mut scratch, &fctx, &f.pres, None, true)
            .map_err(|e| e.within(Some(pos), &format!("precondition of function `{}` might not hold", f.name)))?;
        let snaps = self.snapshot_parts(ctx.heap, &out.footprints)?;
        let mut all = args.clone();
        all.extend(snaps.into_iter().zip(&hf.parts).map(|(t, part)| match part {
            super::symbols::SnapPart::Isc(field) => {
                let pvm = self.syms.background.pvm_for(field).expect("value map machinery");
                Term::app(&pvm.to_snap, vec![t])
            }
            _ => t,
        }));
        let app = Term::app(&hf.smt, all);
        self.applications.push((f.name.clone(), args, app.clone()));
        if ctx.trigger {
            return Ok(app);
        }
        let guard = Term::and(out.pure);
        if let (Some(body), 0) = (&f.body, self.fn_depth) {
            self.fn_depth += 1;
            let v = self.eval(&fctx.unchecked(), body);
            self.fn_depth -= 1;
            let v = coerce(v?, &type_sort(&f.result));
            self.assume(Term::implies(guard.clone(), Term::eq(app.clone(), v)))?;
        }
        let pctx = Ctx {
            result: Some(&app),
            ..fctx.unchecked()
        };
        for post in &f.posts {
            let v = self.eval(&pctx, post)?;
            self.assume(Term::implies(guard.clone(), v))?;
        }
        Ok(app)
    }
}

pub(crate) fn internal(pos: Pos, message: &str) -> VerificationError {
    VerificationError::new(ErrorKind::IllFormed, pos, message.to_string())
}

/// Binds parameters to values.
pub(crate) fn bind_params(params: &[crate::ast::Param], vals: &[Term]) -> Store {
    params
        .iter()
        .map(|p| p.name.clone())
        .zip(vals.iter().cloned())
        .collect()
}
