//! Well-formedness: name resolution, type checking, placement rules for
//! permissions and `old`, and normalisation of assertions into canonical
//! conjuncts.

use std::collections::{HashMap, HashSet};
use std::fmt;

use super::checked::*;
use super::macros::{free_names, subst_expr};
use super::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {message}")]
pub struct WfError {
    pub pos: Pos,
    pub message: String,
}

/// All well-formedness errors of a program, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct WfErrors(pub Vec<WfError>);

impl fmt::Display for WfErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", lines.join("\n"))
    }
}

type R<T> = Result<T, WfError>;

fn err<T>(pos: Pos, message: impl Into<String>) -> R<T> {
    Err(WfError {
        pos,
        message: message.into(),
    })
}

/// Checks a macro-free program and normalises its assertions.
pub fn check_wellformed(prog: Program) -> Result<CheckedProgram, WfErrors> {
    let mut errors = Vec::new();
    let sigs = Sigs::collect(&prog, &mut errors);
    let mut out = CheckedProgram {
        fields: prog.fields.clone(),
        ..CheckedProgram::default()
    };
    for f in &prog.fields {
        if let Err(e) = sigs.valid_type(&f.ty, f.pos) {
            errors.push(e);
        }
    }
    for d in &prog.domains {
        match sigs.domain(d) {
            Ok(d) => out.domains.push(d),
            Err(e) => errors.push(e),
        }
    }
    for f in &prog.functions {
        match sigs.function(f) {
            Ok(f) => out.functions.push(f),
            Err(e) => errors.push(e),
        }
    }
    for p in &prog.predicates {
        match sigs.predicate(p) {
            Ok(p) => out.predicates.push(p),
            Err(e) => errors.push(e),
        }
    }
    for m in &prog.methods {
        match sigs.method(m) {
            Ok(m) => out.methods.push(m),
            Err(e) => errors.push(e),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(WfErrors(errors))
    }
}

struct Sigs {
    fields: HashMap<Ident, Type>,
    sorts: HashSet<Ident>,
    /// Parameter types, result type, heap-dependent.
    funcs: HashMap<Ident, (Vec<Type>, Type, bool)>,
    preds: HashMap<Ident, (Vec<Type>, bool)>,
    methods: HashMap<Ident, (Vec<Type>, Vec<Type>)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OldMode {
    Forbidden,
    /// Bare `old` only (method postconditions).
    PreState,
    /// Bare `old` and labels declared so far (method bodies).
    Labels,
}

#[derive(Clone)]
struct Scope {
    /// Name, type, assignable.
    frames: Vec<Vec<(Ident, Type, bool)>>,
    old: OldMode,
    labels: Vec<Ident>,
    result: Option<Type>,
    heap: bool,
}

impl Scope {
    fn new(old: OldMode) -> Self {
        Scope {
            frames: vec![Vec::new()],
            old,
            labels: Vec::new(),
            result: None,
            heap: true,
        }
    }

    fn lookup(&self, name: &str) -> Option<&(Ident, Type, bool)> {
        self.frames.iter().rev().flatten().rev().find(|(n, _, _)| n == name)
    }

    fn declare(&mut self, name: &str, ty: Type, assignable: bool) {
        self.frames
            .last_mut()
            .expect("scope has a frame")
            .push((name.to_string(), ty, assignable));
    }
}

fn compatible(expected: &Type, found: &Type) -> bool {
    expected == found || (*expected == Type::Perm && *found == Type::Int)
}

fn is_numeric(t: &Type) -> bool {
    matches!(t, Type::Int | Type::Perm)
}

fn and_guard(g: Option<Expr>, c: &Expr) -> Option<Expr> {
    Some(match g {
        Some(g) => Expr::binary(BinOp::And, g, c.clone()),
        None => c.clone(),
    })
}

fn guarded(g: Option<Expr>, e: &Expr) -> Expr {
    match g {
        Some(g) => {
            let mut out = Expr::binary(BinOp::Implies, g, e.clone());
            out.pos = e.pos;
            out
        }
        None => e.clone(),
    }
}

impl Sigs {
    fn collect(prog: &Program, errors: &mut Vec<WfError>) -> Sigs {
        let mut s = Sigs {
            fields: HashMap::new(),
            sorts: HashSet::new(),
            funcs: HashMap::new(),
            preds: HashMap::new(),
            methods: HashMap::new(),
        };
        for f in &prog.fields {
            if s.fields.insert(f.name.clone(), f.ty.clone()).is_some() {
                errors.push(WfError {
                    pos: f.pos,
                    message: format!("duplicate field `{}`", f.name),
                });
            }
        }
        for d in &prog.domains {
            if !s.sorts.insert(d.name.clone()) {
                errors.push(WfError {
                    pos: d.pos,
                    message: format!("duplicate domain `{}`", d.name),
                });
            }
        }
        let mut callables: HashSet<Ident> = HashSet::new();
        let mut claim = |name: &str, pos: Pos, errors: &mut Vec<WfError>| {
            if !callables.insert(name.to_string()) {
                errors.push(WfError {
                    pos,
                    message: format!("duplicate declaration of `{name}`"),
                });
            }
        };
        for d in &prog.domains {
            for f in &d.functions {
                claim(&f.name, f.pos, errors);
                s.funcs.insert(
                    f.name.clone(),
                    (
                        f.params.iter().map(|p| p.ty.clone()).collect(),
                        f.result.clone(),
                        false,
                    ),
                );
            }
        }
        for f in &prog.functions {
            claim(&f.name, f.pos, errors);
            s.funcs.insert(
                f.name.clone(),
                (
                    f.params.iter().map(|p| p.ty.clone()).collect(),
                    f.result.clone(),
                    true,
                ),
            );
        }
        for p in &prog.predicates {
            claim(&p.name, p.pos, errors);
            s.preds.insert(
                p.name.clone(),
                (p.params.iter().map(|p| p.ty.clone()).collect(), p.body.is_some()),
            );
        }
        for m in &prog.methods {
            claim(&m.name, m.pos, errors);
            s.methods.insert(
                m.name.clone(),
                (
                    m.params.iter().map(|p| p.ty.clone()).collect(),
                    m.returns.iter().map(|p| p.ty.clone()).collect(),
                ),
            );
        }
        s
    }

    fn valid_type(&self, t: &Type, pos: Pos) -> R<()> {
        match t {
            Type::Set(inner) => self.valid_type(inner, pos),
            Type::Domain(d) if !self.sorts.contains(d) => err(pos, format!("unknown type `{d}`")),
            _ => Ok(()),
        }
    }

    fn params(&self, ps: &[Param], sc: &mut Scope, assignable: bool) -> R<()> {
        for p in ps {
            self.valid_type(&p.ty, p.pos)?;
            if sc.lookup(&p.name).is_some() {
                return err(p.pos, format!("duplicate parameter `{}`", p.name));
            }
            sc.declare(&p.name, p.ty.clone(), assignable);
        }
        Ok(())
    }

    // ------------------------------------------------------------ declarations

    fn domain(&self, d: &Domain) -> R<Domain> {
        let mut out = d.clone();
        for f in &d.functions {
            for p in &f.params {
                self.valid_type(&p.ty, p.pos)?;
            }
            self.valid_type(&f.result, f.pos)?;
        }
        for ax in &mut out.axioms {
            let mut sc = Scope::new(OldMode::Forbidden);
            sc.heap = false;
            self.expect_bool(&mut ax.body, &mut sc)?;
        }
        Ok(out)
    }

    fn function(&self, f: &FunctionDecl) -> R<CFunction> {
        let mut sc = Scope::new(OldMode::Forbidden);
        self.params(&f.params, &mut sc, false)?;
        self.valid_type(&f.result, f.pos)?;
        let pres = self.assertions(&f.pres, &mut sc)?;
        if let Some(p) = pres.iter().find(|a| matches!(a, Assertion::Pred(_))) {
            return err(
                p.pos(),
                "predicate instances in function preconditions are not supported",
            );
        }
        sc.result = Some(f.result.clone());
        let mut posts = f.posts.clone();
        for p in &mut posts {
            self.expect_bool(p, &mut sc)?;
        }
        sc.result = None;
        let body = match &f.body {
            Some(b) => {
                let mut b = b.clone();
                let t = self.ty(&mut b, &mut sc)?;
                if !compatible(&f.result, &t) {
                    return err(
                        b.pos,
                        format!("function body has type {t}, expected {}", f.result),
                    );
                }
                Some(b)
            }
            None => None,
        };
        Ok(CFunction {
            name: f.name.clone(),
            params: f.params.clone(),
            result: f.result.clone(),
            pres,
            posts,
            body,
            pos: f.pos,
        })
    }

    fn predicate(&self, p: &PredicateDecl) -> R<CPredicate> {
        let mut sc = Scope::new(OldMode::Forbidden);
        self.params(&p.params, &mut sc, false)?;
        let body = match &p.body {
            Some(b) => Some(self.assertions(std::slice::from_ref(b), &mut sc)?),
            None => None,
        };
        Ok(CPredicate {
            name: p.name.clone(),
            params: p.params.clone(),
            body,
            pos: p.pos,
        })
    }

    fn method(&self, m: &Method) -> R<CMethod> {
        let mut sc = Scope::new(OldMode::Forbidden);
        self.params(&m.params, &mut sc, false)?;
        self.params(&m.returns, &mut sc, true)?;
        let pres = self.assertions(&m.pres, &mut sc)?;
        sc.old = OldMode::PreState;
        let posts = self.assertions(&m.posts, &mut sc)?;
        sc.old = OldMode::Labels;
        let body = match &m.body {
            Some(b) => Some(self.stmts(b, &mut sc)?),
            None => None,
        };
        Ok(CMethod {
            name: m.name.clone(),
            params: m.params.clone(),
            returns: m.returns.clone(),
            pres,
            posts,
            body,
            pos: m.pos,
        })
    }

    // ------------------------------------------------------------ statements

    fn block(&self, ss: &[Stmt], sc: &mut Scope) -> R<Vec<CStmt>> {
        sc.frames.push(Vec::new());
        let out = self.stmts(ss, sc);
        sc.frames.pop();
        out
    }

    fn assignable(&self, name: &str, pos: Pos, sc: &Scope) -> R<Type> {
        match sc.lookup(name) {
            Some((_, t, true)) => Ok(t.clone()),
            Some((_, _, false)) => err(pos, format!("cannot assign to parameter `{name}`")),
            None => err(pos, format!("assignment to undeclared variable `{name}`")),
        }
    }

    fn call(
        &self,
        targets: &[Ident],
        method: &str,
        args: &[Expr],
        pos: Pos,
        sc: &mut Scope,
    ) -> R<CStmtKind> {
        let Some((params, returns)) = self.methods.get(method) else {
            return err(pos, format!("`{method}` is not a method"));
        };
        if params.len() != args.len() {
            return err(
                pos,
                format!(
                    "method `{method}` expects {} argument(s), found {}",
                    params.len(),
                    args.len()
                ),
            );
        }
        let mut args = args.to_vec();
        for (a, t) in args.iter_mut().zip(params) {
            let found = self.ty(a, sc)?;
            if !compatible(t, &found) {
                return err(a.pos, format!("argument has type {found}, expected {t}"));
            }
        }
        if returns.len() != targets.len() {
            return err(
                pos,
                format!(
                    "method `{method}` returns {} value(s), but {} target(s) given",
                    returns.len(),
                    targets.len()
                ),
            );
        }
        for (i, (t, r)) in targets.iter().zip(returns).enumerate() {
            let tt = self.assignable(t, pos, sc)?;
            if !compatible(&tt, r) {
                return err(pos, format!("cannot assign {r} to `{t}` of type {tt}"));
            }
            if targets[..i].contains(t) {
                return err(pos, format!("`{t}` assigned twice"));
            }
        }
        Ok(CStmtKind::Call {
            targets: targets.to_vec(),
            method: method.to_string(),
            args,
        })
    }

    fn stmts(&self, ss: &[Stmt], sc: &mut Scope) -> R<Vec<CStmt>> {
        let mut out = Vec::with_capacity(ss.len());
        for s in ss {
            let kind = match &s.kind {
                StmtKind::Inhale(e) | StmtKind::Assume(e) => {
                    CStmtKind::Inhale(self.assertions(std::slice::from_ref(e), sc)?)
                }
                StmtKind::Exhale(e) => {
                    CStmtKind::Exhale(self.assertions(std::slice::from_ref(e), sc)?)
                }
                StmtKind::Assert(e) => {
                    CStmtKind::Assert(self.assertions(std::slice::from_ref(e), sc)?)
                }
                StmtKind::VarDecl { name, ty, init } => {
                    self.valid_type(ty, s.pos)?;
                    if sc.lookup(name).is_some() {
                        return err(s.pos, format!("`{name}` is already declared"));
                    }
                    let init = match init {
                        Some(e) => {
                            let mut e = e.clone();
                            let t = self.ty(&mut e, sc)?;
                            if !compatible(ty, &t) {
                                return err(e.pos, format!("cannot initialise {ty} with {t}"));
                            }
                            Some(e)
                        }
                        None => None,
                    };
                    sc.declare(name, ty.clone(), true);
                    CStmtKind::VarDecl {
                        name: name.clone(),
                        ty: ty.clone(),
                        init,
                    }
                }
                StmtKind::Assign { target, value } => match &value.kind {
                    ExprKind::Call(m, args) if self.methods.contains_key(m) => {
                        self.call(std::slice::from_ref(target), m, args, s.pos, sc)?
                    }
                    _ => {
                        let tt = self.assignable(target, s.pos, sc)?;
                        let mut value = value.clone();
                        let vt = self.ty(&mut value, sc)?;
                        if !compatible(&tt, &vt) {
                            return err(value.pos, format!("cannot assign {vt} to `{target}` of type {tt}"));
                        }
                        CStmtKind::Assign {
                            target: target.clone(),
                            value,
                        }
                    }
                },
                StmtKind::FieldWrite { recv, field, value } => {
                    let mut recv = recv.clone();
                    let mut value = value.clone();
                    let ft = self.field_access(&mut recv, field, s.pos, sc)?;
                    let vt = self.ty(&mut value, sc)?;
                    if !compatible(&ft, &vt) {
                        return err(value.pos, format!("cannot write {vt} to field `{field}` of type {ft}"));
                    }
                    CStmtKind::FieldWrite {
                        recv,
                        field: field.clone(),
                        value,
                    }
                }
                StmtKind::If { cond, then, els } => {
                    let mut cond = cond.clone();
                    self.expect_bool(&mut cond, sc)?;
                    let then = self.block(then, sc)?;
                    let els = match els {
                        Some(b) => self.block(b, sc)?,
                        None => Vec::new(),
                    };
                    CStmtKind::If { cond, then, els }
                }
                StmtKind::While {
                    cond,
                    invariants,
                    body,
                } => {
                    let mut cond = cond.clone();
                    self.expect_bool(&mut cond, sc)?;
                    let invariants = self.assertions(invariants, sc)?;
                    let body = self.block(body, sc)?;
                    CStmtKind::While {
                        cond,
                        invariants,
                        body,
                    }
                }
                StmtKind::Call {
                    targets,
                    method,
                    args,
                } => self.call(targets, method, args, s.pos, sc)?,
                StmtKind::Fold(e) => CStmtKind::Fold(self.pred_instance(e, sc)?),
                StmtKind::Unfold(e) => CStmtKind::Unfold(self.pred_instance(e, sc)?),
                StmtKind::Label(l) => {
                    if sc.labels.contains(l) {
                        return err(s.pos, format!("duplicate label `{l}`"));
                    }
                    sc.labels.push(l.clone());
                    CStmtKind::Label(l.clone())
                }
            };
            out.push(CStmt { kind, pos: s.pos });
        }
        Ok(out)
    }

    fn pred_instance(&self, e: &Expr, sc: &mut Scope) -> R<PredAssertion> {
        let (loc, perm) = match &e.kind {
            ExprKind::Acc(loc, perm) => (&**loc, perm.as_deref()),
            _ => (e, None),
        };
        let ExprKind::Call(name, _) = &loc.kind else {
            return err(e.pos, "expected a predicate instance");
        };
        match self.preds.get(name) {
            Some((_, true)) => {}
            Some((_, false)) => {
                return err(e.pos, format!("predicate `{name}` has no body and cannot be (un)folded"))
            }
            None => return err(e.pos, format!("`{name}` is not a predicate")),
        }
        let mut a = match perm {
            Some(p) => Expr::new(ExprKind::Acc(Box::new(loc.clone()), Some(Box::new(p.clone()))), e.pos),
            None => loc.clone(),
        };
        self.assertion(&mut a, sc)?;
        let mut out = Vec::new();
        self.normalize(&a, None, &mut out)?;
        match out.pop() {
            Some(Assertion::Pred(p)) if out.is_empty() => Ok(p),
            _ => err(e.pos, "expected a predicate instance"),
        }
    }

    // ------------------------------------------------------------ assertions

    fn is_predicate_call(&self, e: &Expr) -> bool {
        matches!(&e.kind, ExprKind::Call(n, _) if self.preds.contains_key(n))
    }

    fn impure(&self, e: &Expr) -> bool {
        e.any(&mut |x| matches!(x.kind, ExprKind::Acc(..)) || self.is_predicate_call(x))
    }

    /// Type checks and normalises a list of assertions into conjuncts.
    fn assertions(&self, es: &[Expr], sc: &mut Scope) -> R<Vec<Assertion>> {
        let mut out = Vec::new();
        for e in es {
            let mut e = e.clone();
            self.assertion(&mut e, sc)?;
            self.normalize(&e, None, &mut out)?;
        }
        Ok(out)
    }

    fn assertion(&self, e: &mut Expr, sc: &mut Scope) -> R<()> {
        if !self.impure(e) {
            return self.expect_bool(e, sc);
        }
        let pos = e.pos;
        match &mut e.kind {
            ExprKind::Binary(BinOp::And, a, b) => {
                self.assertion(a, sc)?;
                self.assertion(b, sc)
            }
            ExprKind::Binary(BinOp::Implies, a, b) => {
                self.expect_bool(a, sc)?;
                self.assertion(b, sc)
            }
            ExprKind::Cond(c, a, b) => {
                self.expect_bool(c, sc)?;
                self.assertion(a, sc)?;
                self.assertion(b, sc)
            }
            ExprKind::Acc(loc, perm) => {
                if let Some(p) = perm {
                    let t = self.ty(p, sc)?;
                    if !is_numeric(&t) {
                        return err(p.pos, format!("permission amount has type {t}"));
                    }
                }
                match &mut loc.kind {
                    ExprKind::Field(recv, f) => {
                        let f = f.clone();
                        self.field_access(recv, &f, pos, sc)?;
                        Ok(())
                    }
                    ExprKind::Call(n, _) if self.preds.contains_key(n.as_str()) => {
                        self.pred_args(loc, sc)
                    }
                    _ => err(loc.pos, "acc requires a field location or a predicate instance"),
                }
            }
            ExprKind::Call(..) => self.pred_args(e, sc),
            ExprKind::Quant(QuantKind::Forall, vars, trigs, body) => {
                sc.frames.push(Vec::new());
                let r = (|| {
                    for (v, t) in vars.iter() {
                        self.valid_type(t, pos)?;
                        sc.declare(v, t.clone(), false);
                    }
                    for t in trigs.iter_mut().flatten() {
                        self.ty(t, sc)?;
                    }
                    self.assertion(body, sc)
                })();
                sc.frames.pop();
                r
            }
            _ => {
                let mut at = pos;
                e.any(&mut |x| {
                    let hit = matches!(x.kind, ExprKind::Acc(..)) || self.is_predicate_call(x);
                    if hit {
                        at = x.pos;
                    }
                    hit
                });
                err(at, "accessibility predicate outside an assertion position")
            }
        }
    }

    fn pred_args(&self, call: &mut Expr, sc: &mut Scope) -> R<()> {
        let ExprKind::Call(name, args) = &mut call.kind else {
            unreachable!("predicate instance is a call")
        };
        let (params, _) = &self.preds[name.as_str()];
        if params.len() != args.len() {
            return err(
                call.pos,
                format!(
                    "predicate `{name}` expects {} argument(s), found {}",
                    params.len(),
                    args.len()
                ),
            );
        }
        for (a, t) in args.iter_mut().zip(params) {
            let found = self.ty(a, sc)?;
            if !compatible(t, &found) {
                return err(a.pos, format!("argument has type {found}, expected {t}"));
            }
        }
        Ok(())
    }

    /// Splits a checked assertion into canonical conjuncts.
    fn normalize(&self, e: &Expr, guard: Option<Expr>, out: &mut Vec<Assertion>) -> R<()> {
        if !self.impure(e) {
            out.push(Assertion::Pure(guarded(guard, e)));
            return Ok(());
        }
        match &e.kind {
            ExprKind::Binary(BinOp::And, a, b) => {
                self.normalize(a, guard.clone(), out)?;
                self.normalize(b, guard, out)
            }
            ExprKind::Binary(BinOp::Implies, c, b) => self.normalize(b, and_guard(guard, c), out),
            ExprKind::Cond(c, a, b) => {
                self.normalize(a, and_guard(guard.clone(), c), out)?;
                self.normalize(b, and_guard(guard, &Expr::not((**c).clone())), out)
            }
            ExprKind::Acc(loc, perm) => {
                let perm = perm
                    .as_deref()
                    .cloned()
                    .unwrap_or_else(|| Expr::new(ExprKind::FullPerm, e.pos));
                match &loc.kind {
                    ExprKind::Field(recv, field) => {
                        out.push(Assertion::Acc(AccAssertion {
                            guard,
                            recv: (**recv).clone(),
                            field: field.clone(),
                            perm,
                            pos: e.pos,
                        }));
                        Ok(())
                    }
                    ExprKind::Call(name, args) => {
                        out.push(Assertion::Pred(PredAssertion {
                            guard,
                            name: name.clone(),
                            args: args.clone(),
                            perm,
                            pos: e.pos,
                        }));
                        Ok(())
                    }
                    _ => err(loc.pos, "acc requires a field location or a predicate instance"),
                }
            }
            ExprKind::Call(name, args) => {
                out.push(Assertion::Pred(PredAssertion {
                    guard,
                    name: name.clone(),
                    args: args.clone(),
                    perm: Expr::new(ExprKind::FullPerm, e.pos),
                    pos: e.pos,
                }));
                Ok(())
            }
            ExprKind::Quant(QuantKind::Forall, vars, trigs, body) => {
                let [(var, ty)] = vars.as_slice() else {
                    return err(
                        e.pos,
                        "an iterated separating conjunction must quantify over exactly one variable",
                    );
                };
                let mut var = var.clone();
                let mut body = (**body).clone();
                let mut trigs = trigs.clone();
                if let Some(g) = &guard {
                    let taken = free_names(g);
                    if taken.contains(&var) {
                        let mut k = 1;
                        let fresh = loop {
                            let c = format!("{var}_{k}");
                            if !taken.contains(&c) && !free_names(&body).contains(&c) {
                                break c;
                            }
                            k += 1;
                        };
                        let map = HashMap::from([(
                            var.clone(),
                            Expr::new(ExprKind::Var(fresh.clone()), e.pos),
                        )]);
                        body = subst_expr(&body, &map);
                        trigs = trigs
                            .iter()
                            .map(|t| t.iter().map(|x| subst_expr(x, &map)).collect())
                            .collect();
                        var = fresh;
                    }
                }
                self.isc_body(&var, ty, &trigs, &body, guard, e.pos, out)
            }
            _ => err(e.pos, "accessibility predicate outside an assertion position"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn isc_body(
        &self,
        var: &str,
        ty: &Type,
        trigs: &[Vec<Expr>],
        e: &Expr,
        cond: Option<Expr>,
        qpos: Pos,
        out: &mut Vec<Assertion>,
    ) -> R<()> {
        if !self.impure(e) {
            let body = guarded(cond, e);
            out.push(Assertion::Pure(Expr::new(
                ExprKind::Quant(
                    QuantKind::Forall,
                    vec![(var.to_string(), ty.clone())],
                    trigs.to_vec(),
                    Box::new(body),
                ),
                qpos,
            )));
            return Ok(());
        }
        match &e.kind {
            ExprKind::Binary(BinOp::And, a, b) => {
                self.isc_body(var, ty, trigs, a, cond.clone(), qpos, out)?;
                self.isc_body(var, ty, trigs, b, cond, qpos, out)
            }
            ExprKind::Binary(BinOp::Implies, c, b) => {
                self.isc_body(var, ty, trigs, b, and_guard(cond, c), qpos, out)
            }
            ExprKind::Acc(loc, perm) => match &loc.kind {
                ExprKind::Field(recv, field) => {
                    out.push(Assertion::Isc(Isc {
                        var: var.to_string(),
                        ty: ty.clone(),
                        cond: cond.unwrap_or_else(|| Expr::tt(qpos)),
                        recv: (**recv).clone(),
                        field: field.clone(),
                        perm: perm
                            .as_deref()
                            .cloned()
                            .unwrap_or_else(|| Expr::new(ExprKind::FullPerm, qpos)),
                        pos: qpos,
                    }));
                    Ok(())
                }
                _ => err(
                    e.pos,
                    "predicate instances inside iterated separating conjunctions are not supported",
                ),
            },
            ExprKind::Call(..) => err(
                e.pos,
                "predicate instances inside iterated separating conjunctions are not supported",
            ),
            ExprKind::Quant(QuantKind::Forall, ..) => err(
                e.pos,
                "nested iterated separating conjunctions are not supported",
            ),
            ExprKind::Cond(..) => err(
                e.pos,
                "a conditional in an iterated separating conjunction may only occur inside the permission amount",
            ),
            _ => err(e.pos, "accessibility predicate outside an assertion position"),
        }
    }

    // ------------------------------------------------------------ expressions

    fn expect_bool(&self, e: &mut Expr, sc: &mut Scope) -> R<()> {
        let t = self.ty(e, sc)?;
        if t != Type::Bool {
            return err(e.pos, format!("expected Bool, found {t}"));
        }
        Ok(())
    }

    fn field_access(&self, recv: &mut Expr, field: &str, pos: Pos, sc: &mut Scope) -> R<Type> {
        if !sc.heap {
            return err(pos, "heap access in a heap-independent context");
        }
        let Some(ft) = self.fields.get(field) else {
            return err(pos, format!("unknown field `{field}`"));
        };
        let rt = self.ty(recv, sc)?;
        if rt != Type::Ref {
            return err(recv.pos, format!("field receiver has type {rt}, expected Ref"));
        }
        Ok(ft.clone())
    }

    /// Type of a pure expression. Also fills in element types of set literals.
    fn ty(&self, e: &mut Expr, sc: &mut Scope) -> R<Type> {
        let pos = e.pos;
        match &mut e.kind {
            ExprKind::Int(_) => Ok(Type::Int),
            ExprKind::Bool(_) => Ok(Type::Bool),
            ExprKind::Null => Ok(Type::Ref),
            ExprKind::FullPerm | ExprKind::NoPerm => Ok(Type::Perm),
            ExprKind::Result => match &sc.result {
                Some(t) => Ok(t.clone()),
                None => err(pos, "`result` outside a function postcondition"),
            },
            ExprKind::Var(v) => match sc.lookup(v) {
                Some((_, t, _)) => Ok(t.clone()),
                None => err(pos, format!("unresolved name `{v}`")),
            },
            ExprKind::Field(recv, f) => {
                let f = f.clone();
                self.field_access(recv, &f, pos, sc)
            }
            ExprKind::Call(name, args) => {
                if self.preds.contains_key(name.as_str()) {
                    return err(pos, format!("predicate instance `{name}` outside an assertion position"));
                }
                if self.methods.contains_key(name.as_str()) {
                    return err(pos, format!("method `{name}` called inside an expression"));
                }
                let Some((params, result, heap)) = self.funcs.get(name.as_str()) else {
                    return err(pos, format!("unresolved function `{name}`"));
                };
                if *heap && !sc.heap {
                    return err(pos, format!("heap-dependent function `{name}` in a heap-independent context"));
                }
                if params.len() != args.len() {
                    return err(
                        pos,
                        format!(
                            "function `{name}` expects {} argument(s), found {}",
                            params.len(),
                            args.len()
                        ),
                    );
                }
                for (a, t) in args.iter_mut().zip(params) {
                    let found = self.ty(a, sc)?;
                    if !compatible(t, &found) {
                        return err(a.pos, format!("argument has type {found}, expected {t}"));
                    }
                }
                Ok(result.clone())
            }
            ExprKind::Unary(op, a) => {
                let t = self.ty(a, sc)?;
                match op {
                    UnOp::Not if t == Type::Bool => Ok(Type::Bool),
                    UnOp::Neg if is_numeric(&t) => Ok(t),
                    _ => err(pos, format!("operand has type {t}")),
                }
            }
            ExprKind::Binary(op, a, b) => {
                let op = *op;
                let ta = self.ty(a, sc)?;
                let tb = self.ty(b, sc)?;
                binary_type(op, &ta, &tb).ok_or_else(|| WfError {
                    pos,
                    message: format!("operator `{}` cannot be applied to {ta} and {tb}", op.symbol()),
                })
            }
            ExprKind::Cond(c, a, b) => {
                self.expect_bool(c, sc)?;
                let ta = self.ty(a, sc)?;
                let tb = self.ty(b, sc)?;
                if ta == tb {
                    Ok(ta)
                } else if is_numeric(&ta) && is_numeric(&tb) {
                    Ok(Type::Perm)
                } else {
                    err(pos, format!("conditional arms have types {ta} and {tb}"))
                }
            }
            ExprKind::Old(label, inner) => {
                match (sc.old, label.as_ref()) {
                    (OldMode::Forbidden, _) => {
                        return err(pos, "`old` is not allowed here (no state has been captured)")
                    }
                    (OldMode::PreState, Some(l)) => {
                        return err(pos, format!("label `{l}` is not in scope"))
                    }
                    (OldMode::Labels, Some(l)) if !sc.labels.contains(l) => {
                        return err(pos, format!("label `{l}` is not in scope"))
                    }
                    _ => {}
                }
                self.ty(inner, sc)
            }
            ExprKind::Acc(..) => err(pos, "accessibility predicate outside an assertion position"),
            ExprKind::Quant(_, vars, trigs, body) => {
                sc.frames.push(Vec::new());
                let r = (|| {
                    for (v, t) in vars.iter() {
                        self.valid_type(t, pos)?;
                        sc.declare(v, t.clone(), false);
                    }
                    for t in trigs.iter_mut().flatten() {
                        self.ty(t, sc)?;
                    }
                    self.expect_bool(body, sc)
                })();
                sc.frames.pop();
                r.map(|_| Type::Bool)
            }
            ExprKind::SetLit(ann, elems) => {
                let mut elem_ty = ann.clone();
                if let Some(t) = &elem_ty {
                    self.valid_type(t, pos)?;
                }
                for x in elems.iter_mut() {
                    let t = self.ty(x, sc)?;
                    match &elem_ty {
                        None => elem_ty = Some(t),
                        Some(et) if compatible(et, &t) => {}
                        Some(et) => {
                            return err(x.pos, format!("set element has type {t}, expected {et}"))
                        }
                    }
                }
                match elem_ty {
                    Some(t) => {
                        *ann = Some(t.clone());
                        Ok(Type::Set(Box::new(t)))
                    }
                    None => err(pos, "element type of an empty set must be given, as in `Set[Int]()`"),
                }
            }
        }
    }
}

fn binary_type(op: BinOp, a: &Type, b: &Type) -> Option<Type> {
    use BinOp::*;
    let numeric = is_numeric(a) && is_numeric(b);
    let joined = if a == b { a.clone() } else { Type::Perm };
    match op {
        Add | Sub | Mul if numeric => Some(joined),
        Div if numeric => Some(Type::Perm),
        IntDiv | Mod if *a == Type::Int && *b == Type::Int => Some(Type::Int),
        Eq | Ne if a == b || numeric => Some(Type::Bool),
        Lt | Le | Gt | Ge if numeric => Some(Type::Bool),
        And | Or | Implies | Iff if *a == Type::Bool && *b == Type::Bool => Some(Type::Bool),
        In => match b {
            Type::Set(e) if compatible(e, a) => Some(Type::Bool),
            _ => None,
        },
        Union | Intersection | SetMinus if a == b && matches!(a, Type::Set(_)) => Some(a.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{expand_macros, parse};

    fn check(src: &str) -> Result<CheckedProgram, WfErrors> {
        check_wellformed(expand_macros(parse(src).unwrap()).unwrap())
    }

    const ARRAY: &str = "field val: Int
        domain Array {
          function loc(a: Array, i: Int): Ref
          function len(a: Array): Int
        }";

    #[test]
    fn isc_is_canonicalised() {
        let src = format!(
            "{ARRAY}
            method m(a: Array, l: Int, r: Int)
              requires forall i: Int :: l <= i && i < r ==> acc(loc(a, i).val)"
        );
        let p = check(&src).unwrap();
        let [Assertion::Isc(isc)] = p.methods[0].pres.as_slice() else {
            panic!("expected one ISC, got {:?}", p.methods[0].pres)
        };
        assert_eq!(isc.var, "i");
        assert_eq!(isc.cond.to_string(), "((l <= i) && (i < r))");
        assert_eq!(isc.recv.to_string(), "loc(a, i)");
        assert_eq!(isc.field, "val");
        assert_eq!(isc.perm.kind, ExprKind::FullPerm);
    }

    #[test]
    fn zero_permission_isc_is_accepted() {
        let src = format!(
            "{ARRAY}
            method m(a: Array) requires forall i: Int :: acc(loc(a, i).val, none)"
        );
        let p = check(&src).unwrap();
        let [Assertion::Isc(isc)] = p.methods[0].pres.as_slice() else {
            panic!()
        };
        assert!(matches!(isc.cond.kind, ExprKind::Bool(true)));
        assert_eq!(isc.perm.kind, ExprKind::NoPerm);
    }

    #[test]
    fn nested_isc_is_rejected() {
        let err = check(
            "field f: Int
             method m(s: Set[Ref]) requires forall n: Ref :: n in s ==> forall m: Ref :: acc(m.f)",
        )
        .unwrap_err();
        assert!(err.0[0].message.contains("nested"), "{err}");
    }

    #[test]
    fn conjunction_under_quantifier_is_repeated_quantification() {
        let p = check(
            "field f: Int field g: Int
             method m(s: Set[Ref]) requires forall n: Ref :: n in s ==> acc(n.f) && acc(n.g) && n.f > 0",
        )
        .unwrap();
        let pres = &p.methods[0].pres;
        assert_eq!(pres.len(), 3);
        assert!(matches!(&pres[0], Assertion::Isc(i) if i.field == "f"));
        assert!(matches!(&pres[1], Assertion::Isc(i) if i.field == "g"));
        assert!(pres[2].is_pure_quantifier());
    }

    #[test]
    fn conditional_outside_permission_is_rejected() {
        let err = check(
            "field f: Int
             method m(s: Set[Ref], b: Bool) requires forall n: Ref :: n in s ==> (b ? acc(n.f) : acc(n.f, 1/2))",
        )
        .unwrap_err();
        assert!(err.0[0].message.contains("conditional"), "{err}");
        check(
            "field f: Int
             method m(s: Set[Ref], b: Bool) requires forall n: Ref :: n in s ==> acc(n.f, b ? write : 1/2)",
        )
        .unwrap();
    }

    #[test]
    fn acc_in_expression_position_is_rejected() {
        let err = check("field f: Int method m(x: Ref) { if (acc(x.f)) { } }").unwrap_err();
        assert!(err.0[0].message.contains("accessibility"), "{err}");
        let err = check("field f: Int method m(x: Ref) requires acc(x.f) || true").unwrap_err();
        assert!(err.0[0].message.contains("accessibility"), "{err}");
    }

    #[test]
    fn old_outside_capture_is_rejected() {
        let err = check("field f: Int method m(x: Ref) requires acc(x.f) && old(x.f) == 1").unwrap_err();
        assert!(err.0[0].message.contains("old"), "{err}");
        let err = check("field f: Int method m(x: Ref) requires acc(x.f) { assert old[l](x.f) == 1 }")
            .unwrap_err();
        assert!(err.0[0].message.contains("label"), "{err}");
        check("field f: Int method m(x: Ref) requires acc(x.f) { label l; assert old[l](x.f) == x.f }")
            .unwrap();
    }

    #[test]
    fn type_errors_and_unresolved_names() {
        assert!(check("method m(x: Int) requires x == true").is_err());
        assert!(check("method m() requires y > 0").is_err());
        assert!(check("method m(x: Int) { x := 1 }").is_err());
        assert!(check("method m() { var s: Set[Int] := Set() }").is_err());
    }

    #[test]
    fn guard_is_pushed_into_accessibility_predicates() {
        let p = check("field f: Int method m(x: Ref, b: Bool) requires b ==> acc(x.f) && x.f > 0").unwrap();
        let pres = &p.methods[0].pres;
        assert!(matches!(&pres[0], Assertion::Acc(a) if a.guard.is_some()));
        assert_eq!(pres[1].to_string(), "(b ==> (x.f > 0))");
    }

    #[test]
    fn method_call_assignment_becomes_call() {
        let p = check(
            "method inc(x: Int) returns (y: Int)
             method m() returns (r: Int) { r := inc(1) }",
        )
        .unwrap();
        let body = p.methods[1].body.as_ref().unwrap();
        assert!(matches!(&body[0].kind, CStmtKind::Call { targets, .. } if targets == &["r"]));
    }

    #[test]
    fn set_literal_element_type_is_filled_in() {
        let p = check("method m(x: Ref) requires x in Set(x)").unwrap();
        let Assertion::Pure(e) = &p.methods[0].pres[0] else { panic!() };
        let ExprKind::Binary(_, _, s) = &e.kind else { panic!() };
        assert!(matches!(&s.kind, ExprKind::SetLit(Some(Type::Ref), _)));
    }
}
