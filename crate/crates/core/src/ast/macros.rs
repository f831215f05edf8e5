//! Macro expansion (`define`).
//!
//! Macro bodies are expanded once, eagerly, so that a recursive cycle is
//! reported even for macros that are never used. Parameters are substituted
//! capture-avoidingly; any other free name in a body is resolved at the use
//! site. Expanded nodes carry the position of the use site, arguments keep
//! their own positions.

use std::collections::{BTreeSet, HashMap};

use super::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MacroError {
    #[error("{pos}: macro `{name}` expects {expected} argument(s), found {found}")]
    Arity {
        name: Ident,
        expected: usize,
        found: usize,
        pos: Pos,
    },
    #[error("{pos}: recursive macro cycle {}", cycle.join(" -> "))]
    Cycle { cycle: Vec<Ident>, pos: Pos },
    #[error("{pos}: duplicate macro `{name}`")]
    Duplicate { name: Ident, pos: Pos },
    #[error("{pos}: macro `{name}` is a {kind} macro and cannot be used here")]
    WrongKind {
        name: Ident,
        kind: &'static str,
        pos: Pos,
    },
}

impl MacroError {
    pub fn pos(&self) -> Pos {
        match self {
            MacroError::Arity { pos, .. }
            | MacroError::Cycle { pos, .. }
            | MacroError::Duplicate { pos, .. }
            | MacroError::WrongKind { pos, .. } => *pos,
        }
    }
}

/// Inlines every macro use and drops the macro definitions.
pub fn expand_macros(mut prog: Program) -> Result<Program, MacroError> {
    if prog.macros.is_empty() {
        return Ok(prog);
    }
    let macros = std::mem::take(&mut prog.macros);
    let mut ex = Expander {
        defs: HashMap::new(),
        done: HashMap::new(),
    };
    for m in &macros {
        if ex.defs.insert(m.name.clone(), m.clone()).is_some() {
            return Err(MacroError::Duplicate {
                name: m.name.clone(),
                pos: m.pos,
            });
        }
    }
    for m in &macros {
        ex.body(&m.name, &mut Vec::new())?;
    }

    for d in &mut prog.domains {
        for ax in &mut d.axioms {
            ax.body = ex.expr(&ax.body, &mut Vec::new())?;
        }
    }
    for f in &mut prog.functions {
        let mut bound: Vec<Ident> = f.params.iter().map(|p| p.name.clone()).collect();
        for e in f.pres.iter_mut().chain(f.posts.iter_mut()).chain(f.body.iter_mut()) {
            *e = ex.expr(e, &mut bound)?;
        }
    }
    for p in &mut prog.predicates {
        let mut bound: Vec<Ident> = p.params.iter().map(|p| p.name.clone()).collect();
        if let Some(b) = &mut p.body {
            *b = ex.expr(b, &mut bound)?;
        }
    }
    for m in &mut prog.methods {
        let mut bound: Vec<Ident> = m
            .params
            .iter()
            .chain(&m.returns)
            .map(|p| p.name.clone())
            .collect();
        if let Some(body) = &m.body {
            collect_locals(body, &mut bound);
        }
        for e in m.pres.iter_mut().chain(m.posts.iter_mut()) {
            *e = ex.expr(e, &mut bound)?;
        }
        if let Some(body) = &m.body {
            m.body = Some(ex.stmts(body, &mut bound, &mut Vec::new())?);
        }
    }
    Ok(prog)
}

fn collect_locals(stmts: &[Stmt], out: &mut Vec<Ident>) {
    for s in stmts {
        match &s.kind {
            StmtKind::VarDecl { name, .. } => out.push(name.clone()),
            StmtKind::If { then, els, .. } => {
                collect_locals(then, out);
                if let Some(e) = els {
                    collect_locals(e, out);
                }
            }
            StmtKind::While { body, .. } => collect_locals(body, out),
            _ => {}
        }
    }
}

struct Expander {
    defs: HashMap<Ident, Macro>,
    /// Fully expanded bodies, keyed by macro name.
    done: HashMap<Ident, MacroBody>,
}

impl Expander {
    fn params(&self, name: &str) -> Vec<Ident> {
        self.defs[name].params.clone().unwrap_or_default()
    }

    fn body(&mut self, name: &str, stack: &mut Vec<Ident>) -> Result<MacroBody, MacroError> {
        if let Some(b) = self.done.get(name) {
            return Ok(b.clone());
        }
        if let Some(start) = stack.iter().position(|n| n == name) {
            let mut cycle = stack[start..].to_vec();
            cycle.push(name.to_string());
            return Err(MacroError::Cycle {
                cycle,
                pos: self.defs[name].pos,
            });
        }
        stack.push(name.to_string());
        let def = self.defs[name].clone();
        let mut bound = self.params(name);
        let body = match &def.body {
            MacroBody::Expr(e) => MacroBody::Expr(self.expr_in(e, &mut bound, stack)?),
            MacroBody::Stmts(ss) => {
                collect_locals(ss, &mut bound);
                MacroBody::Stmts(self.stmts(ss, &mut bound, stack)?)
            }
        };
        stack.pop();
        self.done.insert(name.to_string(), body.clone());
        Ok(body)
    }

    fn expr(&mut self, e: &Expr, bound: &mut Vec<Ident>) -> Result<Expr, MacroError> {
        self.expr_in(e, bound, &mut Vec::new())
    }

    /// Instantiates the expression macro `name` at `pos`.
    fn instantiate(
        &mut self,
        name: &str,
        args: Vec<Expr>,
        pos: Pos,
        stack: &mut Vec<Ident>,
    ) -> Result<Expr, MacroError> {
        let params = self.params(name);
        if params.len() != args.len() {
            return Err(MacroError::Arity {
                name: name.to_string(),
                expected: params.len(),
                found: args.len(),
                pos,
            });
        }
        match self.body(name, stack)? {
            MacroBody::Expr(mut body) => {
                body.restamp(pos);
                let map: HashMap<Ident, Expr> = params.into_iter().zip(args).collect();
                Ok(subst_expr(&body, &map))
            }
            MacroBody::Stmts(_) => Err(MacroError::WrongKind {
                name: name.to_string(),
                kind: "statement",
                pos,
            }),
        }
    }

    fn expr_in(
        &mut self,
        e: &Expr,
        bound: &mut Vec<Ident>,
        stack: &mut Vec<Ident>,
    ) -> Result<Expr, MacroError> {
        match &e.kind {
            ExprKind::Var(n) if !bound.contains(n) && self.defs.contains_key(n) => {
                self.instantiate(n, vec![], e.pos, stack)
            }
            ExprKind::Call(n, args) if !bound.contains(n) && self.defs.contains_key(n) => {
                let args = args
                    .iter()
                    .map(|a| self.expr_in(a, bound, stack))
                    .collect::<Result<Vec<_>, _>>()?;
                self.instantiate(n, args, e.pos, stack)
            }
            ExprKind::Quant(_, vars, _, _) => {
                let n = bound.len();
                bound.extend(vars.iter().map(|(v, _)| v.clone()));
                let out = self.children(e, bound, stack);
                bound.truncate(n);
                out
            }
            _ => self.children(e, bound, stack),
        }
    }

    fn children(
        &mut self,
        e: &Expr,
        bound: &mut Vec<Ident>,
        stack: &mut Vec<Ident>,
    ) -> Result<Expr, MacroError> {
        let mut out = e.clone();
        let mut err = None;
        out.for_each_child_mut(&mut |c| {
            if err.is_some() {
                return;
            }
            match self.expr_in(c, bound, stack) {
                Ok(x) => *c = x,
                Err(x) => err = Some(x),
            }
        });
        match err {
            Some(x) => Err(x),
            None => Ok(out),
        }
    }

    fn stmts(
        &mut self,
        ss: &[Stmt],
        bound: &mut Vec<Ident>,
        stack: &mut Vec<Ident>,
    ) -> Result<Vec<Stmt>, MacroError> {
        let mut out = Vec::with_capacity(ss.len());
        for s in ss {
            let kind = match &s.kind {
                StmtKind::Call {
                    targets,
                    method,
                    args,
                } if self.defs.contains_key(method) && !bound.contains(method) => {
                    let params = self.params(method);
                    if params.len() != args.len() {
                        return Err(MacroError::Arity {
                            name: method.clone(),
                            expected: params.len(),
                            found: args.len(),
                            pos: s.pos,
                        });
                    }
                    let args = args
                        .iter()
                        .map(|a| self.expr_in(a, bound, stack))
                        .collect::<Result<Vec<_>, _>>()?;
                    match self.body(method, stack)? {
                        MacroBody::Stmts(body) if targets.is_empty() => {
                            let map: HashMap<Ident, Expr> = params.into_iter().zip(args).collect();
                            for mut st in body {
                                restamp_stmt(&mut st, s.pos);
                                out.push(subst_stmt(&st, &map));
                            }
                            continue;
                        }
                        _ => {
                            return Err(MacroError::WrongKind {
                                name: method.clone(),
                                kind: if targets.is_empty() {
                                    "expression"
                                } else {
                                    "statement"
                                },
                                pos: s.pos,
                            })
                        }
                    }
                }
                StmtKind::Inhale(e) => StmtKind::Inhale(self.expr_in(e, bound, stack)?),
                StmtKind::Exhale(e) => StmtKind::Exhale(self.expr_in(e, bound, stack)?),
                StmtKind::Assert(e) => StmtKind::Assert(self.expr_in(e, bound, stack)?),
                StmtKind::Assume(e) => StmtKind::Assume(self.expr_in(e, bound, stack)?),
                StmtKind::Fold(e) => StmtKind::Fold(self.expr_in(e, bound, stack)?),
                StmtKind::Unfold(e) => StmtKind::Unfold(self.expr_in(e, bound, stack)?),
                StmtKind::VarDecl { name, ty, init } => StmtKind::VarDecl {
                    name: name.clone(),
                    ty: ty.clone(),
                    init: init.as_ref().map(|e| self.expr_in(e, bound, stack)).transpose()?,
                },
                StmtKind::Assign { target, value } => StmtKind::Assign {
                    target: target.clone(),
                    value: self.expr_in(value, bound, stack)?,
                },
                StmtKind::FieldWrite { recv, field, value } => StmtKind::FieldWrite {
                    recv: self.expr_in(recv, bound, stack)?,
                    field: field.clone(),
                    value: self.expr_in(value, bound, stack)?,
                },
                StmtKind::If { cond, then, els } => StmtKind::If {
                    cond: self.expr_in(cond, bound, stack)?,
                    then: self.stmts(then, bound, stack)?,
                    els: match els {
                        Some(b) => Some(self.stmts(b, bound, stack)?),
                        None => None,
                    },
                },
                StmtKind::While {
                    cond,
                    invariants,
                    body,
                } => StmtKind::While {
                    cond: self.expr_in(cond, bound, stack)?,
                    invariants: invariants
                        .iter()
                        .map(|i| self.expr_in(i, bound, stack))
                        .collect::<Result<_, _>>()?,
                    body: self.stmts(body, bound, stack)?,
                },
                StmtKind::Call {
                    targets,
                    method,
                    args,
                } => StmtKind::Call {
                    targets: targets.clone(),
                    method: method.clone(),
                    args: args
                        .iter()
                        .map(|a| self.expr_in(a, bound, stack))
                        .collect::<Result<_, _>>()?,
                },
                StmtKind::Label(l) => StmtKind::Label(l.clone()),
            };
            out.push(Stmt { kind, pos: s.pos });
        }
        Ok(out)
    }
}

/// Names occurring free in `e` (variables only, not function names).
pub(crate) fn free_names(e: &Expr) -> BTreeSet<Ident> {
    fn go(e: &Expr, bound: &mut Vec<Ident>, out: &mut BTreeSet<Ident>) {
        match &e.kind {
            ExprKind::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            ExprKind::Quant(_, vars, _, _) => {
                let n = bound.len();
                bound.extend(vars.iter().map(|(v, _)| v.clone()));
                for c in e.children() {
                    go(c, bound, out);
                }
                bound.truncate(n);
            }
            _ => {
                for c in e.children() {
                    go(c, bound, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

/// Capture-avoiding simultaneous substitution of variables by expressions.
pub(crate) fn subst_expr(e: &Expr, map: &HashMap<Ident, Expr>) -> Expr {
    match &e.kind {
        ExprKind::Var(v) => map.get(v).cloned().unwrap_or_else(|| e.clone()),
        ExprKind::Quant(q, vars, trigs, body) => {
            let mut inner: HashMap<Ident, Expr> = map
                .iter()
                .filter(|(k, _)| !vars.iter().any(|(v, _)| v == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let incoming: BTreeSet<Ident> = inner.values().flat_map(free_names).collect();
            let mut taken: BTreeSet<Ident> = incoming.clone();
            taken.extend(free_names(e));
            taken.extend(vars.iter().map(|(v, _)| v.clone()));
            let mut new_vars = Vec::with_capacity(vars.len());
            for (v, t) in vars {
                if incoming.contains(v) {
                    let mut k = 1;
                    let fresh = loop {
                        let cand = format!("{v}_{k}");
                        if !taken.contains(&cand) {
                            break cand;
                        }
                        k += 1;
                    };
                    taken.insert(fresh.clone());
                    inner.insert(v.clone(), Expr::new(ExprKind::Var(fresh.clone()), e.pos));
                    new_vars.push((fresh, t.clone()));
                } else {
                    new_vars.push((v.clone(), t.clone()));
                }
            }
            let trigs = trigs
                .iter()
                .map(|t| t.iter().map(|x| subst_expr(x, &inner)).collect())
                .collect();
            Expr::new(
                ExprKind::Quant(*q, new_vars, trigs, Box::new(subst_expr(body, &inner))),
                e.pos,
            )
        }
        _ => {
            let mut out = e.clone();
            out.for_each_child_mut(&mut |c| *c = subst_expr(c, map));
            out
        }
    }
}

fn subst_stmt(s: &Stmt, map: &HashMap<Ident, Expr>) -> Stmt {
    let se = |e: &Expr| subst_expr(e, map);
    let rename = |n: &Ident| match map.get(n).map(|e| &e.kind) {
        Some(ExprKind::Var(m)) => m.clone(),
        _ => n.clone(),
    };
    let ss = |b: &[Stmt]| b.iter().map(|s| subst_stmt(s, map)).collect::<Vec<_>>();
    let kind = match &s.kind {
        StmtKind::Inhale(e) => StmtKind::Inhale(se(e)),
        StmtKind::Exhale(e) => StmtKind::Exhale(se(e)),
        StmtKind::Assert(e) => StmtKind::Assert(se(e)),
        StmtKind::Assume(e) => StmtKind::Assume(se(e)),
        StmtKind::Fold(e) => StmtKind::Fold(se(e)),
        StmtKind::Unfold(e) => StmtKind::Unfold(se(e)),
        StmtKind::VarDecl { name, ty, init } => StmtKind::VarDecl {
            name: name.clone(),
            ty: ty.clone(),
            init: init.as_ref().map(se),
        },
        StmtKind::Assign { target, value } => StmtKind::Assign {
            target: rename(target),
            value: se(value),
        },
        StmtKind::FieldWrite { recv, field, value } => StmtKind::FieldWrite {
            recv: se(recv),
            field: field.clone(),
            value: se(value),
        },
        StmtKind::If { cond, then, els } => StmtKind::If {
            cond: se(cond),
            then: ss(then),
            els: els.as_deref().map(ss),
        },
        StmtKind::While {
            cond,
            invariants,
            body,
        } => StmtKind::While {
            cond: se(cond),
            invariants: invariants.iter().map(se).collect(),
            body: ss(body),
        },
        StmtKind::Call {
            targets,
            method,
            args,
        } => StmtKind::Call {
            targets: targets.iter().map(rename).collect(),
            method: method.clone(),
            args: args.iter().map(se).collect(),
        },
        StmtKind::Label(l) => StmtKind::Label(l.clone()),
    };
    Stmt { kind, pos: s.pos }
}

fn restamp_stmt(s: &mut Stmt, pos: Pos) {
    s.pos = pos;
    let re = |e: &mut Expr| e.restamp(pos);
    match &mut s.kind {
        StmtKind::Inhale(e)
        | StmtKind::Exhale(e)
        | StmtKind::Assert(e)
        | StmtKind::Assume(e)
        | StmtKind::Fold(e)
        | StmtKind::Unfold(e) => re(e),
        StmtKind::VarDecl { init, .. } => {
            if let Some(e) = init {
                re(e)
            }
        }
        StmtKind::Assign { value, .. } => re(value),
        StmtKind::FieldWrite { recv, value, .. } => {
            re(recv);
            re(value)
        }
        StmtKind::If { cond, then, els } => {
            re(cond);
            then.iter_mut().for_each(|s| restamp_stmt(s, pos));
            if let Some(b) = els {
                b.iter_mut().for_each(|s| restamp_stmt(s, pos));
            }
        }
        StmtKind::While {
            cond,
            invariants,
            body,
        } => {
            re(cond);
            invariants.iter_mut().for_each(re);
            body.iter_mut().for_each(|s| restamp_stmt(s, pos));
        }
        StmtKind::Call { args, .. } => args.iter_mut().for_each(re),
        StmtKind::Label(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse;

    fn expand(src: &str) -> Result<Program, MacroError> {
        expand_macros(parse(src).unwrap())
    }

    #[test]
    fn macro_use_in_precondition_is_inlined() {
        let p = expand(
            "define pre1(a, l, r) 0 <= l && l < r
             method m(a: Int, left: Int, right: Int) requires pre1(a, left, right)",
        )
        .unwrap();
        assert!(p.macros.is_empty());
        assert_eq!(p.methods[0].pres[0].to_string(), "((0 <= left) && (left < right))");
    }

    #[test]
    fn program_without_macros_is_unchanged() {
        let p = parse("field f: Int method m(x: Ref) requires acc(x.f) { x.f := 1 }").unwrap();
        assert_eq!(expand_macros(p.clone()).unwrap(), p);
    }

    #[test]
    fn self_reference_is_a_cycle() {
        let err = expand("define X() X()").unwrap_err();
        assert!(matches!(err, MacroError::Cycle { ref cycle, .. } if cycle == &["X", "X"]));
    }

    #[test]
    fn mutual_recursion_is_a_cycle() {
        let err = expand("define A(x) B(x) define B(y) A(y) + 1").unwrap_err();
        assert!(matches!(err, MacroError::Cycle { .. }));
    }

    #[test]
    fn arity_mismatch_is_reported_at_use() {
        let err = expand("define P(a, b) a < b method m() requires P(1)").unwrap_err();
        assert!(matches!(err, MacroError::Arity { expected: 2, found: 1, .. }));
        assert_eq!(err.pos(), Pos::new(1, 42));
    }

    #[test]
    fn substitution_avoids_capture() {
        let p = expand(
            "define Q(n) forall i: Int :: i < n
             method m(i: Int) requires Q(i + 1)",
        )
        .unwrap();
        assert_eq!(
            p.methods[0].pres[0].to_string(),
            "(forall i_1: Int :: (i_1 < (i + 1)))"
        );
    }

    #[test]
    fn free_names_resolve_at_use_site() {
        let p = expand("define Big x > 10 method m(x: Int) requires Big").unwrap();
        assert_eq!(p.methods[0].pres[0].to_string(), "(x > 10)");
    }

    #[test]
    fn statement_macros_are_spliced() {
        let p = expand(
            "define bump(v) { v := v + 1; v := v + 1 }
             method m() returns (k: Int) { k := 0; bump(k) }",
        )
        .unwrap();
        let body = p.methods[0].body.as_ref().unwrap();
        assert_eq!(body.len(), 3);
        assert!(matches!(&body[2].kind, StmtKind::Assign { target, .. } if target == "k"));
    }

    #[test]
    fn expanded_nodes_take_use_site_position() {
        let p = expand("define Z 0 < 1\nmethod m()\n  requires Z").unwrap();
        assert_eq!(p.methods[0].pres[0].pos, Pos::new(3, 12));
    }
}
