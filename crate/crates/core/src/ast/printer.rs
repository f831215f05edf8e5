//! Pretty printer. Output is fully parenthesised, so re-parsing it yields the
//! same tree shape and printing again yields the same text.

use std::fmt::{self, Write};

use super::*;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ExprKind::*;
        let list = |es: &[Expr]| es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ");
        match &self.kind {
            Int(i) => write!(f, "{i}"),
            Bool(b) => write!(f, "{b}"),
            Null => write!(f, "null"),
            FullPerm => write!(f, "write"),
            NoPerm => write!(f, "none"),
            Result => write!(f, "result"),
            Var(v) => write!(f, "{v}"),
            Field(e, field) => write!(f, "{e}.{field}"),
            Call(name, args) => write!(f, "{name}({})", list(args)),
            Unary(UnOp::Not, e) => write!(f, "!{e}"),
            Unary(UnOp::Neg, e) => write!(f, "(-{e})"),
            Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Cond(c, a, b) => write!(f, "({c} ? {a} : {b})"),
            Old(None, e) => write!(f, "old({e})"),
            Old(Some(l), e) => write!(f, "old[{l}]({e})"),
            Acc(loc, None) => write!(f, "acc({loc})"),
            Acc(loc, Some(p)) => write!(f, "acc({loc}, {p})"),
            Quant(q, vars, trigs, body) => {
                let kw = match q {
                    QuantKind::Forall => "forall",
                    QuantKind::Exists => "exists",
                };
                let vs = vars
                    .iter()
                    .map(|(v, t)| format!("{v}: {t}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                write!(f, "({kw} {vs} ::")?;
                for t in trigs {
                    write!(f, " {{{}}}", list(t))?;
                }
                write!(f, " {body})")
            }
            SetLit(None, es) => write!(f, "Set({})", list(es)),
            SetLit(Some(t), es) => write!(f, "Set[{t}]({})", list(es)),
        }
    }
}

fn params(ps: &[Param]) -> String {
    ps.iter()
        .map(|p| format!("{}: {}", p.name, p.ty))
        .collect::<Vec<_>>()
        .join(", ")
}

fn block(out: &mut String, stmts: &[Stmt], indent: usize) {
    out.push_str("{\n");
    for s in stmts {
        stmt(out, s, indent + 1);
    }
    out.push_str(&"  ".repeat(indent));
    out.push('}');
}

fn stmt(out: &mut String, s: &Stmt, indent: usize) {
    let pad = "  ".repeat(indent);
    out.push_str(&pad);
    match &s.kind {
        StmtKind::Inhale(e) => {
            let _ = write!(out, "inhale {e}");
        }
        StmtKind::Exhale(e) => {
            let _ = write!(out, "exhale {e}");
        }
        StmtKind::Assert(e) => {
            let _ = write!(out, "assert {e}");
        }
        StmtKind::Assume(e) => {
            let _ = write!(out, "assume {e}");
        }
        StmtKind::VarDecl { name, ty, init } => {
            let _ = write!(out, "var {name}: {ty}");
            if let Some(e) = init {
                let _ = write!(out, " := {e}");
            }
        }
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{target} := {value}");
        }
        StmtKind::FieldWrite { recv, field, value } => {
            let _ = write!(out, "{recv}.{field} := {value}");
        }
        StmtKind::If { cond, then, els } => {
            let _ = write!(out, "if ({cond}) ");
            block(out, then, indent);
            if let Some(els) = els {
                out.push_str(" else ");
                block(out, els, indent);
            }
        }
        StmtKind::While {
            cond,
            invariants,
            body,
        } => {
            let _ = writeln!(out, "while ({cond})");
            for inv in invariants {
                let _ = writeln!(out, "{pad}  invariant {inv}");
            }
            out.push_str(&pad);
            block(out, body, indent);
        }
        StmtKind::Call {
            targets,
            method,
            args,
        } => {
            if !targets.is_empty() {
                let _ = write!(out, "{} := ", targets.join(", "));
            }
            let args = args.iter().map(|a| a.to_string()).collect::<Vec<_>>();
            let _ = write!(out, "{method}({})", args.join(", "));
        }
        StmtKind::Fold(e) => {
            let _ = write!(out, "fold {e}");
        }
        StmtKind::Unfold(e) => {
            let _ = write!(out, "unfold {e}");
        }
        StmtKind::Label(l) => {
            let _ = write!(out, "label {l}");
        }
    }
    out.push('\n');
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fd in &self.fields {
            writeln!(f, "field {}: {}", fd.name, fd.ty)?;
        }
        for d in &self.domains {
            writeln!(f, "\ndomain {} {{", d.name)?;
            for df in &d.functions {
                writeln!(f, "  function {}({}): {}", df.name, params(&df.params), df.result)?;
            }
            for ax in &d.axioms {
                match &ax.name {
                    Some(n) => writeln!(f, "  axiom {n} {{ {} }}", ax.body)?,
                    None => writeln!(f, "  axiom {{ {} }}", ax.body)?,
                }
            }
            writeln!(f, "}}")?;
        }
        for m in &self.macros {
            // Always print the parameter list: a body starting with `(` would
            // otherwise be read back as one.
            let ps = m.params.as_deref().unwrap_or_default();
            write!(f, "\ndefine {}({})", m.name, ps.join(", "))?;
            match &m.body {
                MacroBody::Expr(e) => writeln!(f, " {e}")?,
                MacroBody::Stmts(ss) => {
                    let mut out = String::new();
                    block(&mut out, ss, 0);
                    writeln!(f, " {out}")?;
                }
            }
        }
        for func in &self.functions {
            writeln!(
                f,
                "\nfunction {}({}): {}",
                func.name,
                params(&func.params),
                func.result
            )?;
            for p in &func.pres {
                writeln!(f, "  requires {p}")?;
            }
            for p in &func.posts {
                writeln!(f, "  ensures {p}")?;
            }
            if let Some(b) = &func.body {
                writeln!(f, "{{ {b} }}")?;
            }
        }
        for pred in &self.predicates {
            write!(f, "\npredicate {}({})", pred.name, params(&pred.params))?;
            match &pred.body {
                Some(b) => writeln!(f, " {{ {b} }}")?,
                None => writeln!(f)?,
            }
        }
        for m in &self.methods {
            write!(f, "\nmethod {}({})", m.name, params(&m.params))?;
            if !m.returns.is_empty() {
                write!(f, " returns ({})", params(&m.returns))?;
            }
            writeln!(f)?;
            for p in &m.pres {
                writeln!(f, "  requires {p}")?;
            }
            for p in &m.posts {
                writeln!(f, "  ensures {p}")?;
            }
            if let Some(body) = &m.body {
                let mut out = String::new();
                block(&mut out, body, 0);
                writeln!(f, "{out}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::ast::parse;

    #[test]
    fn printing_is_a_parse_fixpoint() {
        let src = "field f: Int
            define P(x) x.f > 0 && (forall i: Int :: {g(i)} i > 0 ==> -i < 0)
            method m(x: Ref) returns (y: Int)
              requires acc(x.f, 1/2) && P(x)
            { y := x.f \\ 2; if (y == 0) { y := 1 } else { assert old(x.f) == 3 ? true : y in Set(1, 2) } }";
        let once = parse(src).unwrap().to_string();
        let twice = parse(&once).unwrap().to_string();
        assert_eq!(once, twice);
    }
}
