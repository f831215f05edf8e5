//! Static background sent before verification starts: sorts, user domains,
//! heap-dependent function symbols and the partial value map machinery.

use std::fmt::Write;
use std::sync::Arc;

use crate::term::{FunKind, Function, Sort, Term, Trigger, Var};

use super::render::{self, Renderer};

/// Symbols of the partial value map machinery for one field.
#[derive(Clone, Debug)]
pub struct PvmSymbols {
    pub field: Arc<str>,
    pub value: Sort,
    pub to_snap: Arc<Function>,
    pub from_snap: Arc<Function>,
    pub domain: Arc<Function>,
    pub apply: Arc<Function>,
}

impl PvmSymbols {
    pub fn new(field: &str, value: Sort) -> Self {
        let pvm = Sort::Pvm(field.into());
        let b = |name: String, params: Vec<Sort>, result: Sort| {
            Function::uninterpreted(name, params, result, FunKind::Builtin)
        };
        PvmSymbols {
            field: field.into(),
            to_snap: b(render::to_snap(field), vec![pvm.clone()], Sort::Snap),
            from_snap: b(format!("$fromSnap.{field}"), vec![Sort::Snap], pvm.clone()),
            domain: b(
                render::domain_fn(field),
                vec![pvm.clone()],
                Sort::set_of(Sort::Ref),
            ),
            apply: b(render::apply_fn(field), vec![pvm, Sort::Ref], value.clone()),
            value,
        }
    }

    /// `∀ pvs1, pvs2 {toSnap(pvs1), toSnap(pvs2)} ::
    ///    domain(pvs1) = domain(pvs2) ∧ (∀r. r ∈ domain(pvs1) ⇒ apply(pvs1, r) = apply(pvs2, r))
    ///    ⇒ pvs1 = pvs2`
    pub fn extensionality(&self) -> Term {
        let pvm = Sort::Pvm(self.field.clone());
        let p1 = Var::new("pvs1", pvm.clone());
        let p2 = Var::new("pvs2", pvm);
        let r = Var::new("r", Sort::Ref);
        let dom1 = Term::app(&self.domain, vec![p1.term()]);
        let dom2 = Term::app(&self.domain, vec![p2.term()]);
        let ap1 = Term::app(&self.apply, vec![p1.term(), r.term()]);
        let ap2 = Term::app(&self.apply, vec![p2.term(), r.term()]);
        let pointwise = Term::forall(
            vec![r.clone()],
            vec![Trigger(vec![ap1.clone()]), Trigger(vec![ap2.clone()])],
            Term::implies(Term::set_member(r.term(), dom1.clone()), Term::eq(ap1, ap2)),
        );
        let body = Term::implies(
            Term::and(vec![Term::eq(dom1, dom2), pointwise]),
            Term::eq(p1.term(), p2.term()),
        );
        let trigger = Trigger(vec![
            Term::app(&self.to_snap, vec![p1.term()]),
            Term::app(&self.to_snap, vec![p2.term()]),
        ]);
        with_qid(
            Term::forall(vec![p1, p2], vec![trigger], body),
            &format!("pvm_extensionality.{}", self.field),
        )
    }

    /// `∀ pvs {toSnap(pvs)} :: fromSnap(toSnap(pvs)) = pvs`
    pub fn embedding(&self) -> Term {
        let p = Var::new("pvs", Sort::Pvm(self.field.clone()));
        let wrapped = Term::app(&self.to_snap, vec![p.term()]);
        with_qid(
            Term::forall(
                vec![p.clone()],
                vec![Trigger(vec![wrapped.clone()])],
                Term::eq(Term::app(&self.from_snap, vec![wrapped]), p.term()),
            ),
            &format!("pvm_embedding.{}", self.field),
        )
    }
}

/// Attaches a quantifier id to a quantifier term.
pub fn with_qid(t: Term, qid: &str) -> Term {
    match t.node() {
        crate::term::TermNode::Quant(q) => {
            let mut q = q.clone();
            q.qid = Some(qid.into());
            Term::quant(q)
        }
        _ => t,
    }
}

/// Everything the preamble declares.
#[derive(Clone, Debug, Default)]
pub struct Background {
    /// User domain sorts.
    pub sorts: Vec<Arc<str>>,
    /// User functions: domain functions and heap-dependent functions.
    pub functions: Vec<Arc<Function>>,
    /// Domain axioms, with their names.
    pub axioms: Vec<(Option<String>, Term)>,
    /// Fields used under ISCs in function preconditions or predicate bodies.
    pub pvm: Vec<PvmSymbols>,
}

impl Background {
    pub fn pvm_for(&self, field: &str) -> Option<&PvmSymbols> {
        self.pvm.iter().find(|p| &*p.field == field)
    }

    /// Renders the preamble and returns it with the names it declares.
    pub fn emit(&self, r: &Renderer) -> (String, Vec<String>) {
        let mut out = String::new();
        let mut names = Vec::new();
        let _ = writeln!(out, "(declare-sort {} 0)", render::REF_SORT);
        let _ = writeln!(out, "(declare-const {} {})", render::NULL, render::REF_SORT);
        let _ = writeln!(out, "(declare-sort {} 0)", render::SNAP_SORT);
        for s in &self.sorts {
            let _ = writeln!(out, "(declare-sort {} 0)", render::user_name(s));
        }
        for p in &self.pvm {
            let _ = writeln!(out, "(declare-sort {} 0)", render::pvm_sort(&p.field));
        }
        let mut declare = |out: &mut String, f: &Function| {
            let params: Vec<String> = f.params.iter().map(render::sort).collect();
            let name = match f.kind {
                FunKind::User => render::user_name(&f.name),
                _ => f.name.to_string(),
            };
            let _ = writeln!(
                out,
                "(declare-fun {name} ({}) {})",
                params.join(" "),
                render::sort(&f.result)
            );
            names.push(f.name.to_string());
        };
        for p in &self.pvm {
            for f in [&p.to_snap, &p.from_snap, &p.domain, &p.apply] {
                declare(&mut out, f);
            }
        }
        for f in &self.functions {
            declare(&mut out, f);
        }
        for p in &self.pvm {
            let _ = writeln!(out, "(assert {})", r.term(&p.embedding()));
            let _ = writeln!(out, "(assert {})", r.term(&p.extensionality()));
        }
        for (name, ax) in &self.axioms {
            let ax = match name {
                Some(n) => with_qid(ax.clone(), n),
                None => ax.clone(),
            };
            let _ = writeln!(out, "(assert {})", r.term(&ax));
        }
        (out, names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_pvm_machinery_without_fields() {
        let (text, _) = Background::default().emit(&Renderer::default());
        assert!(!text.contains("$PVM"));
        assert!(text.contains("(declare-sort $Ref 0)"));
    }

    #[test]
    fn pvm_machinery_per_field() {
        let bg = Background {
            pvm: vec![PvmSymbols::new("val", Sort::Int)],
            ..Background::default()
        };
        let (text, names) = bg.emit(&Renderer::default());
        assert!(text.contains("(declare-fun $domain.val ($PVM.val) (Array $Ref Bool))"));
        assert!(text.contains("(declare-fun $apply.val ($PVM.val $Ref) Int)"));
        assert_eq!(text.matches("pvm_extensionality.val").count(), 1);
        assert!(text.contains(":pattern (($toSnap.val pvs1) ($toSnap.val pvs2))"));
        assert!(names.contains(&"$apply.val".to_string()));
    }
}
