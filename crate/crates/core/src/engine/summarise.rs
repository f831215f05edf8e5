//! Heap summarisation: one value map and one permission term per field,
//! computed without solver queries.

use crate::smt::preamble::with_qid;
use crate::smt::triggers;
use crate::state::{receiver, Heap};
use crate::term::{Sort, Term, Var};

use super::{Engine, MemoEntry, R};

/// The combined view of all chunks of one field.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub fvf: Var,
    /// Pointwise sum of the chunk permissions, in the receiver variable.
    pub perm: Term,
}

impl Summary {
    pub fn perm_at(&self, recv: &Term) -> Term {
        self.perm.subst1(receiver(), recv)
    }

    pub fn value_at(&self, recv: Term) -> Term {
        Term::vm_apply(&self.fvf, recv)
    }
}

impl Engine<'_> {
    /// Summarises the chunks of `field` in `heap`. The value map definitions
    /// are assumed as they are created. A memoized summary for the same
    /// chunk list is reused when memoization is on, or when `reuse` is set
    /// (trigger evaluation must see the same value maps as the body).
    pub(crate) fn summarise(&mut self, heap: &Heap, field: &str, reuse: bool) -> R<Summary> {
        self.stats.summarise_calls += 1;
        let checks_before = self.session.stats().checks;
        let idxs = heap.field_chunks(field, self.cfg.reverse_chunk_order);
        let key: Vec<_> = idxs
            .iter()
            .map(|&i| {
                let c = heap.quantified(i);
                (c.fvf.name.clone(), c.perm.clone())
            })
            .collect();
        if self.cfg.memoize || reuse {
            if let Some(m) = self.memo.iter().rev().find(|m| m.field == field && m.key == key) {
                self.stats.summarise_cache_hits += 1;
                return Ok(m.summary.clone());
            }
        }
        let value = self.syms.field_sort(field);
        let fvf = self.pool.fresh(&format!("fvf.{field}"), Sort::value_map(field, value));
        let r = receiver();
        let mut perms = Vec::new();
        for &i in &idxs {
            let c = heap.quantified(i).clone();
            let summary_app = Term::vm_apply(&fvf, r.term());
            let chunk_app = Term::vm_apply(&c.fvf, r.term());
            let choice = triggers::vm_def_eq(&summary_app, &chunk_app);
            let def = Term::forall(
                vec![r.clone()],
                choice.triggers,
                Term::implies(
                    Term::lt(Term::no_perm(), c.perm.clone()),
                    Term::eq(summary_app, chunk_app),
                ),
            );
            self.assume_def(with_qid(def, "vm_def_eq"))?;
            perms.push(c.perm);
        }
        let perm = perms
            .into_iter()
            .reduce(Term::add)
            .unwrap_or_else(Term::no_perm);
        let summary = Summary { fvf, perm };
        self.memo.push(MemoEntry {
            field: field.to_string(),
            key,
            summary: summary.clone(),
            depth: self.pcs.depth(),
        });
        self.stats.summarise_solver_queries += self.session.stats().checks - checks_before;
        Ok(summary)
    }
}
