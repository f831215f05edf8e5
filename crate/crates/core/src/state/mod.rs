//! The symbolic state: a heap of quantified and predicate chunks, scoped path
//! conditions, the local store and labelled old heaps.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::{Arc, OnceLock};

use crate::ast::Pos;
use crate::term::{Sort, Term, Var};

/// Label under which the method pre-state heap is kept.
pub const PRE_STATE: &str = "$pre";

/// The distinguished receiver variable `r` free in quantified chunk permissions.
pub fn receiver() -> &'static Var {
    static R: OnceLock<Var> = OnceLock::new();
    R.get_or_init(|| Var::new("r", Sort::Ref))
}

/// `⟨∀r. field ↦ fvf(r), perm(r)⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantifiedChunk {
    pub field: Arc<str>,
    /// Value map symbol of sort `ValueMap(field)`.
    pub fvf: Var,
    /// Permission amount; mentions only [`receiver`] and symbolic values.
    pub perm: Term,
    /// Source position of the assertion that created the chunk.
    pub origin: Pos,
}

impl QuantifiedChunk {
    /// The permission held for `recv.field`.
    pub fn perm_at(&self, recv: &Term) -> Term {
        self.perm.subst1(receiver(), recv)
    }
}

/// A predicate instance `name(args)` with a snapshot of its body's values.
#[derive(Clone, Debug, PartialEq)]
pub struct PredicateChunk {
    pub name: Arc<str>,
    pub args: Vec<Term>,
    /// Snapshot of sort `Snap`.
    pub snap: Term,
    pub perm: Term,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Chunk {
    Quantified(QuantifiedChunk),
    Predicate(PredicateChunk),
}

/// A symbolic heap. Chunks are kept in insertion order; cloning is the way
/// to fork a heap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Heap {
    chunks: Vec<Chunk>,
}

impl Heap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn add(&mut self, chunk: Chunk) {
        self.chunks.push(chunk);
    }

    pub fn get(&self, i: usize) -> &Chunk {
        &self.chunks[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Chunk {
        &mut self.chunks[i]
    }

    /// Indices of the quantified chunks for `field`, in insertion order, or
    /// reversed.
    pub fn field_chunks(&self, field: &str, reversed: bool) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Chunk::Quantified(q) if &*q.field == field))
            .map(|(i, _)| i)
            .collect();
        if reversed {
            out.reverse();
        }
        out
    }

    /// Indices of the predicate chunks for `name`.
    pub fn predicate_chunks(&self, name: &str, reversed: bool) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, Chunk::Predicate(p) if &*p.name == name))
            .map(|(i, _)| i)
            .collect();
        if reversed {
            out.reverse();
        }
        out
    }

    pub fn quantified(&self, i: usize) -> &QuantifiedChunk {
        match &self.chunks[i] {
            Chunk::Quantified(q) => q,
            Chunk::Predicate(_) => panic!("chunk {i} is not quantified"),
        }
    }

    /// Removes the chunks at the given indices.
    pub fn remove_all(&mut self, mut indices: Vec<usize>) {
        indices.sort_unstable();
        indices.dedup();
        for i in indices.into_iter().rev() {
            self.chunks.remove(i);
        }
    }

    /// Drops chunks whose permission simplifies syntactically to zero, and
    /// returns how many were dropped.
    pub fn drop_syntactically_empty(&mut self) -> usize {
        let before = self.chunks.len();
        self.chunks.retain(|c| {
            let perm = match c {
                Chunk::Quantified(q) => &q.perm,
                Chunk::Predicate(p) => &p.perm,
            };
            !perm.simplify().is_zero_perm()
        });
        before - self.chunks.len()
    }

    /// Debug dump: one chunk per line, `field | perm-term | fvf-symbol`;
    /// predicate chunks as `name(args) | perm-term | snapshot`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.chunks {
            match c {
                Chunk::Quantified(q) => {
                    let _ = writeln!(out, "{} | {} | {}", q.field, q.perm, q.fvf);
                }
                Chunk::Predicate(p) => {
                    let args: Vec<String> = p.args.iter().map(|a| a.to_string()).collect();
                    let _ = writeln!(out, "{}({}) | {} | {}", p.name, args.join(", "), p.perm, p.snap);
                }
            }
        }
        out
    }
}

/// Classification of a path condition; value map definitions are hoisted out
/// of conditional scopes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcKind {
    Plain,
    VmDefEq,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PcScope {
    pub branch: Option<Term>,
    pub terms: Vec<(Term, PcKind)>,
}

/// Scoped path conditions; the engine mirrors every push, pop and addition
/// into the solver session.
#[derive(Clone, Debug, PartialEq)]
pub struct PathConditionStack {
    scopes: Vec<PcScope>,
}

impl Default for PathConditionStack {
    fn default() -> Self {
        PathConditionStack {
            scopes: vec![PcScope::default()],
        }
    }
}

impl PathConditionStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of pushed scopes; the root scope has depth 0.
    pub fn depth(&self) -> usize {
        self.scopes.len() - 1
    }

    pub fn push(&mut self, branch: Option<Term>) {
        self.scopes.push(PcScope {
            branch,
            terms: Vec::new(),
        });
    }

    /// Pops the innermost scope and returns it.
    ///
    /// # Panics
    /// At depth 0.
    pub fn pop(&mut self) -> PcScope {
        assert!(self.depth() > 0, "pop of the root path condition scope");
        self.scopes.pop().expect("non-root scope")
    }

    pub fn add(&mut self, t: Term, kind: PcKind) {
        self.scopes.last_mut().expect("root scope").terms.push((t, kind));
    }

    pub fn scopes(&self) -> &[PcScope] {
        &self.scopes
    }

    /// `∧_scopes (branch ⇒ ∧ terms)`, nested so that each branch condition
    /// guards everything added after it.
    pub fn flatten(&self) -> Term {
        fn go(scopes: &[PcScope]) -> Term {
            match scopes.split_first() {
                None => Term::tt(),
                Some((s, rest)) => {
                    let mut conj: Vec<Term> = s.terms.iter().map(|(t, _)| t.clone()).collect();
                    let inner = go(rest);
                    if !inner.is_true() {
                        conj.push(inner);
                    }
                    let body = Term::and(conj);
                    match &s.branch {
                        Some(b) => Term::implies(b.clone(), body),
                        None => body,
                    }
                }
            }
        }
        go(&self.scopes)
    }
}

/// Local store: variable name to symbolic value.
pub type Store = BTreeMap<String, Term>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolicState {
    pub heap: Heap,
    pub store: Store,
    /// Captured heaps for `old`, by label; [`PRE_STATE`] is the method pre-state.
    pub olds: BTreeMap<String, Heap>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("label `{0}` is already in use")]
pub struct DuplicateLabel(pub String);

impl SymbolicState {
    /// Records a deep copy of the current heap under `label`.
    pub fn capture_old(&mut self, label: &str) -> Result<(), DuplicateLabel> {
        if self.olds.contains_key(label) {
            return Err(DuplicateLabel(label.to_string()));
        }
        self.olds.insert(label.to_string(), self.heap.clone());
        Ok(())
    }

    /// The heap `old[label](..)` refers to; bare `old` means the pre-state.
    pub fn old_heap(&self, label: Option<&str>) -> Option<&Heap> {
        self.olds.get(label.unwrap_or(PRE_STATE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Rational, SymbolPool};
    use proptest::prelude::*;

    fn chunk(pool: &mut SymbolPool, field: &str, perm: Term) -> Chunk {
        Chunk::Quantified(QuantifiedChunk {
            field: field.into(),
            fvf: pool.fresh("fvf", Sort::value_map(field, Sort::Int)),
            perm,
            origin: Pos::default(),
        })
    }

    #[test]
    fn add_to_empty_heap() {
        let mut pool = SymbolPool::new();
        let mut h = Heap::new();
        h.add(chunk(&mut pool, "val", Term::full_perm()));
        assert_eq!(h.len(), 1);
        assert_eq!(h.dump(), "val | 1 | fvf@0\n");
    }

    #[test]
    fn syntactically_empty_chunks_are_dropped() {
        let mut pool = SymbolPool::new();
        let mut h = Heap::new();
        let c = Var::new("c", Sort::Bool).term();
        let ite = Term::ite(c, Term::full_perm(), Term::no_perm());
        h.add(chunk(&mut pool, "val", Term::sub(Term::full_perm(), Term::full_perm())));
        h.add(chunk(&mut pool, "val", Term::sub(ite.clone(), ite.clone())));
        h.add(chunk(&mut pool, "val", Term::perm(Rational::new(1, 2))));
        assert_eq!(h.drop_syntactically_empty(), 2);
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn capture_old_rejects_duplicates() {
        let mut s = SymbolicState::default();
        s.capture_old("l").unwrap();
        assert_eq!(s.capture_old("l"), Err(DuplicateLabel("l".into())));
        let mut pool = SymbolPool::new();
        s.heap.add(chunk(&mut pool, "f", Term::full_perm()));
        assert!(s.old_heap(Some("l")).unwrap().is_empty());
        assert_eq!(s.heap.len(), 1);
    }

    #[test]
    fn field_chunks_respect_order_flag() {
        let mut pool = SymbolPool::new();
        let mut h = Heap::new();
        h.add(chunk(&mut pool, "f", Term::full_perm()));
        h.add(chunk(&mut pool, "g", Term::full_perm()));
        h.add(chunk(&mut pool, "f", Term::full_perm()));
        assert_eq!(h.field_chunks("f", false), vec![0, 2]);
        assert_eq!(h.field_chunks("f", true), vec![2, 0]);
    }

    #[derive(Clone, Debug)]
    enum Op {
        Push(Option<u8>),
        Add(u8),
        Pop,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            proptest::option::of(0u8..4).prop_map(Op::Push),
            (0u8..4).prop_map(Op::Add),
            Just(Op::Pop),
        ]
    }

    proptest! {
        /// After any balanced push/pop sequence the flattened path condition
        /// is unchanged.
        #[test]
        fn balanced_scopes_restore_flattening(prefix in proptest::collection::vec(0u8..4, 0..4),
                                              ops in proptest::collection::vec(op(), 0..40)) {
            let atom = |i: u8| Var::new(format!("p{i}"), Sort::Bool).term();
            let mut pcs = PathConditionStack::new();
            for i in prefix {
                pcs.add(atom(i), PcKind::Plain);
            }
            let before = pcs.flatten();
            let base = pcs.depth();
            for o in ops {
                match o {
                    Op::Push(b) => pcs.push(b.map(atom)),
                    Op::Add(i) => {
                        if pcs.depth() > base {
                            pcs.add(atom(i), PcKind::Plain);
                        }
                    }
                    Op::Pop => {
                        if pcs.depth() > base {
                            pcs.pop();
                        }
                    }
                }
            }
            while pcs.depth() > base {
                pcs.pop();
            }
            prop_assert_eq!(pcs.flatten(), before);
        }
    }
}
