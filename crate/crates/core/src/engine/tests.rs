//! Engine unit tests against the solver: heap shapes after inhale, exhale,
//! remove and summarise. Each test executes a method body step by step.

use crate::ast::checked::CStmt;
use crate::ast::Pos;
use crate::smt::SolverConfig;
use crate::state::{Chunk, SymbolicState, PRE_STATE};
use crate::term::{Term, TermNode};

use super::produce::Produce;
use super::symbols::{type_sort, Symbols};
use super::{Engine, EngineConfig, ErrorKind};

const ARRAY: &str = "
field val: Int
domain Array {
  function loc(a: Array, i: Int): Ref
  function first(r: Ref): Array
  function second(r: Ref): Int
  axiom all_diff {
    forall a: Array, i: Int :: {loc(a, i)}
      first(loc(a, i)) == a && second(loc(a, i)) == i
  }
}
";

/// Loads `ARRAY` plus `src`, inhales the precondition of method `m` and
/// hands the engine, the state and the body to `f`.
fn with_method<T>(src: &str, f: impl for<'p> FnOnce(&mut Engine<'p>, &mut SymbolicState, &'p [CStmt]) -> T) -> T {
    let prog = crate::ast::load(&format!("{ARRAY}{src}")).expect("test program loads");
    let syms = Symbols::new(&prog).expect("symbols");
    let mut cfg = EngineConfig::new(SolverConfig::from_env());
    cfg.debug_invariants = true;
    let mut en = Engine::start(&prog, &syms, &cfg).expect("solver starts");
    let m = prog.method("m").expect("method m");
    let mut st = SymbolicState::default();
    for p in &m.params {
        let v = en.pool.fresh_term(&p.name, type_sort(&p.ty));
        st.store.insert(p.name.clone(), v);
    }
    let store = st.store.clone();
    let olds = st.olds.clone();
    en.produce_all(&mut st.heap, &store, &olds, &m.pres, Produce::default())
        .expect("precondition inhales");
    st.capture_old(PRE_STATE).unwrap();
    let body = m.body.as_deref().unwrap_or(&[]);
    f(&mut en, &mut st, body)
}

fn int(n: i64) -> Term {
    Term::int(n)
}

/// `loc(a, i)` for the method parameter `a`.
fn loc(en: &Engine<'_>, st: &SymbolicState, i: i64) -> Term {
    let f = en.syms.domain_fns["loc"].clone();
    Term::app(&f, vec![st.store["a"].clone(), int(i)])
}

/// The summarised permission to `loc(a, i).val`, as decided by the solver
/// among the candidates 0, 1/4, 1/2, 3/4, 1.
fn perm_at(en: &mut Engine<'_>, st: &SymbolicState, i: i64) -> Option<(i64, i64)> {
    let s = en.summarise(&st.heap.clone(), "val", false).unwrap();
    let at = s.perm_at(&loc(en, st, i));
    for (n, d) in [(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)] {
        let lit = Term::perm(num_rational::Ratio::new(n, d));
        if en.check(&Term::eq(at.clone(), lit), Pos::default()).unwrap() {
            return Some((n, d));
        }
    }
    None
}

#[test]
fn inhaling_an_isc_adds_one_inverted_chunk() {
    let src = "method m(a: Array, left: Int, right: Int)
      requires forall i: Int :: left <= i && i < right ==> acc(loc(a, i).val)
    {}";
    with_method(src, |_, st, _| {
        assert_eq!(st.heap.len(), 1);
        let dump = st.heap.dump();
        assert_eq!(dump, "val | q@0(r) | fvf@0\n");
        let Chunk::Quantified(c) = &st.heap.chunks()[0] else { panic!() };
        let TermNode::App(q, _) = c.perm.node() else { panic!("{}", c.perm) };
        let body = q.def.as_ref().expect("macro").body.to_string();
        assert_eq!(body, "(((left@0 <= inv@0(r)) && (inv@0(r) < right@0)) ? 1 : 0)");
    });
}

#[test]
fn two_inhales_of_one_isc_give_two_chunks() {
    let src = "method m(a: Array)
      requires forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i).val, 1/2)
      requires forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i).val, 1/2)
    {}";
    with_method(src, |en, st, _| {
        assert_eq!(st.heap.len(), 2);
        let idx = st.heap.field_chunks("val", false);
        assert_ne!(st.heap.quantified(idx[0]).fvf, st.heap.quantified(idx[1]).fvf);
        assert_eq!(perm_at(en, st, 2), Some((1, 1)));
        assert_eq!(perm_at(en, st, 4), Some((0, 1)));
    });
}

#[test]
fn partial_exhale_retains_the_rest_of_the_chunk() {
    let src = "method m(a: Array)
      requires forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i).val)
    {
      exhale forall i: Int :: 0 <= i && i < 2 ==> acc(loc(a, i).val)
    }";
    with_method(src, |en, st, body| {
        en.exec(st, &body[0]).unwrap();
        assert_eq!(st.heap.len(), 1);
        // The concrete ledger after removing [0, 2) from [0, 4).
        for (i, expected) in [(0, 0), (1, 0), (2, 1), (3, 1), (4, 0)] {
            assert_eq!(perm_at(en, st, i), Some((expected, 1)), "index {i}");
        }
        assert!(en.stats.accounting_checks > 0);
    });
}

#[test]
fn removing_nothing_leaves_the_heap_unchanged() {
    let src = "method m(a: Array)
      requires forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i).val)
    {
      exhale forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i).val, none)
    }";
    with_method(src, |en, st, body| {
        let before = st.heap.dump();
        en.exec(st, &body[0]).unwrap();
        assert_eq!(st.heap.dump(), before);
    });
}

#[test]
fn removal_mirrors_a_concrete_ledger() {
    let src = "method m(a: Array)
      requires forall i: Int :: 0 <= i && i < 10 ==> acc(loc(a, i).val)
    {
      exhale forall i: Int :: 0 <= i && i < 5 ==> acc(loc(a, i).val)
    }";
    let mut ledger = [1i64; 10];
    for slot in ledger.iter_mut().take(5) {
        *slot -= 1;
    }
    with_method(src, |en, st, body| {
        en.exec(st, &body[0]).unwrap();
        for (i, &p) in ledger.iter().enumerate() {
            assert_eq!(perm_at(en, st, i as i64), Some((p, 1)), "index {i}");
        }
    });
}

#[test]
fn halves_recombine_and_drain() {
    let src = "method m(x: Ref)
      requires acc(x.val, 1/2) && acc(x.val, 1/2)
    {
      exhale acc(x.val)
      exhale acc(x.val)
    }";
    with_method(src, |en, st, body| {
        en.exec(st, &body[0]).unwrap();
        assert!(st.heap.is_empty(), "{}", st.heap.dump());
        let e = en.exec(st, &body[1]).unwrap_err();
        assert_eq!(e.kind, ErrorKind::InsufficientPermission);
    });
}

#[test]
fn summarise_defines_one_value_map_per_call_without_queries() {
    let src = "method m(a: Array, x: Ref)
      requires acc(x.val, 1/2) && acc(x.val, 1/2)
    {}";
    with_method(src, |en, st, _| {
        let checks = en.session.stats().checks;
        let empty = en.summarise(&crate::state::Heap::new(), "val", false).unwrap();
        assert!(empty.perm.is_zero_perm());
        let s = en.summarise(&st.heap.clone(), "val", false).unwrap();
        assert_eq!(en.session.stats().checks, checks);
        assert_eq!(en.stats.summarise_solver_queries, 0);
        let x = st.store["x"].clone();
        assert!(en.check(&Term::eq(s.perm_at(&x), Term::full_perm()), Pos::default()).unwrap());
        // Memoized: the same chunks give the same value map.
        let again = en.summarise(&st.heap.clone(), "val", false).unwrap();
        assert_eq!(again.fvf, s.fvf);
        assert_eq!(en.stats.summarise_cache_hits, 1);
    });
}

#[test]
fn field_write_splits_off_a_singleton_chunk() {
    let src = "method m(a: Array)
      requires forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i).val)
    {
      loc(a, 0).val := 7
      assert loc(a, 0).val == 7
    }";
    with_method(src, |en, st, body| {
        en.exec(st, &body[0]).unwrap();
        assert_eq!(st.heap.len(), 2, "{}", st.heap.dump());
        assert_eq!(perm_at(en, st, 0), Some((1, 1)));
        assert_eq!(perm_at(en, st, 3), Some((1, 1)));
        en.exec(st, &body[1]).unwrap();
    });
}

#[test]
fn field_write_with_half_permission_fails() {
    let src = "method m(x: Ref)
      requires acc(x.val, 1/2)
    {
      x.val := 1
    }";
    with_method(src, |en, st, body| {
        let e = en.exec(st, &body[0]).unwrap_err();
        assert_eq!(e.kind, ErrorKind::InsufficientPermission);
        assert_eq!(e.pos, body[0].pos);
    });
}

#[test]
fn old_reads_the_captured_heap() {
    let src = "method m(x: Ref)
      requires acc(x.val) && x.val == 1
    {
      x.val := 2
      assert old(x.val) == 1 && x.val == 2
    }";
    with_method(src, |en, st, body| {
        en.exec(st, &body[0]).unwrap();
        en.exec(st, &body[1]).unwrap();
        let old = st.old_heap(None).unwrap();
        assert_eq!(old.len(), 1);
    });
}

#[test]
fn reading_without_permission_fails() {
    let src = "method m(x: Ref)
      requires acc(x.val, none)
    {
      assert x.val == x.val
    }";
    with_method(src, |en, st, body| {
        assert!(st.heap.is_empty());
        let e = en.exec(st, &body[0]).unwrap_err();
        assert_eq!(e.kind, ErrorKind::InsufficientPermission);
    });
}

#[test]
fn false_isc_condition_gives_no_chunk() {
    let src = "method m(a: Array)
      requires forall i: Int :: false ==> acc(loc(a, i).val)
    {}";
    with_method(src, |_, st, _| assert!(st.heap.is_empty(), "{}", st.heap.dump()));
}

#[test]
fn non_injective_receivers_fail_the_injectivity_check() {
    let src = "method m(a: Array)
      requires forall i: Int :: 0 <= i && i < 2 ==> acc(loc(a, i).val)
    {
      exhale forall i: Int :: 0 <= i && i < 4 ==> acc(loc(a, i \\ 2).val, 1/2)
    }";
    with_method(src, |en, st, body| {
        let e = en.exec(st, &body[0]).unwrap_err();
        assert_eq!(e.kind, ErrorKind::Injectivity);
    });
}
