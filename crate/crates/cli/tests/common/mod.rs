//! Shared support for the integration tests: solver configuration, corpus
//! access, random program generators and the concrete-ledger oracle.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use qpv_core::engine::{verify_program, EngineConfig, ErrorKind, TaskOutcome};
use qpv_core::smt::SolverConfig;

pub type Q = Ratio<i64>;

pub fn engine_config() -> EngineConfig {
    EngineConfig::new(SolverConfig::from_env())
}

pub fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The passing corpus files, sorted by name.
pub fn corpus_files() -> Vec<PathBuf> {
    sorted_vpr(&repo().join("corpus"))
}

/// The seeded-error variants, sorted by name.
pub fn seeded_files() -> Vec<PathBuf> {
    sorted_vpr(&repo().join("corpus/seeded"))
}

fn sorted_vpr(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "vpr"))
        .collect();
    out.sort();
    out
}

/// The passing file a seeded variant was derived from.
pub fn origin_of(seeded: &Path) -> PathBuf {
    let stem = seeded.file_stem().unwrap().to_string_lossy();
    corpus_files()
        .into_iter()
        .find(|p| stem.starts_with(&*p.file_stem().unwrap().to_string_lossy()))
        .expect("seeded variant names its origin")
}

/// The `// expect: <kind> @ <line>:<col>` header of a seeded variant.
pub fn expectation(path: &Path) -> (ErrorKind, String) {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("// expect: "))
        .unwrap_or_else(|| panic!("{} has no expectation header", path.display()));
    let (kind, pos) = line.split_once(" @ ").expect("`kind @ pos`");
    (ErrorKind::parse(kind.trim()).expect("known error kind"), pos.trim().to_string())
}

/// Verifies source text; panics on frontend errors.
pub fn verify_source(src: &str, cfg: &EngineConfig) -> Vec<TaskOutcome> {
    let prog = qpv_core::ast::load(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    verify_program(&prog, cfg).expect("symbols")
}

// ---------------------------------------------------------------------------
// Straight-line programs over one array with a bounded index domain.

pub const ARRAY_PRELUDE: &str = "field val: Int

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

/// Permission amounts used by the generators.
pub const AMOUNTS: [(i64, i64); 4] = [(0, 1), (1, 4), (1, 2), (1, 1)];

#[derive(Clone, Debug)]
pub enum Stmt {
    InhaleRange { lo: i64, hi: i64, p: Q },
    ExhaleRange { lo: i64, hi: i64, p: Q },
    AssertRange { lo: i64, hi: i64, p: Q },
    InhaleOne { k: i64, p: Q },
    ExhaleOne { k: i64, p: Q },
    Write { k: i64, v: i64 },
    AssertValue { k: i64, v: i64 },
}

fn perm_text(p: Q) -> String {
    if *p.numer() == 0 {
        "none".into()
    } else if p == Q::from_integer(1) {
        "write".into()
    } else {
        format!("{}/{}", p.numer(), p.denom())
    }
}

fn isc(lo: i64, hi: i64, p: Q) -> String {
    format!(
        "forall i: Int :: {lo} <= i && i < {hi} ==> acc(loc(a, i).val, {})",
        perm_text(p)
    )
}

impl Stmt {
    fn text(&self) -> String {
        match *self {
            Stmt::InhaleRange { lo, hi, p } => format!("inhale {}", isc(lo, hi, p)),
            Stmt::ExhaleRange { lo, hi, p } => format!("exhale {}", isc(lo, hi, p)),
            Stmt::AssertRange { lo, hi, p } => format!("assert {}", isc(lo, hi, p)),
            Stmt::InhaleOne { k, p } => format!("inhale acc(loc(a, {k}).val, {})", perm_text(p)),
            Stmt::ExhaleOne { k, p } => format!("exhale acc(loc(a, {k}).val, {})", perm_text(p)),
            Stmt::Write { k, v } => format!("loc(a, {k}).val := {v}"),
            Stmt::AssertValue { k, v } => format!("assert loc(a, {k}).val == {v}"),
        }
    }
}

/// A program with one method `m` whose body is `stmts`, one per line.
/// Returns the text and the line of the first statement.
pub fn render(stmts: &[Stmt]) -> (String, u32) {
    let mut src = String::from(ARRAY_PRELUDE);
    src.push_str("\nmethod m(a: Array)\n{\n");
    let first = src.lines().count() as u32 + 1;
    for s in stmts {
        src.push_str("  ");
        src.push_str(&s.text());
        src.push('\n');
    }
    src.push_str("}\n");
    (src, first)
}

/// Concrete state: permission and known value per index.
#[derive(Clone, Debug)]
pub struct Ledger {
    pub perm: Vec<Q>,
    pub value: Vec<Option<i64>>,
}

impl Ledger {
    pub fn new(n: usize) -> Self {
        Ledger {
            perm: vec![Q::from_integer(0); n],
            value: vec![None; n],
        }
    }

    fn range(&self, lo: i64, hi: i64) -> std::ops::Range<usize> {
        let n = self.perm.len() as i64;
        let lo = lo.clamp(0, n);
        let hi = hi.clamp(lo, n);
        lo as usize..hi as usize
    }

    fn remove(&mut self, idx: std::ops::Range<usize>, p: Q) -> Result<(), ErrorKind> {
        if idx.clone().any(|i| self.perm[i] < p) {
            return Err(ErrorKind::InsufficientPermission);
        }
        for i in idx {
            self.perm[i] -= p;
            if self.perm[i] == Q::from_integer(0) {
                self.value[i] = None;
            }
        }
        Ok(())
    }

    /// Executes one statement; the error kind on failure.
    pub fn step(&mut self, s: &Stmt) -> Result<(), ErrorKind> {
        match *s {
            Stmt::InhaleRange { lo, hi, p } => {
                for i in self.range(lo, hi) {
                    self.perm[i] += p;
                }
                Ok(())
            }
            Stmt::ExhaleRange { lo, hi, p } => self.remove(self.range(lo, hi), p),
            Stmt::AssertRange { lo, hi, p } => self.clone().remove(self.range(lo, hi), p),
            Stmt::InhaleOne { k, p } => {
                self.perm[k as usize] += p;
                Ok(())
            }
            Stmt::ExhaleOne { k, p } => self.remove(k as usize..k as usize + 1, p),
            Stmt::Write { k, v } => {
                if self.perm[k as usize] < Q::from_integer(1) {
                    return Err(ErrorKind::InsufficientPermission);
                }
                self.value[k as usize] = Some(v);
                Ok(())
            }
            Stmt::AssertValue { k, v } => {
                if self.perm[k as usize] == Q::from_integer(0) {
                    return Err(ErrorKind::InsufficientPermission);
                }
                if self.value[k as usize] != Some(v) {
                    return Err(ErrorKind::AssertionFailed);
                }
                Ok(())
            }
        }
    }

    /// The largest generator amount not above `p` that keeps every
    /// affected entry at most 1.
    fn clamp(&self, idx: std::ops::Range<usize>, p: Q) -> Q {
        let top = idx.map(|i| self.perm[i]).max().unwrap_or(Q::from_integer(0));
        AMOUNTS
            .iter()
            .map(|&(n, d)| Q::new(n, d))
            .filter(|&a| a <= p && top + a <= Q::from_integer(1))
            .max()
            .unwrap_or(Q::from_integer(0))
    }
}

/// Runs the oracle: the index and kind of the first failing statement.
pub fn oracle(n: usize, stmts: &[Stmt]) -> Result<(), (usize, ErrorKind)> {
    let mut l = Ledger::new(n);
    for (i, s) in stmts.iter().enumerate() {
        l.step(s).map_err(|k| (i, k))?;
    }
    Ok(())
}

/// Rewrites inhale amounts so that no ledger entry exceeds 1.
pub fn keep_at_most_full(n: usize, stmts: Vec<Stmt>) -> Vec<Stmt> {
    let mut l = Ledger::new(n);
    let mut out = Vec::new();
    for mut s in stmts {
        match &mut s {
            Stmt::InhaleRange { lo, hi, p } => *p = l.clamp(l.range(*lo, *hi), *p),
            Stmt::InhaleOne { k, p } => *p = l.clamp(*k as usize..*k as usize + 1, *p),
            _ => {}
        }
        if l.step(&s).is_err() {
            out.push(s);
            break;
        }
        out.push(s);
    }
    out
}

fn amount() -> impl Strategy<Value = Q> {
    prop::sample::select(AMOUNTS.to_vec()).prop_map(|(n, d)| Q::new(n, d))
}

fn range(n: i64) -> impl Strategy<Value = (i64, i64)> {
    (0..=n, 0..=n).prop_map(|(a, b)| (a.min(b), a.max(b)))
}

/// Statements over index domain `[0, n)`.
pub fn stmt(n: i64, with_values: bool) -> BoxedStrategy<Stmt> {
    let ranges = prop_oneof![
        3 => (range(n), amount()).prop_map(|((lo, hi), p)| Stmt::InhaleRange { lo, hi, p }),
        3 => (range(n), amount()).prop_map(|((lo, hi), p)| Stmt::ExhaleRange { lo, hi, p }),
        1 => (range(n), amount()).prop_map(|((lo, hi), p)| Stmt::AssertRange { lo, hi, p }),
        2 => (0..n, amount()).prop_map(|(k, p)| Stmt::InhaleOne { k, p }),
        2 => (0..n, amount()).prop_map(|(k, p)| Stmt::ExhaleOne { k, p }),
    ];
    if !with_values {
        return ranges.boxed();
    }
    prop_oneof![
        8 => ranges,
        1 => (0..n, 0..3i64).prop_map(|(k, v)| Stmt::Write { k, v }),
        1 => (0..n, 0..3i64).prop_map(|(k, v)| Stmt::AssertValue { k, v }),
    ]
    .boxed()
}

/// Programs for the oracle comparison: domain size, statements.
pub fn oracle_program() -> impl Strategy<Value = (usize, Vec<Stmt>)> {
    (1..=6i64)
        .prop_flat_map(|n| (Just(n as usize), prop::collection::vec(stmt(n, true), 1..10)))
        .prop_map(|(n, s)| (n, keep_at_most_full(n, s)))
}

/// Inhale/exhale sequences for the accounting property.
pub fn accounting_program() -> impl Strategy<Value = (usize, Vec<Stmt>)> {
    (1..=6i64).prop_flat_map(|n| (Just(n as usize), prop::collection::vec(stmt(n, false), 1..8)))
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Compares the symbolic verdict with the oracle on `cases` programs:
/// success, or failure with the same kind on the same statement.
pub fn check_oracle(cases: u32) -> Result<(), String> {
    let cfg = engine_config();
    runner(cases)
        .run(&oracle_program(), |(n, stmts)| {
            let (src, first) = render(&stmts);
            let outcome = verify_source(&src, &cfg).remove(0);
            let expected = oracle(n, &stmts);
            match (&outcome.result, expected) {
                (Ok(()), Ok(())) => Ok(()),
                (Err(e), Err((i, kind))) if e.kind == kind && e.pos.line == first + i as u32 => Ok(()),
                (got, want) => Err(TestCaseError::fail(format!(
                    "verdict mismatch: engine {got:?}, oracle {want:?}\n{src}"
                ))),
            }
        })
        .map_err(|e| e.to_string())
}

/// Runs random inhale/exhale sequences with the debug invariants on: no
/// accounting or non-negativity violation may occur, every exhale that
/// removes something is accounted for, and the verdict agrees with the
/// oracle. Returns the number of accounting checks performed.
pub fn check_accounting(cases: u32) -> Result<u64, String> {
    let mut cfg = engine_config();
    cfg.debug_invariants = true;
    let total = std::cell::Cell::new(0u64);
    runner(cases)
        .run(&accounting_program(), |(n, stmts)| {
            let (src, _) = render(&stmts);
            let outcome = verify_source(&src, &cfg).remove(0);
            if let Err(e) = &outcome.result {
                prop_assert_ne!(e.kind, ErrorKind::InvariantViolation, "{}\n{}", e, src);
            }
            prop_assert!(
                outcome.stats.accounting_checks >= removals(n, &stmts),
                "{} accounting checks\n{}",
                outcome.stats.accounting_checks,
                src
            );
            prop_assert_eq!(outcome.result.is_ok(), oracle(n, &stmts).is_ok(), "{}", src);
            total.set(total.get() + outcome.stats.accounting_checks);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(total.get())
}

/// Exhales of a nonzero amount over a nonempty range, up to and including
/// the first failing statement: each of them runs one removal.
fn removals(n: usize, stmts: &[Stmt]) -> u64 {
    let mut l = Ledger::new(n);
    let mut count = 0;
    for s in stmts {
        let zero = Q::from_integer(0);
        count += match *s {
            Stmt::ExhaleRange { lo, hi, p } => u64::from(lo < hi && p > zero),
            Stmt::ExhaleOne { p, .. } => u64::from(p > zero),
            _ => 0,
        };
        if l.step(s).is_err() {
            break;
        }
    }
    count
}

// ---------------------------------------------------------------------------
// Non-injective receivers and fractional recombination.

/// A receiver over `[lo, hi)` that maps two distinct indices to one slot.
#[derive(Clone, Debug)]
pub enum Collision {
    Mod { m: i64 },
    Div { d: i64 },
    Const { k: i64 },
}

impl Collision {
    fn receiver(&self) -> String {
        match self {
            Collision::Mod { m } => format!("loc(a, i % {m})"),
            Collision::Div { d } => format!("loc(a, i \\ {d})"),
            Collision::Const { k } => format!("loc(a, {k})"),
        }
    }
}

/// Non-injective ISCs over ranges of non-negative indices, with all target
/// slots held at full permission: `(lo, hi, receiver, amount)`.
pub fn collision() -> impl Strategy<Value = (i64, i64, Collision, Q)> {
    let shape = prop_oneof![
        (1..4i64).prop_map(|m| Collision::Mod { m }),
        (2..4i64).prop_map(|d| Collision::Div { d }),
        (0..4i64).prop_map(|k| Collision::Const { k }),
    ];
    (0..4i64, 2..6i64, shape, prop::sample::select(AMOUNTS[1..].to_vec()))
        .prop_map(|(lo, len, c, (n, d))| {
            // Widen the range so that two indices collide.
            let len = match &c {
                Collision::Mod { m } => len.max(m + 1),
                Collision::Div { d } => len.max(2 * d),
                Collision::Const { .. } => len,
            };
            let lo = match &c {
                Collision::Div { d } => lo - lo % d,
                _ => lo,
            };
            (lo, lo + len, c, Q::new(n, d))
        })
}

/// The program for one collision case: full permission to `[0, 16)`, then
/// the non-injective exhale (or inhale, for the strict variant).
pub fn collision_program(lo: i64, hi: i64, c: &Collision, p: Q, inhale: bool) -> String {
    let op = if inhale { "inhale" } else { "exhale" };
    format!(
        "{ARRAY_PRELUDE}
method m(a: Array)
  requires forall i: Int :: 0 <= i && i < 16 ==> acc(loc(a, i).val)
{{
  {op} forall i: Int :: {lo} <= i && i < {hi} ==> acc({}.val, {})
}}
",
        c.receiver(),
        perm_text(p)
    )
}

pub fn check_injectivity(cases: u32) -> Result<(), String> {
    let cfg = engine_config();
    let mut strict = engine_config();
    strict.strict_inhale_injectivity = true;
    runner(cases)
        .run(&(collision(), any::<bool>()), |((lo, hi, c, p), inhale)| {
            let src = collision_program(lo, hi, &c, p, inhale);
            let cfg = if inhale { &strict } else { &cfg };
            let outcome = verify_source(&src, cfg).remove(0);
            match &outcome.result {
                Err(e) if e.kind == ErrorKind::Injectivity => Ok(()),
                other => Err(TestCaseError::fail(format!("{other:?}\n{src}"))),
            }
        })
        .map_err(|e| e.to_string())
}

/// Two half-permission ISCs over `[lo, hi)` (the second possibly split in
/// two pieces at `mid`), then the full ISC exhaled twice.
pub fn recombination_program(lo: i64, mid: i64, hi: i64) -> (String, u32) {
    let src = format!(
        "{ARRAY_PRELUDE}
method m(a: Array)
{{
  inhale forall i: Int :: {lo} <= i && i < {hi} ==> acc(loc(a, i).val, 1/2)
  inhale forall i: Int :: {lo} <= i && i < {mid} ==> acc(loc(a, i).val, 1/2)
  inhale forall i: Int :: {mid} <= i && i < {hi} ==> acc(loc(a, i).val, 1/2)
  exhale forall i: Int :: {lo} <= i && i < {hi} ==> acc(loc(a, i).val)
  exhale forall i: Int :: {lo} <= i && i < {hi} ==> acc(loc(a, i).val)
}}
"
    );
    let second_exhale = ARRAY_PRELUDE.lines().count() as u32 + 8;
    (src, second_exhale)
}

/// The first exhale succeeds and the second fails with insufficient
/// permission at its own line.
pub fn check_recombination(cases: u32) -> Result<(), String> {
    let cfg = engine_config();
    let shape = (0..4i64, 1..5i64).prop_flat_map(|(lo, len)| (Just(lo), lo..=lo + len, Just(lo + len)));
    runner(cases)
        .run(&shape, |(lo, mid, hi)| {
            let (src, line) = recombination_program(lo, mid, hi);
            let outcome = verify_source(&src, &cfg).remove(0);
            match &outcome.result {
                Err(e) if e.kind == ErrorKind::InsufficientPermission && e.pos.line == line => Ok(()),
                other => Err(TestCaseError::fail(format!("{other:?}\n{src}"))),
            }
        })
        .map_err(|e| e.to_string())
}
