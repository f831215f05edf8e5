//! Symbolic execution: inhale/exhale of quantified permissions, permission
//! removal, heap summarisation, expression evaluation, statements, function
//! snapshots and predicate folding.
//!
//! One [`Engine`] verifies one method or function with its own solver
//! session. The first failed check aborts the task.

mod consume;
mod eval;
mod exec;
mod produce;
mod summarise;
pub mod symbols;
#[cfg(test)]
mod tests;

use std::fmt;
use std::time::Instant;

use crate::ast::checked::{CFunction, CMethod, CheckedProgram};
use crate::ast::Pos;
use crate::smt::{CheckResult, Session, SessionStats, SolverConfig, SolverError};
use crate::state::{PathConditionStack, PcKind, PcScope};
use crate::term::{SymbolPool, Term};

pub use summarise::Summary;
pub use symbols::Symbols;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorKind {
    InsufficientPermission,
    AssertionFailed,
    Injectivity,
    IllFormed,
    SolverFailure,
    /// A debug-mode internal invariant does not hold; always a bug.
    InvariantViolation,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::InsufficientPermission => "insufficient-permission",
            ErrorKind::AssertionFailed => "assertion-failed",
            ErrorKind::Injectivity => "injectivity",
            ErrorKind::IllFormed => "ill-formed",
            ErrorKind::SolverFailure => "solver-failure",
            ErrorKind::InvariantViolation => "invariant-violation",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorKind> {
        use ErrorKind::*;
        [
            InsufficientPermission,
            AssertionFailed,
            Injectivity,
            IllFormed,
            SolverFailure,
            InvariantViolation,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {kind}: {message}")]
pub struct VerificationError {
    pub kind: ErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl VerificationError {
    pub fn new(kind: ErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        VerificationError {
            kind,
            pos,
            message: message.into(),
        }
    }

    /// Re-attributes the error to a statement, prefixing the message.
    /// Solver failures and internal errors keep their origin.
    fn within(mut self, pos: Option<Pos>, what: &str) -> Self {
        if matches!(self.kind, ErrorKind::SolverFailure | ErrorKind::InvariantViolation) {
            return self;
        }
        if let Some(p) = pos {
            self.pos = p;
        }
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub(crate) type R<T> = Result<T, VerificationError>;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub solver: SolverConfig,
    /// Reuse summaries for identical chunk lists.
    pub memoize: bool,
    /// Also check receiver injectivity for standalone `inhale` statements.
    pub strict_inhale_injectivity: bool,
    /// Check internal invariants (precise accounting, non-negative
    /// permissions, unsatisfiability of pruned branches).
    pub debug_invariants: bool,
    /// Visit chunks in reverse insertion order in remove and summarise.
    pub reverse_chunk_order: bool,
    /// After a removal, drop chunks the solver proves empty everywhere.
    pub drop_empty_with_solver: bool,
}

impl EngineConfig {
    pub fn new(solver: SolverConfig) -> Self {
        EngineConfig {
            solver,
            memoize: true,
            strict_inhale_injectivity: false,
            debug_invariants: false,
            reverse_chunk_order: false,
            drop_empty_with_solver: true,
        }
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::new(SolverConfig::from_env())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub session: SessionStats,
    pub summarise_calls: u64,
    pub summarise_cache_hits: u64,
    /// Solver checks issued while summarising; zero by construction.
    pub summarise_solver_queries: u64,
    pub remove_calls: u64,
    pub accounting_checks: u64,
    pub pruned_branches: u64,
    pub chunks_dropped: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Method,
    Function,
}

/// One unit of verification work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Task<'p> {
    pub kind: TaskKind,
    pub name: &'p str,
}

#[derive(Clone, Debug)]
pub struct TaskOutcome {
    pub kind: TaskKind,
    pub name: String,
    pub result: Result<(), VerificationError>,
    pub stats: EngineStats,
    pub millis: u64,
}

impl TaskOutcome {
    pub fn verified(&self) -> bool {
        self.result.is_ok()
    }
}

/// A checked program with its symbol tables, ready to verify.
pub struct Verifier<'p> {
    prog: &'p CheckedProgram,
    syms: Symbols,
}

impl<'p> Verifier<'p> {
    pub fn new(prog: &'p CheckedProgram) -> Result<Self, String> {
        Ok(Verifier {
            prog,
            syms: Symbols::new(prog)?,
        })
    }

    pub fn symbols(&self) -> &Symbols {
        &self.syms
    }

    /// Every method, then every function with a body, in declaration order.
    pub fn tasks(&self) -> Vec<Task<'p>> {
        let mut out: Vec<Task<'p>> = self
            .prog
            .methods
            .iter()
            .map(|m| Task {
                kind: TaskKind::Method,
                name: m.name.as_str(),
            })
            .collect();
        out.extend(self.prog.functions.iter().filter(|f| f.body.is_some()).map(|f| Task {
            kind: TaskKind::Function,
            name: f.name.as_str(),
        }));
        out
    }

    pub fn run(&self, task: Task<'_>, cfg: &EngineConfig) -> TaskOutcome {
        let started = Instant::now();
        let mut cfg = cfg.clone();
        cfg.solver.dump_prefix = format!("{}.{}", cfg.solver.dump_prefix, task.name);
        let (result, stats) = match Engine::start(self.prog, &self.syms, &cfg) {
            Err(e) => (Err(e), EngineStats::default()),
            Ok(mut engine) => {
                let r = match task.kind {
                    TaskKind::Method => {
                        let m = self.prog.method(task.name).expect("task names a method");
                        engine.verify_method(m)
                    }
                    TaskKind::Function => {
                        let f = self.prog.function(task.name).expect("task names a function");
                        engine.verify_function(f)
                    }
                };
                let stats = engine.finish();
                match stats {
                    Ok(s) => (r, s),
                    Err(e) => (r.and(Err(e)), EngineStats::default()),
                }
            }
        };
        log::debug!("{} {}: {:?}", task.name, started.elapsed().as_millis(), result);
        TaskOutcome {
            kind: task.kind,
            name: task.name.to_string(),
            result,
            stats,
            millis: started.elapsed().as_millis() as u64,
        }
    }

    /// Verifies every task sequentially.
    pub fn verify_all(&self, cfg: &EngineConfig) -> Vec<TaskOutcome> {
        self.tasks().into_iter().map(|t| self.run(t, cfg)).collect()
    }
}

/// Convenience: verify all tasks of a checked program.
pub fn verify_program(prog: &CheckedProgram, cfg: &EngineConfig) -> Result<Vec<TaskOutcome>, String> {
    Ok(Verifier::new(prog)?.verify_all(cfg))
}

fn solver_failure(pos: Pos, e: SolverError) -> VerificationError {
    VerificationError::new(ErrorKind::SolverFailure, pos, e.to_string())
}

/// A memoized summary and the scope depth at which its definitions live.
struct MemoEntry {
    field: String,
    key: Vec<(std::sync::Arc<str>, Term)>,
    summary: Summary,
    depth: usize,
}

pub(crate) struct Engine<'p> {
    prog: &'p CheckedProgram,
    syms: &'p Symbols,
    cfg: &'p EngineConfig,
    pool: SymbolPool,
    session: Session,
    pcs: PathConditionStack,
    memo: Vec<MemoEntry>,
    /// Heap-dependent function applications seen so far, reused when
    /// evaluating trigger terms.
    applications: Vec<(String, Vec<Term>, Term)>,
    /// Nesting depth of function body unfoldings.
    fn_depth: usize,
    /// Position used for solver failures outside any check.
    cur_pos: Pos,
    stats: EngineStats,
}

impl<'p> Engine<'p> {
    pub(crate) fn start(prog: &'p CheckedProgram, syms: &'p Symbols, cfg: &'p EngineConfig) -> R<Self> {
        let session = {
            let renderer = crate::smt::Renderer {
                no_triggers: cfg.solver.no_triggers,
            };
            let (preamble, names) = syms.background.emit(&renderer);
            Session::start(cfg.solver.clone(), &preamble, &names).map_err(|e| solver_failure(Pos::default(), e))?
        };
        Ok(Engine {
            prog,
            syms,
            cfg,
            pool: SymbolPool::new(),
            session,
            pcs: PathConditionStack::new(),
            memo: Vec::new(),
            applications: Vec::new(),
            fn_depth: 0,
            cur_pos: Pos::default(),
            stats: EngineStats::default(),
        })
    }

    pub(crate) fn finish(mut self) -> R<EngineStats> {
        let mut stats = std::mem::take(&mut self.stats);
        let session = self.session;
        stats.session = session.finish().map_err(|e| solver_failure(Pos::default(), e))?;
        Ok(stats)
    }

    fn assume_kind(&mut self, t: Term, kind: PcKind) -> R<()> {
        let t = t.simplify();
        if t.is_true() {
            return Ok(());
        }
        self.session.assume(&t).map_err(|e| solver_failure(self.cur_pos, e))?;
        self.pcs.add(t, kind);
        Ok(())
    }

    pub(crate) fn assume(&mut self, t: Term) -> R<()> {
        self.assume_kind(t, PcKind::Plain)
    }

    pub(crate) fn assume_def(&mut self, t: Term) -> R<()> {
        self.assume_kind(t, PcKind::VmDefEq)
    }

    /// Whether `t` is valid under the current path conditions. Solver
    /// crashes and timeouts are errors; other unknowns count as not proved.
    pub(crate) fn check(&mut self, t: &Term, pos: Pos) -> R<bool> {
        let t = t.simplify();
        match self.session.check(&t).map_err(|e| solver_failure(pos, e))? {
            CheckResult::Valid => Ok(true),
            CheckResult::Invalid => Ok(false),
            r @ CheckResult::Unknown(_) if r.is_timeout() => Err(VerificationError::new(
                ErrorKind::SolverFailure,
                pos,
                "solver timed out",
            )),
            CheckResult::Unknown(reason) => {
                log::debug!("unknown at {pos}: {reason}");
                Ok(false)
            }
        }
    }

    /// Opens a path-condition scope, optionally under a branch condition.
    pub(crate) fn push(&mut self, branch: Option<Term>) -> R<()> {
        self.session.push().map_err(|e| solver_failure(self.cur_pos, e))?;
        let branch = branch.map(|b| b.simplify());
        if let Some(b) = &branch {
            if !b.is_true() {
                self.session.assume(b).map_err(|e| solver_failure(self.cur_pos, e))?;
            }
        }
        self.pcs.push(branch);
        Ok(())
    }

    fn pop_raw(&mut self) -> R<PcScope> {
        self.session.pop().map_err(|e| solver_failure(self.cur_pos, e))?;
        Ok(self.pcs.pop())
    }

    /// Closes a branch scope; summaries defined inside are forgotten.
    pub(crate) fn pop_branch(&mut self) -> R<PcScope> {
        let scope = self.pop_raw()?;
        let depth = self.pcs.depth();
        self.memo.retain(|m| m.depth <= depth);
        Ok(scope)
    }

    /// Closes an evaluation scope. The caller re-assumes the scope's value
    /// map definitions at the outer level, so memoized summaries move out too.
    pub(crate) fn pop_hoisting(&mut self) -> R<PcScope> {
        let scope = self.pop_raw()?;
        let depth = self.pcs.depth();
        for m in &mut self.memo {
            if m.depth > depth {
                m.depth = depth;
            }
        }
        Ok(scope)
    }

    fn verify_method(&mut self, m: &'p CMethod) -> R<()> {
        self.cur_pos = m.pos;
        exec::verify_method(self, m)
    }

    fn verify_function(&mut self, f: &'p CFunction) -> R<()> {
        self.cur_pos = f.pos;
        exec::verify_function(self, f)
    }
}
