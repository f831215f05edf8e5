//! Incremental solver session over an SMT-LIB 2 pipe.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::term::{Sort, Term};

use super::render::{collect_decls, count_quantifiers, Decl, Renderer};

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Solver binary; spoken to as `<path> -in -smt2`.
    pub path: PathBuf,
    /// Soft timeout per check.
    pub timeout: Duration,
    pub seed: u64,
    /// Omit all quantifier patterns and let the solver choose.
    pub no_triggers: bool,
    /// Directory for replayable scripts of failed checks and session transcripts.
    pub dump_dir: Option<PathBuf>,
    /// File name prefix for dumps, unique per verification task.
    pub dump_prefix: String,
}

impl SolverConfig {
    /// Resolves the solver from `QPV_SOLVER`, falling back to `z3` on the path.
    pub fn from_env() -> Self {
        let path = std::env::var_os("QPV_SOLVER")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("z3"));
        SolverConfig {
            path,
            timeout: Duration::from_secs(10),
            seed: 0,
            no_triggers: false,
            dump_dir: None,
            dump_prefix: "session".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("cannot start solver `{path}`: {source}")]
    Spawn {
        path: String,
        source: std::io::Error,
    },
    #[error("solver I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver reported an error: {0}")]
    Solver(String),
    #[error("solver answered `{0}` unexpectedly")]
    Protocol(String),
    #[error("internal error: pop at scope depth 0")]
    PopAtRoot,
}

/// Outcome of a validity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckResult {
    /// The negated goal is unsatisfiable.
    Valid,
    /// A countermodel exists.
    Invalid,
    /// The solver gave up; the reason is the solver's own.
    Unknown(String),
}

impl CheckResult {
    pub fn is_valid(&self) -> bool {
        *self == CheckResult::Valid
    }

    /// Unknown because the time budget ran out, as opposed to incompleteness.
    pub fn is_timeout(&self) -> bool {
        matches!(self, CheckResult::Unknown(r) if r.contains("timeout") || r.contains("canceled") || r.contains("resource"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub checks: u64,
    pub assumptions: u64,
    /// Quantifier nodes sent in assumptions and goals.
    pub quantifiers: u64,
    /// Value maps declared.
    pub value_maps: u64,
    pub declarations: u64,
    pub solver_millis: u64,
}

pub struct Session {
    config: SolverConfig,
    renderer: Renderer,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    /// Declared symbol names and the scope depth at which they were declared.
    declared: HashMap<Arc<str>, usize>,
    /// Names declared per scope depth; index 0 is the root.
    scope_decls: Vec<Vec<Arc<str>>>,
    /// Live script per scope depth, for replayable dumps.
    script: Vec<String>,
    preamble: String,
    /// Full transcript, kept only when dumping.
    transcript: Option<String>,
    dumps: u64,
    stats: SessionStats,
}

impl Session {
    /// Starts the solver and sends the options and `preamble`. Names in
    /// `global` are declared by the preamble and never redeclared.
    pub fn start(config: SolverConfig, preamble: &str, global: &[String]) -> Result<Session, SolverError> {
        let mut child = Command::new(&config.path)
            .args(["-in", "-smt2"])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                path: config.path.display().to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let options = format!(
            "(set-option :print-success false)\n\
             (set-option :auto_config false)\n\
             (set-option :smt.mbqi false)\n\
             (set-option :smt.case_split 3)\n\
             (set-option :smt.qi.eager_threshold 100)\n\
             (set-option :smt.delay_units true)\n\
             (set-option :smt.random_seed {seed})\n\
             (set-option :sat.random_seed {seed})\n\
             (set-option :timeout {timeout})\n",
            seed = config.seed,
            timeout = config.timeout.as_millis()
        );
        let preamble = format!("{options}{preamble}");
        let transcript = config.dump_dir.as_ref().map(|_| String::new());
        let renderer = Renderer {
            no_triggers: config.no_triggers,
        };
        let mut declared = HashMap::new();
        for g in global {
            declared.insert(Arc::from(g.as_str()), 0);
        }
        let mut s = Session {
            config,
            renderer,
            child,
            stdin,
            stdout,
            declared,
            scope_decls: vec![Vec::new()],
            script: vec![String::new()],
            preamble: String::new(),
            transcript,
            dumps: 0,
            stats: SessionStats::default(),
        };
        s.raw(&preamble)?;
        s.preamble = preamble;
        Ok(s)
    }

    pub fn renderer(&self) -> Renderer {
        self.renderer
    }

    pub fn stats(&self) -> &SessionStats {
        &self.stats
    }

    pub fn depth(&self) -> usize {
        self.scope_decls.len() - 1
    }

    fn raw(&mut self, text: &str) -> Result<(), SolverError> {
        if let Some(t) = &mut self.transcript {
            t.push_str(text);
        }
        self.stdin.write_all(text.as_bytes())?;
        Ok(())
    }

    /// Sends a command that is part of the live script.
    fn send(&mut self, line: &str) -> Result<(), SolverError> {
        let depth = self.depth();
        let s = &mut self.script[depth];
        s.push_str(line);
        s.push('\n');
        self.raw(line)?;
        self.raw("\n")
    }

    fn declare(&mut self, t: &Term) -> Result<(), SolverError> {
        let mut decls = Vec::new();
        {
            let declared = &self.declared;
            collect_decls(t, &|n| declared.contains_key(n), &mut decls);
        }
        let depth = self.depth();
        for d in decls {
            let line = d.render(&self.renderer);
            if let Decl::ValueMap(_) = d {
                self.stats.value_maps += 1;
            }
            self.stats.declarations += 1;
            let name: Arc<str> = Arc::from(d.name());
            self.declared.insert(name.clone(), depth);
            self.scope_decls[depth].push(name);
            self.send(&line)?;
        }
        Ok(())
    }

    /// Declares a fresh constant of the given sort without asserting anything.
    pub fn declare_var(&mut self, name: &str, sort: &Sort) -> Result<(), SolverError> {
        self.declare(&crate::term::Var::new(name, sort.clone()).term())
    }

    pub fn push(&mut self) -> Result<(), SolverError> {
        self.scope_decls.push(Vec::new());
        self.script.push(String::new());
        self.raw("(push 1)\n")
    }

    pub fn pop(&mut self) -> Result<(), SolverError> {
        if self.depth() == 0 {
            return Err(SolverError::PopAtRoot);
        }
        for name in self.scope_decls.pop().expect("scope") {
            self.declared.remove(&name);
        }
        self.script.pop();
        self.raw("(pop 1)\n")
    }

    pub fn assume(&mut self, t: &Term) -> Result<(), SolverError> {
        if t.is_true() {
            return Ok(());
        }
        self.declare(t)?;
        self.stats.assumptions += 1;
        self.stats.quantifiers += count_quantifiers(t) as u64;
        let line = format!("(assert {})", self.renderer.term(t));
        self.send(&line)
    }

    /// Checks whether `t` is valid under the current assumptions.
    pub fn check(&mut self, t: &Term) -> Result<CheckResult, SolverError> {
        if t.is_true() {
            return Ok(CheckResult::Valid);
        }
        self.declare(t)?;
        self.stats.checks += 1;
        self.stats.quantifiers += count_quantifiers(t) as u64;
        let goal = format!("(assert (not {}))\n(check-sat)\n", self.renderer.term(t));
        self.raw("(push 1)\n")?;
        self.raw(&goal)?;
        self.stdin.flush()?;
        let started = Instant::now();
        let answer = self.read_answer()?;
        let result = match answer.as_str() {
            "unsat" => CheckResult::Valid,
            "sat" => CheckResult::Invalid,
            "unknown" => {
                self.raw("(get-info :reason-unknown)\n")?;
                self.stdin.flush()?;
                CheckResult::Unknown(self.read_line()?)
            }
            other => return Err(SolverError::Protocol(other.to_string())),
        };
        self.stats.solver_millis += started.elapsed().as_millis() as u64;
        self.raw("(pop 1)\n")?;
        if !result.is_valid() {
            self.dump_failed(&goal)?;
        }
        Ok(result)
    }

    fn read_line(&mut self) -> Result<String, SolverError> {
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(SolverError::Protocol("end of output".into()));
        }
        Ok(line.trim().to_string())
    }

    fn read_answer(&mut self) -> Result<String, SolverError> {
        loop {
            let line = self.read_line()?;
            if line.starts_with("(error") {
                return Err(SolverError::Solver(line));
            }
            if !line.is_empty() {
                return Ok(line);
            }
        }
    }

    /// The live script: preamble plus all assertions in open scopes.
    pub fn live_script(&self) -> String {
        let mut out = self.preamble.clone();
        for (i, s) in self.script.iter().enumerate() {
            if i > 0 {
                out.push_str("(push 1)\n");
            }
            out.push_str(s);
        }
        out
    }

    fn dump_failed(&mut self, goal: &str) -> Result<(), SolverError> {
        let Some(dir) = self.config.dump_dir.clone() else {
            return Ok(());
        };
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{}.fail-{}.smt2", self.config.dump_prefix, self.dumps));
        self.dumps += 1;
        let mut text = self.live_script();
        text.push_str(goal);
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Writes the full transcript when dumping is enabled.
    pub fn finish(mut self) -> Result<SessionStats, SolverError> {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.stdin.flush();
        if let (Some(dir), Some(t)) = (&self.config.dump_dir, &self.transcript) {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{}.smt2", self.config.dump_prefix)), t)?;
        }
        let _ = self.child.wait();
        Ok(self.stats.clone())
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Sort, Var};

    fn session() -> Session {
        Session::start(SolverConfig::from_env(), "(declare-sort $Ref 0)\n", &[]).unwrap()
    }

    #[test]
    fn true_is_valid() {
        let mut s = session();
        assert_eq!(s.check(&Term::tt()).unwrap(), CheckResult::Valid);
        let x = Var::new("x", Sort::Int).term();
        assert_eq!(
            s.check(&Term::le(x.clone(), Term::add(x, Term::int(1)))).unwrap(),
            CheckResult::Valid
        );
    }

    #[test]
    fn popped_assumptions_are_gone() {
        let mut s = session();
        let p = Var::new("p", Sort::Bool).term();
        s.push().unwrap();
        s.assume(&p).unwrap();
        assert!(s.check(&p).unwrap().is_valid());
        s.pop().unwrap();
        assert_eq!(s.check(&p).unwrap(), CheckResult::Invalid);
    }

    #[test]
    fn scope_depth_tracks_push_and_pop() {
        let mut s = session();
        for _ in 0..3 {
            s.push().unwrap();
        }
        assert_eq!(s.depth(), 3);
        for _ in 0..3 {
            s.pop().unwrap();
        }
        assert_eq!(s.depth(), 0);
        assert!(matches!(s.pop(), Err(SolverError::PopAtRoot)));
    }

    #[test]
    fn declarations_are_scoped() {
        let mut s = session();
        let y = Var::new("y@0", Sort::Int).term();
        s.push().unwrap();
        s.assume(&Term::eq(y.clone(), Term::int(1))).unwrap();
        s.pop().unwrap();
        // `y@0` must be redeclared after the pop, otherwise the solver errs.
        assert_eq!(s.check(&Term::eq(y, Term::int(1))).unwrap(), CheckResult::Invalid);
    }
}
