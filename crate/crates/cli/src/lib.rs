//! Batch verification of input files: loading, parallel per-method
//! verification, and line-delimited reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qpv_core::ast::checked::CheckedProgram;
use qpv_core::engine::{EngineConfig, EngineStats, TaskKind, TaskOutcome, Verifier};
use rayon::prelude::*;

/// Verdict of one record.
pub const VERIFIED: &str = "verified";
pub const FAILED: &str = "failed";
pub const ERROR: &str = "error";

/// One line of the machine-readable report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub file: String,
    pub method: String,
    pub verdict: &'static str,
    pub error_kind: String,
    pub position: String,
    pub millis: u64,
}

impl Record {
    pub const HEADER: [&'static str; 6] = ["file", "method", "verdict", "error-kind", "position", "millis"];

    fn fields(&self, with_time: bool) -> [String; 6] {
        [
            self.file.clone(),
            self.method.clone(),
            self.verdict.to_string(),
            self.error_kind.clone(),
            self.position.clone(),
            if with_time { self.millis.to_string() } else { String::new() },
        ]
    }
}

/// Results for one input file.
#[derive(Debug)]
pub struct FileReport {
    pub file: String,
    /// Load or setup failure; no tasks ran.
    pub load_error: Option<String>,
    pub outcomes: Vec<TaskOutcome>,
    pub millis: u64,
}

impl FileReport {
    pub fn verified(&self) -> bool {
        self.load_error.is_none() && self.outcomes.iter().all(TaskOutcome::verified)
    }

    /// Sums the statistics of all tasks.
    pub fn stats(&self) -> EngineStats {
        let mut s = EngineStats::default();
        for o in &self.outcomes {
            let t = &o.stats;
            s.session.checks += t.session.checks;
            s.session.assumptions += t.session.assumptions;
            s.session.quantifiers += t.session.quantifiers;
            s.session.value_maps += t.session.value_maps;
            s.session.declarations += t.session.declarations;
            s.session.solver_millis += t.session.solver_millis;
            s.summarise_calls += t.summarise_calls;
            s.summarise_cache_hits += t.summarise_cache_hits;
            s.summarise_solver_queries += t.summarise_solver_queries;
            s.remove_calls += t.remove_calls;
            s.accounting_checks += t.accounting_checks;
            s.pruned_branches += t.pruned_branches;
            s.chunks_dropped += t.chunks_dropped;
        }
        s
    }

    pub fn records(&self) -> Vec<Record> {
        if let Some(e) = &self.load_error {
            return vec![Record {
                file: self.file.clone(),
                method: "-".into(),
                verdict: ERROR,
                error_kind: "load-error".into(),
                position: first_position(e),
                millis: self.millis,
            }];
        }
        self.outcomes
            .iter()
            .map(|o| {
                let (verdict, kind, pos) = match &o.result {
                    Ok(()) => (VERIFIED, String::new(), String::new()),
                    Err(e) => (FAILED, e.kind.to_string(), e.pos.to_string()),
                };
                let method = match o.kind {
                    TaskKind::Method => o.name.clone(),
                    TaskKind::Function => format!("function {}", o.name),
                };
                Record {
                    file: self.file.clone(),
                    method,
                    verdict,
                    error_kind: kind,
                    position: pos,
                    millis: o.millis,
                }
            })
            .collect()
    }
}

/// The `line:col` prefix of a frontend error message, if any.
fn first_position(msg: &str) -> String {
    let head = msg.split(' ').next().unwrap_or("");
    let head = head.trim_end_matches(':');
    let mut parts = head.split(':');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(l), Some(c), None) if l.parse::<u32>().is_ok() && c.parse::<u32>().is_ok() => head.to_string(),
        _ => String::new(),
    }
}

/// Reads and checks a file.
pub fn load_file(path: &Path) -> Result<CheckedProgram, String> {
    let source = std::fs::read_to_string(path).map_err(|e| format!("cannot read file: {e}"))?;
    qpv_core::ast::load(&source).map_err(|e| e.to_string())
}

/// Verifies all files, running method tasks in parallel across files.
/// Reports come back in input order with tasks in declaration order.
pub fn verify_files(paths: &[PathBuf], cfg: &EngineConfig) -> Vec<FileReport> {
    struct Loaded {
        file: String,
        prog: Result<CheckedProgram, String>,
        millis: u64,
    }
    let loaded: Vec<Loaded> = paths
        .par_iter()
        .map(|p| {
            let t = Instant::now();
            let prog = load_file(p);
            Loaded {
                file: p.display().to_string(),
                prog,
                millis: t.elapsed().as_millis() as u64,
            }
        })
        .collect();
    let verifiers: Vec<Result<Verifier<'_>, String>> = loaded
        .iter()
        .map(|l| match &l.prog {
            Ok(p) => Verifier::new(p),
            Err(e) => Err(e.clone()),
        })
        .collect();
    let mut jobs = Vec::new();
    for (i, v) in verifiers.iter().enumerate() {
        if let Ok(v) = v {
            for t in v.tasks() {
                jobs.push((i, t));
            }
        }
    }
    let mut cfgs = Vec::new();
    for l in &loaded {
        let mut c = cfg.clone();
        c.solver.dump_prefix = dump_stem(&l.file);
        cfgs.push(c);
    }
    let done: Vec<(usize, TaskOutcome)> = jobs
        .into_par_iter()
        .map(|(i, t)| {
            let v = verifiers[i].as_ref().expect("loaded");
            (i, v.run(t, &cfgs[i]))
        })
        .collect();
    let mut reports: Vec<FileReport> = loaded
        .iter()
        .zip(&verifiers)
        .map(|(l, v)| FileReport {
            file: l.file.clone(),
            load_error: v.as_ref().err().cloned(),
            outcomes: Vec::new(),
            millis: l.millis,
        })
        .collect();
    for (i, o) in done {
        reports[i].millis += o.millis;
        reports[i].outcomes.push(o);
    }
    reports
}

/// File name without directories and extension, for dump file names.
fn dump_stem(file: &str) -> String {
    Path::new(file)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

/// Writes records as CSV with a header line. Timings are left empty when
/// `with_time` is false, so that reports are comparable across runs.
pub fn write_csv<W: std::io::Write>(out: W, records: &[Record], with_time: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(Record::HEADER)?;
    for r in records {
        w.write_record(r.fields(with_time))?;
    }
    w.flush()?;
    Ok(())
}

/// The human-readable report.
pub fn human_report(reports: &[FileReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let status = if r.verified() { "ok" } else { "FAILED" };
        let _ = writeln!(out, "{} ... {status} ({} ms)", r.file, r.millis);
        if let Some(e) = &r.load_error {
            let _ = writeln!(out, "  error: {e}");
        }
        for o in &r.outcomes {
            match &o.result {
                Ok(()) => {
                    let _ = writeln!(out, "  {} `{}`: verified ({} ms)", kind_word(o.kind), o.name, o.millis);
                }
                Err(e) => {
                    let _ = writeln!(out, "  {} `{}`: {e}", kind_word(o.kind), o.name);
                }
            }
        }
        let s = r.stats();
        let _ = writeln!(
            out,
            "  checks: {}, quantifiers: {}, value maps: {}, summarise: {} ({} cached, {} solver queries)",
            s.session.checks,
            s.session.quantifiers,
            s.session.value_maps,
            s.summarise_calls,
            s.summarise_cache_hits,
            s.summarise_solver_queries
        );
    }
    out
}

fn kind_word(k: TaskKind) -> &'static str {
    match k {
        TaskKind::Method => "method",
        TaskKind::Function => "function",
    }
}

/// Mean and sample standard deviation.
pub fn mean_stddev(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}
