//! Corpus-level checks: contract shapes, printer round trips, verdict
//! stability under configuration changes, and the command-line interface.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use qpv::verify_files;
use qpv_core::ast::checked::{Assertion, CStmt, CStmtKind};
use qpv_core::ast::ExprKind;

/// (ISCs, pure quantifiers) among the assertions.
fn count(assertions: &[Assertion]) -> (usize, usize) {
    let iscs = assertions.iter().filter(|a| matches!(a, Assertion::Isc(_))).count();
    let pure = assertions
        .iter()
        .filter(|a| matches!(a, Assertion::Pure(e) if matches!(e.kind, ExprKind::Quant(..))))
        .count();
    (iscs, pure)
}

fn count_stmts(stmts: &[CStmt]) -> (usize, usize) {
    let add = |(a, b): (usize, usize), (c, d): (usize, usize)| (a + c, b + d);
    stmts.iter().fold((0, 0), |acc, s| {
        let here = match &s.kind {
            CStmtKind::Inhale(a) | CStmtKind::Exhale(a) | CStmtKind::Assert(a) => count(a),
            CStmtKind::If { then, els, .. } => add(count_stmts(then), count_stmts(els)),
            CStmtKind::While { invariants, body, .. } => add(count(invariants), count_stmts(body)),
            _ => (0, 0),
        };
        add(acc, here)
    })
}

#[test]
fn replace_contract_and_body_have_the_expected_quantifiers() {
    let path = repo().join("corpus/parallel_replace.vpr");
    let prog = qpv::load_file(&path).unwrap();
    let m = prog.method("Replace").unwrap();
    let pres = count(&m.pres);
    let posts = count(&m.posts);
    assert_eq!((pres.0 + posts.0, pres.1 + posts.1), (2, 1), "contract");
    assert_eq!(count_stmts(m.body.as_ref().unwrap()), (4, 2), "fork and join statements");
}

#[test]
fn printing_is_a_parse_fixpoint_on_the_corpus() {
    for path in corpus_files().into_iter().chain(seeded_files()) {
        let src = std::fs::read_to_string(&path).unwrap();
        let once = qpv_core::ast::parse(&src).unwrap();
        let printed = once.to_string();
        let twice = qpv_core::ast::parse(&printed).unwrap_or_else(|e| panic!("{}: {e}\n{printed}", path.display()));
        assert_eq!(printed, twice.to_string(), "{}", path.display());
    }
}

type Verdicts = Vec<Vec<Option<String>>>;

fn verdicts(cfg: &qpv_core::engine::EngineConfig) -> Verdicts {
    let files: Vec<_> = corpus_files().into_iter().chain(seeded_files()).collect();
    verify_files(&files, cfg)
        .iter()
        .map(|r| {
            assert!(r.load_error.is_none(), "{}", r.file);
            r.outcomes
                .iter()
                .map(|o| o.result.as_ref().err().map(|e| format!("{} @ {}", e.kind, e.pos)))
                .collect()
        })
        .collect()
}

#[test]
fn verdicts_do_not_depend_on_chunk_order_or_debug_checks() {
    let base = verdicts(&engine_config());
    let mut reversed = engine_config();
    reversed.reverse_chunk_order = true;
    assert_eq!(verdicts(&reversed), base, "reverse chunk order");
    let mut debug = engine_config();
    debug.debug_invariants = true;
    assert_eq!(verdicts(&debug), base, "debug invariants");
}

#[test]
fn strict_inhale_injectivity_keeps_the_corpus_verified() {
    let mut cfg = engine_config();
    cfg.strict_inhale_injectivity = true;
    for r in verify_files(&corpus_files(), &cfg) {
        assert!(r.verified(), "{}", r.file);
    }
}

fn qpv(args: &[&str], files: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpv"))
        .args(args)
        .args(files)
        .output()
        .expect("qpv runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn exit_status_distinguishes_verified_failed_and_unloadable() {
    let corpus = corpus_files();
    let files: Vec<&Path> = corpus.iter().map(|p| p.as_path()).collect();
    let ok = qpv(&["verify"], &files);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let seeded = seeded_files();
    let bad = qpv(&["verify"], &[seeded[0].as_path()]);
    assert_eq!(bad.status.code(), Some(1), "{}", stdout(&bad));
    assert!(stdout(&bad).contains("FAILED"));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.vpr");
    std::fs::write(&broken, "method m( {").unwrap();
    let missing = dir.path().join("missing.vpr");
    let out = qpv(&["verify"], &[missing.as_path(), broken.as_path(), files[0]]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    assert!(text.contains("missing.vpr"), "{text}");
    assert!(text.contains("broken.vpr"), "{text}");
    // The remaining file is still verified.
    let name = files[0].file_name().unwrap().to_string_lossy();
    assert!(text.lines().any(|l| l.contains(&*name) && l.contains("ok")), "{text}");
}

#[test]
fn csv_report_has_one_row_per_task() {
    let seeded = seeded_files();
    let file = seeded.iter().find(|p| p.to_string_lossy().contains("parallel_replace")).unwrap();
    let out = qpv(&["verify", "--csv", "-", "--no-times"], &[file.as_path()]);
    let text = stdout(&out);
    let csv_start = text.find("file,method,verdict").expect("csv header");
    let mut reader = csv::Reader::from_reader(&text.as_bytes()[csv_start..]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let (kind, pos) = expectation(file);
    let failed: Vec<_> = rows.iter().filter(|r| &r[2] == "failed").collect();
    assert_eq!(failed.len(), 1, "{text}");
    assert_eq!(&failed[0][3], kind.to_string());
    assert_eq!(&failed[0][4], pos);
    assert!(rows.iter().all(|r| r[5].is_empty()), "times are omitted");
}

#[test]
fn bench_prints_one_row_per_file() {
    let corpus = corpus_files();
    let file = corpus[0].as_path();
    let once = stdout(&qpv(&["bench", "-n", "1"], &[file]));
    assert!(once.starts_with("file,verdict,mean-s,checks,"), "{once}");
    assert!(once.contains("# failing files: 0 of 1"), "{once}");
    let twice = stdout(&qpv(&["bench", "-n", "2"], &[file]));
    assert!(twice.starts_with("file,verdict,mean-s,stddev-s,checks,"), "{twice}");
    let row = twice.lines().nth(1).unwrap();
    assert_eq!(row.split(',').count(), 7, "{row}");
    assert_eq!(row.split(',').nth(1), Some("verified"));
}

#[test]
fn dump_smt_writes_one_transcript_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let file = repo().join("corpus/parallel_replace.vpr");
    let out = qpv(
        &["verify", "--dump-smt", dir.path().to_str().unwrap()],
        &[file.as_path()],
    );
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().any(|n| n.starts_with("parallel_replace.Replace") && n.ends_with(".smt2")), "{names:?}");
    for n in &names {
        let text = std::fs::read_to_string(dir.path().join(n)).unwrap();
        assert!(text.contains("(check-sat)") || text.contains("(set-option"), "{n}");
    }
}
