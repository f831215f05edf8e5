//! `qpv verify` and `qpv bench`.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use qpv::{human_report, mean_stddev, verify_files, write_csv, FileReport};
use qpv_core::engine::EngineConfig;
use qpv_core::smt::SolverConfig;

#[derive(Parser)]
#[command(name = "qpv", version, about = "Verifier for permission-based programs with quantified permissions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify all methods and functions of the given files.
    Verify {
        #[command(flatten)]
        flags: Flags,
        /// Write the machine-readable report to this file (`-` for stdout).
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Leave the timing column of the machine-readable report empty.
        #[arg(long)]
        no_times: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Verify the given files repeatedly and print a timing table.
    Bench {
        #[command(flatten)]
        flags: Flags,
        /// Number of repetitions.
        #[arg(short = 'n', default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        repetitions: u32,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Flags {
    /// Solver binary (default: `QPV_SOLVER` or `z3` on the search path).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Per-check solver timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    /// Solver random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of verification tasks run in parallel.
    #[arg(short = 'j', long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    /// Drop all quantifier patterns and let the solver choose its own.
    #[arg(long)]
    no_triggers: bool,
    /// Recompute heap summaries instead of reusing them.
    #[arg(long)]
    no_memoize: bool,
    /// Also check receiver injectivity when inhaling.
    #[arg(long)]
    strict_inhale_injectivity: bool,
    /// Check internal invariants (permission accounting, non-negative
    /// chunks, unsatisfiable pruned branches) with extra solver queries.
    #[arg(long)]
    debug_invariants: bool,
    /// Consult heap chunks in reverse insertion order.
    #[arg(long)]
    reverse_chunks: bool,
    /// Write solver transcripts and failed queries to this directory.
    #[arg(long, value_name = "DIR")]
    dump_smt: Option<PathBuf>,
}

impl Flags {
    fn config(&self) -> Result<EngineConfig, String> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err("timeout must be positive".into());
        }
        let mut solver = SolverConfig::from_env();
        if let Some(p) = &self.solver {
            solver.path = p.clone();
        }
        solver.timeout = Duration::from_secs_f64(self.timeout);
        solver.seed = self.seed;
        solver.no_triggers = self.no_triggers;
        solver.dump_dir = self.dump_smt.clone();
        let mut cfg = EngineConfig::new(solver);
        cfg.memoize = !self.no_memoize;
        cfg.strict_inhale_injectivity = self.strict_inhale_injectivity;
        cfg.debug_invariants = self.debug_invariants;
        cfg.reverse_chunk_order = self.reverse_chunks;
        Ok(cfg)
    }

    fn pool(&self) -> Result<rayon::ThreadPool, String> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs as usize)
            .build()
            .map_err(|e| e.to_string())
    }
}

/// Exit status: verification errors are 1; load errors and solver failures
/// (the solver could not be run or gave up) are 2.
fn status(reports: &[FileReport]) -> ExitCode {
    if reports.iter().any(|r| r.load_error.is_some() || solver_failed(r)) {
        ExitCode::from(2)
    } else if reports.iter().all(FileReport::verified) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn solver_failed(r: &FileReport) -> bool {
    r.outcomes.iter().any(|o| {
        matches!(&o.result, Err(e) if e.kind == qpv_core::engine::ErrorKind::SolverFailure)
    })
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qpv: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Verify {
            flags,
            csv,
            no_times,
            files,
        } => {
            let cfg = flags.config()?;
            let reports = flags.pool()?.install(|| verify_files(&files, &cfg));
            print!("{}", human_report(&reports));
            if let Some(path) = csv {
                let records: Vec<_> = reports.iter().flat_map(FileReport::records).collect();
                if path.as_os_str() == "-" {
                    write_csv(std::io::stdout().lock(), &records, !no_times).map_err(|e| e.to_string())?;
                } else {
                    let f = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                    write_csv(f, &records, !no_times).map_err(|e| e.to_string())?;
                }
            }
            Ok(status(&reports))
        }
        Command::Bench {
            flags,
            repetitions,
            files,
        } => {
            let cfg = flags.config()?;
            let pool = flags.pool()?;
            let mut times: Vec<Vec<f64>> = vec![Vec::new(); files.len()];
            let mut last = Vec::new();
            for _ in 0..repetitions {
                last = pool.install(|| verify_files(&files, &cfg));
                for (t, r) in times.iter_mut().zip(&last) {
                    t.push(r.millis as f64 / 1000.0);
                }
            }
            let mut out = std::io::stdout().lock();
            let with_sd = repetitions > 1;
            let header = if with_sd {
                "file,verdict,mean-s,stddev-s,checks,quantifiers,value-maps"
            } else {
                "file,verdict,mean-s,checks,quantifiers,value-maps"
            };
            writeln!(out, "{header}").map_err(|e| e.to_string())?;
            let mut spurious = 0;
            for (t, r) in times.iter().zip(&last) {
                let (mean, sd) = mean_stddev(t);
                let verdict = if r.load_error.is_some() {
                    "error"
                } else if r.verified() {
                    "verified"
                } else {
                    spurious += 1;
                    "failed"
                };
                let s = r.stats();
                let sd = match (with_sd, sd) {
                    (true, Some(sd)) => format!("{sd:.3},"),
                    _ => String::new(),
                };
                writeln!(
                    out,
                    "{},{verdict},{mean:.3},{sd}{},{},{}",
                    r.file, s.session.checks, s.session.quantifiers, s.session.value_maps
                )
                .map_err(|e| e.to_string())?;
            }
            writeln!(out, "# failing files: {spurious} of {}", files.len()).map_err(|e| e.to_string())?;
            Ok(status(&last))
        }
    }
}
