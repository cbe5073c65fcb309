//! Command-line driver: scene configuration, dispatch, manifests and exit codes.
//!
//! Exit codes: 0 success, 1 configuration error, 2 audit or regime failure,
//! 3 numerical fault.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod metrics;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use commands::{Context, RunError};
use config::SceneConfig;
use manifest::{AuditRecord, OutputDir, RunManifest};
use masskit::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_AUDIT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Mass,
    Solve,
    Deform,
    Compactify,
    Ale,
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mass => "mass",
            Command::Solve => "solve",
            Command::Deform => "deform",
            Command::Compactify => "compactify",
            Command::Ale => "ale",
            Command::Converge => "converge",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "masskit", version, about = "Mass, deformation and compactification audits for asymptotically flat ends")]
pub struct Args {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "MASSKIT_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct Timing {
    command: &'static str,
    wall_clock_seconds: f64,
    threads: usize,
}

fn exit_code(e: &RunError) -> i32 {
    match e {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Io(_) => EXIT_CONFIG,
        RunError::Core(err) => match err {
            Error::Config(_) | Error::Domain { .. } => EXIT_CONFIG,
            e if e.is_numerical_fault() => EXIT_NUMERICAL,
            _ => EXIT_AUDIT,
        },
    }
}

/// Converts a library rejection into a FAIL record.
fn failure_record(err: &Error) -> Option<AuditRecord> {
    match err {
        Error::Precondition {
            inequality,
            lhs,
            rhs,
            anchor,
        } => Some(AuditRecord::violated("precondition", inequality, *lhs, *rhs).anchored(anchor.clone())),
        Error::Audit {
            check,
            location,
            value,
            bound,
        } => Some(AuditRecord::violated("construction_audit", check, *value, *bound).at(location.clone())),
        Error::Regime(msg) => Some(AuditRecord::violated("regime", msg, -1.0, 0.0)),
        Error::Positivity(msg) => Some(AuditRecord::violated("positivity", msg, -1.0, 0.0)),
        _ => None,
    }
}

fn print_audit(a: &AuditRecord) {
    if a.passed() {
        println!("PASS {}", a.name);
    } else {
        let mut line = format!(
            "FAIL {}: {} (value = {:.6e}, bound = {:.6e}, margin = {:.6e})",
            a.name, a.inequality, a.value, a.bound, a.margin
        );
        if let Some(anchor) = &a.anchor {
            line.push_str(&format!(" [{anchor}]"));
        }
        if let Some(loc) = &a.location {
            line.push_str(&format!(" at {loc}"));
        }
        println!("{line}");
    }
}

/// Runs one command and returns the process exit code.
pub fn run(args: &Args) -> i32 {
    let path = args.config.to_string_lossy().to_string();
    let (cfg, bytes) = match SceneConfig::load(&path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("configuration error: --threads must be positive");
            return EXIT_CONFIG;
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let root = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("masskit-out"));
    let mut out = match OutputDir::create(&root) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create output directory {}: {e}", root.display());
            return EXIT_CONFIG;
        }
    };
    let mut manifest = RunManifest::new(args.command.name(), &bytes, seed);
    let start = Instant::now();
    let result = {
        let ctx = Context {
            cfg: &cfg,
            seed,
            manifest: &mut manifest,
            out: &mut out,
        };
        match args.command {
            Command::Mass => commands::cmd_mass(ctx),
            Command::Solve => commands::cmd_solve(ctx),
            Command::Deform => commands::cmd_deform(ctx),
            Command::Compactify => commands::cmd_compactify(ctx),
            Command::Ale => commands::cmd_ale(ctx),
            Command::Converge => commands::cmd_converge(ctx),
        }
    };
    let code = match &result {
        Ok(()) if manifest.all_passed() => EXIT_OK,
        Ok(()) => EXIT_AUDIT,
        Err(e) => {
            let code = exit_code(e);
            if code == EXIT_CONFIG {
                eprintln!("{e}");
                return code;
            }
            eprintln!("error: {e}");
            manifest.failed_stage(args.command.name(), e.to_string());
            if let RunError::Core(err) = e {
                if let Some(rec) = failure_record(err) {
                    manifest.audit(rec);
                }
            }
            code
        }
    };
    manifest.exit_code = code;
    for a in &manifest.audits {
        print_audit(a);
    }
    manifest.outputs = out.written().to_vec();
    manifest.outputs.push("manifest.json".into());
    let timing = Timing {
        command: args.command.name(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
    };
    let written = out
        .write("manifest.json", &(manifest.to_json() + "\n"))
        .and_then(|_| out.write("timing.json", &(serde_json::to_string_pretty(&timing).expect("timing serializes") + "\n")));
    if let Err(e) = written {
        eprintln!("output error: {e}");
        return EXIT_CONFIG;
    }
    code
}
