mod commands;
mod table;

use clap::Parser;
use edsl::config::{Format, RunConfig};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "edsl", version, about = "Spectral solver for energy-dependent Sturm-Liouville problems")]
struct Args {
    /// One of: spectrum, charfn, factor-check, kernel-check, chain-check,
    /// oracle-compare, norming
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(commands::COMMANDS))]
    command: String,
    #[arg(long)]
    config: PathBuf,
    /// Output file; a metadata sidecar `<out>.meta.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[arg(short, long)]
    verbose: bool,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_VALIDATION, format!("cannot read {}: {e}", args.config.display())),
    };
    let cfg = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_VALIDATION, e),
    };
    let format = match args.format.as_deref() {
        Some("json") => Format::Json,
        Some(_) => Format::Csv,
        None => cfg.output.format,
    };
    let out = args.out.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));

    let start = Instant::now();
    let outcome = match commands::run(&args.command, &cfg) {
        Ok(o) => o,
        Err(e) if e.is_validation() => return fail(EXIT_VALIDATION, e),
        Err(e) => return fail(EXIT_NUMERICAL, e),
    };
    if args.verbose {
        eprintln!("{} finished in {:.2?}", args.command, start.elapsed());
    }

    let body = match format {
        Format::Csv => outcome.table.to_csv(),
        Format::Json => outcome.table.to_json(&outcome.report),
    };
    let canonical = cfg.to_json();
    let hash: String = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let meta = json!({
        "command": args.command,
        "config_sha256": hash,
        "format": match format { Format::Csv => "csv", Format::Json => "json" },
        "columns": outcome.table.columns,
        "tol": cfg.solver.tol,
        "lambda_switch": cfg.solver.lambda_switch,
        "theta0": cfg.solver.theta0,
        "shift": {"re": outcome.shift.re, "im": outcome.shift.im},
        "report": outcome.report,
        "version": env!("CARGO_PKG_VERSION"),
    });
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, body) {
                return fail(EXIT_VALIDATION, format!("cannot write {}: {e}", path.display()));
            }
            let mut side = path.clone().into_os_string();
            side.push(".meta.json");
            let mut m = serde_json::to_string_pretty(&meta).expect("metadata serializes");
            m.push('\n');
            if let Err(e) = std::fs::write(&side, m) {
                return fail(EXIT_VALIDATION, format!("cannot write {}: {e}", PathBuf::from(side).display()));
            }
            println!("{}", outcome.summary);
        }
        None => {
            print!("{body}");
            eprintln!("{}", outcome.summary);
        }
    }
    ExitCode::SUCCESS
}
