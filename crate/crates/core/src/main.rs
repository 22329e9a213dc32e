use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tubedyn::harness::{emit, error_exit_code, resolve_out_dir, run, Command, RunConfig};

/// Thin-tube quantum dynamics experiments.
#[derive(Debug, Parser)]
#[command(name = "qdyn", version)]
struct Cli {
    /// geometry-audit, gauge-check, spectrum, evolve, converge or hypothesis-audit
    command: String,
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides QDYN_OUT and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace existing output files
    #[arg(long)]
    overwrite: bool,
    /// Seed for Lanczos starts and random test vectors
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: &Cli) -> tubedyn::Result<i32> {
    let command: Command = cli.command.parse()?;
    let cfg = RunConfig::load(&cli.config)?;
    let bundle = run(command, &cfg, cli.seed)?;
    let dir = resolve_out_dir(cli.out.as_deref(), &cfg);
    let written = emit(&bundle, &dir, cli.overwrite)?;
    for path in &written {
        println!("[{command}] wrote {}", path.display());
    }
    if let Some(slope) = bundle.slope {
        println!("[{command}] slope {slope:.6}");
    }
    for (name, ok) in &bundle.flags {
        println!("[{command}] {name}: {}", if *ok { "pass" } else { "FAIL" });
    }
    if !bundle.audit_failures.is_empty() {
        let named: Vec<_> = bundle
            .audit_failures
            .iter()
            .map(|v| format!("hypothesis ({v})"))
            .collect();
        eprintln!("audit failure: {}", named.join(", "));
    }
    Ok(bundle.exit_code())
}

fn main() -> ExitCode {
    // usage errors exit with 1; 2 is reserved for audit failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            let code = error_exit_code(&err);
            if code == 2 {
                eprintln!("audit failure: {err}");
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(code as u8)
        }
    }
}
