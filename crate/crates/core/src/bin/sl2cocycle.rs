use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sl2cocycle::cli::{cmd_cf, cmd_critical_set, cmd_scan, cmd_schrodinger, ScanMode};
use sl2cocycle::config::RunConfig;

#[derive(Parser)]
#[command(version, about = "Hyperbolicity of singularly perturbed SL(2,R) cocycles over circle rotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true, env = "SL2COCYCLE_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory (overrides `output` in the config).
    #[arg(long, global = true, env = "SL2COCYCLE_OUT")]
    out: Option<PathBuf>,

    /// Working precision in bits: 53 (double) or 106 (double-double).
    #[arg(long, global = true, env = "SL2COCYCLE_PRECISION")]
    precision: Option<u32>,

    /// Deepest critical-set level.
    #[arg(long, global = true, env = "SL2COCYCLE_MAX_LEVEL")]
    max_level: Option<usize>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "SL2COCYCLE_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Convergents, Brjuno sums and condition (A).
    Cf,
    /// Critical sets level by level, with the exclusion ledger.
    CriticalSet,
    /// Hyperbolicity scan over the epsilon sweep.
    Scan {
        #[arg(long, default_value = "theorem4")]
        mode: String,
    },
    /// Ingest a torus potential into phase tables.
    Schrodinger,
}

fn run(cli: Cli) -> sl2cocycle::Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| sl2cocycle::Error::Config(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .ok_or_else(|| sl2cocycle::Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::from_path(&path)?;
    if let Some(bits) = cli.precision {
        cfg.precision_bits = bits;
    }
    if let Some(level) = cli.max_level {
        cfg.max_level = level;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.display().to_string());
    }
    cfg.validate("")?;
    let out = PathBuf::from(cfg.output.clone().unwrap_or_else(|| "out".into()));
    let report = match cli.command {
        Command::Cf => cmd_cf(&cfg, &out)?,
        Command::CriticalSet => cmd_critical_set(&cfg, &out)?,
        Command::Scan { mode } => cmd_scan(&cfg, &out, mode.parse::<ScanMode>()?)?,
        Command::Schrodinger => cmd_schrodinger(&cfg, &out)?,
    };
    if let Some(notice) = &report.notice {
        eprintln!("note: {notice}");
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    eprintln!("outcome: {:?}", report.outcome);
    Ok(report.outcome.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
