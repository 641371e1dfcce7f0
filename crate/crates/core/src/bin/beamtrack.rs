use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use beamtrack::harness::config::ExperimentKind;
use beamtrack::harness::output::{manifest_path, to_csv, Manifest};
use beamtrack::harness::{parse_config, run_experiment_with_threads};

#[derive(Parser)]
#[command(name = "beamtrack", version, about = "Beam tracking experiments on photon-counting detector arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file
    Run(RunArgs),
    /// Run a config as a CRLB sweep
    Crlb(RunArgs),
    /// Run a config as an MSE sweep
    Mse(RunArgs),
    /// Run a config as a symbol-error sweep
    Ser(RunArgs),
    /// Parse and check a config without running it
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides the seed of the config
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; overrides `output`, `-` writes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides BEAMTRACK_THREADS
    #[arg(long)]
    threads: Option<usize>,
}

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 1;

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })
}

fn load(path: &PathBuf) -> Result<(String, beamtrack::harness::ParsedConfig), ExitCode> {
    let text = read(path)?;
    match parse_config(&text) {
        Ok(p) => {
            for w in &p.warnings {
                eprintln!("warning: {w}");
            }
            Ok((text, p))
        }
        Err(errors) => {
            for e in &errors {
                eprintln!("error: {}: {e}", path.display());
            }
            Err(ExitCode::from(CONFIG_ERROR))
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, ExitCode> {
    if let Some(k) = flag {
        return Ok(k.max(1));
    }
    match std::env::var("BEAMTRACK_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map(|k| k.max(1)).map_err(|_| {
            eprintln!("error: BEAMTRACK_THREADS must be a positive integer, found `{v}`");
            ExitCode::from(CONFIG_ERROR)
        }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(args: RunArgs, kind: Option<ExperimentKind>) -> Result<(), ExitCode> {
    let (text, parsed) = load(&args.config)?;
    let mut cfg = parsed.config;
    if let Some(k) = kind {
        cfg.kind = k;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let threads = thread_count(args.threads)?;
    let out = args.out.or_else(|| cfg.output.clone().map(PathBuf::from));

    let start = Instant::now();
    let mut result = run_experiment_with_threads(&cfg, threads).map_err(|e| {
        eprintln!("error: cannot start worker pool: {e}");
        ExitCode::from(RUNTIME_ERROR)
    })?;
    result.warnings = parsed.warnings;
    let elapsed = start.elapsed().as_secs_f64();
    let csv = to_csv(&result);

    match out.as_deref() {
        None => print!("{csv}"),
        Some(p) if p.as_os_str() == "-" => print!("{csv}"),
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                let _ = std::fs::create_dir_all(dir);
            }
            let manifest = Manifest::new(&text, cfg.seed, threads, elapsed, &result);
            let written = std::fs::write(p, &csv)
                .and_then(|_| std::fs::write(manifest_path(p), manifest.to_text()));
            if let Err(e) = written {
                eprintln!("error: {}: {e}", p.display());
                return Err(ExitCode::from(RUNTIME_ERROR));
            }
            eprintln!("wrote {} rows to {} in {elapsed:.1} s", result.rows.len(), p.display());
        }
    }
    for f in &result.failures {
        eprintln!("failed point: {f}");
    }
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(ExitCode::from(RUNTIME_ERROR))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a, None),
        Command::Crlb(a) => run(a, Some(ExperimentKind::CrlbSweep)),
        Command::Mse(a) => run(a, Some(ExperimentKind::MseSweep)),
        Command::Ser(a) => run(a, Some(ExperimentKind::SerSweep)),
        Command::Validate { config } => load(&config).map(|(_, p)| {
            println!("{}: ok ({})", config.display(), p.config.kind.as_str());
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
