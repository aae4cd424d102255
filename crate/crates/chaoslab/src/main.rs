use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use chaoslab::commands::{dispatch, Subcommand};
use chaoslab::config::{parse_config, render};
use chaoslab::manifest::{config_hash, ErrorRecord};

/// Interacting particle experiments: kernels, simulation, mean-field
/// references, Girsanov weights and chaos diagnostics.
#[derive(Debug, Parser)]
#[command(name = "chaoslab", version)]
struct Cli {
    /// Study to run.
    #[arg(value_enum)]
    command: Subcommand,
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides `[sim] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core.
    #[arg(long, env = "CHAOSLAB_THREADS", default_value_t = 0)]
    threads: usize,
}

fn fail(out: &std::path::Path, error: String, origin: &str, hash: Option<String>, code: u8) -> ExitCode {
    eprintln!("chaoslab: {origin}: {error}");
    let rec = ErrorRecord {
        error,
        origin: origin.to_string(),
        config_hash: hash,
    };
    if std::fs::create_dir_all(out).is_ok() {
        if let Ok(json) = serde_json::to_string_pretty(&rec) {
            let _ = std::fs::write(out.join("error.json"), json);
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return fail(&cli.out, format!("{}: {e}", cli.config.display()), "cli_io", None, 2),
    };
    let parsed = match cli.seed {
        // the override is applied before resolution so the hash covers it
        Some(seed) => parse_config(&text).map(|mut c| {
            c.sim.seed = seed;
            c
        }),
        None => parse_config(&text),
    };
    let cfg = match parsed {
        Ok(c) => c,
        Err(e) => {
            let origin = match &e {
                chaoslab::ConfigError::Core(c) => c.origin(),
                _ => "cli_io",
            };
            return fail(&cli.out, e.to_string(), origin, None, 2);
        }
    };
    let hash = config_hash(&render(&cfg));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => return fail(&cli.out, e.to_string(), "cli_io", Some(hash), 2),
    };
    match pool.install(|| dispatch(cli.command, &cfg, &cli.out)) {
        Ok(m) => {
            println!("{} finished; {} outputs in {}", m.subcommand, m.outputs.len(), cli.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&cli.out, e.to_string(), e.origin(), Some(hash), 1),
    }
}
