mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use config::{Command, Overrides, Resolved, RunConfig};

/// Kinetic-to-fluid Hamiltonian reduction checks and simulations.
#[derive(Debug, Parser)]
#[command(name = "kinred", version)]
struct Cli {
    /// Subcommand; may instead be given as `subcommand` in the config file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for random states; trial k uses an independent stream.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for independent trials.
    #[arg(long, value_name = "N", env = "KINRED_THREADS")]
    threads: Option<usize>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Multiplies every pass threshold.
    #[arg(long, value_name = "X")]
    tolerance_scale: Option<f64>,
    /// verify-brackets: also run at doubled resolution and require the
    /// median error to drop.
    #[arg(long)]
    refine: bool,
    /// verify-brackets: flip the entropy transport terms on the fluid side.
    #[arg(long, hide = true)]
    corrupt: bool,
}

fn load(cli: &Cli) -> anyhow::Result<Resolved> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config::resolve(
        file,
        Overrides {
            command: cli.command,
            seed: cli.seed,
            out: cli.out.clone(),
            threads: cli.threads,
            tolerance_scale: cli.tolerance_scale,
        },
    )
}

fn run(cli: &Cli, cfg: &Resolved) -> anyhow::Result<commands::Report> {
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join("resolved_config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg.to_run_config())? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    log::info!(
        "{}: seed {}, {} thread(s), writing to {}",
        cfg.subcommand.name(),
        cfg.seed,
        cfg.threads,
        cfg.out.display()
    );
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let start = std::time::Instant::now();
    let report = pool.install(|| match cfg.subcommand {
        Command::VerifyBrackets => commands::verify_brackets(cfg, cli.corrupt, cli.refine),
        Command::Simulate => commands::simulate(cfg),
        Command::ClosureCheck => commands::closure_check(cfg),
        Command::BoundCheck => commands::bound_check(cfg),
        Command::DemoBimodal => commands::demo_bimodal(cfg),
        Command::Decompose => commands::decompose_cmd(cfg),
    })?;
    log::info!("{} finished in {:.2?}", cfg.subcommand.name(), start.elapsed());
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            println!("{}: {}", cfg.subcommand.name(), if report.pass { "PASS" } else { "FAIL" });
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
