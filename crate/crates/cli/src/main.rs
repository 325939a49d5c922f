use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hsc_cli::commands;
use hsc_cli::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hsc", version, about = "Rotating Hele-Shaw cell: dispersion, elliptic solves, interface evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Highest mode in dispersion tables; overrides `n_max`.
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate l_n, A_n, μ(n), q_n and classify stability.
    Dispersion,
    /// Integrate the interface from the configured initial spectrum.
    Simulate,
    /// Solve both pressure problems for given boundary data.
    SolveElliptic {
        /// CSV with columns rho, h, g on the N angular nodes.
        #[arg(long)]
        boundary: PathBuf,
    },
    /// Run the acceptance checks and print a pass/fail table.
    Verify {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u8>>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("--config is required for this subcommand")?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(n) = cli.n_max {
        if n == 0 {
            anyhow::bail!("--n-max must be at least 1 (empty mode range)");
        }
        cfg.n_max = n;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn threads() -> Result<()> {
    if let Ok(v) = std::env::var("HSC_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("HSC_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    threads()?;
    let say = |s: &str| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match &cli.command {
        Command::Dispersion => {
            let cfg = load(cli)?;
            say(&commands::dispersion(&cfg, &cfg.output_dir)?);
            Ok(true)
        }
        Command::Simulate => {
            let cfg = load(cli)?;
            let (summary, ok) = commands::simulate(&cfg, &cfg.output_dir)?;
            if ok {
                say(&summary);
            } else {
                eprintln!("{summary}");
            }
            Ok(ok)
        }
        Command::SolveElliptic { boundary } => {
            let cfg = load(cli)?;
            say(&commands::solve_elliptic(&cfg, boundary, &cfg.output_dir)?);
            Ok(true)
        }
        Command::Verify { only, seed } => {
            let report = commands::verify(only.as_deref(), *seed, cli.out.as_ref())?;
            // the table is the point of this subcommand, so --quiet keeps it
            print!("{}", report.table());
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
