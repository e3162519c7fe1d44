use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use funnel_cli::commands::{self, Context};
use funnel_cli::config::AfterVerdict;
use funnel_cli::svg::PlotKind;
use funnel_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "funnel",
    version,
    about = "Bistable fronts in funnel-shaped domains"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Planar travelling wave.
    Wave {
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Wall profile and feasibility of a funnel geometry.
    Geom {
        #[arg(long = "R")]
        radius: Option<f64>,
        #[arg(long = "alpha-deg")]
        alpha_deg: Option<f64>,
        #[arg(long = "L", conflicts_with = "auto_l")]
        l_match: Option<f64>,
        #[arg(long = "auto-L")]
        auto_l: bool,
        /// Exit with the geometry status when the wall is infeasible.
        #[arg(long)]
        check: bool,
    },
    /// Initial-value run from a planar front.
    Simulate,
    /// Entire solution from the past scheme.
    Entire {
        #[arg(long)]
        check_envelopes: bool,
    },
    /// Entire solution plus verdict.
    Classify,
    /// Level-set radii and offsets of a run.
    Levelsets {
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Truncated variational problem, stability and energy barrier.
    Steady,
    /// Radial ball subsolution.
    Ball {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long = "N")]
        n_dim: Option<usize>,
    },
    /// Stability eigenvalue of a stored field.
    Eig {
        #[arg(long)]
        state: PathBuf,
    },
    /// Phase diagram over `sweep.R_list` x `sweep.alpha_list`.
    Sweep,
    /// SVG chart of an artifact.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// wave, wall, field, offsets or phase.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full pipeline: entire solution, verdict, then `run.after`.
    Run,
}

fn load(global: &Global) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(w) = global.workers {
        cfg.workers = w;
    }
    if let Some(out) = &global.out {
        cfg.out_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = load(&cli.global)?;
    match &cli.command {
        Command::Wave { theta } | Command::Ball { theta, .. } => {
            if let Some(t) = theta {
                cfg.theta = *t;
            }
        }
        Command::Geom {
            radius,
            alpha_deg,
            l_match,
            auto_l,
            ..
        } => {
            cfg.radius = radius.unwrap_or(cfg.radius);
            cfg.alpha_deg = alpha_deg.unwrap_or(cfg.alpha_deg);
            if *auto_l {
                cfg.l_match = None;
            } else if l_match.is_some() {
                cfg.l_match = *l_match;
            }
        }
        Command::Levelsets { lambdas, .. } if !lambdas.is_empty() => cfg.lambdas = lambdas.clone(),
        _ => {}
    }
    if let Command::Ball { n_dim: Some(n), .. } = &cli.command {
        cfg.n_dim = *n;
    }
    cfg.validate()?;
    let ctx = Context::new(&cfg.out_dir, cli.global.quiet);
    match cli.command {
        Command::Wave { .. } => commands::wave(&cfg, &ctx),
        Command::Geom { check, .. } => commands::geom(&cfg, check, &ctx),
        Command::Simulate => commands::simulate(&cfg, &ctx),
        Command::Entire { check_envelopes } => commands::entire(&cfg, check_envelopes, &ctx),
        Command::Classify => commands::classify(&cfg, &ctx),
        Command::Levelsets { svg, .. } => commands::levelsets(&cfg, svg.as_deref(), &ctx),
        Command::Steady => commands::steady(&cfg, &ctx),
        Command::Ball { .. } => commands::ball(&cfg, &ctx),
        Command::Eig { state } => commands::eig(&cfg, &state, &ctx),
        Command::Sweep => commands::sweep(&cfg, &ctx),
        Command::Plot {
            input,
            kind,
            output,
        } => {
            let kind: PlotKind = kind.parse()?;
            commands::plot(&input, kind, output.as_deref(), &ctx)
        }
        Command::Run => {
            if cfg.after == AfterVerdict::Steady && cfg.n_dim < 3 && !ctx.quiet {
                eprintln!("note: the blocking construction is only guaranteed for N >= 3");
            }
            commands::run(&cfg, &ctx)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.global.quiet;
    match execute(cli) {
        Ok(paths) => {
            if !quiet {
                for p in paths {
                    println!("{}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
