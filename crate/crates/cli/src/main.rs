//! `payoff-forge`: file-based front end of the structuring engine.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "payoff-forge",
    version,
    about = "Structure payoffs from beliefs, market prices and risk profiles"
)]
struct Cli {
    /// Lift belief weights below the positivity floor instead of rejecting them.
    #[arg(long, global = true)]
    floor_beliefs: bool,
    #[command(subcommand)]
    command: Command,
}

/// Risk specification; at most one, otherwise the product's own is used.
#[derive(Debug, Args)]
#[group(multiple = false)]
struct RiskArgs {
    /// Utility family: log, constant_relative:R or constant_absolute_over_f:a.
    #[arg(long, value_name = "NAME[:PARAM]")]
    family: Option<String>,
    /// Risk-aversion profile file with `x_mid,R` rows.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,
    /// Parameter of the affine family F = (f - 1)/a + 1.
    #[arg(long, value_name = "A")]
    a: Option<f64>,
    /// Worst-case payoff of the affine family; calibrates `a`.
    #[arg(long, value_name = "FLOOR")]
    max_loss: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a price curve into the market distribution.
    ImplyMarket {
        prices: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a product for its payoff.
    Solve {
        product: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        /// Accept non-positive entries in a risk-aversion profile.
        #[arg(long)]
        allow_gambling: bool,
        /// JSON file overriding solver settings.
        #[arg(long, value_name = "FILE")]
        settings: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Imply the risk aversion behind a payoff.
    ImplyR {
        product: PathBuf,
        payoff: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a payoff or a zero-cost overlay; exits 3 when it is not acceptable.
    Validate {
        product: PathBuf,
        /// Curve to audit; defaults to the payoff or overlay in the product.
        curve: Option<PathBuf>,
        /// Treat the curve as a zero-cost overlay.
        #[arg(long)]
        overlay: bool,
        /// Require a payoff that depends on the state only through f.
        #[arg(long)]
        require_state_agnostic: bool,
        /// Write the report document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the brute-force optimizer against the solvers.
    Oracle {
        product: PathBuf,
        #[arg(long, value_name = "NAME[:PARAM]")]
        family: Option<String>,
        #[arg(long, value_name = "FILE")]
        settings: Option<PathBuf>,
    },
    /// Merge curves and profiles into one long-format CSV.
    PlotData {
        /// Series as NAME=FILE.
        #[arg(value_name = "NAME=FILE")]
        series: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        /// Address to listen on; overrides PAYOFF_FORGE_BIND.
        #[arg(long)]
        bind: Option<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let floor = cli.floor_beliefs;
    match cli.command {
        Command::ImplyMarket { prices, out } => commands::imply_market(&prices, out.as_deref()),
        Command::Solve {
            product,
            risk,
            allow_gambling,
            settings,
            out,
        } => commands::solve(
            &product,
            floor,
            commands::RiskFlags {
                family: risk.family,
                profile: risk.profile,
                a: risk.a,
                max_loss: risk.max_loss,
                allow_gambling,
            },
            settings.as_deref(),
            &out,
        ),
        Command::ImplyR {
            product,
            payoff,
            out,
        } => commands::imply_r(&product, floor, &payoff, out.as_deref()),
        Command::Validate {
            product,
            curve,
            overlay,
            require_state_agnostic,
            out,
        } => commands::validate(
            &product,
            floor,
            curve.as_deref(),
            overlay,
            require_state_agnostic,
            out.as_deref(),
        ),
        Command::Oracle {
            product,
            family,
            settings,
        } => commands::oracle(&product, floor, family.as_deref(), settings.as_deref()),
        Command::PlotData { series, out } => commands::plot_data(&series, out.as_deref()),
        Command::Serve { bind } => commands::serve(bind.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(message) = e.message() {
                eprintln!("error: {message}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
