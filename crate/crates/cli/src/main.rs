//! `spectrum`: auctions, licensing fees, market equilibrium, synthetic data
//! and simultaneous-equation estimation from the command line.
//!
//! Exit status: 0 on success, 1 on validation or runtime errors (one
//! `error[kind]: message` line on stderr), 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod chart;
mod commands;
mod error;
mod io;

#[derive(Debug, Parser)]
#[command(name = "spectrum", version, about = "Spectrum licensing market laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simultaneous multiple-round ascending auction with straightforward bidders.
    Auction(AuctionArgs),
    /// Licensing-fee tables and supply/demand curves.
    #[command(subcommand)]
    Market(MarketCommand),
    /// Simulate a logistic adoption path with price-dependent saturation.
    Diffusion(DiffusionArgs),
    /// Draw a synthetic cross-country dataset from the structural model.
    GenData(GenDataArgs),
    /// Estimate the supply/demand system.
    Estimate(EstimateArgs),
    /// Parameter-recovery experiment: repeated generation and 3SLS estimation.
    Montecarlo(MonteCarloArgs),
    /// Descriptive statistics and correlation matrix of a dataset.
    Stats(StatsArgs),
    /// Generate one sample, estimate it and evaluate the fee hypothesis.
    Replicate(ReplicateArgs),
    /// Render a series CSV as an SVG chart.
    Chart(ChartArgs),
}

#[derive(Debug, Args)]
struct AuctionArgs {
    /// Auction configuration JSON (licenses, opening, increment, activity, max_rounds).
    #[arg(long)]
    config: PathBuf,
    /// Bidder list JSON (id, valuations, eligibility, demand_cap).
    #[arg(long)]
    bidders: PathBuf,
    /// Seed for tie-breaking.
    #[arg(long)]
    seed: u64,
    /// Include the round-by-round record in the output.
    #[arg(long)]
    trace: bool,
    /// Output JSON (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum MarketCommand {
    /// Five-year totals and per-subscriber fees of licensing regimes.
    Fees(FeesArgs),
    /// Demand and supply schedules with and without a licensing fee.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
struct FeesArgs {
    /// Regime list JSON; defaults to the shipped GSM/PCS table.
    #[arg(long)]
    regimes: Option<PathBuf>,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Structural parameters JSON; defaults to the shipped point estimates.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Exogenous profile JSON (CL, COMP, POPD, W, INC, pF, TDF); defaults to sample means.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Baseline licensing fee.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    cl: f64,
    /// Fee of the comparison supply curve.
    #[arg(long, allow_negative_numbers = true, default_value_t = 400.0)]
    compare_cl: f64,
    /// Number of price points.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Highest price on the grid; defaults to twice the larger equilibrium price.
    #[arg(long, allow_negative_numbers = true)]
    p_max: Option<f64>,
    /// Output CSV with columns p,demand,supply_base,supply_fee.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the equilibria and fee derivatives as JSON here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scheme {
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
struct DiffusionArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Licensing fee for the path (overrides the profile's CL).
    #[arg(long, allow_negative_numbers = true)]
    cl: Option<f64>,
    /// Also simulate a second path with this fee.
    #[arg(long, allow_negative_numbers = true)]
    compare_cl: Option<f64>,
    #[arg(long, default_value_t = 40)]
    periods: usize,
    /// Intrinsic adoption rate r.
    #[arg(long, default_value_t = 0.3)]
    rate: f64,
    /// Initial penetration q0.
    #[arg(long, default_value_t = 0.01)]
    initial: f64,
    /// Saturation at zero price.
    #[arg(long, default_value_t = 1.0)]
    saturation: f64,
    /// Price sensitivity η of the saturation level exp(−η·p).
    #[arg(long, default_value_t = 0.002)]
    eta: f64,
    /// Installed-base effect on demand.
    #[arg(long, default_value_t = 0.0)]
    network_effect: f64,
    #[arg(long, value_enum, default_value_t = Scheme::Discrete)]
    scheme: Scheme,
    /// Output CSV (t,q,p,g; with a comparison path: path,t,q,p,g).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Domain {
    ResampleShocks,
    ResampleRow,
    Keep,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Moment targets JSON; defaults to the shipped sample moments.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Structural parameters JSON used as truth; defaults to the shipped point estimates.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Redraw exogenous values outside the targets' [min, max].
    #[arg(long)]
    truncate: bool,
    /// Handling of draws with penetration outside (0, 1].
    #[arg(long, value_enum)]
    domain: Option<Domain>,
    /// Attempts per row before giving up.
    #[arg(long, default_value_t = 100)]
    max_tries: usize,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 18)]
    n: usize,
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ols,
    #[value(name = "2sls")]
    TwoSls,
    #[value(name = "3sls")]
    ThreeSls,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(value_enum)]
    method: MethodArg,
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// System specification JSON; defaults to the shipped supply/demand model.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Accept any finite values (synthetic data may have negative fees).
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    gen: GenArgs,
    /// System specification JSON; defaults to the shipped supply/demand model.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    /// Run replications on one thread.
    #[arg(long)]
    sequential: bool,
    /// Report JSON (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-replication estimates CSV.
    #[arg(long)]
    estimates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplicateArgs {
    #[arg(long)]
    seed: u64,
    /// Output directory (data.csv, estimates.json, table.txt, hypothesis.json).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 18)]
    n: usize,
    /// Keep exogenous draws outside the sample ranges.
    #[arg(long)]
    no_truncate: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChartKind {
    SupplyDemand,
    Diffusion,
    McHistogram,
}

#[derive(Debug, Args)]
struct ChartArgs {
    #[arg(long, value_enum)]
    kind: ChartKind,
    /// Series CSV.
    #[arg(long)]
    series: PathBuf,
    /// Estimate column for histograms, e.g. `supply.CL`.
    #[arg(long)]
    column: Option<String>,
    /// Reference line for histograms (e.g. the true value).
    #[arg(long, allow_negative_numbers = true)]
    reference: Option<f64>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Output SVG.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
