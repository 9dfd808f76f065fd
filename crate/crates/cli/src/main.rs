mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use momentgap::Error;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "momentgap", version, about = "Spectral gaps and design-size bounds for local random quantum circuits")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub out: Format,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Spectral gap of H(G, n, k).
    Gap(GapArgs),
    /// Regenerate a reference table with deviations.
    Table(TableArgs),
    /// Certificate of every applicable lower and upper bound.
    Bounds(BoundArgs),
    /// Depth labelling, compressed tree and flattening count.
    Depth(DepthArgs),
    /// Circuit-size bound from the best certified gap.
    Size(BoundArgs),
    /// Run a verification suite; exits non-zero on any failed check.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Full,
    /// Two-dimensional sites for k = 2, QR-projected sites otherwise.
    Effective,
    Qr,
}

#[derive(Args, Debug, Clone)]
pub struct Moment {
    /// Moment order.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Local dimension.
    #[arg(long, default_value_t = 2)]
    pub q: usize,
}

#[derive(Args, Debug)]
pub struct GapArgs {
    /// `star:N`, `path:N`, `complete:N`, `grid:AxB`, `y:A,B,C` or `file:PATH`.
    #[arg(long)]
    pub graph: String,
    #[command(flatten)]
    pub moment: Moment,
    #[arg(long, value_enum, default_value_t = Method::Effective)]
    pub method: Method,
    /// Residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0x5EED)]
    pub seed: u64,
    /// Matrix-vector product budget.
    #[arg(long, default_value_t = 5000)]
    pub budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    StarGaps,
    AnyG,
    Boosted,
    SizeTable,
    /// Complete-graph gaps with their analytic bracket.
    CgGaps,
}

#[derive(Args, Debug)]
pub struct TableArgs {
    #[arg(value_enum)]
    pub which: TableKind,
    #[command(flatten)]
    pub moment: Moment,
    #[arg(long, default_value_t = 3)]
    pub n_min: usize,
    #[arg(long, default_value_t = 14)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0x5EED)]
    pub seed: u64,
    /// Largest effective dimension computed; larger rows are flagged and skipped.
    #[arg(long, default_value_t = 1 << 22)]
    pub budget: u128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogBaseArg {
    E,
    #[value(name = "2")]
    Two,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long)]
    pub graph: String,
    #[command(flatten)]
    pub moment: Moment,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = LogBaseArg::E)]
    pub log_base: LogBaseArg,
    /// Largest effective dimension for numeric sub-gaps.
    #[arg(long, default_value_t = 1 << 14)]
    pub budget: u128,
    /// Force exact depth (default: exact up to 64 vertices).
    #[arg(long, conflicts_with = "heuristic")]
    pub exact: bool,
    #[arg(long)]
    pub heuristic: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0x5EED)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct DepthArgs {
    #[arg(long)]
    pub graph: String,
    /// `center` or a vertex id.
    #[arg(long, default_value = "center")]
    pub root: String,
    /// Exact minimisation instead of the deepest-leaf heuristic.
    #[arg(long)]
    pub exact: bool,
    /// State budget of the exact search.
    #[arg(long, default_value_t = momentgap::graph::DEFAULT_DEPTH_BUDGET)]
    pub budget: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Haar,
    Dl,
    Compression,
    Rewrite,
    Oracle,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    /// Random orderings per instance (dl suite).
    #[arg(long, default_value_t = 50)]
    pub orderings: usize,
    #[arg(long, default_value_t = 0xD1)]
    pub seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TooLarge { .. } | Error::Budget(_) => 3,
        Error::Convergence { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("{}", output::error_json(&Error::Invalid(e.to_string())));
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", output::error_json(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
