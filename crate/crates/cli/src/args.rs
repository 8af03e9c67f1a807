//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "congested-ot",
    version,
    about = "Linear, congestion and penalized discrete optimal transport"
)]
pub struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one or more instances and emit a report or the plan.
    Solve(SolveArgs),
    /// Print A⁻¹ for a penalized instance.
    Inverse(InverseArgs),
    /// Entry bounds on A⁻¹ under uniform weights.
    Bounds(InputArgs),
    /// Sensitivities of the penalized optimum to c and a.
    Sensitivity(SensitivityArgs),
    /// Evaluate the eight structural assumptions.
    CheckAssumptions(InputArgs),
    /// Slow reference computations: enumeration or projected gradient.
    Oracle(OracleArgs),
    /// Dump the singular multiplier system and bordered Hessian of the congestion model.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Congestion,
    Penalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Direct,
    Neumann,
    Smw,
    ClosedForm,
    Qp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FormatArg {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Exact,
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Instance files. More than one requires --output-dir.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Defaults to penalized when the file has eps/delta, else congestion if a > 0, else linear.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Penalized model only; by default the direct solve is used when interior, the QP otherwise.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps_target: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: FormatArg,
    /// Add the uniform-weight entry bounds to the report.
    #[arg(long)]
    pub bounds: bool,
    #[arg(long, value_enum)]
    pub sensitivity: Option<OrderArg>,
    /// Compare sensitivities with central finite differences.
    #[arg(long, requires = "sensitivity")]
    pub fd_check: bool,
    /// Leave timing out of the report so output is reproducible.
    #[arg(long)]
    pub no_timing: bool,
    /// Worker threads for batch runs.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Write `<stem>.json` and `<stem>.csv` per input instead of printing.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum InverseMethodArg {
    #[default]
    Smw,
    ClosedForm,
    Dense,
}

#[derive(Debug, Clone, Args)]
pub struct InverseArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub method: InverseMethodArg,
    #[arg(long, value_enum, default_value_t)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Args)]
pub struct SensitivityArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    pub order: OrderArg,
    #[arg(long)]
    pub fd_check: bool,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OracleKind {
    #[default]
    Enumerate,
    ProjectedGradient,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t, conflicts_with_all = ["enumerate", "pgd"])]
    pub kind: OracleKind,
    /// Same as `--kind enumerate`.
    #[arg(long, conflicts_with = "pgd")]
    pub enumerate: bool,
    /// Same as `--kind projected-gradient`.
    #[arg(long)]
    pub pgd: bool,
    /// Model for enumeration; inferred like `solve` when omitted.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Largest total mass accepted by enumeration.
    #[arg(long, default_value_t = congested_ot_core::oracle::DEFAULT_ENUMERATION_CAP)]
    pub cap: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
}

impl OracleArgs {
    pub fn resolved_kind(&self) -> OracleKind {
        match (self.enumerate, self.pgd) {
            (true, _) => OracleKind::Enumerate,
            (_, true) => OracleKind::ProjectedGradient,
            _ => self.kind,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    /// Only the (N+L)×(N+L) system `R` in the multipliers. With neither flag both parts are printed.
    #[arg(long)]
    pub singular_system: bool,
    /// Only the bordered Hessian `[[D, −Bᵀ], [−B, 0]]`.
    #[arg(long)]
    pub bordered_hessian: bool,
}
