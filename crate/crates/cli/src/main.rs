mod commands;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ecm", version, about = "ECM performance model for A64FX")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-core cycles per vector iteration of a streaming or stencil kernel.
    Predict(PredictArgs),
    /// Multicore scaling of a kernel within one contention domain.
    Scaling(ScalingArgs),
    /// Build a sparse matrix, convert it and predict SpMV performance.
    Spmv(SpmvArgs),
    /// Check the machine model against the reference values.
    Validate(MachineArg),
    /// Print a machine model as JSON.
    Machine(MachineArg),
}

#[derive(Args, Debug)]
struct MachineArg {
    /// Built-in machine name or path to a JSON machine file.
    #[arg(long, default_value = ecm_model::machine::A64FX_FX700)]
    machine: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    L1,
    L2,
    Mem,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OverlapArg {
    Partial,
    None,
    Full,
    All,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// Kernel name (see `ecm predict --help` for the list).
    kernel: String,
    #[command(flatten)]
    machine: MachineArg,
    /// Layer condition state for stencils: satisfied, violated-l1 or violated.
    #[arg(long)]
    lc: Option<String>,
    /// Inner grid dimension; derives the layer condition state when `--lc` is absent.
    #[arg(long, conflicts_with = "lc")]
    inner_dim: Option<usize>,
    /// Independent accumulators for reductions; omitted means latency is hidden.
    #[arg(long)]
    unroll: Option<u32>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Memory level(s) to report.
    #[arg(long, value_enum, default_value_t = LevelArg::All)]
    level: LevelArg,
    /// Overlap hypothesis.
    #[arg(long, value_enum, default_value_t = OverlapArg::Partial)]
    overlap: OverlapArg,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Largest core count; defaults to the cores of one domain.
    #[arg(long)]
    max_cores: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Crs,
    Sell,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["matrix", "hpcg", "random"])))]
struct SpmvArgs {
    #[command(flatten)]
    machine: MachineArg,
    /// Matrix Market file.
    #[arg(long)]
    matrix: Option<std::path::PathBuf>,
    /// HPCG grid: `N` for N³ or `NX,NY,NZ`.
    #[arg(long)]
    hpcg: Option<String>,
    /// Random square matrix with this many rows.
    #[arg(long, requires = "seed")]
    random: Option<usize>,
    /// Fraction of nonzero entries of the random matrix.
    #[arg(long, default_value_t = 0.01)]
    density: f64,
    /// RNG seed for `--random`.
    #[arg(long)]
    seed: Option<u64>,
    /// Storage format to model.
    #[arg(long, value_enum, default_value_t = FormatArg::Sell)]
    format: FormatArg,
    /// SELL chunk height.
    #[arg(short = 'C', long = "chunk", default_value_t = 32)]
    chunk: usize,
    /// SELL sorting scope: a row count or `auto`.
    #[arg(long, default_value = "auto")]
    sigma: String,
    /// RHS reuse factor: a number, `optimistic` (1/n_nzr) or `lru`.
    #[arg(long, default_value = "optimistic")]
    alpha: String,
    /// Unrolling factor of the SELL kernel.
    #[arg(long, default_value_t = 4)]
    unroll: u32,
    /// Compare CRS and SELL results numerically.
    #[arg(long)]
    check: bool,
    /// Apply reverse Cuthill-McKee reordering first.
    #[arg(long)]
    rcm: bool,
    /// Worker threads for the numerical kernels.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Time the numerical kernel (wall clock, informational).
    #[arg(long)]
    time: bool,
    /// Repetitions for `--time`.
    #[arg(long, default_value_t = 10)]
    repeat: usize,
}

/// Command outcome: the report and whether all of its checks passed.
pub struct Outcome {
    pub report: report::Report,
    pub passed: bool,
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let invocation = std::iter::once("ecm".to_owned())
        .chain(std::env::args().skip(1))
        .collect::<Vec<_>>()
        .join(" ");

    let result = match cli.command {
        Command::Predict(a) => commands::predict(invocation, &a),
        Command::Scaling(a) => commands::scaling(invocation, &a),
        Command::Spmv(a) => commands::spmv(invocation, &a),
        Command::Validate(a) => commands::validate(invocation, &a),
        Command::Machine(a) => {
            return match ecm_model::resolve_machine(&a.machine) {
                Ok(m) => {
                    emit(&m.to_json());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
    };

    match result {
        Ok(outcome) => {
            match cli.output {
                Output::Text => emit(outcome.report.to_text().trim_end()),
                Output::Json => emit(&outcome.report.to_json()),
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
