//! `tfode` command line interface: step-size sweeps over the builtin or
//! user-defined tempered fractional problems, with CSV output.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tfode::bench::{self, BenchConfig, BenchError, DeltaSpec, ProblemSpec};
use tfode::mesh::{HeightAdvance, SelectorKind};
use tfode::solver::{Scheme, SolveError};
use tfode::weights::WeightMode;

#[derive(Parser)]
#[command(
    name = "tfode",
    about = "Predictor-corrector solver for tempered fractional ODEs with fast history quadrature",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a step-size sweep and write an error/order/cost table as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Builtin example id (1, 2 or 3).
    #[arg(long, conflicts_with = "rhs", value_parser = clap::value_parser!(u32))]
    example: Option<u32>,

    /// Right-hand side f(t, x) as an expression, e.g. "exp(-t)*(t^2 - t) - x".
    #[arg(long, requires = "init")]
    rhs: Option<String>,

    /// Initial coefficients "c0" or "c0,c1" (used with --rhs).
    #[arg(long)]
    init: Option<String>,

    /// Fractional order, 0 < alpha < 2.
    #[arg(long)]
    alpha: f64,

    /// Tempering rate, lambda >= 0.
    #[arg(long)]
    lambda: f64,

    /// Time horizon T > 0.
    #[arg(long = "T", value_name = "T")]
    horizon: f64,

    /// Step sizes, comma separated, halving: "1/10,1/20,1/40".
    #[arg(long = "h", value_name = "LIST")]
    h: String,

    /// Stepping scheme.
    #[arg(long, value_parser = parse_scheme, default_value = "baseline")]
    scheme: Scheme,

    /// History node selector.
    #[arg(long, value_parser = parse_selector, default_value = "full")]
    selector: SelectorKind,

    /// Increment for the selector: "10h", "h/2", or an absolute "0.05".
    /// Defaults to the recommended value for the scheme and alpha.
    #[arg(long)]
    delta: Option<String>,

    /// Difference-form weight handling.
    #[arg(long = "weight-mode", value_parser = parse_weight_mode, default_value = "derived")]
    weight_mode: WeightMode,

    /// Reading of the equal-height advance formula (single-kernel form).
    #[arg(long = "height-advance", value_parser = parse_height_advance, default_value = "derived")]
    height_advance: HeightAdvance,

    /// Output CSV path.
    #[arg(long, value_name = "FILE.csv")]
    out: PathBuf,

    /// Directory for per-step node placement CSV dumps.
    #[arg(long = "dump-nodes", value_name = "DIR")]
    dump_nodes: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "baseline" => Ok(Scheme::Baseline),
        "single" => Ok(Scheme::SingleForm),
        "diff" => Ok(Scheme::DiffForm),
        _ => Err(format!("unknown scheme `{s}` (baseline|single|diff)")),
    }
}

fn parse_selector(s: &str) -> Result<SelectorKind, String> {
    match s {
        "full" => Ok(SelectorKind::Full),
        "height" => Ok(SelectorKind::EqualHeight),
        "area" => Ok(SelectorKind::EqualArea),
        _ => Err(format!("unknown selector `{s}` (full|height|area)")),
    }
}

fn parse_weight_mode(s: &str) -> Result<WeightMode, String> {
    match s {
        "derived" => Ok(WeightMode::Derived),
        "paper" | "literal" => Ok(WeightMode::Literal),
        _ => Err(format!("unknown weight mode `{s}` (derived|paper)")),
    }
}

fn parse_height_advance(s: &str) -> Result<HeightAdvance, String> {
    match s {
        "derived" => Ok(HeightAdvance::Derived),
        "literal" | "printed" => Ok(HeightAdvance::Literal),
        _ => Err(format!("unknown advance reading `{s}` (derived|literal)")),
    }
}

fn parse_init(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad initial coefficient `{p}`"))
        })
        .collect()
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn run_sweep_command(args: SweepArgs) -> Result<(), (u8, String)> {
    let problem = match (&args.example, &args.rhs) {
        (Some(id), None) => ProblemSpec::Builtin(*id),
        (None, Some(rhs)) => {
            let init_text = args
                .init
                .as_deref()
                .ok_or((EXIT_CONFIG, "--rhs requires --init".to_string()))?;
            ProblemSpec::Custom {
                rhs_src: rhs.clone(),
                init: parse_init(init_text).map_err(|m| (EXIT_CONFIG, m))?,
            }
        }
        _ => {
            return Err((
                EXIT_CONFIG,
                "exactly one of --example or --rhs is required".to_string(),
            ))
        }
    };
    let hs = bench::parse_h_list(&args.h).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let delta = args
        .delta
        .as_deref()
        .map(DeltaSpec::parse)
        .transpose()
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;

    let mut config = BenchConfig::new(problem, args.alpha, args.lambda, args.horizon);
    config.scheme = args.scheme;
    config.selector_kind = args.selector;
    config.delta = delta;
    config.weight_mode = args.weight_mode;
    config.height_advance = args.height_advance;
    config.hs = hs;
    config.dump_nodes = args.dump_nodes.clone();

    let rows = bench::run_sweep(&config).map_err(classify_bench_error)?;

    println!("{:>12} {:>13} {:>7} {:>9} {:>14} {:>12}", "h", "e_max", "order", "M", "distinct_evals", "cpu_seconds");
    for r in &rows {
        println!(
            "{:>12.6e} {:>13} {:>7} {:>9} {:>14} {:>12.4e}",
            r.h,
            r.e_max.map_or(String::from("-"), |e| format!("{e:.3e}")),
            r.order.map_or(String::from("-"), |o| format!("{o:.2}")),
            r.m,
            r.distinct_evals,
            r.cpu_seconds,
        );
    }

    let mut out = std::io::BufWriter::new(
        std::fs::File::create(&args.out)
            .map_err(|e| (1, format!("cannot create {}: {e}", args.out.display())))?,
    );
    bench::write_csv(&mut out, &rows).map_err(|e| (1, format!("cannot write CSV: {e}")))?;
    eprintln!("wrote {} row(s) to {}", rows.len(), args.out.display());
    Ok(())
}

fn classify_bench_error(e: BenchError) -> (u8, String) {
    let code = match &e {
        BenchError::Solve { source, .. } => match source {
            SolveError::Diverged { .. } | SolveError::Rhs { .. } => EXIT_SOLVER,
            _ => EXIT_CONFIG,
        },
        BenchError::Io(_) => 1,
        _ => EXIT_CONFIG,
    };
    (code, e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep(args) => match run_sweep_command(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err((code, message)) => {
                eprintln!("error: {message}");
                ExitCode::from(code)
            }
        },
    }
}
