use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvdenoise::cv::{default_max_exponent, CvResult};
use cvdenoise::dcart::cvdcart;
use cvdenoise::io;
use cvdenoise::lasso::{cvlasso, DesignMatrix, LassoConfig};
use cvdenoise::linalg::Matrix;
use cvdenoise::simbench::{monte_carlo_mse, replications_csv, summary_csv, MethodSpec, Scenario, Suite};
use cvdenoise::svt::cvsvt;
use cvdenoise::tfilter::{cvtf, TfConfig};
use cvdenoise::{Error, LambdaGrid, LatticeShape, LatticeSignal};

/// Cross-validated denoising on lattices.
#[derive(Parser, Debug)]
#[command(name = "cvdenoise", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one dataset with a cross-validated penalty.
    Denoise(DenoiseArgs),
    /// Monte Carlo MSE for one simulation scenario.
    Simulate(SimulateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Dcart,
    Tf,
    Lasso,
    Svt,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Observations: a single column (1-D) or a square matrix (2-D).
    #[arg(long)]
    input: PathBuf,
    /// Fitted values; run metadata goes to the same path with a `.meta` extension.
    #[arg(long)]
    output: PathBuf,
    /// Lasso design matrix, one row per observation.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Trend filtering order.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Largest grid exponent; defaults to ceil(log2 N).
    #[arg(long)]
    grid_max: Option<u32>,
    /// Smallest grid exponent; defaults to -grid_max for tf and 0 otherwise.
    #[arg(long, allow_negative_numbers = true)]
    grid_min: Option<i32>,
    #[arg(long, env = "CVDENOISE_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    suite: String,
    #[arg(long)]
    scenario: usize,
    /// Side length of the lattice.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, env = "CVDENOISE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long)]
    grid_max: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    grid_min: Option<i32>,
    /// Summary CSV (one row).
    #[arg(long)]
    out: PathBuf,
    /// Optional per-replication CSV.
    #[arg(long)]
    per_rep: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Exit status: 2 for bad input, 3 when the numerics fail.
fn status(err: &Error) -> u8 {
    if err.is_usage() || matches!(err.root(), Error::Io(_)) {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Denoise(args) => denoise(&args),
        Command::Simulate(args) => simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("cvdenoise: {err}");
            ExitCode::from(status(&err))
        }
    }
}

fn read(path: &Path) -> cvdenoise::Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn grid(total: usize, max: Option<u32>, min: Option<i32>, tf: bool) -> cvdenoise::Result<LambdaGrid> {
    let hi = match max {
        Some(e) => e,
        None => default_max_exponent(total)?,
    } as i32;
    let lo = min.unwrap_or(if tf { -hi } else { 0 });
    LambdaGrid::powers_of_two_between(lo, hi)
}

fn join<T: Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Single column -> 1-D, square -> 2-D.
fn lattice_signal(rows: Vec<Vec<f64>>) -> cvdenoise::Result<LatticeSignal> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 1 {
        return LatticeSignal::from_vec(rows.into_iter().map(|r| r[0]).collect());
    }
    let m = Matrix::from_rows(&rows)?;
    if !m.is_square() {
        return Err(Error::Parse(format!(
            "expected a single column or a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    LatticeSignal::new(LatticeShape::square(m.rows())?, m.into_data())
}

fn format_signal(s: &LatticeSignal) -> cvdenoise::Result<String> {
    Ok(if s.shape().dim() == 2 {
        let side = s.shape().side();
        io::format_matrix(&Matrix::new(side, side, s.values().to_vec())?)
    } else {
        io::format_vector(s.values())
    })
}

fn denoise(args: &DenoiseArgs) -> cvdenoise::Result<()> {
    if args.method != MethodArg::Lasso && args.design.is_some() {
        return Err(Error::invalid("--design only applies to --method lasso"));
    }
    let text = read(&args.input)?;
    let mut meta: Vec<(&str, String)> = vec![
        ("method", format!("{:?}", args.method).to_lowercase()),
        ("input", args.input.display().to_string()),
        ("seed", args.seed.to_string()),
    ];
    let mut coefficients = None;
    let (result, fit_text): (CvResult, String) = match args.method {
        MethodArg::Dcart => {
            let y = lattice_signal(io::parse_rows(&text)?)?;
            let g = grid(y.len(), args.grid_max, args.grid_min, false)?;
            let r = cvdcart(&y, &g, args.seed)?;
            let out = format_signal(&r.fit)?;
            (r, out)
        }
        MethodArg::Tf => {
            let y = LatticeSignal::from_vec(io::parse_vector(&text)?)?;
            let g = grid(y.len(), args.grid_max, args.grid_min, true)?;
            meta.push(("order", args.order.to_string()));
            let r = cvtf(&y, &g, &TfConfig::new(args.order))?;
            let out = io::format_vector(r.fit.values());
            (r, out)
        }
        MethodArg::Lasso => {
            let design_path = args
                .design
                .as_ref()
                .ok_or_else(|| Error::invalid("--method lasso needs --design"))?;
            let x = DesignMatrix::new(io::parse_matrix(&read(design_path)?)?);
            let y = io::parse_vector(&text)?;
            let g = grid(y.len(), args.grid_max, args.grid_min, false)?;
            meta.push(("design", design_path.display().to_string()));
            let (fit, r) = cvlasso(&x, &y, &g, args.seed, &LassoConfig::default())?;
            coefficients = Some(io::format_coefficients(&fit.beta));
            (r, io::format_vector(&fit.fitted))
        }
        MethodArg::Svt => {
            let y = io::parse_matrix(&text)?;
            let g = grid(y.rows() * y.cols(), args.grid_max, args.grid_min, false)?;
            let r = cvsvt(&y, &g, args.seed)?;
            let out = format_signal(&r.fit)?;
            (r, out)
        }
    };
    meta.extend([
        ("folds", result.folds.k().to_string()),
        ("grid", join(result.grid.values())),
        ("fold_lambdas", join(&result.fold_lambdas)),
        ("lambda", result.lambda.to_string()),
    ]);

    io::write(&args.output, &fit_text)?;
    io::write(&args.output.with_extension("meta"), &io::format_meta(&meta))?;
    if let Some(c) = coefficients {
        io::write(&args.output.with_extension("coef.csv"), &c)?;
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> cvdenoise::Result<()> {
    let suite: Suite = args.suite.parse()?;
    let scenario = Scenario::new(suite, args.scenario, args.n)?;
    let mut spec = MethodSpec::default_for(&scenario, args.order);
    spec.grid_max_exponent = args.grid_max;
    spec.grid_min_exponent = args.grid_min;
    let run = || monte_carlo_mse(&spec, &scenario, args.sigma, args.reps, args.seed);
    let result = match args.jobs {
        Some(0) => return Err(Error::invalid("--jobs must be at least 1")),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let results = [result];
    io::write(&args.out, &summary_csv(&results))?;
    if let Some(path) = &args.per_rep {
        io::write(path, &replications_csv(&results))?;
    }
    Ok(())
}
