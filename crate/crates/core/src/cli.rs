//! The `stochfrac` command line.
//!
//! Exit codes: 0 on success, 1 on a validation or I/O error, 2 when an
//! identity check or extremal check fails. The resolved configuration is
//! echoed to standard error; results go to standard output and CSV files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::ensemble::{generate, Drift, Ensemble, ProcessKind, ProcessSpec};
use crate::error::{Error, Result};
use crate::fracnum::{self, Backend, FracOrder, Side};
use crate::grid::{write_columns, Grid, GriddedFn};
use crate::properties::{self, SuiteConfig, DEFAULT_SUITE};
use crate::stochfrac::{self, StochOpKind};
use crate::variational::{self, DescentOptions, Extremal, SolveMethod, VariationalProblem};

/// Caps internal parallelism; `0` or unset means one thread per core.
pub const THREADS_ENV: &str = "STOCHFRAC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "stochfrac", version, about = "Fractional operators on the mean of stochastic processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an ensemble of sample paths and save it as CSV.
    Gen(GenArgs),
    /// Apply a deterministic fractional operator to a `t,value` CSV.
    Frac(FracArgs),
    /// Apply a stochastic operator (d1..d6) to an ensemble CSV.
    Stochfrac(StochArgs),
    /// Run the identity verification suite.
    Verify(VerifyArgs),
    /// Solve a fractional variational problem for the mean.
    Solve(SolveArgs),
    /// Solve the symmetric quadratic example and check its extremal.
    ReproduceExample2(ReproArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcessArg {
    Ou,
    Wiener,
    Gbm,
    Deterministic,
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub process: ProcessArg,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    /// Mean path for `deterministic`: zero, one, t, t2, sqrt, one_minus_t,
    /// sin, const:C, pow:B, linear:M:C, sin:W, exp:K.
    #[arg(long, default_value = "zero")]
    pub drift: String,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1001)]
    pub nodes: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpArg {
    RlDeriv,
    RlInt,
    Caputo,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Left => Side::Left,
            SideArg::Right => Side::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Gl,
    L1,
    Series,
}

impl BackendArg {
    fn resolve(self, terms: usize) -> Backend {
        match self {
            BackendArg::Gl => Backend::GrunwaldLetnikov,
            BackendArg::L1 => Backend::L1Quadrature,
            BackendArg::Series => Backend::TruncatedSeries(terms),
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct FracArgs {
    #[arg(long, value_enum)]
    pub op: OpArg,
    #[arg(long, value_enum, default_value_t = SideArg::Left)]
    pub side: SideArg,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = BackendArg::Gl)]
    pub backend: BackendArg,
    /// Highest series term for the truncated-series derivative.
    #[arg(long = "N", default_value_t = 1)]
    pub terms: usize,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct StochArgs {
    /// d1..d6: left/right RL derivative, left/right RL integral,
    /// left/right Caputo derivative.
    #[arg(long)]
    pub kind: StochOpKind,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = BackendArg::Gl)]
    pub backend: BackendArg,
    #[arg(long = "N", default_value_t = 1)]
    pub terms: usize,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    /// Suite file, or `default` for the built-in suite.
    #[arg(long, default_value = "default")]
    pub config: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["problem", "config"]))]
pub struct SolveArgs {
    /// Named preset; only `example2` exists.
    #[arg(long)]
    pub problem: Option<String>,
    /// Problem file with a single `[problem NAME]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Node count for the preset.
    #[arg(long, default_value_t = variational::EXAMPLE2_NODES, conflicts_with = "config")]
    pub nodes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ReproArgs {
    #[arg(long, default_value_t = variational::EXAMPLE2_NODES)]
    pub nodes: usize,
    #[arg(long, default_value_t = variational::EXAMPLE2_ALPHA, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = variational::EXAMPLE2_A, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = variational::EXAMPLE2_B, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = variational::EXAMPLE2_BOUNDARY, allow_negative_numbers = true)]
    pub xa: f64,
    #[arg(long, default_value_t = variational::EXAMPLE2_BOUNDARY, allow_negative_numbers = true)]
    pub xb: f64,
    /// Curve CSV; printed to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a subcommand that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    ChecksFailed,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::ChecksFailed) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::param(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(format!("cannot start thread pool: {e}")))
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Frac(a) => frac(a),
        Command::Stochfrac(a) => stoch(a),
        Command::Verify(a) => verify(a),
        Command::Solve(a) => solve(a),
        Command::ReproduceExample2(a) => reproduce(a),
    }
}

fn describe_grid(g: &Grid) -> String {
    format!("[{}, {}] with {} nodes (h = {})", g.a(), g.b(), g.n_nodes(), g.h())
}

fn gen(a: &GenArgs) -> Result<Outcome> {
    let grid = Grid::new(a.a, a.b, a.nodes)?;
    let kind = match a.process {
        ProcessArg::Ou => ProcessKind::OrnsteinUhlenbeck {
            theta: a.theta,
            mu: a.mu,
            sigma: a.sigma,
            x0: a.x0,
        },
        ProcessArg::Wiener => ProcessKind::Wiener { x0: a.x0, sigma: a.sigma },
        ProcessArg::Gbm => ProcessKind::GeometricBrownian {
            mu: a.mu,
            sigma: a.sigma,
            x0: a.x0,
        },
        ProcessArg::Deterministic => ProcessKind::DeterministicPlusNoise {
            drift: a.drift.parse::<Drift>()?,
            sigma: a.sigma,
        },
    };
    let spec = ProcessSpec::new(kind, a.paths);
    eprintln!("process: {kind:?}");
    eprintln!("paths: {}, seed: {}, grid: {}", a.paths, a.seed, describe_grid(&grid));
    let e = generate(&spec, &grid, a.seed)?;
    e.save_csv(&a.out)?;
    println!("wrote {} paths to {}", e.n_paths(), a.out.display());
    Ok(Outcome::Success)
}

fn frac(a: &FracArgs) -> Result<Outcome> {
    let order = FracOrder::new(a.alpha)?;
    let f = GriddedFn::read_csv(&a.input)?;
    let side = Side::from(a.side);
    let backend = a.backend.resolve(a.terms);
    eprintln!(
        "op: {:?}, side: {}, alpha: {}, backend: {backend}, grid: {}",
        a.op,
        side.label(),
        a.alpha,
        describe_grid(f.grid())
    );
    let out = match a.op {
        OpArg::RlInt => fracnum::rl_integral(&f, order, side),
        OpArg::RlDeriv => fracnum::rl_deriv(&f, order, side, backend)?,
        OpArg::Caputo => fracnum::caputo_deriv(&f, order, side)?,
        OpArg::Series => fracnum::series_deriv(&f, a.alpha, side, a.terms)?.values,
    };
    out.write_csv(&a.out)?;
    println!("wrote {} values to {}", out.grid().n_nodes(), a.out.display());
    Ok(Outcome::Success)
}

fn stoch(a: &StochArgs) -> Result<Outcome> {
    let order = FracOrder::new(a.alpha)?;
    let e = Ensemble::load_csv(&a.input)?;
    let r = stochfrac::apply(&e, a.kind, order, a.backend.resolve(a.terms))?;
    eprintln!(
        "kind: {}, alpha: {}, backend: {}, paths: {}, grid: {}",
        a.kind,
        a.alpha,
        r.backend,
        e.n_paths(),
        describe_grid(e.grid())
    );
    write_columns(
        &a.out,
        e.grid(),
        &["value", "stderr"],
        &[r.value.values(), r.standard_error.values()],
    )?;
    println!("wrote {} to {}", a.kind, a.out.display());
    Ok(Outcome::Success)
}

fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let config = if a.config == "default" {
        Config::parse(DEFAULT_SUITE)?
    } else {
        Config::from_file(&a.config)?
    };
    let suite = SuiteConfig::from_config(&config)?;
    eprintln!("suite ({}):\n{config}", a.config);
    let reports = properties::run_suite(&suite)?;
    print!("{}", properties::format_table(&reports));
    if let Some(out) = &a.out {
        properties::write_report_csv(out, &reports)?;
        println!("report written to {}", out.display());
    }
    Ok(if properties::all_passed(&reports) {
        Outcome::Success
    } else {
        Outcome::ChecksFailed
    })
}

fn print_extremal(e: &Extremal) {
    let n = e.mean.grid().n_nodes();
    println!("boundary values      {} {}", e.mean.value(0), e.mean.value(n - 1));
    println!("J                    {:.12e}", e.j_value);
    println!("EL residual norm     {:.6e}", e.el_residual_norm);
    println!("relative gradient    {:.6e}", e.relative_gradient());
    println!("iterations           {}", e.iterations);
}

fn write_extremal(path: &Path, e: &Extremal) -> Result<()> {
    write_columns(
        path,
        e.mean.grid(),
        &["mean", "el_residual"],
        &[e.mean.values(), e.el_residual.values()],
    )
}

fn solve(a: &SolveArgs) -> Result<Outcome> {
    let (p, method) = match (&a.problem, &a.config) {
        (Some(name), None) if name == "example2" => (VariationalProblem::example2(a.nodes)?, SolveMethod::Direct),
        (Some(name), None) => return Err(Error::param(format!("unknown problem preset `{name}`, expected example2"))),
        (None, Some(path)) => variational::problem_from_config(&Config::from_file(path)?)?,
        _ => return Err(Error::param("give exactly one of --problem and --config")),
    };
    eprintln!(
        "lagrangian: {:?}, flavor: {:?}, alpha: {}, boundary: ({}, {}), method: {method:?}, grid: {}",
        p.lagrangian.kind,
        p.lagrangian.flavor,
        p.alpha.alpha(),
        p.xa,
        p.xb,
        describe_grid(&p.grid)
    );
    let e = variational::solve(&p, method)?;
    print_extremal(&e);
    if let Some(out) = &a.out {
        write_extremal(out, &e)?;
        println!("extremal written to {}", out.display());
    }
    Ok(Outcome::Success)
}

/// Thresholds for the extremal checks of `reproduce-example2`.
pub const SYMMETRY_TOL: f64 = 1e-8;
pub const GRADIENT_TOL: f64 = 1e-8;
pub const DESCENT_TOL: f64 = 1e-4;

/// The checks printed by `reproduce-example2`.
#[derive(Debug, Clone)]
pub struct Example2Report {
    pub extremal: Extremal,
    pub boundary_exact: bool,
    pub asymmetry: f64,
    pub relative_gradient: f64,
    pub j_linear: f64,
    pub descent_gap: f64,
    pub descent_iterations: usize,
    /// Same problem with truncated-series (N = 1) derivative matrices.
    pub series_mean: GriddedFn,
    pub composed_order_residual: GriddedFn,
}

impl Example2Report {
    pub fn checks(&self) -> [(&'static str, bool); 5] {
        [
            ("boundary values exact", self.boundary_exact),
            ("mirror symmetry", self.asymmetry <= SYMMETRY_TOL),
            ("discrete stationarity", self.relative_gradient <= GRADIENT_TOL),
            ("J not above linear interpolant", self.extremal.j_value <= self.j_linear),
            ("descent agreement", self.descent_gap <= DESCENT_TOL),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.1)
    }
}

pub fn example2_report(p: &VariationalProblem) -> Result<Example2Report> {
    let extremal = variational::solve_quadratic(p)?;
    let n = p.grid.n_nodes();
    let linear = p.linear_interpolant();
    let descent = variational::solve_descent(p, &linear, DescentOptions::default())?;
    let series = variational::solve_quadratic_with(p, Backend::TruncatedSeries(1))?;
    Ok(Example2Report {
        boundary_exact: extremal.mean.value(0) == p.xa && extremal.mean.value(n - 1) == p.xb,
        asymmetry: extremal.asymmetry(),
        relative_gradient: extremal.relative_gradient(),
        j_linear: variational::evaluate_j(p, &linear)?,
        descent_gap: descent.mean.lincomb(1.0, &extremal.mean, -1.0)?.sup_norm(),
        descent_iterations: descent.iterations,
        series_mean: series.mean,
        composed_order_residual: variational::composed_order_residual(p, &extremal.mean)?,
        extremal,
    })
}

fn reproduce(a: &ReproArgs) -> Result<Outcome> {
    let grid = Grid::new(a.a, a.b, a.nodes)?;
    let p = VariationalProblem::new(
        variational::Lagrangian::quadratic_bilinear(1.0),
        grid,
        a.alpha,
        a.xa,
        a.xb,
    )?;
    eprintln!(
        "alpha: {}, boundary: ({}, {}), backend: gl, grid: {}",
        a.alpha,
        a.xa,
        a.xb,
        describe_grid(&grid)
    );
    let r = example2_report(&p)?;
    let e = &r.extremal;
    let cols: [&[f64]; 4] = [
        e.mean.values(),
        e.el_residual.values(),
        r.composed_order_residual.values(),
        r.series_mean.values(),
    ];
    let names = ["mean", "el_residual", "composed_order_residual", "series_n1_mean"];
    match &a.out {
        Some(out) => write_columns(out, &grid, &names, &cols)?,
        None => {
            println!("t,{}", names.join(","));
            for i in 0..grid.n_nodes() {
                let row: Vec<String> = cols.iter().map(|c| c[i].to_string()).collect();
                println!("{},{}", grid.node(i), row.join(","));
            }
        }
    }
    print_extremal(e);
    println!("J(linear interpolant) {:.12e}", r.j_linear);
    println!("asymmetry            {:.3e}", r.asymmetry);
    println!("descent gap          {:.3e} after {} steps", r.descent_gap, r.descent_iterations);
    println!(
        "composed-order residual norm {:.6e}",
        variational::residual_norm(&r.composed_order_residual)
    );
    for (name, ok) in r.checks() {
        println!("{:<32} {}", name, if ok { "pass" } else { "FAIL" });
    }
    if let Some(out) = &a.out {
        println!("curve written to {}", out.display());
    }
    Ok(if r.passed() { Outcome::Success } else { Outcome::ChecksFailed })
}
