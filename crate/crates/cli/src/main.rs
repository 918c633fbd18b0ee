//! `cuntz`: command-line access to Blaschke-product transfer operators, Cuntz families and
//! their verification suite.
//!
//! Exit status: 0 on success, 1 for usage errors (bad flags, unreadable or malformed input),
//! 2 for errors raised by the numerical layer, and for `verify` the number of failed
//! relations clipped at 250.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cuntz_core::blaschke::{BlaschkeSpec, DEFAULT_TABLE_SIZE};
use cuntz_core::boundary::{outer_symbol, DEFAULT_GRID};
use cuntz_core::model_space::canonical_basis;
use cuntz_core::operators::{cuntz_family_matrices, gamma_b_matrix, master_isometry_matrix, mult_operator, transfer_matrix};
use cuntz_core::rochberg::decompose;
use cuntz_core::transfer::transfer_apply;
use cuntz_core::verify::{reports_json, verify_all};
use cuntz_core::{BlaschkeProduct, BranchSystem, CircleGrid, FourierSeries, ModuleVector, TruncatedOperator, VerifyConfig};
use num_complex::Complex64;
use serde_json::json;

/// Largest exit status used to report verification failures.
const MAX_FAILURE_STATUS: usize = 250;

#[derive(Debug, Parser)]
#[command(name = "cuntz", version, about = "Transfer operators, outer symbols and Cuntz families of finite Blaschke products")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Grid size K (a power of two).
    #[arg(long, global = true, default_value_t = DEFAULT_GRID)]
    grid: usize,

    /// Mode window M of series and truncated matrices.
    #[arg(long, global = true, default_value_t = 32)]
    modes: usize,

    /// Fraction of the mode window certified by `verify`.
    #[arg(long, global = true, default_value_t = 0.5)]
    interior: f64,

    /// Override every verification tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Seed for randomised test inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Degree, zeros, b(0), b(1), arc endpoints and the range of J₀.
    Describe { blaschke: PathBuf },
    /// Preimages of e^{iφ} under b.
    Preimages {
        blaschke: PathBuf,
        #[arg(allow_negative_numbers = true)]
        angle: f64,
    },
    /// Transfer operator applied to a Fourier series.
    Transfer { blaschke: PathBuf, series: PathBuf },
    /// Outer function with modulus J₀^p on the circle.
    Outer {
        blaschke: PathBuf,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        power: f64,
    },
    /// Canonical orthonormal basis of the model space.
    Basis { blaschke: PathBuf },
    /// Truncated matrix: gamma, cb, cuntz, transfer or mult:<series.json>.
    Matrix { blaschke: PathBuf, which: String },
    /// Rochberg coefficients of an analytic series in the canonical basis.
    Decompose { blaschke: PathBuf, series: PathBuf },
    /// Runs every relation of the verification suite.
    Verify { blaschke: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Math(cuntz_core::Error),
}

impl From<cuntz_core::Error> for CliError {
    fn from(e: cuntz_core::Error) -> Self {
        match e {
            cuntz_core::Error::Json(_) | cuntz_core::Error::Io(_) => CliError::Usage(e.to_string()),
            other => CliError::Math(other),
        }
    }
}

impl CliError {
    fn status(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Math(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// What a command produced: text to emit and the exit status.
struct Output {
    text: String,
    status: u8,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, status: 0 }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli).and_then(|out| emit(&cli, &out.text).map(|_| out.status)) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status())
        }
    }
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_blaschke(path: &Path) -> CliResult<BlaschkeProduct> {
    let spec: BlaschkeSpec = serde_json::from_str(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(BlaschkeProduct::new(spec.zeros)?)
}

fn load_series(path: &Path) -> CliResult<FourierSeries> {
    FourierSeries::from_json(&read(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn branches(b: &BlaschkeProduct) -> CliResult<BranchSystem> {
    Ok(b.branches(DEFAULT_TABLE_SIZE.max(64 * b.degree()))?)
}

fn config(cli: &Cli) -> CliResult<VerifyConfig> {
    let mut cfg =
        VerifyConfig { grid: cli.grid, modes: cli.modes, interior_fraction: cli.interior, seed: cli.seed, ..VerifyConfig::default() };
    if let Some(tol) = cli.tol {
        cfg = cfg.with_tolerance(tol);
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn inputs(command: &Command) -> Vec<&Path> {
    match command {
        Command::Describe { blaschke }
        | Command::Preimages { blaschke, .. }
        | Command::Outer { blaschke, .. }
        | Command::Basis { blaschke }
        | Command::Verify { blaschke } => vec![blaschke],
        Command::Transfer { blaschke, series } | Command::Decompose { blaschke, series } => vec![blaschke, series],
        Command::Matrix { blaschke, which } => {
            let mut v = vec![blaschke.as_path()];
            if let Some(p) = which.strip_prefix("mult:") {
                v.push(Path::new(p));
            }
            v
        }
    }
}

/// Refuses an `--out` path that names one of the inputs.
fn guard_inputs(cli: &Cli) -> CliResult<()> {
    let Some(out) = &cli.out else { return Ok(()) };
    let Ok(out) = out.canonicalize() else { return Ok(()) };
    for input in inputs(&cli.command) {
        if input.canonicalize().map(|p| p == out).unwrap_or(false) {
            return Err(CliError::Usage(format!("--out would overwrite input {}", input.display())));
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<Output> {
    let cfg = config(cli)?;
    guard_inputs(cli)?;
    let grid = CircleGrid::new(cfg.grid)?;
    match &cli.command {
        Command::Describe { blaschke } => describe(cli, &load_blaschke(blaschke)?),
        Command::Preimages { blaschke, angle } => preimages(cli, &load_blaschke(blaschke)?, *angle),
        Command::Transfer { blaschke, series } => {
            let bs = branches(&load_blaschke(blaschke)?)?;
            let xi = ModuleVector::from_series(load_series(series)?, "input");
            let out = transfer_apply(&bs, &xi, grid);
            match cli.format {
                Format::Json => Ok(Output::ok(out.values.fourier_coeffs(cfg.modes)?.to_json() + "\n")),
                Format::Csv => Ok(Output::ok(out.values.to_csv())),
            }
        }
        Command::Outer { blaschke, power } => {
            let outer = outer_symbol(&load_blaschke(blaschke)?, grid, *power)?;
            match cli.format {
                Format::Json => {
                    let value = json!({
                        "power": power,
                        "value_at_zero": outer.value_at_zero(),
                        "tail_bound": outer.tail_bound(),
                        "series": outer.series(cfg.modes)?,
                    });
                    Ok(Output::ok(pretty(&value)))
                }
                Format::Csv => Ok(Output::ok(outer.boundary().to_csv())),
            }
        }
        Command::Basis { blaschke } => {
            let b = load_blaschke(blaschke)?;
            let basis = canonical_basis(&b);
            let series = basis.to_series(grid, cfg.modes)?;
            match cli.format {
                Format::Json => {
                    let value = json!({
                        "kind": basis.kind(),
                        "check": basis.check(grid, cfg.modes)?,
                        "elements": series,
                    });
                    Ok(Output::ok(pretty(&value)))
                }
                Format::Csv => {
                    let mut text = String::from("element,n,re,im\n");
                    for (i, s) in series.iter().enumerate() {
                        for n in s.min_n()..=s.max_n() {
                            let c = s.coeff(n);
                            text.push_str(&format!("{},{n},{:e},{:e}\n", i + 1, c.re, c.im));
                        }
                    }
                    Ok(Output::ok(text))
                }
            }
        }
        Command::Matrix { blaschke, which } => matrix(cli, &cfg, &load_blaschke(blaschke)?, which),
        Command::Decompose { blaschke, series } => {
            let b = load_blaschke(blaschke)?;
            let d = decompose(&branches(&b)?, &canonical_basis(&b), &load_series(series)?, grid)?;
            match cli.format {
                Format::Json => Ok(Output::ok(d.to_json() + "\n")),
                Format::Csv => {
                    let mut text = String::from("coefficient,n,re,im\n");
                    for (i, s) in d.coefficients.iter().enumerate() {
                        for n in s.min_n()..=s.max_n() {
                            let c = s.coeff(n);
                            text.push_str(&format!("{},{n},{:e},{:e}\n", i + 1, c.re, c.im));
                        }
                    }
                    Ok(Output::ok(text))
                }
            }
        }
        Command::Verify { blaschke } => {
            let reports = verify_all(&load_blaschke(blaschke)?, &cfg)?;
            let failures = reports.iter().filter(|r| !r.pass).count();
            let text = match cli.format {
                Format::Json => reports_json(&reports) + "\n",
                Format::Csv => {
                    let mut text = String::from("relation,residual,tolerance,pass\n");
                    for r in &reports {
                        text.push_str(&format!("{},{:e},{:e},{}\n", r.relation.name(), r.residual, r.tolerance, r.pass));
                    }
                    text
                }
            };
            Ok(Output { text, status: failures.min(MAX_FAILURE_STATUS) as u8 })
        }
    }
}

fn pretty(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("values are finite") + "\n"
}

fn describe(cli: &Cli, b: &BlaschkeProduct) -> CliResult<Output> {
    let bs = branches(b)?;
    let b0 = b.eval(Complex64::new(0.0, 0.0))?;
    let b1 = b.eval_angle(0.0);
    let (j_min, j_max) = b.j0_bounds();
    match cli.format {
        Format::Json => {
            let value = json!({
                "degree": b.degree(),
                "zeros": b.zeros(),
                "b0": b0,
                "b1": b1,
                "theta0": bs.theta0(),
                "endpoints": bs.endpoints(),
                "j0_min": j_min,
                "j0_max": j_max,
            });
            Ok(Output::ok(pretty(&value)))
        }
        Format::Csv => {
            let mut text = String::from("key,value\n");
            text.push_str(&format!("degree,{}\n", b.degree()));
            for (name, z) in [("b0", b0), ("b1", b1)] {
                text.push_str(&format!("{name}_re,{:e}\n{name}_im,{:e}\n", z.re, z.im));
            }
            text.push_str(&format!("theta0,{:e}\n", bs.theta0()));
            for (i, t) in bs.endpoints().iter().enumerate() {
                text.push_str(&format!("endpoint_{i},{t:e}\n"));
            }
            text.push_str(&format!("j0_min,{j_min:e}\nj0_max,{j_max:e}\n"));
            Ok(Output::ok(text))
        }
    }
}

fn preimages(cli: &Cli, b: &BlaschkeProduct, angle: f64) -> CliResult<Output> {
    if !angle.is_finite() {
        return Err(CliError::Usage(format!("angle must be finite, got {angle}")));
    }
    let bs = branches(b)?;
    let points = bs.preimages(Complex64::from_polar(1.0, angle))?;
    let mut angles: Vec<f64> = points.iter().map(|z| z.arg().rem_euclid(TAU)).collect();
    angles.sort_by(f64::total_cmp);
    match cli.format {
        Format::Json => Ok(Output::ok(pretty(&json!({ "angle": angle, "preimages": angles })))),
        Format::Csv => {
            let mut text = String::from("index,angle\n");
            for (i, t) in angles.iter().enumerate() {
                text.push_str(&format!("{i},{t:e}\n"));
            }
            Ok(Output::ok(text))
        }
    }
}

fn matrix(cli: &Cli, cfg: &VerifyConfig, b: &BlaschkeProduct, which: &str) -> CliResult<Output> {
    let grid = CircleGrid::new(cfg.grid)?;
    let m = cfg.modes;
    let ops: Vec<TruncatedOperator> = match which {
        "gamma" => vec![gamma_b_matrix(&branches(b)?, m, grid)?],
        "cb" => vec![master_isometry_matrix(&branches(b)?, m, grid)?],
        "cuntz" => cuntz_family_matrices(&canonical_basis(b), m, grid)?,
        "transfer" => vec![transfer_matrix(&branches(b)?, m, grid)?],
        other => match other.strip_prefix("mult:") {
            Some(path) => vec![mult_operator(&load_series(Path::new(path))?, m)?],
            None => {
                return Err(CliError::Usage(format!("unknown matrix `{other}`; expected gamma, cb, cuntz, transfer or mult:<series.json>")))
            }
        },
    };
    let family = which == "cuntz";
    let text = match (cli.format, ops.as_slice()) {
        (Format::Json, [single]) if !family => single.to_json() + "\n",
        (Format::Json, many) => {
            let parts: Vec<String> = many.iter().map(TruncatedOperator::to_json).collect();
            format!("[{}]\n", parts.join(","))
        }
        (Format::Csv, [single]) if !family => single.to_csv(),
        (Format::Csv, many) => {
            let mut text = String::from("operator,row,col,re,im\n");
            for (i, op) in many.iter().enumerate() {
                for line in op.to_csv().lines().skip(1) {
                    text.push_str(&format!("{},{line}\n", i + 1));
                }
            }
            text
        }
    };
    Ok(Output::ok(text))
}
