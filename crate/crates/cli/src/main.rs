//! Batch CLI for the simplex Neumann mass library.
//!
//! Exit codes: 0 success, 1 domain errors (inconsistent data, degenerate
//! simplex, epsilon out of range, ...), 2 I/O or usage errors. Domain errors
//! print one machine-readable JSON line on stderr.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simplex_neumann::error::Error as DomainError;
use simplex_neumann::geometry::{EllipticCoefficients, Simplex, SimplexJson};
use simplex_neumann::inverse;
use simplex_neumann::verify::{self, FemTarget, NeumannReport};

#[derive(Parser)]
#[command(
    name = "simplex-neumann",
    about = "Verify Neumann-mass equidistribution on simplices and solve the associated inverse problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path (defaults to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Stamp reports with the current UNIX time (off by default so repeated
    /// runs are byte-identical).
    #[arg(long)]
    timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Predicted per-face Neumann masses of a simplex.
    Predict {
        /// Simplex JSON file: {"dimension": n, "vertices": [[...], ...]}.
        #[arg(long)]
        simplex: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare the exact alcove-mode masses against the prediction.
    VerifyExact {
        /// Domain dimension (2 or 3).
        #[arg(long)]
        dim: usize,
        /// Strictly decreasing wavenumbers, e.g. 3,2,1.
        #[arg(long, value_delimiter = ',')]
        wavenumbers: Vec<u32>,
        /// Quadrature points per direction (default: 4 k_max + 10).
        #[arg(long)]
        quad_points: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the FEM pipeline over refinement levels and compare face masses.
    VerifyFem {
        /// Simplex JSON file (Laplacian on that simplex).
        #[arg(long, conflicts_with_all = ["gamma", "random_simplex"])]
        simplex: Option<PathBuf>,
        /// Coefficient matrix JSON (n x n rows, or flat row-major) on the
        /// standard simplex.
        #[arg(long, conflicts_with = "random_simplex")]
        gamma: Option<PathBuf>,
        /// Use a seeded random triangle with vertices in [0,1]^2.
        #[arg(long)]
        random_simplex: bool,
        /// Seed for --random-simplex.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Refinement levels, e.g. 3,4,5.
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        levels: Vec<usize>,
        /// Number of eigenmodes per level.
        #[arg(long, default_value_t = 1)]
        num_modes: usize,
        /// Write the finest-level mesh as JSON for visualization.
        #[arg(long)]
        dump_mesh: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recover a triangle from {"N": [Na, Nb, Nc]}.
    RecoverTriangle {
        /// Inline JSON or a path to a JSON file.
        #[arg(long)]
        data: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Recover the 2x2 coefficient matrix from {"J": [J1, J2, J0]}.
    RecoverGamma {
        /// Inline JSON or a path to a JSON file.
        #[arg(long)]
        data: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the 3D non-uniqueness family at epsilon.
    Counterexample {
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Domain(err)) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": err.tag(), "message": err.to_string()})
            );
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("{}", serde_json::json!({"error": "Usage", "message": msg}));
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Domain(DomainError),
    Usage(String),
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        CliError::Domain(e)
    }
}

type CliResult = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Predict { simplex, output } => {
            let s = load_simplex(&simplex)?;
            let masses = s.predicted_neumann_masses();
            let value = serde_json::json!({
                "simplex": SimplexJson::from(&s),
                "predicted": masses,
            });
            write_value(&output, value)
        }
        Command::VerifyExact {
            dim,
            wavenumbers,
            quad_points,
            output,
        } => {
            let report = verify::verify_exact(dim, &wavenumbers, quad_points)?;
            write_reports(&output, vec![report], None)
        }
        Command::VerifyFem {
            simplex,
            gamma,
            random_simplex,
            seed,
            levels,
            num_modes,
            dump_mesh,
            output,
        } => {
            let target = if let Some(path) = simplex {
                FemTarget::Laplace(load_simplex(&path)?)
            } else if let Some(path) = gamma {
                FemTarget::Coefficients(load_gamma(&path)?)
            } else if random_simplex {
                FemTarget::Laplace(random_triangle(seed)?)
            } else {
                return Err(usage(
                    "one of --simplex, --gamma or --random-simplex is required",
                ));
            };
            let run = verify::verify_fem(&target, &levels, num_modes)?;
            if let Some(path) = dump_mesh {
                let finest = levels.iter().copied().max().unwrap_or(0);
                let s = match &target {
                    FemTarget::Laplace(s) => s.clone(),
                    FemTarget::Coefficients(c) => Simplex::standard(c.dim())?,
                };
                let mesh = simplex_neumann::fem::refine(&s, finest)?;
                write_file(
                    &path,
                    &serde_json::to_string_pretty(&mesh.to_json()).unwrap(),
                )?;
            }
            write_reports(&output, run.reports, Some(&run.table))
        }
        Command::RecoverTriangle { data, output } => {
            let value = read_data_json(&data)?;
            let n = value
                .get("N")
                .and_then(|v| v.as_array())
                .ok_or_else(|| usage("expected {\"N\": [Na, Nb, Nc]}"))?;
            if n.len() != 3 {
                return Err(usage("expected exactly three masses in \"N\""));
            }
            let vals: Vec<f64> = n.iter().filter_map(|v| v.as_f64()).collect();
            if vals.len() != 3 {
                return Err(usage("masses must be numbers"));
            }
            let data = inverse::TriangleNeumannData::new(vals[0], vals[1], vals[2])?;
            let tri = inverse::recover_triangle(&data)?;
            let forward = tri.forward();
            let residuals = [
                (forward.n_a - data.n_a).abs() / data.n_a,
                (forward.n_b - data.n_b).abs() / data.n_b,
                (forward.n_c - data.n_c).abs() / data.n_c,
            ];
            let max_residual = residuals.iter().fold(0.0f64, |m, &x| m.max(x));
            let value = serde_json::json!({
                "input": {"N": [data.n_a, data.n_b, data.n_c]},
                "sides": tri.sides,
                "sides_sorted": tri.sorted_sides(),
                "area": tri.area,
                "consistency": {
                    "recomputed_masses": [forward.n_a, forward.n_b, forward.n_c],
                    "max_relative_residual": max_residual,
                },
            });
            write_value(&output, value)
        }
        Command::RecoverGamma { data, output } => {
            let value = read_data_json(&data)?;
            let j = value
                .get("J")
                .and_then(|v| v.as_array())
                .ok_or_else(|| usage("expected {\"J\": [J1, J2, J0]}"))?;
            if j.len() != 3 {
                return Err(usage("expected exactly three masses in \"J\""));
            }
            let vals: Vec<f64> = j.iter().filter_map(|v| v.as_f64()).collect();
            if vals.len() != 3 {
                return Err(usage("masses must be numbers"));
            }
            let data = inverse::StandardSimplexNeumannData::new(vec![vals[0], vals[1]], vals[2])?;
            let gamma = inverse::recover_gamma_2d(&data)?;
            let forward = inverse::gamma_forward(&gamma)?;
            let value = serde_json::json!({
                "input": {"J": vals},
                "gamma": matrix_rows(gamma.gamma()),
                "consistency": {
                    "recomputed_masses": forward.by_face(),
                },
            });
            write_value(&output, value)
        }
        Command::Counterexample { epsilon, output } => {
            let (b, gamma) = inverse::counterexample_3d(epsilon)?;
            let invariants = inverse::counterexample_invariants(&b);
            let masses = inverse::gamma_forward(&gamma)?;
            let identity = EllipticCoefficients::identity(3);
            let gamma_minus_i = gamma.gamma() - identity.gamma();
            let value = serde_json::json!({
                "epsilon": epsilon,
                "b": matrix_rows(&b),
                "gamma": matrix_rows(gamma.gamma()),
                "quadratic_forms": invariants,
                "neumann_masses_by_face": masses.by_face(),
                "gamma_minus_identity_max": gamma_minus_i.amax(),
            });
            write_value(&output, value)
        }
    }
}

fn matrix_rows(m: &simplex_neumann::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn load_simplex(path: &PathBuf) -> Result<Simplex, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let json: SimplexJson = serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid simplex JSON in {}: {e}", path.display())))?;
    Ok(Simplex::try_from(json)?)
}

fn load_gamma(path: &PathBuf) -> Result<EllipticCoefficients, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("invalid JSON in {}: {e}", path.display())))?;
    let arr = value
        .as_array()
        .ok_or_else(|| usage("gamma file must hold a JSON array"))?;
    let matrix = if arr.iter().all(|v| v.is_array()) {
        let rows: Vec<Vec<f64>> = arr
            .iter()
            .map(|row| {
                row.as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| usage("entries must be numbers")))
                    .collect::<Result<Vec<f64>, CliError>>()
            })
            .collect::<Result<_, _>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(usage("gamma must be square"));
        }
        simplex_neumann::nalgebra::DMatrix::from_row_slice(
            n,
            n,
            &rows.into_iter().flatten().collect::<Vec<f64>>(),
        )
    } else {
        let flat: Vec<f64> = arr
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| usage("entries must be numbers")))
            .collect::<Result<_, _>>()?;
        let n = (flat.len() as f64).sqrt().round() as usize;
        if n * n != flat.len() {
            return Err(usage("flat gamma array length must be a perfect square"));
        }
        simplex_neumann::nalgebra::DMatrix::from_row_slice(n, n, &flat)
    };
    Ok(EllipticCoefficients::new(matrix)?)
}

/// Deterministic random triangle with vertices in [0,1]^2 (splitmix-style
/// generator so no RNG dependency is needed).
fn random_triangle(seed: u64) -> Result<Simplex, CliError> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..1000 {
        let rows: Vec<Vec<f64>> = (0..3).map(|_| vec![next(), next()]).collect();
        if let Ok(s) = Simplex::from_rows(&rows) {
            if s.volume() > 0.02 {
                return Ok(s);
            }
        }
    }
    Err(usage("could not draw a non-degenerate triangle"))
}

fn read_data_json(data: &str) -> Result<serde_json::Value, CliError> {
    let text = if data.trim_start().starts_with('{') {
        data.to_string()
    } else {
        fs::read_to_string(data).map_err(|e| usage(format!("cannot read {data}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid data JSON: {e}")))
}

fn timestamp_now() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}

fn write_reports(
    output: &OutputArgs,
    mut reports: Vec<NeumannReport>,
    table: Option<&verify::ConvergenceTable>,
) -> CliResult {
    if output.timestamp {
        let stamp = timestamp_now();
        for r in &mut reports {
            r.timestamp = Some(stamp.clone());
        }
    }
    let text = match output.format {
        Format::Csv => verify::reports_to_csv(&reports),
        Format::Json => {
            let mut value = serde_json::json!({ "reports": reports });
            if let Some(t) = table {
                value["convergence"] = serde_json::json!({
                    "rows": t.rows,
                    "observed_orders": t.observed_orders(),
                });
            }
            let mut s = serde_json::to_string_pretty(&value).unwrap();
            s.push('\n');
            s
        }
    };
    emit(output, &text)
}

fn write_value(output: &OutputArgs, mut value: serde_json::Value) -> CliResult {
    if output.timestamp {
        value["timestamp"] = serde_json::Value::String(timestamp_now());
    }
    let mut text = serde_json::to_string_pretty(&value).unwrap();
    text.push('\n');
    emit(output, &text)
}

fn emit(output: &OutputArgs, text: &str) -> CliResult {
    match &output.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &PathBuf, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}
