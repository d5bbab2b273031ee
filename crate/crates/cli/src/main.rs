//! Command-line surface: synthetic data generation, training, evaluation,
//! Pareto sweeps, cross-validation, runtime benchmarks, and program export.
//!
//! Exit codes: 0 success, 2 usage error, 3 infeasible model, 4 solver error.

use clap::{Args, Parser, Subcommand};
use fairdro_core::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fairdro", version, about = "Distributionally robust fair linear classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-feature dataset as CSV.
    Synth {
        /// Number of samples.
        #[arg(long)]
        n: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier and write a model JSON file.
    Train {
        #[command(flatten)]
        spec: SpecFlags,
        /// Training data CSV.
        #[arg(long)]
        data: PathBuf,
        /// Output model JSON path.
        #[arg(long)]
        out: PathBuf,
        /// RNG seed recorded in provenance.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate a trained model on a dataset; prints a JSON report.
    Eval {
        /// Model JSON produced by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Evaluation data CSV (raw features; the stored scaler is applied).
        #[arg(long)]
        data: PathBuf,
        /// Optional path for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over synthetic draws and write a frontier CSV.
    Sweep {
        #[command(flatten)]
        spec: SpecFlags,
        /// Parameter to sweep: eta, zeta, or rho.
        #[arg(long)]
        param: String,
        /// Comma-separated, strictly increasing grid values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Number of trials per grid value.
        #[arg(long, default_value_t = 10)]
        trials: u64,
        /// Base seed; trial i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        n_train: usize,
        #[arg(long, default_value_t = 150)]
        n_test: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the perturbation radius on a dataset.
    Cv {
        #[command(flatten)]
        spec: SpecFlags,
        /// Training data CSV.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated radius grid.
        #[arg(long, value_delimiter = ',')]
        rho_grid: Vec<f64>,
        /// Number of folds.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Training samples per fold.
        #[arg(long)]
        subtrain_n: usize,
        /// Weight of unfairness in the validation score.
        #[arg(long, default_value_t = 0.5)]
        score_weight: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Benchmark build+solve wall time over synthetic sizes; writes CSV.
    Bench {
        #[command(flatten)]
        spec: SpecFlags,
        /// Comma-separated sample sizes (each at least 50).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the optimization program for a dataset and write its textual form.
    ExportProgram {
        #[command(flatten)]
        spec: SpecFlags,
        /// Training data CSV.
        #[arg(long)]
        data: PathBuf,
        /// Output text path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags mirroring the model specification fields one-to-one. A TOML config
/// file may supply any of them; explicit command-line flags win.
#[derive(Args, Debug, Clone)]
struct SpecFlags {
    /// Model variant: eps-drfc, hdrfc, hdrfc-general, eps-drfc-general,
    /// generalized-eps-drfc, svm, cvar-approx.
    #[arg(long)]
    model: Option<String>,
    /// Optional TOML config supplying any spec field.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zeta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Four per-cell radii: (a=0,y=-1),(0,+1),(1,-1),(1,+1).
    #[arg(long, value_delimiter = ',', num_args = 4, allow_hyphen_values = true)]
    rho_ay: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    delta_p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa_y: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Perturbation norm: l1, l2, or linf.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    w_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b_max: Option<f64>,
    /// Write the objective indicator rows with right-hand side M·t − 1.
    #[arg(long)]
    obj_rhs_one: bool,
}

#[derive(Serialize, Deserialize)]
struct Provenance {
    seed: u64,
    dataset_hash: String,
    solver_status: String,
    objective: f64,
}

/// On-disk model format: classifier, scaler, spec echo, and provenance.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    w: Vec<f64>,
    b: f64,
    scaler: ScalerParams,
    spec: ModelSpec,
    provenance: Provenance,
}

/// CLI failure carrying the exit code mandated by the interface contract.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
    fn infeasible(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
    fn solver(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::InfeasibleSpec(_) | Error::GammaOutOfRange(_) | Error::EmptyCell { .. } => {
                Failure::infeasible(e.to_string())
            }
            Error::NumericalFailure(_) => Failure::solver(e.to_string()),
            Error::BadSpec(_) => Failure::usage(e.to_string()),
            _ => Failure { code: 1, message: e.to_string() },
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Synth { n, seed, out } => {
            let data = gen_synthetic(n, seed);
            atomic_csv(&data, &out)
        }
        Command::Train { spec, data, out, seed } => {
            let spec = resolve_spec(&spec)?;
            let (raw, hash) = load_hashed(&data)?;
            let (train_data, scaler) = standardize(&raw);
            let (h, res) = train(&train_data, &spec, &SolveOptions::default())
                .map_err(map_train_error)?;
            let model = ModelFile {
                w: h.w,
                b: h.b,
                scaler,
                spec,
                provenance: Provenance {
                    seed,
                    dataset_hash: hash,
                    solver_status: format!("{:?}", res.status),
                    objective: res.objective,
                },
            };
            let json = serde_json::to_vec_pretty(&model)
                .map_err(|e| Failure { code: 1, message: e.to_string() })?;
            atomic_write(&out, &json).map_err(Failure::from)?;
            println!("{}", serde_json::json!({"objective": model.provenance.objective,
                "status": model.provenance.solver_status}));
            Ok(())
        }
        Command::Eval { model, data, out } => {
            let text = std::fs::read_to_string(&model)
                .map_err(|e| Failure { code: 1, message: format!("{}: {e}", model.display()) })?;
            let model: ModelFile = serde_json::from_str(&text)
                .map_err(|e| Failure::usage(format!("malformed model file: {e}")))?;
            let (raw, _) = load_hashed(&data)?;
            let scaled = apply_scaler(&raw, &model.scaler);
            let h = Hyperplane::new(model.w.clone(), model.b);
            let report = evaluate(&h, &scaled).map_err(Failure::from)?;
            let json = serde_json::json!({
                "accuracy": report.accuracy,
                "eo_unfairness": report.eo_unfairness,
            });
            let rendered = serde_json::to_string_pretty(&json).expect("serializable");
            println!("{rendered}");
            if let Some(path) = out {
                atomic_write(&path, rendered.as_bytes()).map_err(Failure::from)?;
            }
            Ok(())
        }
        Command::Sweep { spec, param, values, trials, seed, n_train, n_test, out } => {
            // Seed the swept field with the first grid value so the template
            // validates; the sweep overwrites it per grid point.
            let mut spec = spec;
            if let Some(&first) = values.first() {
                match param.as_str() {
                    "eta" if spec.eta.is_none() => spec.eta = Some(first),
                    "zeta" if spec.zeta.is_none() => spec.zeta = Some(first),
                    "rho" if spec.rho.is_none() => spec.rho = Some(first),
                    _ => {}
                }
            }
            let template = resolve_spec(&spec)?;
            let parameter = match param.as_str() {
                "eta" => SweepParam::Eta,
                "zeta" => SweepParam::Zeta,
                "rho" => SweepParam::Rho,
                other => {
                    return Err(Failure::usage(format!(
                        "--param must be eta, zeta, or rho (got `{other}`)"
                    )))
                }
            };
            let grid = SweepGrid {
                parameter,
                values,
                seeds: (seed..seed + trials).collect(),
            };
            let points = pareto_sweep(&template, &grid, n_train, n_test, &SolveOptions::default())
                .map_err(Failure::from)?;
            write_frontier_csv(&out, &points).map_err(Failure::from)?;
            Ok(())
        }
        Command::Cv { spec, data, rho_grid, k, subtrain_n, score_weight, seed } => {
            let template = resolve_spec(&spec)?;
            let (raw, _) = load_hashed(&data)?;
            let rho = cross_validate(
                &raw,
                &template,
                &rho_grid,
                k,
                subtrain_n,
                score_weight,
                seed,
                &SolveOptions::default(),
            )
            .map_err(Failure::from)?;
            println!("{}", serde_json::json!({ "selected_rho": rho }));
            Ok(())
        }
        Command::Bench { spec, sizes, seed, out } => {
            let template = resolve_spec(&spec)?;
            let rows = benchmark_runtime(&sizes, &[template], seed, &SolveOptions::default())
                .map_err(Failure::from)?;
            write_bench_csv(&out, &rows).map_err(Failure::from)?;
            Ok(())
        }
        Command::ExportProgram { spec, data, out } => {
            let spec = resolve_spec(&spec)?;
            let (raw, _) = load_hashed(&data)?;
            let (scaled, _) = standardize(&raw);
            let program = build(&scaled, &spec).map_err(map_train_error)?;
            atomic_write(&out, export_text(&program).as_bytes()).map_err(Failure::from)?;
            Ok(())
        }
    }
}

/// Training errors: infeasible spec or solve → 3, numeric breakdown → 4.
fn map_train_error(e: Error) -> Failure {
    match &e {
        Error::InfeasibleSpec(_) | Error::EmptyCell { .. } | Error::EmptyProtectedGroup { .. } => {
            Failure::infeasible(e.to_string())
        }
        Error::NumericalFailure(_) => Failure::solver(e.to_string()),
        _ => Failure::from(e),
    }
}

/// Merges config-file values and command-line flags into a validated spec.
/// Command-line flags override the config file.
fn resolve_spec(flags: &SpecFlags) -> CliResult<ModelSpec> {
    let base: Option<ModelSpec> = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("--config {}: {e}", path.display())))?;
            Some(
                toml::from_str(&text)
                    .map_err(|e| Failure::usage(format!("--config: {e}")))?,
            )
        }
        None => None,
    };

    let variant = match (&flags.model, &base) {
        (Some(name), _) => parse_variant(name)?,
        (None, Some(spec)) => spec.variant,
        (None, None) => return Err(Failure::usage("--model is required (or supply --config)")),
    };

    let mut spec = match base {
        Some(mut spec) => {
            spec.variant = variant;
            spec
        }
        None => ModelSpec::new(variant),
    };

    // Flag-level range checks produce usage errors naming the flag.
    if let Some(eps) = flags.eps {
        if eps <= 0.0 {
            return Err(Failure::usage(format!("--eps must be positive (got {eps})")));
        }
        spec.eps = eps;
    }
    if let Some(eta) = flags.eta {
        if eta < 0.0 {
            return Err(Failure::usage(format!("--eta must be nonnegative (got {eta})")));
        }
        spec.eta = Some(eta);
    }
    if let Some(zeta) = flags.zeta {
        spec.zeta = Some(zeta);
    }
    if let Some(rho) = flags.rho {
        if rho < 0.0 {
            return Err(Failure::usage(format!("--rho must be nonnegative (got {rho})")));
        }
        spec.rho = rho;
    }
    if let Some(radii) = &flags.rho_ay {
        if radii.iter().any(|&r| r < 0.0) {
            return Err(Failure::usage(format!("--rho-ay entries must be nonnegative (got {radii:?})")));
        }
        spec.rho_ay = Some([radii[0], radii[1], radii[2], radii[3]]);
    }
    if let Some(dp) = flags.delta_p {
        if dp < 0.0 {
            return Err(Failure::usage(format!("--delta-p must be nonnegative (got {dp})")));
        }
        spec.delta_p = Some(dp);
    }
    if let Some(ka) = flags.kappa_a {
        if ka < 0.0 {
            return Err(Failure::usage(format!("--kappa-a must be nonnegative (got {ka})")));
        }
        spec.kappa_a = Some(ka);
    }
    if let Some(ky) = flags.kappa_y {
        if ky < 0.0 {
            return Err(Failure::usage(format!("--kappa-y must be nonnegative (got {ky})")));
        }
        spec.kappa_y = Some(ky);
    }
    if let Some(gamma) = flags.gamma {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Failure::usage(format!("--gamma must lie in [0, 1] (got {gamma})")));
        }
        spec.gamma = Some(gamma);
    }
    if let Some(norm) = &flags.norm {
        spec.norm = match norm.as_str() {
            "l1" => NormKind::L1,
            "l2" => NormKind::L2,
            "linf" => NormKind::Linf,
            other => {
                return Err(Failure::usage(format!(
                    "--norm must be l1, l2, or linf (got `{other}`)"
                )))
            }
        };
    }
    if let Some(w_max) = flags.w_max {
        if w_max <= 0.0 {
            return Err(Failure::usage(format!("--w-max must be positive (got {w_max})")));
        }
        spec.w_max = w_max;
    }
    if let Some(b_max) = flags.b_max {
        if b_max <= 0.0 {
            return Err(Failure::usage(format!("--b-max must be positive (got {b_max})")));
        }
        spec.b_max = b_max;
    }
    if flags.obj_rhs_one {
        spec.obj_rhs_one = true;
    }

    // Structural validation: wrong/missing fields are usage errors; value
    // combinations with provably empty feasible sets are infeasible (3).
    spec.validate().map_err(|e| match e {
        Error::BadSpec(m) => Failure::usage(m),
        Error::InfeasibleSpec(m) => Failure::infeasible(m),
        Error::GammaOutOfRange(g) => Failure::infeasible(format!("gamma {g} out of [0, 1]")),
        other => Failure::from(other),
    })?;
    Ok(spec)
}

fn parse_variant(name: &str) -> CliResult<Variant> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| Failure::usage(format!("--model: unknown variant `{name}`")))
}

/// Loads a CSV dataset and returns it with a hash of the file bytes
/// (FNV-1a, 64-bit) for provenance.
fn load_hashed(path: &Path) -> CliResult<(Dataset, String)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })?;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in &bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let data = load_csv(path, &CsvSchema::default()).map_err(Failure::from)?;
    Ok((data, format!("{hash:016x}")))
}

/// Writes a dataset CSV atomically (temp file + rename in the same directory).
fn atomic_csv(data: &Dataset, path: &Path) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::Builder::new()
        .prefix(".fairdro-csv")
        .tempfile_in(dir)
        .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    write_csv(data, tmp.path()).map_err(Failure::from)?;
    tmp.persist(path).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    Ok(())
}
