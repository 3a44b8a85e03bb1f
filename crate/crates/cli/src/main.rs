//! Command-line front end: reads joints (CSV/JSON), runs the onset and
//! frontier pipelines, and emits reproducible CSV/JSON artifacts. All
//! outputs embed a metadata header with the fully-resolved run
//! configuration and its hash, so identical (config, seed) runs are
//! byte-identical.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ibonset::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 2;
const EXIT_NO_ONSET: u8 = 3;
const EXIT_NO_CONVERGENCE: u8 = 4;
const EXIT_OUT_OF_SCOPE: u8 = 5;

#[derive(Parser)]
#[command(name = "ibonset", version, about = "Information bottleneck learning-onset toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Onset report (beta_c, second-order predictions, chi^2 analysis) for a joint.
    Onset(OnsetArgs),
    /// IB frontier over a beta grid, plus the perturbative overlay.
    Frontier(FrontierArgs),
    /// Chi^2 analysis (singular spectrum, eta_chi2, beta_c upper bound) only.
    Chi2(IoArgs),
    /// Closed-form Gaussian onset vs its discretized pipeline.
    Gauss(GaussArgs),
    /// Binary-classification family sweep (onset quantities vs family parameter).
    Fig2(Fig2Args),
    /// Noisy-function noise sweep (onset quantities vs sigma).
    Fig3(Fig3Args),
    /// Generate a joint distribution from a JSON spec.
    Gen(GenArgs),
    /// Run the invariant suite on an input joint.
    Validate(IoArgs),
}

/// Run configuration: loadable from a JSON file, overridable per flag, and
/// serialized in full into every output's metadata header.
#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    seed: u64,
    tol: f64,
    restarts: usize,
    max_iter: u64,
    jobs: usize,
    /// Bins per axis when a Gaussian joint is discretized.
    n_bins: usize,
    /// Half-width of the discretization box, in marginal standard deviations.
    truncation: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            tol: 1e-10,
            restarts: 4,
            max_iter: 2_000_000,
            jobs: 0,
            n_bins: 128,
            truncation: 5.0,
        }
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed-point tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Restart budget for onset and frontier solves.
    #[arg(long)]
    restarts: Option<usize>,
    /// Concurrent sweep points (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OnsetArgs {
    /// Joint distribution file (.csv or .json).
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct FrontierArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// "auto" (spans [beta_c - 0.2, beta_c + 1.0]), "start:stop:n", or a comma list.
    #[arg(long, default_value = "auto")]
    beta_grid: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct IoArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GaussArgs {
    /// Gaussian joint JSON ({"sigma_x": [[..]], "sigma_y": [[..]], "sigma_xy": [[..]]}).
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Copy, Clone, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Exponential,
    Poisson,
}

#[derive(Args)]
struct Fig2Args {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Sweep of the family parameter (class-2 mean / rate): "start:stop:n" or comma list.
    #[arg(long)]
    params: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Copy, Clone, ValueEnum)]
enum FunctionArg {
    Linear,
    Cubic,
    Sigmoid,
    Quadratic,
}

#[derive(Args)]
struct Fig3Args {
    #[arg(long, value_enum)]
    function: FunctionArg,
    /// Noise sweep: "start:stop:n" or comma list.
    #[arg(long)]
    sigmas: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec JSON (see `gen --help-spec` style docs in the README).
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Onset(a) => cmd_onset(a),
        Command::Frontier(a) => cmd_frontier(a),
        Command::Chi2(a) => cmd_chi2(a),
        Command::Gauss(a) => cmd_gauss(a),
        Command::Fig2(a) => cmd_fig2(a),
        Command::Fig3(a) => cmd_fig3(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                IbError::NoOnset { .. } => EXIT_NO_ONSET,
                IbError::ConvergenceFailure { .. } => EXIT_NO_CONVERGENCE,
                IbError::HigherOrderRequired { .. } => EXIT_OUT_OF_SCOPE,
                IbError::Parse(_)
                | IbError::Io(_)
                | IbError::InvalidParameter(_)
                | IbError::InvalidDistribution(_)
                | IbError::DimensionMismatch(_)
                | IbError::NotPositiveDefinite(_) => EXIT_USAGE,
                _ => 1,
            })
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
            .map_err(|e| IbError::Parse(format!("config {}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(r) = common.restarts {
        cfg.restarts = r;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    Ok(cfg)
}

fn config_json(cfg: &RunConfig) -> String {
    serde_json::to_string(cfg).expect("config serialization cannot fail")
}

fn config_hash(cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(config_json(cfg).as_bytes());
    format!("{:x}", h.finalize())
}

fn metadata_header(cfg: &RunConfig) -> String {
    format!(
        "# ibonset v{}\n# config sha256: {}\n# config: {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash(cfg),
        config_json(cfg)
    )
}

fn emit(output: &Option<PathBuf>, content: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn load_joint(path: &Path) -> Result<JointDistribution> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        JointDistribution::from_json(&text)
    } else {
        JointDistribution::from_csv(&text)
    }
}

fn onset_config(cfg: &RunConfig) -> OnsetConfig {
    OnsetConfig {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        max_restarts: cfg.restarts,
        seed: cfg.seed,
        ..OnsetConfig::default()
    }
}

fn thread_pool(cfg: &RunConfig) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .expect("thread pool construction cannot fail")
}

fn parse_grid(spec: &str, what: &str) -> Result<Vec<f64>> {
    let bad = |s: &str| IbError::Parse(format!("bad {what} '{s}'"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(spec));
        }
        let a: f64 = parts[0].parse().map_err(|_| bad(spec))?;
        let b: f64 = parts[1].parse().map_err(|_| bad(spec))?;
        let n: usize = parts[2].parse().map_err(|_| bad(spec))?;
        if n < 2 || !a.is_finite() || !b.is_finite() || b <= a {
            return Err(bad(spec));
        }
        Ok((0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect())
    } else {
        let mut v: Vec<f64> = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(s)))
            .collect::<Result<_>>()?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad(spec));
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

fn cmd_onset(args: OnsetArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.common)?;
    let joint = load_joint(&args.input)?;
    let onset = solve_onset(&joint, &onset_config(&cfg))?;
    let chi = eta_chi2(&joint)?;
    let (prediction, code) = match predict(&joint, &onset) {
        Ok(p) => (
            serde_json::from_str::<serde_json::Value>(&p.to_json()).expect("valid json"),
            ExitCode::SUCCESS,
        ),
        // still a usable report: beta_c and the chi^2 side stand on their
        // own; the exit code flags the missing second-order block
        Err(IbError::HigherOrderRequired { kappa }) => (
            serde_json::json!({ "skipped": "kappa <= 0", "kappa": kappa }),
            ExitCode::from(EXIT_OUT_OF_SCOPE),
        ),
        Err(e) => return Err(e),
    };
    let report = serde_json::json!({
        "config": serde_json::from_str::<serde_json::Value>(&config_json(&cfg)).expect("valid json"),
        "config_sha256": config_hash(&cfg),
        "onset": serde_json::from_str::<serde_json::Value>(&onset.to_json()).expect("valid json"),
        "perturbation": prediction,
        "chi2": serde_json::from_str::<serde_json::Value>(&chi.to_json()).expect("valid json"),
    });
    emit(
        &args.common.output,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("valid json")),
    )?;
    Ok(code)
}

fn cmd_frontier(args: FrontierArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.common)?;
    let joint = load_joint(&args.input)?;
    let onset = solve_onset(&joint, &onset_config(&cfg))?;
    let grid = if args.beta_grid == "auto" {
        let n = 25;
        (0..n)
            .map(|i| (onset.beta_c - 0.2) + 1.2 * i as f64 / (n - 1) as f64)
            .collect()
    } else {
        parse_grid(&args.beta_grid, "beta grid")?
    };
    let solver_cfg = SolverConfig {
        z_cardinality: None,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        seed: cfg.seed,
    };
    let points = frontier_sweep(&joint, &grid, &solver_cfg)?;
    let mut csv = metadata_header(&cfg);
    csv.push_str("beta,i_zx_bits,i_zy_bits,loss_bits,converged\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            p.beta, p.i_zx, p.i_zy, p.loss, p.converged
        ));
    }
    emit(&args.common.output, &csv)?;

    // perturbative overlay on the same grid: eps * I1 and eps^2 * L2 past
    // the onset, the uninformative solution (zeros) below it
    let pred = predict(&joint, &onset);
    let mut overlay = metadata_header(&cfg);
    overlay.push_str(&format!("# beta_c: {}\n", onset.beta_c));
    overlay.push_str("beta,eps,i_zx_pred_bits,i_zy_pred_bits,loss_pred_bits\n");
    for &beta in &grid {
        let eps = (beta - onset.beta_c).max(0.0);
        let (izx, izy, loss) = match &pred {
            Ok(p) => (eps * p.i1_zx, eps * p.i1_zy, eps * eps * p.l2),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        overlay.push_str(&format!("{beta},{eps},{izx},{izy},{loss}\n"));
    }
    let overlay_path = args.common.output.as_ref().map(|p| {
        let mut name = p.file_stem().unwrap_or_default().to_os_string();
        name.push("_perturbative");
        if let Some(ext) = p.extension() {
            name.push(".");
            name.push(ext);
        }
        p.with_file_name(name)
    });
    emit(&overlay_path, &overlay)?;
    if pred.is_err() {
        return Ok(ExitCode::from(EXIT_OUT_OF_SCOPE));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_chi2(args: IoArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.common)?;
    let joint = load_joint(&args.input)?;
    let chi = eta_chi2(&joint)?;
    let (fwd, bwd) = symmetry_check(&joint)?;
    let report = serde_json::json!({
        "config": serde_json::from_str::<serde_json::Value>(&config_json(&cfg)).expect("valid json"),
        "config_sha256": config_hash(&cfg),
        "chi2": serde_json::from_str::<serde_json::Value>(&chi.to_json()).expect("valid json"),
        "chi2_information": chi2_information(&joint),
        "symmetry": { "forward": fwd, "backward": bwd },
    });
    emit(
        &args.common.output,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("valid json")),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_gauss(args: GaussArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.common)?;
    let g = GaussianJoint::from_json(&std::fs::read_to_string(&args.input)?)?;
    let (beta_c, nu) = gaussian_onset(&g)?;
    let discretized = if g.d_x() == 1 && g.d_y() == 1 {
        let j = discretize_gaussian(&g, cfg.n_bins, cfg.truncation)?;
        let s = solve_onset(&j, &onset_config(&cfg))?;
        serde_json::json!({
            "n_bins": cfg.n_bins,
            "truncation": cfg.truncation,
            "beta_c": s.beta_c,
            "relative_error": (s.beta_c - beta_c).abs() / beta_c,
        })
    } else {
        serde_json::json!({ "skipped": "discretization supports scalar X, Y only" })
    };
    let report = serde_json::json!({
        "config": serde_json::from_str::<serde_json::Value>(&config_json(&cfg)).expect("valid json"),
        "config_sha256": config_hash(&cfg),
        "closed_form": { "beta_c": beta_c, "nu": nu.as_slice() },
        "discretized": discretized,
    });
    emit(
        &args.common.output,
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("valid json")),
    )?;
    Ok(ExitCode::SUCCESS)
}

/// One sweep row shared by fig2 and fig3: onset quantities against the
/// sweep parameter. kappa <= 0 points report empty i1/kappa fields rather
/// than aborting the sweep.
fn sweep_csv(
    cfg: &RunConfig,
    param_name: &str,
    points: Vec<(f64, JointDistribution)>,
) -> Result<String> {
    let ocfg = onset_config(cfg);
    let pool = thread_pool(cfg);
    let rows: Vec<Result<String>> = pool.install(|| {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|(param, joint)| {
                let onset = solve_onset(joint, &ocfg)
                    .map_err(|e| IbError::ConvergenceFailure {
                        detail: format!("{param_name}={param}: {e}"),
                    })?;
                let chi = eta_chi2(joint)?;
                let (i1_zy, kap) = match predict(joint, &onset) {
                    Ok(p) => (p.i1_zy.to_string(), p.kappa.to_string()),
                    Err(IbError::HigherOrderRequired { kappa }) => {
                        (String::new(), kappa.to_string())
                    }
                    Err(e) => return Err(e),
                };
                Ok(format!(
                    "{},{},{},{},{},{}\n",
                    param,
                    joint.mutual_information(),
                    onset.beta_c,
                    chi.beta_c_hat,
                    i1_zy,
                    kap
                ))
            })
            .collect()
    });
    let mut csv = metadata_header(cfg);
    csv.push_str(&format!(
        "{param_name},i_xy_bits,beta_c,beta_c_hat,i1_zy_bits,kappa\n"
    ));
    for row in rows {
        csv.push_str(&row?);
    }
    Ok(csv)
}

fn cmd_fig2(args: Fig2Args) -> Result<ExitCode> {
    let cfg = load_config(&args.common)?;
    let (default_sweep, name): (&str, &str) = match args.family {
        FamilyArg::Gaussian => ("0.2:3:12", "mu"),
        FamilyArg::Exponential => ("1.5:16:12", "lambda"),
        FamilyArg::Poisson => ("1.3:4:12", "lambda"),
    };
    let sweep = parse_grid(args.params.as_deref().unwrap_or(default_sweep), "params")?;
    let points: Vec<(f64, JointDistribution)> = sweep
        .into_iter()
        .map(|p| {
            let family = match args.family {
                FamilyArg::Gaussian => ClassFamily::Gaussian {
                    mu: [0.0, p],
                    sigma: [1.0, 1.0],
                },
                FamilyArg::Exponential => ClassFamily::Exponential { lambda: [1.0, p] },
                FamilyArg::Poisson => ClassFamily::Poisson { lambda: [1.0, p] },
            };
            let spec = BinaryClassSpec {
                family,
                n_bins: cfg.n_bins,
                range: None,
            };
            Ok((p, binary_classification_joint(&spec)?))
        })
        .collect::<Result<_>>()?;
    let csv = sweep_csv(&cfg, name, points)?;
    emit(&args.common.output, &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_fig3(args: Fig3Args) -> Result<ExitCode> {
    let cfg = load_config(&args.common)?;
    let f = match args.function {
        FunctionArg::Linear => FunctionKind::Linear,
        FunctionArg::Cubic => FunctionKind::Cubic,
        FunctionArg::Sigmoid => FunctionKind::Sigmoid,
        FunctionArg::Quadratic => FunctionKind::Quadratic,
    };
    let sweep = parse_grid(args.sigmas.as_deref().unwrap_or("0.1:1:10"), "sigmas")?;
    let points: Vec<(f64, JointDistribution)> = sweep
        .into_iter()
        .map(|sigma| {
            let spec = NoisyFunctionSpec {
                f,
                sigma,
                n_x_bins: 64,
                n_y_bins: 64,
                y_range: None,
            };
            Ok((sigma, noisy_function_joint(&spec)?))
        })
        .collect::<Result<_>>()?;
    let csv = sweep_csv(&cfg, "sigma", points)?;
    emit(&args.common.output, &csv)?;
    Ok(ExitCode::SUCCESS)
}

/// Generator spec: {"kind": "binary", ...BinaryClassSpec},
/// {"kind": "noisy_function", ...NoisyFunctionSpec},
/// {"kind": "bsc", "delta": d}, or {"kind": "fig1"}.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GenSpec {
    Binary(BinaryClassSpec),
    NoisyFunction(NoisyFunctionSpec),
    Bsc { delta: f64 },
    Fig1 {},
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let _cfg = load_config(&args.common)?;
    let text = std::fs::read_to_string(&args.input)?;
    let spec: GenSpec =
        serde_json::from_str(&text).map_err(|e| IbError::Parse(format!("gen spec: {e}")))?;
    let joint = match spec {
        GenSpec::Binary(s) => binary_classification_joint(&s)?,
        GenSpec::NoisyFunction(s) => noisy_function_joint(&s)?,
        GenSpec::Bsc { delta } => bsc_joint(delta)?,
        GenSpec::Fig1 {} => fig1_joint(),
    };
    let as_json = args
        .common
        .output
        .as_ref()
        .is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let content = if as_json {
        format!("{}\n", joint.to_json())
    } else {
        joint.to_csv()
    };
    emit(&args.common.output, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: IoArgs) -> Result<ExitCode> {
    let _cfg = load_config(&args.common)?;
    let joint = load_joint(&args.input)?;
    let mut problems = Vec::new();
    let total: f64 = (0..joint.nx())
        .flat_map(|x| (0..joint.ny()).map(move |y| (x, y)))
        .map(|(x, y)| joint.prob(x, y))
        .sum();
    if (total - 1.0).abs() > 1e-12 {
        problems.push(format!("mass sums to {total}"));
    }
    let (px, py) = joint.marginals();
    let mi = joint.mutual_information();
    if mi < -1e-12 || mi > px.entropy().min(py.entropy()) + 1e-9 {
        problems.push(format!("I(X;Y) = {mi} outside [0, min marginal entropy]"));
    }
    let top = joint
        .divergence_transition_matrix()
        .svd(false, false)
        .singular_values
        .max();
    if (top - 1.0).abs() > 1e-8 {
        problems.push(format!("top singular value of B is {top}, not 1"));
    }
    let rt = JointDistribution::from_csv(&joint.to_csv())?;
    let rt_err = (0..joint.nx())
        .flat_map(|x| (0..joint.ny()).map(move |y| (x, y)))
        .map(|(x, y)| (joint.prob(x, y) - rt.prob(x, y)).abs())
        .fold(0.0f64, f64::max);
    if rt_err > 1e-15 {
        problems.push(format!("CSV round trip differs by {rt_err}"));
    }
    if problems.is_empty() {
        println!("ok: {}x{} joint, I(X;Y) = {mi} bits", joint.nx(), joint.ny());
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &problems {
            eprintln!("invalid: {p}");
        }
        Ok(ExitCode::from(EXIT_USAGE))
    }
}
