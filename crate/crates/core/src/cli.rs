//! The `cilgraph` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (unreadable or invalid input), 3 solver failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{aggregate_csv, config_from_map, parse_sections, parse_shape, run_experiment, trials_csv, DEFAULT_CONFIG};
use crate::error::Error;
use crate::graph::{build_affinity, ncut_cluster, AffinityGraph};
use crate::hq::{SigmaMode, SolveOptions};
use crate::matio::{load_labels, load_matrix, normalize_columns, read_matrix, save_labels, write_matrix, DataMatrix, MatrixFormat};
use crate::method::{default_epsilon, Method, MethodParams};
use crate::metrics::evaluate;
use crate::solvers::CoefficientMatrix;

#[derive(Debug, Parser)]
#[command(name = "cilgraph", version, about = "Robust self-representation graphs for subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a coefficient matrix Z from a data matrix.
    Solve(SolveArgs),
    /// Cluster a coefficient matrix (or a data matrix, solving first).
    Cluster(ClusterArgs),
    /// Run a corruption sweep and write trial and aggregate CSVs.
    Bench(BenchArgs),
    /// Compare a label file against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }

    fn word(self) -> &'static str {
        if self.on() {
            "on"
        } else {
            "off"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::Csv,
            FormatArg::Bin => MatrixFormat::Bin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SigmaArg {
    Auto,
    Fixed,
}

impl From<SigmaArg> for SigmaMode {
    fn from(s: SigmaArg) -> Self {
        match s {
            SigmaArg::Auto => SigmaMode::Auto,
            SigmaArg::Fixed => SigmaMode::Fixed,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    /// One of cil2, rcil2, lsr, ssc_irls, lrr_irls, msr_irls.
    #[arg(long, default_value = "cil2")]
    method: String,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Weight of the nuclear term (msr_irls).
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Smoothing for the L1 / L21 / nuclear surrogates [default: 1e-4 * median |X|].
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    sigma_mode: SigmaArg,
    /// Kernel size sigma^2 (initial value under auto).
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    normalize: Switch,
    /// Exclude self-representation [default: on for ssc_irls, off otherwise].
    #[arg(long, value_enum)]
    zero_diagonal: Option<Switch>,
    /// Image shape HxW of each column.
    #[arg(long)]
    image_shape: Option<String>,
    /// Worker threads for column-parallel solves.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Matrix format for input and output [default: from file extension].
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    /// An n x n coefficient matrix.
    Z,
    /// A d x n data matrix; solved with the model flags first.
    Data,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Labels file to write, one integer per line.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, required = true)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "z")]
    input_kind: InputKind,
    /// Ground-truth labels; accuracy and NMI are printed when given.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Experiment file of [section] and key = value lines [default: bundled sweep].
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the CSVs (relative output paths resolve against it).
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Override any config key, e.g. --set corruption.rates=0,0.5
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma list of methods.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    sigma_mode: Option<SigmaArg>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    normalize: Option<Switch>,
    #[arg(long, value_enum)]
    zero_diagonal: Option<Switch>,
    #[arg(long)]
    image_shape: Option<String>,
    /// Worker threads for parallel trials [default: all cores].
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
}

/// Failure classes, one per exit code.
enum Failure {
    Config(String),
    Data(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_error() {
            Failure::Solver(e.to_string())
        } else if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

type Outcome = std::result::Result<Vec<(String, String)>, Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Reports go to `out` as `key=value` lines, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => with_threads(Some(a.model.threads), || cmd_solve(&a)),
        Command::Cluster(a) => with_threads(Some(a.model.threads), || cmd_cluster(&a)),
        Command::Bench(a) => with_threads(a.threads, || cmd_bench(&a)),
        Command::Eval(a) => cmd_eval(&a),
    };
    match result {
        Ok(lines) => {
            for (k, v) in lines {
                let _ = writeln!(out, "{k}={v}");
            }
            0
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Outcome + Send) -> Outcome {
    match threads {
        Some(0) => Err(Failure::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(config_err)?
            .install(f),
        None => f(),
    }
}

fn format_for(explicit: Option<FormatArg>, path: &Path) -> MatrixFormat {
    explicit.map_or_else(|| MatrixFormat::from_path(path), Into::into)
}

struct Model {
    method: Method,
    params: MethodParams,
    opts: SolveOptions,
}

fn model_from(args: &ModelArgs, data: &DataMatrix) -> std::result::Result<Model, Failure> {
    let method: Method = args.method.parse().map_err(config_err)?;
    let params = MethodParams {
        lambda: args.lambda,
        gamma: args.gamma,
        epsilon: args.epsilon.unwrap_or_else(|| default_epsilon(data.values())),
        sigma_mode: args.sigma_mode.into(),
        sigma2: args.sigma2,
    };
    let opts = SolveOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        zero_diagonal: args.zero_diagonal.map_or(method.default_zero_diagonal(), Switch::on),
        seed: args.seed,
        ..SolveOptions::default()
    };
    let (loss, reg) = method.specs(&params);
    loss.validate().map_err(config_err)?;
    reg.validate().map_err(config_err)?;
    opts.validate().map_err(config_err)?;
    Ok(Model { method, params, opts })
}

fn load_data(path: &Path, format: MatrixFormat, model: &ModelArgs) -> std::result::Result<DataMatrix, Failure> {
    let mut data = load_matrix(path, format)?;
    if let Some(shape) = &model.image_shape {
        let (h, w) = parse_shape("--image-shape", shape).map_err(config_err)?;
        data = data.with_image_shape(h, w)?;
    }
    if model.normalize.on() {
        data = normalize_columns(&data)?;
    }
    Ok(data)
}

fn solve_data(data: &DataMatrix, args: &ModelArgs) -> std::result::Result<(CoefficientMatrix, Vec<(String, String)>), Failure> {
    let model = model_from(args, data)?;
    let report = model.method.solve(data, &model.params, &model.opts)?;
    let lines = vec![
        ("method".into(), model.method.to_string()),
        ("n".into(), data.len().to_string()),
        ("iterations".into(), report.iterations.to_string()),
        ("converged".into(), report.converged.to_string()),
        ("final_objective".into(), report.final_objective().to_string()),
        ("sigma2".into(), report.final_sigma2.to_string()),
    ];
    Ok((report.z, lines))
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    let format = format_for(a.format, &a.input);
    let data = load_data(&a.input, format, &a.model)?;
    let (z, mut lines) = solve_data(&data, &a.model)?;
    let out_format = format_for(a.format, &a.output);
    write_matrix(z.values(), &a.output, out_format)?;
    lines.push(("output".into(), a.output.display().to_string()));
    Ok(lines)
}

fn cmd_cluster(a: &ClusterArgs) -> Outcome {
    let k = a.k.ok_or_else(|| Failure::Config("--k is required".into()))?;
    let format = format_for(a.format, &a.input);
    let mut lines = Vec::new();
    let graph = match a.input_kind {
        InputKind::Z => {
            let z = read_matrix(&a.input, format)?;
            if !z.is_square() {
                return Err(Failure::Data(format!(
                    "coefficient matrix must be square, got {}x{}",
                    z.nrows(),
                    z.ncols()
                )));
            }
            build_affinity(&CoefficientMatrix::new(z).map_err(|e| Failure::Data(e.to_string()))?)
        }
        InputKind::Data => {
            let data = load_data(&a.input, format, &a.model)?;
            let (z, solve_lines) = solve_data(&data, &a.model)?;
            lines.extend(solve_lines);
            build_affinity(&z)
        }
    };
    let n = graph.len();
    if k < 2 || k > n {
        return Err(Failure::Config(format!("--k must be in 2..={n}, got {k}")));
    }
    let labels = cluster_graph(&graph, k, a.model.seed)?;
    save_labels(labels.labels(), &a.output)?;
    lines.push(("k".into(), k.to_string()));
    lines.push(("n".into(), n.to_string()));
    lines.push(("output".into(), a.output.display().to_string()));
    if let Some(truth) = &a.truth {
        let y = load_labels(truth)?;
        let report = evaluate(&y, labels.labels())?;
        lines.push(("accuracy".into(), report.accuracy.to_string()));
        lines.push(("nmi".into(), report.nmi.to_string()));
    }
    Ok(lines)
}

fn cluster_graph(graph: &AffinityGraph, k: usize, seed: u64) -> std::result::Result<crate::graph::ClusterLabels, Failure> {
    Ok(ncut_cluster(graph, k, seed)?)
}

fn bench_overrides(a: &BenchArgs) -> std::result::Result<Vec<(String, String)>, Failure> {
    let mut pairs = Vec::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    put("solver.methods", a.method.clone());
    put("solver.lambda", a.lambda.map(|v| v.to_string()));
    put("solver.gamma", a.gamma.map(|v| v.to_string()));
    put("solver.epsilon", a.epsilon.map(|v| v.to_string()));
    put(
        "solver.sigma_mode",
        a.sigma_mode.map(|s| if s == SigmaArg::Auto { "auto" } else { "fixed" }.to_string()),
    );
    put("solver.sigma2", a.sigma2.map(|v| v.to_string()));
    put("solver.tol", a.tol.map(|v| v.to_string()));
    put("solver.max_iter", a.max_iter.map(|v| v.to_string()));
    put("solver.zero_diagonal", a.zero_diagonal.map(|s| s.word().to_string()));
    put("experiment.master_seed", a.seed.map(|v| v.to_string()));
    put("data.k", a.k.map(|v| v.to_string()));
    put("data.normalize", a.normalize.map(|s| s.word().to_string()));
    put("data.image_shape", a.image_shape.clone());
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects SECTION.KEY=VALUE, got '{o}'")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn cmd_bench(a: &BenchArgs) -> Outcome {
    let text = match &a.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut map: BTreeMap<String, String> = parse_sections(&text).map_err(config_err)?;
    map.extend(bench_overrides(a)?);
    let config = config_from_map(&map).map_err(config_err)?;
    let result = run_experiment(&config)?;
    let trials_path = a.output_dir.join(&config.trials_path);
    let aggregate_path = a.output_dir.join(&config.aggregate_path);
    let write = |path: &Path, text: String| {
        std::fs::write(path, text).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
    };
    write(&trials_path, trials_csv(&result.trials))?;
    write(&aggregate_path, aggregate_csv(&result.aggregates))?;
    let failed = result.trials.iter().filter(|t| t.error.is_some()).count();
    Ok(vec![
        ("trials".into(), trials_path.display().to_string()),
        ("aggregate".into(), aggregate_path.display().to_string()),
        ("rows".into(), result.trials.len().to_string()),
        ("failed".into(), failed.to_string()),
    ])
}

fn cmd_eval(a: &EvalArgs) -> Outcome {
    let y = load_labels(&a.truth)?;
    let p = load_labels(&a.pred)?;
    let r = evaluate(&y, &p)?;
    Ok(vec![
        ("accuracy".into(), r.accuracy.to_string()),
        ("nmi".into(), r.nmi.to_string()),
        ("mi".into(), r.mi.to_string()),
    ])
}
