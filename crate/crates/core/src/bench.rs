//! Synthetic union-of-subspaces data, corruption models and experiment
//! sweeps.
//!
//! Images are flattened row-major: pixel `(r, c)` of an `h × w` image sits
//! at index `r·w + c` of its column.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_affinity, ncut_cluster};
use crate::hq::{SigmaMode, SolveOptions};
use crate::matio::{normalize_columns, DataMatrix};
use crate::method::{default_epsilon, Method, MethodParams};
use crate::metrics::evaluate;
use crate::rng::{self, tag};

/// The configuration file used when `bench` runs without one.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default_bench.conf");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceSpec {
    pub k: usize,
    pub sub_dim: usize,
    pub ambient: usize,
    pub per_cluster: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl SubspaceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.sub_dim == 0 || self.per_cluster == 0 {
            return Err(Error::param("k, sub_dim and per_cluster must be positive"));
        }
        if self.sub_dim >= self.ambient {
            return Err(Error::param(format!(
                "sub_dim ({}) must be below ambient ({})",
                self.sub_dim, self.ambient
            )));
        }
        if self.k * self.per_cluster < 2 {
            return Err(Error::param("need at least two points"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noise_std must be a nonnegative number"));
        }
        Ok(())
    }
}

/// `k` random orthonormal bases; each point is `U·c + noise` with Gaussian
/// `c`, then scaled to unit norm. Labels follow the subspace order.
pub fn gen_subspaces(spec: &SubspaceSpec) -> Result<DataMatrix> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, 0, tag::SUBSPACES);
    let d = spec.ambient;
    let n = spec.k * spec.per_cluster;
    let mut x = DMatrix::zeros(d, n);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..spec.k {
        let raw = DMatrix::<f64>::from_fn(d, spec.sub_dim, |_, _| StandardNormal.sample(&mut rng));
        let basis = raw.qr().q();
        let coeffs = DMatrix::<f64>::from_fn(spec.sub_dim, spec.per_cluster, |_, _| StandardNormal.sample(&mut rng));
        let mut block = basis * coeffs;
        if spec.noise_std > 0.0 {
            block += DMatrix::from_fn(d, spec.per_cluster, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                spec.noise_std * g
            });
        }
        x.columns_mut(cluster * spec.per_cluster, spec.per_cluster).copy_from(&block);
        labels.extend(std::iter::repeat_n(cluster, spec.per_cluster));
    }
    normalize_columns(&DataMatrix::new(x)?)?.with_labels(labels)
}

fn check_rate(what: &str, rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::param(format!("{what} must be in [0, 1], got {rate}")))
    }
}

fn check_range((lo, hi): (f64, f64)) -> Result<()> {
    if lo < hi && lo.is_finite() && hi.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("value range needs lo < hi, got ({lo}, {hi})")))
    }
}

fn edit_values(x: &DataMatrix, f: impl FnOnce(&mut DMatrix<f64>)) -> Result<DataMatrix> {
    let mut values = x.values().clone();
    f(&mut values);
    x.map_values(values)
}

fn count(rate: f64, total: usize) -> usize {
    ((rate * total as f64).round() as usize).min(total)
}

/// Replaces exactly `round(rate·d)` uniformly chosen entries of every column
/// with `Uniform(lo, hi)` draws.
pub fn corrupt_pixels(x: &DataMatrix, rate: f64, range: (f64, f64), seed: u64) -> Result<DataMatrix> {
    check_rate("pixel rate", rate)?;
    check_range(range)?;
    let mut rng = rng::stream(seed, 0, tag::PIXELS);
    let d = x.dim();
    let m = count(rate, d);
    edit_values(x, |values| {
        for mut col in values.column_iter_mut() {
            for i in sample(&mut rng, d, m) {
                col[i] = rng.random_range(range.0..range.1);
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockFill {
    /// Alternating `lo` / `hi` squares, starting with `lo` at the block corner.
    Checkerboard,
    /// One `Uniform(lo, hi)` texture drawn from the seed and pasted into
    /// every occluded image.
    Texture,
}

impl FromStr for BlockFill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkerboard" => Ok(BlockFill::Checkerboard),
            "texture" => Ok(BlockFill::Texture),
            other => Err(Error::param(format!("unknown block fill '{other}' (checkerboard, texture)"))),
        }
    }
}

/// Overwrites one uniformly placed `bh × bw` block in `round(fraction·n)`
/// images chosen without replacement.
pub fn occlude_block(
    x: &DataMatrix,
    block: (usize, usize),
    fraction: f64,
    range: (f64, f64),
    fill: BlockFill,
    seed: u64,
) -> Result<DataMatrix> {
    check_rate("occlusion fraction", fraction)?;
    check_range(range)?;
    let (h, w) = x
        .image_shape()
        .ok_or_else(|| Error::param("block occlusion needs an image shape"))?;
    let (bh, bw) = block;
    if bh == 0 || bw == 0 || bh > h || bw > w {
        return Err(Error::param(format!("block {bh}x{bw} does not fit image {h}x{w}")));
    }
    let texture = match fill {
        BlockFill::Checkerboard => {
            DMatrix::from_fn(bh, bw, |r, c| if (r + c) % 2 == 0 { range.0 } else { range.1 })
        }
        BlockFill::Texture => {
            let mut t = rng::stream(seed, 0, tag::TEXTURE);
            DMatrix::from_fn(bh, bw, |_, _| t.random_range(range.0..range.1))
        }
    };
    let mut rng = rng::stream(seed, 0, tag::BLOCKS);
    let n = x.len();
    let chosen = sample(&mut rng, n, count(fraction, n)).into_vec();
    let placements: Vec<(usize, (usize, usize))> = chosen
        .into_iter()
        .map(|j| (j, (rng.random_range(0..=h - bh), rng.random_range(0..=w - bw))))
        .collect();
    edit_values(x, |values| {
        for &(j, (top, left)) in &placements {
            for r in 0..bh {
                for c in 0..bw {
                    values[((top + r) * w + left + c, j)] = texture[(r, c)];
                }
            }
        }
    })
}

/// Replaces `round(fraction·d)` rows, chosen without replacement, with
/// `Uniform(lo, hi)` noise.
pub fn corrupt_rows(x: &DataMatrix, fraction: f64, range: (f64, f64), seed: u64) -> Result<DataMatrix> {
    check_rate("row fraction", fraction)?;
    check_range(range)?;
    let mut rng = rng::stream(seed, 0, tag::ROWS);
    let d = x.dim();
    let rows = sample(&mut rng, d, count(fraction, d)).into_vec();
    edit_values(x, |values| {
        for &r in &rows {
            for c in 0..values.ncols() {
                values[(r, c)] = rng.random_range(range.0..range.1);
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionKind {
    PixelUniform,
    BlockOcclusion,
    RowOutlier,
}

impl CorruptionKind {
    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::PixelUniform => "pixel_uniform",
            CorruptionKind::BlockOcclusion => "block_occlusion",
            CorruptionKind::RowOutlier => "row_outlier",
        }
    }

    fn tag(self) -> u64 {
        match self {
            CorruptionKind::PixelUniform => tag::PIXELS,
            CorruptionKind::BlockOcclusion => tag::BLOCKS,
            CorruptionKind::RowOutlier => tag::ROWS,
        }
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel_uniform" => Ok(CorruptionKind::PixelUniform),
            "block_occlusion" => Ok(CorruptionKind::BlockOcclusion),
            "row_outlier" => Ok(CorruptionKind::RowOutlier),
            other => Err(Error::param(format!(
                "unknown corruption '{other}' (pixel_uniform, block_occlusion, row_outlier)"
            ))),
        }
    }
}

/// Fill range for the corruption operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRange {
    /// `[min, max]` of the clean data matrix.
    Data,
    Fixed(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub rate: f64,
    pub value_range: (f64, f64),
    pub block: (usize, usize),
    pub fill: BlockFill,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        match self.kind {
            CorruptionKind::PixelUniform => corrupt_pixels(x, self.rate, self.value_range, self.seed),
            CorruptionKind::BlockOcclusion => {
                occlude_block(x, self.block, self.rate, self.value_range, self.fill, self.seed)
            }
            CorruptionKind::RowOutlier => corrupt_rows(x, self.rate, self.value_range, self.seed),
        }
    }
}

/// Parameters of one method inside an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    pub lambda: f64,
    /// Column label in the result tables.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: SubspaceSpec,
    pub image_shape: Option<(usize, usize)>,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    pub corruption: CorruptionKind,
    pub rates: Vec<f64>,
    pub value_range: ValueRange,
    pub block: (usize, usize),
    pub fill: BlockFill,
    pub methods: Vec<MethodRun>,
    pub gamma: f64,
    /// `None` picks the data-scaled default per trial.
    pub epsilon: Option<f64>,
    pub sigma_mode: SigmaMode,
    pub sigma2: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// `None` uses each method's own default.
    pub zero_diagonal: Option<bool>,
    pub normalize: bool,
    /// Record wall-clock time per trial; off keeps the CSVs reproducible.
    pub timing: bool,
    pub trials_path: String,
    pub aggregate_path: String,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.seeds.is_empty() || self.rates.is_empty() || self.methods.is_empty() {
            return Err(Error::param("experiment needs at least one seed, rate and method"));
        }
        for &r in &self.rates {
            check_rate("rate", r)?;
        }
        if let ValueRange::Fixed(lo, hi) = self.value_range {
            check_range((lo, hi))?;
        }
        if let Some((h, w)) = self.image_shape {
            if h * w != self.data.ambient {
                return Err(Error::param(format!(
                    "image shape {h}x{w} does not match ambient dimension {}",
                    self.data.ambient
                )));
            }
        }
        if self.corruption == CorruptionKind::BlockOcclusion && self.image_shape.is_none() {
            return Err(Error::param("block_occlusion needs image_shape"));
        }
        for m in &self.methods {
            if !(m.lambda > 0.0 && m.lambda.is_finite()) {
                return Err(Error::param(format!("lambda for {} must be positive", m.label)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub method: String,
    pub corruption: CorruptionKind,
    pub rate: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub nmi: f64,
    pub iterations: usize,
    pub wall_ms: u64,
    /// Set when some stage failed; the metrics are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub corruption: CorruptionKind,
    pub rate: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub mean_nmi: f64,
    pub std_nmi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub trials: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn data_range(x: &DataMatrix) -> (f64, f64) {
    let v = x.values();
    (v.min(), v.max())
}

/// Seed of the corruption operator for `(seed, rate index)`; shared by all
/// methods so they see the same corrupted matrix.
fn corruption_seed(master: u64, seed: u64, rate_index: usize, kind: CorruptionKind) -> u64 {
    rng::derive_seed(rng::derive_seed(master, seed, kind.tag()), rate_index as u64, kind.tag())
}

/// The corrupted (and, if configured, renormalized) data of one trial.
pub fn trial_data(config: &ExperimentConfig, seed: u64, rate_index: usize) -> Result<DataMatrix> {
    let spec = SubspaceSpec {
        seed: rng::derive_seed(config.master_seed, seed, tag::SUBSPACES),
        ..config.data
    };
    let mut clean = gen_subspaces(&spec)?;
    if let Some((h, w)) = config.image_shape {
        clean = clean.with_image_shape(h, w)?;
    }
    let value_range = match config.value_range {
        ValueRange::Data => data_range(&clean),
        ValueRange::Fixed(lo, hi) => (lo, hi),
    };
    let corruption = CorruptionSpec {
        kind: config.corruption,
        rate: config.rates[rate_index],
        value_range,
        block: config.block,
        fill: config.fill,
        seed: corruption_seed(config.master_seed, seed, rate_index, config.corruption),
    };
    let corrupted = corruption.apply(&clean)?;
    if config.normalize {
        normalize_columns(&corrupted)
    } else {
        Ok(corrupted)
    }
}

fn run_trial(config: &ExperimentConfig, run: &MethodRun, data: &DataMatrix, seed: u64) -> Result<(f64, f64, usize)> {
    let params = MethodParams {
        lambda: run.lambda,
        gamma: config.gamma,
        epsilon: config.epsilon.unwrap_or_else(|| default_epsilon(data.values())),
        sigma_mode: config.sigma_mode,
        sigma2: config.sigma2,
    };
    let opts = SolveOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        zero_diagonal: config.zero_diagonal.unwrap_or(run.method.default_zero_diagonal()),
        seed,
        ..SolveOptions::default()
    };
    let report = run.method.solve(data, &params, &opts)?;
    let labels = ncut_cluster(&build_affinity(&report.z), config.data.k, seed)?;
    let truth = data.labels().ok_or_else(|| Error::InvalidLabels("trial data has no labels".into()))?;
    let eval = evaluate(truth, labels.labels())?;
    Ok((eval.accuracy, eval.nmi, report.iterations))
}

/// Runs every `(method, rate, seed)` trial. Rows come back ordered by
/// method (config order), rate, then seed, whatever the execution order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let cells: Vec<(usize, u64)> = (0..config.rates.len())
        .flat_map(|r| config.seeds.iter().map(move |&s| (r, s)))
        .collect();
    // data once per (rate, seed); a failure here fails every method's trial
    let datasets: Vec<std::result::Result<DataMatrix, String>> = cells
        .par_iter()
        .map(|&(r, s)| trial_data(config, s, r).map_err(|e| e.to_string()))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..config.methods.len())
        .flat_map(|m| (0..cells.len()).map(move |c| (m, c)))
        .collect();
    let trials: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(m, c)| {
            let run = &config.methods[m];
            let (rate_index, seed) = cells[c];
            let start = Instant::now();
            let outcome = match &datasets[c] {
                Ok(data) => run_trial(config, run, data, seed).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            let wall_ms = if config.timing {
                start.elapsed().as_millis() as u64
            } else {
                0
            };
            let (accuracy, nmi, iterations, error) = match outcome {
                Ok((a, n, it)) => (a, n, it, None),
                Err(e) => (f64::NAN, f64::NAN, 0, Some(e)),
            };
            TrialRow {
                method: run.label.clone(),
                corruption: config.corruption,
                rate: config.rates[rate_index],
                seed,
                accuracy,
                nmi,
                iterations,
                wall_ms,
                error,
            }
        })
        .collect();
    let aggregates = aggregate(&trials);
    Ok(ExperimentResult { trials, aggregates })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `(method label, corruption, rate bits)`
type GroupKey = (String, CorruptionKind, u64);

/// Mean and sample standard deviation per `(method, corruption, rate)` over
/// the successful trials, in first-appearance order.
pub fn aggregate(trials: &[TrialRow]) -> Vec<AggregateRow> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for t in trials {
        let key = (t.method.clone(), t.corruption, t.rate.to_bits());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        if t.error.is_none() {
            entry.0.push(t.accuracy);
            entry.1.push(t.nmi);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (acc, nmi) = &groups[&key];
            let (mean_acc, std_acc) = mean_std(acc);
            let (mean_nmi, std_nmi) = mean_std(nmi);
            AggregateRow {
                method: key.0,
                corruption: key.1,
                rate: f64::from_bits(key.2),
                mean_acc,
                std_acc,
                mean_nmi,
                std_nmi,
            }
        })
        .collect()
}

pub fn trials_csv(rows: &[TrialRow]) -> String {
    let mut out = String::from("method,corruption,rate,seed,accuracy,nmi,iterations,wall_ms\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.corruption.name(),
            r.rate,
            r.seed,
            r.accuracy,
            r.nmi,
            r.iterations,
            r.wall_ms
        );
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("method,corruption,rate,mean_acc,std_acc,mean_nmi,std_nmi\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            r.corruption.name(),
            r.rate,
            r.mean_acc,
            r.std_acc,
            r.mean_nmi,
            r.std_nmi
        );
    }
    out
}

/// `[section]` headers and `key = value` lines; `#` starts a comment.
/// Keys are returned as `section.key`.
pub fn parse_sections(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("unterminated section header '{line}'"),
                })?
                .trim();
            section = name.to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        out.insert(full, value.trim().to_string());
    }
    Ok(out)
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::param(format!("{key}: cannot parse '{s}'")))
        })
        .collect()
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::param(format!("{key}: cannot parse '{value}'")))
}

pub fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        other => Err(Error::param(format!("{key}: expected on/off, got '{other}'"))),
    }
}

pub fn parse_shape(key: &str, value: &str) -> Result<(usize, usize)> {
    let (a, b) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::param(format!("{key}: expected HxW, got '{value}'")))?;
    let h = scalar::<usize>(key, a.trim())?;
    let w = scalar::<usize>(key, b.trim())?;
    if h == 0 || w == 0 {
        return Err(Error::param(format!("{key}: dimensions must be positive")));
    }
    Ok((h, w))
}

fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>> {
    // "a..b" is the half-open range, anything else a comma list
    if let Some((a, b)) = value.split_once("..") {
        let (a, b) = (scalar::<u64>(key, a.trim())?, scalar::<u64>(key, b.trim())?);
        return Ok((a..b).collect());
    }
    list(key, value)
}

const KNOWN_KEYS: &[&str] = &[
    "data.k",
    "data.sub_dim",
    "data.ambient",
    "data.per_cluster",
    "data.noise_std",
    "data.image_shape",
    "data.normalize",
    "experiment.master_seed",
    "experiment.seeds",
    "experiment.timing",
    "corruption.kind",
    "corruption.rates",
    "corruption.value_range",
    "corruption.block",
    "corruption.fill",
    "solver.methods",
    "solver.lambda",
    "solver.lambdas",
    "solver.gamma",
    "solver.epsilon",
    "solver.sigma_mode",
    "solver.sigma2",
    "solver.tol",
    "solver.max_iter",
    "solver.zero_diagonal",
    "output.trials",
    "output.aggregate",
];

/// Builds a config from parsed `section.key` pairs. Unknown keys are
/// rejected; `solver.lambda.<method>` overrides `solver.lambda` per method.
pub fn config_from_map(map: &BTreeMap<String, String>) -> Result<ExperimentConfig> {
    for key in map.keys() {
        let per_method = key
            .strip_prefix("solver.lambda.")
            .is_some_and(|m| m.parse::<Method>().is_ok());
        if !per_method && !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::param(format!("unknown config key '{key}'")));
        }
    }
    let get = |k: &str| map.get(k).map(String::as_str);
    let num = |k: &str, default: f64| -> Result<f64> { get(k).map_or(Ok(default), |v| scalar(k, v)) };
    let int = |k: &str, default: usize| -> Result<usize> { get(k).map_or(Ok(default), |v| scalar(k, v)) };

    let data = SubspaceSpec {
        k: int("data.k", 5)?,
        sub_dim: int("data.sub_dim", 4)?,
        ambient: int("data.ambient", 30)?,
        per_cluster: int("data.per_cluster", 20)?,
        noise_std: num("data.noise_std", 0.0)?,
        seed: 0,
    };
    let image_shape = get("data.image_shape").map(|v| parse_shape("data.image_shape", v)).transpose()?;
    let methods: Vec<Method> = match get("solver.methods") {
        Some(v) => list("solver.methods", v).map_err(|_| {
            Error::param(format!("solver.methods: unknown method in '{v}' (valid: {})", Method::valid_names()))
        })?,
        None => vec![Method::Lsr, Method::Cil2, Method::Rcil2],
    };
    let base_lambda = num("solver.lambda", 0.1)?;
    let lambdas: Option<Vec<f64>> = get("solver.lambdas").map(|v| list("solver.lambdas", v)).transpose()?;
    let mut runs = Vec::new();
    for m in methods {
        match &lambdas {
            Some(grid) if !grid.is_empty() => {
                for &l in grid {
                    runs.push(MethodRun {
                        method: m,
                        lambda: l,
                        label: format!("{m}@{l}"),
                    });
                }
            }
            _ => {
                let key = format!("solver.lambda.{m}");
                let lambda = get(&key).map_or(Ok(base_lambda), |v| scalar(&key, v))?;
                runs.push(MethodRun {
                    method: m,
                    lambda,
                    label: m.name().to_string(),
                });
            }
        }
    }
    let value_range = match get("corruption.value_range") {
        None | Some("data") => ValueRange::Data,
        Some(v) => {
            let pair: Vec<f64> = list("corruption.value_range", v)?;
            if pair.len() != 2 {
                return Err(Error::param("corruption.value_range: expected 'data' or 'lo, hi'"));
            }
            ValueRange::Fixed(pair[0], pair[1])
        }
    };
    let epsilon = match get("solver.epsilon") {
        None | Some("auto") => None,
        Some(v) => Some(scalar("solver.epsilon", v)?),
    };
    let zero_diagonal = match get("solver.zero_diagonal") {
        None | Some("default") => None,
        Some(v) => Some(parse_switch("solver.zero_diagonal", v)?),
    };
    let config = ExperimentConfig {
        data,
        image_shape,
        master_seed: get("experiment.master_seed").map_or(Ok(0), |v| scalar("experiment.master_seed", v))?,
        seeds: get("experiment.seeds").map_or(Ok((0..5).collect()), |v| parse_seeds("experiment.seeds", v))?,
        corruption: get("corruption.kind").map_or(Ok(CorruptionKind::PixelUniform), str::parse)?,
        rates: get("corruption.rates").map_or(Ok(vec![0.0]), |v| list("corruption.rates", v))?,
        value_range,
        block: get("corruption.block").map_or(Ok((1, 1)), |v| parse_shape("corruption.block", v))?,
        fill: get("corruption.fill").map_or(Ok(BlockFill::Checkerboard), str::parse)?,
        methods: runs,
        gamma: num("solver.gamma", 1.0)?,
        epsilon,
        sigma_mode: get("solver.sigma_mode").map_or(Ok(SigmaMode::Auto), str::parse)?,
        sigma2: num("solver.sigma2", 1.0)?,
        tol: num("solver.tol", 1e-6)?,
        max_iter: int("solver.max_iter", 100)?,
        zero_diagonal,
        normalize: get("data.normalize").map_or(Ok(true), |v| parse_switch("data.normalize", v))?,
        timing: get("experiment.timing").map_or(Ok(false), |v| parse_switch("experiment.timing", v))?,
        trials_path: get("output.trials").unwrap_or("trials.csv").to_string(),
        aggregate_path: get("output.aggregate").unwrap_or("aggregate.csv").to_string(),
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    config_from_map(&parse_sections(text)?)
}
