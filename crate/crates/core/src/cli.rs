//! The `tailop` command-line driver.
//!
//! Every subcommand takes flat `--key value` parameters. Parsed parameters are
//! collected into a [`RunConfig`], validated against the owning module, and
//! executed into a [`Report`] that is written as JSON or CSV.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when a numeric routine
//! fails or a verification does not pass.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Arg, ArgAction, Command as ClapCommand};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::copulas::{
    independence_copula, mo_complement_copula, mo_survival_copula, pareto4_survival_copula,
    survival_copula_of, Copula, MoParams,
};
use crate::error::Error;
use crate::margins::{mo_exponential_margin, pareto_margin, Margin};
use crate::matpow::TailIndexMatrix;
use crate::mrv::{
    default_t_grid, exponent_from_intensity, hidden_intensity_from_copula, marginal_trend,
    mo_pareto_intensity_oracle, pareto4_intensity_oracle, verify_nonstandard_rv,
    NonStandardRvModel, Pareto4Law, TailSet,
};
use crate::simulate::{
    empirical_copula, empirical_joint_survival, mo_joint_survival, sample_independence, sample_mo,
    sample_pareto4, to_copula_scale, SampleBatch,
};
use crate::taildep::{
    estimate_on_points, estimate_tail_order, mo_bl_operator, pareto4_lower_exponent,
    EstimatorConfig, LimitGrid, Side, Target,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "TAILOP_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Absolute tolerance of `verify-example4`.
pub const EXAMPLE4_TOL: f64 = 1e-10;
/// Relative tolerance of `verify-theorem2`.
pub const THEOREM2_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EvalCopula,
    TailEstimate,
    TailOrder,
    Simulate,
    VerifyTheorem1,
    VerifyTheorem2,
    VerifyExample4,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::EvalCopula,
        Command::TailEstimate,
        Command::TailOrder,
        Command::Simulate,
        Command::VerifyTheorem1,
        Command::VerifyTheorem2,
        Command::VerifyExample4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::EvalCopula => "eval-copula",
            Command::TailEstimate => "tail-estimate",
            Command::TailOrder => "tail-order",
            Command::Simulate => "simulate",
            Command::VerifyTheorem1 => "verify-theorem1",
            Command::VerifyTheorem2 => "verify-theorem2",
            Command::VerifyExample4 => "verify-example4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    fn about(&self) -> &'static str {
        match self {
            Command::EvalCopula => "Evaluate a copula and its joint survival function",
            Command::TailEstimate => "Estimate an operator tail dependence or exponent function",
            Command::TailOrder => "Estimate the tail order along a ray",
            Command::Simulate => "Draw a seeded sample and compare probes with closed forms",
            Command::VerifyTheorem1 => {
                "Check the regular-variation limit of the Marshall-Olkin/Pareto model"
            }
            Command::VerifyTheorem2 => {
                "Compare the exponent function recovered from the Pareto-IV intensity with a numerical estimate"
            }
            Command::VerifyExample4 => "Check the closed-form Pareto-IV exponent identity",
        }
    }

    /// Keys accepted by the command.
    pub fn keys(&self) -> &'static [&'static str] {
        const EVAL: &[&str] = &["copula", "l1", "l2", "l12", "lambda", "beta", "d", "u", "grid"];
        const ESTIMATE: &[&str] = &[
            "copula", "l1", "l2", "l12", "lambda", "beta", "d", "A", "w", "grid", "wmin", "wmax",
            "side", "target", "u-max", "ratio", "count", "window", "expect",
        ];
        const ORDER: &[&str] = &[
            "copula", "l1", "l2", "l12", "lambda", "beta", "d", "w", "grid", "wmin", "wmax",
            "side", "u-max", "ratio", "count", "window",
        ];
        const SIMULATE: &[&str] = &[
            "family", "l1", "l2", "l12", "lambda", "beta", "gamma", "d", "n", "seed",
            "copula-scale", "probe", "samples",
        ];
        const THEOREM1: &[&str] = &["l1", "l2", "l12", "alpha", "w", "grid", "wmin", "wmax", "t-max"];
        const THEOREM2: &[&str] = &[
            "lambda", "beta", "gamma", "w", "grid", "wmin", "wmax", "u-max", "ratio", "count",
            "window",
        ];
        const EXAMPLE4: &[&str] = &["lambda", "beta", "gamma", "w", "grid", "wmin", "wmax"];
        match self {
            Command::EvalCopula => EVAL,
            Command::TailEstimate => ESTIMATE,
            Command::TailOrder => ORDER,
            Command::Simulate => SIMULATE,
            Command::VerifyTheorem1 => THEOREM1,
            Command::VerifyTheorem2 => THEOREM2,
            Command::VerifyExample4 => EXAMPLE4,
        }
    }

    fn help(key: &str) -> &'static str {
        match key {
            "copula" => "mo | mo-complement | pareto4 | independence",
            "family" => "mo | pareto4 | independence",
            "l1" | "l2" | "l12" => "Marshall-Olkin shock rate",
            "lambda" => "Pareto-IV common-shock rate",
            "beta" => "Pareto-IV frailty shape",
            "gamma" => "Pareto-IV exponents, e.g. 1,2",
            "alpha" => "Pareto margin indices, e.g. 1,1",
            "d" => "dimension of the independence copula",
            "A" => "matrix index, diag:a,b,... or full:row-major entries",
            "w" => "single evaluation point, e.g. 4,1",
            "u" => "copula argument, e.g. 0.25,0.5",
            "grid" => "evaluation grid NxM",
            "wmin" | "wmax" => "range of the geometric w grid",
            "side" => "lower | upper",
            "target" => "cdf | exponent",
            "u-max" => "largest level of the limit grid",
            "ratio" => "ratio of the geometric limit grid",
            "count" => "number of limit-grid points",
            "window" => "number of trailing grid points used in the fit",
            "expect" => "diagnostic name that counts as the requested result",
            "n" => "sample size",
            "seed" => "64-bit seed",
            "copula-scale" => "map the sample to the copula scale (true | false)",
            "probe" => "probe point, e.g. 1,1",
            "samples" => "also write the sample to this CSV file",
            "t-max" => "largest t of the verification grid",
            _ => "",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: BTreeMap<String, String>,
    /// `None` writes to standard output.
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation { key: String, message: String },
    Numeric(String),
    Io(String),
}

impl CliError {
    fn invalid(key: &str, message: impl fmt::Display) -> Self {
        CliError::Validation { key: key.to_string(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Numeric(_) | CliError::Io(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation { key, message } => write!(f, "invalid --{key}: {message}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

type CliResult<T> = std::result::Result<T, CliError>;
type ClosedForm = Box<dyn Fn(&[f64]) -> f64>;

impl RunConfig {
    pub fn new(command: Command, params: BTreeMap<String, String>) -> CliResult<Self> {
        let allowed = command.keys();
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::invalid(k, format!("unknown key for {command}")));
        }
        Ok(Self { command, params, out: None, format: Format::Json })
    }

    pub fn with_output(mut self, out: Option<PathBuf>, format: Format) -> Self {
        self.out = out;
        self.format = format;
        self
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        self.get(key).map_or(Ok(default), |s| parse_f64(key, s))
    }

    fn usize_or(&self, key: &str, default: usize) -> CliResult<usize> {
        self.get(key).map_or(Ok(default), |s| {
            s.trim().parse().map_err(|_| CliError::invalid(key, format!("`{s}` is not a nonnegative integer")))
        })
    }

    fn list_or(&self, key: &str, default: &[f64]) -> CliResult<Vec<f64>> {
        self.get(key).map_or(Ok(default.to_vec()), |s| parse_list(key, s))
    }
}

fn parse_f64(key: &str, s: &str) -> CliResult<f64> {
    let v: f64 = s.trim().parse().map_err(|_| CliError::invalid(key, format!("`{s}` is not a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(key, "must be finite"))
    }
}

fn parse_list(key: &str, s: &str) -> CliResult<Vec<f64>> {
    s.split(',').map(|x| parse_f64(key, x)).collect()
}

fn parse_matrix(key: &str, s: &str) -> CliResult<TailIndexMatrix> {
    let bad = |e: Error| CliError::invalid(key, e);
    if let Some(rest) = s.strip_prefix("diag:") {
        TailIndexMatrix::diagonal(&parse_list(key, rest)?).map_err(bad)
    } else if let Some(rest) = s.strip_prefix("full:") {
        let v = parse_list(key, rest)?;
        let d = (v.len() as f64).sqrt().round() as usize;
        if d * d != v.len() {
            return Err(CliError::invalid(key, format!("{} entries do not form a square matrix", v.len())));
        }
        TailIndexMatrix::from_row_major(d, &v).map_err(bad)
    } else {
        Err(CliError::invalid(key, "expected diag:a,b,... or full:a11,a12,..."))
    }
}

fn parse_grid(key: &str, s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::invalid(key, format!("`{s}` is not of the form NxM"));
    let (a, b) = s.split_once('x').ok_or_else(bad)?;
    let (n, m): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if n == 0 || m == 0 {
        return Err(CliError::invalid(key, "grid sizes must be positive"));
    }
    Ok((n, m))
}

fn parse_bool(key: &str, s: &str) -> CliResult<bool> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CliError::invalid(key, format!("`{other}` is not a boolean"))),
    }
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

/// Evaluation points: `--w` for a single point, else a geometric `--grid`
/// over `[wmin, wmax]²` in lexicographic index order.
fn w_points(cfg: &RunConfig, default_grid: (usize, usize), range: (f64, f64)) -> CliResult<Vec<Vec<f64>>> {
    if let Some(w) = cfg.get("w") {
        if cfg.get("grid").is_some() {
            return Err(CliError::invalid("grid", "cannot be combined with --w"));
        }
        return Ok(vec![parse_list("w", w)?]);
    }
    let (n, m) = cfg.get("grid").map_or(Ok(default_grid), |s| parse_grid("grid", s))?;
    let lo = cfg.f64_or("wmin", range.0)?;
    let hi = cfg.f64_or("wmax", range.1)?;
    if !(lo > 0.0) {
        return Err(CliError::invalid("wmin", "must be positive"));
    }
    if !(hi >= lo) {
        return Err(CliError::invalid("wmax", "must be at least wmin"));
    }
    let (a, b) = (geometric(lo, hi, n), geometric(lo, hi, m));
    Ok(a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect())
}

fn mo_params(cfg: &RunConfig) -> CliResult<MoParams> {
    let (l1, l2, l12) = (cfg.f64_or("l1", 1.0)?, cfg.f64_or("l2", 1.0)?, cfg.f64_or("l12", 1.0)?);
    for (k, v) in [("l1", l1), ("l2", l2), ("l12", l12)] {
        if !(v > 0.0) {
            return Err(CliError::invalid(k, "must be > 0"));
        }
    }
    MoParams::new(l1, l2, l12).map_err(|e| CliError::invalid("l1", e))
}

fn positive(cfg: &RunConfig, key: &str, default: f64) -> CliResult<f64> {
    let v = cfg.f64_or(key, default)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::invalid(key, "must be > 0"))
    }
}

fn positive_pair(cfg: &RunConfig, key: &str, default: [f64; 2]) -> CliResult<[f64; 2]> {
    let v = cfg.list_or(key, &default)?;
    if v.len() != 2 {
        return Err(CliError::invalid(key, format!("expected 2 values, got {}", v.len())));
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(CliError::invalid(key, "values must be > 0"));
    }
    Ok([v[0], v[1]])
}

fn build_copula(cfg: &RunConfig) -> CliResult<Arc<dyn Copula>> {
    let family = cfg.get("copula").ok_or_else(|| CliError::invalid("copula", "is required"))?;
    let c: Arc<dyn Copula> = match family {
        "mo" => Arc::new(mo_survival_copula(mo_params(cfg)?)),
        "mo-complement" => Arc::new(mo_complement_copula(mo_params(cfg)?)),
        "pareto4" => Arc::new(
            pareto4_survival_copula(positive(cfg, "lambda", 1.0)?, positive(cfg, "beta", 1.0)?)
                .map_err(|e| CliError::invalid("lambda", e))?,
        ),
        "independence" => {
            let d = cfg.usize_or("d", 2)?;
            Arc::new(independence_copula(d).map_err(|e| CliError::invalid("d", e))?)
        }
        other => return Err(CliError::invalid("copula", format!("unknown family `{other}`"))),
    };
    Ok(c)
}

fn estimator_config(cfg: &RunConfig) -> CliResult<EstimatorConfig> {
    let base = EstimatorConfig::default();
    let grid = LimitGrid::new(
        cfg.f64_or("u-max", base.grid.u_max())?,
        cfg.f64_or("ratio", base.grid.ratio())?,
        cfg.usize_or("count", base.grid.count())?,
    )
    .map_err(|e| CliError::invalid("u-max", e))?;
    let config = EstimatorConfig { grid, window: cfg.usize_or("window", base.window)?, ..base };
    config.validate().map_err(|e| CliError::invalid("window", e))?;
    Ok(config)
}

fn side(cfg: &RunConfig) -> CliResult<Side> {
    match cfg.get("side").unwrap_or("lower") {
        "lower" => Ok(Side::Lower),
        "upper" => Ok(Side::Upper),
        other => Err(CliError::invalid("side", format!("`{other}` is not lower or upper"))),
    }
}

fn target(cfg: &RunConfig) -> CliResult<Target> {
    match cfg.get("target").unwrap_or("cdf") {
        "cdf" => Ok(Target::Cdf),
        "exponent" => Ok(Target::Exponent),
        other => Err(CliError::invalid("target", format!("`{other}` is not cdf or exponent"))),
    }
}

/// JSON number with 17 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        let s = format!("{x:.16e}");
        Value::Number(serde_json::from_str(&s).expect("formatted float parses as a JSON number"))
    } else {
        Value::String(x.to_string())
    }
}

fn obj<const N: usize>(entries: [(&str, Value); N]) -> Map<String, Value> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn coords(prefix: &str, x: &[f64]) -> Map<String, Value> {
    x.iter().enumerate().map(|(i, &v)| (format!("{prefix}{}", i + 1), num(v))).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultRow {
    pub inputs: Map<String, Value>,
    pub outputs: Map<String, Value>,
    pub diagnostics: Map<String, Value>,
}

impl ResultRow {
    fn failed(inputs: Map<String, Value>, e: &Error) -> Self {
        Self {
            inputs,
            outputs: Map::new(),
            diagnostics: obj([
                ("error", Value::String(e.diagnostic_name().into())),
                ("message", Value::String(e.to_string())),
            ]),
        }
    }

    fn error_name(&self) -> Option<&str> {
        self.diagnostics.get("error").and_then(Value::as_str)
    }

    fn passed(&self) -> Option<bool> {
        self.diagnostics.get("pass").and_then(Value::as_bool)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Command,
    pub params: BTreeMap<String, String>,
    pub results: Vec<ResultRow>,
    pub version: String,
}

impl Report {
    /// Exit code implied by the rows: numeric failure if a row carries an
    /// error other than `expected`, or a verification row did not pass.
    pub fn exit_code(&self, expected: Option<&str>) -> i32 {
        let bad = self.results.iter().any(|r| {
            r.error_name().is_some_and(|e| Some(e) != expected) || r.passed() == Some(false)
        });
        if bad {
            EXIT_NUMERIC
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// One row per result with `inputs.*`, `outputs.*` and `diagnostics.*`
    /// columns; the header is the sorted union of keys.
    pub fn to_csv(&self) -> CliResult<String> {
        fn sections(r: &ResultRow) -> [(&'static str, &Map<String, Value>); 3] {
            [("inputs", &r.inputs), ("outputs", &r.outputs), ("diagnostics", &r.diagnostics)]
        }
        let mut header: Vec<String> = Vec::new();
        for rank in 0..3 {
            let mut keys: Vec<String> = self
                .results
                .iter()
                .flat_map(|r| {
                    let (name, m) = sections(r)[rank];
                    m.keys().map(move |k| format!("{name}.{k}"))
                })
                .collect();
            keys.sort();
            keys.dedup();
            header.extend(keys);
        }
        let mut out = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        out.write_record(&header).map_err(io)?;
        for r in &self.results {
            let mut flat: BTreeMap<String, &Value> = BTreeMap::new();
            for (name, m) in sections(r) {
                flat.extend(m.iter().map(|(k, v)| (format!("{name}.{k}"), v)));
            }
            let row: Vec<String> = header.iter().map(|h| flat.get(h).map_or(String::new(), |v| cell(v))).collect();
            out.write_record(&row).map_err(io)?;
        }
        let bytes = out.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn numeric(e: Error) -> CliError {
    CliError::Numeric(format!("{}: {e}", e.diagnostic_name()))
}

fn eval_copula(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let c = build_copula(cfg)?;
    let points: Vec<Vec<f64>> = if let Some(u) = cfg.get("u") {
        if cfg.get("grid").is_some() {
            return Err(CliError::invalid("grid", "cannot be combined with --u"));
        }
        vec![parse_list("u", u)?]
    } else {
        if c.dim() != 2 {
            return Err(CliError::invalid("grid", "grids need a bivariate copula; pass --u"));
        }
        let (n, m) = cfg.get("grid").map_or(Ok((5, 5)), |s| parse_grid("grid", s))?;
        let a: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let b: Vec<f64> = (1..=m).map(|k| k as f64 / (m + 1) as f64).collect();
        a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect()
    };
    let mut rows = Vec::with_capacity(points.len());
    for u in points {
        if u.len() != c.dim() {
            return Err(CliError::invalid("u", format!("expected {} coordinates, got {}", c.dim(), u.len())));
        }
        if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(CliError::invalid("u", "coordinates must lie in [0, 1]"));
        }
        let cdf = c.cdf(&u).map_err(numeric)?;
        let surv = c.joint_survival(&u).map_err(numeric)?;
        rows.push(ResultRow {
            inputs: coords("u", &u),
            outputs: obj([("cdf", num(cdf)), ("joint_survival", num(surv))]),
            diagnostics: Map::new(),
        });
    }
    Ok(rows)
}

fn tail_estimate(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let c = build_copula(cfg)?;
    let a = match cfg.get("A") {
        Some(s) => parse_matrix("A", s)?,
        None => TailIndexMatrix::identity(c.dim()).map_err(|e| CliError::invalid("A", e))?,
    };
    if a.dim() != c.dim() {
        return Err(CliError::invalid("A", format!("dimension {} does not match the copula", a.dim())));
    }
    let config = estimator_config(cfg)?;
    let (side, target) = (side(cfg)?, target(cfg)?);
    let points = w_points(cfg, (5, 5), (0.25, 4.0))?;
    check_points("w", &points, c.dim())?;
    let estimates = estimate_on_points(c.as_ref(), &a, &points, &config, side, target);
    Ok(points
        .iter()
        .zip(estimates)
        .map(|(w, est)| match est {
            Ok(e) => ResultRow {
                inputs: coords("w", w),
                outputs: obj([
                    ("value", num(e.value)),
                    ("slope", num(e.slope)),
                    ("intercept", num(e.intercept)),
                    ("last_ratio", num(e.last_ratio)),
                ]),
                diagnostics: obj([
                    ("verdict", serde_json::to_value(e.verdict).expect("verdict serialises")),
                    ("converged", Value::Bool(e.converged)),
                    ("window_start", Value::from(e.window.0)),
                    ("window_end", Value::from(e.window.1)),
                ]),
            },
            Err(err) => ResultRow::failed(coords("w", w), &err),
        })
        .collect())
}

fn check_points(key: &str, points: &[Vec<f64>], d: usize) -> CliResult<()> {
    for p in points {
        if p.len() != d {
            return Err(CliError::invalid(key, format!("expected {d} coordinates, got {}", p.len())));
        }
        if p.iter().any(|&x| x < 0.0) {
            return Err(CliError::invalid(key, "coordinates must be nonnegative"));
        }
    }
    Ok(())
}

fn tail_order(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let c = build_copula(cfg)?;
    let config = estimator_config(cfg)?;
    let side = side(cfg)?;
    let points = w_points(cfg, (1, 1), (1.0, 1.0))?;
    check_points("w", &points, c.dim())?;
    Ok(points
        .iter()
        .map(|w| match estimate_tail_order(c.as_ref(), w, &config, side) {
            Ok(e) => ResultRow {
                inputs: coords("w", w),
                outputs: obj([("kappa", num(e.slope)), ("value", num(e.value))]),
                diagnostics: obj([
                    ("verdict", serde_json::to_value(e.verdict).expect("verdict serialises")),
                    ("converged", Value::Bool(e.converged)),
                ]),
            },
            Err(err) => ResultRow::failed(coords("w", w), &err),
        })
        .collect())
}

fn simulate(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let n = cfg.usize_or("n", 100_000)?;
    if n == 0 {
        return Err(CliError::invalid("n", "must be at least 1"));
    }
    let seed: u64 = cfg.get("seed").map_or(Ok(0), |s| {
        s.trim().parse().map_err(|_| CliError::invalid("seed", format!("`{s}` is not a 64-bit integer")))
    })?;
    let on_copula_scale = cfg.get("copula-scale").map_or(Ok(false), |s| parse_bool("copula-scale", s))?;
    let family = cfg.get("family").unwrap_or("mo");
    let (batch, closed): (SampleBatch, ClosedForm) = match family {
        "mo" => {
            let p = mo_params(cfg)?;
            let batch = sample_mo(&p, n, seed).map_err(numeric)?;
            if on_copula_scale {
                let [r1, r2] = p.marginal_rates();
                let m1 = mo_exponential_margin(r1).map_err(numeric)?;
                let m2 = mo_exponential_margin(r2).map_err(numeric)?;
                let v = to_copula_scale(&batch, &[&m1 as &dyn Margin, &m2]).map_err(numeric)?;
                let chat = mo_survival_copula(p);
                (v, Box::new(move |u: &[f64]| chat.cdf(u).unwrap_or(f64::NAN)))
            } else {
                (batch, Box::new(move |t: &[f64]| mo_joint_survival(&p, [t[0], t[1]])))
            }
        }
        "pareto4" => {
            let (lambda, beta) = (positive(cfg, "lambda", 1.0)?, positive(cfg, "beta", 1.0)?);
            let g = positive_pair(cfg, "gamma", [1.0, 1.0])?;
            let law = Pareto4Law::new(lambda, beta, g).map_err(numeric)?;
            let batch = sample_pareto4(lambda, beta, g[0], g[1], n, seed).map_err(numeric)?;
            if on_copula_scale {
                let (m1, m2) = (law.margin(0), law.margin(1));
                let v = to_copula_scale(&batch, &[&m1 as &dyn Margin, &m2]).map_err(numeric)?;
                let chat = pareto4_survival_copula(lambda, beta).map_err(numeric)?;
                (v, Box::new(move |u: &[f64]| chat.cdf(u).unwrap_or(f64::NAN)))
            } else {
                (batch, Box::new(move |x: &[f64]| law.joint_survival([x[0], x[1]])))
            }
        }
        "independence" => {
            let d = cfg.usize_or("d", 2)?;
            let batch = sample_independence(d, n, seed).map_err(|e| CliError::invalid("d", e))?;
            (batch, Box::new(|u: &[f64]| u.iter().map(|x| x.clamp(0.0, 1.0)).product()))
        }
        other => return Err(CliError::invalid("family", format!("unknown family `{other}`"))),
    };
    let copula_like = on_copula_scale || family == "independence";
    let default_probe = match (family, copula_like) {
        (_, true) => vec![0.25; batch.dim()],
        ("mo", false) => vec![1.0, 1.0],
        _ => vec![0.5, 0.5],
    };
    let probe = cfg.list_or("probe", &default_probe)?;
    if probe.len() != batch.dim() {
        return Err(CliError::invalid("probe", format!("expected {} coordinates", batch.dim())));
    }
    if let Some(path) = cfg.get("samples") {
        batch.save_csv(std::path::Path::new(path)).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let p = if copula_like {
        empirical_copula(&batch, &probe)
    } else {
        empirical_joint_survival(&batch, &probe)
    }
    .map_err(numeric)?;
    let expected = closed(&probe);
    let mut inputs = coords("x", &probe);
    inputs.insert("n".into(), Value::from(n));
    inputs.insert("seed".into(), Value::from(seed));
    Ok(vec![ResultRow {
        inputs,
        outputs: obj([
            ("estimate", num(p.estimate)),
            ("std_error", num(p.std_error)),
            ("closed_form", num(expected)),
        ]),
        diagnostics: obj([
            ("event", Value::String(if copula_like { "cdf" } else { "joint_survival" }.into())),
            ("within_3se", Value::Bool(p.within(expected, 3.0))),
        ]),
    }])
}

fn verify_theorem1(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let p = mo_params(cfg)?;
    let alphas = positive_pair(cfg, "alpha", [1.0, 1.0])?;
    let t_max = positive(cfg, "t-max", 1e8)?;
    if t_max < 1e3 {
        return Err(CliError::invalid("t-max", "must be at least 1e3"));
    }
    let t_grid: Vec<f64> = default_t_grid().into_iter().filter(|&t| t < t_max).chain([t_max]).collect();
    let points = w_points(cfg, (3, 3), (0.5, 2.0))?;
    check_points("w", &points, 2)?;
    if points.iter().flatten().any(|&x| x == 0.0) {
        return Err(CliError::invalid("w", "points must lie in the interior cone"));
    }
    let margins = vec![
        pareto_margin(alphas[0]).map_err(|e| CliError::invalid("alpha", e))?,
        pareto_margin(alphas[1]).map_err(|e| CliError::invalid("alpha", e))?,
    ];
    let model = NonStandardRvModel::new(Arc::new(mo_complement_copula(p)), margins, p.betas().to_vec())
        .map_err(numeric)?;
    let mu = hidden_intensity_from_copula(&model, move |x| mo_bl_operator(x, &p)).map_err(numeric)?;
    let oracle = mo_pareto_intensity_oracle(&p, alphas).map_err(numeric)?;
    let report = verify_nonstandard_rv(
        |t, w| model.exceedance_all(t, w),
        |t| model.reference_scaling(t),
        &oracle,
        TailSet::UpperOrthant,
        &t_grid,
        &points,
    )
    .map_err(numeric)?;
    let mut rows = Vec::with_capacity(points.len());
    for row in &report.rows {
        let composed = mu.upper_orthant(&row.w).map_err(numeric)?;
        let mut diagnostics = obj([
            ("pass", Value::Bool(row.pass)),
            ("support", Value::String(report.label.clone())),
        ]);
        for i in 0..2 {
            let (trend, slope) = marginal_trend(&model, i, row.w[i], &t_grid, 0.05).map_err(numeric)?;
            diagnostics.insert(
                format!("marginal_trend{}", i + 1),
                serde_json::to_value(trend).expect("trend serialises"),
            );
            diagnostics.insert(format!("marginal_slope{}", i + 1), num(slope));
        }
        rows.push(ResultRow {
            inputs: coords("w", &row.w),
            outputs: obj([
                ("limit", num(row.limit)),
                ("composed", num(composed)),
                ("ratio", num(row.final_ratio)),
                ("relative_deviation", num(row.relative_deviation)),
            ]),
            diagnostics,
        });
    }
    Ok(rows)
}

fn pareto4_setup(cfg: &RunConfig) -> CliResult<(Pareto4Law, crate::mrv::OperatorTailFunction)> {
    let (lambda, beta) = (positive(cfg, "lambda", 1.0)?, positive(cfg, "beta", 1.0)?);
    let g = positive_pair(cfg, "gamma", [1.0, 1.0])?;
    let law = Pareto4Law::new(lambda, beta, g).map_err(numeric)?;
    let mu = pareto4_intensity_oracle(lambda, beta, g[0], g[1]).map_err(numeric)?;
    let (m1, m2) = (law.margin(0), law.margin(1));
    let f = exponent_from_intensity(
        &mu,
        &[m1.alpha(), m2.alpha()],
        &[m1.slowly_varying_limit(), m2.slowly_varying_limit()],
    )
    .map_err(numeric)?;
    Ok((law, f))
}

fn interior_points(cfg: &RunConfig) -> CliResult<Vec<Vec<f64>>> {
    let points = w_points(cfg, (5, 5), (0.25, 4.0))?;
    check_points("w", &points, 2)?;
    if points.iter().flatten().any(|&x| x == 0.0) {
        return Err(CliError::invalid("w", "coordinates must be positive"));
    }
    Ok(points)
}

fn verify_example4(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let (law, f) = pareto4_setup(cfg)?;
    let points = interior_points(cfg)?;
    let mut rows = Vec::with_capacity(points.len());
    for w in &points {
        let closed = pareto4_lower_exponent(law.lambda, law.beta, w).map_err(numeric)?;
        let composed = f.eval(w).map_err(numeric)?;
        let dev = (closed - composed).abs();
        rows.push(ResultRow {
            inputs: coords("w", w),
            outputs: obj([
                ("closed_form", num(closed)),
                ("composed", num(composed)),
                ("abs_deviation", num(dev)),
            ]),
            diagnostics: obj([("pass", Value::Bool(dev <= EXAMPLE4_TOL))]),
        });
    }
    Ok(rows)
}

fn verify_theorem2(cfg: &RunConfig) -> CliResult<Vec<ResultRow>> {
    let (law, f) = pareto4_setup(cfg)?;
    let chat = pareto4_survival_copula(law.lambda, law.beta).map_err(numeric)?;
    let c = survival_copula_of(chat).map_err(numeric)?;
    let config = estimator_config(cfg)?;
    let points = interior_points(cfg)?;
    let estimates = estimate_on_points(&c, f.index(), &points, &config, Side::Upper, Target::Exponent);
    let mut rows = Vec::with_capacity(points.len());
    for (w, est) in points.iter().zip(estimates) {
        let composed = f.eval(w).map_err(numeric)?;
        match est {
            Ok(e) => {
                let dev = ((e.value - composed) / composed).abs();
                rows.push(ResultRow {
                    inputs: coords("w", w),
                    outputs: obj([
                        ("composed", num(composed)),
                        ("estimate", num(e.value)),
                        ("slope", num(e.slope)),
                        ("relative_deviation", num(dev)),
                    ]),
                    diagnostics: obj([
                        ("pass", Value::Bool(dev <= THEOREM2_TOL)),
                        ("verdict", serde_json::to_value(e.verdict).expect("verdict serialises")),
                    ]),
                });
            }
            Err(err) => rows.push(ResultRow::failed(coords("w", w), &err)),
        }
    }
    Ok(rows)
}

/// Execute a validated configuration. Numeric failures of single grid points
/// are reported in their rows; only whole-command failures are errors.
pub fn execute(cfg: &RunConfig) -> CliResult<Report> {
    let results = match cfg.command {
        Command::EvalCopula => eval_copula(cfg)?,
        Command::TailEstimate => tail_estimate(cfg)?,
        Command::TailOrder => tail_order(cfg)?,
        Command::Simulate => simulate(cfg)?,
        Command::VerifyTheorem1 => verify_theorem1(cfg)?,
        Command::VerifyTheorem2 => verify_theorem2(cfg)?,
        Command::VerifyExample4 => verify_example4(cfg)?,
    };
    Ok(Report { command: cfg.command, params: cfg.params.clone(), results, version: VERSION.to_string() })
}

/// Serialise `report` in `format`, to `out` or standard output.
pub fn emit_report(report: &Report, format: Format, out: Option<&std::path::Path>) -> CliResult<()> {
    if report.results.is_empty() {
        return Err(CliError::invalid("grid", "no results to write"));
    }
    let text = match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv()?,
    };
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Execute and emit; returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let outcome = execute(cfg).and_then(|report| {
        emit_report(&report, cfg.format, cfg.out.as_deref())?;
        Ok(report.exit_code(cfg.get("expect")))
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tailop: {e}");
            e.exit_code()
        }
    }
}

pub fn command_line() -> ClapCommand {
    let mut app = ClapCommand::new("tailop")
        .version(VERSION)
        .about("Operator tail dependence of copulas")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in Command::ALL {
        let mut sub = ClapCommand::new(cmd.name())
            .about(cmd.about())
            .arg(Arg::new("out").long("out").short('o').value_name("PATH").help("output file (default: stdout)"))
            .arg(
                Arg::new("format")
                    .long("format")
                    .value_parser(["json", "csv"])
                    .default_value("json")
                    .help("output format"),
            );
        for &key in cmd.keys() {
            sub = sub.arg(
                Arg::new(key)
                    .long(key)
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true)
                    .help(Command::help(key)),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

/// Parse command-line arguments into a [`RunConfig`].
pub fn parse_args<I, T>(args: I) -> std::result::Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = command_line().try_get_matches_from(args)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = Command::from_name(name).expect("registered subcommand");
    let mut params = BTreeMap::new();
    for &key in command.keys() {
        if let Some(v) = sub.get_one::<String>(key) {
            params.insert(key.to_string(), v.clone());
        }
    }
    let format = match sub.get_one::<String>("format").map(String::as_str) {
        Some("csv") => Format::Csv,
        _ => Format::Json,
    };
    let out = sub.get_one::<String>("out").map(PathBuf::from);
    let cfg = RunConfig::new(command, params).expect("clap only admits registered keys");
    Ok(cfg.with_output(out, format))
}

/// Configure the global thread pool from `TAILOP_THREADS` (0 or unset = auto).
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::invalid(THREADS_ENV, format!("`{raw}` is not a thread count")))?;
    if n > 0 {
        // A pool that was already built keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if let Err(e) = configure_threads() {
        eprintln!("tailop: {e}");
        return e.exit_code();
    }
    match parse_args(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            code
        }
    }
}
