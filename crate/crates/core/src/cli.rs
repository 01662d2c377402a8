//! Batch front end: TOML run configs, flag overrides, and CSV or JSON
//! reports.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 pre-asymptotic guard, 4 oracle failure.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aggregation::{self, ScaleMixture};
use crate::asymptotics::ProductModel;
use crate::dist::{make_builtin, Distribution, Family, ScalingSpec, TailClass};
use crate::error::Error;
use crate::oracle::{self, Formula, OracleMethod};
use crate::risk::{self, RiskModel};
use crate::subexp::{self, geometric_grid};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PRE_ASYMPTOTIC: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Io(_) => EXIT_IO,
            Self::Model(e) => match e {
                Error::PreAsymptotic { .. } => EXIT_PRE_ASYMPTOTIC,
                Error::Quadrature { .. }
                | Error::GridResolution(_)
                | Error::MissingDensity(_)
                | Error::Underflow { .. }
                | Error::Rarity { .. } => EXIT_ORACLE,
                _ => EXIT_CONFIG,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A family name with parameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DistBlock {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub factors: Vec<DistBlock>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub method: Option<String>,
    pub n_samples: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn expand(&self, n: usize, name: &str) -> CliResult<Vec<f64>> {
        match self {
            Self::One(x) => Ok(vec![*x; n]),
            Self::Many(v) if v.len() == n => Ok(v.clone()),
            Self::Many(v) => Err(config_err(format!("{name} has {} entries, horizon is {n}", v.len()))),
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Self::One(_) => None,
            Self::Many(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RiskBlock {
    pub upsilon: Option<DistBlock>,
    pub pi: Option<OneOrMany>,
    pub delta: Option<OneOrMany>,
    pub horizon: Option<usize>,
    pub subexponential: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiagBlock {
    pub criterion: Option<String>,
    pub lambda: Option<f64>,
    pub y: Option<f64>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureBlock {
    pub kind: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<PathBuf>,
    pub format: Option<String>,
}

/// Contents of a run config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub model: Option<ModelBlock>,
    pub formula: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub mc: Option<McBlock>,
    pub risk: Option<RiskBlock>,
    pub diag: Option<DiagBlock>,
    pub mixture: Option<MixtureBlock>,
    pub output: Option<OutputBlock>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Parser)]
#[command(name = "contraction", version, about = "Tail asymptotics of random contractions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact versus asymptotic tail of a product R·S₁⋯Sₙ along a grid.
    Tail(TailArgs),
    /// Ruin probabilities: Monte Carlo, term sum and asymptotic formula.
    Ruin(RuinArgs),
    /// Subexponentiality and asymptotic independence diagnostics.
    Diag(DiagArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Run config (TOML)
    #[arg(long, visible_alias = "config")]
    pub model: Option<PathBuf>,
    /// Distribution family of the risk R
    #[arg(long)]
    pub family: Option<String>,
    /// Family parameter, repeatable
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    pub params: Vec<(String, f64)>,
    /// Shorthand for --param gamma=VALUE
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated grid of thresholds
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_samples: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TailArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scaling factor as NAME or NAME:KEY=VALUE,...; repeatable, replaces
    /// the factors of the config
    #[arg(long = "factor")]
    pub factors: Vec<String>,
    /// breiman, gumbel_product or weibull_product
    #[arg(long)]
    pub formula: Option<String>,
    /// quadrature or montecarlo
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RuinArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Family of the stock discount factors
    #[arg(long)]
    pub upsilon: Option<String>,
    #[arg(long = "upsilon-param", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    pub upsilon_params: Vec<(String, f64)>,
    #[arg(long)]
    pub pi: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Assert that the net-loss law is subexponential
    #[arg(long)]
    pub subexponential: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DiagArgs {
    /// mitra_resnick, tony, goldie_resnick, long_tail, conv_square,
    /// dominated or indep
    pub criterion: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Shift for the long-tail ratio
    #[arg(long)]
    pub y: Option<f64>,
    /// Scale factor for the Goldie–Resnick ratio
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// spherical or dirichlet
    #[arg(long)]
    pub mixture: Option<String>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
}

fn parse_key_value(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Parses `NAME` or `NAME:KEY=VALUE,KEY=VALUE`.
pub fn parse_dist_spec(s: &str) -> CliResult<DistBlock> {
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = BTreeMap::new();
    for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = parse_key_value(kv).map_err(config_err)?;
        params.insert(k, v);
    }
    Ok(DistBlock {
        family: name.trim().to_string(),
        params,
    })
}

fn merge_common(cfg: &mut RunConfig, c: &CommonArgs) {
    if let Some(f) = &c.family {
        let model = cfg.model.get_or_insert_with(Default::default);
        if &model.family != f {
            model.params.clear();
        }
        model.family = f.clone();
    }
    if !c.params.is_empty() || c.gamma.is_some() {
        let model = cfg.model.get_or_insert_with(Default::default);
        model.params.extend(c.params.iter().cloned());
        if let Some(g) = c.gamma {
            model.params.insert("gamma".into(), g);
        }
    }
    if let Some(g) = &c.grid {
        cfg.grid = Some(g.clone());
    }
    if c.seed.is_some() || c.n_samples.is_some() {
        let mc = cfg.mc.get_or_insert_with(Default::default);
        mc.seed = c.seed.or(mc.seed);
        mc.n_samples = c.n_samples.or(mc.n_samples);
    }
    if c.output.is_some() || c.format.is_some() {
        let out = cfg.output.get_or_insert_with(Default::default);
        out.path = c.output.clone().or(out.path.take());
        out.format = c.format.clone().or(out.format.take());
    }
}

/// Loads the config named by the flags (if any) and applies the flags on
/// top of it.
pub fn effective_config(cmd: &Command) -> CliResult<RunConfig> {
    let common = match cmd {
        Command::Tail(a) => &a.common,
        Command::Ruin(a) => &a.common,
        Command::Diag(a) => &a.common,
    };
    let mut cfg = match &common.model {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    merge_common(&mut cfg, common);
    let name = match cmd {
        Command::Tail(a) => {
            if !a.factors.is_empty() {
                let factors = a.factors.iter().map(|f| parse_dist_spec(f)).collect::<CliResult<Vec<_>>>()?;
                cfg.model.get_or_insert_with(Default::default).factors = factors;
            }
            if a.formula.is_some() {
                cfg.formula = a.formula.clone();
            }
            if let Some(m) = &a.method {
                cfg.mc.get_or_insert_with(Default::default).method = Some(m.clone());
            }
            "tail"
        }
        Command::Ruin(a) => {
            let risk = cfg.risk.get_or_insert_with(Default::default);
            if let Some(u) = &a.upsilon {
                risk.upsilon = Some(DistBlock {
                    family: u.clone(),
                    params: BTreeMap::new(),
                });
            }
            if !a.upsilon_params.is_empty() {
                let y = risk.upsilon.get_or_insert_with(Default::default);
                y.params.extend(a.upsilon_params.iter().cloned());
            }
            if let Some(p) = a.pi {
                risk.pi = Some(OneOrMany::One(p));
            }
            if let Some(d) = a.delta {
                risk.delta = Some(OneOrMany::One(d));
            }
            if a.horizon.is_some() {
                risk.horizon = a.horizon;
            }
            if a.subexponential {
                risk.subexponential = Some(true);
            }
            "ruin"
        }
        Command::Diag(a) => {
            let diag = cfg.diag.get_or_insert_with(Default::default);
            if a.criterion.is_some() {
                diag.criterion = a.criterion.clone();
            }
            diag.lambda = a.lambda.or(diag.lambda);
            diag.y = a.y.or(diag.y);
            diag.t = a.t.or(diag.t);
            if a.rho.is_some() || a.mixture.is_some() || a.a.is_some() || a.b.is_some() {
                let mix = cfg.mixture.get_or_insert_with(Default::default);
                mix.rho = a.rho.or(mix.rho);
                mix.kind = a.mixture.clone().or(mix.kind.take());
                mix.a = a.a.or(mix.a);
                mix.b = a.b.or(mix.b);
            }
            "diag"
        }
    };
    if let Some(c) = &cfg.command {
        if c != name {
            return Err(config_err(format!("config is for `{c}`, not `{name}`")));
        }
    }
    cfg.command = Some(name.to_string());
    Ok(cfg)
}

fn build_dist(b: &DistBlock) -> CliResult<Distribution> {
    Ok(make_builtin(&Family::from_name_params(&b.family, &b.params)?)?)
}

/// Scaling factor by name: uniform, beta, arcsine, unit or degenerate.
pub fn build_scaling(b: &DistBlock) -> CliResult<ScalingSpec> {
    let get = |k: &str| {
        b.params
            .get(k)
            .copied()
            .ok_or_else(|| config_err(format!("factor `{}` needs parameter `{k}`", b.family)))
    };
    match b.family.to_ascii_lowercase().as_str() {
        "uniform" | "uniform01" => Ok(ScalingSpec::uniform()),
        "beta" => Ok(ScalingSpec::beta(get("alpha")?, get("beta")?)?),
        "arcsine" | "spherical" => Ok(ScalingSpec::arcsine()),
        "unit" => Ok(ScalingSpec::unit()),
        "degenerate" => Ok(ScalingSpec::degenerate(get("value")?)?),
        other => Err(Error::UnknownFamily(other.to_string()).into()),
    }
}

fn model_block(cfg: &RunConfig) -> CliResult<&ModelBlock> {
    cfg.model.as_ref().ok_or_else(|| config_err("missing [model] block"))
}

fn risk_dist(cfg: &RunConfig) -> CliResult<Distribution> {
    let m = model_block(cfg)?;
    build_dist(&DistBlock {
        family: m.family.clone(),
        params: m.params.clone(),
    })
}

fn grid_or(cfg: &RunConfig, default: impl FnOnce() -> Vec<f64>) -> CliResult<Vec<f64>> {
    let g = cfg.grid.clone().unwrap_or_else(default);
    crate::error::check_grid(&g, 1)?;
    Ok(g)
}

fn required_grid(cfg: &RunConfig) -> CliResult<Vec<f64>> {
    let g = cfg.grid.clone().ok_or_else(|| config_err("missing grid"))?;
    crate::error::check_grid(&g, 1)?;
    Ok(g)
}

/// Sample count and seed; a seed is mandatory whenever sampling is requested.
fn mc_params(cfg: &RunConfig, default_n: u64) -> CliResult<(u64, u64)> {
    let mc = cfg.mc.clone().unwrap_or_default();
    let seed = mc.seed.ok_or_else(|| config_err("Monte Carlo requested but no seed given"))?;
    Ok((mc.n_samples.unwrap_or(default_n), seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn format_of(cfg: &RunConfig) -> CliResult<Format> {
    match cfg.output.as_ref().and_then(|o| o.format.as_deref()) {
        None | Some("csv") => Ok(Format::Csv),
        Some("json") | Some("structured-text") => Ok(Format::Json),
        Some(other) => Err(config_err(format!("unknown output format `{other}`"))),
    }
}

/// A finished report. `failure` carries a guard or oracle error that made
/// the report incomplete; it is raised after the report is written.
#[derive(Debug)]
pub struct Rendered {
    pub body: String,
    pub summary: String,
    pub warnings: Vec<String>,
    pub failure: Option<CliError>,
}

#[derive(Serialize)]
struct JsonReport<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    formula_id: Vec<&'static str>,
    seed: Option<u64>,
    summary: &'a str,
    config: &'a RunConfig,
    result: T,
}

struct Meta<'a> {
    cfg: &'a RunConfig,
    formula_id: Vec<&'static str>,
    seed: Option<u64>,
    summary: String,
}

impl Meta<'_> {
    fn csv_preamble(&self) -> String {
        let mut s = format!("# contraction {}\n# command: {}\n", env!("CARGO_PKG_VERSION"), self.cfg.command.as_deref().unwrap_or(""));
        for id in &self.formula_id {
            s.push_str(&format!("# formula_id: {id}\n"));
        }
        if let Some(seed) = self.seed {
            s.push_str(&format!("# seed: {seed}\n"));
        }
        s.push_str(&format!("# summary: {}\n", self.summary));
        s
    }

    fn render<T: Serialize>(self, format: Format, csv_body: impl FnOnce() -> CliResult<String>, result: T) -> CliResult<Rendered> {
        let body = match format {
            Format::Csv => self.csv_preamble() + &csv_body()?,
            Format::Json => {
                let report = JsonReport {
                    tool: "contraction",
                    version: env!("CARGO_PKG_VERSION"),
                    command: self.cfg.command.as_deref().unwrap_or(""),
                    formula_id: self.formula_id.clone(),
                    seed: self.seed,
                    summary: &self.summary,
                    config: self.cfg,
                    result,
                };
                serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n"
            }
        };
        Ok(Rendered {
            body,
            summary: self.summary,
            warnings: Vec::new(),
            failure: None,
        })
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> crate::Result<()>) -> CliResult<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
}

fn default_formula(r: &Distribution) -> Formula {
    match r.tail_class() {
        TailClass::Frechet { .. } => Formula::Breiman,
        TailClass::Gumbel { .. } => Formula::GumbelProduct,
        TailClass::Weibull { .. } => Formula::WeibullProduct,
    }
}

pub fn cmd_tail(cfg: &RunConfig) -> CliResult<Rendered> {
    let block = model_block(cfg)?;
    if block.factors.is_empty() {
        return Err(config_err("model needs at least one factor"));
    }
    let r = risk_dist(cfg)?;
    let factors = block.factors.iter().map(build_scaling).collect::<CliResult<Vec<_>>>()?;
    let m = ProductModel::new(r, factors)?;
    let grid = required_grid(cfg)?;
    let formula = match &cfg.formula {
        Some(name) => Formula::from_name(name).map_err(|_| config_err(format!("unknown formula `{name}`")))?,
        None => default_formula(&m.r),
    };
    let method_name = cfg.mc.as_ref().and_then(|m| m.method.clone()).unwrap_or_else(|| "quadrature".into());
    let (method, seed) = match method_name.as_str() {
        "quadrature" => (OracleMethod::Quadrature, None),
        "montecarlo" | "mc" => {
            let (n_samples, seed) = mc_params(cfg, 1_000_000)?;
            (OracleMethod::MonteCarlo { n_samples, seed }, Some(seed))
        }
        other => return Err(config_err(format!("unknown oracle method `{other}`"))),
    };
    let report = oracle::convergence_report(&m, formula, &grid, method)?;
    let failure = report.gaps.first().map(|g| CliError::Model(g.error.clone()));
    let summary = format!(
        "{} points, {} gaps, trend {}",
        grid.len(),
        report.gaps.len(),
        if report.trend_ok { "ok" } else { "not established" }
    );
    let meta = Meta {
        cfg,
        formula_id: vec![report.formula_id],
        seed,
        summary,
    };
    let mut out = meta.render(format_of(cfg)?, || csv_string(|b| report.write_csv(b)), &report)?;
    out.failure = failure;
    Ok(out)
}

/// One row of the ruin report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuinRow {
    pub u0: f64,
    pub n: usize,
    pub mc: Option<f64>,
    pub term_sum: Option<f64>,
    pub asymptotic: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub notes: Vec<String>,
}

fn build_risk_model(cfg: &RunConfig) -> CliResult<RiskModel> {
    let net_loss = risk_dist(cfg)?;
    let block = cfg.risk.clone().ok_or_else(|| config_err("missing [risk] block"))?;
    let upsilon = build_dist(block.upsilon.as_ref().ok_or_else(|| config_err("risk block needs upsilon"))?)?;
    let pi = block.pi.ok_or_else(|| config_err("risk block needs pi"))?;
    let delta = block.delta.ok_or_else(|| config_err("risk block needs delta"))?;
    let n = block.horizon.or(pi.len()).or(delta.len()).unwrap_or(1);
    if n == 0 {
        return Err(config_err("horizon must be at least 1"));
    }
    Ok(RiskModel::new(
        net_loss,
        vec![upsilon; n],
        pi.expand(n, "pi")?,
        delta.expand(n, "delta")?,
        block.subexponential.unwrap_or(false),
    )?)
}

/// Errors that leave a cell empty instead of failing the run.
fn is_soft(e: &Error) -> bool {
    matches!(e, Error::Domain(_) | Error::NotAsserted(_) | Error::Rarity { .. })
}

pub fn cmd_ruin(cfg: &RunConfig) -> CliResult<Rendered> {
    let model = build_risk_model(cfg)?;
    let grid = required_grid(cfg)?;
    let mc = match cfg.mc.as_ref().and_then(|m| m.n_samples) {
        Some(_) => Some(mc_params(cfg, 0)?),
        None => None,
    };
    let mut failure: Option<CliError> = None;
    let mut rows = Vec::with_capacity(grid.len());
    for &u0 in &grid {
        let mut row = RuinRow {
            u0,
            n: model.horizon(),
            mc: None,
            term_sum: None,
            asymptotic: None,
            ci_lo: None,
            ci_hi: None,
            notes: Vec::new(),
        };
        let mut keep = |label: &str, r: crate::Result<risk::RuinResult>, row: &mut RuinRow| -> Option<risk::RuinResult> {
            match r {
                Ok(v) => Some(v),
                Err(e) => {
                    row.notes.push(format!("{label}: {e}"));
                    if !is_soft(&e) && failure.is_none() {
                        failure = Some(CliError::Model(e));
                    }
                    None
                }
            }
        };
        if let Some((n_paths, seed)) = mc {
            if let Some(v) = keep("mc", risk::ruin_prob_mc(&model, u0, n_paths, seed), &mut row) {
                row.mc = Some(v.value);
                if let Some((lo, hi)) = v.interval {
                    row.ci_lo = Some(lo);
                    row.ci_hi = Some(hi);
                }
            }
        }
        row.term_sum = keep("term_sum", risk::ruin_term_sum(&model, u0), &mut row).map(|v| v.value);
        row.asymptotic = keep("asymptotic", risk::ruin_asymptotic(&model, u0), &mut row).map(|v| v.value);
        rows.push(row);
    }
    let notes: usize = rows.iter().map(|r| r.notes.len()).sum();
    let summary = format!("{} rows, {} notes", rows.len(), notes);
    let mut ids = vec![risk::RUIN_TERM_SUM, risk::RUIN_ASYMPTOTIC];
    if mc.is_some() {
        ids.insert(0, risk::RUIN_MC);
    }
    let meta = Meta {
        cfg,
        formula_id: ids,
        seed: mc.map(|m| m.1),
        summary,
    };
    let mut out = meta.render(format_of(cfg)?, || ruin_csv(&rows), &rows)?;
    out.warnings = rows
        .iter()
        .flat_map(|r| r.notes.iter().map(move |n| format!("u0 = {}: {n}", r.u0)))
        .collect();
    out.failure = failure;
    Ok(out)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn ruin_csv(rows: &[RuinRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["u0", "n", "mc", "term_sum", "asymptotic", "ci_lo", "ci_hi"]).map_err(io)?;
    for r in rows {
        w.write_record([
            format!("{}", r.u0),
            r.n.to_string(),
            cell(r.mc),
            cell(r.term_sum),
            cell(r.asymptotic),
            cell(r.ci_lo),
            cell(r.ci_hi),
        ])
        .map_err(io)?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
}

pub const CRITERIA: [&str; 7] = ["mitra_resnick", "tony", "goldie_resnick", "long_tail", "conv_square", "dominated", "indep"];

fn default_diag_grid() -> Vec<f64> {
    geometric_grid(1e2, 1e6, 6)
}

pub fn cmd_diag(cfg: &RunConfig) -> CliResult<Rendered> {
    let diag = cfg.diag.clone().unwrap_or_default();
    let criterion = diag.criterion.clone().ok_or_else(|| config_err("missing criterion"))?;
    if !CRITERIA.contains(&criterion.as_str()) {
        return Err(config_err(format!("unknown criterion `{criterion}` (expected one of {})", CRITERIA.join(", "))));
    }
    let format = format_of(cfg)?;
    if criterion == "indep" {
        return diag_indep(cfg, format);
    }
    let d = risk_dist(cfg)?;
    let lambda = diag.lambda.unwrap_or(1.0);
    let trajectory = match criterion.as_str() {
        "mitra_resnick" => subexp::mitra_resnick_trajectory(&d, lambda, &grid_or(cfg, default_diag_grid)?)?,
        "tony" => subexp::tony_integral_trajectory(&d, lambda, &grid_or(cfg, default_diag_grid)?)?,
        "dominated" => subexp::dominated_variation_trajectory(&d, lambda, &grid_or(cfg, default_diag_grid)?)?,
        "long_tail" => subexp::long_tail_trajectory(&d, diag.y.unwrap_or(1.0), &grid_or(cfg, default_diag_grid)?)?,
        "conv_square" => subexp::conv_square_ratio(&d, &grid_or(cfg, || geometric_grid(1e1, 1e4, 5))?)?,
        "goldie_resnick" => {
            let aux = d.tail_class().aux_scale()?.clone();
            let grid = grid_or(cfg, || geometric_grid(1e2, 1e8, 7))?;
            let g = subexp::goldie_resnick_check(&|u| aux.eval(u), diag.t.unwrap_or(2.0), &grid)?;
            let summary = format!("holds: {}, verdict: {}", g.holds, g.trajectory.verdict.as_str());
            let meta = Meta {
                cfg,
                formula_id: vec![g.trajectory.criterion_id],
                seed: None,
                summary,
            };
            return meta.render(format, || csv_string(|b| g.trajectory.write_csv(b)), &g);
        }
        _ => unreachable!("criterion checked above"),
    };
    let summary = format!("verdict: {}", trajectory.verdict.as_str());
    let meta = Meta {
        cfg,
        formula_id: vec![trajectory.criterion_id],
        seed: None,
        summary,
    };
    meta.render(format, || csv_string(|b| trajectory.write_csv(b)), &trajectory)
}

fn diag_indep(cfg: &RunConfig, format: Format) -> CliResult<Rendered> {
    let r = risk_dist(cfg)?;
    let mix_block = cfg.mixture.clone().unwrap_or_default();
    let mix = match mix_block.kind.as_deref().unwrap_or("spherical") {
        "spherical" => ScaleMixture::spherical(r)?,
        "dirichlet" => {
            let a = mix_block.a.ok_or_else(|| config_err("dirichlet mixture needs a"))?;
            let b = mix_block.b.ok_or_else(|| config_err("dirichlet mixture needs b"))?;
            ScaleMixture::dirichlet(r, a, b)?
        }
        other => return Err(config_err(format!("unknown mixture `{other}`"))),
    };
    let rho = mix_block.rho.unwrap_or(0.5);
    let grid = grid_or(cfg, || vec![1e2, 1e3, 1e4])?;
    let (n_samples, seed) = mc_params(cfg, 10_000_000)?;
    let d = aggregation::asymptotic_independence_diagnostic(&mix, rho, &grid, n_samples, seed)?;
    let summary = format!(
        "verdict: {}, decreasing: {}, spread increasing: {}",
        d.verdict.as_str(),
        d.decreasing,
        d.spread_increasing
    );
    let meta = Meta {
        cfg,
        formula_id: vec!["joint exceedance: n P(U1 > b1(n), U(rho) > b2(n)) -> 0"],
        seed: Some(seed),
        summary,
    };
    let csv = || -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(["n", "b1", "b2", "spread", "joint", "joint_half_width", "joint_count"]).map_err(io)?;
        for j in 0..d.n_grid.len() {
            w.write_record([
                format!("{}", d.n_grid[j]),
                format!("{:e}", d.b1[j]),
                format!("{:e}", d.b2[j]),
                format!("{:e}", d.spread[j]),
                format!("{:e}", d.joint[j]),
                format!("{:e}", d.joint_half_width[j]),
                d.joint_counts[j].to_string(),
            ])
            .map_err(io)?;
        }
        let buf = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))
    };
    meta.render(format, csv, &d)
}

/// Builds the effective config and runs the command without writing.
pub fn execute(cmd: &Command) -> CliResult<(RunConfig, Rendered)> {
    let cfg = effective_config(cmd)?;
    let out = match cmd {
        Command::Tail(_) => cmd_tail(&cfg)?,
        Command::Ruin(_) => cmd_ruin(&cfg)?,
        Command::Diag(_) => cmd_diag(&cfg)?,
    };
    Ok((cfg, out))
}

/// Runs a parsed command line, writing the report to the configured path
/// or to stdout.
pub fn run(cli: &Cli) -> CliResult<()> {
    let (cfg, out) = execute(&cli.command)?;
    match cfg.output.as_ref().and_then(|o| o.path.as_ref()) {
        Some(p) => std::fs::write(p, &out.body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => print!("{}", out.body),
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{}", out.summary);
    match out.failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("contraction").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn dist_spec_parsing() {
        let b = parse_dist_spec("beta:alpha=2,beta=3").unwrap();
        assert_eq!(b.family, "beta");
        assert_eq!(b.params["alpha"], 2.0);
        assert_eq!(parse_dist_spec("uniform").unwrap().params.len(), 0);
        assert!(parse_dist_spec("beta:alpha").is_err());
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "command = \"tail\"\ngrid = [1.0, 2.0]\n[model]\nfamily = \"pareto\"\nparams = { gamma = 2.0 }\nfactors = [{ family = \"uniform\" }]\n",
        )
        .unwrap();
        let cli = parse(&["tail", "--model", path.to_str().unwrap(), "--grid", "2,10,100", "--param", "gamma=3"]);
        let cfg = effective_config(&cli.command).unwrap();
        assert_eq!(cfg.grid, Some(vec![2.0, 10.0, 100.0]));
        assert_eq!(cfg.model.as_ref().unwrap().params["gamma"], 3.0);
        assert_eq!(cfg.model.unwrap().factors.len(), 1);
    }

    #[test]
    fn command_mismatch_is_a_config_error() {
        let cfg = RunConfig::from_toml("command = \"ruin\"").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
        let cli = parse(&["tail", "--config", path.to_str().unwrap()]);
        assert_eq!(execute(&cli.command).unwrap_err().exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Model(Error::PreAsymptotic { u: 1.0, eta: 0.5, bound: 1.0 }).exit_code(), 3);
        assert_eq!(CliError::Model(Error::GridResolution(1.0)).exit_code(), 4);
        assert_eq!(CliError::Model(Error::BadGrid { min_len: 1 }).exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    }

    #[test]
    fn scaling_factor_names() {
        let beta = DistBlock {
            family: "beta".into(),
            params: [("alpha".to_string(), 2.0), ("beta".to_string(), 1.0)].into(),
        };
        assert_eq!(build_scaling(&beta).unwrap().alpha, 2.0);
        let missing = DistBlock {
            family: "beta".into(),
            params: BTreeMap::new(),
        };
        assert_eq!(build_scaling(&missing).unwrap_err().exit_code(), EXIT_CONFIG);
        let unknown = DistBlock {
            family: "cauchy".into(),
            params: BTreeMap::new(),
        };
        assert!(build_scaling(&unknown).is_err());
    }
}
