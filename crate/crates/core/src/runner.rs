//! Configuration-driven scenario runner.
//!
//! A run executes each requested engine over the time grid, writes one CSV
//! per engine (`observable,t,value,stderr`), compares every engine pair on
//! the observables they share, and writes the report plus a manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::distributional::{
    appendix_c_comb, comb_from_moments, comb_to_distribution, pair_exponential, pair_polynomial,
};
use crate::error::Error;
use crate::genfunc::{
    closed_pure_death, closed_triplet_equal, closed_triplet_two_beta, eval_gf, gf_from_distribution,
    pde_solve_annihilation, GFGrid, Polynomial,
};
use crate::io::{fmt_f64, parse_f64, CsvTable};
use crate::moments::{solve_closed, solve_truncated, FactorialMoments};
use crate::reaction::{
    build_generator, default_n_max, factorial_moments, master_trajectory, poisson_tail, sample_initial, ssa_snapshots,
    CountDistribution, InitialKind, MasterOptions, ReactionChannel, ReactionSpec,
};
use crate::sde::{
    ensemble_complex_moments, fixed, simulate_appendix_d, simulate_reciprocal_snapshots, simulate_sqbessel,
    simulate_tamed_em_snapshots, ComplexEnsemble, SdeConfig,
};

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "IMAGNOISE_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("engine {engine} failed: {source}")]
    Engine {
        engine: String,
        #[source]
        source: Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config { .. } => 2,
            RunError::Engine { .. } | RunError::Io { .. } => 3,
        }
    }
}

fn config_err(pointer: &str, message: impl Into<String>) -> RunError {
    RunError::Config {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Master,
    Ssa,
    MomentsClosed,
    MomentsTruncated,
    SdeEm,
    SdeReciprocal,
    Sqbessel,
    AppendixD,
    GenfuncClosed,
    GenfuncPde,
    Distributional,
}

impl Engine {
    pub const ALL: [Engine; 11] = [
        Engine::Master,
        Engine::Ssa,
        Engine::MomentsClosed,
        Engine::MomentsTruncated,
        Engine::SdeEm,
        Engine::SdeReciprocal,
        Engine::Sqbessel,
        Engine::AppendixD,
        Engine::GenfuncClosed,
        Engine::GenfuncPde,
        Engine::Distributional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Master => "master",
            Engine::Ssa => "ssa",
            Engine::MomentsClosed => "moments_closed",
            Engine::MomentsTruncated => "moments_truncated",
            Engine::SdeEm => "sde_em",
            Engine::SdeReciprocal => "sde_reciprocal",
            Engine::Sqbessel => "sqbessel",
            Engine::AppendixD => "appendix_d",
            Engine::GenfuncClosed => "genfunc_closed",
            Engine::GenfuncPde => "genfunc_pde",
            Engine::Distributional => "distributional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub j: u32,
    pub l: u32,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Deterministic { n0: usize },
    Poisson { mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservableConfig {
    /// `P_0..P_max_n` are reported.
    pub max_n: usize,
    /// `M_1..M_m_max` are reported.
    pub m_max: usize,
    /// Points at which `G(x)` is reported.
    pub x: Vec<f64>,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self {
            max_n: 6,
            m_max: 3,
            x: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Master-equation and moment integrator tolerance.
    pub ode: f64,
    /// Absolute part of every comparison tolerance.
    pub abs: f64,
    /// Relative part, scaled by `max(|a|, |b|)`.
    pub rel: f64,
    /// Multiplier of the summed standard errors.
    pub k_se: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: 1e-10,
            abs: 1e-6,
            rel: 0.0,
            k_se: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsaConfig {
    pub n_paths: usize,
}

impl Default for SsaConfig {
    fn default() -> Self {
        Self { n_paths: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    pub dt: f64,
    pub n_paths: usize,
    pub blowup_threshold: f64,
    pub shared_noise: bool,
}

impl Default for SdeSection {
    fn default() -> Self {
        let d = SdeConfig::default();
        Self {
            dt: d.dt,
            n_paths: d.n_paths,
            blowup_threshold: d.blowup_threshold,
            shared_noise: d.shared_noise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterSection {
    /// Truncation; chosen automatically when absent.
    pub n_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    /// Closure order of the truncated moment system.
    pub closure_order: usize,
}

impl Default for MomentsSection {
    fn default() -> Self {
        Self { closure_order: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub nodes: usize,
    pub dt: f64,
    pub chebyshev: bool,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            nodes: 513,
            dt: 1e-3,
            chebyshev: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub channels: Vec<ChannelConfig>,
    pub initial: InitialConfig,
    pub engines: Vec<Engine>,
    pub times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub observables: ObservableConfig,
    #[serde(default)]
    pub master: MasterSection,
    #[serde(default)]
    pub ssa: SsaConfig,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub moments: MomentsSection,
    #[serde(default)]
    pub pde: PdeSection,
    /// Engine pairs to compare; all pairs when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(Engine, Engine)>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("imagnoise-out")
}

/// Parses a config, reporting schema violations with a JSON pointer.
pub fn parse_config(text: &str) -> Result<RunConfig, RunError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        config_err(&pointer, e.inner().to_string())
    })?;
    validate_config(&cfg)?;
    Ok(cfg)
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn validate_config(cfg: &RunConfig) -> Result<(), RunError> {
    if cfg.engines.is_empty() {
        return Err(config_err("/engines", "at least one engine is required"));
    }
    if cfg.times.is_empty() {
        return Err(config_err("/times", "time grid is empty"));
    }
    if cfg.times[0] != 0.0 {
        return Err(config_err("/times/0", "time grid must start at 0"));
    }
    if let Some(i) = cfg.times.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return Err(config_err(
            &format!("/times/{}", i + 1),
            "time grid must be strictly increasing",
        ));
    }
    if cfg.channels.is_empty() {
        return Err(config_err("/channels", "at least one channel is required"));
    }
    for (i, c) in cfg.channels.iter().enumerate() {
        ReactionChannel::new(c.j, c.l, c.rate).map_err(|e| config_err(&format!("/channels/{i}"), e.to_string()))?;
    }
    spec_of(cfg).map_err(|e| config_err("/channels", e.to_string()))?;
    if let InitialConfig::Poisson { mu } = cfg.initial {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(config_err("/initial/mu", "Poisson mean must be positive"));
        }
    }
    let t = &cfg.tolerances;
    for (name, v) in [("ode", t.ode), ("abs", t.abs), ("rel", t.rel), ("k_se", t.k_se)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(config_err(&format!("/tolerances/{name}"), "must be finite and >= 0"));
        }
    }
    if !(t.ode > 0.0) {
        return Err(config_err("/tolerances/ode", "must be positive"));
    }
    if cfg.ssa.n_paths == 0 {
        return Err(config_err("/ssa/n_paths", "must be at least 1"));
    }
    let sde = SdeConfig {
        dt: cfg.sde.dt,
        n_paths: cfg.sde.n_paths,
        blowup_threshold: cfg.sde.blowup_threshold,
        ..SdeConfig::default()
    };
    sde.validate().map_err(|e| config_err("/sde", e.to_string()))?;
    if cfg.moments.closure_order < 2 {
        return Err(config_err("/moments/closure_order", "must be at least 2"));
    }
    if cfg.pde.nodes < 66 {
        return Err(config_err("/pde/nodes", "need at least 64 interior nodes"));
    }
    if !(cfg.pde.dt > 0.0) {
        return Err(config_err("/pde/dt", "must be positive"));
    }
    if let Some(i) = cfg.observables.x.iter().position(|x| !(-1.0..=1.0).contains(x)) {
        return Err(config_err(&format!("/observables/x/{i}"), "x must lie in [-1, 1]"));
    }
    if let Some(pairs) = &cfg.pairs {
        for (i, (a, b)) in pairs.iter().enumerate() {
            if a == b || !cfg.engines.contains(a) || !cfg.engines.contains(b) {
                return Err(config_err(
                    &format!("/pairs/{i}"),
                    "pair must name two different configured engines",
                ));
            }
        }
    }
    Ok(())
}

fn spec_of(cfg: &RunConfig) -> crate::Result<ReactionSpec> {
    let channels = cfg
        .channels
        .iter()
        .map(|c| ReactionChannel::new(c.j, c.l, c.rate))
        .collect::<crate::Result<Vec<_>>>()?;
    ReactionSpec::new(channels)
}

/// One row of an engine's output series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub observable: String,
    pub t: f64,
    pub value: f64,
    /// Standard error, or a numerical error indicator; zero for exact values.
    pub stderr: f64,
}

pub fn series_to_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from("observable,t,value,stderr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.observable,
            fmt_f64(r.t),
            fmt_f64(r.value),
            fmt_f64(r.stderr)
        ));
    }
    out
}

pub fn series_from_csv(text: &str) -> crate::Result<Vec<SeriesRow>> {
    let table = CsvTable::parse(text)?;
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| Error::InvalidArgument(format!("CSV lacks column {name}")))
    };
    let (o, t, v) = (col("observable")?, col("t")?, col("value")?);
    let se = table.column("stderr");
    table
        .rows
        .iter()
        .map(|r| {
            Ok(SeriesRow {
                observable: r[o].clone(),
                t: parse_f64(&r[t])?.ok_or_else(|| Error::InvalidArgument("empty t".into()))?,
                value: parse_f64(&r[v])?.ok_or_else(|| Error::InvalidArgument("empty value".into()))?,
                stderr: match se {
                    Some(i) => parse_f64(&r[i])?.unwrap_or(0.0),
                    None => 0.0,
                },
            })
        })
        .collect()
}

/// Comparison tolerance `abs + rel * max(|a|, |b|) + k_se * (se_a + se_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToleranceRule {
    pub abs: f64,
    pub rel: f64,
    pub k_se: f64,
}

impl ToleranceRule {
    pub fn absolute(tol: f64) -> Self {
        Self {
            abs: tol,
            rel: 0.0,
            k_se: 0.0,
        }
    }

    pub fn relative(tol: f64) -> Self {
        Self {
            abs: 0.0,
            rel: tol,
            k_se: 0.0,
        }
    }

    pub fn k_se(k: f64) -> Self {
        Self {
            abs: 0.0,
            rel: 0.0,
            k_se: k,
        }
    }

    pub fn tolerance(&self, a: &SeriesRow, b: &SeriesRow) -> f64 {
        self.abs + self.rel * a.value.abs().max(b.value.abs()) + self.k_se * (a.stderr + b.stderr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub observable: String,
    pub t: f64,
    pub engine_a: String,
    pub engine_b: String,
    pub value_a: f64,
    pub value_b: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CompareReport {
    /// Compared pairs with the number of shared rows.
    pub pairs: Vec<PairSummary>,
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub engine_a: String,
    pub engine_b: String,
    pub compared: usize,
    pub failed: usize,
}

impl CompareReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("observable,t,engine_a,engine_b,value_a,value_b,difference,tolerance,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.observable,
                fmt_f64(r.t),
                r.engine_a,
                r.engine_b,
                fmt_f64(r.value_a),
                fmt_f64(r.value_b),
                fmt_f64(r.difference),
                fmt_f64(r.tolerance),
                r.pass
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn merge(&mut self, other: CompareReport) {
        self.pairs.extend(other.pairs);
        self.rows.extend(other.rows);
    }
}

fn key(r: &SeriesRow) -> (String, u64) {
    (r.observable.clone(), r.t.to_bits())
}

/// Compares two series row by row. Both must cover the same
/// `(observable, t)` keys; a row passes when `|a - b| <= tolerance`.
pub fn compare(a: &[SeriesRow], b: &[SeriesRow], rule: ToleranceRule) -> crate::Result<CompareReport> {
    let ka: BTreeSet<_> = a.iter().map(key).collect();
    let kb: BTreeSet<_> = b.iter().map(key).collect();
    if ka != kb {
        let missing = ka.symmetric_difference(&kb).next().expect("sets differ");
        return Err(Error::Alignment(format!(
            "series differ at observable {} t={}",
            missing.0,
            f64::from_bits(missing.1)
        )));
    }
    Ok(compare_named(a, b, "a", "b", rule))
}

/// Compares on the keys common to both series.
fn compare_named(a: &[SeriesRow], b: &[SeriesRow], name_a: &str, name_b: &str, rule: ToleranceRule) -> CompareReport {
    let index: BTreeMap<_, _> = b.iter().map(|r| (key(r), r)).collect();
    let mut rows = Vec::new();
    for ra in a {
        if let Some(rb) = index.get(&key(ra)) {
            let difference = ra.value - rb.value;
            let tolerance = rule.tolerance(ra, rb);
            rows.push(CompareRow {
                observable: ra.observable.clone(),
                t: ra.t,
                engine_a: name_a.to_string(),
                engine_b: name_b.to_string(),
                value_a: ra.value,
                value_b: rb.value,
                difference,
                tolerance,
                pass: difference.abs() <= tolerance,
            });
        }
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    CompareReport {
        pairs: vec![PairSummary {
            engine_a: name_a.to_string(),
            engine_b: name_b.to_string(),
            compared: rows.len(),
            failed,
        }],
        rows,
    }
}

/// What one engine produced.
#[derive(Debug, Clone)]
pub struct EngineOutput {
    pub engine: Engine,
    pub rows: Vec<SeriesRow>,
    /// Engine-specific diagnostics recorded in the manifest.
    pub info: Value,
}

pub struct RunOutcome {
    pub dir: PathBuf,
    pub outputs: Vec<EngineOutput>,
    pub report: CompareReport,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            1
        }
    }
}

/// Resolves the output directory: the environment override wins.
pub fn output_root(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output_dir.clone(),
    }
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    while out.contains("--") {
        out = out.replace("--", "-");
    }
    let out = out.trim_matches('-').to_string();
    if out.is_empty() {
        "scenario".into()
    } else {
        out
    }
}

/// Executes every engine and the comparisons without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<(Vec<EngineOutput>, CompareReport), RunError> {
    validate_config(cfg)?;
    let mut engines = cfg.engines.clone();
    engines.dedup();
    let outputs = engines
        .par_iter()
        .map(|&e| {
            run_engine(cfg, e)
                .map(|(rows, info)| EngineOutput { engine: e, rows, info })
                .map_err(|source| RunError::Engine {
                    engine: e.name().to_string(),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let pairs: Vec<(Engine, Engine)> = match &cfg.pairs {
        Some(p) => p.clone(),
        None => {
            let mut v = Vec::new();
            for (i, a) in engines.iter().enumerate() {
                for b in &engines[i + 1..] {
                    v.push((*a, *b));
                }
            }
            v
        }
    };
    let rule = ToleranceRule {
        abs: cfg.tolerances.abs,
        rel: cfg.tolerances.rel,
        k_se: cfg.tolerances.k_se,
    };
    let find = |e: Engine| outputs.iter().find(|o| o.engine == e).expect("engine ran");
    let mut report = CompareReport::default();
    for (a, b) in pairs {
        report.merge(compare_named(&find(a).rows, &find(b).rows, a.name(), b.name(), rule));
    }
    Ok((outputs, report))
}

/// Runs the scenario and writes its artifacts under the output root.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let (outputs, report) = execute(cfg)?;
    let dir = output_root(cfg).join(slug(&cfg.scenario));
    let io = |path: &Path, source| RunError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| io(&p, e))
    };
    for o in &outputs {
        write(&format!("{}.csv", o.engine.name()), series_to_csv(&o.rows))?;
    }
    write("report.csv", report.to_csv())?;
    write("report.json", report.to_json())?;
    write("manifest.json", manifest(cfg, &outputs, &report))?;
    Ok(RunOutcome { dir, outputs, report })
}

fn manifest(cfg: &RunConfig, outputs: &[EngineOutput], report: &CompareReport) -> String {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let engines: Vec<Value> = outputs
        .iter()
        .map(|o| {
            json!({
                "engine": o.engine.name(),
                "file": format!("{}.csv", o.engine.name()),
                "rows": o.rows.len(),
                "info": o.info,
            })
        })
        .collect();
    let m = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "created_unix": created,
        "config": cfg,
        "seed": cfg.seed,
        "comparison_rule": {
            "abs": cfg.tolerances.abs,
            "rel": cfg.tolerances.rel,
            "k_se": cfg.tolerances.k_se,
        },
        "engines": engines,
        "report": {
            "rows": report.rows.len(),
            "failed": report.n_failed(),
            "passed": report.passed(),
        },
    });
    serde_json::to_string_pretty(&m).expect("manifest serializes")
}

type EngineResult = crate::Result<(Vec<SeriesRow>, Value)>;

fn row(observable: String, t: f64, value: f64, stderr: f64) -> SeriesRow {
    SeriesRow {
        observable,
        t,
        value,
        stderr,
    }
}

fn g_name(x: f64) -> String {
    format!("G({})", fmt_f64(x))
}

fn run_engine(cfg: &RunConfig, engine: Engine) -> EngineResult {
    let spec = spec_of(cfg)?;
    match engine {
        Engine::Master => engine_master(cfg, &spec),
        Engine::Ssa => engine_ssa(cfg, &spec),
        Engine::MomentsClosed => engine_moments_closed(cfg, &spec),
        Engine::MomentsTruncated => engine_moments_truncated(cfg, &spec),
        Engine::SdeEm | Engine::SdeReciprocal => engine_complex_sde(cfg, &spec, engine),
        Engine::Sqbessel | Engine::AppendixD => engine_real_sde(cfg, &spec, engine),
        Engine::GenfuncClosed => engine_genfunc_closed(cfg, &spec),
        Engine::GenfuncPde => engine_genfunc_pde(cfg, &spec),
        Engine::Distributional => engine_distributional(cfg, &spec),
    }
}

/// Initial distribution on its own support (Poisson tails below 1e-12).
fn initial_distribution(init: InitialConfig) -> crate::Result<CountDistribution> {
    match init {
        InitialConfig::Deterministic { n0 } => CountDistribution::point_mass(n0, n0),
        InitialConfig::Poisson { mu } => {
            let mut n = mu.ceil() as usize;
            while poisson_tail(mu, n) > 1e-12 {
                n += 1;
            }
            sample_initial(InitialKind::TruncatedPoisson(mu), n, 1e-12)
        }
    }
}

fn distribution_rows(cfg: &RunConfig, d: &CountDistribution, se: Option<&[f64]>, rows: &mut Vec<SeriesRow>) {
    let t = d.time();
    let obs = &cfg.observables;
    for n in 0..=obs.max_n {
        let p = d.probs().get(n).copied().unwrap_or(0.0);
        let s = se.and_then(|s| s.get(n)).copied().unwrap_or(0.0);
        rows.push(row(format!("P_{n}"), t, p, s));
    }
}

fn engine_master(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let init = initial_distribution(cfg.initial)?;
    let t_end = *cfg.times.last().expect("validated");
    let n_max = cfg
        .master
        .n_max
        .unwrap_or_else(|| default_n_max(spec, &init, t_end))
        .max(init.n_max());
    let gen = build_generator(spec, n_max)?;
    let p0 = init.padded(n_max);
    let opts = MasterOptions::absolute(cfg.tolerances.ode);
    let results = master_trajectory(&gen, &p0, &cfg.times, opts)?;
    let mut rows = Vec::new();
    let mut overflow = 0.0f64;
    for r in &results {
        let d = &r.dist;
        overflow = overflow.max(r.overflow_mass);
        distribution_rows(cfg, d, None, &mut rows);
        let m = factorial_moments(d, cfg.observables.m_max);
        for k in 1..=cfg.observables.m_max {
            rows.push(row(format!("M_{k}"), d.time(), m.get(k), 0.0));
        }
        let g = gf_from_distribution(d);
        for &x in &cfg.observables.x {
            rows.push(row(g_name(x), d.time(), eval_gf(&g, x), 0.0));
        }
    }
    Ok((
        rows,
        json!({ "n_max": n_max, "overflow_mass": overflow, "tolerance": cfg.tolerances.ode }),
    ))
}

fn engine_ssa(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let init = initial_distribution(cfg.initial)?;
    let ens = ssa_snapshots(spec, &init, &cfg.times, cfg.ssa.n_paths, cfg.seed, false)?;
    let mut rows = Vec::new();
    for (i, snap) in ens.snapshots.iter().enumerate() {
        let emp = ens.empirical(i);
        distribution_rows(cfg, &emp.dist, Some(&emp.stderr), &mut rows);
        for k in 1..=cfg.observables.m_max {
            let e = ens.factorial_moment(i, k as u64);
            rows.push(row(format!("M_{k}"), snap.time, e.mean, e.stderr));
        }
        for &x in &cfg.observables.x {
            let e = ens.generating_function(i, x);
            rows.push(row(g_name(x), snap.time, e.mean, e.stderr));
        }
    }
    Ok((rows, json!({ "n_paths": cfg.ssa.n_paths, "seed": cfg.seed })))
}

fn annihilation_rate(spec: &ReactionSpec, engine: &str) -> crate::Result<f64> {
    spec.annihilation_rate()
        .ok_or_else(|| Error::InvalidArgument(format!("{engine} needs the single channel A + A -> 0")))
}

fn deterministic_n0(cfg: &RunConfig, engine: &str) -> crate::Result<usize> {
    match cfg.initial {
        InitialConfig::Deterministic { n0 } => Ok(n0),
        InitialConfig::Poisson { .. } => Err(Error::InvalidArgument(format!(
            "{engine} needs compactly supported (deterministic) initial data"
        ))),
    }
}

fn moment_rows(cfg: &RunConfig, m: &FactorialMoments, t: f64, se: f64, rows: &mut Vec<SeriesRow>) {
    for k in 1..=cfg.observables.m_max {
        rows.push(row(format!("M_{k}"), t, m.get(k), se));
    }
}

fn engine_moments_closed(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let lambda = annihilation_rate(spec, "moments_closed")?;
    let n0 = deterministic_n0(cfg, "moments_closed")?;
    let m0 = FactorialMoments::point_mass(n0 as u64, lambda);
    let mut rows = Vec::new();
    for &t in &cfg.times {
        moment_rows(cfg, &solve_closed(&m0, t), t, 0.0, &mut rows);
    }
    Ok((rows, json!({ "support": n0 })))
}

fn engine_moments_truncated(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let lambda = annihilation_rate(spec, "moments_truncated")?;
    let order = cfg.moments.closure_order;
    let m0 = match cfg.initial {
        InitialConfig::Deterministic { n0 } => FactorialMoments::point_mass(n0 as u64, lambda),
        InitialConfig::Poisson { mu } => FactorialMoments::poisson(mu, order, lambda),
    };
    let mut rows = Vec::new();
    let mut warnings = 0;
    let mut worst = 0.0f64;
    for &t in &cfg.times {
        let r = solve_truncated(&m0, order, t, cfg.tolerances.ode)?;
        // the closure diagnostic stands in for a standard error
        let diag = if t == 0.0 { 0.0 } else { r.closure_diagnostic };
        worst = worst.max(diag);
        warnings += usize::from(t > 0.0 && r.closure_warning);
        moment_rows(cfg, &r.moments, t, diag, &mut rows);
    }
    Ok((
        rows,
        json!({ "closure_order": order, "max_closure_diagnostic": worst, "closure_warnings": warnings }),
    ))
}

fn poisson_start(cfg: &RunConfig, engine: &str) -> crate::Result<f64> {
    match cfg.initial {
        InitialConfig::Poisson { mu } => Ok(mu),
        InitialConfig::Deterministic { n0: 0 } => Ok(0.0),
        InitialConfig::Deterministic { .. } => Err(Error::InvalidArgument(format!(
            "{engine} pairs with Poisson chain data (or the empty start); got a point mass"
        ))),
    }
}

fn engine_complex_sde(cfg: &RunConfig, spec: &ReactionSpec, engine: Engine) -> EngineResult {
    let lambda = annihilation_rate(spec, engine.name())?;
    let phi0 = poisson_start(cfg, engine.name())?;
    let sc = SdeConfig {
        dt: cfg.sde.dt,
        n_paths: cfg.sde.n_paths,
        seed: cfg.seed,
        lambda,
        blowup_threshold: cfg.sde.blowup_threshold,
        shared_noise: cfg.sde.shared_noise,
        noise: true,
    };
    let taus: Vec<f64> = cfg.times.iter().map(|&t| sc.rescale(t)).collect();
    let z0 = Complex64::new(phi0, 0.0);
    let snaps: Vec<ComplexEnsemble> = match engine {
        Engine::SdeEm => simulate_tamed_em_snapshots(fixed(z0), &sc, &taus)?,
        _ => simulate_reciprocal_snapshots(z0, &sc, &taus)?,
    };
    let mut rows = Vec::new();
    for (snap, &t) in snaps.iter().zip(&cfg.times) {
        let ms = ensemble_complex_moments(snap, cfg.observables.m_max)?;
        for e in &ms[1..] {
            rows.push(row(format!("M_{}", e.m), t, e.value.re, e.stderr_re));
            rows.push(row(format!("M_{}_im", e.m), t, e.value.im, e.stderr_im));
        }
    }
    let flagged = snaps.last().map_or(0, |s| s.n_flagged());
    Ok((
        rows,
        json!({ "n_paths": sc.n_paths, "dt": sc.dt, "seed": sc.seed, "lambda": lambda, "flagged_paths": flagged }),
    ))
}

/// Rates `(alpha, beta, gamma)` of `A -> 0`, `0 -> A`, `A -> 2A` if the spec is exactly that triplet.
fn triplet_rates(spec: &ReactionSpec) -> Option<(f64, f64, f64)> {
    let find = |j, l| spec.channels().iter().find(|c| c.j == j && c.l == l).map(|c| c.rate);
    if spec.channels().len() != 3 {
        return None;
    }
    Some((find(1, 0)?, find(0, 1)?, find(1, 2)?))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn engine_real_sde(cfg: &RunConfig, spec: &ReactionSpec, engine: Engine) -> EngineResult {
    let (alpha, beta, gamma) = triplet_rates(spec).ok_or_else(|| {
        Error::InvalidArgument(format!("{} needs the birth-death-immigration triplet", engine.name()))
    })?;
    let phi0 = poisson_start(cfg, engine.name())?;
    let sc = SdeConfig {
        dt: cfg.sde.dt,
        n_paths: cfg.sde.n_paths,
        seed: cfg.seed,
        blowup_threshold: cfg.sde.blowup_threshold,
        ..SdeConfig::default()
    };
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let ens = match engine {
            Engine::Sqbessel => {
                if !(close(alpha, beta) && close(beta, gamma)) {
                    return Err(Error::InvalidArgument("sqbessel needs alpha = beta = gamma".into()));
                }
                simulate_sqbessel(alpha, phi0, &sc, t)?
            }
            _ => {
                if !(close(alpha, 2.0 * beta) && close(gamma, 2.0 * beta)) {
                    return Err(Error::InvalidArgument("appendix_d needs alpha = gamma = 2 beta".into()));
                }
                simulate_appendix_d(beta, phi0, &sc, t)?
            }
        };
        for k in 1..=cfg.observables.m_max {
            let e = ens.sample_mean(|p| p.powi(k as i32));
            rows.push(row(format!("M_{k}"), t, e.mean, e.stderr));
        }
        for &x in &cfg.observables.x {
            let e = ens.generating_function(x);
            rows.push(row(g_name(x), t, e.mean, e.stderr));
        }
    }
    Ok((
        rows,
        json!({ "n_paths": sc.n_paths, "dt": sc.dt, "seed": sc.seed, "phi0": phi0 }),
    ))
}

fn engine_genfunc_closed(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let g0 = gf_from_distribution(&initial_distribution(cfg.initial)?);
    let ch = spec.channels();
    let form: Box<dyn Fn(f64, f64) -> crate::Result<f64>> = if ch.len() == 1 && ch[0].j == 1 && ch[0].l == 0 {
        let lambda = ch[0].rate;
        let g0 = g0.clone();
        Box::new(move |t, x| Ok(closed_pure_death(&g0, lambda, t, x)))
    } else if let Some((a, b, c)) = triplet_rates(spec) {
        if close(a, b) && close(b, c) {
            let g0 = g0.clone();
            Box::new(move |t, x| closed_triplet_equal(&g0, a, t, x))
        } else if close(a, 2.0 * b) && close(c, 2.0 * b) {
            let g0 = g0.clone();
            Box::new(move |t, x| closed_triplet_two_beta(&g0, b, t, x))
        } else {
            return Err(Error::InvalidArgument("no closed form for these triplet rates".into()));
        }
    } else {
        return Err(Error::InvalidArgument(
            "no closed-form generating function for this spec".into(),
        ));
    };
    let mut rows = Vec::new();
    for &t in &cfg.times {
        for &x in &cfg.observables.x {
            rows.push(row(g_name(x), t, form(t, x)?, 0.0));
        }
    }
    Ok((rows, json!({ "initial_degree": g0.degree() })))
}

fn interpolate(grid: &GFGrid, x: f64) -> f64 {
    let nodes = grid.nodes();
    let i = nodes.partition_point(|&n| n < x);
    if i < nodes.len() && nodes[i] == x {
        return grid.values()[i];
    }
    let (l, r) = (i - 1, i);
    let w = (x - nodes[l]) / (nodes[r] - nodes[l]);
    grid.values()[l] * (1.0 - w) + grid.values()[r] * w
}

fn engine_genfunc_pde(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let lambda = annihilation_rate(spec, "genfunc_pde")?;
    let g0 = gf_from_distribution(&initial_distribution(cfg.initial)?);
    let nodes = if cfg.pde.chebyshev {
        GFGrid::chebyshev_nodes(cfg.pde.nodes)
    } else {
        GFGrid::uniform_nodes(cfg.pde.nodes)
    };
    let mut grid = GFGrid::from_polynomial(&g0, nodes, 0.0)?;
    let mut rows = Vec::new();
    let mut prev = 0.0;
    for &t in &cfg.times {
        if t > prev {
            grid = pde_solve_annihilation(&grid, lambda, t - prev, cfg.pde.dt)?;
            prev = t;
        }
        for &x in &cfg.observables.x {
            rows.push(row(g_name(x), t, interpolate(&grid, x), 0.0));
        }
    }
    Ok((
        rows,
        json!({ "nodes": cfg.pde.nodes, "dt": cfg.pde.dt, "chebyshev": cfg.pde.chebyshev }),
    ))
}

fn engine_distributional(cfg: &RunConfig, spec: &ReactionSpec) -> EngineResult {
    let lambda = annihilation_rate(spec, "distributional")?;
    let n0 = deterministic_n0(cfg, "distributional")?;
    let m0 = FactorialMoments::point_mass(n0 as u64, lambda);
    let explicit = n0 > 0 && n0 % 2 == 0;
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let comb = if explicit {
            appendix_c_comb((n0 / 2) as u32, lambda, t)?
        } else {
            comb_from_moments(&solve_closed(&m0, t))
        };
        let d = comb_to_distribution(&comb)?;
        distribution_rows(cfg, &d, None, &mut rows);
        for k in 1..=cfg.observables.m_max {
            rows.push(row(
                format!("M_{k}"),
                t,
                pair_polynomial(&comb, &Polynomial::monomial(k)),
                0.0,
            ));
        }
        for &x in &cfg.observables.x {
            rows.push(row(g_name(x), t, pair_exponential(&comb, x), 0.0));
        }
    }
    Ok((rows, json!({ "explicit_formula": explicit })))
}

/// JSON schema of [`RunConfig`].
pub fn config_schema() -> Value {
    let num = json!({ "type": "number" });
    let nonneg_int = json!({ "type": "integer", "minimum": 0 });
    let engines: Vec<&str> = Engine::ALL.iter().map(|e| e.name()).collect();
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "imagnoise run configuration",
        "type": "object",
        "additionalProperties": false,
        "required": ["scenario", "channels", "initial", "engines", "times"],
        "properties": {
            "scenario": { "type": "string" },
            "channels": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "additionalProperties": false,
                    "required": ["j", "l", "rate"],
                    "properties": {
                        "j": nonneg_int,
                        "l": nonneg_int,
                        "rate": { "type": "number", "exclusiveMinimum": 0 }
                    }
                }
            },
            "initial": {
                "oneOf": [
                    {
                        "type": "object",
                        "additionalProperties": false,
                        "required": ["kind", "n0"],
                        "properties": { "kind": { "const": "deterministic" }, "n0": nonneg_int }
                    },
                    {
                        "type": "object",
                        "additionalProperties": false,
                        "required": ["kind", "mu"],
                        "properties": {
                            "kind": { "const": "poisson" },
                            "mu": { "type": "number", "exclusiveMinimum": 0 }
                        }
                    }
                ]
            },
            "engines": {
                "type": "array",
                "minItems": 1,
                "items": { "enum": engines }
            },
            "times": {
                "type": "array",
                "minItems": 1,
                "items": { "type": "number", "minimum": 0 },
                "description": "strictly increasing, first entry 0"
            },
            "seed": nonneg_int,
            "tolerances": {
                "type": "object",
                "additionalProperties": false,
                "properties": { "ode": num, "abs": num, "rel": num, "k_se": num }
            },
            "observables": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "max_n": nonneg_int,
                    "m_max": nonneg_int,
                    "x": { "type": "array", "items": { "type": "number", "minimum": -1, "maximum": 1 } }
                }
            },
            "master": {
                "type": "object",
                "additionalProperties": false,
                "properties": { "n_max": { "type": ["integer", "null"], "minimum": 0 } }
            },
            "ssa": {
                "type": "object",
                "additionalProperties": false,
                "properties": { "n_paths": { "type": "integer", "minimum": 1 } }
            },
            "sde": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "dt": { "type": "number", "exclusiveMinimum": 0 },
                    "n_paths": { "type": "integer", "minimum": 1 },
                    "blowup_threshold": { "type": "number", "minimum": 1000 },
                    "shared_noise": { "type": "boolean" }
                }
            },
            "moments": {
                "type": "object",
                "additionalProperties": false,
                "properties": { "closure_order": { "type": "integer", "minimum": 2 } }
            },
            "pde": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "nodes": { "type": "integer", "minimum": 66 },
                    "dt": { "type": "number", "exclusiveMinimum": 0 },
                    "chebyshev": { "type": "boolean" }
                }
            },
            "pairs": {
                "type": "array",
                "items": {
                    "type": "array",
                    "prefixItems": [{ "enum": engines }, { "enum": engines }],
                    "minItems": 2,
                    "maxItems": 2
                }
            },
            "output_dir": { "type": "string" }
        }
    })
}
