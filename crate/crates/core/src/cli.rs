//! Command-line surface: config parsing, scenario runs, figure reproduction
//! and CSV/report emission.
//!
//! Config files are `key = value` lines with `#` comments and dotted keys.
//! Every key must be recognized; all problems are collected and reported
//! together.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    self, compare_onsets, detect_backflow, BackflowReport, FactorModel, FactorSeries, Grid, TimeSeries,
};
use crate::bosonbath::{BosonScenario, ClockFn, FrozenEnv2, InteractionClock, OhmicBathConfig};
use crate::freqkernel::{
    derive_kernels, scenario_preset, CouplingSchedule, FrequencyScenario, KernelPhase, Preset, TransformMode,
    FACTOR_NAMES,
};
use crate::spinstar::{PairRule, SpinStarConfig, SpinStarScan, ThermalState};

/// One problem found while parsing a config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{} config error(s):\n{}", .0.len(), join_lines(.0))]
    Config(Vec<ConfigError>),
    #[error("numerical failure in scenario {scenario} at t = {t}: {message}")]
    Numerical { scenario: String, t: f64, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    BadInput { path: PathBuf, message: String },
}

fn join_lines(errors: &[ConfigError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } | CliError::BadInput { .. } => 4,
        }
    }

    fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config(vec![ConfigError {
            line: None,
            key: key.into(),
            message: message.into(),
        }])
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Custom frequency-kernel scenario: either four explicit phase kernels or
/// two coupling schedules from which the kernels are derived.
#[derive(Debug, Clone, PartialEq)]
pub enum CustomKernel {
    Explicit {
        w0: f64,
        kernels: [KernelPhase; 4],
        overrides: [Option<f64>; 4],
        time_shift: f64,
    },
    Scheduled {
        w0: f64,
        c1: f64,
        c2: f64,
        sch1: CouplingSchedule,
        sch2: CouplingSchedule,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinStarParams {
    pub cfg: SpinStarConfig,
    /// `Θ1(t) = theta1_rate * t`.
    pub theta1_rate: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Preset(Preset),
    Boson(BosonScenario),
    SpinStar(SpinStarParams),
    CustomKernel(CustomKernel),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Preset(p) => p.as_str(),
            Scenario::Boson(_) => "boson",
            Scenario::SpinStar(_) => "spinstar",
            Scenario::CustomKernel(_) => "custom-kernel",
        }
    }

    fn is_shifted(&self) -> bool {
        match self {
            Scenario::Preset(p) => p.is_shifted(),
            Scenario::CustomKernel(CustomKernel::Explicit { time_shift, .. }) => *time_shift != 0.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub t0: f64,
    pub dt: f64,
    pub t_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t0: 0.0,
            dt: 1e-3,
            t_max: 3.0,
        }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid, analysis::AnalysisError> {
        Grid::new(self.t0, self.dt, self.t_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Required by `run`; `measure` only needs `measure_input`.
    pub scenario: Option<Scenario>,
    /// Coupling constant of the constant-coupling presets.
    pub g: f64,
    pub grid: GridSpec,
    pub mode: TransformMode,
    /// Relative growth threshold for backflow detection.
    pub eps: f64,
    pub output_stem: Option<String>,
    pub measure_input: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            g: 1.0,
            grid: GridSpec::default(),
            mode: TransformMode::CosineTransform,
            eps: analysis::DEFAULT_EPS,
            output_stem: None,
            measure_input: None,
        }
    }
}

impl RunConfig {
    pub fn stem(&self) -> String {
        match (&self.output_stem, &self.scenario) {
            (Some(s), _) => s.clone(),
            (None, Some(sc)) => sc.name().to_string(),
            (None, None) => "measure".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Entry {
    value: String,
    line: usize,
}

struct KeyReader {
    entries: BTreeMap<String, Entry>,
    used: BTreeSet<String>,
    errors: Vec<ConfigError>,
}

impl KeyReader {
    fn error(&mut self, key: &str, message: impl Into<String>) {
        let line = self.entries.get(key).map(|e| e.line);
        self.errors.push(ConfigError {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key)?.value.clone();
        self.used.insert(key.to_string());
        Some(v)
    }

    fn parsed<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        let raw = self.raw(key)?;
        match parse(&raw) {
            Ok(v) => Some(v),
            Err(m) => {
                self.error(key, m);
                None
            }
        }
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        if !self.has(key) {
            self.error(key, "missing required key");
            return None;
        }
        self.parsed(key, parse)
    }

    /// Float with a default and a range check; on a type or range error the
    /// error is recorded and the default returned so parsing can continue.
    fn float(&mut self, key: &str, default: f64, check: fn(f64) -> Option<&'static str>) -> f64 {
        match self.parsed(key, parse_f64) {
            Some(v) => match check(v) {
                Some(msg) => {
                    self.error(key, format!("{v}: {msg}"));
                    default
                }
                None => v,
            },
            None => default,
        }
    }

    fn count(&mut self, key: &str, default: usize) -> usize {
        self.parsed(key, |s| s.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{s}`")))
            .unwrap_or(default)
    }

    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries.keys().filter(|k| k.starts_with(prefix)).cloned().collect()
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("expected a number, got `{s}`"))
}

fn finite(v: f64) -> Option<&'static str> {
    (!v.is_finite()).then_some("must be finite")
}

fn positive(v: f64) -> Option<&'static str> {
    (!(v > 0.0 && v.is_finite())).then_some("must be > 0")
}

fn non_negative(v: f64) -> Option<&'static str> {
    (!(v >= 0.0 && v.is_finite())).then_some("must be >= 0")
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|x| parse_f64(x.trim())).collect()
}

fn parse_kernel(s: &str) -> Result<(KernelPhase, Option<f64>), String> {
    if let Some(v) = s.strip_prefix("const:") {
        return Ok((KernelPhase::default(), Some(parse_f64(v.trim())?)));
    }
    let v = parse_list(s)?;
    match v.as_slice() {
        &[p, q, r, s] => Ok((KernelPhase::new(p, q, r, s), None)),
        _ => Err(format!("expected `p,q,r,s` or `const:v`, got `{s}`")),
    }
}

fn render_kernel(k: &KernelPhase, ov: Option<f64>) -> String {
    match ov {
        Some(v) => format!("const:{v}"),
        None => format!("{},{},{},{}", k.p, k.q, k.r, k.s),
    }
}

/// `t:g` pairs separated by commas.
fn parse_schedule(s: &str) -> Result<CouplingSchedule, String> {
    let mut points = Vec::new();
    for item in s.split(',') {
        let (t, g) = item
            .split_once(':')
            .ok_or_else(|| format!("expected `t:g` pairs, got `{item}`"))?;
        points.push((parse_f64(t.trim())?, parse_f64(g.trim())?));
    }
    CouplingSchedule::new(points).map_err(|e| e.to_string())
}

fn render_schedule(s: &CouplingSchedule) -> String {
    s.breakpoints()
        .iter()
        .map(|(t, g)| format!("{t}:{g}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Comma-separated items: a bare number is the accrued offset, `s..f` is a
/// switch-on window (`f` may be `inf`).
fn parse_clock(s: &str) -> Result<ClockFn, String> {
    let mut offset = None;
    let mut windows = Vec::new();
    for item in s.split(',').map(str::trim) {
        if let Some((a, b)) = item.split_once("..") {
            windows.push((parse_f64(a)?, parse_f64(b)?));
        } else if offset.replace(parse_f64(item)?).is_some() {
            return Err("at most one offset".into());
        }
    }
    ClockFn::new(offset.unwrap_or(0.0), windows).map_err(|e| e.to_string())
}

fn render_clock(c: &ClockFn) -> String {
    let mut items = Vec::new();
    if c.offset != 0.0 || c.windows.is_empty() {
        items.push(format!("{}", c.offset));
    }
    items.extend(c.windows.iter().map(|(s, f)| format!("{s}..{f}")));
    items.join(",")
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

const GLOBAL_KEYS: [&str; 9] = [
    "scenario",
    "g",
    "mode",
    "grid.t0",
    "grid.dt",
    "grid.t_max",
    "analysis.eps",
    "output.stem",
    "measure.input",
];

const SECTIONS: [&str; 3] = ["boson", "spinstar", "kernel"];

fn read_boson(r: &mut KeyReader) -> BosonScenario {
    let d = BosonScenario::figure6();
    let cfg = OhmicBathConfig {
        a1: r.float("boson.A1", d.cfg.a1, non_negative),
        a2: r.float("boson.A2", d.cfg.a2, non_negative),
        omega1: r.float("boson.Omega1", d.cfg.omega1, positive),
        omega2: r.float("boson.Omega2", d.cfg.omega2, positive),
        beta: r.float("boson.beta", d.cfg.beta, positive),
    };
    let mut clock = |key: &str, default: &ClockFn| r.parsed(key, parse_clock).unwrap_or_else(|| default.clone());
    let clock1 = InteractionClock::new(clock("boson.clock1.sys", &d.clock1.t_sys), clock("boson.clock1.anc", &d.clock1.t_anc));
    let clock2 = InteractionClock::new(clock("boson.clock2.sys", &d.clock2.t_sys), clock("boson.clock2.anc", &d.clock2.t_anc));
    let frozen_on = r.parsed("boson.frozen", parse_bool).unwrap_or(true);
    let fd = d.frozen.expect("figure preset freezes environment 2");
    let frozen = if frozen_on {
        Some(FrozenEnv2 {
            gamma2_const: r.float("boson.Gamma2", fd.gamma2_const, non_negative),
            xi2_phase_const: r.float("boson.Xi2", fd.xi2_phase_const, finite),
        })
    } else {
        for key in ["boson.Gamma2", "boson.Xi2"] {
            if r.raw(key).is_some() {
                r.error(key, "only valid with boson.frozen = true");
            }
        }
        None
    };
    BosonScenario {
        cfg,
        clock1,
        clock2,
        frozen,
    }
}

fn read_spinstar(r: &mut KeyReader) -> SpinStarParams {
    let d = SpinStarConfig::figure7();
    let n1 = r.count("spinstar.n1", d.n1);
    let n2 = r.count("spinstar.n2", d.n2);
    let mut couplings = |key: &str, n: usize| -> Vec<f64> {
        match r.parsed(key, parse_list) {
            Some(v) if v.len() == 1 => vec![v[0]; n],
            Some(v) => v,
            None => vec![1.0; n],
        }
    };
    let g1 = couplings("spinstar.g1", n1);
    let g2 = couplings("spinstar.g2", n2);
    let pair_rule = r
        .parsed("spinstar.pair_rule", |s| {
            PairRule::parse(s).ok_or_else(|| format!("expected complete_graph or ring, got `{s}`"))
        })
        .unwrap_or_default();
    let cfg = SpinStarConfig {
        n1,
        n2,
        b1: r.float("spinstar.B1", d.b1, finite),
        b2: r.float("spinstar.B2", d.b2, finite),
        alpha: r.float("spinstar.alpha", d.alpha, finite),
        j1: r.float("spinstar.J1", d.j1, finite),
        j2: r.float("spinstar.J2", d.j2, finite),
        beta: r.float("spinstar.beta", d.beta, non_negative),
        g1,
        g2,
        pair_rule,
    };
    if let Err(e) = cfg.validate() {
        let key = match &e {
            crate::spinstar::SpinStarError::InvalidConfig(m) if m.contains("J1") => "spinstar.J1",
            crate::spinstar::SpinStarError::InvalidConfig(m) if m.contains("J2") => "spinstar.J2",
            _ => "spinstar",
        };
        r.error(key, e.to_string());
    }
    SpinStarParams {
        cfg,
        theta1_rate: r.float("spinstar.theta1_rate", 1.0, finite),
        theta2: r.float("spinstar.theta2", 0.2, finite),
    }
}

const KERNEL_KEYS: [&str; 4] = ["kernel.k1", "kernel.k2", "kernel.k12", "kernel.l12"];
const SCHEDULE_KEYS: [&str; 4] = ["kernel.c1", "kernel.c2", "kernel.schedule1", "kernel.schedule2"];

fn read_kernel(r: &mut KeyReader) -> Option<CustomKernel> {
    let w0 = r.float("kernel.w0", 0.0, non_negative);
    let explicit = KERNEL_KEYS.iter().any(|k| r.has(k)) || r.has("kernel.time_shift");
    let scheduled = SCHEDULE_KEYS.iter().any(|k| r.has(k));
    if explicit && scheduled {
        r.error("kernel", "give either kernel.k1..l12 or kernel.schedule1/2, not both");
        for k in KERNEL_KEYS.iter().chain(&SCHEDULE_KEYS).chain(&["kernel.time_shift"]) {
            r.raw(k);
        }
        return None;
    }
    if scheduled {
        let c1 = r.float("kernel.c1", 0.0, finite);
        let c2 = r.float("kernel.c2", 0.0, finite);
        let sch1 = r.required("kernel.schedule1", parse_schedule);
        let sch2 = r.required("kernel.schedule2", parse_schedule);
        return Some(CustomKernel::Scheduled {
            w0,
            c1,
            c2,
            sch1: sch1?,
            sch2: sch2?,
        });
    }
    let time_shift = r.float("kernel.time_shift", 0.0, finite);
    let parsed: Vec<_> = KERNEL_KEYS.iter().map(|k| r.required(k, parse_kernel)).collect();
    let mut kernels = [KernelPhase::default(); 4];
    let mut overrides = [None; 4];
    for (i, p) in parsed.into_iter().enumerate() {
        let (k, ov) = p?;
        kernels[i] = k;
        overrides[i] = ov;
    }
    if let Err(e) = FrequencyScenario::new(w0, kernels, overrides, TransformMode::CosineTransform, time_shift) {
        r.error("kernel", e.to_string());
        return None;
    }
    Some(CustomKernel::Explicit {
        w0,
        kernels,
        overrides,
        time_shift,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let mut r = KeyReader {
        entries: BTreeMap::new(),
        used: BTreeSet::new(),
        errors: Vec::new(),
    };
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            r.errors.push(ConfigError {
                line: Some(line),
                key: content.to_string(),
                message: "expected `key = value`".into(),
            });
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if key.is_empty() || value.is_empty() {
            r.errors.push(ConfigError {
                line: Some(line),
                key,
                message: "empty key or value".into(),
            });
            continue;
        }
        if let Some(prev) = r.entries.get(&key) {
            let msg = format!("duplicate key (first set on line {})", prev.line);
            r.errors.push(ConfigError {
                line: Some(line),
                key,
                message: msg,
            });
            continue;
        }
        r.entries.insert(key, Entry { value, line });
    }

    let mut cfg = RunConfig::default();
    cfg.g = r.float("g", cfg.g, finite);
    cfg.grid = GridSpec {
        t0: r.float("grid.t0", 0.0, finite),
        dt: r.float("grid.dt", 1e-3, positive),
        t_max: r.float("grid.t_max", 3.0, finite),
    };
    if let Err(e) = cfg.grid.grid() {
        r.error("grid.t_max", e.to_string());
    }
    cfg.mode = r
        .parsed("mode", |s| s.parse::<TransformMode>().map_err(|e| e.to_string()))
        .unwrap_or(cfg.mode);
    cfg.eps = r.float("analysis.eps", cfg.eps, non_negative);
    cfg.output_stem = r.parsed("output.stem", |s| {
        if s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !s.starts_with('.') {
            Ok(s.to_string())
        } else {
            Err(format!("`{s}` is not a plain file stem"))
        }
    });
    cfg.measure_input = r.raw("measure.input").map(PathBuf::from);

    let kind = r.parsed("scenario", |s| Ok(s.to_string()));
    let wanted_section = match kind.as_deref() {
        Some("boson") => Some("boson"),
        Some("spinstar") => Some("spinstar"),
        Some("custom-kernel") => Some("kernel"),
        _ => None,
    };
    let mut sections = BTreeMap::new();
    for section in SECTIONS {
        let present = !r.keys_with_prefix(&format!("{section}.")).is_empty();
        if Some(section) == wanted_section || (kind.is_none() && present) {
            let sc = match section {
                "boson" => Some(Scenario::Boson(read_boson(&mut r))),
                "spinstar" => Some(Scenario::SpinStar(read_spinstar(&mut r))),
                _ => read_kernel(&mut r).map(Scenario::CustomKernel),
            };
            sections.insert(section, sc);
        } else if present {
            for key in r.keys_with_prefix(&format!("{section}.")) {
                r.used.insert(key.clone());
                let msg = format!("only valid with scenario = {}", if section == "kernel" { "custom-kernel" } else { section });
                r.error(&key, msg);
            }
        }
    }
    match kind.as_deref() {
        None if !r.has("scenario") => {
            if cfg.measure_input.is_none() {
                r.error("scenario", "missing required key");
            }
        }
        None => {}
        Some(name) => match name.parse::<Preset>() {
            Ok(p) => cfg.scenario = Some(Scenario::Preset(p)),
            Err(_) => match wanted_section {
                Some(s) => cfg.scenario = sections.remove(s).flatten(),
                None => r.error(
                    "scenario",
                    format!("unknown scenario `{name}` (expected eq5, eq7, eq9, eq10, eq11, boson, spinstar or custom-kernel)"),
                ),
            },
        },
    }

    let unknown: Vec<String> = r
        .entries
        .keys()
        .filter(|k| !r.used.contains(*k) && !GLOBAL_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    for key in unknown {
        r.error(&key, "unknown key");
    }
    if r.errors.is_empty() {
        Ok(cfg)
    } else {
        r.errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        Err(r.errors)
    }
}

/// Canonical text form; `parse_config(&render(c)) == Ok(c)`.
pub fn render(cfg: &RunConfig) -> String {
    let mut out = Vec::<String>::new();
    let mut kv = |k: &str, v: String| out.push(format!("{k} = {v}"));
    if let Some(sc) = &cfg.scenario {
        kv("scenario", sc.name().to_string());
    }
    kv("g", format!("{}", cfg.g));
    kv("mode", cfg.mode.as_str().to_string());
    kv("grid.t0", format!("{}", cfg.grid.t0));
    kv("grid.dt", format!("{}", cfg.grid.dt));
    kv("grid.t_max", format!("{}", cfg.grid.t_max));
    kv("analysis.eps", format!("{}", cfg.eps));
    if let Some(s) = &cfg.output_stem {
        kv("output.stem", s.clone());
    }
    if let Some(p) = &cfg.measure_input {
        kv("measure.input", p.display().to_string());
    }
    match &cfg.scenario {
        Some(Scenario::Boson(b)) => {
            kv("boson.A1", format!("{}", b.cfg.a1));
            kv("boson.A2", format!("{}", b.cfg.a2));
            kv("boson.Omega1", format!("{}", b.cfg.omega1));
            kv("boson.Omega2", format!("{}", b.cfg.omega2));
            kv("boson.beta", format!("{}", b.cfg.beta));
            kv("boson.clock1.sys", render_clock(&b.clock1.t_sys));
            kv("boson.clock1.anc", render_clock(&b.clock1.t_anc));
            kv("boson.clock2.sys", render_clock(&b.clock2.t_sys));
            kv("boson.clock2.anc", render_clock(&b.clock2.t_anc));
            kv("boson.frozen", format!("{}", b.frozen.is_some()));
            if let Some(f) = b.frozen {
                kv("boson.Gamma2", format!("{}", f.gamma2_const));
                kv("boson.Xi2", format!("{}", f.xi2_phase_const));
            }
        }
        Some(Scenario::SpinStar(s)) => {
            let c = &s.cfg;
            let list = |g: &[f64]| g.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
            kv("spinstar.n1", format!("{}", c.n1));
            kv("spinstar.n2", format!("{}", c.n2));
            kv("spinstar.B1", format!("{}", c.b1));
            kv("spinstar.B2", format!("{}", c.b2));
            kv("spinstar.alpha", format!("{}", c.alpha));
            kv("spinstar.J1", format!("{}", c.j1));
            kv("spinstar.J2", format!("{}", c.j2));
            kv("spinstar.beta", format!("{}", c.beta));
            kv("spinstar.g1", list(&c.g1));
            kv("spinstar.g2", list(&c.g2));
            kv("spinstar.pair_rule", c.pair_rule.as_str().to_string());
            kv("spinstar.theta1_rate", format!("{}", s.theta1_rate));
            kv("spinstar.theta2", format!("{}", s.theta2));
        }
        Some(Scenario::CustomKernel(CustomKernel::Explicit {
            w0,
            kernels,
            overrides,
            time_shift,
        })) => {
            kv("kernel.w0", format!("{w0}"));
            kv("kernel.time_shift", format!("{time_shift}"));
            for i in 0..4 {
                kv(KERNEL_KEYS[i], render_kernel(&kernels[i], overrides[i]));
            }
        }
        Some(Scenario::CustomKernel(CustomKernel::Scheduled { w0, c1, c2, sch1, sch2 })) => {
            kv("kernel.w0", format!("{w0}"));
            kv("kernel.c1", format!("{c1}"));
            kv("kernel.c2", format!("{c2}"));
            kv("kernel.schedule1", render_schedule(sch1));
            kv("kernel.schedule2", render_schedule(sch2));
        }
        Some(Scenario::Preset(_)) | None => {}
    }
    let mut text = out.join("\n");
    text.push('\n');
    text
}

// ---------------------------------------------------------------------------
// Evaluation

/// Sampled traces plus which of the four factors the model defines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub series: FactorSeries,
    pub defined: [bool; 4],
}

fn sample_model<M: FactorModel>(model: &M, grid: Grid, name: &str) -> Result<RunResult, CliError>
where
    M::Error: fmt::Display,
{
    let series = analysis::sample(model, grid).map_err(|e| CliError::Numerical {
        scenario: name.to_string(),
        t: e.t,
        message: e.source.to_string(),
    })?;
    Ok(RunResult {
        series,
        defined: model.defined_factors(),
    })
}

fn numerical(name: &str, t: f64, e: impl fmt::Display) -> CliError {
    CliError::Numerical {
        scenario: name.to_string(),
        t,
        message: e.to_string(),
    }
}

/// Evaluates the configured scenario on its grid.
pub fn evaluate(cfg: &RunConfig) -> Result<RunResult, CliError> {
    let scenario = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::config("scenario", "missing required key"))?;
    let grid = cfg.grid.grid().map_err(|e| CliError::config("grid.t_max", e.to_string()))?;
    let name = scenario.name();
    match scenario {
        Scenario::Preset(p) => {
            let model = scenario_preset(*p, cfg.g).map_err(|e| numerical(name, 0.0, e))?.with_mode(cfg.mode);
            sample_model(&model, grid, name)
        }
        Scenario::Boson(b) => sample_model(b, grid, name),
        Scenario::SpinStar(s) => {
            let model = SpinStarScan {
                state: ThermalState::new(&s.cfg).map_err(|e| numerical(name, 0.0, e))?,
                theta1_rate: s.theta1_rate,
                theta2: s.theta2,
            };
            sample_model(&model, grid, name)
        }
        Scenario::CustomKernel(CustomKernel::Explicit {
            w0,
            kernels,
            overrides,
            time_shift,
        }) => {
            let model = FrequencyScenario::new(*w0, *kernels, *overrides, cfg.mode, *time_shift)
                .map_err(|e| numerical(name, 0.0, e))?;
            sample_model(&model, grid, name)
        }
        Scenario::CustomKernel(CustomKernel::Scheduled { w0, c1, c2, sch1, sch2 }) => {
            let model = derive_kernels(*c1, *c2, sch1.clone(), sch2.clone(), *w0)
                .map_err(|e| numerical(name, 0.0, e))?
                .with_mode(cfg.mode);
            sample_model(&model, grid, name)
        }
    }
}

// ---------------------------------------------------------------------------
// Output formats

/// C `%.9g` formatting: 9 significant digits, trailing zeros removed,
/// exponent form outside `[1e-5, 1e9)`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let strip = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..P).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip(mantissa), exp.abs())
    } else {
        strip(&format!("{:.*}", (P - 1 - exp) as usize, x))
    }
}

/// Named data column.
pub type Column = (String, Vec<f64>);

/// CSV with header `t,<names...>`; one row per grid point, LF endings.
pub fn render_csv(grid: &Grid, columns: &[Column]) -> String {
    let mut out = String::from("t");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..grid.len {
        out.push_str(&fmt_g9(grid.time(i)));
        for (_, values) in columns {
            out.push(',');
            out.push_str(&fmt_g9(values[i]));
        }
        out.push('\n');
    }
    out
}

/// Parses a CSV produced by [`render_csv`] back into named series.
pub fn read_csv(text: &str) -> Result<(Grid, Vec<Column>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty file")?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names.first() != Some(&"t") || names.len() < 2 {
        return Err("header must start with `t` and name at least one column".into());
    }
    let mut t = Vec::new();
    let mut cols = vec![Vec::new(); names.len() - 1];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(format!("row {} has {} fields, expected {}", row + 2, fields.len(), names.len()));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("row {}: bad number `{s}`", row + 2));
        t.push(parse(fields[0])?);
        for (c, f) in cols.iter_mut().zip(&fields[1..]) {
            c.push(parse(f)?);
        }
    }
    if t.len() < 3 {
        return Err("need at least 3 rows".into());
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    let tol = 1e-6 * dt.abs().max(f64::MIN_POSITIVE) + 1e-8 * t[0].abs().max(t[t.len() - 1].abs());
    if !(dt > 0.0) || t.iter().enumerate().any(|(i, &ti)| (ti - (t[0] + i as f64 * dt)).abs() > tol) {
        return Err("time column is not a uniform increasing grid".into());
    }
    let grid = Grid {
        t0: t[0],
        dt,
        len: t.len(),
    };
    Ok((grid, names[1..].iter().map(|s| s.to_string()).zip(cols).collect()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), fmt_g9)
}

/// Backflow analysis of whichever factors are present. Local factors get a
/// backflow measure; global factors get onset and gain only, and the earlier
/// global onset is classified against the local ones.
pub fn analyze(grid: &Grid, factors: &[Option<Vec<f64>>; 4], eps: f64) -> Vec<(String, String)> {
    let mut out = Vec::new();
    out.push(("grid.t0".to_string(), fmt_g9(grid.t0)));
    out.push(("grid.dt".to_string(), fmt_g9(grid.dt)));
    out.push(("grid.points".to_string(), grid.len.to_string()));
    let empty = BackflowReport {
        grid: *grid,
        onset: None,
        intervals: Vec::new(),
        total_gain: 0.0,
    };
    let mut reports: [Option<BackflowReport>; 4] = Default::default();
    for (k, values) in factors.iter().enumerate() {
        let Some(values) = values else { continue };
        let series = TimeSeries {
            t0: grid.t0,
            dt: grid.dt,
            values: values.clone(),
        };
        let rep = detect_backflow(&series, eps);
        let name = FACTOR_NAMES[k];
        out.push((format!("onset.{name}"), fmt_opt(rep.onset)));
        out.push((format!("intervals.{name}"), rep.intervals.len().to_string()));
        out.push((format!("gain.{name}"), fmt_g9(rep.total_gain)));
        if k < 2 {
            out.push((format!("blp.{name}"), fmt_g9(analysis::blp_measure_dephasing(&series))));
        }
        reports[k] = Some(rep);
    }
    let global = match (&reports[2], &reports[3]) {
        (Some(a), Some(b)) => Some(match (a.onset, b.onset) {
            (Some(x), Some(y)) if y < x => b,
            (None, Some(_)) => b,
            _ => a,
        }),
        (a, b) => a.as_ref().or(b.as_ref()),
    };
    if let Some(global) = global {
        let l1 = reports[0].as_ref().unwrap_or(&empty);
        let l2 = reports[1].as_ref().unwrap_or(&empty);
        if let Ok(cmp) = compare_onsets(l1, l2, global) {
            out.push(("classification".to_string(), cmp.ordering.as_str().to_string()));
            out.push(("classification.global_onset".to_string(), fmt_opt(cmp.global_onset)));
            out.push(("classification.local_onset".to_string(), fmt_opt(cmp.local_onset)));
        }
    }
    out
}

fn render_report(head: &[(String, String)], body: &[(String, String)]) -> String {
    head.iter()
        .chain(body)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

fn factor_columns(result: &RunResult) -> Vec<Column> {
    (0..4)
        .filter(|&k| result.defined[k])
        .map(|k| (FACTOR_NAMES[k].to_string(), result.series.traces[k].clone()))
        .collect()
}

fn factor_options(result: &RunResult) -> [Option<Vec<f64>>; 4] {
    std::array::from_fn(|k| result.defined[k].then(|| result.series.traces[k].clone()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Files written by a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub data: PathBuf,
    pub sidecar: PathBuf,
}

fn clock_label(sc: &Scenario) -> &'static str {
    if sc.is_shifted() {
        "t' (shifted interaction clock)"
    } else {
        "t"
    }
}

/// Runs a config and writes `<stem>.csv` and `<stem>.report` into `out`.
/// Everything is computed before the first file is touched.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<Written, CliError> {
    let result = evaluate(cfg)?;
    let scenario = cfg.scenario.as_ref().expect("evaluate checked the scenario");
    let csv = render_csv(&result.series.grid, &factor_columns(&result));
    let head = vec![
        ("scenario".to_string(), scenario.name().to_string()),
        ("clock".to_string(), clock_label(scenario).to_string()),
    ];
    let report = render_report(&head, &analyze(&result.series.grid, &factor_options(&result), cfg.eps));
    ensure_dir(out)?;
    let stem = cfg.stem();
    let data = out.join(format!("{stem}.csv"));
    let sidecar = out.join(format!("{stem}.report"));
    write_file(&data, &csv)?;
    write_file(&sidecar, &report)?;
    Ok(Written { data, sidecar })
}

/// Analysis of a previously written CSV; returns the report text.
pub fn measure(cfg: &RunConfig, base: &Path) -> Result<String, CliError> {
    let input = cfg
        .measure_input
        .as_ref()
        .ok_or_else(|| CliError::config("measure.input", "missing required key"))?;
    let path = if input.is_absolute() { input.clone() } else { base.join(input) };
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let bad = |message: String| CliError::BadInput {
        path: path.clone(),
        message,
    };
    let (grid, columns) = read_csv(&text).map_err(bad)?;
    let mut factors: [Option<Vec<f64>>; 4] = Default::default();
    for (name, values) in columns {
        if let Some(k) = FACTOR_NAMES.iter().position(|n| *n == name) {
            factors[k] = Some(values);
        }
    }
    if factors.iter().all(Option::is_none) {
        return Err(bad(format!("no factor column among {}", FACTOR_NAMES.join(", "))));
    }
    let head = vec![("input".to_string(), path.display().to_string())];
    Ok(render_report(&head, &analyze(&grid, &factors, cfg.eps)))
}

// ---------------------------------------------------------------------------
// Figures

/// A figure: its run config, which factor columns it plots, an optional
/// scaled copy of `lambda12`, and notes on parameters the figures leave unstated.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub number: u8,
    pub config: RunConfig,
    pub columns: Vec<usize>,
    pub lambda12_scale: Option<(f64, &'static str)>,
    pub notes: Vec<(&'static str, &'static str)>,
}

pub fn figure_spec(n: u8) -> Option<FigureSpec> {
    let base = |scenario: Scenario, t_max: f64| RunConfig {
        scenario: Some(scenario),
        grid: GridSpec {
            t0: 0.0,
            dt: 1e-3,
            t_max,
        },
        output_stem: Some(format!("fig{n}")),
        ..RunConfig::default()
    };
    let spin = |cfg: SpinStarConfig, theta2: f64| {
        Scenario::SpinStar(SpinStarParams {
            cfg,
            theta1_rate: 1.0,
            theta2,
        })
    };
    let shifted_note = ("clock", "t' = t - 1, the time since the coupling change");
    let spec = match n {
        1 => (base(Scenario::Preset(Preset::Eq5), 3.0), vec![0, 3], None, vec![]),
        2 => (base(Scenario::Preset(Preset::Eq7), 3.0), vec![0, 1, 2, 3], None, vec![]),
        3 => (base(Scenario::Preset(Preset::Eq9), 3.0), vec![0, 3], None, vec![]),
        4 => (
            base(Scenario::Preset(Preset::Eq10), 2.0),
            vec![0, 1, 2, 3],
            Some((500.0, "lambda12_x500")),
            vec![shifted_note],
        ),
        5 => (base(Scenario::Preset(Preset::Eq11), 2.0), vec![0, 1, 2, 3], None, vec![shifted_note]),
        6 => (
            base(Scenario::Boson(BosonScenario::figure6()), 3.0),
            vec![0, 3],
            None,
            vec![
                ("decision.Omega1", "1 (cutoff unstated for this figure)"),
                ("decision.environment2", "Gamma2 and Xi2 held at their figure values"),
            ],
        ),
        7 => (
            base(spin(SpinStarConfig::figure7(), 0.2), 3.0),
            vec![0, 3],
            None,
            vec![("decision.pair_rule", "complete_graph (pairs in the intra-bath sum unstated for this figure)")],
        ),
        8 => (
            base(spin(SpinStarConfig::figure8(), 0.785), 3.0),
            vec![0, 3],
            Some((1e7, "lambda12_x1e7")),
            vec![("decision.pair_rule", "complete_graph (irrelevant here since J = 0)")],
        ),
        _ => return None,
    };
    Some(FigureSpec {
        number: n,
        config: spec.0,
        columns: spec.1,
        lambda12_scale: spec.2,
        notes: spec.3,
    })
}

/// Figure CSV contents (and the run result behind it).
pub fn figure_csv(spec: &FigureSpec) -> Result<(String, RunResult), CliError> {
    let result = evaluate(&spec.config)?;
    let mut columns: Vec<Column> = spec
        .columns
        .iter()
        .map(|&k| (FACTOR_NAMES[k].to_string(), result.series.traces[k].clone()))
        .collect();
    if let Some((scale, name)) = spec.lambda12_scale {
        columns.push((name.to_string(), result.series.traces[3].iter().map(|v| v * scale).collect()));
    }
    Ok((render_csv(&result.series.grid, &columns), result))
}

fn figure_meta(spec: &FigureSpec) -> String {
    let mut meta = format!("figure = {}\n", spec.number);
    meta.push_str(&render(&spec.config));
    let mut cols = vec!["t".to_string()];
    cols.extend(spec.columns.iter().map(|&k| FACTOR_NAMES[k].to_string()));
    if let Some((scale, name)) = spec.lambda12_scale {
        cols.push(name.to_string());
        meta.push_str(&format!("scale.{name} = {scale}\n"));
    }
    meta.push_str(&format!("columns = {}\n", cols.join(",")));
    meta.push_str("format = %.9g\n");
    for (k, v) in &spec.notes {
        meta.push_str(&format!("{k} = {v}\n"));
    }
    meta
}

/// Writes `figN.csv` and `figN.meta` into `out`.
pub fn fig(n: u8, out: &Path) -> Result<Written, CliError> {
    let spec = figure_spec(n).ok_or_else(|| CliError::config("fig", format!("figure {n} is not in 1..=8")))?;
    let (csv, _) = figure_csv(&spec)?;
    let meta = figure_meta(&spec);
    ensure_dir(out)?;
    let data = out.join(format!("fig{n}.csv"));
    let sidecar = out.join(format!("fig{n}.meta"));
    write_file(&data, &csv)?;
    write_file(&sidecar, &meta)?;
    Ok(Written { data, sidecar })
}

// ---------------------------------------------------------------------------
// Entry point

#[derive(Debug, Parser)]
#[command(name = "dephase", version, about = "Decoherence functions and information backflow for two dephasing qubits")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a configured scenario and write `<stem>.csv` and `<stem>.report`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Reproduce one of the eight figures as `figN.csv` plus `figN.meta`.
    Fig {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=8))]
        n: u8,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Analyse a previously written CSV named by `measure.input`.
    Measure {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(CliError::Config)
}

fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let w = run(&cfg, &out)?;
            Ok(format!("wrote {}\nwrote {}\n", w.data.display(), w.sidecar.display()))
        }
        Command::Fig { n, out } => {
            let w = fig(n, &out)?;
            Ok(format!("wrote {}\nwrote {}\n", w.data.display(), w.sidecar.display()))
        }
        Command::Measure { config } => {
            let cfg = load_config(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            measure(&cfg, base)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(args.command) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("scenario = eq9\ngrid.t_max = 3.0").unwrap();
        assert_eq!(cfg.scenario, Some(Scenario::Preset(Preset::Eq9)));
        assert_eq!(cfg.g, 1.0);
        assert_eq!(cfg.grid, GridSpec::default());
        assert_eq!(cfg.mode, TransformMode::CosineTransform);
        assert_eq!(cfg.stem(), "eq9");
    }

    #[test]
    fn figure_one_config() {
        let cfg = parse_config("scenario = eq5\ng = 1.0").unwrap();
        assert_eq!(cfg.scenario, Some(Scenario::Preset(Preset::Eq5)));
        assert_eq!(cfg.g, 1.0);
    }

    #[test]
    fn undefined_self_coupling_ratio_is_rejected() {
        let errs = parse_config("spinstar.J1 = 10\nspinstar.B1 = 0").unwrap_err();
        assert!(errs.iter().any(|e| e.key == "spinstar.J1" && e.message.contains("J1")));
        assert!(errs.iter().any(|e| e.key == "scenario"));
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "scenario = spinstar\nspinstar.beta = -1\nspinstar.n1 = x\nfoo = 1\ngrid.dt = 0\nboson.A1 = 1\nnot a pair";
        let errs = parse_config(text).unwrap_err();
        let keys: Vec<&str> = errs.iter().map(|e| e.key.as_str()).collect();
        for want in ["spinstar.beta", "spinstar.n1", "foo", "grid.dt", "boson.A1", "not a pair"] {
            assert!(keys.contains(&want), "{want} missing from {keys:?}");
        }
        let foo = errs.iter().find(|e| e.key == "foo").unwrap();
        assert_eq!(foo.line, Some(4));
        assert_eq!(foo.message, "unknown key");
    }

    #[test]
    fn type_and_duplicate_errors() {
        let errs = parse_config("scenario = eq5\ng = one\ng = 2\nmode = sine").unwrap_err();
        assert_eq!(errs.len(), 3);
        assert!(errs[0].message.contains("expected a number"));
        assert!(errs[1].message.contains("duplicate"));
        assert_eq!(errs[2].key, "mode");
    }

    #[test]
    fn empty_grid_is_an_error() {
        let errs = parse_config("scenario = eq9\ngrid.t0 = 2\ngrid.t_max = 1").unwrap_err();
        assert_eq!(errs[0].key, "grid.t_max");
    }

    #[test]
    fn unknown_scenario_and_missing_kernel_keys() {
        let errs = parse_config("scenario = eq6").unwrap_err();
        assert!(errs[0].message.contains("unknown scenario"));
        let errs = parse_config("scenario = custom-kernel\nkernel.k1 = 2,0,0,0").unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert!(errs.iter().all(|e| e.message == "missing required key"));
    }

    #[test]
    fn custom_kernel_must_start_at_one() {
        let text = "scenario = custom-kernel\nkernel.k1 = 2,1,0,0\nkernel.k2 = 2,0,0,0\nkernel.k12 = const:1\nkernel.l12 = 4,0,0,0";
        let errs = parse_config(text).unwrap_err();
        assert!(errs[0].message.contains("at t = 0"));
        let ok = text.replace("2,1,0,0", "2,0,0,0");
        assert!(parse_config(&ok).is_ok());
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config("# header\n  scenario=eq7   # trailing\n\n g = 0.5 \n").unwrap();
        assert_eq!(cfg.g, 0.5);
    }

    #[test]
    fn measure_only_config() {
        let cfg = parse_config("measure.input = out/eq5.csv").unwrap();
        assert!(cfg.scenario.is_none());
        assert_eq!(cfg.measure_input, Some(PathBuf::from("out/eq5.csv")));
    }

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.5, "0.5"),
            (1e-3, "0.001"),
            (0.1 + 0.2, "0.3"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567891.0, "1.23456789e+09"),
            (1e-5, "1e-05"),
            (1.5e-5, "1.5e-05"),
            (0.0001, "0.0001"),
            (-2.5, "-2.5"),
            (0.0, "0"),
            (9.9999999999, "10"),
            (0.99999999999, "1"),
            (1.93045414e-3, "0.00193045414"),
            (6.02214076e23, "6.02214076e+23"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g9(x), want, "{x}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let grid = Grid::new(0.0, 0.25, 1.0).unwrap();
        let cols = vec![("kappa1".to_string(), vec![1.0, 0.9, 0.8, 0.75, 1.0 / 3.0])];
        let text = render_csv(&grid, &cols);
        assert_eq!(text, "t,kappa1\n0,1\n0.25,0.9\n0.5,0.8\n0.75,0.75\n1,0.333333333\n");
        let (g2, c2) = read_csv(&text).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(c2[0].0, "kappa1");
        assert!(read_csv("t,a\n0,1\n0.1,1\n0.3,1\n").is_err());
    }

    #[test]
    fn eq9_run_matches_gaussian() {
        let cfg = parse_config("scenario = eq9\ngrid.dt = 0.01").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let w = run(&cfg, dir.path()).unwrap();
        let (grid, cols) = read_csv(&fs::read_to_string(&w.data).unwrap()).unwrap();
        assert_eq!(cols.len(), 4);
        for (i, v) in cols[0].1.iter().enumerate() {
            let t = grid.time(i);
            assert_abs_diff_eq!(*v, (-t * t).exp(), epsilon = 1e-8);
        }
        let report = fs::read_to_string(&w.sidecar).unwrap();
        assert!(report.contains("onset.kappa1 = none\n"));
        assert!(report.contains("classification = global-never\n"));
    }

    #[test]
    fn figure_specs_cover_one_to_eight() {
        for n in 1..=8 {
            let s = figure_spec(n).unwrap();
            assert_eq!(s.number, n);
            assert!(parse_config(&render(&s.config)).is_ok());
        }
        assert!(figure_spec(0).is_none());
        assert!(figure_spec(9).is_none());
        let meta = figure_meta(&figure_spec(6).unwrap());
        assert!(meta.contains("boson.Omega1 = 1\n"));
        assert!(meta.contains("decision.Omega1"));
        let meta = figure_meta(&figure_spec(7).unwrap());
        assert!(meta.contains("spinstar.pair_rule = complete_graph\n"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["dephase", "fig", "9"]), 2);
        assert_eq!(main_with_args(["dephase", "bogus"]), 2);
        assert_eq!(main_with_args(["dephase", "run", "--config", "/nonexistent/cfg.txt"]), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        fs::write(&path, "scenario = eq5\nfoo = 1\n").unwrap();
        let code = main_with_args(["dephase", "run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 2);
        assert!(!dir.path().join("eq5.csv").exists());
    }

    fn arb_f64() -> impl Strategy<Value = f64> {
        prop_oneof![(-1e3f64..1e3), (1e-6f64..1e6), Just(0.0), Just(1.0 / 3.0)]
    }

    fn arb_clock() -> impl Strategy<Value = ClockFn> {
        (0.0f64..3.0, prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..3), any::<bool>()).prop_map(
            |(offset, gaps, open)| {
                let mut t = 0.0;
                let mut windows = Vec::new();
                for (gap, len) in gaps {
                    let s = t + gap;
                    t = s + len;
                    windows.push((s, t));
                }
                if open {
                    if let Some(last) = windows.last_mut() {
                        last.1 = f64::INFINITY;
                    }
                }
                ClockFn::new(offset, windows).unwrap()
            },
        )
    }

    fn arb_scenario() -> impl Strategy<Value = Scenario> {
        let preset = prop::sample::select(Preset::ALL.to_vec()).prop_map(Scenario::Preset);
        let boson = (0.0f64..3.0, 0.1f64..3.0, 0.01f64..5.0, arb_clock(), arb_clock(), any::<bool>(), arb_f64()).prop_map(
            |(a, om, beta, c1, c2, frozen, x)| {
                Scenario::Boson(BosonScenario {
                    cfg: OhmicBathConfig {
                        a1: a,
                        a2: a * 0.5,
                        omega1: om,
                        omega2: om + 1.0,
                        beta,
                    },
                    clock1: InteractionClock::new(c1.clone(), c2.clone()),
                    clock2: InteractionClock::new(c2, c1),
                    frozen: frozen.then_some(FrozenEnv2 {
                        gamma2_const: a,
                        xi2_phase_const: x,
                    }),
                })
            },
        );
        let spin = (1usize..5, 1usize..5, 0.5f64..3.0, arb_f64(), 0.0f64..2.0, any::<bool>(), arb_f64()).prop_map(
            |(n1, n2, b, alpha, beta, ring, th)| {
                let mut cfg = SpinStarConfig::symmetric(n1, b, alpha, 1.5, beta);
                cfg.n2 = n2;
                cfg.g2 = (0..n2).map(|k| 1.0 + k as f64 / 7.0).collect();
                cfg.pair_rule = if ring { PairRule::Ring } else { PairRule::CompleteGraph };
                Scenario::SpinStar(SpinStarParams {
                    cfg,
                    theta1_rate: 1.0,
                    theta2: th,
                })
            },
        );
        let sched = (0.0f64..2.0, arb_f64(), arb_f64(), 0.1f64..2.0, 0.1f64..3.0).prop_map(|(w0, c1, c2, t1, g)| {
            Scenario::CustomKernel(CustomKernel::Scheduled {
                w0,
                c1,
                c2,
                sch1: CouplingSchedule::new(vec![(0.0, g), (t1, g / 3.0)]).unwrap(),
                sch2: CouplingSchedule::constant(g),
            })
        });
        let explicit = (arb_f64(), arb_f64(), 0.5f64..3.0).prop_map(|(p, s, shift)| {
            Scenario::CustomKernel(CustomKernel::Explicit {
                w0: 0.0,
                kernels: [
                    KernelPhase::new(p, 1.0, 0.0, s),
                    KernelPhase::new(2.0, 0.5, 1.0, 0.0),
                    KernelPhase::default(),
                    KernelPhase::new(-p, 3.0, 0.0, 0.0),
                ],
                overrides: [None, None, Some(1.0), None],
                time_shift: shift,
            })
        });
        prop_oneof![preset, boson, spin, sched, explicit]
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (
            prop::option::of(arb_scenario()),
            arb_f64(),
            (-1.0f64..1.0, 1e-4f64..0.1, 0.5f64..5.0),
            any::<bool>(),
            1e-12f64..1e-3,
            prop::option::of("[a-z][a-z0-9_-]{0,8}"),
        )
            .prop_map(|(scenario, g, (t0, dt, len), complex, eps, stem)| {
                let measure_input = scenario.is_none().then(|| PathBuf::from("runs/input.csv"));
                RunConfig {
                    scenario,
                    g,
                    grid: GridSpec {
                        t0,
                        dt,
                        t_max: t0 + len,
                    },
                    mode: if complex { TransformMode::ComplexModulus } else { TransformMode::CosineTransform },
                    eps,
                    output_stem: stem,
                    measure_input,
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn render_parse_round_trip(cfg in arb_config()) {
            let text = render(&cfg);
            let back = parse_config(&text);
            prop_assert_eq!(back, Ok(cfg), "{}", text);
        }

        #[test]
        fn g9_round_trips_to_nine_digits(x in -1e12f64..1e12) {
            let s = fmt_g9(x);
            let y: f64 = s.parse().unwrap();
            prop_assert!((x - y).abs() <= 5e-9 * x.abs());
        }
    }
}
