//! Experiment configuration: parsing, defaults and validation.
//!
//! Configs are JSON documents. Fields are decoded one at a time from the raw
//! JSON value so that every problem is reported against the field that
//! caused it, and all problems are reported together.

use std::fmt;

use qspace_core::grid_wave::{make_state, Grid1D, PotentialSpec, StateSpec, Units};
use qspace_core::qwalk::{KernelSpec, TransitionKernel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Version of the config layout understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the root under which run directories are created.
pub const OUTPUT_ROOT_ENV: &str = "QSPACE_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    QeStationarity,
    QeRelaxation,
    ZeroNoiseBohm,
    NodalCrossing,
    ConditionalDensity,
    TypicalityHistograms,
    MaxentSuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::QeStationarity => "qe-stationarity",
            Experiment::QeRelaxation => "qe-relaxation",
            Experiment::ZeroNoiseBohm => "zero-noise-bohm",
            Experiment::NodalCrossing => "nodal-crossing",
            Experiment::ConditionalDensity => "conditional-density",
            Experiment::TypicalityHistograms => "typicality-histograms",
            Experiment::MaxentSuite => "maxent-suite",
        }
    }
}

fn default_length() -> f64 {
    1.0
}

fn default_points() -> usize {
    512
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            length: default_length(),
            points: default_points(),
        }
    }
}

fn default_dt() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub total: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Sample times; defaults to `[0, total]`.
    #[serde(default)]
    pub samples: Vec<f64>,
}

impl TimeConfig {
    pub fn sample_times(&self) -> Vec<f64> {
        if self.samples.is_empty() {
            vec![0.0, self.total]
        } else {
            self.samples.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationParams {
    pub cells: usize,
    /// Required `H̄(T) / H̄(0)` upper bound.
    pub ratio: f64,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        Self { cells: 16, ratio: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroNoiseParams {
    /// Starting positions; defaults to three points around `0.3 L`.
    pub starts: Vec<f64>,
    pub sample_interval: f64,
    pub tolerance: f64,
}

impl Default for ZeroNoiseParams {
    fn default() -> Self {
        Self {
            starts: Vec::new(),
            sample_interval: 0.01,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossingParams {
    /// Time steps to compare; defaults to `dt, dt/2, dt/4`.
    pub dts: Vec<f64>,
    pub sample_interval: f64,
    /// Exclusion half-width around each node, in grid cells.
    pub band_cells: f64,
    pub min_ratio: f64,
    /// Node positions; detected from `|ψ₀|²` when empty.
    pub nodes: Vec<f64>,
}

impl Default for CrossingParams {
    fn default() -> Self {
        Self {
            dts: Vec::new(),
            sample_interval: 0.01,
            band_cells: 2.0,
            min_ratio: 10.0,
            nodes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionalParams {
    pub x1: f64,
    /// Elapsed time of the single step; defaults to `time.dt`.
    pub delta_t: Option<f64>,
    pub p_min: f64,
}

impl Default for ConditionalParams {
    fn default() -> Self {
        Self {
            x1: 0.5,
            delta_t: None,
            p_min: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypicalityParams {
    pub intervals: Vec<(f64, f64)>,
    /// Sample sizes for the half-half volume-law sequence.
    pub volume_law_m: Vec<u64>,
}

impl Default for TypicalityParams {
    fn default() -> Self {
        Self {
            intervals: vec![(0.1, 0.35), (0.5, 0.62)],
            volume_law_m: vec![4, 100, 10_000],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxEntParams {
    pub nodes: usize,
    pub mean_target: f64,
    pub perturbations: usize,
}

impl Default for MaxEntParams {
    fn default() -> Self {
        Self {
            nodes: 400,
            mean_target: 0.6,
            perturbations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Stationarity(StationarityParams),
    Relaxation(RelaxationParams),
    ZeroNoise(ZeroNoiseParams),
    Crossing(CrossingParams),
    Conditional(ConditionalParams),
    Typicality(TypicalityParams),
    MaxEnt(MaxEntParams),
}

/// A fully decoded experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub grid: GridConfig,
    pub units: Units,
    pub state: StateSpec,
    pub potential: PotentialSpec,
    pub kernel: KernelSpec,
    pub walkers: usize,
    pub time: TimeConfig,
    pub bins: usize,
    pub output_dir: Option<String>,
    pub params: Params,
    /// The document as read, echoed into the run report.
    pub raw: Value,
}

/// One validation problem, tied to a config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub field: String,
    pub message: String,
}

impl Finding {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const KNOWN_FIELDS: [&str; 13] = [
    "schema_version",
    "experiment",
    "seed",
    "grid",
    "units",
    "state",
    "potential",
    "kernel",
    "walkers",
    "time",
    "bins",
    "output_dir",
    "params",
];

struct Decoder<'a> {
    obj: &'a Map<String, Value>,
    findings: Vec<Finding>,
}

impl Decoder<'_> {
    fn optional<T: DeserializeOwned>(&mut self, field: &str) -> Option<Option<T>> {
        match self.obj.get(field) {
            None | Some(Value::Null) => Some(None),
            Some(v) => match serde_json::from_value(v.clone()) {
                Ok(t) => Some(Some(t)),
                Err(e) => {
                    self.findings.push(Finding::new(field, e.to_string()));
                    None
                }
            },
        }
    }

    fn required<T: DeserializeOwned>(&mut self, field: &str, missing: &str) -> Option<T> {
        match self.optional(field) {
            Some(Some(t)) => Some(t),
            Some(None) => {
                self.findings.push(Finding::new(field, missing));
                None
            }
            None => None,
        }
    }

    fn or_default<T: DeserializeOwned + Default>(&mut self, field: &str) -> Option<T> {
        self.optional(field).map(Option::unwrap_or_default)
    }
}

/// Decode a config document, collecting every field-level problem.
pub fn parse(text: &str) -> Result<ExperimentConfig, Vec<Finding>> {
    let raw: Value = serde_json::from_str(text).map_err(|e| vec![Finding::new("document", e.to_string())])?;
    let obj = match raw.as_object() {
        Some(o) => o,
        None => return Err(vec![Finding::new("document", "expected a JSON object")]),
    };
    let mut d = Decoder {
        obj,
        findings: Vec::new(),
    };
    for key in obj.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            d.findings.push(Finding::new(key, "unknown field"));
        }
    }
    if let Some(version) = d.required::<u32>("schema_version", "schema_version required") {
        if version != SCHEMA_VERSION {
            d.findings.push(Finding::new(
                "schema_version",
                format!("unsupported version {version}; expected {SCHEMA_VERSION}"),
            ));
        }
    }
    let experiment = d.required::<Experiment>("experiment", "experiment required");
    let seed = d.required::<u64>("seed", "seed required");
    let grid = d.optional::<GridConfig>("grid").map(Option::unwrap_or_default);
    let units = d.optional::<Units>("units").map(Option::unwrap_or_default);
    let state = d.required::<StateSpec>("state", "state required");
    let potential = d
        .optional::<PotentialSpec>("potential")
        .map(|p| p.unwrap_or(PotentialSpec::Zero));
    let kernel = d.or_default::<KernelSpec>("kernel");
    let walkers = d.optional::<usize>("walkers").map(|w| w.unwrap_or(10_000));
    let time = d.required::<TimeConfig>("time", "time required");
    let bins = d.optional::<usize>("bins").map(|b| b.unwrap_or(64));
    let output_dir = d.optional::<String>("output_dir");
    let params = experiment.and_then(|e| {
        let p = obj.get("params").cloned().unwrap_or(Value::Object(Map::new()));
        let p = if p.is_null() { Value::Object(Map::new()) } else { p };
        let decoded = match e {
            Experiment::QeStationarity => serde_json::from_value(p).map(Params::Stationarity),
            Experiment::QeRelaxation => serde_json::from_value(p).map(Params::Relaxation),
            Experiment::ZeroNoiseBohm => serde_json::from_value(p).map(Params::ZeroNoise),
            Experiment::NodalCrossing => serde_json::from_value(p).map(Params::Crossing),
            Experiment::ConditionalDensity => serde_json::from_value(p).map(Params::Conditional),
            Experiment::TypicalityHistograms => serde_json::from_value(p).map(Params::Typicality),
            Experiment::MaxentSuite => serde_json::from_value(p).map(Params::MaxEnt),
        };
        decoded
            .map_err(|err| d.findings.push(Finding::new("params", err.to_string())))
            .ok()
    });
    match (
        experiment, seed, grid, units, state, potential, kernel, walkers, time, bins, output_dir, params,
    ) {
        (
            Some(experiment),
            Some(seed),
            Some(grid),
            Some(units),
            Some(state),
            Some(potential),
            Some(kernel),
            Some(walkers),
            Some(time),
            Some(bins),
            Some(output_dir),
            Some(params),
        ) if d.findings.is_empty() => Ok(ExperimentConfig {
            experiment,
            seed,
            grid,
            units,
            state,
            potential,
            kernel,
            walkers,
            time,
            bins,
            output_dir,
            params,
            raw: raw.clone(),
        }),
        _ => Err(d.findings),
    }
}

fn whole_steps(span: f64, dt: f64) -> bool {
    let r = span / dt;
    (r - r.round()).abs() <= 1e-6 * r.round().max(1.0)
}

/// Semantic checks on a decoded config. Empty iff the config is runnable.
pub fn check(cfg: &ExperimentConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |field: &str, msg: String| out.push(Finding::new(field, msg));
    let grid = Grid1D::<f64>::new(cfg.grid.length, cfg.grid.points);
    if let Err(e) = &grid {
        push("grid", e.to_string());
    }
    if !(cfg.units.hbar.is_finite() && cfg.units.hbar > 0.0 && cfg.units.mass.is_finite() && cfg.units.mass > 0.0) {
        push("units", "hbar and mass must be positive".into());
    }
    let t = &cfg.time;
    if !(t.dt.is_finite() && t.dt > 0.0) {
        push("time.dt", format!("dt must be positive, got {}", t.dt));
    }
    if !(t.total.is_finite() && t.total >= 0.0) {
        push("time.total", format!("total must be non-negative, got {}", t.total));
    } else if t.dt > 0.0 && !whole_steps(t.total, t.dt) {
        push(
            "time.total",
            format!("{} is not a whole number of steps of {}", t.total, t.dt),
        );
    }
    if t.dt > 0.0 {
        for &s in &t.samples {
            if !(s >= 0.0 && s <= t.total * (1.0 + 1e-12)) || !whole_steps(s, t.dt) {
                push(
                    "time.samples",
                    format!("sample time {s} is outside [0, T] or off the step grid"),
                );
            }
        }
    }
    if cfg.walkers == 0 {
        push("walkers", "at least one walker required".into());
    }
    if let Ok(g) = &grid {
        if cfg.bins == 0 || g.points() % cfg.bins != 0 {
            push(
                "bins",
                format!("{} bins do not divide {} grid points", cfg.bins, g.points()),
            );
        }
        if let Err(e) = make_state(&cfg.state, *g, cfg.units) {
            push("state", e.to_string());
        }
        if let Err(e) = cfg.potential.build(g, cfg.units) {
            push("potential", e.to_string());
        }
    }
    let kernel = TransitionKernel::<f64>::from_spec(&cfg.kernel, cfg.units);
    if let Err(e) = &kernel {
        push("kernel", e.to_string());
    }
    let length = cfg.grid.length;
    match &cfg.params {
        Params::Stationarity(_) => {}
        Params::Relaxation(p) => {
            if p.cells == 0 || !cfg.grid.points.is_multiple_of(p.cells) {
                push("params.cells", format!("{} cells do not divide the grid", p.cells));
            }
            if !(p.ratio > 0.0) {
                push("params.ratio", "ratio must be positive".into());
            }
            if t.dt > 0.0 && !whole_steps(t.total / 2.0, t.dt) {
                push("time.total", "T/2 must be a whole number of steps".into());
            }
        }
        Params::ZeroNoise(p) => {
            if p.starts.iter().any(|x| !(x.is_finite() && *x >= 0.0 && *x < length)) {
                push("params.starts", "starts must lie in [0, L)".into());
            }
            if !(p.tolerance > 0.0) {
                push("params.tolerance", "tolerance must be positive".into());
            }
            if t.dt > 0.0 && !(p.sample_interval > 0.0 && whole_steps(p.sample_interval, t.dt)) {
                push("params.sample_interval", "must be a positive multiple of dt".into());
            }
        }
        Params::Crossing(p) => {
            let dts = if p.dts.is_empty() { vec![t.dt] } else { p.dts.clone() };
            for dt in dts {
                if !(dt > 0.0 && whole_steps(p.sample_interval, dt) && whole_steps(t.total, dt)) {
                    push(
                        "params.dts",
                        format!("dt {dt} must divide both the sample interval and the total time"),
                    );
                }
            }
            if !(p.sample_interval > 0.0) {
                push("params.sample_interval", "must be positive".into());
            }
            if !(p.band_cells >= 0.0) {
                push("params.band_cells", "must be non-negative".into());
            }
            if p.nodes.iter().any(|x| !(x.is_finite() && *x >= 0.0 && *x < length)) {
                push("params.nodes", "nodes must lie in [0, L)".into());
            }
        }
        Params::Conditional(p) => {
            if let Ok(k) = &kernel {
                if k.density(0.0, 1.0, 1.0).is_err() {
                    push("kernel", "degenerate kernel density".into());
                }
            }
            if !(p.x1.is_finite() && p.x1 >= 0.0 && p.x1 < length) {
                push("params.x1", "x1 must lie in [0, L)".into());
            }
            if let Some(d) = p.delta_t {
                if !(d > 0.0 && d.is_finite()) {
                    push("params.delta_t", "delta_t must be positive".into());
                }
            }
        }
        Params::Typicality(p) => {
            for &(a, b) in &p.intervals {
                if !(a >= 0.0 && a <= b && b <= length) {
                    push("params.intervals", format!("[{a}, {b}) is not inside [0, L)"));
                }
            }
            if p.volume_law_m.iter().any(|&m| m < 2 || m % 2 != 0) {
                push("params.volume_law_m", "sizes must be even and at least 2".into());
            }
        }
        Params::MaxEnt(p) => {
            if p.nodes < 2 {
                push("params.nodes", "at least two quadrature nodes".into());
            }
            if !(p.mean_target > 0.0 && p.mean_target < 1.0) {
                push("params.mean_target", "mean on [0, 1] must lie strictly inside".into());
            }
        }
    }
    out
}

/// Parse and check in one go.
pub fn validate(text: &str) -> Result<ExperimentConfig, Vec<Finding>> {
    let cfg = parse(text)?;
    let findings = check(&cfg);
    if findings.is_empty() {
        Ok(cfg)
    } else {
        Err(findings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        serde_json::json!({
            "schema_version": 1,
            "experiment": "qe-stationarity",
            "seed": 7,
            "state": { "kind": "uniform" },
            "time": { "total": 0.01, "dt": 0.001 }
        })
    }

    fn findings(v: &Value) -> Vec<Finding> {
        validate(&v.to_string()).err().unwrap_or_default()
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = validate(&base().to_string()).unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.walkers, 10_000);
        assert_eq!(cfg.bins, 64);
        assert_eq!(cfg.kernel, KernelSpec::default());
        assert_eq!(cfg.time.sample_times(), vec![0.0, 0.01]);
    }

    #[test]
    fn missing_seed_is_reported() {
        let mut v = base();
        v.as_object_mut().unwrap().remove("seed");
        let f = findings(&v);
        assert_eq!(f, vec![Finding::new("seed", "seed required")]);
    }

    #[test]
    fn non_positive_dt_is_reported() {
        let mut v = base();
        v["time"]["dt"] = serde_json::json!(0.0);
        assert!(findings(&v).iter().any(|f| f.field == "time.dt"));
        v["time"]["dt"] = serde_json::json!(-1e-3);
        assert!(findings(&v).iter().any(|f| f.field == "time.dt"));
    }

    #[test]
    fn zero_kernel_conditional_density_is_degenerate() {
        let mut v = base();
        v["experiment"] = "conditional-density".into();
        v["kernel"] = serde_json::json!({ "kind": "zero" });
        let f = findings(&v);
        assert!(
            f.contains(&Finding::new("kernel", "degenerate kernel density")),
            "{f:?}"
        );
    }

    #[test]
    fn unknown_kinds_and_fields_are_reported() {
        let mut v = base();
        v["state"] = serde_json::json!({ "kind": "hydrogen" });
        v["colour"] = "blue".into();
        let f = findings(&v);
        assert!(f
            .iter()
            .any(|x| x.field == "state" && x.message.contains("unknown variant")));
        assert!(f.contains(&Finding::new("colour", "unknown field")));
    }

    #[test]
    fn semantic_problems_are_collected() {
        let mut v = base();
        v["grid"] = serde_json::json!({ "points": 500 });
        v["time"]["samples"] = serde_json::json!([0.5]);
        v["schema_version"] = 9.into();
        let f = parse(&v.to_string()).err().unwrap();
        assert_eq!(f[0].field, "schema_version");
        v["schema_version"] = 1.into();
        let cfg = parse(&v.to_string()).unwrap();
        let f = check(&cfg);
        assert!(f.iter().any(|x| x.field == "grid"));
        assert!(f.iter().any(|x| x.field == "time.samples"));
    }

    #[test]
    fn params_are_decoded_per_experiment() {
        let mut v = base();
        v["experiment"] = "qe-relaxation".into();
        v["params"] = serde_json::json!({ "cells": 8 });
        let cfg = validate(&v.to_string()).unwrap();
        assert_eq!(
            cfg.params,
            Params::Relaxation(RelaxationParams { cells: 8, ratio: 0.2 })
        );
        v["params"] = serde_json::json!({ "cellz": 8 });
        assert!(findings(&v).iter().any(|f| f.field == "params"));
    }
}
