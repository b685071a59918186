//! Config-driven experiment runner behind the command-line tool.
//!
//! A run is described by an [`ExperimentConfig`], which pairs the experiment
//! and its typed parameters with output settings. Configs
//! come from a flat `key = value` file or a JSON object, overlaid with
//! explicit overrides. Every parameter is checked by [`ExperimentConfig::validate`]
//! before anything is computed, and [`run`] maps each experiment onto the
//! library operations without extra logic.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Map, Value};

use crate::bergman::{
    analytic_series_one, positive_series_one, sparse_domination_batch, BergmanOperator, NEAR_SHARE_LIMIT,
};
use crate::error::{check_disc_index, invalid, Error, Result};
use crate::geometry::{DyadicSystem, MeasureConvention};
use crate::grid::{CubeGrid, DiscGrid, Grid, GridFunction, PolarGrid, RadialLayout};
use crate::norms::{op_norm_corner, weak_norm, Corner};
use crate::operators::{apply_maximal, apply_sparse_cube, level_set_decomposition, MaximalOperator, SparseOperator};
use crate::regions::{
    bourgain_combine, classify, critical_slope, fit_layer_exponent, graded_endpoint, region_samples, segment_ends,
    CornerBound, LayerNormSeries, OperatorClass,
};
use crate::sparse::{even_generations, family_carleson, family_counterexample, full_tree, GradedSparseFamily};
use crate::weights::{
    bekolle_bonami, default_schedule, endpoint_exponent, endpoint_strong_condition, endpoint_weak_condition,
    RadialWeight,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const LIBRARY: &str = env!("CARGO_PKG_NAME");

/// Largest blow-up parameter; the sampling grid has `2^(m+1)` cells.
pub const MAX_BLOWUP_M: u32 = 22;
/// Cap on polar grid nodes for a single run.
pub const MAX_NODES: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid("format", format!("`{other}` is neither csv nor json"))),
        }
    }
}

/// Accepts strings, numbers and booleans, keeping their text.
fn text<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(serde::de::Error::custom(format!("expected text, found {other}"))),
    }
}

fn opt_text<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    match Value::deserialize(d)? {
        Value::Null => Ok(None),
        Value::String(s) => Ok(Some(s)),
        Value::Number(n) => Ok(Some(n.to_string())),
        other => Err(serde::de::Error::custom(format!("expected text, found {other}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionParams {
    pub t: f64,
    #[serde(deserialize_with = "text")]
    pub kind: String,
    pub resolution: usize,
    /// Real dimension of the underlying space.
    pub n: usize,
    pub eta: f64,
    pub degree: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        RegionParams {
            t: 1.25,
            kind: "singular".into(),
            resolution: 101,
            n: 2,
            eta: 0.5,
            degree: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerNormsParams {
    /// `carleson`, `counterexample`, `full_tree`, `even_generations` or `file:<path>`.
    #[serde(deserialize_with = "text")]
    pub family: String,
    pub t: f64,
    pub jmin: usize,
    pub jmax: usize,
    /// Family depth; defaults to `jmax`.
    pub depth: Option<u32>,
    pub m: u32,
    pub dim: usize,
    #[serde(deserialize_with = "text")]
    pub system: String,
    #[serde(deserialize_with = "text")]
    pub convention: String,
}

impl Default for LayerNormsParams {
    fn default() -> Self {
        LayerNormsParams {
            family: "carleson".into(),
            t: 1.25,
            jmin: 2,
            jmax: 12,
            depth: None,
            m: 8,
            dim: 1,
            system: "standard".into(),
            convention: "exact".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BourgainParams {
    /// Used to fit the rates when `beta1`/`beta2` are absent.
    pub t: f64,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub c1: f64,
    pub c2: f64,
    #[serde(deserialize_with = "text")]
    pub p1: String,
    #[serde(deserialize_with = "text")]
    pub q1: String,
    #[serde(deserialize_with = "text")]
    pub p2: String,
    #[serde(deserialize_with = "text")]
    pub q2: String,
    pub jmin: usize,
    pub jmax: usize,
    #[serde(deserialize_with = "text")]
    pub system: String,
    #[serde(deserialize_with = "text")]
    pub convention: String,
}

impl Default for BourgainParams {
    fn default() -> Self {
        BourgainParams {
            t: 1.25,
            beta1: None,
            beta2: None,
            c1: 1.0,
            c2: 1.0,
            p1: "1".into(),
            q1: "1".into(),
            p2: "inf".into(),
            q2: "1".into(),
            jmin: 2,
            jmax: 12,
            system: "standard".into(),
            convention: "exact".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalParams {
    pub t: f64,
    #[serde(deserialize_with = "text")]
    pub system: String,
    #[serde(deserialize_with = "text")]
    pub convention: String,
    pub levels: u32,
    pub rings_per_level: usize,
    pub angles_per_arc: usize,
    pub min_angles: usize,
    pub depth: Option<u32>,
    /// `one` or `annulus:<k>`.
    #[serde(deserialize_with = "text")]
    pub input: String,
}

impl Default for MaximalParams {
    fn default() -> Self {
        MaximalParams {
            t: 1.25,
            system: "standard".into(),
            convention: "exact".into(),
            levels: 10,
            rings_per_level: 2,
            angles_per_arc: 4,
            min_angles: 8,
            depth: None,
            input: "one".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BergmanParams {
    pub t: f64,
    /// `analytic` or `positive`.
    #[serde(deserialize_with = "text")]
    pub kernel: String,
    pub n_r: usize,
    pub n_theta: usize,
    pub r_max: f64,
    #[serde(deserialize_with = "text")]
    pub layout: String,
    /// `one` or `power:<γ>` for `(1-|z|)^γ`.
    #[serde(deserialize_with = "text")]
    pub input: String,
}

impl Default for BergmanParams {
    fn default() -> Self {
        BergmanParams {
            t: 1.25,
            kernel: "positive".into(),
            n_r: 128,
            n_theta: 256,
            r_max: 0.999,
            layout: "geometric".into(),
            input: "one".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DominateParams {
    pub t: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub r_max: f64,
    #[serde(deserialize_with = "text")]
    pub layout: String,
    pub depth: Option<u32>,
    pub samples: usize,
    /// Mandatory: the inputs are random.
    pub seed: Option<u64>,
    /// Angular frequencies `0..modes` in the random inputs.
    pub modes: usize,
    /// Polynomial degree of the radial coefficients.
    pub poly_degree: usize,
}

impl Default for DominateParams {
    fn default() -> Self {
        DominateParams {
            t: 1.25,
            n_r: 128,
            n_theta: 128,
            r_max: 1.0 - (-6f64).exp2(),
            layout: "uniform".into(),
            depth: None,
            samples: 100,
            seed: None,
            modes: 3,
            poly_degree: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsParams {
    /// `none`, `power:<γ>` or `table:<path>`.
    #[serde(deserialize_with = "text")]
    pub weight: String,
    pub t: f64,
    pub k_max: u32,
    /// Békollé–Bonami exponent; defaults to `1/(3-2t)`.
    pub l: Option<f64>,
}

impl Default for WeightsParams {
    fn default() -> Self {
        WeightsParams {
            weight: "none".into(),
            t: 1.25,
            k_max: 40,
            l: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupParams {
    pub m: u32,
    pub t: f64,
}

impl Default for BlowupParams {
    fn default() -> Self {
        BlowupParams { m: 12, t: 1.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeParams {
    pub t: f64,
    #[serde(deserialize_with = "text")]
    pub system: String,
    #[serde(deserialize_with = "text")]
    pub convention: String,
    pub alpha: f64,
    pub levels: u32,
    pub depth: Option<u32>,
    /// `one` or `random` (needs `seed`).
    #[serde(deserialize_with = "text")]
    pub input: String,
    pub scale: f64,
    #[serde(deserialize_with = "opt_text_u64", default)]
    pub seed: Option<u64>,
}

fn opt_text_u64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<u64>, D::Error> {
    match opt_text(d)? {
        None => Ok(None),
        Some(s) => s.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

impl Default for DecomposeParams {
    fn default() -> Self {
        DecomposeParams {
            t: 1.25,
            system: "standard".into(),
            convention: "exact".into(),
            alpha: 1.0,
            levels: 8,
            depth: None,
            input: "random".into(),
            scale: 4.0,
            seed: None,
        }
    }
}

/// One experiment family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    Region(RegionParams),
    LayerNorms(LayerNormsParams),
    Bourgain(BourgainParams),
    Maximal(MaximalParams),
    Bergman(BergmanParams),
    Dominate(DominateParams),
    Weights(WeightsParams),
    Blowup(BlowupParams),
    Decompose(DecomposeParams),
}

impl Experiment {
    pub const NAMES: [&'static str; 9] = [
        "region",
        "layer-norms",
        "bourgain",
        "maximal",
        "bergman",
        "dominate",
        "weights",
        "blowup",
        "decompose",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Region(_) => "region",
            Experiment::LayerNorms(_) => "layer-norms",
            Experiment::Bourgain(_) => "bourgain",
            Experiment::Maximal(_) => "maximal",
            Experiment::Bergman(_) => "bergman",
            Experiment::Dominate(_) => "dominate",
            Experiment::Weights(_) => "weights",
            Experiment::Blowup(_) => "blowup",
            Experiment::Decompose(_) => "decompose",
        }
    }

    /// Builds the experiment from a parameter object; unknown keys are errors.
    pub fn from_params(name: &str, params: Map<String, Value>) -> Result<Self> {
        if !Self::NAMES.contains(&name) {
            return Err(invalid("experiment", format!("unknown experiment `{name}`")));
        }
        serde_json::from_value(json!({ "experiment": name, "params": params }))
            .map_err(|e| invalid("config", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub format: Format,
    pub output: Option<PathBuf>,
    /// Adds a generation time to headers; off by default to keep outputs
    /// byte-identical across runs.
    #[serde(default)]
    pub timestamp: bool,
}

/// Parses a flat `key = value` file (`#` comments allowed) or a JSON object.
pub fn parse_config_text(text: &str) -> Result<Map<String, Value>> {
    let trimmed = text.trim_start();
    let raw = if trimmed.starts_with('{') {
        match serde_json::from_str::<Value>(trimmed) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(Error::Parse { line: 1, reason: "JSON config must be an object".into() }),
            Err(e) => {
                return Err(Error::Parse {
                    line: e.line(),
                    reason: e.to_string(),
                })
            }
        }
    } else {
        let mut map = Map::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected key = value, found `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse { line: i + 1, reason: "empty key".into() });
            }
            let value = value.trim().trim_matches('"');
            if map.insert(key.to_string(), scalar(value)).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("duplicate key `{key}`"),
                });
            }
        }
        map
    };
    // `n-r` and `n_r` are the same key
    Ok(raw.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect())
}

/// Numbers and booleans become JSON scalars, everything else stays text.
fn scalar(value: &str) -> Value {
    match serde_json::from_str::<Value>(value) {
        Ok(v @ (Value::Number(_) | Value::Bool(_))) => v,
        _ => Value::String(value.to_string()),
    }
}

impl ExperimentConfig {
    /// Merges a config file (if any) with overrides, which take precedence.
    /// The reserved keys `experiment`, `format`, `output` and `timestamp`
    /// may appear in the file; `experiment` must agree with `name`.
    pub fn resolve(name: &str, file: Option<&Path>, overrides: Map<String, Value>) -> Result<Self> {
        let mut params = match file {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => Map::new(),
        };
        for (k, v) in overrides {
            if !v.is_null() {
                params.insert(k.replace('-', "_"), v);
            }
        }
        if let Some(declared) = params.remove("experiment") {
            if declared.as_str() != Some(name) {
                return Err(invalid("experiment", format!("config declares {declared}, command is `{name}`")));
            }
        }
        let format = match params.remove("format") {
            None => Format::default(),
            Some(Value::String(s)) => s.parse()?,
            Some(other) => return Err(invalid("format", format!("{other} is not a format"))),
        };
        let output = match params.remove("output") {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => return Err(invalid("output", format!("{other} is not a path"))),
        };
        let timestamp = match params.remove("timestamp") {
            None => false,
            Some(Value::Bool(b)) => b,
            Some(other) => return Err(invalid("timestamp", format!("{other} is not a boolean"))),
        };
        Ok(ExperimentConfig {
            experiment: Experiment::from_params(name, params)?,
            format,
            output,
            timestamp,
        })
    }

    /// Checks every parameter against the preconditions of the operation it
    /// feeds, without computing anything.
    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Region(p) => {
                p.kind.parse::<OperatorClass>()?;
                critical_slope(p.n, p.t, p.eta, p.degree)?;
                if p.resolution < 2 {
                    return Err(invalid("resolution", "need at least 2 points per axis"));
                }
            }
            Experiment::LayerNorms(p) => {
                check_operator_index(p.t)?;
                let spec = FamilySpec::parse(p)?;
                if p.jmin > p.jmax {
                    return Err(invalid("jmin", format!("{} exceeds jmax = {}", p.jmin, p.jmax)));
                }
                if p.jmax < p.jmin + 1 {
                    return Err(invalid("jmax", "fitting needs at least two layers"));
                }
                if let FamilySpec::File(path) = &spec {
                    if !path.exists() {
                        return Err(invalid("family", format!("{} does not exist", path.display())));
                    }
                }
            }
            Experiment::Bourgain(p) => {
                for (name, v) in [("p1", &p.p1), ("q1", &p.q1), ("p2", &p.p2), ("q2", &p.q2)] {
                    let e = parse_exponent(name, v)?;
                    if e < 1.0 {
                        return Err(invalid(name, format!("{v} is below 1")));
                    }
                }
                for (name, c) in [("c1", p.c1), ("c2", p.c2)] {
                    if !(c > 0.0 && c.is_finite()) {
                        return Err(invalid(name, format!("{c} must be positive")));
                    }
                }
                match (p.beta1, p.beta2) {
                    (Some(b1), Some(b2)) => {
                        if !(b1 > 0.0 && b2 > 0.0) {
                            return Err(invalid("beta", "both rates must be positive"));
                        }
                    }
                    (None, None) => {
                        check_disc_index(p.t)?;
                        p.system.parse::<DyadicSystem>()?;
                        p.convention.parse::<MeasureConvention>()?;
                        if p.jmax < p.jmin + 1 {
                            return Err(invalid("jmax", "fitting needs at least two layers"));
                        }
                    }
                    _ => return Err(invalid("beta", "give both beta1 and beta2, or neither to fit them")),
                }
            }
            Experiment::Maximal(p) => {
                MaximalOperator::new(p.system.parse()?, p.t)?;
                p.convention.parse::<MeasureConvention>()?;
                MaximalInput::parse(&p.input, p.levels)?;
                if p.levels > 20 {
                    return Err(invalid("levels", format!("{} exceeds 20", p.levels)));
                }
                if p.rings_per_level == 0 || p.angles_per_arc == 0 {
                    return Err(invalid("grid", "cells per level must be at least 1"));
                }
            }
            Experiment::Bergman(p) => {
                check_disc_index(p.t)?;
                if !matches!(p.kernel.as_str(), "analytic" | "positive") {
                    return Err(invalid("kernel", format!("`{}` is neither analytic nor positive", p.kernel)));
                }
                check_tensor(p.n_r, p.n_theta, p.r_max, &p.layout)?;
                BergmanInput::parse(&p.input)?;
            }
            Experiment::Dominate(p) => {
                check_disc_index(p.t)?;
                check_tensor(p.n_r, p.n_theta, p.r_max, &p.layout)?;
                if p.seed.is_none() {
                    return Err(invalid("seed", "random inputs need an explicit seed"));
                }
                if p.samples == 0 || p.modes == 0 {
                    return Err(invalid("samples", "need at least one sample and one mode"));
                }
                if 2 * p.modes > p.n_theta {
                    return Err(invalid("modes", "frequencies must stay below half the angular resolution"));
                }
            }
            Experiment::Weights(p) => {
                check_disc_index(p.t)?;
                let _: RadialWeight = p.weight.parse()?;
                if p.k_max < 4 {
                    return Err(invalid("k_max", "need at least 4 annuli"));
                }
                if let Some(l) = p.l {
                    if !(l > 1.0) {
                        return Err(invalid("l", format!("{l} must exceed 1")));
                    }
                }
            }
            Experiment::Blowup(p) => {
                check_operator_index(p.t)?;
                if !(1..=MAX_BLOWUP_M).contains(&p.m) {
                    return Err(invalid("m", format!("{} must lie in 1..={MAX_BLOWUP_M}", p.m)));
                }
            }
            Experiment::Decompose(p) => {
                MaximalOperator::new(p.system.parse()?, p.t)?;
                p.convention.parse::<MeasureConvention>()?;
                if !(p.alpha > 0.0) {
                    return Err(invalid("alpha", format!("{} must be positive", p.alpha)));
                }
                if p.levels > 16 {
                    return Err(invalid("levels", format!("{} exceeds 16", p.levels)));
                }
                match p.input.as_str() {
                    "one" => {}
                    "random" if p.seed.is_none() => return Err(invalid("seed", "random inputs need an explicit seed")),
                    "random" => {
                        if !(p.scale > 0.0) {
                            return Err(invalid("scale", "must be positive"));
                        }
                    }
                    other => return Err(invalid("input", format!("`{other}` is neither one nor random"))),
                }
            }
        }
        Ok(())
    }
}

fn check_operator_index(t: f64) -> Result<()> {
    if t.is_finite() && t > 1.0 {
        Ok(())
    } else {
        Err(invalid("t", format!("{t} must exceed 1")))
    }
}

fn check_tensor(n_r: usize, n_theta: usize, r_max: f64, layout: &str) -> Result<()> {
    layout.parse::<RadialLayout>()?;
    if n_r == 0 || n_theta == 0 {
        return Err(invalid("grid", "need at least one ring and one angle"));
    }
    if n_r.saturating_mul(n_theta) > MAX_NODES {
        return Err(invalid("grid", format!("{n_r} x {n_theta} nodes exceeds {MAX_NODES}")));
    }
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(invalid("r_max", format!("{r_max} must lie in (0, 1)")));
    }
    Ok(())
}

fn parse_exponent(name: &'static str, s: &str) -> Result<f64> {
    match s {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| invalid(name, format!("`{s}` is not an exponent"))),
    }
}

enum FamilySpec {
    Carleson,
    Counterexample,
    FullTree,
    EvenGenerations,
    File(PathBuf),
}

impl FamilySpec {
    fn parse(p: &LayerNormsParams) -> Result<Self> {
        p.system.parse::<DyadicSystem>()?;
        p.convention.parse::<MeasureConvention>()?;
        Ok(match p.family.as_str() {
            "carleson" => FamilySpec::Carleson,
            "counterexample" => FamilySpec::Counterexample,
            "full_tree" => FamilySpec::FullTree,
            "even_generations" => FamilySpec::EvenGenerations,
            other => match other.strip_prefix("file:") {
                Some(path) => FamilySpec::File(PathBuf::from(path)),
                None => return Err(invalid("family", format!("unknown family `{other}`"))),
            },
        })
    }

    fn build(&self, p: &LayerNormsParams) -> Result<GradedSparseFamily> {
        let depth = p.depth.unwrap_or(p.jmax as u32);
        match self {
            FamilySpec::Carleson => family_carleson(depth, p.system.parse()?, p.convention.parse()?),
            FamilySpec::Counterexample => family_counterexample(p.m),
            FamilySpec::FullTree => full_tree(p.dim, depth),
            FamilySpec::EvenGenerations => even_generations(p.dim, depth),
            FamilySpec::File(path) => GradedSparseFamily::from_text(&std::fs::read_to_string(path)?),
        }
    }
}

enum MaximalInput {
    One,
    Annulus(u32),
}

impl MaximalInput {
    fn parse(s: &str, levels: u32) -> Result<Self> {
        if s == "one" {
            return Ok(MaximalInput::One);
        }
        let k = s
            .strip_prefix("annulus:")
            .and_then(|k| k.parse::<u32>().ok())
            .ok_or_else(|| invalid("input", format!("`{s}` is neither one nor annulus:<k>")))?;
        if k > levels {
            return Err(invalid("input", format!("annulus {k} lies beyond the grid's {levels} levels")));
        }
        Ok(MaximalInput::Annulus(k))
    }
}

enum BergmanInput {
    One,
    Power(f64),
}

impl BergmanInput {
    fn parse(s: &str) -> Result<Self> {
        if s == "one" {
            return Ok(BergmanInput::One);
        }
        match s.strip_prefix("power:").map(str::parse::<f64>) {
            Some(Ok(g)) if g > -1.0 => Ok(BergmanInput::Power(g)),
            _ => Err(invalid("input", format!("`{s}` is neither one nor power:<γ> with γ > -1"))),
        }
    }
}

/// Output of one experiment: scalar summary values plus one table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub summary: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Report {
    fn new(columns: &[&str]) -> Self {
        Report {
            summary: Map::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

/// JSON number for finite values, `"inf"`, `"-inf"` or `"nan"` otherwise.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| {
        Value::String(if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        })
    })
}

/// Validates, then runs the experiment.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    match &config.experiment {
        Experiment::Region(p) => run_region(p),
        Experiment::LayerNorms(p) => run_layer_norms(p),
        Experiment::Bourgain(p) => run_bourgain(p),
        Experiment::Maximal(p) => run_maximal(p),
        Experiment::Bergman(p) => run_bergman(p),
        Experiment::Dominate(p) => run_dominate(p),
        Experiment::Weights(p) => run_weights(p),
        Experiment::Blowup(p) => run_blowup(p),
        Experiment::Decompose(p) => run_decompose(p),
    }
}

fn run_region(p: &RegionParams) -> Result<Report> {
    let kind: OperatorClass = p.kind.parse()?;
    let sigma = critical_slope(p.n, p.t, p.eta, p.degree)?;
    let endpoint = graded_endpoint(p.n, p.t, p.eta, p.degree)?;
    let mut report = Report::new(&["ip", "iq", "class"]);
    report.note("sigma", num(sigma));
    report.note("endpoint_ip", num(endpoint));
    report.note("endpoint_p", num(1.0 / endpoint));
    let ends: Vec<Value> = segment_ends(sigma)
        .into_iter()
        .map(|pt| {
            let class = classify(pt, sigma, kind);
            json!({ "ip": num(pt.ip), "iq": num(pt.iq), "class": class.name(), "restricted_only": class.is_restricted_only() })
        })
        .collect();
    report.note("segment_ends", ends);
    for s in region_samples(sigma, kind, p.resolution)? {
        report.rows.push(vec![num(s.point.ip), num(s.point.iq), s.class.name().into()]);
    }
    Ok(report)
}

fn corner_series(family: &GradedSparseFamily, t: f64, corner: Corner, layers: &[usize]) -> Result<LayerNormSeries> {
    let points = layers
        .iter()
        .map(|&j| Ok((j as u32, op_norm_corner(family, t, corner, Some(j))?)))
        .collect::<Result<Vec<_>>>()?;
    LayerNormSeries::new(corner.label(), points)
}

fn layer_range(family: &GradedSparseFamily, jmin: usize, jmax: usize) -> Result<Vec<usize>> {
    let top = jmax.min(family.num_layers().saturating_sub(1));
    if top < jmin + 1 {
        return Err(invalid(
            "jmax",
            format!("family has {} layers; layers {jmin}..={top} are too few to fit", family.num_layers()),
        ));
    }
    Ok((jmin..=top).collect())
}

fn run_layer_norms(p: &LayerNormsParams) -> Result<Report> {
    let spec = FamilySpec::parse(p)?;
    let family = spec.build(p)?;
    let layers = layer_range(&family, p.jmin, p.jmax)?;
    let mut report = Report::new(&["layer", "norm_1_1", "norm_inf_1", "norm_inf_inf", "norm_1_inf"]);
    for &j in &layers {
        let mut row = vec![Value::from(j)];
        for corner in Corner::ALL {
            row.push(num(op_norm_corner(&family, p.t, corner, Some(j))?));
        }
        report.rows.push(row);
    }
    report.note("family", family.name());
    report.note("members", family.len());
    report.note("layers", family.num_layers());
    for (corner, key) in [(Corner::OneOne, "1_1"), (Corner::InfOne, "inf_1")] {
        let fit = fit_layer_exponent(&corner_series(&family, p.t, corner, &layers)?)?;
        report.note(&format!("slope_{key}"), num(fit.slope));
        report.note(&format!("intercept_{key}"), num(fit.intercept));
        report.note(&format!("fit_residual_{key}"), num(fit.residual));
    }
    if matches!(spec, FamilySpec::Carleson) {
        report.note("model_slope_1_1", num(2.0 * (p.t - 1.0)));
        report.note("model_slope_inf_1", num(-(3.0 - 2.0 * p.t)));
    }
    for corner in Corner::ALL {
        report.note(&format!("total_{}", corner.label().replace(',', "_")), num(op_norm_corner(&family, p.t, corner, None)?));
    }
    Ok(report)
}

fn run_bourgain(p: &BourgainParams) -> Result<Report> {
    let (b1, b2, source) = match (p.beta1, p.beta2) {
        (Some(b1), Some(b2)) => (b1, b2, "given"),
        _ => {
            let family = family_carleson(p.jmax as u32, p.system.parse()?, p.convention.parse()?)?;
            let layers = layer_range(&family, p.jmin, p.jmax)?;
            let b1 = fit_layer_exponent(&corner_series(&family, p.t, Corner::OneOne, &layers)?)?.slope;
            let b2 = -fit_layer_exponent(&corner_series(&family, p.t, Corner::InfOne, &layers)?)?.slope;
            (b1, b2, "fitted")
        }
    };
    let first = CornerBound {
        beta: b1,
        constant: p.c1,
        p: parse_exponent("p1", &p.p1)?,
        q: parse_exponent("q1", &p.q1)?,
    };
    let second = CornerBound {
        beta: b2,
        constant: p.c2,
        p: parse_exponent("p2", &p.p2)?,
        q: parse_exponent("q2", &p.q2)?,
    };
    let r = bourgain_combine(first, second)?;
    let mut report = Report::new(&["beta1", "beta2", "theta", "ip", "iq", "constant_shape"]);
    report.rows.push(vec![num(b1), num(b2), num(r.theta), num(r.point.ip), num(r.point.iq), num(r.constant_shape)]);
    report.note("source", source);
    if source == "fitted" {
        report.note("model_ip", num(3.0 - 2.0 * p.t));
        report.note("model_iq", num(1.0));
    }
    Ok(report)
}

fn run_maximal(p: &MaximalParams) -> Result<Report> {
    let system: DyadicSystem = p.system.parse()?;
    let mut op = MaximalOperator::new(system, p.t)?;
    op.convention = p.convention.parse()?;
    if let Some(d) = p.depth {
        op = op.with_depth(d);
    }
    let grid = PolarGrid::dyadic(p.levels, p.rings_per_level, p.angles_per_arc, p.min_angles)?;
    let input = MaximalInput::parse(&p.input, p.levels)?;
    let f = match input {
        MaximalInput::One => GridFunction::constant(&grid, 1.0),
        MaximalInput::Annulus(k) => {
            let (lo, hi) = ((-(k as f64) - 1.0).exp2(), (-(k as f64)).exp2());
            grid.sample(|s, _| if s > lo && s <= hi { 1.0 } else { 0.0 })
        }
    };
    let out = apply_maximal(&op, &f)?;
    let model_exp = -2.0 * (p.t - 1.0);
    let mut report = Report::new(&["ring", "s_mid", "min", "max", "model"]);
    for (k, ring) in grid.rings().iter().enumerate() {
        let vals = &out.values.values[ring.offset..ring.offset + ring.n_theta];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max);
        let s = ring.s_mid();
        report.rows.push(vec![k.into(), num(s), num(lo), num(hi), num((s * (2.0 - s)).powf(model_exp))]);
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (p_, v) in grid.points().iter().zip(&out.values.values) {
        let r = v / p_.one_minus_modulus_sq().powf(model_exp);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    report.note("depth", out.depth);
    report.note("nodes", grid.len());
    report.note("ratio_min", num(lo));
    report.note("ratio_max", num(hi));
    report.note("weak_norm", num(weak_norm(&out.values, 1.0 / (2.0 * p.t - 2.0))?));
    Ok(report)
}

fn run_bergman(p: &BergmanParams) -> Result<Report> {
    let grid = PolarGrid::tensor(p.n_r, p.n_theta, p.r_max, p.layout.parse()?)?;
    let input = BergmanInput::parse(&p.input)?;
    let f = match input {
        BergmanInput::One => GridFunction::constant(&grid, 1.0),
        BergmanInput::Power(g) => grid.sample(|s, _| s.powf(g)),
    };
    let op = if p.kernel == "analytic" {
        BergmanOperator::analytic(p.t)?
    } else {
        BergmanOperator::positive(p.t)?
    };
    let values = op.apply_many(&grid, &[&f.values])?.remove(0);
    let near = op.near_diagonal(&grid, &f.values);
    let model_exp = -2.0 * (p.t - 1.0);
    let mut report = Report::new(&["ring", "modulus", "re", "im", "series", "model"]);
    for (k, ring) in grid.rings().iter().enumerate() {
        let z = grid.point(ring.offset);
        let r = z.modulus();
        let series = match (&input, p.kernel.as_str()) {
            (BergmanInput::One, "analytic") => num(analytic_series_one(p.r_max)),
            (BergmanInput::One, _) => num(positive_series_one(p.t, r, p.r_max)),
            _ => Value::Null,
        };
        let v = values[ring.offset];
        report
            .rows
            .push(vec![k.into(), num(r), num(v.re), num(v.im), series, num(z.one_minus_modulus_sq().powf(model_exp))]);
    }
    report.note("nodes", grid.len());
    report.note("near_diagonal_nodes", near.len());
    report.note("near_share_limit", num(NEAR_SHARE_LIMIT));
    report.note("near_share_max", num(near.iter().map(|n| n.share).fold(0.0, f64::max)));
    Ok(report)
}

/// `|Σ_{k<modes} c_k(r) e^{2πikx}|²` with complex polynomial coefficients of
/// the given degree, uniform in `[-1, 1]`, drawn from `rng`.
pub fn random_band_limited<R: Rng>(grid: &PolarGrid, rng: &mut R, modes: usize, degree: usize) -> Vec<f64> {
    let coef: Vec<(Vec<f64>, Vec<f64>)> = (0..modes)
        .map(|_| {
            let re = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let im = (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (re, im)
        })
        .collect();
    let horner = |c: &[f64], r: f64| c.iter().rev().fold(0.0, |acc, a| acc * r + a);
    grid.sample(|s, x| {
        let r = 1.0 - s;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, (a, b)) in coef.iter().enumerate() {
            let (a, b) = (horner(a, r), horner(b, r));
            let (sin, cos) = (2.0 * std::f64::consts::PI * k as f64 * x).sin_cos();
            re += a * cos - b * sin;
            im += a * sin + b * cos;
        }
        re * re + im * im
    })
    .values
}

fn run_dominate(p: &DominateParams) -> Result<Report> {
    let seed = p.seed.ok_or_else(|| invalid("seed", "random inputs need an explicit seed"))?;
    let grid = PolarGrid::tensor(p.n_r, p.n_theta, p.r_max, p.layout.parse()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..p.samples)
        .map(|_| random_band_limited(&grid, &mut rng, p.modes, p.poly_degree))
        .collect();
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let ratios = sparse_domination_batch(p.t, &grid, &refs, p.depth)?;
    let mut report = Report::new(&["sample", "ratio", "node", "s", "x"]);
    for (i, r) in ratios.iter().enumerate() {
        let z = grid.point(r.node);
        report.rows.push(vec![i.into(), num(r.ratio), r.node.into(), num(z.depth), num(z.angle)]);
    }
    report.note("sup_ratio", num(ratios.iter().map(|r| r.ratio).fold(0.0, f64::max)));
    report.note("depth", ratios.first().map_or(0, |r| r.depth));
    report.note("nodes", grid.len());
    Ok(report)
}

fn run_weights(p: &WeightsParams) -> Result<Report> {
    let weight: RadialWeight = p.weight.parse()?;
    let weak = endpoint_weak_condition(&weight, p.t, p.k_max)?;
    let strong = endpoint_strong_condition(&weight, p.t, p.k_max)?;
    let l = p.l.unwrap_or(1.0 / (3.0 - 2.0 * p.t));
    let bb = bekolle_bonami(&weight, l, &default_schedule())?;
    let mut report = Report::new(&["k", "a_k", "partial_sum"]);
    for (k, (a, s)) in weak.terms.iter().zip(&strong.partial_sums).enumerate() {
        report.rows.push(vec![k.into(), num(*a), num(*s)]);
    }
    report.note("weight", weight.to_string());
    report.note("exponent", num(endpoint_exponent(p.t)));
    report.note("weak_sup", num(weak.sup));
    report.note("weak_verdict", weak.verdict.to_string());
    report.note("strong_verdict", strong.verdict.to_string());
    report.note("bb_l", num(bb.l));
    report.note("bb_estimate", num(bb.estimate));
    report.note("bb_finite", bb.finite);
    Ok(report)
}

fn run_blowup(p: &BlowupParams) -> Result<Report> {
    let family = family_counterexample(p.m)?;
    let grid = CubeGrid::new(1, p.m + 1)?;
    let image = apply_sparse_cube(&SparseOperator::new(&family, p.t)?, &GridFunction::constant(&grid, 1.0))?;
    let original = image.map(|v| family.to_original_normalization(*v, p.t));
    let half = grid.len() / 2;
    let partitioned = (p.m as f64 * (p.t - 1.0)).exp2() + (1.0 - p.t).exp2();
    let rest = (1.0 - p.t).exp2();
    let mut report = Report::new(&["region", "start", "end", "min", "max", "expected"]);
    for (name, range, expected) in [("partitioned", 0..half, partitioned), ("rest", half..grid.len(), rest)] {
        let (start, end) = (range.start as f64 / grid.len() as f64, range.end as f64 / grid.len() as f64);
        let vals = &original.values[range];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(0.0, f64::max);
        report.rows.push(vec![name.into(), num(start), num(end), num(lo), num(hi), num(expected)]);
    }
    report.note("expected_partitioned", num(partitioned));
    report.note("linf_l1_mass", num(original.integral()));
    report.note("degree", num(family.degree()?));
    report.note("members", family.len());
    Ok(report)
}

fn run_decompose(p: &DecomposeParams) -> Result<Report> {
    let mut op = MaximalOperator::new(p.system.parse()?, p.t)?;
    op.convention = p.convention.parse()?;
    if let Some(d) = p.depth {
        op = op.with_depth(d);
    }
    let grid = PolarGrid::dyadic(p.levels, 2, 4, 8)?;
    let f = match (p.input.as_str(), p.seed) {
        ("random", Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.len()).map(|_| p.scale * rng.gen::<f64>().powi(2)).collect();
            GridFunction::new(&grid, values)?
        }
        _ => GridFunction::constant(&grid, 1.0),
    };
    let level_set = level_set_decomposition(&op, &f, p.alpha)?;
    let mask = level_set.node_mask(&grid);
    let mf = apply_maximal(&op, &f)?.values;
    let mismatches = mask.iter().zip(&mf.values).filter(|(m, v)| **m != (**v > p.alpha)).count();
    let mut report = Report::new(&["level", "index", "start", "length", "area"]);
    for b in &level_set.boxes {
        report.rows.push(vec![
            b.arc.level.into(),
            b.arc.index.into(),
            num(b.arc.start()),
            num(b.arc.length()),
            num(b.area),
        ]);
    }
    report.note("boxes", level_set.boxes.len());
    report.note("depth", level_set.depth);
    report.note("covered_nodes", mask.iter().filter(|m| **m).count());
    report.note("nodes", grid.len());
    report.note("mismatches_vs_maximal", mismatches);
    Ok(report)
}

fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Renders the report: CSV with `#` header lines, or a single JSON object
/// with `config`, `results` and `metadata` keys.
pub fn render(config: &ExperimentConfig, report: &Report) -> Result<String> {
    let config_json = serde_json::to_value(config).map_err(|e| Error::Io(e.to_string()))?;
    match config.format {
        Format::Json => {
            let mut metadata = json!({ "library": LIBRARY, "version": VERSION, "experiment": config.experiment.name() });
            if config.timestamp {
                metadata["generated_unix"] = unix_time().into();
            }
            let doc = json!({ "config": config_json, "results": report, "metadata": metadata });
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut out = format!("# {LIBRARY} {VERSION}\n# config: {config_json}\n");
            if config.timestamp {
                out.push_str(&format!("# generated_unix: {}\n", unix_time()));
            }
            for (k, v) in &report.summary {
                out.push_str(&format!("# {k}: {v}\n"));
            }
            let mut writer = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(e.to_string());
            writer.write_record(&report.columns).map_err(io)?;
            for row in &report.rows {
                writer.write_record(row.iter().map(cell)).map_err(io)?;
            }
            let body = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
            out.push_str(&String::from_utf8(body).map_err(|e| Error::Io(e.to_string()))?);
            Ok(out)
        }
    }
}

/// Writes through a temporary file in the target directory, so a failed run
/// never leaves a partial artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// Runs, renders and writes (to the configured path or stdout).
pub fn execute(config: &ExperimentConfig) -> Result<String> {
    let report = run(config)?;
    let text = render(config, &report)?;
    if let Some(path) = &config.output {
        write_atomic(path, &text)?;
    }
    Ok(text)
}
