//! JSON scenario files: parsing, validation and command dispatch.
//!
//! A scenario names one field, solver settings, a list of commands and an
//! output directory. Running it writes `report.json` plus one CSV per
//! command (`<index>_<command>.csv`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bernstein::{classify_fixed_points, real, DwLocation};
use crate::csbp::CSBPModel;
use crate::error::Error;
use crate::evolution::EvolutionSolver;
use crate::field::{
    Breakpoints, BrfpInfFamily, BrfpInfSegment, Dw0Family, Dw0Segment, HerglotzFieldBF, LevyFamily, LevySegment,
};
use crate::measure::{Atom, DiscretizedMeasure};
use crate::montecarlo::{
    estimate_laplace, estimate_mean, estimate_pgf, estimate_variance, estimate_zero, feller_csv, simulate_discrete,
    simulate_feller, FellerSchedule, MCEstimate, SeedPlan, DEFAULT_POPULATION_CAP,
};
use crate::ode::StepSettings;
use crate::pgf::{
    embeddability_test, evolve_pgf_many, extract_coefficients, mean_discrete, pgf_at_one, round_trip_check,
    GeneratingFamily, GeneratingPair, DEFAULT_ORDER, DEFAULT_RADIUS,
};

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub field: FieldSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    pub commands: Vec<CommandSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    LevyFamily { breakpoints: Vec<f64>, segments: Vec<LevySegmentSpec> },
    Dw0Family { breakpoints: Vec<f64>, segments: Vec<Dw0SegmentSpec> },
    BrfpInfFamily { breakpoints: Vec<f64>, segments: Vec<BrfpSegmentSpec> },
    GeneratingFamily { breakpoints: Vec<f64>, segments: Vec<GeneratingSegmentSpec> },
}

/// `φ(ζ) = -q + aζ + bζ² + ∫(e^{-ζx} - 1 + ζx 1_{x<1}) π(dx)`
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LevySegmentSpec {
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub jumps: MeasureSpec,
}

/// `φ(ζ) = cζ + bζ² + ∫(e^{-ζx} - 1 + ζx) π(dx)`
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Dw0SegmentSpec {
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub jumps: MeasureSpec,
}

/// `φ(ζ) = -q + dζ + ∫(e^{-ζx} - 1) π(dx)`
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BrfpSegmentSpec {
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub jumps: MeasureSpec,
}

/// `Φ(z) = q z + Σ α(n)(z - zⁿ)`; `alpha` maps offspring counts (keys, not 1) to rates.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GeneratingSegmentSpec {
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub alpha: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    #[serde(default)]
    pub densities: Vec<DensitySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub location: f64,
    pub mass: f64,
}

/// A density `coefficient · shape(x)` discretized on log-spaced Gauss–Legendre
/// panels over `(0, x_max]`.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub shape: DensityShape,
    #[serde(default = "one")]
    pub coefficient: f64,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_order")]
    pub order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityShape {
    /// `e^{-rate x}`
    Exponential { rate: f64 },
    /// `x^{k-1} e^{-rate x}`
    Gamma { k: f64, rate: f64 },
    /// `x^{-1-alpha}`
    PowerLaw { alpha: f64 },
    /// `1` on `[lo, hi]`
    Uniform { lo: f64, hi: f64 },
}

fn one() -> f64 {
    1.0
}
fn default_x_min() -> f64 {
    1e-3
}
fn default_panels() -> usize {
    24
}
fn default_order() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_rtol() -> f64 {
    StepSettings::default().rtol
}
fn default_atol() -> f64 {
    StepSettings::default().atol
}
fn default_max_steps() -> usize {
    StepSettings::default().max_steps
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { rtol: default_rtol(), atol: default_atol(), max_step: None, max_steps: default_max_steps() }
    }
}

impl SolverSpec {
    pub fn settings(&self) -> StepSettings {
        StepSettings {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step.unwrap_or(f64::INFINITY),
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: String,
    /// Subset of `json`, `csv`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_directory() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TimePair {
    pub s: f64,
    pub t: f64,
}

/// Evaluation point: `theta` for Laplace exponents, `z` for generating families.
/// `im` adds an imaginary part.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EvolvePoint {
    pub s: f64,
    pub t: f64,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub z: Option<f64>,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandSpec {
    Evolve {
        points: Vec<EvolvePoint>,
    },
    Moments {
        pairs: Vec<TimePair>,
        #[serde(default = "one")]
        x: f64,
        /// Generating families only: extract `p_0..p_N`.
        #[serde(default)]
        coefficients: Option<CoefficientSpec>,
    },
    Extinction {
        #[serde(default)]
        s: f64,
        #[serde(default = "one")]
        x: f64,
        horizon: Vec<f64>,
    },
    Classify {
        pairs: Vec<TimePair>,
        #[serde(default = "default_thetas")]
        thetas: Vec<f64>,
    },
    Embed {
        #[serde(default)]
        pairs: Vec<TimePair>,
        #[serde(default = "default_thetas")]
        thetas: Vec<f64>,
    },
    Simulate {
        s: f64,
        t: f64,
        /// Initial mass (continuous state) or initial population (rounded).
        #[serde(default = "one")]
        x: f64,
        paths: usize,
        #[serde(default)]
        seed: u64,
        /// Laplace arguments θ (continuous) or PGF arguments z (discrete).
        #[serde(default)]
        arguments: Vec<f64>,
        #[serde(default)]
        population_cap: Option<u64>,
        #[serde(default)]
        dump_paths: bool,
    },
    Verify {
        #[serde(default)]
        quick: bool,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    #[serde(default = "default_n")]
    pub order: usize,
    #[serde(default = "default_r")]
    pub radius: f64,
}

fn default_n() -> usize {
    DEFAULT_ORDER
}
fn default_r() -> f64 {
    DEFAULT_RADIUS
}
fn default_thetas() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

impl CommandSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CommandSpec::Evolve { .. } => "evolve",
            CommandSpec::Moments { .. } => "moments",
            CommandSpec::Extinction { .. } => "extinction",
            CommandSpec::Classify { .. } => "classify",
            CommandSpec::Embed { .. } => "embed",
            CommandSpec::Simulate { .. } => "simulate",
            CommandSpec::Verify { .. } => "verify",
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug)]
pub enum ScenarioError {
    /// Unreadable or invalid scenario; `path` names the offending field.
    Config {
        path: String,
        message: String,
    },
    /// A command failed numerically or a verification check failed.
    Numeric {
        command: String,
        message: String,
    },
    Io(String),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Numeric { .. } => 1,
            ScenarioError::Config { .. } | ScenarioError::Io(_) => 2,
        }
    }

    fn config(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ScenarioError::Config { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Config { path, message } => write!(f, "configuration error at {path}: {message}"),
            ScenarioError::Numeric { command, message } => write!(f, "command {command} failed: {message}"),
            ScenarioError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// JSON Schema of the scenario format.
pub fn schema() -> Value {
    serde_json::to_value(schemars::schema_for!(ScenarioConfig)).expect("schema serializes")
}

pub fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(text)
        .map_err(|e| ScenarioError::config(format!("line {} column {}", e.line(), e.column()), e))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn nonneg(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::config(path, format!("must be finite and non-negative, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::config(path, format!("must be finite, got {v}")))
    }
}

fn validate_breakpoints(path: &str, bp: &[f64], segments: usize) -> Result<(), ScenarioError> {
    if bp.first() != Some(&0.0) {
        return Err(ScenarioError::config(format!("{path}.breakpoints"), "must start at 0"));
    }
    for (i, w) in bp.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return Err(ScenarioError::config(
                format!("{path}.breakpoints[{}]", i + 1),
                "breakpoints must be finite and strictly increasing",
            ));
        }
    }
    if segments != bp.len() {
        return Err(ScenarioError::config(
            format!("{path}.segments"),
            format!("expected {} segments (one per breakpoint), got {segments}", bp.len()),
        ));
    }
    Ok(())
}

fn validate_measure(path: &str, m: &MeasureSpec) -> Result<(), ScenarioError> {
    for (i, a) in m.atoms.iter().enumerate() {
        let p = format!("{path}.atoms[{i}]");
        if !(a.location > 0.0 && a.location.is_finite()) {
            return Err(ScenarioError::config(
                format!("{p}.location"),
                format!("must be positive, got {}", a.location),
            ));
        }
        nonneg(&format!("{p}.mass"), a.mass)?;
    }
    for (i, d) in m.densities.iter().enumerate() {
        let p = format!("{path}.densities[{i}]");
        nonneg(&format!("{p}.coefficient"), d.coefficient)?;
        if !(d.x_min > 0.0 && d.x_max > d.x_min && d.x_max.is_finite()) {
            return Err(ScenarioError::config(&p, "need 0 < x_min < x_max < inf"));
        }
        if d.panels == 0 || d.order == 0 {
            return Err(ScenarioError::config(&p, "panels and order must be positive"));
        }
        match d.shape {
            DensityShape::Exponential { rate } => nonneg(&format!("{p}.shape.rate"), rate)?,
            DensityShape::Gamma { k, rate } => {
                if !(k > 0.0) {
                    return Err(ScenarioError::config(format!("{p}.shape.k"), "must be positive"));
                }
                nonneg(&format!("{p}.shape.rate"), rate)?
            }
            DensityShape::PowerLaw { alpha } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return Err(ScenarioError::config(format!("{p}.shape.alpha"), "must lie in (0, 2)"));
                }
            }
            DensityShape::Uniform { lo, hi } => {
                if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                    return Err(ScenarioError::config(format!("{p}.shape"), "need 0 <= lo < hi < inf"));
                }
            }
        }
    }
    Ok(())
}

fn parse_offspring(path: &str, key: &str) -> Result<u32, ScenarioError> {
    key.parse().map_err(|_| {
        ScenarioError::config(path, format!("offspring count must be a non-negative integer, got {key:?}"))
    })
}

fn validate_pair(path: &str, s: f64, t: f64) -> Result<(), ScenarioError> {
    if !(s >= 0.0 && t >= s && t.is_finite()) {
        return Err(ScenarioError::config(path, format!("need 0 <= s <= t < inf, got s = {s}, t = {t}")));
    }
    Ok(())
}

/// Semantic checks beyond the JSON schema; diagnostics name the field path.
pub fn validate(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    let discrete = matches!(cfg.field, FieldSpec::GeneratingFamily { .. });
    match &cfg.field {
        FieldSpec::LevyFamily { breakpoints, segments } => {
            validate_breakpoints("field", breakpoints, segments.len())?;
            for (i, s) in segments.iter().enumerate() {
                let p = format!("field.segments[{i}]");
                nonneg(&format!("{p}.q"), s.q)?;
                finite(&format!("{p}.a"), s.a)?;
                nonneg(&format!("{p}.b"), s.b)?;
                validate_measure(&format!("{p}.jumps"), &s.jumps)?;
            }
        }
        FieldSpec::Dw0Family { breakpoints, segments } => {
            validate_breakpoints("field", breakpoints, segments.len())?;
            for (i, s) in segments.iter().enumerate() {
                let p = format!("field.segments[{i}]");
                nonneg(&format!("{p}.c"), s.c)?;
                nonneg(&format!("{p}.b"), s.b)?;
                validate_measure(&format!("{p}.jumps"), &s.jumps)?;
            }
        }
        FieldSpec::BrfpInfFamily { breakpoints, segments } => {
            validate_breakpoints("field", breakpoints, segments.len())?;
            for (i, s) in segments.iter().enumerate() {
                let p = format!("field.segments[{i}]");
                nonneg(&format!("{p}.q"), s.q)?;
                finite(&format!("{p}.d"), s.d)?;
                validate_measure(&format!("{p}.jumps"), &s.jumps)?;
            }
        }
        FieldSpec::GeneratingFamily { breakpoints, segments } => {
            validate_breakpoints("field", breakpoints, segments.len())?;
            for (i, s) in segments.iter().enumerate() {
                let p = format!("field.segments[{i}]");
                nonneg(&format!("{p}.q"), s.q)?;
                for (key, &w) in &s.alpha {
                    let n = parse_offspring(&format!("{p}.alpha.{key}"), key)?;
                    if n == 1 {
                        return Err(ScenarioError::config(format!("{p}.alpha.1"), "α(1) is not allowed"));
                    }
                    nonneg(&format!("{p}.alpha.{n}"), w)?;
                }
            }
        }
    }
    let sv = &cfg.solver;
    if !(sv.rtol > 0.0 && sv.atol > 0.0) {
        return Err(ScenarioError::config("solver", "rtol and atol must be positive"));
    }
    if sv.max_step.is_some_and(|h| !(h > 0.0)) || sv.max_steps == 0 {
        return Err(ScenarioError::config("solver", "max_step and max_steps must be positive"));
    }
    for f in &cfg.output.formats {
        if f != "json" && f != "csv" {
            return Err(ScenarioError::config("output.formats", format!("unknown format {f:?}")));
        }
    }
    for (k, c) in cfg.commands.iter().enumerate() {
        let p = format!("commands[{k}]");
        match c {
            CommandSpec::Evolve { points } => {
                for (i, pt) in points.iter().enumerate() {
                    let pp = format!("{p}.points[{i}]");
                    validate_pair(&pp, pt.s, pt.t)?;
                    match (discrete, pt.theta, pt.z) {
                        (false, Some(th), None) if th > 0.0 => {}
                        (true, None, Some(z)) if (z * z + pt.im * pt.im) < 1.0 => {}
                        (false, ..) => return Err(ScenarioError::config(pp, "needs `theta` > 0 (and no `z`)")),
                        (true, ..) => {
                            return Err(ScenarioError::config(pp, "needs `z` with |z + i·im| < 1 (and no `theta`)"))
                        }
                    }
                }
            }
            CommandSpec::Moments { pairs, x, coefficients } => {
                for (i, tp) in pairs.iter().enumerate() {
                    validate_pair(&format!("{p}.pairs[{i}]"), tp.s, tp.t)?;
                }
                nonneg(&format!("{p}.x"), *x)?;
                if let Some(cs) = coefficients {
                    if !discrete {
                        return Err(ScenarioError::config(format!("{p}.coefficients"), "only for generating families"));
                    }
                    if cs.order == 0 || !(cs.radius > 0.0 && cs.radius < 1.0) {
                        return Err(ScenarioError::config(
                            format!("{p}.coefficients"),
                            "need order >= 1 and 0 < radius < 1",
                        ));
                    }
                }
            }
            CommandSpec::Extinction { s, x, horizon } => {
                nonneg(&format!("{p}.s"), *s)?;
                nonneg(&format!("{p}.x"), *x)?;
                if discrete {
                    return Err(ScenarioError::config(&p, "extinction needs a continuous-state field"));
                }
                for (i, &t) in horizon.iter().enumerate() {
                    validate_pair(&format!("{p}.horizon[{i}]"), *s, t)?;
                }
            }
            CommandSpec::Classify { pairs, thetas } => {
                for (i, tp) in pairs.iter().enumerate() {
                    validate_pair(&format!("{p}.pairs[{i}]"), tp.s, tp.t)?;
                }
                if thetas.iter().any(|&th| !(th > 0.0)) {
                    return Err(ScenarioError::config(format!("{p}.thetas"), "must be positive"));
                }
                if discrete {
                    return Err(ScenarioError::config(&p, "classify needs a continuous-state field"));
                }
            }
            CommandSpec::Embed { pairs, thetas } => {
                if !discrete {
                    return Err(ScenarioError::config(&p, "embed needs a generating family"));
                }
                for (i, tp) in pairs.iter().enumerate() {
                    validate_pair(&format!("{p}.pairs[{i}]"), tp.s, tp.t)?;
                }
                if thetas.iter().any(|&th| !(th > 0.0)) {
                    return Err(ScenarioError::config(format!("{p}.thetas"), "must be positive"));
                }
            }
            CommandSpec::Simulate { s, t, x, paths, arguments, .. } => {
                validate_pair(&p, *s, *t)?;
                nonneg(&format!("{p}.x"), *x)?;
                if *paths == 0 {
                    return Err(ScenarioError::config(format!("{p}.paths"), "must be positive"));
                }
                let ok = |a: f64| if discrete { (0.0..1.0).contains(&a) } else { a > 0.0 };
                if let Some(i) = arguments.iter().position(|&a| !ok(a)) {
                    return Err(ScenarioError::config(
                        format!("{p}.arguments[{i}]"),
                        if discrete { "z must lie in [0, 1)" } else { "θ must be positive" },
                    ));
                }
            }
            CommandSpec::Verify { .. } => {}
        }
    }
    Ok(())
}

fn build_measure(path: &str, m: &MeasureSpec) -> Result<DiscretizedMeasure, ScenarioError> {
    let atoms: Vec<Atom> = m.atoms.iter().map(|a| Atom { location: a.location, mass: a.mass }).collect();
    let mut segments = Vec::new();
    for (i, d) in m.densities.iter().enumerate() {
        let c = d.coefficient;
        let shape = d.shape.clone();
        let rho = move |x: f64| {
            c * match shape {
                DensityShape::Exponential { rate } => (-rate * x).exp(),
                DensityShape::Gamma { k, rate } => x.powf(k - 1.0) * (-rate * x).exp(),
                DensityShape::PowerLaw { alpha } => x.powf(-1.0 - alpha),
                DensityShape::Uniform { lo, hi } => {
                    if (lo..=hi).contains(&x) {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        };
        let disc = DiscretizedMeasure::from_density_log_panels(rho, d.x_min, d.x_max, d.panels, d.order)
            .map_err(|e| ScenarioError::config(format!("{path}.densities[{i}]"), e))?;
        segments.extend(disc.segments().iter().cloned());
    }
    DiscretizedMeasure::new(atoms, segments).map_err(|e| ScenarioError::config(path, e))
}

/// The scenario's field in the form the commands need.
pub enum BuiltField {
    Continuous(HerglotzFieldBF),
    Discrete(GeneratingFamily),
}

pub fn build_field(spec: &FieldSpec) -> Result<BuiltField, ScenarioError> {
    let bp = |v: &Vec<f64>| Breakpoints::new(v.clone()).map_err(|e| ScenarioError::config("field.breakpoints", e));
    let seg_path = |i: usize| format!("field.segments[{i}]");
    Ok(match spec {
        FieldSpec::LevyFamily { breakpoints, segments } => {
            let segs = segments
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    Ok(LevySegment::new(s.q, s.a, s.b, build_measure(&format!("{}.jumps", seg_path(i)), &s.jumps)?))
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let fam = LevyFamily::new(bp(breakpoints)?, segs).map_err(|e| ScenarioError::config("field", e))?;
            BuiltField::Continuous(HerglotzFieldBF::new(fam))
        }
        FieldSpec::Dw0Family { breakpoints, segments } => {
            let segs = segments
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    Ok(Dw0Segment {
                        c: s.c,
                        b: s.b,
                        jumps: build_measure(&format!("{}.jumps", seg_path(i)), &s.jumps)?,
                    })
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let fam = Dw0Family::new(bp(breakpoints)?, segs).map_err(|e| ScenarioError::config("field", e))?;
            BuiltField::Continuous(HerglotzFieldBF::from_dw0(&fam).map_err(|e| ScenarioError::config("field", e))?)
        }
        FieldSpec::BrfpInfFamily { breakpoints, segments } => {
            let segs = segments
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    Ok(BrfpInfSegment {
                        q: s.q,
                        d: s.d,
                        jumps: build_measure(&format!("{}.jumps", seg_path(i)), &s.jumps)?,
                    })
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            let fam = BrfpInfFamily::new(bp(breakpoints)?, segs).map_err(|e| ScenarioError::config("field", e))?;
            BuiltField::Continuous(HerglotzFieldBF::from_brfp_inf(&fam).map_err(|e| ScenarioError::config("field", e))?)
        }
        FieldSpec::GeneratingFamily { breakpoints, segments } => {
            let segs = segments
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let alpha = s
                        .alpha
                        .iter()
                        .map(|(k, &w)| Ok((parse_offspring(&format!("{}.alpha.{k}", seg_path(i)), k)?, w)))
                        .collect::<Result<Vec<_>, ScenarioError>>()?;
                    GeneratingPair::new(s.q, alpha).map_err(|e| ScenarioError::config(seg_path(i), e))
                })
                .collect::<Result<Vec<_>, ScenarioError>>()?;
            BuiltField::Discrete(
                GeneratingFamily::new(bp(breakpoints)?, segs).map_err(|e| ScenarioError::config("field", e))?,
            )
        }
    })
}

/// One line of the report, traceable to a command by index and name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub command_index: usize,
    pub command: String,
    pub parameters: Value,
    pub quantity: String,
    #[serde(serialize_with = "crate::util::ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "crate::util::ser_opt_f64")]
    pub error: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    /// Seconds since the Unix epoch; the only non-deterministic field.
    pub generated_at_unix: u64,
    pub solver: StepSettings,
    pub seed_override: Option<u64>,
    pub rows: Vec<ReportRow>,
    pub details: Vec<Value>,
    pub success: bool,
}

struct CommandOutput {
    rows: Vec<ReportRow>,
    detail: Value,
    csv: String,
    extra_files: Vec<(String, String)>,
    failure: Option<String>,
}

struct Ctx<'a> {
    index: usize,
    name: &'static str,
    rows: Vec<ReportRow>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl Ctx<'_> {
    fn row(&mut self, parameters: Value, quantity: &str, value: f64, error: Option<f64>, flags: Vec<String>) {
        self.rows.push(ReportRow {
            command_index: self.index,
            command: self.name.to_string(),
            parameters,
            quantity: quantity.to_string(),
            value,
            error,
            flags,
        });
    }
}

/// Shortest round-trip representation; plain decimals switch to exponent form
/// only for very large or small magnitudes.
fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn mc_row(ctx: &mut Ctx, csv: &mut String, params: Value, quantity: &str, est: MCEstimate, analytic: Option<f64>) {
    let covered = analytic.map(|a| est.covers(a));
    let mut flags = Vec::new();
    if let Some(c) = covered {
        flags.push(if c { "within_band".to_string() } else { "outside_band".to_string() });
    }
    ctx.row(params, quantity, est.estimate, Some(est.std_error), flags);
    csv.push_str(&format!(
        "{quantity},{},{},{},{},{}\n",
        fmt_f(est.estimate),
        fmt_f(est.std_error),
        est.paths,
        analytic.map_or(String::new(), fmt_f),
        covered.map_or(String::new(), |c| c.to_string())
    ));
}

fn run_command(
    index: usize,
    cmd: &CommandSpec,
    field: &BuiltField,
    settings: &StepSettings,
    overrides: &Overrides,
) -> Result<CommandOutput, Error> {
    let mut ctx = Ctx { index, name: cmd.name(), rows: Vec::new(), _marker: std::marker::PhantomData };
    let mut csv = String::new();
    let mut extra_files = Vec::new();
    let mut failure = None;
    let detail: Value;
    match (cmd, field) {
        (CommandSpec::Evolve { points }, BuiltField::Continuous(f)) => {
            let solver = EvolutionSolver::new(Arc::new(f.clone()), *settings)?;
            csv.push_str("s,t,theta,re_v,im_v,abs_err_est\n");
            for p in points {
                let th = p.theta.unwrap_or_default();
                let (v, stats) = solver.evolve_with_stats(num_complex::Complex64::new(th, p.im), p.s, p.t)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f(p.s),
                    fmt_f(p.t),
                    fmt_f(th),
                    fmt_f(v.re),
                    fmt_f(v.im),
                    fmt_f(stats.error_estimate)
                ));
                let params = json!({"s": p.s, "t": p.t, "theta": th, "im": p.im});
                ctx.row(params.clone(), "re_v", v.re, Some(stats.error_estimate), vec![]);
                if p.im != 0.0 {
                    ctx.row(params, "im_v", v.im, Some(stats.error_estimate), vec![]);
                }
            }
            detail = json!({"points": points.len()});
        }
        (CommandSpec::Evolve { points }, BuiltField::Discrete(gf)) => {
            csv.push_str("s,t,z,re_f,im_f,abs_err_est\n");
            for p in points {
                let z = num_complex::Complex64::new(p.z.unwrap_or_default(), p.im);
                let f = evolve_pgf_many(gf, settings, &[z], p.s, p.t)?[0];
                // Same solve at half the tolerance gives an a-posteriori error estimate.
                let tight = StepSettings { rtol: settings.rtol / 2.0, atol: settings.atol / 2.0, ..*settings };
                let err = (evolve_pgf_many(gf, &tight, &[z], p.s, p.t)?[0] - f).norm();
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f(p.s),
                    fmt_f(p.t),
                    fmt_f(z.re),
                    fmt_f(f.re),
                    fmt_f(f.im),
                    fmt_f(err)
                ));
                ctx.row(json!({"s": p.s, "t": p.t, "z": z.re, "im": p.im}), "re_f", f.re, Some(err), vec![]);
            }
            detail = json!({"points": points.len()});
        }
        (CommandSpec::Moments { pairs, x, .. }, BuiltField::Continuous(f)) => {
            let model = CSBPModel::new(Arc::new(f.clone()), *settings)?;
            csv.push_str("s,t,quantity,value\n");
            for tp in pairs {
                let params = json!({"s": tp.s, "t": tp.t, "x": x});
                let mut put = |ctx: &mut Ctx, q: &str, v: f64, flags: Vec<String>| {
                    csv.push_str(&format!("{},{},{q},{}\n", fmt_f(tp.s), fmt_f(tp.t), fmt_f(v)));
                    ctx.row(params.clone(), q, v, None, flags);
                };
                put(&mut ctx, "non_explosion_probability", model.survival_probability(tp.s, tp.t, *x)?, vec![]);
                match (model.mean(tp.s, tp.t, *x), model.variance(tp.s, tp.t, *x)) {
                    (Ok(m), Ok(v)) => {
                        put(&mut ctx, "mean", m, vec![]);
                        put(&mut ctx, "variance", v, vec![]);
                    }
                    (Err(Error::FiniteMean(reason)), _) => {
                        put(&mut ctx, "mean", f64::NAN, vec![format!("finite_mean_violated: {reason}")]);
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
            let horizon = pairs.iter().map(|p| p.t).fold(1.0, f64::max);
            let cons = model.conservative(horizon)?;
            csv.push_str(&format!(",{},conservative,{}\n", fmt_f(horizon), if cons.conservative { 1 } else { 0 }));
            ctx.row(
                json!({"horizon": horizon}),
                "conservative",
                if cons.conservative { 1.0 } else { 0.0 },
                None,
                vec![format!("method={}", cons.method)],
            );
            detail = json!({"conservative": cons});
        }
        (CommandSpec::Moments { pairs, x, coefficients }, BuiltField::Discrete(gf)) => {
            csv.push_str("s,t,quantity,value\n");
            let mut coeff_csv = String::from("s,t,n,p_n\n");
            let mut coeff_details = Vec::new();
            for tp in pairs {
                let params = json!({"s": tp.s, "t": tp.t, "n0": x});
                let mut put = |ctx: &mut Ctx, q: &str, v: f64, flags: Vec<String>| {
                    csv.push_str(&format!("{},{},{q},{}\n", fmt_f(tp.s), fmt_f(tp.t), fmt_f(v)));
                    ctx.row(params.clone(), q, v, None, flags);
                };
                match mean_discrete(gf, tp.s, tp.t) {
                    Ok(m) => put(&mut ctx, "mean", x * m, vec![]),
                    Err(Error::FiniteMean(reason)) => {
                        put(&mut ctx, "mean", f64::INFINITY, vec![format!("finite_mean_violated: {reason}")])
                    }
                    Err(e) => return Err(e),
                }
                let one = pgf_at_one(gf, settings, tp.s, tp.t)?;
                let flags = match one {
                    crate::bernstein::LadderLimit::Finite { converged, .. } => vec![format!("converged={converged}")],
                    crate::bernstein::LadderLimit::Diverged => vec!["diverged".to_string()],
                };
                put(&mut ctx, "non_explosion_probability", one.value().min(1.0).powf(*x), flags);
                if let Some(cs) = coefficients {
                    let c = extract_coefficients(gf, settings, tp.s, tp.t, cs.order, cs.radius)?;
                    for (n, p) in c.coefficients.iter().enumerate() {
                        coeff_csv.push_str(&format!("{},{},{n},{}\n", fmt_f(tp.s), fmt_f(tp.t), fmt_f(*p)));
                    }
                    put(
                        &mut ctx,
                        "coefficient_defect",
                        c.defect,
                        vec![format!("aliasing_bound={:e}", c.aliasing_bound)],
                    );
                    coeff_details.push(serde_json::to_value(&c).expect("serializable"));
                }
            }
            if coefficients.is_some() {
                extra_files.push((format!("{index}_coefficients.csv"), coeff_csv));
            }
            detail = json!({"coefficients": coeff_details});
        }
        (CommandSpec::Extinction { s, x, horizon }, BuiltField::Continuous(f)) => {
            let model = CSBPModel::new(Arc::new(f.clone()), *settings)?;
            let r = model.extinction_report(*s, *x, horizon)?;
            csv.push_str("t,v_infinity,probability,comparison_bound,certificate\n");
            let cert = serde_json::to_value(r.certificate).expect("serializable");
            let cert = cert.as_str().unwrap_or_default().to_string();
            for p in &r.points {
                csv.push_str(&format!(
                    "{},{},{},{},{cert}\n",
                    fmt_f(p.t),
                    fmt_f(p.v_infinity),
                    fmt_f(p.probability),
                    p.comparison_bound.map_or(String::new(), fmt_f)
                ));
                let mut flags = vec![format!("certificate={cert}")];
                if !p.ladder_converged {
                    flags.push("ladder_not_converged".into());
                }
                ctx.row(json!({"s": s, "t": p.t, "x": x}), "extinction_probability", p.probability, None, flags);
            }
            if r.comparison_verified == Some(false) {
                failure = Some("comparison bound v ≤ θ/(1 + b θ) violated".to_string());
            }
            detail = serde_json::to_value(&r).expect("serializable");
        }
        (CommandSpec::Classify { pairs, thetas }, BuiltField::Continuous(f)) => {
            let model = CSBPModel::new(Arc::new(f.clone()), *settings)?;
            csv.push_str(
                "s,t,dw_location,dw_value,brfp_zero,derivative_at_zero,brfp_infinity,derivative_at_infinity\n",
            );
            let mut reports = Vec::new();
            for tp in pairs {
                let map = model.solver().map(tp.s, tp.t)?;
                let fp = classify_fixed_points(&map)?;
                let (loc, val) = match fp.dw_location {
                    DwLocation::Zero => ("zero", 0.0),
                    DwLocation::Interior { theta, .. } => ("interior", theta),
                    DwLocation::Infinity => ("infinity", f64::INFINITY),
                };
                csv.push_str(&format!(
                    "{},{},{loc},{},{},{},{},{}\n",
                    fmt_f(tp.s),
                    fmt_f(tp.t),
                    fmt_f(val),
                    fp.brfp_at_zero.is_brfp,
                    fmt_f(fp.brfp_at_zero.derivative),
                    fp.brfp_at_infinity.is_brfp,
                    fmt_f(fp.brfp_at_infinity.derivative)
                ));
                ctx.row(json!({"s": tp.s, "t": tp.t}), "dw_point", val, None, vec![format!("location={loc}")]);
                reports.push(json!({"s": tp.s, "t": tp.t, "fixed_points": fp}));
            }
            let pairs_v: Vec<(f64, f64)> = pairs.iter().map(|p| (p.s, p.t)).collect();
            let mono = model.monotonicity_class(&pairs_v, thetas)?;
            ctx.row(
                json!({"pairs": pairs_v, "thetas": thetas}),
                "non_decreasing",
                if mono.non_decreasing { 1.0 } else { 0.0 },
                None,
                vec![format!("worst_relative_margin={:e}", mono.worst_relative_margin)],
            );
            detail = json!({"fixed_points": reports, "monotonicity": mono});
        }
        (CommandSpec::Embed { pairs, thetas }, BuiltField::Discrete(gf)) => {
            let verdict = embeddability_test(gf, settings)?;
            csv.push_str("s,t,quantity,value\n");
            for &(s, t, f0) in &verdict.samples {
                csv.push_str(&format!("{},{},f_at_zero,{}\n", fmt_f(s), fmt_f(t), fmt_f(f0)));
            }
            ctx.row(json!({}), "embeddable", if verdict.embeddable { 1.0 } else { 0.0 }, None, vec![]);
            let mut residuals = Vec::new();
            if verdict.embeddable {
                for tp in pairs {
                    let r = round_trip_check(gf, settings, tp.s, tp.t, thetas)?;
                    csv.push_str(&format!("{},{},round_trip_residual,{}\n", fmt_f(tp.s), fmt_f(tp.t), fmt_f(r)));
                    ctx.row(json!({"s": tp.s, "t": tp.t, "thetas": thetas}), "round_trip_residual", r, None, vec![]);
                    residuals.push(r);
                }
            }
            detail = json!({"verdict": verdict, "round_trip_residuals": residuals});
        }
        (CommandSpec::Simulate { s, t, x, paths, seed, arguments, population_cap, dump_paths }, _) => {
            let plan = SeedPlan::new(overrides.seed.unwrap_or(*seed));
            csv.push_str("quantity,estimate,std_error,paths,analytic,within_band\n");
            let base = json!({"s": s, "t": t, "x": x, "paths": paths, "seed": plan.master});
            match field {
                BuiltField::Discrete(gf) => {
                    let cap = population_cap.unwrap_or(DEFAULT_POPULATION_CAP);
                    let n0 = x.round() as u64;
                    let sample = simulate_discrete(gf, n0, *s, *t, plan, *paths, cap)?;
                    for &z in arguments {
                        let est = estimate_pgf(&sample, z)?;
                        let analytic = evolve_pgf_many(gf, settings, &[real(z)], *s, *t)?[0].re.powf(n0 as f64);
                        mc_row(&mut ctx, &mut csv, json!({"z": z}), &format!("pgf(z={z})"), est, Some(analytic));
                    }
                    let ext = estimate_pgf(&sample, 0.0)?;
                    let analytic = evolve_pgf_many(gf, settings, &[real(0.0)], *s, *t)?[0].re.powf(n0 as f64);
                    mc_row(&mut ctx, &mut csv, base.clone(), "extinction_frequency", ext, Some(analytic));
                    let finite = sample.finite_values();
                    if sample.defect() == 0.0 {
                        let analytic = mean_discrete(gf, *s, *t).ok().map(|m| m * n0 as f64);
                        mc_row(&mut ctx, &mut csv, base.clone(), "mean", estimate_mean(&finite), analytic);
                    }
                    ctx.row(base.clone(), "defect", sample.defect(), None, vec![format!("capped={}", sample.capped())]);
                    csv.push_str(&format!("defect,{},,{},,\n", fmt_f(sample.defect()), paths));
                    if *dump_paths {
                        extra_files.push((format!("{index}_paths.csv"), sample.to_csv()));
                    }
                    if let Err(e) = sample.ensure_uncapped(cap) {
                        failure = Some(e.to_string());
                    }
                }
                BuiltField::Continuous(f) => {
                    let schedule = FellerSchedule::from_field(f)?;
                    let z = simulate_feller(&schedule, *x, *s, *t, plan, *paths)?;
                    let model = CSBPModel::new(Arc::new(f.clone()), *settings)?;
                    mc_row(&mut ctx, &mut csv, base.clone(), "mean", estimate_mean(&z), Some(model.mean(*s, *t, *x)?));
                    mc_row(
                        &mut ctx,
                        &mut csv,
                        base.clone(),
                        "variance",
                        estimate_variance(&z),
                        Some(model.variance(*s, *t, *x)?),
                    );
                    let p0 = model.solver().evolve_limit_at_infinity(*s, *t)?.value();
                    mc_row(
                        &mut ctx,
                        &mut csv,
                        base.clone(),
                        "zero_probability",
                        estimate_zero(&z),
                        Some((-x * p0).exp()),
                    );
                    for &th in arguments {
                        let analytic = model.transition_laplace(*s, *t, *x, th)?;
                        mc_row(
                            &mut ctx,
                            &mut csv,
                            json!({"theta": th}),
                            &format!("laplace(theta={th})"),
                            estimate_laplace(&z, th),
                            Some(analytic),
                        );
                    }
                    if *dump_paths {
                        extra_files.push((format!("{index}_paths.csv"), feller_csv(&z)));
                    }
                }
            }
            detail = base;
        }
        (CommandSpec::Verify { quick }, _) => {
            let r = crate::verify::run(*quick)?;
            csv = r.to_csv();
            for c in &r.checks {
                ctx.row(
                    json!({"threshold": c.threshold}),
                    &c.name,
                    c.value,
                    None,
                    vec![format!("passed={}", c.passed)],
                );
            }
            if !r.passed() {
                let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                failure = Some(format!("verification failed: {}", failed.join(", ")));
            }
            detail = serde_json::to_value(&r).expect("serializable");
        }
        (c, _) => {
            return Err(Error::Parameter(format!("command {} does not apply to this field kind", c.name())));
        }
    }
    Ok(CommandOutput { rows: ctx.rows, detail, csv, extra_files, failure })
}

fn write(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    std::fs::write(path, contents).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
}

/// Outcome of [`run_scenario`]: the report plus the first failure, if any.
pub struct RunOutcome {
    pub report: Report,
    pub output_dir: PathBuf,
    pub error: Option<ScenarioError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, |e| e.exit_code())
    }
}

/// Parses, validates and runs a scenario file. Configuration errors are
/// returned before anything is written; command failures stop the run and
/// are recorded in the report that is still written.
pub fn run_scenario(path: &Path, overrides: &Overrides) -> Result<RunOutcome, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::config(path.display().to_string(), e))?;
    let cfg = parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let out_dir = overrides.out.clone().unwrap_or_else(|| base.join(&cfg.output.directory));
    run_config(&cfg, &out_dir, overrides)
}

pub fn run_config(cfg: &ScenarioConfig, out_dir: &Path, overrides: &Overrides) -> Result<RunOutcome, ScenarioError> {
    validate(cfg)?;
    let mut solver = cfg.solver.clone();
    if let Some(tol) = overrides.tol {
        if !(tol > 0.0) {
            return Err(ScenarioError::config("--tol", format!("must be positive, got {tol}")));
        }
        solver.rtol = tol;
        solver.atol = tol * 1e-4;
    }
    let settings = solver.settings();
    let field = build_field(&cfg.field)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ScenarioError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv = cfg.output.formats.iter().any(|f| f == "csv");
    let json_out = cfg.output.formats.iter().any(|f| f == "json");

    let mut report = Report {
        scenario: cfg.name.clone(),
        generated_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        solver: settings,
        seed_override: overrides.seed,
        rows: Vec::new(),
        details: Vec::new(),
        success: true,
    };
    let mut error = None;
    for (i, cmd) in cfg.commands.iter().enumerate() {
        let label = format!("commands[{i}] ({})", cmd.name());
        match run_command(i, cmd, &field, &settings, overrides) {
            Ok(out) => {
                report.rows.extend(out.rows);
                report.details.push(json!({"command_index": i, "command": cmd.name(), "result": out.detail}));
                if csv {
                    write(&out_dir.join(format!("{i}_{}.csv", cmd.name())), &out.csv)?;
                    for (name, contents) in &out.extra_files {
                        write(&out_dir.join(name), contents)?;
                    }
                }
                if let Some(message) = out.failure {
                    error = Some(ScenarioError::Numeric { command: label, message });
                    break;
                }
            }
            Err(e) => {
                report.details.push(json!({"command_index": i, "command": cmd.name(), "error": e.to_string()}));
                error = Some(if e.is_numeric() {
                    ScenarioError::Numeric { command: label, message: e.to_string() }
                } else {
                    ScenarioError::Config { path: label, message: e.to_string() }
                });
                break;
            }
        }
    }
    report.success = error.is_none();
    if json_out {
        let text = serde_json::to_string_pretty(&report).map_err(|e| ScenarioError::Io(e.to_string()))?;
        write(&out_dir.join("report.json"), &text)?;
    }
    Ok(RunOutcome { report, output_dir: out_dir.to_path_buf(), error })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FELLER: &str = r#"{
        "name": "feller",
        "field": {"kind": "levy_family", "breakpoints": [0.0], "segments": [{"a": 0.0, "b": 1.0}]},
        "commands": [{"command": "evolve", "points": [{"s": 0.0, "t": 1.0, "theta": 1.0}]}]
    }"#;

    #[test]
    fn parses_minimal_scenario() {
        let cfg = parse(FELLER).unwrap();
        assert_eq!(cfg.commands.len(), 1);
        assert_eq!(cfg.solver.rtol, 1e-10);
    }

    #[test]
    fn negative_mass_names_the_field() {
        let text =
            FELLER.replace(r#""b": 1.0}"#, r#""b": 1.0, "jumps": {"atoms": [{"location": 1.0, "mass": -2.0}]}}"#);
        match parse(&text) {
            Err(ScenarioError::Config { path, .. }) => assert_eq!(path, "field.segments[0].jumps.atoms[0].mass"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_report_line() {
        match parse("{\n \"field\": ") {
            Err(e @ ScenarioError::Config { .. }) => {
                assert!(e.to_string().contains("line 2"), "{e}");
                assert_eq!(e.exit_code(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(&FELLER.replace("\"name\"", "\"nmae\"")).is_err());
    }

    #[test]
    fn command_field_mismatch_is_a_config_error() {
        let text = FELLER.replace(
            r#"{"command": "evolve", "points": [{"s": 0.0, "t": 1.0, "theta": 1.0}]}"#,
            r#"{"command": "embed"}"#,
        );
        assert!(matches!(parse(&text), Err(ScenarioError::Config { .. })));
    }

    #[test]
    fn density_shapes_build() {
        let m = MeasureSpec {
            atoms: vec![],
            densities: vec![DensitySpec {
                shape: DensityShape::Exponential { rate: 1.0 },
                coefficient: 1.0,
                x_min: 1e-3,
                x_max: 60.0,
                panels: 24,
                order: 16,
            }],
        };
        let d = build_measure("m", &m).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schema_lists_field_kinds() {
        let s = schema().to_string();
        for k in ["levy_family", "dw0_family", "brfp_inf_family", "generating_family"] {
            assert!(s.contains(k), "{k}");
        }
    }
}
