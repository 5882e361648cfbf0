//! JSON run configuration.
//!
//! Everything is validated when the file is loaded: node data, factor counts
//! and every factor expression. Errors carry the JSON path at fault, e.g.
//! `factors[2].s_prime: syntax error at offset 5: ...`.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{ExperimentSettings, Magnitudes, Perturbed};
use crate::curve::{ExtendedDataSet, FactorQuad, Orientation};
use crate::error::{Error, Result};
use crate::eval::Method;
use crate::factor::FactorExpr;
use crate::surface::GridDataSet;

/// Subdivision depth used when the config leaves it out.
pub const DEFAULT_CURVE_DEPTH: usize = 8;
pub const DEFAULT_SURFACE_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Curve,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Pgm,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Defaults to 8 for curves and 4 for surfaces.
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    /// Build even when the factor bounds or contraction fail.
    #[serde(default)]
    pub permissive: bool,
}

fn default_method() -> Method {
    Method::Subdivision
}
fn default_grid() -> usize {
    4097
}
fn default_tol() -> f64 {
    1e-10
}
fn default_iters() -> usize {
    100_000
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            method: default_method(),
            depth: None,
            grid_size: default_grid(),
            tol: default_tol(),
            max_iters: default_iters(),
            permissive: false,
        }
    }
}

impl EvaluatorConfig {
    pub fn settings(&self, depth: usize) -> ExperimentSettings {
        ExperimentSettings {
            depth,
            grid_size: self.grid_size,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_magnitudes")]
    pub magnitudes: Magnitudes,
    #[serde(default = "default_which")]
    pub which: Vec<Perturbed>,
}

fn default_trials() -> usize {
    20
}
fn default_magnitudes() -> Magnitudes {
    Magnitudes {
        x: 0.0,
        y: 0.1,
        z: 0.1,
    }
}
fn default_which() -> Vec<Perturbed> {
    vec![Perturbed::Y, Perturbed::Z, Perturbed::All]
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            trials: default_trials(),
            magnitudes: default_magnitudes(),
            which: default_which(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Box-counting mesh levels `k` (`ε = n^{-k}|I|`); for surfaces an
    /// empty list means every supported level.
    #[serde(default = "default_scales")]
    pub scales: Vec<u32>,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_scales() -> Vec<u32> {
    vec![2, 3, 4, 5, 6]
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            scales: default_scales(),
            stability: StabilityConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Graymap depth: up to 255 writes 8-bit pixels, above that 16-bit.
    #[serde(default = "default_maxval")]
    pub pgm_maxval: u16,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Pgm, Format::Json]
}
fn default_maxval() -> u16 {
    65535
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            formats: default_formats(),
            pgm_maxval: default_maxval(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Validated problem data.
#[derive(Debug, Clone)]
pub enum Problem {
    Curve {
        data: ExtendedDataSet,
        factors: Vec<FactorQuad>,
        orientations: Vec<Orientation>,
    },
    Surface {
        data: GridDataSet,
        /// Indexed `(i−1)·m + (j−1)`.
        factors: Vec<FactorQuad>,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The parsed document, echoed into reports.
    pub source: Value,
    pub mode: Mode,
    pub problem: Problem,
    pub evaluator: EvaluatorConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn depth(&self) -> usize {
        self.evaluator.depth.unwrap_or(match self.mode {
            Mode::Curve => DEFAULT_CURVE_DEPTH,
            Mode::Surface => DEFAULT_SURFACE_DEPTH,
        })
    }
}

fn err(path: impl Into<String>, message: impl ToString) -> Error {
    Error::Config {
        path: path.into(),
        message: message.to_string(),
    }
}

fn typed<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T> {
    T::deserialize(v).map_err(|e| err(path, e))
}

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| err(path, format!("missing field `{key}`")))
}

fn optional<T: DeserializeOwned + Default>(obj: &Value, key: &str) -> Result<T> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => typed(v, key),
    }
}

fn expr(v: &Value, path: &str) -> Result<FactorExpr> {
    match v {
        Value::Number(n) => Ok(FactorExpr::Num(
            n.as_f64().ok_or_else(|| err(path, "not a finite number"))?,
        )),
        Value::String(s) => FactorExpr::parse(s).map_err(|e| err(path, e)),
        _ => Err(err(path, "expected an expression string or a number")),
    }
}

fn factor_quad(v: &Value, path: &str) -> Result<FactorQuad> {
    match v {
        // one value for all four factors
        Value::Number(_) | Value::String(_) => {
            let e = expr(v, path)?;
            Ok(FactorQuad::new(e.clone(), e.clone(), e.clone(), e))
        }
        Value::Object(map) => {
            if let Some(k) = map
                .keys()
                .find(|k| !["s", "s_prime", "s_tilde", "s_tilde_prime"].contains(&k.as_str()))
            {
                return Err(err(path, format!("unknown field `{k}`")));
            }
            let get = |k: &str| expr(field(v, k, path)?, &format!("{path}.{k}"));
            Ok(FactorQuad::new(
                get("s")?,
                get("s_prime")?,
                get("s_tilde")?,
                get("s_tilde_prime")?,
            ))
        }
        _ => Err(err(
            path,
            "expected an object with s, s_prime, s_tilde, s_tilde_prime",
        )),
    }
}

fn factors(doc: &Value, expected: usize) -> Result<Vec<FactorQuad>> {
    let list = field(doc, "factors", "config")?
        .as_array()
        .ok_or_else(|| err("factors", "expected a list of factor quadruples"))?;
    if list.is_empty() {
        return Err(err("factors", "empty factor list"));
    }
    if list.len() != expected {
        return Err(err(
            "factors",
            format!(
                "expected {expected} factor quadruples, found {}",
                list.len()
            ),
        ));
    }
    list.iter()
        .enumerate()
        .map(|(k, v)| factor_quad(v, &format!("factors[{k}]")))
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveData {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurfaceData {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| err("config", e))?;
    if !doc.is_object() {
        return Err(err("config", "expected a JSON object"));
    }
    const KEYS: [&str; 7] = [
        "mode",
        "data",
        "factors",
        "orientation",
        "evaluator",
        "analysis",
        "output",
    ];
    if let Some(k) = doc
        .as_object()
        .unwrap()
        .keys()
        .find(|k| !KEYS.contains(&k.as_str()))
    {
        return Err(err("config", format!("unknown field `{k}`")));
    }
    let mode: Mode = optional(&doc, "mode")?;
    let data = field(&doc, "data", "config")?;
    let problem = match mode {
        Mode::Curve => {
            let d: CurveData = typed(data, "data")?;
            let data = ExtendedDataSet::new(d.x, d.y, d.z).map_err(|e| err("data", e))?;
            let n = data.n();
            let factors = factors(&doc, n)?;
            let orientations: Vec<Orientation> = optional(&doc, "orientation")?;
            if !orientations.is_empty() && orientations.len() != n {
                return Err(err(
                    "orientation",
                    format!("expected {n} orientations, found {}", orientations.len()),
                ));
            }
            Problem::Curve {
                data,
                factors,
                orientations,
            }
        }
        Mode::Surface => {
            if doc.get("orientation").is_some() {
                return Err(err("orientation", "surface cell maps are always forward"));
            }
            let d: SurfaceData = typed(data, "data")?;
            let data = GridDataSet::new(d.x, d.y, d.z, d.t).map_err(|e| err("data", e))?;
            let factors = factors(&doc, data.n() * data.m())?;
            Problem::Surface { data, factors }
        }
    };
    let evaluator: EvaluatorConfig = optional(&doc, "evaluator")?;
    if evaluator.grid_size < 2 || !(evaluator.tol > 0.0) {
        return Err(err(
            "evaluator",
            "grid_size must be at least 2 and tol positive",
        ));
    }
    let analysis: AnalysisConfig = optional(&doc, "analysis")?;
    if analysis.scales.contains(&0) {
        return Err(err("analysis.scales", "mesh levels start at 1"));
    }
    let output: OutputConfig = optional(&doc, "output")?;
    Ok(RunConfig {
        source: doc,
        mode,
        problem,
        evaluator,
        analysis,
        output,
    })
}

/// Reads and validates a configuration file. Errors name the file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config { path: p, message } => err(format!("{}: {p}", path.display()), message),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(factors: &str) -> String {
        format!(
            r#"{{"data": {{"x": [0, 0.25, 0.5, 0.75, 1], "y": [20, 30, 10, 50, 40], "z": [2, 3, 1, 5, 4]}},
               "factors": {factors}}}"#
        )
    }

    #[test]
    fn factor_count_mismatch() {
        let e = parse_config(&curve("[0.1, 0.1, 0.1]")).unwrap_err();
        assert_eq!(
            e.to_string(),
            "factors: expected 4 factor quadruples, found 3"
        );
    }

    #[test]
    fn trig_factors_load() {
        let q = r#"{"s": "sin(x)", "s_prime": "cos(30*x)", "s_tilde": "sin(x)", "s_tilde_prime": "cos(5*x)"}"#;
        let c = parse_config(&curve(&format!("[{q}, {q}, {q}, {q}]"))).unwrap();
        assert_eq!(c.depth(), DEFAULT_CURVE_DEPTH);
        match c.problem {
            Problem::Curve { factors, .. } => {
                assert_eq!(factors[3].s_prime.to_string(), "cos(30 * x)")
            }
            _ => panic!(),
        }
    }

    #[test]
    fn syntax_error_location() {
        let q = r#"{"s": 0.1, "s_prime": "0.1 *", "s_tilde": 0, "s_tilde_prime": 0}"#;
        let e = parse_config(&curve(&format!("[0.1, 0.1, {q}, 0.1]"))).unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.starts_with("factors[2].s_prime: syntax error at offset 5"),
            "{msg}"
        );
    }

    #[test]
    fn missing_and_empty_factors() {
        let doc = r#"{"data": {"x": [0, 0.5, 1], "y": [0, 1, 0], "z": [0, 1, 0]}}"#;
        assert!(parse_config(doc)
            .unwrap_err()
            .to_string()
            .contains("`factors`"));
        let e = parse_config(&curve("[]")).unwrap_err().to_string();
        assert!(e.starts_with("factors:"), "{e}");
        let e = parse_config(r#"{"factors": []}"#).unwrap_err().to_string();
        assert!(e.contains("`data`"), "{e}");
    }

    #[test]
    fn missing_factor_slot_is_named() {
        let q = r#"{"s": 0.1, "s_prime": 0.1, "s_tilde": 0}"#;
        let e = parse_config(&curve(&format!("[{q}, 0.1, 0.1, 0.1]")))
            .unwrap_err()
            .to_string();
        assert_eq!(e, "factors[0]: missing field `s_tilde_prime`");
    }

    #[test]
    fn surface_config() {
        let z = "[[0,1,0],[1,2,1],[0,1,0]]";
        let doc = format!(
            r#"{{"mode": "surface", "data": {{"x": [0, 0.5, 1], "y": [0, 0.5, 1], "z": {z}, "t": {z}}},
                "factors": [0.2, 0.2, 0.2, "0.1*y"]}}"#
        );
        let c = parse_config(&doc).unwrap();
        assert_eq!(c.mode, Mode::Surface);
        assert_eq!(c.depth(), DEFAULT_SURFACE_DEPTH);
    }

    #[test]
    fn bad_types_and_keys() {
        let e =
            parse_config(r#"{"mode": "curve", "data": {"x": "a"}, "factors": []}"#).unwrap_err();
        assert!(e.to_string().starts_with("data:"), "{e}");
        let e = parse_config(&curve("[0.1, 0.1, 0.1, 0.1]").replacen('{', r#"{"extra": 1, "#, 1))
            .unwrap_err();
        assert!(e.to_string().contains("`extra`"));
    }
}
