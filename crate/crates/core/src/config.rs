//! Experiment configuration documents.
//!
//! A configuration is one JSON object:
//!
//! ```json
//! {
//!   "scene": { "reference": { "seed": 1 } },
//!   "wavelengths": [0.3],
//!   "n_directions": 32,
//!   "selection": { "first_k": 3 },
//!   "noise": { "snr_db": 10.0, "seed": 7 },
//!   "grid": { "nx": 101, "ny": 101 },
//!   "forward": "foldy_lax",
//!   "theory": "full",
//!   "outputs": "out/fig2"
//! }
//! ```
//!
//! `scene` is one of `{"reference": {...}}`, `{"file": "path"}` or
//! `{"inline": <scene document>}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{TheoryMode, DEFAULT_FLOOR};
use crate::scene::{reference_scene_with, Scene, SceneError};
use crate::spectral::Selection;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}, field `{path}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSceneParams {
    pub seed: u64,
    #[serde(default = "default_random_radius")]
    pub random_radius: f64,
    #[serde(default = "default_eps_range")]
    pub eps_range: [f64; 2],
}

fn default_random_radius() -> f64 {
    0.05
}

fn default_eps_range() -> [f64; 2] {
    [1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Reference(ReferenceSceneParams),
    File(PathBuf),
    Inline(serde_json::Value),
}

impl SceneSource {
    pub fn reference(seed: u64) -> Self {
        SceneSource::Reference(ReferenceSceneParams {
            seed,
            random_radius: default_random_radius(),
            eps_range: default_eps_range(),
        })
    }

    /// Builds the scene; relative file paths resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Scene, SceneError> {
        match self {
            SceneSource::Reference(p) => reference_scene_with(p.seed, p.random_radius, p.eps_range),
            SceneSource::File(path) => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| SceneError::Json(format!("{}: {e}", full.display())))?;
                Scene::from_json(&text)
            }
            SceneSource::Inline(value) => Scene::from_json(&value.to_string()),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            SceneSource::Reference(p) => Some(p.seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardModel {
    Asymptotic,
    FoldyLax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSize {
    fn default() -> Self {
        GridSize { nx: 101, ny: 101 }
    }
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_peak_separation() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSource,
    pub wavelengths: Vec<f64>,
    pub n_directions: usize,
    pub selection: Selection,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub grid: GridSize,
    pub forward: ForwardModel,
    /// Closed-form predictor to emit beside the MUSIC map.
    #[serde(default)]
    pub theory: Option<TheoryMode>,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Minimum distance between reported peaks.
    #[serde(default = "default_peak_separation")]
    pub peak_separation: f64,
    /// Radius for matching peaks to targets; one grid-cell diagonal if absent.
    #[serde(default)]
    pub match_radius: Option<f64>,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
}

/// Parses JSON into `T`, reporting line, column and the failing field path.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    Ok(value)
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

pub(crate) fn check_wavelengths(wavelengths: &[f64]) -> Result<(), ConfigError> {
    if wavelengths.is_empty() {
        return Err(invalid(
            "wavelengths",
            "at least one wavelength is required",
        ));
    }
    if let Some(w) = wavelengths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(invalid(
            "wavelengths",
            format!("{w} is not a positive finite wavelength"),
        ));
    }
    if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("wavelengths", "must be strictly increasing"));
    }
    Ok(())
}

pub(crate) fn check_selection(selection: Selection, n: usize) -> Result<(), ConfigError> {
    match selection {
        Selection::Threshold(r) if !(r > 0.0 && r < 1.0) => Err(invalid(
            "selection",
            format!("threshold ratio {r} must lie in (0, 1)"),
        )),
        Selection::FirstK(k) if k == 0 || k > n => Err(invalid(
            "selection",
            format!("first_k({k}) must lie in 1..={n}"),
        )),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = parse_json(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_wavelengths(&self.wavelengths)?;
        if self.n_directions == 0 {
            return Err(invalid("n_directions", "must be at least 1"));
        }
        check_selection(self.selection, self.n_directions)?;
        if self.grid.nx < 2 || self.grid.ny < 2 {
            return Err(invalid("grid", "nx and ny must be at least 2"));
        }
        if !(self.floor.is_finite() && self.floor > 0.0) {
            return Err(invalid("floor", "must be positive"));
        }
        if !(self.peak_separation.is_finite() && self.peak_separation >= 0.0) {
            return Err(invalid("peak_separation", "must be non-negative"));
        }
        if let Some(r) = self.match_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(invalid("match_radius", "must be positive"));
            }
        }
        if let Some(noise) = self.noise {
            if !noise.snr_db.is_finite() {
                return Err(invalid("noise", "snr_db must be finite"));
            }
        }
        if let SceneSource::Reference(p) = &self.scene {
            if !(p.random_radius.is_finite() && p.random_radius > 0.0) {
                return Err(invalid("scene", "random_radius must be positive"));
            }
        }
        Ok(())
    }
}

/// Cartesian product of wavelengths, direction counts and selections over a
/// base configuration. Each entry is a single-frequency run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub wavelengths: Vec<f64>,
    pub n_directions: Vec<usize>,
    pub selections: Vec<Selection>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let sweep: SweepConfig = parse_json(text)?;
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base.validate()?;
        if self
            .wavelengths
            .iter()
            .any(|w| !(w.is_finite() && *w > 0.0))
            || self.wavelengths.is_empty()
        {
            return Err(invalid(
                "wavelengths",
                "need at least one positive finite wavelength",
            ));
        }
        if self.n_directions.is_empty() || self.n_directions.contains(&0) {
            return Err(invalid("n_directions", "need at least one positive count"));
        }
        if self.selections.is_empty() {
            return Err(invalid("selections", "need at least one selection"));
        }
        for &n in &self.n_directions {
            for &s in &self.selections {
                check_selection(s, n)?;
            }
        }
        Ok(())
    }

    /// Expanded entries in (wavelength, N, selection) order.
    pub fn entries(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &w in &self.wavelengths {
            for &n in &self.n_directions {
                for &s in &self.selections {
                    out.push(ExperimentConfig {
                        wavelengths: vec![w],
                        n_directions: n,
                        selection: s,
                        ..self.base.clone()
                    });
                }
            }
        }
        out
    }
}
