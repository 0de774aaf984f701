//! Plain-text `key = value` configuration with dotted keys.
//!
//! Each line sets one leaf of a JSON tree (`photophysics.k_r_mhz = 8`,
//! `beam.model = gaussian`). Values are read as JSON when they parse as JSON
//! and as bare strings otherwise. The merged tree is deserialized into
//! [`RunConfig`], which rejects unknown keys.

use std::path::PathBuf;

use nvphot::ensemble_sim::EnsembleConfig;
use nvphot::rate_model::{DetectionChain, ExcitationConditions, PhotophysicsParams};
use nvphot::sizing::{IrradianceMap, IrradianceProfile, SizingOptions, SuspensionSpec, Weighting};
use nvphot::OpticalEnvironment;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamModel {
    #[default]
    Uniform,
    Gaussian,
    /// Irradiance map read from `map_csv` (x_um, y_um, irradiance_rel).
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub model: BeamModel,
    pub center_x_um: f64,
    pub center_y_um: f64,
    /// 1/e² intensity radius of the Gaussian model.
    pub radius_um: f64,
    pub map_csv: Option<PathBuf>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            model: BeamModel::Uniform,
            center_x_um: 0.0,
            center_y_um: 0.0,
            radius_um: 1500.0,
            map_csv: None,
        }
    }
}

impl BeamConfig {
    /// `map` is required for the tabulated model and ignored otherwise.
    pub fn profile(&self, map: Option<IrradianceMap>) -> Result<IrradianceProfile> {
        match self.model {
            BeamModel::Uniform => Ok(IrradianceProfile::Uniform),
            BeamModel::Gaussian => {
                if !(self.radius_um.is_finite() && self.radius_um > 0.0) {
                    return Err(CliError::input(format!(
                        "beam.radius_um must be positive, got {}",
                        self.radius_um
                    )));
                }
                Ok(IrradianceProfile::Gaussian {
                    center_x_um: self.center_x_um,
                    center_y_um: self.center_y_um,
                    radius_um: self.radius_um,
                })
            }
            BeamModel::Tabulated => map
                .map(IrradianceProfile::Tabulated)
                .ok_or_else(|| CliError::input("beam.model = tabulated needs beam.map_csv")),
        }
    }
}

/// Power ladder and counting time of simulated saturation scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub power_count: usize,
    /// Ladder ends as multiples of the median true saturation power.
    pub power_lo_factor: f64,
    pub power_hi_factor: f64,
    /// Explicit beam-center powers; overrides the ladder when set.
    pub powers_w: Option<Vec<f64>>,
    /// `null` gives noiseless expected rates.
    pub dwell_s: Option<f64>,
    pub drop_volume_ml: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            power_count: 12,
            power_lo_factor: 0.05,
            power_hi_factor: 20.0,
            powers_w: None,
            dwell_s: Some(0.1),
            drop_volume_ml: SuspensionSpec::default().drop_volume_ml,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraConfig {
    /// Peak absorption cross-section; the photophysics value when unset.
    pub sigma_max_cm2: Option<f64>,
    /// Refractive index in the rate prefactor; the crystal index when unset.
    pub refractive_index: Option<f64>,
    /// `g_l / g_u`.
    pub degeneracy_ratio: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            sigma_max_cm2: None,
            refractive_index: None,
            degeneracy_ratio: 1.0,
        }
    }
}

/// Every parameter a subcommand may read.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub photophysics: PhotophysicsParams,
    pub environment: OpticalEnvironment,
    pub detection: DetectionChain,
    pub excitation: ExcitationConditions,
    pub suspension: SuspensionSpec,
    pub sizing: SizingOptions,
    pub weighting: Weighting,
    pub beam: BeamConfig,
    pub spectra: SpectraConfig,
    pub ensemble: EnsembleConfig,
    pub acquisition: AcquisitionConfig,
}

/// A single `key = value` assignment and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub value: Value,
    pub origin: String,
}

pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn check_key(key: &str, origin: &str) -> Result<()> {
    let ok = !key.is_empty()
        && key.split('.').all(|part| {
            !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        });
    if ok {
        Ok(())
    } else {
        Err(CliError::input(format!("{origin}: malformed key '{key}'")))
    }
}

/// Parses one `key=value` override given on the command line.
pub fn parse_override(text: &str) -> Result<Assignment> {
    let origin = format!("--set {text}");
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("{origin}: expected key=value")))?;
    let key = key.trim();
    check_key(key, &origin)?;
    Ok(Assignment {
        key: key.to_string(),
        value: parse_value(value),
        origin,
    })
}

/// Parses a config file body. Blank lines and lines starting with `#` are skipped.
pub fn parse_config_text(text: &str, source: &str) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let origin = format!("{source}:{}", i + 1);
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("{origin}: expected key = value, got '{trimmed}'")))?;
        let key = key.trim();
        check_key(key, &origin)?;
        out.push(Assignment {
            key: key.to_string(),
            value: parse_value(value),
            origin,
        });
    }
    Ok(out)
}

fn insert(root: &mut Map<String, Value>, a: &Assignment) -> Result<()> {
    let parts: Vec<&str> = a.key.split('.').collect();
    let (leaf, path) = parts.split_last().expect("keys are non-empty");
    let mut node = root;
    for (depth, part) in path.iter().enumerate() {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        if entry.is_null() {
            *entry = Value::Object(Map::new());
        }
        node = entry.as_object_mut().ok_or_else(|| {
            CliError::input(format!(
                "{}: '{}' is a value, not a section",
                a.origin,
                parts[..=depth].join(".")
            ))
        })?;
    }
    node.insert(leaf.to_string(), a.value.clone());
    Ok(())
}

/// Applies assignments in order (later ones win) and deserializes the result.
pub fn resolve(assignments: &[Assignment]) -> Result<RunConfig> {
    let mut root = Map::new();
    for a in assignments {
        insert(&mut root, a)?;
    }
    serde_json::from_value(Value::Object(root)).map_err(|e| CliError::input(format!("configuration: {e}")))
}

/// Inverse of [`parse_config_text`]: one line per leaf, values as JSON.
pub fn flatten(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(map) if !map.is_empty() => {
                for (k, child) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, child, out);
                }
            }
            _ => {
                out.push_str(prefix);
                out.push_str(" = ");
                out.push_str(&v.to_string());
                out.push('\n');
            }
        }
    }
    let mut out = String::new();
    walk("", value, &mut out);
    out
}
