//! Closed-form failure estimates from gate error rates and circuit size.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statevec::NoiseModel;

/// Built-in device presets.
pub const DEFAULT_PRESETS: &str = include_str!("../presets/devices.toml");

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("cannot parse device presets: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("preset `{name}` has an invalid probability: {reason}")]
    Invalid { name: String, reason: String },
    #[error("unknown device preset `{0}`")]
    Unknown(String),
}

/// P(at least one of `exponent` independent events with probability `p`).
fn at_least_one(p: f64, exponent: usize) -> f64 {
    let exponent = i32::try_from(exponent).unwrap_or(i32::MAX);
    (1.0 - (1.0 - p).powi(exponent)).clamp(0.0, 1.0)
}

/// `1 - (1 - p_gate)^depth`.
pub fn p_gate_failure(p_gate: f64, depth: usize) -> f64 {
    at_least_one(p_gate, depth)
}

/// `1 - (1 - p_meas)^measured_qubits`.
pub fn p_meas_failure(p_meas: f64, measured_qubits: usize) -> f64 {
    at_least_one(p_meas, measured_qubits)
}

/// Which circuit size drives the gate-failure exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exponent {
    #[default]
    Depth,
    Ops,
}

impl FromStr for Exponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "depth" => Ok(Exponent::Depth),
            "ops" => Ok(Exponent::Ops),
            other => Err(format!("expected `depth` or `ops`, got `{other}`")),
        }
    }
}

/// Element and layer counts of a compiled circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Budget {
    pub elements: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub p_gate_failure: f64,
    pub p_meas_failure: f64,
    pub p_gate: f64,
    pub p_meas: f64,
    pub exponent: Exponent,
    /// Depth or element count, whichever `exponent` selects.
    pub gate_exponent: usize,
    pub depth: usize,
    pub measured_qubits: usize,
    /// Always `closed-form`: these are not calibrated hardware predictions.
    pub method: &'static str,
}

pub fn estimate(
    budget: Budget,
    device: &NoiseModel,
    measured_qubits: usize,
    exponent: Exponent,
) -> ErrorEstimate {
    let gate_exponent = match exponent {
        Exponent::Depth => budget.depth,
        Exponent::Ops => budget.elements,
    };
    ErrorEstimate {
        p_gate_failure: p_gate_failure(device.p_gate(), gate_exponent),
        p_meas_failure: p_meas_failure(device.p_meas(), measured_qubits),
        p_gate: device.p_gate(),
        p_meas: device.p_meas(),
        exponent,
        gate_exponent,
        depth: budget.depth,
        measured_qubits,
        method: "closed-form",
    }
}

#[derive(Debug, Deserialize)]
struct PresetEntry {
    p_gate: f64,
    p_meas: f64,
}

/// Named device noise settings.
#[derive(Debug, Clone)]
pub struct DevicePresets {
    entries: BTreeMap<String, NoiseModel>,
}

impl DevicePresets {
    pub fn parse(text: &str) -> Result<Self, PresetError> {
        let raw: BTreeMap<String, PresetEntry> = toml::from_str(text)?;
        let mut entries = BTreeMap::new();
        for (name, e) in raw {
            let model =
                NoiseModel::new(e.p_gate, e.p_meas).map_err(|err| PresetError::Invalid {
                    name: name.clone(),
                    reason: err.to_string(),
                })?;
            entries.insert(name, model);
        }
        Ok(DevicePresets { entries })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_PRESETS).expect("built-in presets are valid")
    }

    pub fn get(&self, name: &str) -> Result<NoiseModel, PresetError> {
        self.entries
            .get(name)
            .copied()
            .ok_or_else(|| PresetError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
