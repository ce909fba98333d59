//! On-disk formats: TOML scenario files (mission + attacks + policy
//! knobs) and the JSON calibration artifact persisted between the
//! calibrate and run stages.

use crate::attack::AttackSpec;
use crate::calib::{Calibration, CalibrationOptions, RecoveryOptions};
use crate::error::{Error, Result};
use crate::mission::MissionConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One runnable scenario: a mission template, the attacks injected
/// into it, and the calibration/recovery knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub mission: MissionConfig,
    #[serde(default, rename = "attack")]
    pub attacks: Vec<AttackSpec>,
    #[serde(default)]
    pub recovery: RecoveryOptions,
    #[serde(default)]
    pub calibration: CalibrationOptions,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.mission.validate()?;
        for a in &self.attacks {
            a.validate()?;
        }
        Ok(())
    }
}

impl Calibration {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::ConfigParse(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))
    }
}
