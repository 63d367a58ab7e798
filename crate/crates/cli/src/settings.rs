//! Flag / config-file / default resolution.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_P_GRID: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

/// Values read from `--config`, keyed by flag name without the dashes.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(values)) => Ok(Self { values }),
            Ok(_) => Err(CliError::Invalid("config file must be a flat JSON object".into())),
            Err(e) => Err(CliError::Invalid(format!("config {}: {e}", path.display()))),
        }
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|v| serde_json::from_value(v.clone()))
            .transpose()
            .map_err(|e| CliError::Invalid(format!("config key `{key}`: {e}")))
    }

    /// Flag if given, else config file, else `None`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        self.pick(flag, key)?.ok_or_else(|| CliError::Invalid(format!("missing required --{key}")))
    }

    /// Lists accept either a JSON array or a single scalar in the file.
    pub fn pick_list<T: DeserializeOwned>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Array(_)) => self.get(key),
            Some(_) => Ok(self.get::<T>(key)?.map(|v| vec![v])),
        }
    }

    /// A boolean switch is only ever turned on by its flag.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(key)?.unwrap_or(false))
    }

    /// `--reciprocal` / `--no-reciprocal`, defaulting to reciprocal.
    pub fn reciprocity(&self, on: bool, off: bool) -> Result<bool, CliError> {
        if off {
            return Ok(false);
        }
        if on {
            return Ok(true);
        }
        if self.get::<bool>("no-reciprocal")?.unwrap_or(false) {
            return Ok(false);
        }
        Ok(self.get::<bool>("reciprocal")?.unwrap_or(true))
    }
}
