//! TOML defaults. Top-level `seed` and `out_dir`, then one table per
//! command (`[reduce]`, `[evaluate-suite]`, ...) whose keys are the
//! command's flag names with `-` written as `_`.

use std::path::{Path, PathBuf};

use crate::run::UsageError;
use crate::Command;

#[derive(Debug, Default)]
pub struct Config {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    sections: toml::Table,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| emocov_core::Error::Io {
            path: path.into(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| e.to_string())?;
        let seed = match table.remove("seed") {
            Some(toml::Value::Integer(s)) if s >= 0 => Some(s as u64),
            Some(other) => return Err(format!("seed must be a non-negative integer, got {other}")),
            None => None,
        };
        let out_dir = match table.remove("out_dir") {
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => return Err(format!("out_dir must be a string, got {other}")),
            None => None,
        };
        Ok(Config { seed, out_dir, sections: table })
    }

    /// Fills every flag left unset on the command line from the command's
    /// table.
    pub fn resolve(&self, command: Command) -> Result<Command, UsageError> {
        let name = command.name();
        let Some(section) = self.sections.get(name) else {
            return Ok(command);
        };
        let section = section
            .as_table()
            .ok_or_else(|| UsageError(format!("config entry [{name}] must be a table")))?;
        let mut value = serde_json::to_value(&command).map_err(|e| UsageError(e.to_string()))?;
        let fields = value.as_object_mut().expect("commands serialize as objects");
        for (key, v) in section {
            let slot = fields
                .get_mut(key)
                .ok_or_else(|| UsageError(format!("config [{name}]: unknown key {key:?}")))?;
            if slot.is_null() {
                *slot = serde_json::to_value(v).map_err(|e| UsageError(e.to_string()))?;
            }
        }
        serde_json::from_value::<Command>(value)
            .map_err(|e| UsageError(format!("config [{name}]: {e}")))
    }

    #[cfg(test)]
    fn section_keys(&self) -> Vec<String> {
        self.sections.keys().cloned().collect()
    }
}
