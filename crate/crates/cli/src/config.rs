//! Defaults from a TOML settings file.
//!
//! Keys may sit at the top level or under a table named after the
//! subcommand (`[detect-cps]`); the subcommand table wins. Command-line
//! flags override both.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    table: toml::Table,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self { table })
    }

    fn lookup(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.table
            .get(section)
            .and_then(|t| t.as_table())
            .and_then(|t| t.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    pub fn get<T: DeserializeOwned>(&self, section: &str, key: &str) -> Result<Option<T>, CliError> {
        self.lookup(section, key)
            .map(|v| {
                v.clone()
                    .try_into()
                    .map_err(|e| CliError::Config(format!("setting `{key}`: {e}")))
            })
            .transpose()
    }

    /// `flag`, else the configured value, else `default`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, section: &str, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(section, key)?.unwrap_or(default)),
        }
    }

    /// Like [`Settings::pick`] without a default.
    pub fn pick_opt<T: DeserializeOwned>(&self, flag: Option<T>, section: &str, key: &str) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(section, key),
        }
    }
}
