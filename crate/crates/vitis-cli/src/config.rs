//! Settings resolution: command-line flags override a `key=value` config
//! file, which overrides built-in defaults. Config keys use the long flag
//! names without the leading dashes (`min-edges=7`); full-line `#`
//! comments and blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Reads the config file (if any), rejecting keys the command does not
    /// know so typos fail loudly.
    pub fn load(path: Option<&Path>, known_keys: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| crate::path_error("read config", path, e))?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::validation(format!(
                        "{} line {}: expected key=value, got {line:?}",
                        path.display(),
                        i + 1
                    )));
                };
                let key = key.trim();
                if !known_keys.contains(&key) {
                    return Err(CliError::validation(format!(
                        "{} line {}: unknown key {key:?} (expected one of: {})",
                        path.display(),
                        i + 1,
                        known_keys.join(", ")
                    )));
                }
                values.insert(key.to_string(), value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    fn from_file<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::validation(format!("config key {key}: cannot parse {raw:?}: {e}"))
            }),
        }
    }

    /// Flag value if given, else config value, else `None`.
    pub fn optional<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.from_file(key),
        }
    }

    /// Flag value if given, else config value, else the default.
    pub fn or_default<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.optional(flag, key)?.unwrap_or(default))
    }

    /// Flag value if given, else config value, else an error naming the flag.
    pub fn require<T>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.optional(flag, key)?
            .ok_or_else(|| CliError::validation(format!("missing required --{key}")))
    }
}

/// Parses a comma-separated list, e.g. IoU thresholds `0.3,0.5,0.7`.
pub fn parse_list<T>(raw: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| CliError::validation(format!("bad {what} value {t:?}: {e}")))
        })
        .collect()
}
