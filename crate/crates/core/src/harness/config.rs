//! `key = value` settings files.
//!
//! One setting per line. Blank lines and lines starting with `#` are
//! ignored, and so is anything after a ` #` on a value line. Keys are the
//! long command-line flag names without the leading dashes; `_` and `-` are
//! interchangeable.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Every key a settings file may set.
pub const KEYS: [&str; 16] = [
    "map",
    "method",
    "pred-guideline",
    "pred-region",
    "alpha",
    "epsilon",
    "gamma",
    "omega",
    "r-max",
    "seed",
    "seeds",
    "max-episodes",
    "step-cap",
    "out",
    "workers",
    "cell-size",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    MissingEquals { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` is set twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: `{key}` has an empty value")]
    EmptyValue { line: usize, key: String },
    #[error("`{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
}

/// Parsed settings, keyed by canonical (dash-separated) name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn canonical(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(ConfigError::MissingEquals { line })?;
            let key = canonical(key);
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey { line, key });
            }
            let value = match value.find(" #") {
                Some(cut) => &value[..cut],
                None => value,
            }
            .trim();
            if value.is_empty() {
                return Err(ConfigError::EmptyValue { line, key });
            }
            if values.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line, key });
            }
            values.insert(key, value.to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&canonical(key)).map(String::as_str)
    }

    /// Typed lookup; `Ok(None)` when the key is absent.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError::BadValue {
                key: canonical(key),
                value: v.to_string(),
            }),
        }
    }

    /// Sets `key`, replacing any value read from a file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(canonical(key), value.into());
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `other` wins wherever both set a key.
    pub fn merged_with(mut self, other: &Settings) -> Settings {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
        self
    }
}

impl fmt::Display for Settings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

impl FromStr for Settings {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Settings::parse(s)
    }
}
