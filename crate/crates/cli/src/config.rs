use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;

use crate::Failure;

/// Flat `key = value` settings. Blank lines and `#` comments are skipped.
/// Keys matching a flag name (dashes or underscores) fill that flag when it
/// is absent on the command line; every other key is a scenario parameter.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("config line {}: expected 'key = value'", no + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Failure::config(format!("config line {}: empty key", no + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Failure::config(format!("config line {}: duplicate key '{key}'", no + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::new("io", format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn remove(&mut self, key: &str) -> Option<(String, String)> {
        let alt = key.replace('-', "_");
        self.entries
            .remove_entry(key)
            .or_else(|| self.entries.remove_entry(&alt))
    }

    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.remove(key) {
            None => Ok(None),
            Some((k, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| Failure::config(format!("config key '{k}' = '{v}': {e}"))),
        }
    }

    pub fn take_enum<T: ValueEnum>(&mut self, key: &str) -> Result<Option<T>, Failure> {
        match self.remove(key) {
            None => Ok(None),
            Some((k, v)) => T::from_str(&v, true)
                .map(Some)
                .map_err(|e| Failure::config(format!("config key '{k}' = '{v}': {e}"))),
        }
    }

    /// Remaining entries, read as numeric scenario parameters.
    pub fn into_params(self) -> Result<Vec<(String, f64)>, Failure> {
        self.entries
            .into_iter()
            .map(|(k, v)| {
                v.parse::<f64>()
                    .map(|x| (k.clone(), x))
                    .map_err(|_| Failure::config(format!("config key '{k}' is not a known option or a numeric parameter")))
            })
            .collect()
    }
}
