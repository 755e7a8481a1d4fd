//! Flag, config-file and default resolution.
//!
//! Lookup order is command-line flag, then config file, then the built-in
//! default. Every value a command reads is recorded so the output can embed
//! the configuration that produced it.

use std::collections::BTreeMap;
use std::fs;
use std::str::FromStr;

use seqlab_core::Error;

pub type CliResult<T> = Result<T, Error>;

#[derive(Debug, Default)]
pub struct Settings {
    flags: BTreeMap<String, Vec<String>>,
    file: BTreeMap<String, Vec<String>>,
    resolved: BTreeMap<String, String>,
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// repeated keys accumulate.
pub fn parse_config(text: &str, origin: &str) -> CliResult<BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Usage(format!(
                "{origin}:{}: expected key=value, got `{line}`",
                i + 1
            )));
        };
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        out.entry(key).or_default().push(v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    pub fn new(flags: BTreeMap<String, Vec<String>>) -> Self {
        Settings {
            flags,
            ..Settings::default()
        }
    }

    pub fn load_file(&mut self, path: &str) -> CliResult<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        self.file = parse_config(&text, path)?;
        Ok(())
    }

    fn lookup(&self, key: &str) -> Option<&Vec<String>> {
        self.flags.get(key).or_else(|| self.file.get(key))
    }

    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// The last given value for `key`, falling back to `default`.
    pub fn string(&mut self, key: &str, default: Option<&str>) -> Option<String> {
        let value = self
            .lookup(key)
            .and_then(|v| v.last().cloned())
            .or_else(|| default.map(str::to_string));
        if let Some(v) = &value {
            self.record(key, v);
        }
        value
    }

    pub fn require(&mut self, key: &str) -> CliResult<String> {
        self.string(key, None)
            .ok_or_else(|| Error::Usage(format!("missing required --{key}")))
    }

    pub fn parsed<T>(&mut self, key: &str, default: Option<&str>) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.string(key, default)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Usage(format!("invalid --{key} `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn parsed_or<T>(&mut self, key: &str, default: &str) -> CliResult<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key, Some(default))?.expect("default supplied"))
    }

    /// Every value given for `key`, flags replacing the file's list.
    pub fn list(&mut self, key: &str) -> Vec<String> {
        let values = self.lookup(key).cloned().unwrap_or_default();
        for (i, v) in values.iter().enumerate() {
            self.record(&format!("{key}.{i}"), v);
        }
        values
    }

    pub fn flag(&mut self, key: &str) -> CliResult<bool> {
        let value = match self.lookup(key).and_then(|v| v.last()) {
            None => false,
            Some(v) => match v.as_str() {
                "" | "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => return Err(Error::Usage(format!("invalid boolean --{key} `{other}`"))),
            },
        };
        self.record(key, value);
        Ok(value)
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}
