// Copyright 2026 The coulomb-gas authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.


//! Flat `key = value` run configuration merged with command-line flags.

use crate::CliError;
use serde_json::{Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

/// A value that can come from a flag or from the config file.
pub trait ConfigValue: Sized {
    fn parse_value(text: &str) -> Result<Self, String>;
    fn to_json(&self) -> Value;
}

/// Accepts plain floats and fractions such as `1/64`.
pub fn parse_f64(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let value = match t.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{t}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{t}'"))?;
            a / b
        }
        None => t.parse().map_err(|_| format!("bad number '{t}'"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{t}' is not a finite number"))
    }
}

/// Comma-separated list of numbers.
pub fn parse_f64_list(text: &str) -> Result<Vec<f64>, String> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err("empty list".into());
    }
    items.into_iter().map(parse_f64).collect()
}

impl ConfigValue for f64 {
    fn parse_value(text: &str) -> Result<Self, String> {
        parse_f64(text)
    }
    fn to_json(&self) -> Value {
        Value::from(*self)
    }
}

impl ConfigValue for usize {
    fn parse_value(text: &str) -> Result<Self, String> {
        text.trim().parse().map_err(|_| format!("bad non-negative integer '{}'", text.trim()))
    }
    fn to_json(&self) -> Value {
        Value::from(*self)
    }
}

impl ConfigValue for u64 {
    fn parse_value(text: &str) -> Result<Self, String> {
        text.trim().parse().map_err(|_| format!("bad non-negative integer '{}'", text.trim()))
    }
    fn to_json(&self) -> Value {
        Value::from(*self)
    }
}

impl ConfigValue for bool {
    fn parse_value(text: &str) -> Result<Self, String> {
        match text.trim() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            t => Err(format!("bad boolean '{t}'")),
        }
    }
    fn to_json(&self) -> Value {
        Value::from(*self)
    }
}

impl ConfigValue for String {
    fn parse_value(text: &str) -> Result<Self, String> {
        Ok(text.trim().to_string())
    }
    fn to_json(&self) -> Value {
        Value::from(self.as_str())
    }
}

impl ConfigValue for Vec<f64> {
    fn parse_value(text: &str) -> Result<Self, String> {
        parse_f64_list(text)
    }
    fn to_json(&self) -> Value {
        Value::from(self.clone())
    }
}

/// Parses the config file format: one `key = value` per line, `#` comments.
/// Keys are normalised so that `burn_in` and `burn-in` are the same key.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
        let key = normalize(k);
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key '{key}'", i + 1));
        }
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Resolves parameters with the precedence flag > config file > default and
/// records every resolved value for the report.
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    snapshot: Map<String, Value>,
}

impl Settings {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Self { file, used: BTreeSet::new(), snapshot: Map::new() }
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::new(BTreeMap::new()));
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config file {}: {e}", path.display())))?;
        let map = parse_config(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Ok(Self::new(map))
    }

    /// Raw lookup without recording into the snapshot.
    pub fn lookup<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        if self.file.contains_key(key) {
            self.used.insert(key.to_string());
        }
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(text) => T::parse_value(text)
                .map(Some)
                .map_err(|e| CliError::Validation(format!("config key '{key}': {e}"))),
            None => Ok(None),
        }
    }

    pub fn optional<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError> {
        let v = self.lookup(key, flag)?;
        self.snapshot.insert(key.to_string(), v.as_ref().map_or(Value::Null, T::to_json));
        Ok(v)
    }

    pub fn get<T: ConfigValue>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError> {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.snapshot.insert(key.to_string(), v.to_json());
        Ok(v)
    }

    /// Missing from both the flags and the file is a usage error.
    pub fn required<T: ConfigValue>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError> {
        let v = self
            .lookup(key, flag)?
            .ok_or_else(|| CliError::Usage(format!("the required argument '--{key}' was not provided")))?;
        self.snapshot.insert(key.to_string(), v.to_json());
        Ok(v)
    }

    /// Rejects config keys that no parameter consumed; returns the snapshot.
    pub fn finish(self) -> Result<Map<String, Value>, CliError> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.used.contains(*k)).collect();
        if !unknown.is_empty() {
            let list: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(CliError::Validation(format!("unknown config keys: {}", list.join(", "))));
        }
        Ok(self.snapshot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_lists() {
        assert_eq!(parse_f64("1/64").unwrap(), 1.0 / 64.0);
        assert_eq!(parse_f64(" 2.5 ").unwrap(), 2.5);
        assert!(parse_f64("1/0").is_err());
        assert_eq!(parse_f64_list("0.1, 0.05,0.025").unwrap(), vec![0.1, 0.05, 0.025]);
        assert!(parse_f64_list(" , ").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let file = parse_config("n = 10\n# comment\nburn_in = 5  # trailing\nbeta=2\n").unwrap();
        let mut s = Settings::new(file);
        assert_eq!(s.get::<usize>("n", Some(3), 1).unwrap(), 3);
        assert_eq!(s.get::<usize>("burn-in", None, 1).unwrap(), 5);
        assert_eq!(s.required::<f64>("beta", None).unwrap(), 2.0);
        assert!(matches!(s.required::<f64>("spacing", None), Err(CliError::Usage(_))));
        let snap = s.finish().unwrap();
        assert_eq!(snap["n"], Value::from(3));
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let s = Settings::new(parse_config("nn = 3").unwrap());
        assert!(matches!(s.finish(), Err(CliError::Validation(_))));
        assert!(parse_config("n 3").is_err());
        assert!(parse_config("n = 1\nn = 2").is_err());
        let mut s = Settings::new(parse_config("n = many").unwrap());
        assert!(matches!(s.get::<usize>("n", None, 1), Err(CliError::Validation(_))));
    }
}
