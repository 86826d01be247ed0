//! Flat `key=value` configuration. Every value read through a getter is
//! recorded, defaults included, so the manifest echoes the resolved run.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub type Res<T> = std::result::Result<T, Box<dyn std::error::Error>>;

pub fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(Box::new(UsageError(msg.into())))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Res<Config> {
        let mut cfg = Config::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("line {}: expected key=value, got '{raw}'", no + 1));
            };
            cfg.set(k.trim(), v.trim());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.replace('-', "_"), value.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse_value<T: FromStr>(key: &str, v: &str) -> Res<T> {
        v.parse::<T>()
            .or_else(|_| usage(format!("cannot parse {key}='{v}'")))
    }

    /// Typed value, recording `default` when the key is absent.
    pub fn get<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Res<T> {
        match self.values.get(key) {
            Some(v) => Self::parse_value(key, v),
            None => {
                self.values.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Res<T> {
        match self.values.get(key) {
            Some(v) => Self::parse_value(key, v),
            None => usage(format!("missing required key '{key}'")),
        }
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Res<Option<T>> {
        self.values
            .get(key)
            .map(|v| Self::parse_value(key, v))
            .transpose()
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        self.values
            .entry(key.to_string())
            .or_insert_with(|| default.to_string())
            .clone()
    }

    /// Comma-separated array.
    pub fn list(&mut self, key: &str, default: &[f64]) -> Res<Vec<f64>> {
        match self.values.get(key) {
            Some(v) => v
                .split(',')
                .map(|t| Self::parse_value(key, t.trim()))
                .collect(),
            None => {
                let text = default
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                self.values.insert(key.to_string(), text);
                Ok(default.to_vec())
            }
        }
    }

    pub fn to_manifest(&self, version: &str) -> String {
        let mut out = format!("# smallball {version}\n");
        for (k, v) in &self.values {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = Config::parse("command=diverge\n# note\nhorizons = 1,2,4\n").unwrap();
        assert_eq!(c.list("horizons", &[]).unwrap(), vec![1.0, 2.0, 4.0]);
        assert_eq!(c.get("epsilon", 0.5).unwrap(), 0.5);
        let again = Config::parse(&c.to_manifest("0")).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(Config::parse("just words").is_err());
        let mut c = Config::parse("seed=abc").unwrap();
        assert!(c.get("seed", 1u64).is_err());
    }
}
