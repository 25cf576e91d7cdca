//! `key = value` configuration files mirroring the CLI flags.
//!
//! Keys are flag names without the leading dashes (`bitrates`, `gop`,
//! `encoder-template`, ...); `_` and `-` are interchangeable. `#` starts a
//! comment, values may be wrapped in double quotes.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("key {key:?}: {msg}")]
    Value { key: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn norm(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) if !raw[..p].contains('"') => &raw[..p],
                _ => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = norm(k);
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            let mut v = v.trim();
            if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
                v = &v[1..v.len() - 1];
            }
            if values.insert(key.clone(), v.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key });
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Reject keys outside `known`.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&norm(key)).map(String::as_str)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    msg: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(key)
            .map(|v| match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(ConfigError::Value {
                    key: key.to_string(),
                    msg: format!("{v:?} is not a boolean"),
                }),
            })
            .transpose()
    }
}

/// `500k`, `1.5M`, `2000000` → bits per second.
pub fn parse_bitrate(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (num, mult) = match s.chars().last() {
        Some('k' | 'K') => (&s[..s.len() - 1], 1e3),
        Some('m' | 'M') => (&s[..s.len() - 1], 1e6),
        Some('g' | 'G') => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("bad bitrate {s:?}"))?;
    let bits = (v * mult).round();
    if !(bits >= 1.0) || !bits.is_finite() {
        return Err(format!("bitrate {s:?} must be positive"));
    }
    Ok(bits as u64)
}

/// Comma-separated bitrates, which must be strictly increasing.
pub fn parse_bitrates(s: &str) -> Result<Vec<u64>, String> {
    let v = s.split(',').filter(|t| !t.trim().is_empty()).map(parse_bitrate).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("no bitrates given".into());
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err("bitrates must be strictly increasing".into());
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values() {
        let c = ConfigFile::parse("# ladder\nbitrates = 500k,1500k\ngop=90 # frames\nencoder_template = \"enc -o {OUT}\"\n").unwrap();
        assert_eq!(c.get("bitrates"), Some("500k,1500k"));
        assert_eq!(c.parsed::<usize>("gop").unwrap(), Some(90));
        assert_eq!(c.get("encoder-template"), Some("enc -o {OUT}"));
        assert!(c.check_keys(&["bitrates", "gop"]).is_err());
        assert!(ConfigFile::parse("gop 90").is_err());
        assert!(ConfigFile::parse("gop=1\ngop=2").is_err());
    }

    #[test]
    fn bitrates() {
        assert_eq!(parse_bitrates("500k,1500k,5M").unwrap(), [500_000, 1_500_000, 5_000_000]);
        assert_eq!(parse_bitrate("1.5m").unwrap(), 1_500_000);
        assert!(parse_bitrates("1500k,500k").is_err());
        assert!(parse_bitrate("0").is_err());
        assert!(parse_bitrate("fast").is_err());
    }
}
