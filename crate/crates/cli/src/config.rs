//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! threads = 4
//! [grid]
//! L = 8          # half-width
//! N = 128
//! ```
//!
//! resolves to the keys `threads`, `grid.L` and `grid.N`. Every key has a
//! default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// A documented key with its default.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

pub const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

/// Parses config text into raw `section.key → value` pairs.
pub fn parse_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("line {}: unterminated section header", no + 1)))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", no + 1)));
        }
        let full = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        out.push((full, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    parse_text(&text)
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Resolved configuration: every documented key with a value.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Applies `entries` in order over the defaults of `specs`.
    pub fn resolve(specs: &[KeySpec], entries: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> =
            specs.iter().map(|s| (s.key.to_string(), s.default.to_string())).collect();
        for (k, v) in entries {
            match values.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => {
                    let valid: Vec<&str> = specs.iter().map(|s| s.key).collect();
                    return Err(CliError::Config(format!("unknown key `{k}`; valid keys: {}", valid.join(", "))));
                }
            }
        }
        Ok(Self { values })
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| CliError::Config(format!("key `{key}` is not defined here")))
    }

    fn bad(key: &str, v: &str, what: &str) -> CliError {
        CliError::Config(format!("`{key} = {v}` is not {what}"))
    }

    pub fn string(&self, key: &str) -> Result<String> {
        Ok(self.raw(key)?.to_string())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Self::bad(key, v, "a number"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        if let Ok(n) = v.parse::<usize>() {
            return Ok(n);
        }
        // allow 1e4-style counts
        match v.parse::<f64>() {
            Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e15 => Ok(x as usize),
            _ => Err(Self::bad(key, v, "a nonnegative integer")),
        }
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Self::bad(key, v, "an unsigned integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key)? {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(Self::bad(key, v, "a boolean")),
        }
    }

    /// Comma-separated numbers; empty gives an empty list.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key)?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Self::bad(key, v, "a comma-separated list of numbers")))
            .collect()
    }

    /// Semicolon-separated tuples of comma-separated numbers.
    pub fn tuples(&self, key: &str) -> Result<Vec<Vec<f64>>> {
        let v = self.raw(key)?;
        v.split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|t| {
                t.split(',')
                    .map(|s| s.trim().parse().map_err(|_| Self::bad(key, v, "a list of tuples like `0,0;0,0.5`")))
                    .collect()
            })
            .collect()
    }

    /// `key = value` lines in key order.
    pub fn echo(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`Config::echo`], hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.echo().as_bytes())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("key `{key}` is not defined here"))),
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash in the style of a git blob: `sha256("blob <len>\0" ++ data)`.
pub fn blob_hash(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", data.len()).as_bytes());
    h.update(data);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECS: &[KeySpec] =
        &[key("threads", "0", ""), key("grid.L", "8", ""), key("grid.N", "128", ""), key("time.T_list", "1,2", "")];

    #[test]
    fn sections_prefix_keys() {
        let raw = parse_text("threads = 2 # comment\n\n[grid]\nL = 4\n# full-line comment\nN=64\n").unwrap();
        assert_eq!(
            raw,
            vec![("threads".into(), "2".into()), ("grid.L".into(), "4".into()), ("grid.N".into(), "64".into())]
        );
        let c = Config::resolve(SPECS, &raw).unwrap();
        assert_eq!(c.f64("grid.L").unwrap(), 4.0);
        assert_eq!(c.usize("grid.N").unwrap(), 64);
        assert_eq!(c.f64_list("time.T_list").unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn unknown_keys_list_the_valid_ones() {
        let err = Config::resolve(SPECS, &[("grid.M".into(), "1".into())]).unwrap_err().to_string();
        assert!(err.contains("grid.M") && err.contains("grid.N") && err.contains("threads"));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_text("[grid\nL=1").is_err());
        assert!(parse_text("just words").is_err());
        assert!(parse_text("= 3").is_err());
    }

    #[test]
    fn counts_accept_exponent_notation() {
        let c = Config::resolve(SPECS, &[("grid.N".into(), "1e4".into())]).unwrap();
        assert_eq!(c.usize("grid.N").unwrap(), 10_000);
        let c = Config::resolve(SPECS, &[("grid.N".into(), "2.5".into())]).unwrap();
        assert!(c.usize("grid.N").is_err());
    }

    #[test]
    fn blob_hash_matches_git() {
        // `git hash-object --object-format=sha256` of "hello\n"
        assert_eq!(blob_hash(b"hello\n"), hex_digest(b"blob 6\0hello\n"));
        assert_eq!(hex_digest(b"").len(), 64);
    }

    #[test]
    fn echo_is_sorted_and_hash_tracks_values() {
        let a = Config::resolve(SPECS, &[]).unwrap();
        let b = Config::resolve(SPECS, &[("grid.L".into(), "9".into())]).unwrap();
        assert!(a.echo().starts_with("grid.L = 8\n"));
        assert_ne!(a.hash(), b.hash());
    }
}
