//! `key = value` run configuration files. Keys are the long flag names;
//! flags given on the command line win over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const KEYS: &[&str] = &[
    "task",
    "seed",
    "dim",
    "sims",
    "noise",
    "c-explore",
    "epochs",
    "lr",
    "batch",
    "window",
    "select",
    "generations",
    "time-limit",
    "threads",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", i + 1);
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key `{key}`", i + 1);
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    /// The flag if given, else the file's value.
    pub fn pick_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|text| {
                text.parse()
                    .map_err(|e| anyhow::anyhow!("config key `{key}`: cannot parse `{text}`: {e}"))
            })
            .transpose()
    }

    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let cfg = ConfigFile::parse("dim = 8\n# comment\nlr = 0.5  # trailing\n\n").unwrap();
        assert_eq!(cfg.pick(None, "dim", 16usize).unwrap(), 8);
        assert_eq!(cfg.pick(Some(4), "dim", 16usize).unwrap(), 4);
        assert_eq!(cfg.pick(None, "lr", 0.02f64).unwrap(), 0.5);
        assert_eq!(cfg.pick(None, "epochs", 10usize).unwrap(), 10);
    }

    #[test]
    fn bad_lines() {
        assert!(ConfigFile::parse("dim 8").is_err());
        assert!(ConfigFile::parse("depth = 3").is_err());
        let cfg = ConfigFile::parse("dim = eight").unwrap();
        assert!(cfg.pick(None, "dim", 16usize).is_err());
    }
}
