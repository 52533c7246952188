//! `key = value` configuration files. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "b",
    "d",
    "demean",
    "deterministic",
    "draws",
    "grid",
    "inference",
    "kind",
    "log-returns",
    "p",
    "perms",
    "r",
    "replications",
    "rho",
    "rmax",
    "seed",
    "shares",
    "sizes",
    "theta",
];

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    /// Blank lines and lines starting with `#` are skipped. Underscores in
    /// keys are read as dashes.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            let key = key.trim().to_ascii_lowercase().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key '{key}'", no + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key '{key}': {e}")))
            .transpose()
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse::<T>().map_err(|e| anyhow!("config key '{key}': {e}")))
                    .collect()
            })
            .transpose()
    }
}

/// `NxT`, e.g. `80x50`.
pub fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (n, t) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxT, got '{s}'"))?;
    let n = n.trim().parse().map_err(|_| format!("bad N in '{s}'"))?;
    let t = t.trim().parse().map_err(|_| format!("bad T in '{s}'"))?;
    Ok((n, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cells(pub Vec<(usize, usize)>);

impl FromStr for Cells {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',').map(parse_cell).collect::<Result<_, _>>().map(Cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let c = Config::parse("# comment\nseed = 7\n\nlog_returns=true\nalpha = 0.01, 0.05\n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get::<bool>("log-returns").unwrap(), Some(true));
        assert_eq!(c.list::<f64>("alpha").unwrap(), Some(vec![0.01, 0.05]));
        assert_eq!(c.get::<usize>("r").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Config::parse("colour = red").is_err());
        assert!(Config::parse("seed").is_err());
        assert!(Config::parse("seed = x").unwrap().get::<u64>("seed").is_err());
    }

    #[test]
    fn grid_cells() {
        assert_eq!(parse_cell("80x50"), Ok((80, 50)));
        assert_eq!("40x30, 80X30".parse::<Cells>().unwrap().0, vec![(40, 30), (80, 30)]);
        assert!(parse_cell("80").is_err());
    }
}
