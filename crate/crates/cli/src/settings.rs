//! `key=value` config files and flag > file > default resolution.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};

/// Values read from a config file. Keys are the long flag names; `_` and
/// `-` are interchangeable.
#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

fn canonical(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Settings::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
            values.insert(canonical(k), v.trim().to_owned());
        }
        Ok(Settings {
            values,
            used: RefCell::default(),
        })
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let key = canonical(key);
        let Some(raw) = self.values.get(&key) else {
            return Ok(None);
        };
        self.used.borrow_mut().insert(key.clone());
        raw.parse()
            .map(Some)
            .map_err(|e| anyhow!("config key `{key}={raw}`: {e}"))
    }

    /// Flag value if given, else the file value, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Keys present in the file that no option consumed.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.values.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }
}

/// Comma-separated list, e.g. `2048,2048`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(T::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_key_spelling() {
        let s = Settings::parse("# comment\nepoch_size = 500\nlr=0.5\n\nunused-key=1\n").unwrap();
        assert_eq!(s.pick(None, "epoch-size", 7usize).unwrap(), 500);
        assert_eq!(s.pick(Some(3usize), "epoch-size", 7).unwrap(), 3);
        assert_eq!(s.pick(None, "batch", 32usize).unwrap(), 32);
        assert_eq!(s.pick_opt::<f64>(None, "lr").unwrap(), Some(0.5));
        assert_eq!(s.unused(), vec!["unused-key".to_string()]);
    }

    #[test]
    fn bad_lines_and_values() {
        assert!(Settings::parse("no equals sign").is_err());
        let s = Settings::parse("epochs=ten").unwrap();
        assert!(s.get::<usize>("epochs").is_err());
    }

    #[test]
    fn lists() {
        let l: List<usize> = "2048, 2048".parse().unwrap();
        assert_eq!(l.0, vec![2048, 2048]);
        assert_eq!(l.to_string(), "2048,2048");
        assert!("1,x".parse::<List<usize>>().is_err());
    }
}
