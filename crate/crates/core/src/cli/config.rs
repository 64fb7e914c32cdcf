//! `key = value` config files. Command-line flags take precedence over file
//! values; keys outside [`KNOWN_KEYS`] are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const KNOWN_KEYS: &[&str] = &[
    // hyperparameters
    "spec",
    "seed",
    "lr",
    "epochs",
    "batch",
    "ridge",
    "merge_alpha",
    "nodes",
    "loss",
    "method",
    "max_paths",
    "baseline",
    "initial",
    "increment",
    "max_extra",
    // synthetic data
    "classes",
    "dims",
    "per_class",
    "spread",
    "train_fraction",
    // datasets
    "train",
    "val",
    "data",
    "label_column",
    // artifacts
    "model",
    "selector",
    "estimator",
    "patterns",
    "a",
    "b",
    "out",
    "out_train",
    "out_val",
    "selector_out",
    "estimator_out",
    "baseline_out",
    "metrics",
];

#[derive(Debug, Default, Clone)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::at_line(i + 1, format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::at_line(i + 1, format!("unknown config key `{key}`")));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::parse(&text)
            }
        }
    }

    /// Flag value if given, else the file value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key `{key}`: {e}"))),
        }
    }

    pub fn or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn req<T>(&self, flag: Option<T>, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| Error::Config(format!("missing required setting `{key}` (flag --{})", key.replace('_', "-"))))
    }

    /// Boolean switch: set by the flag or by `key = true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}

/// Comma-separated layer sizes, e.g. `8,32,16,10`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSizes(pub Vec<usize>);

impl FromStr for LayerSizes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("`{p}` is not a layer size")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(LayerSizes)
    }
}
