//! Flat `key = value` config files. Flags given on the command line win over
//! file values; keys may use `-` or `_` interchangeably.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "DISTBOOST_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "distboost-out";

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, (String, usize)>,
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = normalize_key(k);
            if key.is_empty() {
                return Err(CliError::Config(format!(
                    "config line {}: empty key",
                    i + 1
                )));
            }
            if values
                .insert(key.clone(), (v.trim().to_owned(), i + 1))
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "config line {}: duplicate key {key:?}",
                    i + 1
                )));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Merges flag values with a config file and tracks which keys were read, so
/// that leftover (misspelled) keys can be rejected.
pub struct Resolver {
    file: ConfigFile,
    used: BTreeSet<String>,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Resolver {
            file,
            used: BTreeSet::new(),
        }
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        let key = normalize_key(key);
        let v = self.file.values.get(&key).cloned();
        self.used.insert(key);
        v
    }

    pub fn opt<T>(&mut self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let from_file = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| {
                CliError::Config(format!("config line {line}: bad value for {key}: {e}"))
            }),
        }
    }

    pub fn or<T>(&mut self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    pub fn required<T>(&mut self, flag: Option<T>, key: &str) -> CliResult<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.opt(flag, key)?.ok_or_else(|| {
            CliError::Config(format!(
                "missing required setting --{}",
                key.replace('_', "-")
            ))
        })
    }

    /// A switch is on if the flag is present or the file sets it to `true`.
    pub fn switch(&mut self, flag: bool, key: &str) -> CliResult<bool> {
        let v = self.opt::<bool>(None, key)?;
        Ok(flag || v.unwrap_or(false))
    }

    /// Output directory: flag, then config key `out_dir`, then the
    /// environment variable, then the built-in default.
    pub fn out_dir(&mut self, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        if let Some(p) = self.opt(flag, "out_dir")? {
            return Ok(p);
        }
        Ok(std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| DEFAULT_OUT_DIR.into()))
    }

    pub fn finish(self) -> CliResult<()> {
        let unknown: Vec<&String> = self
            .file
            .values
            .keys()
            .filter(|k| !self.used.contains(*k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "unknown config keys: {unknown:?}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_normalizes_keys() {
        let f = ConfigFile::parse("# run\nepsilon = 0.05 # tight\nmax-iters=10\n\n").unwrap();
        let mut r = Resolver::new(f);
        assert_eq!(r.opt::<f64>(None, "epsilon").unwrap(), Some(0.05));
        assert_eq!(r.opt::<usize>(Some(3), "max_iters").unwrap(), Some(3));
        r.finish().unwrap();
    }

    #[test]
    fn rejects_bad_lines_and_unknown_keys() {
        assert!(ConfigFile::parse("just words").is_err());
        assert!(ConfigFile::parse("a = 1\na = 2").is_err());
        let mut r = Resolver::new(ConfigFile::parse("epsilon = x\nbogus = 1").unwrap());
        assert!(r.opt::<f64>(None, "epsilon").is_err());
        assert!(r.finish().is_err());
    }

    #[test]
    fn switches_and_required() {
        let mut r = Resolver::new(ConfigFile::parse("no_memo = true").unwrap());
        assert!(r.switch(false, "no_memo").unwrap());
        assert!(!r.switch(false, "timings").unwrap());
        assert!(r.required::<String>(None, "corpus").is_err());
    }
}
