//! Optional key=value config files and flag/file/default resolution.
//!
//! Precedence: command-line flag, then config file, then built-in
//! default. Every command echoes its resolved settings into the output
//! directory as `effective_config.txt` for provenance.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Parsed key=value config file. Lines that are empty or start with `#`
/// are skipped.
pub struct FileConfig {
    values: BTreeMap<String, String>,
    path: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig {
                values: BTreeMap::new(),
                path: None,
            });
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key=value, found {line:?}",
                    path.display(),
                    idx + 1
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig {
            values,
            path: Some(path.to_path_buf()),
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(_) => bail!(
                    "{}: bad value {raw:?} for key {key}",
                    self.path
                        .as_deref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_default()
                ),
            },
        }
    }
}

/// Resolved settings, collected for the provenance echo.
pub struct Resolved {
    entries: BTreeMap<String, String>,
}

impl Resolved {
    pub fn new() -> Self {
        Resolved {
            entries: BTreeMap::new(),
        }
    }

    /// Resolve one setting by precedence and record it.
    pub fn setting<T: FromStr + Display + Clone>(
        &mut self,
        key: &str,
        flag: Option<T>,
        file: &FileConfig,
        default: T,
    ) -> Result<T> {
        let value = match flag {
            Some(v) => v,
            None => file.get::<T>(key)?.unwrap_or(default),
        };
        self.entries.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Resolve a setting that has no default; absent everywhere is fine.
    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        file: &FileConfig,
    ) -> Result<Option<T>> {
        let value = match flag {
            Some(v) => Some(v),
            None => file.get::<T>(key)?,
        };
        if let Some(v) = &value {
            self.entries.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Record a fixed value (paths, derived settings).
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Write `effective_config.txt` into the output directory.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let mut text = String::new();
        for (key, value) in &self.entries {
            text.push_str(&format!("{key}={value}\n"));
        }
        let path = out_dir.join("effective_config.txt");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}

/// Create the output directory if needed.
pub fn ensure_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .with_context(|| format!("cannot create output directory {}", path.display()))
}
