//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;
use vortwave::continuation::Policy;
use vortwave::grid::{MIN_NP, MIN_NQ};
use vortwave::vorticity::VorticitySpec;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{0}` given twice")]
    Duplicate(String),
    #[error("missing config key `{0}`")]
    Missing(&'static str),
    #[error("config key `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("vorticity table {path}: {msg}")]
    Table { path: String, msg: String },
}

const KEYS: &[&str] = &[
    "vorticity",
    "vorticity_value",
    "vorticity_table",
    "r",
    "nq",
    "np",
    "a0",
    "gap_min",
    "lambda_min",
    "slope_max",
    "ds_init",
    "ds_min",
    "ds_max",
    "max_points",
    "out_dir",
    "seed_checkpoint",
];

/// Raw key/value pairs; typed access validates lazily so each command only
/// requires the keys it uses.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: k + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line: k + 1,
                    msg: format!("empty value for `{key}`"),
                });
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
        }
        Ok(RunConfig {
            values,
            base: base.to_path_buf(),
        })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    fn raw(&self, key: &'static str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn number(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::Invalid {
                        key,
                        msg: format!("`{v}` is not a finite number"),
                    })
            })
            .transpose()
    }

    fn positive(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.number(key)? {
            Some(x) if x <= 0.0 => Err(ConfigError::Invalid {
                key,
                msg: format!("must be positive, got {x}"),
            }),
            v => Ok(v),
        }
    }

    fn count(&self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>().map_err(|_| ConfigError::Invalid {
                    key,
                    msg: format!("`{v}` is not a nonnegative integer"),
                })
            })
            .transpose()
    }

    fn path(&self, key: &'static str) -> Option<PathBuf> {
        self.raw(key).map(|v| self.base.join(v))
    }

    pub fn vorticity(&self) -> Result<VorticitySpec, ConfigError> {
        let kind = self.raw("vorticity").ok_or(ConfigError::Missing("vorticity"))?;
        let value = || self.number("vorticity_value")?.ok_or(ConfigError::Missing("vorticity_value"));
        match kind {
            "zero" => Ok(VorticitySpec::Zero),
            "constant" => Ok(VorticitySpec::Constant { value: value()? }),
            "linear" => Ok(VorticitySpec::Linear { slope: value()? }),
            "table" => {
                let path = self.path("vorticity_table").ok_or(ConfigError::Missing("vorticity_table"))?;
                read_table(&path)
            }
            other => Err(ConfigError::Invalid {
                key: "vorticity",
                msg: format!("`{other}` is not one of zero, constant, linear, table"),
            }),
        }
    }

    /// One or more comma-separated values.
    pub fn r_values(&self) -> Result<Vec<f64>, ConfigError> {
        let raw = self.raw("r").ok_or(ConfigError::Missing("r"))?;
        raw.split(',')
            .map(|v| {
                let v = v.trim();
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| ConfigError::Invalid {
                        key: "r",
                        msg: format!("`{v}` is not a finite number"),
                    })
            })
            .collect()
    }

    pub fn grid(&self) -> Result<(usize, usize), ConfigError> {
        let nq = self.count("nq")?.ok_or(ConfigError::Missing("nq"))?;
        let np = self.count("np")?.ok_or(ConfigError::Missing("np"))?;
        if nq < MIN_NQ || nq % 2 != 0 {
            return Err(ConfigError::Invalid {
                key: "nq",
                msg: format!("must be even and at least {MIN_NQ}, got {nq}"),
            });
        }
        if np < MIN_NP {
            return Err(ConfigError::Invalid {
                key: "np",
                msg: format!("must be at least {MIN_NP}, got {np}"),
            });
        }
        Ok((nq, np))
    }

    pub fn a0(&self) -> Result<f64, ConfigError> {
        self.positive("a0")?.ok_or(ConfigError::Missing("a0"))
    }

    pub fn policy(&self) -> Result<Policy, ConfigError> {
        let mut p = Policy::default();
        let set = |slot: &mut f64, key| -> Result<(), ConfigError> {
            if let Some(v) = self.positive(key)? {
                *slot = v;
            }
            Ok(())
        };
        set(&mut p.gap_min, "gap_min")?;
        set(&mut p.lambda_min, "lambda_min")?;
        set(&mut p.slope_max, "slope_max")?;
        set(&mut p.ds_init, "ds_init")?;
        set(&mut p.ds_min, "ds_min")?;
        set(&mut p.ds_max, "ds_max")?;
        if let Some(n) = self.count("max_points")? {
            if n == 0 {
                return Err(ConfigError::Invalid {
                    key: "max_points",
                    msg: "must be positive".into(),
                });
            }
            p.max_points = n;
        }
        if !(p.ds_min <= p.ds_init && p.ds_init <= p.ds_max) {
            return Err(ConfigError::Invalid {
                key: "ds_init",
                msg: format!("need ds_min ≤ ds_init ≤ ds_max, got {} {} {}", p.ds_min, p.ds_init, p.ds_max),
            });
        }
        Ok(p)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out_dir").unwrap_or_else(|| self.base.join("vortwave_out"))
    }

    pub fn seed_checkpoint(&self) -> Option<PathBuf> {
        self.path("seed_checkpoint")
    }
}

/// Two columns `p, omega` separated by commas or whitespace; a non-numeric first line is a header.
fn read_table(path: &Path) -> Result<VorticitySpec, ConfigError> {
    let err = |msg: String| ConfigError::Table {
        path: path.display().to_string(),
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let (mut p, mut omega) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                p.push(v[0]);
                omega.push(v[1]);
            }
            None if p.is_empty() && k == 0 => {}
            _ => return Err(err(format!("line {}: expected two numbers", k + 1))),
        }
    }
    Ok(VorticitySpec::Tabulated { p, omega })
}
