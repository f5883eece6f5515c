//! Config file layout and merging with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub tables: Option<TablesSection>,
    pub waterfill: Option<WaterfillSection>,
    pub constants: Option<ConstantsSection>,
    pub bands: Option<BandsSection>,
    /// Accepted so a `[verify]` section validates; it has no keys.
    #[allow(dead_code)]
    pub verify: Option<VerifySection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesSection {
    pub settings: Option<Vec<u32>>,
    pub d: Option<usize>,
    pub n_predictive: Option<usize>,
    pub n_truth: Option<usize>,
    pub replicates: Option<u32>,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(alias = "B")]
    pub radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaterfillSection {
    pub kind: Option<String>,
    pub alpha: Option<f64>,
    #[serde(alias = "B")]
    pub radius: Option<f64>,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub alphas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsSection {
    pub setting: Option<u32>,
    pub d: Option<usize>,
    pub n_predictive: Option<usize>,
    pub level: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {}

/// Invalid configuration; reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A parsed config file together with its text, for locating keys.
#[derive(Debug, Default)]
pub struct Loaded {
    pub path: Option<PathBuf>,
    text: String,
    pub file: FileConfig,
}

impl Loaded {
    pub fn read(path: Option<&Path>) -> Result<Self, ConfigError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: cannot read config: {e}", path.display())))?;
        let file: FileConfig = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .map_or(String::new(), |l| format!(":{l}"));
            ConfigError(format!("{}{line}: {}", path.display(), e.message()))
        })?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            text,
            file,
        })
    }

    /// 1-based line of `key` inside `[section]` (or the top level).
    fn line_of(&self, section: Option<&str>, key: &str) -> Option<usize> {
        let mut current: Option<String> = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.trim().to_string());
                continue;
            }
            if current.as_deref() != section {
                continue;
            }
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
        None
    }

    /// Error for a value that came from the config file.
    pub fn error_at(&self, section: Option<&str>, key: &str, msg: impl fmt::Display) -> ConfigError {
        let path = self.path.as_deref().map_or("config".into(), |p| p.display().to_string());
        let full_key = section.map_or(key.to_string(), |s| format!("{s}.{key}"));
        match self.line_of(section, key) {
            Some(l) => ConfigError(format!("{path}:{l}: {full_key}: {msg}")),
            None => ConfigError(format!("{path}: {full_key}: {msg}")),
        }
    }
}

/// Where a merged value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Flag(&'static str),
    File(Option<&'static str>, &'static str),
    Default,
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub value: T,
    pub origin: Origin,
}

/// Flag beats file beats default.
pub fn pick<T>(
    flag: Option<T>,
    flag_name: &'static str,
    file: Option<T>,
    section: Option<&'static str>,
    key: &'static str,
    default: T,
) -> Param<T> {
    match (flag, file) {
        (Some(value), _) => Param {
            value,
            origin: Origin::Flag(flag_name),
        },
        (None, Some(value)) => Param {
            value,
            origin: Origin::File(section, key),
        },
        (None, None) => Param {
            value: default,
            origin: Origin::Default,
        },
    }
}

impl<T> Param<T> {
    /// Reject the value unless `ok`, naming its flag or config line.
    pub fn require(&self, ok: bool, loaded: &Loaded, msg: impl fmt::Display) -> Result<(), ConfigError> {
        if ok {
            return Ok(());
        }
        Err(match self.origin {
            Origin::Flag(name) => ConfigError(format!("invalid {name}: {msg}")),
            Origin::File(section, key) => loaded.error_at(section, key, msg),
            Origin::Default => ConfigError(format!("invalid default: {msg}")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Loaded, ConfigError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        Loaded::read(Some(&path))
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = load("seed = 1\n[tables]\nd = 399\nbogus = 2\n").unwrap_err();
        assert!(err.0.contains("run.toml:4:"), "{}", err.0);
        assert!(err.0.contains("bogus"), "{}", err.0);
    }

    #[test]
    fn type_errors_report_line() {
        let err = load("[tables]\n\nn_truth = \"many\"\n").unwrap_err();
        assert!(err.0.contains("run.toml:3:"), "{}", err.0);
    }

    #[test]
    fn validation_errors_point_at_key() {
        let loaded = load("seed = 1\n[bands]\nlevel = 0.8\n[tables]\nd = 2\n").unwrap();
        let d = pick(None, "--d", loaded.file.tables.as_ref().unwrap().d, Some("tables"), "d", 399);
        let err = d.require(d.value >= 3, &loaded, "must be at least 3").unwrap_err();
        assert!(err.0.ends_with("run.toml:5: tables.d: must be at least 3"), "{}", err.0);
    }

    #[test]
    fn flags_override_file() {
        let p = pick(Some(5), "--d", Some(7), Some("tables"), "d", 1);
        assert_eq!(p.value, 5);
        assert_eq!(p.origin, Origin::Flag("--d"));
        let q = pick(None, "--d", Some(7), Some("tables"), "d", 1);
        assert_eq!(q.value, 7);
        let r: Param<i32> = pick(None, "--d", None, Some("tables"), "d", 1);
        assert_eq!(r.origin, Origin::Default);
    }
}
