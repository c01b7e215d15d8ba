use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "MU0_CONFIG";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub breakpoints: usize,
    pub bnb_nodes: usize,
    pub freq_extension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub base: f64,
    pub tol: f64,
    pub seed: u64,
    pub budgets: Budgets,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base: std::f64::consts::E,
            tol: 1e-3,
            seed: 0,
            budgets: Budgets {
                breakpoints: mu0::piecewise::DEFAULT_BREAKPOINT_BUDGET,
                bnb_nodes: 4096,
                freq_extension: mu0::kronecker::DEFAULT_FREQUENCY_BUDGET,
            },
            output: None,
            format: None,
        }
    }
}

/// Flat key-value file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    base: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
    breakpoints: Option<usize>,
    bnb_nodes: Option<usize>,
    freq_extension: Option<usize>,
    output: Option<PathBuf>,
    format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let file: ConfigFile =
            toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?;
        let mut cfg = RunConfig::default();
        if let Some(v) = file.base {
            cfg.base = v;
        }
        if let Some(v) = file.tol {
            cfg.tol = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.breakpoints {
            cfg.budgets.breakpoints = v;
        }
        if let Some(v) = file.bnb_nodes {
            cfg.budgets.bnb_nodes = v;
        }
        if let Some(v) = file.freq_extension {
            cfg.budgets.freq_extension = v;
        }
        cfg.output = file.output;
        cfg.format = file.format;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.base > 1.0 && self.base.is_finite()) {
            return Err(format!("base must exceed 1, got {}", self.base));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        let b = &self.budgets;
        if b.breakpoints == 0 || b.bnb_nodes == 0 || b.freq_extension == 0 {
            return Err("budgets must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let dir = std::env::temp_dir().join(format!("mu0-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(
            &path,
            "tol = 1e-4\nseed = 9\nbnb_nodes = 128\nformat = \"csv\"\n",
        )
        .unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.tol, 1e-4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.budgets.bnb_nodes, 128);
        assert_eq!(cfg.format, Some(Format::Csv));
        assert_eq!(cfg.base, std::f64::consts::E);
        std::fs::write(&path, "colour = 3\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let c = RunConfig {
            tol: 0.0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.budgets.breakpoints = 0;
        assert!(c.validate().is_err());
    }
}
