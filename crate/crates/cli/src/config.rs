//! TOML configuration. Each command reads its own table; command-line flags
//! override values found here, which override built-in defaults.
//!
//! ```toml
//! [train-ibc]
//! bits = 64
//! lambda = 100.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub build: BuildConfig,
    #[serde(default)]
    pub train_ibc: IbcConfig,
    #[serde(default)]
    pub train_bbc: BbcConfig,
    #[serde(default)]
    pub query: QueryConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SynthConfig {
    pub clusters: Option<usize>,
    pub videos_per_cluster: Option<usize>,
    pub frames: Option<usize>,
    pub dim: Option<usize>,
    pub subspace_dim: Option<usize>,
    pub noise: Option<f64>,
    pub queries_per_cluster: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BuildConfig {
    pub rel_tol: Option<f64>,
    pub max_rank: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct IbcConfig {
    pub bits: Option<usize>,
    pub lambda: Option<f64>,
    pub iters: Option<usize>,
    pub outer_iters: Option<usize>,
    pub correlation: Option<String>,
    pub top_m: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BbcConfig {
    pub bits: Option<usize>,
    pub c1: Option<usize>,
    pub c2: Option<usize>,
    pub mu: Option<f64>,
    pub iters: Option<usize>,
    pub delta: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct QueryConfig {
    pub k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalConfig {
    pub k: Option<usize>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub message: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let fail = |message: String| ConfigError { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        toml::from_str(&text).map_err(|e| fail(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let c: Config = toml::from_str("[train-ibc]\nbits = 32\ncorrelation = \"raw\"\n[eval]\nk = 10\n").unwrap();
        assert_eq!(c.train_ibc.bits, Some(32));
        assert_eq!(c.train_ibc.correlation.as_deref(), Some("raw"));
        assert_eq!(c.eval.k, Some(10));
        assert_eq!(c.train_bbc.mu, None);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<Config>("[train-ibc]\nbitz = 3\n").is_err());
        assert!(toml::from_str::<Config>("[nope]\n").is_err());
    }
}
