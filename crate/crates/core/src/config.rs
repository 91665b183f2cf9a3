//! Run configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::BootstrapParams;
use crate::chem::split::validate_ratios;
use crate::fusion::SvmParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("config lists no datasets")]
    NoDatasets,
    #[error("file not found: {0}")]
    MissingPath(PathBuf),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub manifest: PathBuf,
    pub molecule_embeddings: PathBuf,
    /// Captioner name to EMB1 file.
    pub caption_embeddings: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let p = SvmParams::<f64>::default();
        SvmConfig {
            c: p.c,
            epsilon: p.epsilon,
            tol: p.tol,
            max_epochs: p.max_epochs,
        }
    }
}

impl SvmConfig {
    pub fn params(&self) -> SvmParams<f64> {
        SvmParams {
            c: self.c,
            epsilon: self.epsilon,
            tol: self.tol,
            max_epochs: self.max_epochs,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub rounds: usize,
    pub per_round: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        let p = BootstrapParams::default();
        BootstrapConfig {
            rounds: p.rounds,
            per_round: p.per_round,
        }
    }
}

fn default_ratios() -> [f64; 4] {
    [0.6, 0.2, 0.1, 0.1]
}

fn default_folds() -> usize {
    5
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Relative paths are resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub datasets: Vec<DatasetPaths>,
    #[serde(default = "default_ratios")]
    pub ratios: [f64; 4],
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Malformed {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        config.resolve(&base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            join(&mut d.manifest);
            join(&mut d.molecule_embeddings);
            d.caption_embeddings.values_mut().for_each(join);
        }
        join(&mut self.out_dir);
    }

    /// Structural checks only; file existence is checked by `check_paths`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.datasets.is_empty() {
            return Err(ConfigError::NoDatasets);
        }
        validate_ratios(self.ratios).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.folds == 0 {
            return Err(ConfigError::Invalid("folds must be at least 1".into()));
        }
        if self.bootstrap.rounds == 0 {
            return Err(ConfigError::Invalid(
                "bootstrap rounds must be at least 1".into(),
            ));
        }
        if self.bootstrap.per_round == 0 {
            return Err(ConfigError::Invalid(
                "bootstrap per_round must be at least 1".into(),
            ));
        }
        self.svm
            .params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn check_paths(&self) -> Result<(), ConfigError> {
        for d in &self.datasets {
            let paths = std::iter::once(&d.manifest)
                .chain(std::iter::once(&d.molecule_embeddings))
                .chain(d.caption_embeddings.values());
            for p in paths {
                if !p.is_file() {
                    return Err(ConfigError::MissingPath(p.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn bootstrap_params(&self) -> BootstrapParams {
        BootstrapParams {
            rounds: self.bootstrap.rounds,
            per_round: self.bootstrap.per_round,
            seed: self.seed,
            ..BootstrapParams::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"datasets":[{"manifest":"m.json","molecule_embeddings":"/abs/mol.emb","caption_embeddings":{"A":"a.emb"}}]}"#,
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.ratios, [0.6, 0.2, 0.1, 0.1]);
        assert_eq!(c.folds, 5);
        assert_eq!(
            c.bootstrap,
            BootstrapConfig {
                rounds: 10,
                per_round: 250_000
            }
        );
        assert_eq!(c.datasets[0].manifest, dir.path().join("m.json"));
        assert_eq!(
            c.datasets[0].molecule_embeddings,
            PathBuf::from("/abs/mol.emb")
        );
        assert_eq!(c.out_dir, dir.path().join("out"));
        c.validate().unwrap();
        assert!(
            matches!(c.check_paths(), Err(ConfigError::MissingPath(p)) if p.ends_with("m.json"))
        );
    }

    #[test]
    fn rejects_bad_knobs() {
        let base = RunConfig {
            datasets: vec![DatasetPaths {
                manifest: "m".into(),
                molecule_embeddings: "e".into(),
                caption_embeddings: BTreeMap::new(),
            }],
            ratios: default_ratios(),
            folds: 5,
            seed: 0,
            svm: SvmConfig::default(),
            bootstrap: BootstrapConfig::default(),
            out_dir: default_out(),
        };
        base.validate().unwrap();
        let zero_rounds = RunConfig {
            bootstrap: BootstrapConfig {
                rounds: 0,
                per_round: 10,
            },
            ..base.clone()
        };
        assert!(matches!(
            zero_rounds.validate(),
            Err(ConfigError::Invalid(_))
        ));
        let bad_ratios = RunConfig {
            ratios: [0.5, 0.2, 0.1, 0.1],
            ..base.clone()
        };
        assert!(bad_ratios.validate().is_err());
        let no_folds = RunConfig {
            folds: 0,
            ..base.clone()
        };
        assert!(no_folds.validate().is_err());
        let no_data = RunConfig {
            datasets: vec![],
            ..base
        };
        assert!(matches!(no_data.validate(), Err(ConfigError::NoDatasets)));
    }
}
