//! Single-file TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{SyntheticConfig, N_PHONES};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::network::NetworkConfig;
use crate::neuron::NeuronParams;
use crate::trainer::TrainConfig;

/// Overrides `paths.data_root` when set.
pub const DATA_ROOT_ENV: &str = "EPROP_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Base for relative data paths.
    pub data_root: PathBuf,
    /// Corpus root, relative to `data_root` unless absolute.
    pub timit: PathBuf,
    /// Feature cache directory, relative to `data_root` unless absolute.
    pub cache_dir: PathBuf,
    /// Metrics and checkpoints; relative to the working directory.
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data_root: PathBuf::from("data"),
            timit: PathBuf::from("TIMIT"),
            cache_dir: PathBuf::from("features"),
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

impl PathsConfig {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_root.join(p)
        }
    }

    pub fn timit_dir(&self) -> PathBuf {
        self.resolve(&self.timit)
    }

    pub fn cache_path(&self) -> PathBuf {
        self.resolve(&self.cache_dir)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub neuron: NeuronParams,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub features: FeatureConfig,
    pub synthetic: SyntheticConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies environment overrides.
    pub fn with_env(mut self) -> Self {
        if let Some(root) = std::env::var_os(DATA_ROOT_ENV) {
            self.paths.data_root = PathBuf::from(root);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.neuron.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        self.features.validate()
    }

    /// Network sized for the synthetic task.
    pub fn synthetic_network(&self) -> NetworkConfig {
        NetworkConfig {
            n_inputs: self.synthetic.n_channels,
            n_outputs: self.synthetic.n_classes,
            ..self.network.clone()
        }
    }

    /// Network sized for cached speech features.
    pub fn speech_network(&self) -> NetworkConfig {
        NetworkConfig {
            n_inputs: self.features.n_channels(),
            n_outputs: N_PHONES,
            ..self.network.clone()
        }
    }
}
