use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::CorpusConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::model::{ModelConfig, Prompts};
use crate::render::RenderConfig;
use crate::train::TrainConfig;

/// Everything a subcommand can be configured with. Each section is
/// optional in the file and falls back to the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, overrides the `seed` of the model, train and synth sections.
    pub seed: Option<u64>,
    pub features: FeatureConfig,
    pub render: RenderConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: CorpusConfig,
    pub prompts: Prompts,
}

impl RunConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        parsed
    }

    /// Pushes the top-level seed into every seeded section.
    pub fn resolve_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.model.seed = seed;
            self.train.seed = seed;
            self.synth.seed = seed;
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.train.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.cqt.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.render.width == 0 || self.render.height == 0 {
            return Err(Error::Config("render width and height must be positive".into()));
        }
        Ok(())
    }

    /// The resolved configuration as TOML; this text is echoed into every
    /// output and hashed into the run manifest.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
