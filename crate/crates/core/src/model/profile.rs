//! Plain-text (TOML) model profiles.
//!
//! ```toml
//! model_id = "reference-cnn"
//! weights = "reference"          # or "file:relative/or/absolute/weights.json"
//! seed = 0                       # reference weights only
//! default_layer = "conv3"
//! input_size = [32, 32]
//! mean = [0.485, 0.456, 0.406]
//! std = [0.229, 0.224, 0.225]
//! ```
//!
//! A weight file is the JSON serialization of a [`Network`].

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::imaging::{Preprocessing, IMAGENET_MEAN, IMAGENET_STD};

use super::reference::{ReferenceCnnConfig, REFERENCE_TARGET_LAYER};
use super::{ClassifierHandle, Network};

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSource {
    Reference { seed: u64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelProfile {
    pub model_id: String,
    pub weights: WeightSource,
    pub default_layer: String,
    pub input_size: (usize, usize),
    pub preprocessing: Preprocessing,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    model_id: String,
    weights: String,
    seed: Option<u64>,
    default_layer: Option<String>,
    input_size: Option<[usize; 2]>,
    mean: Option<[f64; 3]>,
    std: Option<[f64; 3]>,
}

impl ModelProfile {
    /// The built-in reference CNN with seed 0.
    pub fn reference() -> Self {
        ModelProfile {
            model_id: "reference-cnn".into(),
            weights: WeightSource::Reference { seed: 0 },
            default_layer: REFERENCE_TARGET_LAYER.into(),
            input_size: (32, 32),
            preprocessing: Preprocessing::default(),
        }
    }

    /// Parses profile text; relative weight paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawProfile = toml::from_str(text).map_err(|e| Error::Profile(e.to_string()))?;
        let weights = if raw.weights == "reference" {
            WeightSource::Reference { seed: raw.seed.unwrap_or(0) }
        } else if let Some(path) = raw.weights.strip_prefix("file:") {
            WeightSource::File(base_dir.join(path))
        } else {
            return Err(Error::Profile(format!("weights must be `reference` or `file:<path>`, got `{}`", raw.weights)));
        };
        let [h, w] = raw.input_size.unwrap_or([32, 32]);
        if h == 0 || w == 0 {
            return Err(Error::Profile("input_size must be positive".into()));
        }
        let preprocessing = Preprocessing::new(raw.mean.unwrap_or(IMAGENET_MEAN), raw.std.unwrap_or(IMAGENET_STD))
            .map_err(|e| Error::Profile(e.to_string()))?;
        Ok(ModelProfile {
            model_id: raw.model_id,
            weights,
            default_layer: raw.default_layer.unwrap_or_else(|| REFERENCE_TARGET_LAYER.into()),
            input_size: (h, w),
            preprocessing,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn build(&self) -> Result<ClassifierHandle> {
        let network = match &self.weights {
            WeightSource::Reference { seed } => {
                let cfg = ReferenceCnnConfig { seed: *seed, input_size: self.input_size, ..Default::default() };
                cfg.build().network().clone()
            }
            WeightSource::File(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Profile(format!("cannot open weight file {}: {e}", path.display())))?;
                serde_json::from_reader::<_, Network>(std::io::BufReader::new(file))?
            }
        };
        ClassifierHandle::new(self.model_id.clone(), network, self.input_size, self.preprocessing, self.default_layer.clone())
    }
}
