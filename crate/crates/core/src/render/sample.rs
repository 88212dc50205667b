use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{encode_image_file, render_pseudocolor, Colormap, EvidenceImage, ImageFormat};
use crate::error::{Error, Result};
use crate::features::{minmax_normalize, represent, FeatureConfig, TfKind};
use crate::signal::{wav, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Fake,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
        }
    }

    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Label::Real),
            "fake" => Ok(Label::Fake),
            other => Err(Error::invalid(format!("invalid label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "eval" => Ok(Split::Eval),
            other => Err(Error::invalid(format!("invalid split `{other}`"))),
        }
    }
}

/// One `(audio, evidence image, label)` record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub audio_path: PathBuf,
    pub image_path: PathBuf,
    pub label: Label,
    pub split: Split,
    pub domain: String,
}

/// How an evidence image is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub representation: TfKind,
    pub width: usize,
    pub height: usize,
    pub colormap: Colormap,
    pub format: ImageFormat,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            representation: TfKind::Cqt,
            width: 224,
            height: 224,
            colormap: Colormap::Viridis,
            format: ImageFormat::Ppm,
        }
    }
}

impl RenderConfig {
    /// 64x64 images, the size [`crate::model::ModelConfig::desk_scale`] expects.
    pub fn desk_scale() -> Self {
        Self {
            width: 64,
            height: 64,
            ..Self::default()
        }
    }
}

/// `render(normalize(represent(x)))`; for the CQT that is
/// `render(normalize(dB(|CQT(x)|)))`.
pub fn evidence_image(waveform: &Waveform, features: &FeatureConfig, render: &RenderConfig) -> Result<EvidenceImage> {
    let tf = represent(waveform, render.representation, features)?;
    render_pseudocolor(&minmax_normalize(&tf), render.width, render.height, render.colormap)
}

/// Writes the waveform to `audio_path` unless a file already exists there,
/// writes the rendered evidence image to `image_path`, and returns the
/// sample record.
#[allow(clippy::too_many_arguments)]
pub fn build_sample(
    waveform: &Waveform,
    label: Label,
    features: &FeatureConfig,
    render: &RenderConfig,
    audio_path: &Path,
    image_path: &Path,
    split: Split,
    domain: &str,
) -> Result<Sample> {
    if !audio_path.exists() {
        wav::write_wav(audio_path, waveform)?;
    }
    let image = evidence_image(waveform, features, render)?;
    encode_image_file(&image, image_path, render.format)?;
    Ok(Sample {
        audio_path: audio_path.to_path_buf(),
        image_path: image_path.to_path_buf(),
        label,
        split,
        domain: domain.to_string(),
    })
}
