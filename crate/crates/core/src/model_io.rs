//! Self-describing model files.
//!
//! Every trained model serializes to one JSON document with a
//! `format_version`, a `model_kind` discriminator, the model parameters, and
//! the scaling statistics (`normalizer`, `labels`) plus training metadata
//! when available. Floats are written with the shortest decimal that
//! round-trips, so a save/load cycle reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{ForestModel, LinearModel, TreeModel};
use crate::error::{Error, Result};
use crate::features::{LabelScaling, Normalizer};
use crate::linalg::Matrix;
use crate::net::{Network, NetworkSpec, TrainingMeta};

pub const FORMAT_VERSION: u32 = 1;

/// Model parameters, discriminated by `model_kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)] // transient serialization envelope
pub enum ModelPayload {
    Network {
        spec: NetworkSpec,
        /// Per-layer weight matrices, row-major.
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
    },
    Linear {
        model: LinearModel,
    },
    Tree {
        model: TreeModel,
    },
    Forest {
        model: ForestModel,
    },
}

/// The on-disk document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub payload: ModelPayload,
    pub normalizer: Option<Normalizer>,
    pub labels: Option<LabelScaling>,
    pub training: Option<TrainingMeta>,
}

/// A loaded model of any kind, with its scaling statistics alongside.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Network(Network),
    Linear(LinearModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone)]
pub struct SavedBundle {
    pub model: SavedModel,
    pub normalizer: Option<Normalizer>,
    pub labels: Option<LabelScaling>,
    pub training: Option<TrainingMeta>,
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Network(_) => "network",
            SavedModel::Linear(_) => "linear",
            SavedModel::Tree(_) => "tree",
            SavedModel::Forest(_) => "forest",
        }
    }

    /// Predict in scaled target space over already-scaled features.
    pub fn predict_matrix(&self, features: &Matrix) -> Result<Matrix> {
        match self {
            SavedModel::Network(net) => net.predict_scaled(features),
            SavedModel::Linear(m) => m.predict(features),
            SavedModel::Tree(m) => m.predict(features),
            SavedModel::Forest(m) => m.predict(features),
        }
    }
}

fn network_to_file(net: &Network) -> ModelFile {
    ModelFile {
        format_version: FORMAT_VERSION,
        payload: ModelPayload::Network {
            spec: net.spec().clone(),
            weights: net.weights().to_vec(),
            biases: net.biases().to_vec(),
        },
        normalizer: net.normalizer().cloned(),
        labels: net.labels().cloned(),
        training: net.training_meta().cloned(),
    }
}

fn file_to_bundle(file: ModelFile) -> Result<SavedBundle> {
    let ModelFile {
        format_version,
        payload,
        normalizer,
        labels,
        training,
    } = file;
    if format_version != FORMAT_VERSION {
        return Err(Error::Version {
            found: format_version,
            expected: FORMAT_VERSION,
        });
    }
    let model = match payload {
        ModelPayload::Network {
            spec,
            weights,
            biases,
        } => {
            let mut net = crate::net::network_from_parts(spec, weights, biases)
                .map_err(|e| Error::Format(e.to_string()))?;
            if let (Some(n), Some(l)) = (normalizer.clone(), labels.clone()) {
                net.attach_scaling(n, l);
            }
            net.training = training.clone();
            SavedModel::Network(net)
        }
        ModelPayload::Linear { model } => SavedModel::Linear(model),
        ModelPayload::Tree { model } => SavedModel::Tree(model),
        ModelPayload::Forest { model } => SavedModel::Forest(model),
    };
    Ok(SavedBundle {
        model,
        normalizer,
        labels,
        training,
    })
}

/// Serialize any model kind to the document text.
pub fn bundle_to_string(bundle: &SavedBundle) -> Result<String> {
    let payload = match &bundle.model {
        SavedModel::Network(net) => return model_to_string(net),
        SavedModel::Linear(m) => ModelPayload::Linear { model: m.clone() },
        SavedModel::Tree(m) => ModelPayload::Tree { model: m.clone() },
        SavedModel::Forest(m) => ModelPayload::Forest { model: m.clone() },
    };
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        payload,
        normalizer: bundle.normalizer.clone(),
        labels: bundle.labels.clone(),
        training: bundle.training.clone(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))
}

/// Serialize a network to the document text.
pub fn model_to_string(net: &Network) -> Result<String> {
    serde_json::to_string_pretty(&network_to_file(net)).map_err(|e| Error::Format(e.to_string()))
}

/// Parse any model kind from document text.
pub fn bundle_from_str(text: &str) -> Result<SavedBundle> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("missing or non-integer format_version".to_string()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::Version {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
    file_to_bundle(file)
}

/// Write a network model file (atomically: temp file then rename).
pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &model_to_string(net)?)
}

/// Load a network model file. Files holding a baseline kind are rejected;
/// use [`load_bundle`] for those.
pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    let bundle = load_bundle(path)?;
    match bundle.model {
        SavedModel::Network(net) => Ok(net),
        other => Err(Error::Format(format!(
            "expected a network model file, found model_kind `{}`",
            other.kind()
        ))),
    }
}

/// Write any model kind (atomically: temp file then rename).
pub fn save_bundle(bundle: &SavedBundle, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &bundle_to_string(bundle)?)
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<SavedBundle> {
    let text = fs::read_to_string(path.as_ref())?;
    bundle_from_str(&text)
}

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}
