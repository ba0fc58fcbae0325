use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, AdamState, DenseLayer, LstmCell, Tensor2};
use crate::error::{config_err, Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// One layer's parameters: weights flattened row-major, with shape metadata.
///
/// `shape` is `[out, in]` for dense layers, `[hidden, input]` for recurrent
/// cells and `[len]` for plain vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    pub shape: Vec<usize>,
    pub tensors: Vec<Vec<f64>>,
}

impl LayerRecord {
    pub fn dense(name: impl Into<String>, layer: &DenseLayer) -> Self {
        Self {
            name: name.into(),
            kind: "dense".into(),
            activation: Some(layer.activation),
            shape: vec![layer.out_size(), layer.in_size()],
            tensors: vec![layer.weights.data().to_vec(), layer.bias.clone()],
        }
    }

    pub fn lstm(name: impl Into<String>, cell: &LstmCell) -> Self {
        Self {
            name: name.into(),
            kind: "lstm".into(),
            activation: None,
            shape: vec![cell.hidden_size(), cell.input_size()],
            tensors: vec![
                cell.w_input.data().to_vec(),
                cell.w_hidden.data().to_vec(),
                cell.bias.clone(),
            ],
        }
    }

    pub fn vector(name: impl Into<String>, values: &[f64]) -> Self {
        Self {
            name: name.into(),
            kind: "vector".into(),
            activation: None,
            shape: vec![values.len()],
            tensors: vec![values.to_vec()],
        }
    }

    fn expect_kind(&self, kind: &str, tensors: usize) -> Result<()> {
        if self.kind != kind || self.tensors.len() != tensors {
            return Err(config_err(format!(
                "layer {} is {} with {} tensors, expected {kind}",
                self.name,
                self.kind,
                self.tensors.len()
            )));
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<DenseLayer> {
        self.expect_kind("dense", 2)?;
        let [out, inp] = self.shape[..] else {
            return Err(config_err(format!("layer {} has bad shape", self.name)));
        };
        let activation = self
            .activation
            .ok_or_else(|| config_err(format!("layer {} lacks an activation", self.name)))?;
        let weights = Tensor2::from_vec(out, inp, self.tensors[0].clone())?;
        DenseLayer::from_parts(weights, self.tensors[1].clone(), activation)
    }

    pub fn to_lstm(&self) -> Result<LstmCell> {
        self.expect_kind("lstm", 3)?;
        let [hidden, input] = self.shape[..] else {
            return Err(config_err(format!("layer {} has bad shape", self.name)));
        };
        let cell = LstmCell {
            w_input: Tensor2::from_vec(4 * hidden, input, self.tensors[0].clone())?,
            w_hidden: Tensor2::from_vec(4 * hidden, hidden, self.tensors[1].clone())?,
            bias: self.tensors[2].clone(),
        };
        if cell.bias.len() != 4 * hidden {
            return Err(config_err(format!("layer {} bias length", self.name)));
        }
        Ok(cell)
    }

    pub fn to_vector(&self) -> Result<Vec<f64>> {
        self.expect_kind("vector", 1)?;
        if self.shape != [self.tensors[0].len()] {
            return Err(config_err(format!("layer {} has bad shape", self.name)));
        }
        Ok(self.tensors[0].clone())
    }
}

/// Versioned JSON checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: String,
    /// Hash of the configuration that produced the weights.
    pub tag: String,
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub layers: Vec<LayerRecord>,
    #[serde(default)]
    pub optimizer: Vec<AdamState>,
}

impl Checkpoint {
    pub fn new(model: impl Into<String>, tag: impl Into<String>, layers: Vec<LayerRecord>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model: model.into(),
            tag: tag.into(),
            metadata: serde_json::Value::Null,
            layers,
            optimizer: Vec::new(),
        }
    }

    pub fn layer(&self, name: &str) -> Result<&LayerRecord> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| config_err(format!("checkpoint has no layer named {name}")))
    }

    pub fn expect_model(&self, model: &str) -> Result<()> {
        if self.model != model {
            return Err(config_err(format!("checkpoint holds a {} model, expected {model}", self.model)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(config_err(format!(
                "unsupported checkpoint format version {}",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("checkpoint {} not found", path.display())),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text)
    }
}
