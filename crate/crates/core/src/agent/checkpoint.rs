//! Versioned JSON checkpoints of trained per-intersection networks.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dqn::DqnConfig;
use super::mlp::{Layer, Mlp};

pub const CHECKPOINT_FORMAT: &str = "atsc-dqn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `outputs` rows of `inputs` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointAgent {
    pub intersection: String,
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub scenario: String,
    pub seed: u64,
    pub cycles_trained: u64,
    pub config: DqnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub agents: Vec<CheckpointAgent>,
    pub metadata: CheckpointMeta,
}

impl Checkpoint {
    /// `nets` pairs an intersection id with its online network.
    pub fn new(nets: &[(String, &Mlp)], metadata: CheckpointMeta) -> Self {
        let agents = nets
            .iter()
            .map(|(id, net)| CheckpointAgent {
                intersection: id.clone(),
                layers: net
                    .layers
                    .iter()
                    .map(|l| LayerParams {
                        weights: l.weights.chunks(l.inputs).map(|r| r.to_vec()).collect(),
                        bias: l.bias.clone(),
                    })
                    .collect(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: Architecture { layer_sizes: metadata.config.layer_sizes(), activation: "relu".into() },
            agents,
            metadata,
        }
    }

    /// Rebuilds the networks, checking every layer against the declared
    /// architecture.
    pub fn networks(&self) -> Result<Vec<Mlp>, CheckpointError> {
        let sizes = &self.architecture.layer_sizes;
        self.agents
            .iter()
            .map(|a| {
                if a.layers.len() + 1 != sizes.len() {
                    return Err(CheckpointError::Format(format!(
                        "agent `{}` has {} layers, architecture declares {}",
                        a.intersection,
                        a.layers.len(),
                        sizes.len() - 1
                    )));
                }
                let layers = a
                    .layers
                    .iter()
                    .zip(sizes.windows(2))
                    .map(|(p, w)| {
                        let (n_in, n_out) = (w[0], w[1]);
                        if p.weights.len() != n_out || p.bias.len() != n_out || p.weights.iter().any(|r| r.len() != n_in) {
                            return Err(CheckpointError::Format(format!(
                                "agent `{}`: layer shape differs from {n_in}x{n_out}",
                                a.intersection
                            )));
                        }
                        Ok(Layer { inputs: n_in, outputs: n_out, weights: p.weights.concat(), bias: p.bias.clone() })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Mlp { layers })
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Format(format!("format `{}`", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Format(format!("version {} (expected {CHECKPOINT_VERSION})", c.version)));
        }
        if c.architecture.activation != "relu" {
            return Err(CheckpointError::Format(format!("activation `{}`", c.architecture.activation)));
        }
        c.networks()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }
}
