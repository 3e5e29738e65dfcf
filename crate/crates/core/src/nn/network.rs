use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::{BatchNorm, Init, Layer, Linear, MaxPool, Mode, Relu};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Architecture description of one layer; hashed to fingerprint checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Linear {
        inputs: usize,
        outputs: usize,
        bias: bool,
        init: Init,
    },
    BatchNorm {
        features: usize,
    },
    Relu,
    MaxPool,
}

/// Layer stack with a fixed input width.
#[derive(Clone, Debug)]
pub struct Network {
    input_features: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    mode: Mode,
    forward_done: bool,
}

pub struct NetworkBuilder {
    input_features: usize,
    width: usize,
    specs: Vec<LayerSpec>,
}

impl NetworkBuilder {
    pub fn new(input_features: usize) -> Self {
        Self {
            input_features,
            width: input_features,
            specs: Vec::new(),
        }
    }

    pub fn linear(mut self, outputs: usize, bias: bool, init: Init) -> Self {
        self.specs.push(LayerSpec::Linear {
            inputs: self.width,
            outputs,
            bias,
            init,
        });
        self.width = outputs;
        self
    }

    pub fn batchnorm(mut self) -> Self {
        self.specs.push(LayerSpec::BatchNorm {
            features: self.width,
        });
        self
    }

    pub fn relu(mut self) -> Self {
        self.specs.push(LayerSpec::Relu);
        self
    }

    pub fn maxpool(mut self) -> Self {
        self.specs.push(LayerSpec::MaxPool);
        self
    }

    pub fn build(self, rng: &mut Rng) -> Network {
        Network::from_specs(self.input_features, self.specs, rng)
    }
}

impl Network {
    pub fn from_specs(input_features: usize, specs: Vec<LayerSpec>, rng: &mut Rng) -> Self {
        let layers = specs
            .iter()
            .map(|s| match *s {
                LayerSpec::Linear {
                    inputs,
                    outputs,
                    bias,
                    init,
                } => Layer::Linear(Linear::new(inputs, outputs, bias, init, rng)),
                LayerSpec::BatchNorm { features } => Layer::BatchNorm(BatchNorm::new(features)),
                LayerSpec::Relu => Layer::Relu(Relu::default()),
                LayerSpec::MaxPool => Layer::MaxPool(MaxPool::default()),
            })
            .collect();
        Self {
            input_features,
            specs,
            layers,
            mode: Mode::Train,
            forward_done: false,
        }
    }

    pub fn input_features(&self) -> usize {
        self.input_features
    }

    pub fn output_features(&self) -> usize {
        self.specs
            .iter()
            .rev()
            .find_map(|s| match s {
                LayerSpec::Linear { outputs, .. } => Some(*outputs),
                LayerSpec::BatchNorm { features } => Some(*features),
                _ => None,
            })
            .unwrap_or(self.input_features)
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Hex SHA-256 of the input width and layer specs.
    pub fn arch_hash(&self) -> String {
        arch_hash(self.input_features, &self.specs)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.features != self.input_features {
            return Err(Error::ShapeMismatch {
                context: "network input".into(),
                expected: format!("{} features", self.input_features),
                got: format!("{} features", x.features),
            });
        }
        self.forward_done = false;
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            cur = layer.forward(&cur, self.mode)?;
            if !cur.is_finite() {
                return Err(Error::NonFiniteActivation {
                    layer: i,
                    kind: layer.kind(),
                });
            }
        }
        self.forward_done = true;
        Ok(cur)
    }

    /// Accumulates parameter gradients for the cached forward pass and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        if !self.forward_done {
            return Err(Error::BackwardWithoutForward(self.layers.len()));
        }
        let mut grad = upstream.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            grad = layer
                .backward(&grad)
                .ok_or(Error::BackwardWithoutForward(i))?;
        }
        Ok(grad)
    }

    pub fn clear_cache(&mut self) {
        self.forward_done = false;
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    pub fn maxpool_tie(&self) -> bool {
        self.layers.iter().any(|l| match l {
            Layer::MaxPool(m) => m.last_had_tie(),
            _ => false,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.param_blocks())
            .map(|(p, _)| p.len())
            .sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for (p, _) in l.param_blocks() {
                out.extend_from_slice(p);
            }
        }
        out
    }

    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for (_, g) in l.param_blocks() {
                out.extend_from_slice(g);
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::SizeMismatch {
                left: values.len(),
                right: self.param_count(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            for (p, _) in l.param_blocks_mut() {
                let len = p.len();
                p.copy_from_slice(&values[off..off + len]);
                off += len;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            for (_, g) in l.param_blocks_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    pub fn batchnorm_stats(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::BatchNorm(b) => Some((b.running_mean.clone(), b.running_var.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn to_state(&self) -> NetworkState {
        NetworkState {
            arch_hash: self.arch_hash(),
            input_features: self.input_features,
            layers: self.specs.clone(),
            params: self.params_flat(),
            batchnorm: self
                .batchnorm_stats()
                .into_iter()
                .map(|(mean, var)| RunningStats { mean, var })
                .collect(),
        }
    }

    /// Restores a network, rejecting states whose architecture hash differs
    /// from `expected_hash` (when given) or from their own layer list.
    pub fn from_state(state: &NetworkState, expected_hash: Option<&str>) -> Result<Self> {
        let own = arch_hash(state.input_features, &state.layers);
        if own != state.arch_hash {
            return Err(Error::ArchitectureMismatch {
                expected: own,
                found: state.arch_hash.clone(),
            });
        }
        if let Some(exp) = expected_hash {
            if exp != state.arch_hash {
                return Err(Error::ArchitectureMismatch {
                    expected: exp.to_string(),
                    found: state.arch_hash.clone(),
                });
            }
        }
        let mut net = Network::from_specs(state.input_features, state.layers.clone(), &mut Rng::new(0));
        net.set_params_flat(&state.params)
            .map_err(|e| Error::InvalidCheckpoint(format!("parameter vector: {e}")))?;
        let mut stats = state.batchnorm.iter();
        for l in &mut net.layers {
            if let Layer::BatchNorm(b) = l {
                let s = stats
                    .next()
                    .ok_or_else(|| Error::InvalidCheckpoint("missing batchnorm stats".into()))?;
                if s.mean.len() != b.features || s.var.len() != b.features {
                    return Err(Error::InvalidCheckpoint("batchnorm stats width".into()));
                }
                b.running_mean = s.mean.clone();
                b.running_var = s.var.clone();
            }
        }
        if stats.next().is_some() {
            return Err(Error::InvalidCheckpoint("extra batchnorm stats".into()));
        }
        net.set_mode(Mode::Infer);
        Ok(net)
    }
}

pub fn arch_hash(input_features: usize, specs: &[LayerSpec]) -> String {
    let desc = serde_json::to_string(&(input_features, specs)).expect("specs serialize");
    hex::encode(Sha256::digest(desc.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkState {
    pub arch_hash: String,
    pub input_features: usize,
    pub layers: Vec<LayerSpec>,
    pub params: Vec<f64>,
    pub batchnorm: Vec<RunningStats>,
}
