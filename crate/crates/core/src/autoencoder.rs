//! Point-set autoencoder: a shared per-point MLP with batch normalization and
//! a feature-wise max over points maps a cloud to a `k`-dimensional code; a
//! fully connected decoder maps the code back to `n x 3` coordinates.

use serde::{Deserialize, Serialize};

use crate::distance::emd_with_grad;
use crate::error::{Error, Result};
use crate::nn::gradcheck::Parameterized;
use crate::nn::{AdamConfig, AdamState, Checkpoint, Init, LrSchedule, Mode, Network, NetworkBuilder, Tensor};
use crate::point::PointSet;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderSpec {
    /// Points per cloud.
    pub n: usize,
    /// Latent width.
    pub k: usize,
    /// Hidden widths of the per-point MLP; a final layer of width `k` follows.
    pub encoder_widths: Vec<usize>,
    /// Hidden widths of the decoder; a final linear layer of width `3n` follows.
    pub decoder_widths: Vec<usize>,
}

impl AutoencoderSpec {
    /// Layer widths 64-128-128-256-k and 256-256-3n.
    pub fn standard(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            encoder_widths: vec![64, 128, 128, 256],
            decoder_widths: vec![256, 256],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.k == 0 {
            return Err(Error::invalid(format!(
                "autoencoder needs n >= 2 and k >= 1 (got n={}, k={})",
                self.n, self.k
            )));
        }
        if self
            .encoder_widths
            .iter()
            .chain(&self.decoder_widths)
            .any(|&w| w == 0)
        {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    pub fn build_encoder(&self, rng: &mut Rng) -> Network {
        let mut b = NetworkBuilder::new(3);
        for &w in self.encoder_widths.iter().chain(std::iter::once(&self.k)) {
            // No bias: the following batchnorm cancels it.
            b = b.linear(w, false, Init::KaimingUniform).batchnorm().relu();
        }
        b.maxpool().build(rng)
    }

    pub fn build_decoder(&self, rng: &mut Rng) -> Network {
        let mut b = NetworkBuilder::new(self.k);
        for &w in &self.decoder_widths {
            b = b.linear(w, true, Init::KaimingUniform).relu();
        }
        b.linear(3 * self.n, true, Init::XavierUniform).build(rng)
    }
}

/// A `k`-dimensional embedding of a point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &LatentCode) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn codes_to_tensor(codes: &[LatentCode]) -> Result<Tensor> {
    Tensor::from_rows(&codes.iter().map(|c| c.0.clone()).collect::<Vec<_>>())
}

pub fn tensor_to_codes(t: &Tensor) -> Vec<LatentCode> {
    (0..t.batch).map(|b| LatentCode(t.item(b).to_vec())).collect()
}

pub fn clouds_to_tensor(sets: &[PointSet], n: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(sets.len() * n * 3);
    for s in sets {
        if s.len() != n {
            return Err(Error::SizeMismatch {
                left: s.len(),
                right: n,
            });
        }
        data.extend(s.iter().flat_map(|p| p.iter().copied()));
    }
    Tensor::from_vec(sets.len(), n, 3, data)
}

/// Splits a `(batch, 1, 3n)` decoder output into point sets.
pub fn tensor_to_clouds(t: &Tensor) -> Result<Vec<PointSet>> {
    (0..t.batch).map(|b| PointSet::from_flat(t.item(b))).collect()
}

#[derive(Clone, Debug)]
pub struct Autoencoder {
    pub spec: AutoencoderSpec,
    pub encoder: Network,
    pub decoder: Network,
}

impl Autoencoder {
    pub fn new(spec: AutoencoderSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let encoder = spec.build_encoder(rng);
        let decoder = spec.build_decoder(rng);
        Ok(Self {
            spec,
            encoder,
            decoder,
        })
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.encoder.set_mode(mode);
        self.decoder.set_mode(mode);
    }

    pub fn encode(&mut self, set: &PointSet) -> Result<LatentCode> {
        Ok(self.encode_batch(std::slice::from_ref(set))?.remove(0))
    }

    pub fn encode_batch(&mut self, sets: &[PointSet]) -> Result<Vec<LatentCode>> {
        let x = clouds_to_tensor(sets, self.spec.n)?;
        Ok(tensor_to_codes(&self.encoder.forward(&x)?))
    }

    pub fn decode(&mut self, z: &LatentCode) -> Result<PointSet> {
        Ok(self.decode_batch(std::slice::from_ref(z))?.remove(0))
    }

    pub fn decode_batch(&mut self, codes: &[LatentCode]) -> Result<Vec<PointSet>> {
        if let Some(c) = codes.iter().find(|c| c.len() != self.spec.k) {
            return Err(Error::SizeMismatch {
                left: c.len(),
                right: self.spec.k,
            });
        }
        tensor_to_clouds(&self.decoder.forward(&codes_to_tensor(codes)?)?)
    }

    /// decode(encode(set)) for each set.
    pub fn reconstruct(&mut self, sets: &[PointSet]) -> Result<Vec<PointSet>> {
        let codes = self.encode_batch(sets)?;
        self.decode_batch(&codes)
    }

    /// Mean EMD between each input and its reconstruction. With `with_grad`
    /// the gradient of that mean is accumulated into both networks.
    pub fn loss(&mut self, batch: &[PointSet], with_grad: bool) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptySet);
        }
        let x = clouds_to_tensor(batch, self.spec.n)?;
        let z = self.encoder.forward(&x)?;
        let out = self.decoder.forward(&z)?;
        let recon = tensor_to_clouds(&out)?;
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut upstream = Tensor::zeros(out.batch, out.points, out.features);
        for (b, (r, target)) in recon.iter().zip(batch).enumerate() {
            let (cost, grad) = emd_with_grad(r, target)?;
            total += cost;
            let row = upstream.row_mut(b);
            for (i, g) in grad.iter().enumerate() {
                for k in 0..3 {
                    row[3 * i + k] = g[k] * scale;
                }
            }
        }
        if with_grad {
            let dz = self.decoder.backward(&upstream)?;
            self.encoder.backward(&dz)?;
        }
        Ok(total * scale)
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let mut ck = Checkpoint::new("autoencoder", seed)
            .with_network("encoder", &self.encoder)
            .with_network("decoder", &self.decoder);
        ck.meta.insert(
            "spec".into(),
            serde_json::to_value(&self.spec).expect("spec serializes"),
        );
        ck
    }

    /// Restores an autoencoder, checking both networks against the
    /// architecture implied by `spec`.
    pub fn from_checkpoint(ck: &Checkpoint, spec: &AutoencoderSpec) -> Result<Self> {
        if ck.kind != "autoencoder" {
            return Err(Error::InvalidCheckpoint(format!(
                "expected an autoencoder checkpoint, found '{}'",
                ck.kind
            )));
        }
        let mut rng = Rng::new(0);
        let enc_hash = spec.build_encoder(&mut rng).arch_hash();
        let dec_hash = spec.build_decoder(&mut rng).arch_hash();
        let mut ae = Self {
            spec: spec.clone(),
            encoder: ck.network("encoder", Some(&enc_hash))?,
            decoder: ck.network("decoder", Some(&dec_hash))?,
        };
        ae.set_mode(Mode::Infer);
        Ok(ae)
    }
}

impl Parameterized for Autoencoder {
    fn params_flat(&self) -> Vec<f64> {
        let mut p = self.encoder.params_flat();
        p.extend(self.decoder.params_flat());
        p
    }

    fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        let split = self.encoder.param_count();
        if values.len() < split {
            return Err(Error::SizeMismatch {
                left: values.len(),
                right: split + self.decoder.param_count(),
            });
        }
        self.encoder.set_params_flat(&values[..split])?;
        self.decoder.set_params_flat(&values[split..])
    }

    fn grads_flat(&self) -> Vec<f64> {
        let mut g = self.encoder.grads_flat();
        g.extend(self.decoder.grads_flat());
        g
    }

    fn zero_grad(&mut self) {
        self.encoder.zero_grad();
        self.decoder.zero_grad();
    }

    fn has_maxpool_tie(&self) -> bool {
        self.encoder.maxpool_tie()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeTrainConfig {
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub schedule: LrSchedule,
}

impl AeTrainConfig {
    /// Adam lr 0.0005, beta1 0.9, batch 200, up to 2000 epochs.
    pub fn paper() -> Self {
        Self {
            optimizer: AdamConfig::new(0.0005, 0.9),
            batch_size: 200,
            epochs: 2000,
            seed: 0,
            schedule: LrSchedule::Constant,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedAutoencoder {
    pub model: Autoencoder,
    pub optimizer: AdamState,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

/// Trains from scratch with mini-batch Adam. The returned model is in infer
/// mode.
pub fn train_ae(
    dataset: &[PointSet],
    spec: &AutoencoderSpec,
    cfg: &AeTrainConfig,
) -> Result<TrainedAutoencoder> {
    train_ae_with(dataset, spec, cfg, |_, _| {})
}

/// [`train_ae`] with a per-epoch callback `(epoch, loss)`.
pub fn train_ae_with(
    dataset: &[PointSet],
    spec: &AutoencoderSpec,
    cfg: &AeTrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedAutoencoder> {
    if dataset.is_empty() {
        return Err(Error::EmptySet);
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    if let Some(bad) = dataset.iter().find(|s| s.len() != spec.n) {
        return Err(Error::SizeMismatch {
            left: bad.len(),
            right: spec.n,
        });
    }
    let mut rng = Rng::derive(cfg.seed, 0xAE);
    let mut model = Autoencoder::new(spec.clone(), &mut rng)?;
    model.set_mode(Mode::Train);
    let mut optimizer = AdamState::new(
        cfg.optimizer,
        model.encoder.param_count() + model.decoder.param_count(),
    );
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.epochs {
        optimizer.config.lr = cfg.schedule.lr_at(cfg.optimizer.lr, epoch);
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<PointSet> = chunk.iter().map(|&i| dataset[i].clone()).collect();
            model.zero_grad();
            let loss = model.loss(&batch, true)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("reconstruction loss {loss}"),
                });
            }
            sum += loss * batch.len() as f64;
            let mut params = model.params_flat();
            optimizer
                .step(&mut params, &model.grads_flat())
                .map_err(|e| Error::Divergence {
                    epoch,
                    detail: e.to_string(),
                })?;
            model.set_params_flat(&params)?;
        }
        let epoch_loss = sum / dataset.len() as f64;
        on_epoch(epoch, epoch_loss);
        losses.push(epoch_loss);
    }
    model.set_mode(Mode::Infer);
    Ok(TrainedAutoencoder {
        model,
        optimizer,
        losses,
    })
}

/// Per-cloud EMD between each input and its reconstruction, in infer mode.
pub fn reconstruction_emd(ae: &mut Autoencoder, sets: &[PointSet]) -> Result<Vec<f64>> {
    let prev = ae.encoder.mode();
    ae.set_mode(Mode::Infer);
    let recon = ae.reconstruct(sets);
    ae.set_mode(prev);
    recon?
        .iter()
        .zip(sets)
        .map(|(r, s)| crate::distance::emd(r, s).map(|(c, _)| c))
        .collect()
}
