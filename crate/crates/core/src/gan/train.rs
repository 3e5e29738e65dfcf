//! The completion pipeline and alternating adversarial training.

use serde::{Deserialize, Serialize};

use super::loss::{adversarial_grad, disc_loss_grad, recon_grad, GanLossKind, LossWeights};
use super::{GanSpec, LatentSource, ModeSettings, ReconTarget, TrainingMode};
use crate::autoencoder::{codes_to_tensor, tensor_to_clouds, Autoencoder, LatentCode};
use crate::distance::{hausdorff_directed, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::nn::gradcheck::Parameterized;
use crate::nn::{AdamConfig, AdamState, Checkpoint, Mode, Network, Tensor};
use crate::point::PointSet;
use crate::rng::Rng;

const TRAIN_STREAM: u64 = 0x6A4;

/// Frozen autoencoders plus the trainable generator and discriminator.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub spec: GanSpec,
    pub mode: TrainingMode,
    pub clean_ae: Autoencoder,
    pub partial_ae: Option<Autoencoder>,
    pub generator: Network,
    pub discriminator: Network,
}

/// Per-batch generator objective and its parts.
#[derive(Clone, Debug, PartialEq)]
pub struct GenTerms {
    pub loss: f64,
    pub adversarial: f64,
    pub reconstruction: f64,
    /// Hard directed Hausdorff from each input to its completion.
    pub hard_hl: Vec<f64>,
}

impl Pipeline {
    pub fn new(
        clean_ae: Autoencoder,
        partial_ae: Option<Autoencoder>,
        spec: GanSpec,
        mode: TrainingMode,
        rng: &mut Rng,
    ) -> Result<Self> {
        spec.validate()?;
        if clean_ae.spec.k != spec.k {
            return Err(Error::SizeMismatch { left: clean_ae.spec.k, right: spec.k });
        }
        if mode.settings().source == LatentSource::PartialAe {
            match &partial_ae {
                None => return Err(Error::Untrained(format!("mode {mode} needs a partial autoencoder"))),
                Some(p) if p.spec != clean_ae.spec => {
                    return Err(Error::invalid("partial and clean autoencoders must share a spec"))
                }
                Some(_) => {}
            }
        }
        let generator = spec.build_generator(rng);
        let discriminator = spec.build_discriminator(rng);
        let mut p = Self { spec, mode, clean_ae, partial_ae, generator, discriminator };
        p.freeze();
        Ok(p)
    }

    fn freeze(&mut self) {
        self.clean_ae.set_mode(Mode::Infer);
        if let Some(ae) = &mut self.partial_ae {
            ae.set_mode(Mode::Infer);
        }
    }

    pub fn n(&self) -> usize {
        self.clean_ae.spec.n
    }

    fn source(&mut self) -> &mut Autoencoder {
        match (self.mode.settings().source, &mut self.partial_ae) {
            (LatentSource::PartialAe, Some(ae)) => ae,
            _ => &mut self.clean_ae,
        }
    }

    /// Latent codes of partial inputs under the configured source encoder.
    pub fn encode_partial(&mut self, clouds: &[PointSet]) -> Result<Vec<LatentCode>> {
        let mut out = Vec::with_capacity(clouds.len());
        for chunk in clouds.chunks(64) {
            out.extend(self.source().encode_batch(chunk)?);
        }
        Ok(out)
    }

    pub fn encode_clean(&mut self, clouds: &[PointSet]) -> Result<Vec<LatentCode>> {
        let mut out = Vec::with_capacity(clouds.len());
        for chunk in clouds.chunks(64) {
            out.extend(self.clean_ae.encode_batch(chunk)?);
        }
        Ok(out)
    }

    pub fn map_codes(&mut self, codes: &[LatentCode]) -> Result<Vec<LatentCode>> {
        let out = self.generator.forward(&codes_to_tensor(codes)?)?;
        Ok(crate::autoencoder::tensor_to_codes(&out))
    }

    /// Clean decoder applied to the generator's image of each partial code.
    pub fn complete_batch(&mut self, partials: &[PointSet]) -> Result<Vec<PointSet>> {
        if partials.is_empty() {
            return Ok(Vec::new());
        }
        let zr = self.encode_partial(partials)?;
        let zc = self.map_codes(&zr)?;
        self.clean_ae.decode_batch(&zc)
    }

    pub fn complete(&mut self, partial: &PointSet) -> Result<PointSet> {
        Ok(self.complete_batch(std::slice::from_ref(partial))?.remove(0))
    }

    fn logits(&mut self, z: &Tensor) -> Result<Vec<f64>> {
        Ok(self.discriminator.forward(z)?.data)
    }

    /// Discriminator loss on a real and a fake batch, run as one stacked
    /// batch. With `with_grad` the gradient is accumulated into the
    /// discriminator.
    pub fn disc_objective(&mut self, real: &Tensor, fake: &Tensor, kind: GanLossKind, with_grad: bool) -> Result<f64> {
        let mut data = real.data.clone();
        data.extend_from_slice(&fake.data);
        let stacked = Tensor::from_vec(real.batch + fake.batch, 1, self.spec.k, data)?;
        let out = self.logits(&stacked)?;
        let (r, f) = out.split_at(real.batch);
        let (loss, dr, df) = disc_loss_grad(kind, r, f);
        if with_grad {
            let mut up = dr;
            up.extend(df);
            self.discriminator.backward(&Tensor::from_vec(up.len(), 1, 1, up)?)?;
        }
        Ok(loss)
    }

    /// Generator objective for partial codes `zr`. `inputs` are the partial
    /// clouds; `targets` are what the reconstruction term compares against
    /// (the inputs themselves, or ground truth in supervised runs). With
    /// `with_grad` the gradient flows through the frozen discriminator and
    /// decoder into the generator; only the generator's buffers are meant to
    /// be stepped.
    pub fn gen_objective(
        &mut self,
        zr: &Tensor,
        inputs: &[PointSet],
        targets: &[PointSet],
        w: &LossWeights,
        kind: GanLossKind,
        with_grad: bool,
    ) -> Result<GenTerms> {
        let b = zr.batch;
        if inputs.len() != b || targets.len() != b {
            return Err(Error::SizeMismatch { left: inputs.len().min(targets.len()), right: b });
        }
        let zc = self.generator.forward(zr)?;
        let fake = self.logits(&zc)?;
        let (adversarial, d_fake) = adversarial_grad(kind, &fake);
        let mut dzc = Tensor::zeros(b, 1, self.spec.k);
        if with_grad && w.alpha > 0.0 {
            let up: Vec<f64> = d_fake.iter().map(|g| w.alpha * g).collect();
            dzc = self.discriminator.backward(&Tensor::from_vec(b, 1, 1, up)?)?;
        }

        let out = self.clean_ae.decoder.forward(&zc)?;
        let completions = tensor_to_clouds(&out)?;
        let mut reconstruction = 0.0;
        let mut hard_hl = Vec::with_capacity(b);
        let mut up = Tensor::zeros(out.batch, out.points, out.features);
        let scale = w.beta / b as f64;
        for (i, c) in completions.iter().enumerate() {
            hard_hl.push(hausdorff_directed(&inputs[i], c)?);
            if w.beta == 0.0 {
                continue;
            }
            let (value, grad) = recon_grad(w.recon, w.tau, &targets[i], c)?;
            reconstruction += value;
            let row = up.row_mut(i);
            for (j, g) in grad.iter().enumerate() {
                for k in 0..3 {
                    row[3 * j + k] = g[k] * scale;
                }
            }
        }
        reconstruction /= b as f64;
        if with_grad && w.beta > 0.0 {
            let d = self.clean_ae.decoder.backward(&up)?;
            dzc.data.iter_mut().zip(&d.data).for_each(|(a, g)| *a += g);
        }
        if with_grad {
            self.generator.backward(&dzc)?;
        }
        Ok(GenTerms {
            loss: w.combine(adversarial, reconstruction),
            adversarial,
            reconstruction,
            hard_hl,
        })
    }

    /// Zeroes gradient buffers of the networks that are never stepped.
    fn clear_frozen_grads(&mut self) {
        self.clean_ae.zero_grad();
        if let Some(ae) = &mut self.partial_ae {
            ae.zero_grad();
        }
    }

    /// Checkpoint of the trainable networks; `references` should name the
    /// content hashes of the autoencoder checkpoints used.
    pub fn to_checkpoint(&self, seed: u64, references: &[(&str, String)]) -> Checkpoint {
        let mut ck = Checkpoint::new("gan", seed)
            .with_network("generator", &self.generator)
            .with_network("discriminator", &self.discriminator);
        for (name, hash) in references {
            ck.references.insert(name.to_string(), hash.clone());
        }
        ck.meta.insert("spec".into(), serde_json::to_value(&self.spec).expect("spec serializes"));
        ck.meta.insert("mode".into(), serde_json::to_value(self.mode).expect("mode serializes"));
        ck
    }

    /// Rebuilds a pipeline, verifying that the supplied autoencoder
    /// checkpoints are the ones the GAN was trained against.
    pub fn from_checkpoint(
        ck: &Checkpoint,
        clean: (&Checkpoint, Autoencoder),
        partial: Option<(&Checkpoint, Autoencoder)>,
    ) -> Result<Self> {
        if ck.kind != "gan" {
            return Err(Error::InvalidCheckpoint(format!("expected a gan checkpoint, found '{}'", ck.kind)));
        }
        let meta = |key: &str| {
            ck.meta
                .get(key)
                .cloned()
                .ok_or_else(|| Error::InvalidCheckpoint(format!("gan checkpoint lacks '{key}'")))
        };
        let spec: GanSpec = serde_json::from_value(meta("spec")?)?;
        let mode: TrainingMode = serde_json::from_value(meta("mode")?)?;
        let check = |name: &str, ae_ck: &Checkpoint| -> Result<()> {
            let expected = ck
                .references
                .get(name)
                .ok_or_else(|| Error::InvalidCheckpoint(format!("gan checkpoint has no '{name}' reference")))?;
            let found = ae_ck.content_hash();
            if *expected != found {
                return Err(Error::ArchitectureMismatch { expected: expected.clone(), found });
            }
            Ok(())
        };
        check("clean_ae", clean.0)?;
        let partial_ae = match partial {
            Some((pck, ae)) => {
                check("partial_ae", pck)?;
                Some(ae)
            }
            None => None,
        };
        let mut rng = Rng::new(0);
        let g_hash = spec.build_generator(&mut rng).arch_hash();
        let d_hash = spec.build_discriminator(&mut rng).arch_hash();
        let mut p = Self::new(clean.1, partial_ae, spec, mode, &mut rng)?;
        p.generator = ck.network("generator", Some(&g_hash))?;
        p.discriminator = ck.network("discriminator", Some(&d_hash))?;
        Ok(p)
    }
}

/// Gradient checks see only the generator's parameters.
impl Parameterized for Pipeline {
    fn params_flat(&self) -> Vec<f64> {
        self.generator.params_flat()
    }

    fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        self.generator.set_params_flat(values)
    }

    fn grads_flat(&self) -> Vec<f64> {
        self.generator.grads_flat()
    }

    fn zero_grad(&mut self) {
        self.generator.zero_grad();
        self.discriminator.zero_grad();
        self.clear_frozen_grads();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanTrainConfig {
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_loss")]
    pub loss: GanLossKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Discriminator updates per generator update.
    #[serde(default = "default_disc_steps")]
    pub disc_steps: usize,
}

fn default_loss() -> GanLossKind {
    GanLossKind::LeastSquares
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_disc_steps() -> usize {
    1
}

impl GanTrainConfig {
    /// Adam lr 0.0001, beta1 0.5, batch 24, up to 1000 epochs.
    pub fn paper() -> Self {
        Self {
            optimizer: AdamConfig::new(0.0001, 0.5),
            batch_size: 24,
            epochs: 1000,
            seed: 0,
            loss: default_loss(),
            tau: default_tau(),
            disc_steps: 1,
        }
    }
}

/// Training inputs. `partial_gt[i]` is the clean scan behind `partial[i]` and
/// is read only by supervised modes.
#[derive(Clone, Copy, Debug)]
pub struct GanData<'a> {
    pub clean: &'a [PointSet],
    pub partial: &'a [PointSet],
    pub partial_gt: Option<&'a [PointSet]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss_f: f64,
    pub loss_g: f64,
    pub hard_hl: f64,
    pub adv: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedGan {
    pub pipeline: Pipeline,
    pub rows: Vec<EpochRow>,
    /// Set when training stopped on a non-finite value; the pipeline then
    /// holds the parameters from the end of the last finite epoch.
    pub diverged: Option<String>,
}

pub fn train_gan(
    clean_ae: &Autoencoder,
    partial_ae: Option<&Autoencoder>,
    data: GanData<'_>,
    spec: &GanSpec,
    mode: TrainingMode,
    cfg: &GanTrainConfig,
) -> Result<TrainedGan> {
    train_gan_with(clean_ae, partial_ae, data, spec, mode, cfg, |_| {})
}

fn settings_for(mode: TrainingMode, cfg: &GanTrainConfig) -> Result<ModeSettings> {
    let mut s = mode.settings();
    s.weights.tau = cfg.tau;
    s.weights.validate()?;
    Ok(s)
}

fn rows_tensor(codes: &[LatentCode], idx: &[usize]) -> Result<Tensor> {
    codes_to_tensor(&idx.iter().map(|&i| codes[i].clone()).collect::<Vec<_>>())
}

/// Alternating updates: per batch, `disc_steps` discriminator steps on
/// detached generator output (skipped when alpha is 0), then one generator
/// step. The autoencoders are frozen.
pub fn train_gan_with(
    clean_ae: &Autoencoder,
    partial_ae: Option<&Autoencoder>,
    data: GanData<'_>,
    spec: &GanSpec,
    mode: TrainingMode,
    cfg: &GanTrainConfig,
    mut on_epoch: impl FnMut(&EpochRow),
) -> Result<TrainedGan> {
    if data.clean.is_empty() || data.partial.is_empty() {
        return Err(Error::EmptySet);
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let settings = settings_for(mode, cfg)?;
    let targets: &[PointSet] = match settings.target {
        ReconTarget::Input => data.partial,
        ReconTarget::GroundTruth => {
            let gt = data
                .partial_gt
                .ok_or_else(|| Error::invalid(format!("mode {mode} needs ground truth for the partial set")))?;
            if gt.len() != data.partial.len() {
                return Err(Error::SizeMismatch { left: gt.len(), right: data.partial.len() });
            }
            gt
        }
    };
    let mut rng = Rng::derive(cfg.seed, TRAIN_STREAM);
    let mut p = Pipeline::new(clean_ae.clone(), partial_ae.cloned(), spec.clone(), mode, &mut rng)?;
    let zr_all = p.encode_partial(data.partial)?;
    let zc_all = p.encode_clean(data.clean)?;
    // Start the generator on the clean manifold: output bias = mean clean code.
    if let Some(crate::nn::Layer::Linear(l)) = p.generator.layers_mut().last_mut() {
        if let Some(bias) = l.bias.as_mut() {
            let n = zc_all.len() as f64;
            bias.iter_mut().for_each(|b| *b = 0.0);
            for c in &zc_all {
                bias.iter_mut().zip(c.values()).for_each(|(b, v)| *b += v / n);
            }
        }
    }

    let mut opt_g = AdamState::new(cfg.optimizer, p.generator.param_count());
    let mut opt_d = AdamState::new(cfg.optimizer, p.discriminator.param_count());
    let w = settings.weights;
    let mut order: Vec<usize> = (0..data.partial.len()).collect();
    let mut clean_order: Vec<usize> = (0..data.clean.len()).collect();
    rng.shuffle(&mut clean_order);
    let mut clean_cursor = 0;
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut diverged = None;

    'epochs: for epoch in 0..cfg.epochs {
        let snapshot = (p.generator.clone(), p.discriminator.clone(), opt_g.clone(), opt_d.clone());
        rng.shuffle(&mut order);
        let (mut sum_f, mut sum_g, mut sum_adv, mut sum_hl) = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let zr = rows_tensor(&zr_all, chunk)?;
            let inputs: Vec<PointSet> = chunk.iter().map(|&i| data.partial[i].clone()).collect();
            let tgt: Vec<PointSet> = chunk.iter().map(|&i| targets[i].clone()).collect();

            let steps = if w.alpha > 0.0 { cfg.disc_steps.max(1) } else { 1 };
            let mut loss_f = 0.0;
            for _ in 0..steps {
                let mut real_idx = Vec::with_capacity(chunk.len());
                for _ in 0..chunk.len() {
                    if clean_cursor == clean_order.len() {
                        rng.shuffle(&mut clean_order);
                        clean_cursor = 0;
                    }
                    real_idx.push(clean_order[clean_cursor]);
                    clean_cursor += 1;
                }
                let real = rows_tensor(&zc_all, &real_idx)?;
                let fake = p.generator.forward(&zr)?;
                p.discriminator.zero_grad();
                let step = w.alpha > 0.0;
                loss_f = p.disc_objective(&real, &fake, cfg.loss, step)?;
                if !loss_f.is_finite() {
                    diverged = Some(format!("epoch {epoch}: discriminator loss {loss_f}"));
                    break;
                }
                if step {
                    if let Err(e) = opt_d.step_network(&mut p.discriminator) {
                        diverged = Some(format!("epoch {epoch}: {e}"));
                        break;
                    }
                }
            }
            if diverged.is_some() {
                break;
            }

            p.zero_grad();
            let terms = match p.gen_objective(&zr, &inputs, &tgt, &w, cfg.loss, true) {
                Ok(t) => t,
                Err(e @ (Error::NonFiniteActivation { .. } | Error::NonFiniteCoordinate(_))) => {
                    diverged = Some(format!("epoch {epoch}: {e}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            p.discriminator.zero_grad();
            p.clear_frozen_grads();
            if !terms.loss.is_finite() {
                diverged = Some(format!("epoch {epoch}: generator loss {}", terms.loss));
                break;
            }
            if let Err(e) = opt_g.step_network(&mut p.generator) {
                diverged = Some(format!("epoch {epoch}: {e}"));
                break;
            }
            sum_f += loss_f;
            sum_g += terms.loss;
            sum_adv += terms.adversarial;
            sum_hl += terms.hard_hl.iter().sum::<f64>();
            batches += 1;
        }
        if diverged.is_some() {
            p.generator = snapshot.0;
            p.discriminator = snapshot.1;
            break 'epochs;
        }
        let row = EpochRow {
            epoch,
            loss_f: sum_f / batches as f64,
            loss_g: sum_g / batches as f64,
            hard_hl: sum_hl / data.partial.len() as f64,
            adv: sum_adv / batches as f64,
        };
        on_epoch(&row);
        rows.push(row);
    }
    p.generator.set_mode(Mode::Infer);
    p.discriminator.set_mode(Mode::Infer);
    Ok(TrainedGan { pipeline: p, rows, diverged })
}
