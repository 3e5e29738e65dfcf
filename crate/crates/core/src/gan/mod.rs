//! Latent-space mapping from partial codes to clean codes, trained with a
//! least-squares GAN plus a reconstruction term.

pub mod loss;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Init, Network, NetworkBuilder};
use crate::rng::Rng;

pub use loss::{disc_loss, gen_loss, GanLossKind, LossWeights, ReconKind};
pub use train::{train_gan, train_gan_with, EpochRow, GanData, GanTrainConfig, Pipeline, TrainedGan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanSpec {
    pub k: usize,
    /// Hidden widths of the generator; a linear layer back to `k` follows.
    pub generator_widths: Vec<usize>,
    /// Hidden widths of the discriminator; a linear layer to one logit follows.
    pub discriminator_widths: Vec<usize>,
}

impl GanSpec {
    /// Generator k-128-k, discriminator k-256-512-1.
    pub fn standard(k: usize) -> Self {
        Self {
            k,
            generator_widths: vec![128],
            discriminator_widths: vec![256, 512],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.generator_widths.iter().chain(&self.discriminator_widths).any(|&w| w == 0) {
            return Err(Error::invalid("GAN layer widths must be positive"));
        }
        Ok(())
    }

    pub fn build_generator(&self, rng: &mut Rng) -> Network {
        let mut b = NetworkBuilder::new(self.k);
        for &w in &self.generator_widths {
            b = b.linear(w, true, Init::KaimingUniform).relu();
        }
        b.linear(self.k, true, Init::XavierUniform).build(rng)
    }

    pub fn build_discriminator(&self, rng: &mut Rng) -> Network {
        let mut b = NetworkBuilder::new(self.k);
        for &w in &self.discriminator_widths {
            b = b.linear(w, true, Init::KaimingUniform).relu();
        }
        b.linear(1, true, Init::XavierUniform).build(rng)
    }
}

/// What the reconstruction term compares the completion against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconTarget {
    Input,
    GroundTruth,
}

/// Which autoencoder embeds the partial inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSource {
    CleanAe,
    PartialAe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    Default,
    PartialAe,
    EmdRecon,
    NoGan,
    NoRecon,
    SupervisedEmd,
    SupervisedEmdGan,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSettings {
    pub weights: LossWeights,
    pub target: ReconTarget,
    pub source: LatentSource,
}

impl TrainingMode {
    pub const ALL: [TrainingMode; 7] = [
        TrainingMode::PartialAe,
        TrainingMode::EmdRecon,
        TrainingMode::NoGan,
        TrainingMode::NoRecon,
        TrainingMode::Default,
        TrainingMode::SupervisedEmd,
        TrainingMode::SupervisedEmdGan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainingMode::Default => "default",
            TrainingMode::PartialAe => "partial_ae",
            TrainingMode::EmdRecon => "emd_recon",
            TrainingMode::NoGan => "no_gan",
            TrainingMode::NoRecon => "no_recon",
            TrainingMode::SupervisedEmd => "supervised_emd",
            TrainingMode::SupervisedEmdGan => "supervised_emd_gan",
        }
    }

    pub fn is_supervised(self) -> bool {
        self.settings().target == ReconTarget::GroundTruth
    }

    pub fn settings(self) -> ModeSettings {
        let w = |alpha, beta, recon| LossWeights { alpha, beta, recon, ..LossWeights::standard() };
        let (weights, target, source) = match self {
            TrainingMode::Default => (LossWeights::standard(), ReconTarget::Input, LatentSource::CleanAe),
            TrainingMode::PartialAe => (LossWeights::standard(), ReconTarget::Input, LatentSource::PartialAe),
            TrainingMode::EmdRecon => (w(0.25, 0.75, ReconKind::Emd), ReconTarget::Input, LatentSource::CleanAe),
            TrainingMode::NoGan => (w(0.0, 1.0, ReconKind::Hausdorff), ReconTarget::Input, LatentSource::CleanAe),
            TrainingMode::NoRecon => (w(1.0, 0.0, ReconKind::Hausdorff), ReconTarget::Input, LatentSource::CleanAe),
            TrainingMode::SupervisedEmd => (w(0.0, 1.0, ReconKind::Emd), ReconTarget::GroundTruth, LatentSource::CleanAe),
            TrainingMode::SupervisedEmdGan => {
                (w(0.25, 0.75, ReconKind::Emd), ReconTarget::GroundTruth, LatentSource::CleanAe)
            }
        };
        ModeSettings { weights, target, source }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        TrainingMode::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown training mode '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shapes() {
        let spec = GanSpec::standard(16);
        let mut rng = Rng::new(0);
        let g = spec.build_generator(&mut rng);
        let d = spec.build_discriminator(&mut rng);
        assert_eq!((g.input_features(), g.output_features()), (16, 16));
        assert_eq!((d.input_features(), d.output_features()), (16, 1));
        assert_eq!(d.param_count(), 16 * 256 + 256 + 256 * 512 + 512 + 512 + 1);
    }

    #[test]
    fn modes_are_distinct_and_named() {
        let mut seen = Vec::new();
        for m in TrainingMode::ALL {
            assert_eq!(m.name().parse::<TrainingMode>().unwrap(), m);
            let s = m.settings();
            s.weights.validate().unwrap();
            let key = (s.weights.alpha.to_bits(), s.weights.beta.to_bits(), s.weights.recon, s.target, s.source);
            assert!(!seen.contains(&key), "{m} duplicates another mode");
            seen.push(key);
        }
        assert!("partial-ae".parse::<TrainingMode>().is_ok());
        assert!("bogus".parse::<TrainingMode>().is_err());
    }

    #[test]
    fn switch_off_settings() {
        let ng = TrainingMode::NoGan.settings().weights;
        assert_eq!((ng.alpha, ng.beta), (0.0, 1.0));
        let nr = TrainingMode::NoRecon.settings().weights;
        assert_eq!((nr.alpha, nr.beta), (1.0, 0.0));
        let sup = TrainingMode::SupervisedEmd.settings();
        assert_eq!((sup.weights.alpha, sup.weights.recon, sup.target), (0.0, ReconKind::Emd, ReconTarget::GroundTruth));
    }
}
