//! Declarative experiment configuration and named presets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{AeTrainConfig, AutoencoderSpec};
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_EPSILON, DEFAULT_GRID, STANDARD_R_GRID};
use crate::gan::{GanSpec, GanTrainConfig, TrainingMode};
use crate::nn::{AdamConfig, LrSchedule};
use crate::synth::{DatasetConfig, ShapeFamily};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeSection {
    pub k: usize,
    pub encoder_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub train: AeTrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanSection {
    pub generator_widths: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    pub mode: TrainingMode,
    pub train: GanTrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub epsilon: f64,
    pub jsd_grid: usize,
    pub sweep_r: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    pub ae: AeSection,
    pub gan: GanSection,
    pub eval: EvalSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    PaperScale,
    DeskScale,
    ToyChairs,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::PaperScale, Preset::DeskScale, Preset::ToyChairs];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperScale => "paper-scale",
            Preset::DeskScale => "desk-scale",
            Preset::ToyChairs => "toy-chairs",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset '{s}' (expected paper-scale, desk-scale or toy-chairs)")))
    }
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::PaperScale => Self::paper_scale(),
            Preset::DeskScale => Self::desk_scale(),
            Preset::ToyChairs => Self::toy_chairs(),
        }
    }

    /// 2048 points, k = 128 and the published optimizer settings.
    pub fn paper_scale() -> Self {
        let ae = AutoencoderSpec::standard(2048, 128);
        let gan = GanSpec::standard(128);
        Self {
            version: CONFIG_VERSION,
            dataset: DatasetConfig {
                families: vec![ShapeFamily::Chair5, ShapeFamily::Table4, ShapeFamily::Lampoid, ShapeFamily::Box],
                shapes_per_pool: 2000,
                points: 2048,
                scan_resolution: 160,
                ..DatasetConfig::default()
            },
            ae: AeSection {
                k: ae.k,
                encoder_widths: ae.encoder_widths,
                decoder_widths: ae.decoder_widths,
                train: AeTrainConfig::paper(),
            },
            gan: GanSection {
                generator_widths: gan.generator_widths,
                discriminator_widths: gan.discriminator_widths,
                mode: TrainingMode::Default,
                train: GanTrainConfig::paper(),
            },
            eval: EvalSection {
                epsilon: DEFAULT_EPSILON,
                jsd_grid: DEFAULT_GRID,
                sweep_r: STANDARD_R_GRID.to_vec(),
                seed: 0,
            },
        }
    }

    /// 128-point chairs with k = 16 and shortened schedules. At 128 points
    /// the typical spacing between neighbours is several times 0.03, so the
    /// F1 threshold and the occupancy grid are coarsened to match.
    pub fn desk_scale() -> Self {
        let mut c = Self::paper_scale();
        c.dataset = DatasetConfig {
            families: vec![ShapeFamily::Chair5],
            shapes_per_pool: 200,
            points: 128,
            scan_resolution: 48,
            seed: 1,
            ..DatasetConfig::default()
        };
        c.ae.k = 16;
        c.ae.train = AeTrainConfig {
            optimizer: AdamConfig::new(0.0005, 0.9),
            batch_size: 10,
            epochs: 300,
            seed: 0,
            schedule: LrSchedule::Step { every: 100, factor: 0.5 },
        };
        c.gan.train = GanTrainConfig {
            optimizer: AdamConfig::new(0.0005, 0.5),
            epochs: 300,
            ..GanTrainConfig::paper()
        };
        c.eval.epsilon = 0.1;
        c.eval.jsd_grid = 16;
        c
    }

    /// A smaller desk-scale run for quick end-to-end checks.
    pub fn toy_chairs() -> Self {
        let mut c = Self::desk_scale();
        c.dataset.shapes_per_pool = 60;
        c.ae.train.epochs = 120;
        c.ae.train.schedule = LrSchedule::Step { every: 60, factor: 0.5 };
        c.gan.train.epochs = 150;
        c.eval.sweep_r = vec![0.1, 0.3, 0.5];
        c
    }

    pub fn ae_spec(&self) -> AutoencoderSpec {
        AutoencoderSpec {
            n: self.dataset.points,
            k: self.ae.k,
            encoder_widths: self.ae.encoder_widths.clone(),
            decoder_widths: self.ae.decoder_widths.clone(),
        }
    }

    pub fn gan_spec(&self) -> GanSpec {
        GanSpec {
            k: self.ae.k,
            generator_widths: self.gan.generator_widths.clone(),
            discriminator_widths: self.gan.discriminator_widths.clone(),
        }
    }

    /// Sets every seed in the config.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dataset.seed = seed;
        self.ae.train.seed = seed;
        self.gan.train.seed = seed;
        self.eval.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.dataset.validate().map_err(wrap)?;
        self.ae_spec().validate().map_err(wrap)?;
        self.gan_spec().validate().map_err(wrap)?;
        if self.ae.train.batch_size == 0 || self.gan.train.batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if !(self.eval.epsilon > 0.0) || self.eval.jsd_grid == 0 {
            return Err(Error::Config("eval.epsilon and eval.jsd_grid must be positive".into()));
        }
        if let Some(r) = self.eval.sweep_r.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!("sweep level {r} outside [0, 1)")));
        }
        Ok(())
    }

    /// Parses TOML when `path` ends in `.toml`, JSON otherwise.
    pub fn parse(text: &str, toml_syntax: bool) -> Result<Self> {
        let cfg: Self = if toml_syntax {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        Self::parse(&text, is_toml)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            let c = ExperimentConfig::preset(p);
            c.validate().unwrap();
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        let paper = ExperimentConfig::paper_scale();
        assert_eq!((paper.dataset.points, paper.ae.k), (2048, 128));
        assert_eq!(paper.eval.epsilon, 0.03);
        assert_eq!(paper.dataset.sigma, 0.01);
        let desk = ExperimentConfig::desk_scale();
        assert_eq!((desk.dataset.points, desk.ae.k), (128, 16));
    }

    #[test]
    fn json_and_toml_roundtrip() {
        let c = ExperimentConfig::toy_chairs();
        assert_eq!(ExperimentConfig::parse(&c.to_json(), false).unwrap(), c);
        let t = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::parse(&t, true).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&ExperimentConfig::toy_chairs().to_json()).unwrap();
        v["gan"]["extra"] = serde_json::json!(1);
        assert!(matches!(ExperimentConfig::parse(&v.to_string(), false), Err(Error::Config(_))));
    }

    #[test]
    fn version_checked() {
        let mut c = ExperimentConfig::toy_chairs();
        c.version = 99;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn seed_override_touches_every_section() {
        let c = ExperimentConfig::toy_chairs().with_seed(77);
        assert_eq!([c.dataset.seed, c.ae.train.seed, c.gan.train.seed, c.eval.seed], [77; 4]);
    }
}
