//! Run directories and the staged commands that fill them.
//!
//! Layout under a run directory:
//!
//! ```text
//! config.json                 resolved config
//! run.lock                    held while a command runs
//! data/                       manifest.json and one PLY per cloud
//! ae/{clean,partial}_ae.json  checkpoints, with *_loss.csv and *_summary.json
//! gan/<mode>/gan.json         checkpoint and loss.csv
//! completions/<mode>/         completed test clouds
//! eval/<mode>/                metrics.csv and metrics.json
//! reports/                    sweep_<mode>.csv and ablation.csv
//! ```

use std::fs::{self, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{reconstruction_emd, train_ae_with, Autoencoder};
use crate::config::ExperimentConfig;
use crate::distance::hausdorff_directed;
use crate::error::{Error, Result};
use crate::eval::{incompleteness_sweep, jsd, mode_collapse_reference, sweep_csv, MetricsReport, SweepRow};
use crate::gan::{train_gan_with, GanData, LatentSource, Pipeline, ReconKind, ReconTarget, TrainingMode};
use crate::io::{read_cloud, write_ply};
use crate::nn::Checkpoint;
use crate::point::PointSet;
use crate::rng::Rng;
use crate::synth::{make_dataset, Dataset};

pub const CONFIG_FILE: &str = "config.json";
pub const LOCK_FILE: &str = "run.lock";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeKind {
    Clean,
    Partial,
}

impl AeKind {
    pub fn name(self) -> &'static str {
        match self {
            AeKind::Clean => "clean",
            AeKind::Partial => "partial",
        }
    }
}

impl std::str::FromStr for AeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(AeKind::Clean),
            "partial" => Ok(AeKind::Partial),
            _ => Err(Error::Config(format!("unknown autoencoder kind '{s}' (expected clean or partial)"))),
        }
    }
}

struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// An open run directory. Holds the lock until dropped.
pub struct Run {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub verbose: bool,
    _lock: RunLock,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

impl Run {
    /// Opens `dir`, creating it if needed. A given config is written to
    /// `config.json`, or must equal the one already there. Without one, the
    /// stored config is used.
    pub fn open(dir: &Path, config: Option<ExperimentConfig>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let lock = RunLock::acquire(dir)?;
        let path = dir.join(CONFIG_FILE);
        let stored = if path.exists() { Some(ExperimentConfig::load(&path)?) } else { None };
        let config = match (config, stored) {
            (Some(c), None) => {
                c.validate()?;
                write_text(&path, &c.to_json())?;
                c
            }
            (Some(c), Some(s)) if c == s => s,
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "{} holds a different config; use a fresh run directory",
                    path.display()
                )))
            }
            (None, Some(s)) => s,
            (None, None) => {
                return Err(Error::Config(format!("no config given and {} does not exist", path.display())))
            }
        };
        Ok(Self { dir: dir.to_path_buf(), config, verbose: false, _lock: lock })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dir.join("data")
    }

    pub fn ae_path(&self, kind: AeKind) -> PathBuf {
        self.dir.join("ae").join(format!("{}_ae.json", kind.name()))
    }

    pub fn gan_dir(&self, mode: TrainingMode) -> PathBuf {
        self.dir.join("gan").join(mode.name())
    }

    pub fn completions_dir(&self, mode: TrainingMode) -> PathBuf {
        self.dir.join("completions").join(mode.name())
    }

    pub fn eval_dir(&self, mode: TrainingMode) -> PathBuf {
        self.dir.join("eval").join(mode.name())
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.dir.join("reports")
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Dataset::load(&self.data_dir())
    }

    pub fn load_ae(&self, kind: AeKind) -> Result<(Checkpoint, Autoencoder)> {
        let ck = Checkpoint::load(&self.ae_path(kind))?;
        let ae = Autoencoder::from_checkpoint(&ck, &self.config.ae_spec())?;
        Ok((ck, ae))
    }

    pub fn load_pipeline(&self, mode: TrainingMode) -> Result<Pipeline> {
        let ck = Checkpoint::load(&self.gan_dir(mode).join("gan.json"))?;
        let (cck, cae) = self.load_ae(AeKind::Clean)?;
        let partial = if ck.references.contains_key("partial_ae") { Some(self.load_ae(AeKind::Partial)?) } else { None };
        Pipeline::from_checkpoint(&ck, (&cck, cae), partial.as_ref().map(|(c, a)| (c, a.clone())))
    }
}

/// Generates the dataset into `data/`, replacing any previous one.
pub fn cmd_synth(run: &Run) -> Result<Dataset> {
    let dir = run.data_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    run.log(format!("synthesizing {} shapes per pool", run.config.dataset.shapes_per_pool));
    let ds = make_dataset(&run.config.dataset)?;
    ds.save(&dir)?;
    // Reload so later commands and this one see identical coordinates.
    run.load_dataset()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeSummary {
    pub kind: AeKind,
    pub epochs: usize,
    pub first_loss: f64,
    pub final_loss: f64,
    pub heldout_emd: f64,
    pub checkpoint_hash: String,
}

pub fn cmd_train_ae(run: &Run, kind: AeKind) -> Result<AeSummary> {
    let ds = run.load_dataset()?;
    let (train, test) = match kind {
        AeKind::Clean => (ds.clean_train_clouds(), ds.clean_test_clouds()),
        AeKind::Partial => (ds.partial_train_clouds(), ds.partial_test_clouds()),
    };
    let cfg = &run.config.ae.train;
    let mut csv = String::from("epoch,loss\n");
    let trained = train_ae_with(&train, &run.config.ae_spec(), cfg, |epoch, loss| {
        csv.push_str(&format!("{},{:.8}\n", epoch + 1, loss));
        if run.verbose && (epoch + 1) % 25 == 0 {
            eprintln!("{} ae epoch {}: {loss:.6}", kind.name(), epoch + 1);
        }
    })?;
    let mut model = trained.model;
    let emd = reconstruction_emd(&mut model, &test)?;
    let path = run.ae_path(kind);
    write_text(&run.dir.join("ae").join(format!("{}_ae_loss.csv", kind.name())), &csv)?;
    let hash = model.to_checkpoint(cfg.seed).save(&path)?;
    let summary = AeSummary {
        kind,
        epochs: trained.losses.len(),
        first_loss: trained.losses.first().copied().unwrap_or(f64::NAN),
        final_loss: trained.losses.last().copied().unwrap_or(f64::NAN),
        heldout_emd: emd.iter().sum::<f64>() / emd.len().max(1) as f64,
        checkpoint_hash: hash,
    };
    write_json(&run.dir.join("ae").join(format!("{}_ae_summary.json", kind.name())), &summary)?;
    run.log(format!("{} ae held-out EMD {:.6}", kind.name(), summary.heldout_emd));
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanSummary {
    pub mode: TrainingMode,
    pub epochs: usize,
    pub final_loss_f: f64,
    pub final_loss_g: f64,
    pub final_hard_hl: f64,
}

/// Trains the latent GAN for `mode` against the stored autoencoders. A
/// divergent run still saves its last finite state, then reports the error.
pub fn cmd_train_gan(run: &Run, mode: TrainingMode) -> Result<GanSummary> {
    let ds = run.load_dataset()?;
    let (cck, cae) = run.load_ae(AeKind::Clean)?;
    let mut refs = vec![("clean_ae", cck.content_hash())];
    let partial = match mode.settings().source {
        LatentSource::PartialAe => {
            let (pck, pae) = run.load_ae(AeKind::Partial)?;
            refs.push(("partial_ae", pck.content_hash()));
            Some(pae)
        }
        LatentSource::CleanAe => None,
    };
    let clean = ds.clean_train_clouds();
    let partial_clouds = ds.partial_train_clouds();
    let gt = ds.partial_train_gt();
    let data = GanData { clean: &clean, partial: &partial_clouds, partial_gt: Some(&gt) };
    let cfg = run.config.gan.train.clone();
    let mut csv = String::from("epoch,loss_f,loss_g,hard_hl,adv_term\n");
    let trained = train_gan_with(&cae, partial.as_ref(), data, &run.config.gan_spec(), mode, &cfg, |row| {
        csv.push_str(&format!(
            "{},{:.8},{:.8},{:.8},{:.8}\n",
            row.epoch + 1,
            row.loss_f,
            row.loss_g,
            row.hard_hl,
            row.adv
        ));
        if run.verbose && (row.epoch + 1) % 25 == 0 {
            eprintln!("{mode} epoch {}: L_F {:.5} L_G {:.5} HL {:.5}", row.epoch + 1, row.loss_f, row.loss_g, row.hard_hl);
        }
    })?;
    let dir = run.gan_dir(mode);
    write_text(&dir.join("loss.csv"), &csv)?;
    trained.pipeline.to_checkpoint(cfg.seed, &refs).save(&dir.join("gan.json"))?;
    if let Some(detail) = trained.diverged {
        return Err(Error::Divergence { epoch: trained.rows.len(), detail });
    }
    let last = trained.rows.last().cloned();
    Ok(GanSummary {
        mode,
        epochs: trained.rows.len(),
        final_loss_f: last.as_ref().map_or(f64::NAN, |r| r.loss_f),
        final_loss_g: last.as_ref().map_or(f64::NAN, |r| r.loss_g),
        final_hard_hl: last.as_ref().map_or(f64::NAN, |r| r.hard_hl),
    })
}

/// `.ply`, `.xyz` and `.txt` files in `dir`, sorted by name.
pub fn cloud_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::MissingInput(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ply" | "xyz" | "txt")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::MissingInput(dir.to_path_buf()));
    }
    Ok(files)
}

/// Completes every cloud in `input` and writes `<stem>.ply` into `output`.
pub fn cmd_complete(run: &Run, mode: TrainingMode, input: &Path, output: &Path) -> Result<usize> {
    let files = cloud_files(input)?;
    let clouds = files.iter().map(|f| read_cloud(f)).collect::<Result<Vec<_>>>()?;
    let mut pipeline = run.load_pipeline(mode)?;
    let completed = pipeline.complete_batch(&clouds)?;
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    for (f, c) in files.iter().zip(&completed) {
        let stem = f.file_stem().expect("file has a name");
        write_ply(&output.join(stem).with_extension("ply"), c)?;
    }
    run.log(format!("completed {} clouds into {}", completed.len(), output.display()));
    Ok(completed.len())
}

/// Pairs completions with ground truth by file name and writes
/// `metrics.csv` and `metrics.json` into `output`.
pub fn cmd_eval(run: &Run, completions: &Path, gt: &Path, output: &Path) -> Result<MetricsReport> {
    let files = cloud_files(completions)?;
    let mut comp = Vec::with_capacity(files.len());
    let mut truth = Vec::with_capacity(files.len());
    for f in &files {
        let g = gt.join(f.file_name().expect("file has a name"));
        if !g.exists() {
            return Err(Error::MissingInput(g));
        }
        comp.push(read_cloud(f)?);
        truth.push(read_cloud(&g)?);
    }
    let report = evaluate(&run.config, &comp, &truth)?;
    write_text(&output.join("metrics.csv"), &report.to_csv())?;
    write_text(&output.join("metrics.json"), &(report.to_json() + "\n"))?;
    Ok(report)
}

fn evaluate(cfg: &ExperimentConfig, comp: &[PointSet], gt: &[PointSet]) -> Result<MetricsReport> {
    let mut report = MetricsReport::evaluate(comp, gt, cfg.eval.epsilon)?;
    let mut rng = Rng::new(cfg.eval.seed);
    let reference = mode_collapse_reference(gt, &mut rng)?;
    report.jsd = Some(jsd(gt, comp, cfg.eval.jsd_grid)?);
    report.jsd_reference = Some(jsd(gt, &reference, cfg.eval.jsd_grid)?);
    Ok(report)
}

/// Corrupts the clean test shapes at each configured level and compares the
/// pipeline with the clean autoencoder applied directly.
pub fn cmd_sweep(run: &Run, mode: TrainingMode) -> Result<Vec<SweepRow>> {
    let ds = run.load_dataset()?;
    let mut pipeline = run.load_pipeline(mode)?;
    let (_, mut baseline) = run.load_ae(AeKind::Clean)?;
    let c = &run.config;
    let rows = incompleteness_sweep(
        &mut pipeline,
        &mut baseline,
        &ds.clean_test_clouds(),
        &c.eval.sweep_r,
        c.dataset.sigma,
        c.eval.seed,
        c.eval.epsilon,
    )?;
    write_text(&run.reports_dir().join(format!("sweep_{}.csv", mode.name())), &sweep_csv(&rows))?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: TrainingMode,
    pub alpha: f64,
    pub beta: f64,
    pub recon: ReconKind,
    pub target: ReconTarget,
    pub source: LatentSource,
    pub accuracy: f64,
    pub completeness: f64,
    pub f1: f64,
    pub emd: f64,
    pub chamfer: f64,
    /// Mean directed Hausdorff distance from input to completion.
    pub hl: f64,
    pub jsd: f64,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("mode,alpha,beta,recon,target,source,accuracy,completeness,f1,emd,chamfer,hl,jsd\n");
    for r in rows {
        let recon = match r.recon {
            ReconKind::Hausdorff => "hausdorff",
            ReconKind::Emd => "emd",
        };
        let target = match r.target {
            ReconTarget::Input => "input",
            ReconTarget::GroundTruth => "ground_truth",
        };
        let source = match r.source {
            LatentSource::CleanAe => "clean_ae",
            LatentSource::PartialAe => "partial_ae",
        };
        out.push_str(&format!(
            "{},{:.2},{:.2},{recon},{target},{source},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.mode.name(),
            r.alpha,
            r.beta,
            r.accuracy,
            r.completeness,
            r.f1,
            r.emd,
            r.chamfer,
            r.hl,
            r.jsd
        ));
    }
    out
}

/// Scores a trained mode on the partial test split.
pub fn score_mode(run: &Run, mode: TrainingMode, ds: &Dataset) -> Result<AblationRow> {
    let mut pipeline = run.load_pipeline(mode)?;
    let (inputs, gt): (Vec<_>, Vec<_>) = ds.gt_pairs_test().into_iter().unzip();
    let comp = pipeline.complete_batch(&inputs)?;
    let report = evaluate(&run.config, &comp, &gt)?;
    let hl = inputs
        .iter()
        .zip(&comp)
        .map(|(i, c)| hausdorff_directed(i, c))
        .collect::<Result<Vec<_>>>()?;
    let s = mode.settings();
    Ok(AblationRow {
        mode,
        alpha: s.weights.alpha,
        beta: s.weights.beta,
        recon: s.weights.recon,
        target: s.target,
        source: s.source,
        accuracy: report.mean.accuracy,
        completeness: report.mean.completeness,
        f1: report.mean.f1,
        emd: report.mean.emd,
        chamfer: report.mean.chamfer,
        hl: hl.iter().sum::<f64>() / hl.len() as f64,
        jsd: report.jsd.expect("set by evaluate"),
    })
}

/// Trains and scores every training mode. The partial autoencoder is
/// trained first when missing; the clean one must already exist.
pub fn cmd_ablate(run: &Run) -> Result<Vec<AblationRow>> {
    if !run.ae_path(AeKind::Clean).exists() {
        return Err(Error::MissingCheckpoint(run.ae_path(AeKind::Clean)));
    }
    if !run.ae_path(AeKind::Partial).exists() {
        cmd_train_ae(run, AeKind::Partial)?;
    }
    let ds = run.load_dataset()?;
    let mut rows = Vec::new();
    for mode in TrainingMode::ALL {
        run.log(format!("ablation: training {mode}"));
        cmd_train_gan(run, mode)?;
        rows.push(score_mode(run, mode, &ds)?);
    }
    write_text(&run.reports_dir().join("ablation.csv"), &ablation_csv(&rows))?;
    Ok(rows)
}

/// Writes the partial test split's inputs into `completions/<mode>/` after
/// completing them, then evaluates against the stored ground truth.
pub fn cmd_complete_and_eval_test(run: &Run, mode: TrainingMode) -> Result<MetricsReport> {
    let data = run.data_dir();
    let out = run.completions_dir(mode);
    cmd_complete(run, mode, &data.join("partial_test"), &out)?;
    cmd_eval(run, &out, &data.join("partial_test_gt"), &run.eval_dir(mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    pub(crate) fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::toy_chairs();
        c.dataset.shapes_per_pool = 12;
        c.dataset.points = 32;
        c.dataset.scan_resolution = 24;
        c.ae.k = 4;
        c.ae.encoder_widths = vec![8, 8];
        c.ae.decoder_widths = vec![16];
        c.ae.train.epochs = 3;
        c.ae.train.batch_size = 4;
        c.gan.generator_widths = vec![8];
        c.gan.discriminator_widths = vec![8];
        c.gan.train.epochs = 2;
        c.gan.train.batch_size = 4;
        c
    }

    #[test]
    fn lock_excludes_second_open() {
        let d = tempdir().unwrap();
        let run = Run::open(d.path(), Some(tiny())).unwrap();
        assert!(matches!(Run::open(d.path(), None), Err(Error::Locked(_))));
        drop(run);
        assert!(!d.path().join(LOCK_FILE).exists());
        assert_eq!(Run::open(d.path(), None).unwrap().config, tiny());
    }

    #[test]
    fn config_mismatch_rejected() {
        let d = tempdir().unwrap();
        drop(Run::open(d.path(), Some(tiny())).unwrap());
        let other = tiny().with_seed(9);
        assert!(matches!(Run::open(d.path(), Some(other)), Err(Error::Config(_))));
        assert!(matches!(Run::open(tempdir().unwrap().path(), None), Err(Error::Config(_))));
    }

    #[test]
    fn commands_need_their_inputs() {
        let d = tempdir().unwrap();
        let run = Run::open(d.path(), Some(tiny())).unwrap();
        assert!(matches!(cmd_train_ae(&run, AeKind::Clean), Err(Error::MissingInput(_))));
        cmd_synth(&run).unwrap();
        assert!(matches!(cmd_train_gan(&run, TrainingMode::Default), Err(Error::MissingCheckpoint(_))));
        assert!(matches!(cmd_ablate(&run), Err(Error::MissingCheckpoint(_))));
    }

    #[test]
    fn staged_commands_write_declared_outputs() {
        let d = tempdir().unwrap();
        let run = Run::open(d.path(), Some(tiny())).unwrap();
        cmd_synth(&run).unwrap();
        let s = cmd_train_ae(&run, AeKind::Clean).unwrap();
        assert_eq!(s.epochs, 3);
        assert!(d.path().join("ae/clean_ae_loss.csv").exists());
        cmd_train_gan(&run, TrainingMode::Default).unwrap();
        let loss = fs::read_to_string(run.gan_dir(TrainingMode::Default).join("loss.csv")).unwrap();
        assert!(loss.starts_with("epoch,loss_f,loss_g,hard_hl,adv_term\n"));
        assert_eq!(loss.lines().count(), 3);
        let report = cmd_complete_and_eval_test(&run, TrainingMode::Default).unwrap();
        assert_eq!(report.rows.len(), run.load_dataset().unwrap().partial_test.len());
        assert!(report.jsd_reference.is_some());
        let rows = cmd_sweep(&run, TrainingMode::Default).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(run.reports_dir().join("sweep_default.csv").exists());
    }

    #[test]
    fn pipeline_rejects_retrained_autoencoder() {
        let d = tempdir().unwrap();
        let run = Run::open(d.path(), Some(tiny())).unwrap();
        cmd_synth(&run).unwrap();
        cmd_train_ae(&run, AeKind::Clean).unwrap();
        cmd_train_gan(&run, TrainingMode::NoGan).unwrap();
        let (ck, ae) = run.load_ae(AeKind::Clean).unwrap();
        let mut ck2 = ck.clone();
        ck2.seed += 1;
        ck2.save(&run.ae_path(AeKind::Clean)).unwrap();
        drop(ae);
        assert!(matches!(run.load_pipeline(TrainingMode::NoGan), Err(Error::ArchitectureMismatch { .. })));
    }

    #[test]
    fn eval_pairs_by_file_name() {
        let d = tempdir().unwrap();
        let run = Run::open(&d.path().join("run"), Some(tiny())).unwrap();
        let (a, b) = (d.path().join("a"), d.path().join("b"));
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        let p = PointSet::new(vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]).unwrap();
        let q = PointSet::new(vec![[0.0, 0.0, 0.0], [0.0, 0.5, 0.0]]).unwrap();
        write_ply(&a.join("x.ply"), &p).unwrap();
        write_ply(&a.join("y.ply"), &q).unwrap();
        write_ply(&b.join("y.ply"), &q).unwrap();
        write_ply(&b.join("x.ply"), &p).unwrap();
        let r = cmd_eval(&run, &a, &b, &d.path().join("out")).unwrap();
        assert_eq!(r.mean.f1, 100.0);
        fs::remove_file(b.join("y.ply")).unwrap();
        assert!(matches!(cmd_eval(&run, &a, &b, &d.path().join("out")), Err(Error::MissingInput(_))));
    }
}
