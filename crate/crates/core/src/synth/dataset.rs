//! Unpaired train/test datasets built from procedural shapes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::corrupt::{corrupt, CorruptionSpec, DEFAULT_SIGMA};
use super::scan::generate_shape;
use super::shapes::{ShapeFamily, ShapeParams};
use crate::error::{Error, Result};
use crate::io::{read_ply, write_ply};
use crate::point::PointSet;
use crate::rng::Rng;

const SPLIT_STREAM: u64 = 0x5011;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub families: Vec<ShapeFamily>,
    /// Instances in each of the clean and the partial pool.
    pub shapes_per_pool: usize,
    pub points: usize,
    /// Per-instance incompleteness is drawn uniformly from this range.
    pub r_min: f64,
    pub r_max: f64,
    pub sigma: f64,
    pub scan_resolution: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            families: vec![ShapeFamily::Chair5],
            shapes_per_pool: 100,
            points: 128,
            r_min: 0.1,
            r_max: 0.5,
            sigma: DEFAULT_SIGMA,
            scan_resolution: 48,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::Config("dataset needs at least one shape family".into()));
        }
        if self.shapes_per_pool < 2 {
            return Err(Error::Config("need at least 2 shapes per pool".into()));
        }
        if !(0.0 <= self.r_min && self.r_min <= self.r_max && self.r_max < 1.0) {
            return Err(Error::Config(format!(
                "incompleteness range [{}, {}] must satisfy 0 <= r_min <= r_max < 1",
                self.r_min, self.r_max
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        CorruptionSpec::new(self.r_min, self.sigma, 0)?;
        Ok(())
    }

    fn train_count(&self) -> usize {
        let t = (self.shapes_per_pool as f64 * self.train_fraction).round() as usize;
        t.clamp(1, self.shapes_per_pool - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub id: usize,
    pub params: ShapeParams,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CleanSample {
    pub record: ShapeRecord,
    pub cloud: PointSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialSample {
    pub record: ShapeRecord,
    pub corruption: CorruptionSpec,
    pub cloud: PointSet,
    /// Clean scan of the same instance. Never used by unpaired training.
    pub gt: PointSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub clean_train: Vec<CleanSample>,
    pub clean_test: Vec<CleanSample>,
    pub partial_train: Vec<PartialSample>,
    pub partial_test: Vec<PartialSample>,
}

fn make_instance(cfg: &DatasetConfig, id: usize) -> Result<(ShapeRecord, PointSet, Rng)> {
    let seed = Rng::derive(cfg.seed, id as u64).next_u64();
    let mut rng = Rng::new(seed);
    let family = cfg.families[rng.below(cfg.families.len())];
    let params = ShapeParams::sample(family, &mut rng);
    let (_, cloud) = generate_shape(&params, cfg.points, cfg.scan_resolution, &mut rng)?;
    Ok((ShapeRecord { id, params, seed }, cloud, rng))
}

fn split<T>(items: Vec<T>, train: usize, rng: &mut Rng) -> (Vec<T>, Vec<T>) {
    let order = rng.permutation(items.len());
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut ordered: Vec<T> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
    let test = ordered.split_off(train);
    (ordered, test)
}

/// Clean pool uses instance ids `0..count`, the partial pool `count..2*count`,
/// so no training partial has a clean counterpart in the clean pool.
pub fn make_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let count = cfg.shapes_per_pool;
    let mut clean = Vec::with_capacity(count);
    for id in 0..count {
        let (record, cloud, _) = make_instance(cfg, id)?;
        clean.push(CleanSample { record, cloud });
    }
    let mut partial = Vec::with_capacity(count);
    for id in count..2 * count {
        let (record, gt, mut rng) = make_instance(cfg, id)?;
        let r = if cfg.r_max > cfg.r_min { rng.uniform_range(cfg.r_min, cfg.r_max) } else { cfg.r_min };
        let corruption = CorruptionSpec::new(r, cfg.sigma, rng.next_u64())?;
        let cloud = corrupt(&gt, &corruption)?;
        partial.push(PartialSample { record, corruption, cloud, gt });
    }
    let mut split_rng = Rng::derive(cfg.seed, SPLIT_STREAM);
    let train = cfg.train_count();
    let (clean_train, clean_test) = split(clean, train, &mut split_rng);
    let (partial_train, partial_test) = split(partial, train, &mut split_rng);
    Ok(Dataset {
        config: cfg.clone(),
        clean_train,
        clean_test,
        partial_train,
        partial_test,
    })
}

pub fn clouds<'a, I>(samples: I) -> Vec<PointSet>
where
    I: IntoIterator<Item = &'a CleanSample>,
{
    samples.into_iter().map(|s| s.cloud.clone()).collect()
}

pub fn partial_clouds<'a, I>(samples: I) -> Vec<PointSet>
where
    I: IntoIterator<Item = &'a PartialSample>,
{
    samples.into_iter().map(|s| s.cloud.clone()).collect()
}

impl Dataset {
    pub fn clean_train_clouds(&self) -> Vec<PointSet> {
        clouds(&self.clean_train)
    }

    pub fn clean_test_clouds(&self) -> Vec<PointSet> {
        clouds(&self.clean_test)
    }

    pub fn partial_train_clouds(&self) -> Vec<PointSet> {
        partial_clouds(&self.partial_train)
    }

    pub fn partial_test_clouds(&self) -> Vec<PointSet> {
        partial_clouds(&self.partial_test)
    }

    /// Hidden ground truth of the training partials, for supervised variants.
    pub fn partial_train_gt(&self) -> Vec<PointSet> {
        self.partial_train.iter().map(|s| s.gt.clone()).collect()
    }

    /// `(partial, ground truth)` for every test partial.
    pub fn gt_pairs_test(&self) -> Vec<(PointSet, PointSet)> {
        self.partial_test
            .iter()
            .map(|s| (s.cloud.clone(), s.gt.clone()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    CleanTrain,
    CleanTest,
    PartialTrain,
    PartialTest,
}

impl Split {
    fn dir(&self) -> &'static str {
        match self {
            Split::CleanTrain => "clean_train",
            Split::CleanTest => "clean_test",
            Split::PartialTrain => "partial_train",
            Split::PartialTest => "partial_test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub split: Split,
    pub id: usize,
    pub family: ShapeFamily,
    pub params: ShapeParams,
    pub seed: u64,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Dataset {
    /// Writes every cloud as PLY plus `manifest.json` with relative paths.
    /// Ground truth of partial splits goes to sibling `<split>_gt` folders
    /// under the same file names.
    pub fn save(&self, dir: &Path) -> Result<Manifest> {
        let mut entries = Vec::new();
        let mut put = |split: Split, rec: &ShapeRecord, cloud: &PointSet, extra: Option<(&CorruptionSpec, &PointSet)>| -> Result<()> {
            let sub = dir.join(split.dir());
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            let rel = PathBuf::from(split.dir()).join(format!("{:06}.ply", rec.id));
            write_ply(&dir.join(&rel), cloud)?;
            let (corruption, gt_path) = match extra {
                Some((spec, gt)) => {
                    let gt_dir = format!("{}_gt", split.dir());
                    fs::create_dir_all(dir.join(&gt_dir)).map_err(|e| Error::io(dir.join(&gt_dir), e))?;
                    let g = PathBuf::from(gt_dir).join(format!("{:06}.ply", rec.id));
                    write_ply(&dir.join(&g), gt)?;
                    (Some(spec.clone()), Some(g))
                }
                None => (None, None),
            };
            entries.push(ManifestEntry {
                split,
                id: rec.id,
                family: rec.params.family,
                params: rec.params.clone(),
                seed: rec.seed,
                path: rel,
                corruption,
                gt_path,
            });
            Ok(())
        };
        for s in &self.clean_train {
            put(Split::CleanTrain, &s.record, &s.cloud, None)?;
        }
        for s in &self.clean_test {
            put(Split::CleanTest, &s.record, &s.cloud, None)?;
        }
        for s in &self.partial_train {
            put(Split::PartialTrain, &s.record, &s.cloud, Some((&s.corruption, &s.gt)))?;
        }
        for s in &self.partial_test {
            put(Split::PartialTest, &s.record, &s.cloud, Some((&s.corruption, &s.gt)))?;
        }
        let manifest = Manifest { config: self.config.clone(), entries };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Loads a dataset written by [`Dataset::save`]. Coordinates come back at
    /// PLY float precision.
    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::MissingInput(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let mut ds = Dataset {
            config: manifest.config,
            clean_train: vec![],
            clean_test: vec![],
            partial_train: vec![],
            partial_test: vec![],
        };
        for e in manifest.entries {
            let record = ShapeRecord { id: e.id, params: e.params, seed: e.seed };
            let cloud = read_ply(&dir.join(&e.path))?;
            let partial = || -> Result<PartialSample> {
                let missing = || Error::InvalidArgument(format!("manifest entry {} lacks ground truth", e.id));
                let gt_path = e.gt_path.as_ref().ok_or_else(missing)?;
                Ok(PartialSample {
                    record: record.clone(),
                    corruption: e.corruption.clone().ok_or_else(missing)?,
                    cloud: cloud.clone(),
                    gt: read_ply(&dir.join(gt_path))?,
                })
            };
            match e.split {
                Split::CleanTrain => ds.clean_train.push(CleanSample { record, cloud }),
                Split::CleanTest => ds.clean_test.push(CleanSample { record, cloud }),
                Split::PartialTrain => ds.partial_train.push(partial()?),
                Split::PartialTest => ds.partial_test.push(partial()?),
            }
        }
        Ok(ds)
    }
}
