//! Dataset builder and the CSV manifest that indexes it.
//!
//! Manifest header:
//! `id,split,gt_path,corrupt_path,order,scale_rad,c2,c3,c4,c5,c6,c7,c8,c9,c10`.
//! Paths are relative to the manifest's directory. Floats use the shortest
//! representation that round-trips exactly.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::corruption::{corrupt, sample_corruption, CorruptionSpec};
use super::rng::derive_seed;
use super::scene::{gen_scene, SceneSpec};
use crate::error::{Error, Result};
use crate::slc::io::{read_slc, write_slc};
use crate::slc::{PhasePolynomial, SlcImage, NUM_COEFFS};

pub const MANIFEST_FILE: &str = "manifest.csv";

const STREAM_SCENE: u64 = 0;
const STREAM_CORRUPTION: u64 = 1;

const HEADER: [&str; 15] = [
    "id", "split", "gt_path", "corrupt_path", "order", "scale_rad", "c2", "c3", "c4", "c5", "c6",
    "c7", "c8", "c9", "c10",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub split: Split,
    pub gt_path: PathBuf,
    pub corrupt_path: PathBuf,
    pub order: usize,
    pub scale_rad: f64,
    pub coeffs: PhasePolynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    /// Directory that record paths are relative to.
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_csv_str(&text, root)
    }

    /// Parses manifest text. Field-level validation only; file existence is
    /// checked by [`DatasetManifest::verify_files`].
    pub fn from_csv_str(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(Error::Manifest(format!(
                "unexpected header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut records = Vec::new();
        for (line, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |what: &str| Error::Manifest(format!("row {}: invalid {what}", line + 1));
            let id = row[0].to_string();
            if id.is_empty() {
                return Err(bad("id"));
            }
            let split: Split = row[1].parse()?;
            let order: usize = row[4].parse().map_err(|_| bad("order"))?;
            if !(2..=10).contains(&order) {
                return Err(bad("order"));
            }
            let scale_rad: f64 = row[5].parse().map_err(|_| bad("scale_rad"))?;
            let mut coeffs = [0.0f64; NUM_COEFFS];
            for (i, c) in coeffs.iter_mut().enumerate() {
                *c = row[6 + i].parse().map_err(|_| bad("coefficient"))?;
            }
            if !scale_rad.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(bad("non-finite value"));
            }
            records.push(ManifestRecord {
                id,
                split,
                gt_path: PathBuf::from(&row[2]),
                corrupt_path: PathBuf::from(&row[3]),
                order,
                scale_rad,
                coeffs: PhasePolynomial::new(coeffs),
            });
        }
        let manifest = Self {
            root: root.into(),
            records,
        };
        manifest.check_unique_ids()?;
        Ok(manifest)
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Manifest(format!("duplicate id `{}`", w[0])));
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(HEADER)?;
        for r in &self.records {
            let mut row = vec![
                r.id.clone(),
                r.split.to_string(),
                path_to_field(&r.gt_path),
                path_to_field(&r.corrupt_path),
                r.order.to_string(),
                r.scale_rad.to_string(),
            ];
            row.extend(r.coeffs.coeffs().iter().map(f64::to_string));
            writer.write_record(&row)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Manifest(format!("flushing manifest: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn load_ground_truth(&self, record: &ManifestRecord) -> Result<SlcImage> {
        read_slc(self.resolve(&record.gt_path))
    }

    pub fn load_corrupted(&self, record: &ManifestRecord) -> Result<SlcImage> {
        read_slc(self.resolve(&record.corrupt_path))
    }

    /// Every referenced file exists and parses.
    pub fn verify_files(&self) -> Result<()> {
        for r in &self.records {
            self.load_ground_truth(r)?;
            self.load_corrupted(r)?;
        }
        Ok(())
    }
}

fn path_to_field(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub base_seed: u64,
    pub size: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train: 120,
            val: 120,
            test: 264,
            base_seed: 0,
            size: 256,
        }
    }
}

impl DatasetConfig {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Split and within-split index of global record `index`.
    pub fn locate(&self, index: usize) -> (Split, usize) {
        if index < self.train {
            (Split::Train, index)
        } else if index < self.train + self.val {
            (Split::Val, index - self.train)
        } else {
            (Split::Test, index - self.train - self.val)
        }
    }
}

/// One generated ground-truth / corrupted pair, held in memory at full precision.
#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub id: String,
    pub split: Split,
    pub scene: SceneSpec,
    pub ground_truth: SlcImage,
    pub corruption: CorruptionSpec,
    pub corrupted: SlcImage,
}

/// Generates record `index` of the dataset described by `cfg`.
pub fn synthesize_pair(cfg: &DatasetConfig, index: usize) -> Result<SyntheticPair> {
    let (split, local) = cfg.locate(index);
    let scene = SceneSpec::random(cfg.size, derive_seed(cfg.base_seed, index as u64, STREAM_SCENE));
    let ground_truth = gen_scene(&scene)?;
    let corruption = sample_corruption(
        cfg.size,
        derive_seed(cfg.base_seed, index as u64, STREAM_CORRUPTION),
    );
    let corrupted = corrupt(&ground_truth, &corruption.realized)?;
    Ok(SyntheticPair {
        id: format!("{split}-{local:04}"),
        split,
        scene,
        ground_truth,
        corruption,
        corrupted,
    })
}

/// Writes `gt/<id>.slc`, `corrupt/<id>.slc` and `manifest.csv` under `out_dir`.
/// Each image is corrupted exactly once.
pub fn build_dataset(cfg: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    if cfg.train == 0 || cfg.val == 0 || cfg.test == 0 {
        return Err(Error::InvalidParameter("every split needs at least one image".into()));
    }
    let out_dir = out_dir.as_ref();
    for sub in ["gt", "corrupt"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let records = (0..cfg.total())
        .into_par_iter()
        .map(|index| {
            let pair = synthesize_pair(cfg, index)?;
            let gt_path = PathBuf::from("gt").join(format!("{}.slc", pair.id));
            let corrupt_path = PathBuf::from("corrupt").join(format!("{}.slc", pair.id));
            write_slc(&pair.ground_truth, out_dir.join(&gt_path))?;
            write_slc(&pair.corrupted, out_dir.join(&corrupt_path))?;
            Ok(ManifestRecord {
                id: pair.id,
                split: pair.split,
                gt_path,
                corrupt_path,
                order: pair.corruption.order,
                scale_rad: pair.corruption.scale,
                coeffs: pair.corruption.realized,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        records,
    };
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
