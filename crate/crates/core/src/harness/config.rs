use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descriptor::HogParams;
use crate::error::{Error, Result};
use crate::metrics::CostModel;

/// Sequence lengths swept in the published figures, plus the `k = 1` baseline.
pub const DEFAULT_K_VALUES: &[usize] = &[1, 2, 5, 10, 15];
pub const FULL_K_MAX: usize = 15;
pub const DEFAULT_TOLERANCE: usize = 2;

/// Placeholder replaced by the dataset name in imported descriptor paths.
pub const DATASET_PLACEHOLDER: &str = "{dataset}";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KSweep {
    /// 1, 2, 5, 10, 15
    Standard,
    /// 1 through 15
    Full,
}

impl KSweep {
    pub fn values(self) -> Vec<usize> {
        match self {
            KSweep::Standard => DEFAULT_K_VALUES.to_vec(),
            KSweep::Full => (1..=FULL_K_MAX).collect(),
        }
    }
}

impl std::str::FromStr for KSweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(KSweep::Standard),
            "full" => Ok(KSweep::Full),
            other => Err(Error::InvalidArgument(format!("unknown k sweep {other:?} (paper|full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruthSpec {
    /// Index-aligned traverses with the given frame tolerance.
    Aligned(usize),
    /// `query_index,ref_lo,ref_hi` rows.
    Csv(PathBuf),
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        GroundTruthSpec::Aligned(DEFAULT_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Query traverse images. Required when any technique encodes images.
    #[serde(default)]
    pub query_dir: Option<PathBuf>,
    #[serde(default)]
    pub ref_dir: Option<PathBuf>,
    #[serde(default)]
    pub gt: GroundTruthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TechniqueKind {
    Hog {
        #[serde(default)]
        params: HogParams,
        /// Replaces the measured encoding time, e.g. with a published figure,
        /// so that PCU is reproducible across machines.
        #[serde(default)]
        encode_time_per_frame_sec: Option<f64>,
    },
    Import {
        /// `SVPR1` query descriptors; `{dataset}` expands to the dataset name.
        query: String,
        reference: String,
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: TechniqueKind,
}

impl TechniqueConfig {
    pub fn import_paths(&self, dataset: &str) -> Option<(PathBuf, PathBuf)> {
        match &self.kind {
            TechniqueKind::Import { query, reference, .. } => Some((
                PathBuf::from(query.replace(DATASET_PLACEHOLDER, dataset)),
                PathBuf::from(reference.replace(DATASET_PLACEHOLDER, dataset)),
            )),
            TechniqueKind::Hog { .. } => None,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    pub techniques: Vec<TechniqueConfig>,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub cost_model: CostModel,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_k_values() -> Vec<usize> {
    DEFAULT_K_VALUES.to_vec()
}

/// Sorts, deduplicates and adds the `k = 1` baseline.
pub fn normalize_k_values(values: &[usize]) -> Result<Vec<usize>> {
    if values.contains(&0) {
        return Err(Error::Config("sequence lengths must be >= 1".into()));
    }
    let mut ks = values.to_vec();
    ks.push(1);
    ks.sort_unstable();
    ks.dedup();
    Ok(ks)
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for d in &mut self.datasets {
            for dir in [&mut d.query_dir, &mut d.ref_dir].into_iter().flatten() {
                *dir = resolve(base, dir);
            }
            if let GroundTruthSpec::Csv(p) = &mut d.gt {
                *p = resolve(base, p);
            }
        }
        for t in &mut self.techniques {
            if let TechniqueKind::Import {
                query,
                reference,
                manifest,
            } = &mut t.kind
            {
                *query = resolve(base, Path::new(query.as_str())).to_string_lossy().into_owned();
                *reference = resolve(base, Path::new(reference.as_str())).to_string_lossy().into_owned();
                *manifest = resolve(base, manifest);
            }
        }
        self.output_dir = resolve(base, &self.output_dir);
    }

    /// Replaces every aligned ground-truth tolerance.
    pub fn set_tolerance(&mut self, tolerance: usize) {
        for d in &mut self.datasets {
            if let GroundTruthSpec::Aligned(t) = &mut d.gt {
                *t = tolerance;
            }
        }
    }

    fn uses_images(&self) -> bool {
        self.techniques
            .iter()
            .any(|t| matches!(t.kind, TechniqueKind::Hog { .. }))
    }

    /// Checks structure and that every input path exists, without loading
    /// anything. Normalises `k_values` in place.
    pub fn validate(&mut self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets".into()));
        }
        if self.techniques.is_empty() {
            return Err(Error::Config("no techniques".into()));
        }
        self.k_values = normalize_k_values(&self.k_values)?;
        unique_names(self.datasets.iter().map(|d| d.name.as_str()), "dataset")?;
        unique_names(self.techniques.iter().map(|t| t.name.as_str()), "technique")?;

        let must_exist = |path: &Path, what: &str| -> Result<()> {
            if path.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", path.display())))
            }
        };
        let uses_images = self.uses_images();
        for d in &self.datasets {
            for (dir, what) in [(&d.query_dir, "query_dir"), (&d.ref_dir, "ref_dir")] {
                match dir {
                    Some(p) => must_exist(p, &format!("dataset {:?}: {what}", d.name))?,
                    None if uses_images => {
                        return Err(Error::Config(format!(
                            "dataset {:?}: {what} is required by image-based techniques",
                            d.name
                        )))
                    }
                    None => {}
                }
            }
            if let GroundTruthSpec::Csv(p) = &d.gt {
                must_exist(p, &format!("dataset {:?}: ground truth", d.name))?;
            }
            for t in &self.techniques {
                if let Some((q, r)) = t.import_paths(&d.name) {
                    must_exist(&q, &format!("technique {:?}: query descriptors", t.name))?;
                    must_exist(&r, &format!("technique {:?}: reference descriptors", t.name))?;
                }
            }
        }
        for t in &self.techniques {
            match &t.kind {
                TechniqueKind::Import { manifest, .. } => {
                    must_exist(manifest, &format!("technique {:?}: manifest", t.name))?
                }
                TechniqueKind::Hog {
                    params,
                    encode_time_per_frame_sec,
                } => {
                    params.validate()?;
                    if let Some(s) = encode_time_per_frame_sec {
                        if !(*s >= 0.0 && s.is_finite()) {
                            return Err(Error::Config(format!(
                                "technique {:?}: encode time must be >= 0",
                                t.name
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::Config(format!("duplicate {what} name {n:?}")));
        }
    }
    Ok(())
}
