use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::generate_synthetic;
use crate::descriptor::{export_descriptors, Manifest};
use crate::error::{Error, Result};

use super::config::{DatasetConfig, ExperimentConfig, GroundTruthSpec, TechniqueConfig, TechniqueKind, DEFAULT_K_VALUES};

pub const SYNTH_TECHNIQUE: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub places: usize,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
    pub encode_time_per_frame_sec: f64,
}

/// Writes a synthetic dataset as `query.svpr`, `reference.svpr`,
/// `manifest.json` and `gt.csv`, plus a `config.json` that evaluates it.
pub fn write_synthetic(out_dir: &Path, opts: &SynthOptions) -> Result<Vec<PathBuf>> {
    let data = generate_synthetic(opts.places, opts.dim, opts.sigma, opts.seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let query = out_dir.join("query.svpr");
    let reference = out_dir.join("reference.svpr");
    let manifest = out_dir.join("manifest.json");
    let gt = out_dir.join("gt.csv");
    let config = out_dir.join("config.json");

    export_descriptors(&data.queries, &query)?;
    export_descriptors(&data.references, &reference)?;
    Manifest {
        technique_name: SYNTH_TECHNIQUE.into(),
        encode_time_per_frame_sec: opts.encode_time_per_frame_sec,
    }
    .save(&manifest)?;

    let mut rows = String::from("query_index,ref_lo,ref_hi\n");
    for (i, r) in data.ground_truth.entries().iter().enumerate() {
        rows.push_str(&format!("{i},{},{}\n", r.lo, r.hi));
    }
    fs::write(&gt, rows).map_err(|e| Error::io(&gt, e))?;

    let experiment = ExperimentConfig {
        datasets: vec![DatasetConfig {
            name: SYNTH_TECHNIQUE.into(),
            query_dir: None,
            ref_dir: None,
            gt: GroundTruthSpec::Csv("gt.csv".into()),
        }],
        techniques: vec![TechniqueConfig {
            name: SYNTH_TECHNIQUE.into(),
            kind: TechniqueKind::Import {
                query: "query.svpr".into(),
                reference: "reference.svpr".into(),
                manifest: "manifest.json".into(),
            },
        }],
        k_values: DEFAULT_K_VALUES.to_vec(),
        cost_model: Default::default(),
        output_dir: "results".into(),
        seed: opts.seed,
    };
    let text = serde_json::to_string_pretty(&experiment)? + "\n";
    fs::write(&config, text).map_err(|e| Error::io(&config, e))?;

    Ok(vec![query, reference, manifest, gt, config])
}
