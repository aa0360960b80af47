use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GroundTruthSpec, TechniqueConfig, TechniqueKind};
use crate::dataset::{aligned_ground_truth, load_ground_truth, load_image_set, ImageSet, DEFAULT_EXTENSIONS};
use crate::descriptor::{encode_set, import_descriptors, DescriptorSet};
use crate::error::{Error, Result};
use crate::matcher::{build_similarity_matrix, match_sequences};
use crate::metrics::{
    boost_pct, label_matches, p_at_r100, pcu, pr_curve, sequence_cost_model, CostModel, MetricsReport, PcuInputs,
    PrCurve,
};

/// A (technique, dataset, k) cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub dataset_name: String,
    pub technique_name: String,
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeSource {
    Measured,
    Manifest,
    Override,
}

impl std::fmt::Display for TimeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TimeSource::Measured => "measured",
            TimeSource::Manifest => "manifest",
            TimeSource::Override => "override",
        })
    }
}

/// Wall-clock figures for one (technique, dataset) pair. Kept apart from the
/// metrics so that the summary stays reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub dataset_name: String,
    pub technique_name: String,
    pub encode_time_per_frame_sec: f64,
    pub time_source: TimeSource,
    pub descriptor_sec: f64,
    pub similarity_sec: f64,
    pub matching_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub seed: u64,
    pub cost_model: CostModel,
    pub k_values: Vec<usize>,
    pub reports: Vec<MetricsReport>,
    pub skipped: Vec<SkippedCell>,
    pub timings: Vec<TimingRecord>,
}

struct CellMetrics {
    k: usize,
    num_windows: usize,
    pr_curve: PrCurve,
    p_r100: f64,
}

struct PairOutcome {
    dataset: usize,
    technique: usize,
    encode_time: f64,
    cells: Vec<CellMetrics>,
    skipped: Vec<SkippedCell>,
    timing: TimingRecord,
}

fn descriptors_for(
    technique: &TechniqueConfig,
    dataset_name: &str,
    images: Option<&(ImageSet, ImageSet)>,
) -> Result<(DescriptorSet, DescriptorSet, TimeSource)> {
    match &technique.kind {
        TechniqueKind::Hog {
            params,
            encode_time_per_frame_sec,
        } => {
            let (q_img, r_img) = images.ok_or_else(|| {
                Error::Config(format!("dataset {dataset_name:?} has no images for {:?}", technique.name))
            })?;
            let q = encode_set(q_img, params)?;
            let r = encode_set(r_img, params)?;
            let (time, source) = match encode_time_per_frame_sec {
                Some(t) => (*t, TimeSource::Override),
                None => {
                    let frames = (q.len() + r.len()) as f64;
                    let total = q.encode_time_per_frame() * q.len() as f64
                        + r.encode_time_per_frame() * r.len() as f64;
                    (total / frames, TimeSource::Measured)
                }
            };
            Ok((
                q.with_encode_time(time)?.with_technique_name(&technique.name),
                r.with_encode_time(time)?.with_technique_name(&technique.name),
                source,
            ))
        }
        TechniqueKind::Import { manifest, .. } => {
            let (qp, rp) = technique.import_paths(dataset_name).expect("import technique");
            let q = import_descriptors(&qp, manifest)?.with_technique_name(&technique.name);
            let r = import_descriptors(&rp, manifest)?.with_technique_name(&technique.name);
            Ok((q, r, TimeSource::Manifest))
        }
    }
}

fn evaluate_pair(
    config: &ExperimentConfig,
    dataset: usize,
    technique: usize,
    images: Option<&(ImageSet, ImageSet)>,
) -> Result<PairOutcome> {
    let d = &config.datasets[dataset];
    let t = &config.techniques[technique];

    let start = Instant::now();
    let (queries, refs, time_source) = descriptors_for(t, &d.name, images)?;
    let descriptor_sec = start.elapsed().as_secs_f64();
    let (num_q, num_r) = (queries.len(), refs.len());

    let gt = match &d.gt {
        GroundTruthSpec::Aligned(tol) => aligned_ground_truth(num_q, num_r, *tol)?,
        GroundTruthSpec::Csv(path) => load_ground_truth(path, num_q, num_r)?,
    };

    let start = Instant::now();
    let sim = build_similarity_matrix(&queries, &refs)?;
    let similarity_sec = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &k in &config.k_values {
        let limit = num_q.min(num_r);
        if k > limit {
            let reason = format!("k = {k} exceeds min(queries, references) = {limit}");
            warn!("skipping {} / {}: {reason}", d.name, t.name);
            skipped.push(SkippedCell {
                dataset_name: d.name.clone(),
                technique_name: t.name.clone(),
                k,
                reason,
            });
            continue;
        }
        let matches = match_sequences(&sim, k)?;
        let labels = label_matches(&matches, &gt)?;
        cells.push(CellMetrics {
            k,
            num_windows: matches.num_windows(),
            pr_curve: pr_curve(&labels)?,
            p_r100: p_at_r100(&labels)?,
        });
    }
    let matching_sec = start.elapsed().as_secs_f64();

    let encode_time = queries.encode_time_per_frame();
    Ok(PairOutcome {
        dataset,
        technique,
        encode_time,
        cells,
        skipped,
        timing: TimingRecord {
            dataset_name: d.name.clone(),
            technique_name: t.name.clone(),
            encode_time_per_frame_sec: encode_time,
            time_source,
            descriptor_sec,
            similarity_sec,
            matching_sec,
        },
    })
}

/// Runs every (technique, dataset, k) cell of the sweep. Descriptors and the
/// similarity matrix are computed once per (technique, dataset) pair and
/// shared by all sequence lengths. Cells whose `k` exceeds the traverse
/// length are reported as skipped. Output order follows the config:
/// dataset, then technique, then ascending `k`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    let mut config = config.clone();
    config.validate()?;

    let needs_images = config
        .techniques
        .iter()
        .any(|t| matches!(t.kind, TechniqueKind::Hog { .. }));

    let mut outcomes = Vec::new();
    for (di, d) in config.datasets.iter().enumerate() {
        let images = if needs_images {
            let q = load_image_set(d.query_dir.as_deref().expect("validated"), DEFAULT_EXTENSIONS)?;
            let r = load_image_set(d.ref_dir.as_deref().expect("validated"), DEFAULT_EXTENSIONS)?;
            info!("{}: {} query / {} reference frames", d.name, q.len(), r.len());
            Some((q, r))
        } else {
            None
        };
        let pairs = (0..config.techniques.len())
            .into_par_iter()
            .map(|ti| evaluate_pair(&config, di, ti, images.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        outcomes.extend(pairs);
    }
    outcomes.sort_by_key(|o| (o.dataset, o.technique));

    Ok(assemble(&config, outcomes))
}

fn assemble(config: &ExperimentConfig, outcomes: Vec<PairOutcome>) -> ExperimentResults {
    // slowest effective per-frame cost over all evaluated cells of a dataset
    let mut t_e_max: BTreeMap<usize, f64> = BTreeMap::new();
    for o in &outcomes {
        for c in &o.cells {
            let cost = sequence_cost_model(o.encode_time, c.k, config.cost_model);
            let slot = t_e_max.entry(o.dataset).or_insert(0.0);
            *slot = slot.max(cost);
        }
    }

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let mut timings = Vec::new();
    for o in outcomes {
        let baseline = o.cells.iter().find(|c| c.k == 1).map(|c| c.pr_curve.auc);
        let max_cost = t_e_max.get(&o.dataset).copied().unwrap_or(0.0);
        for c in o.cells {
            let cost = sequence_cost_model(o.encode_time, c.k, config.cost_model);
            let pcu_value = PcuInputs::new(c.p_r100, cost, max_cost).ok().map(|inputs| pcu(&inputs));
            let boost = if c.k == 1 {
                Some(0.0)
            } else {
                baseline.and_then(|b| boost_pct(c.pr_curve.auc, b))
            };
            reports.push(MetricsReport {
                technique_name: config.techniques[o.technique].name.clone(),
                dataset_name: config.datasets[o.dataset].name.clone(),
                k: c.k,
                num_windows: c.num_windows,
                auc: c.pr_curve.auc,
                pr_curve: c.pr_curve,
                p_r100: c.p_r100,
                pcu: pcu_value,
                encode_time_model: config.cost_model,
                boost_pct_vs_k1: boost,
            });
        }
        skipped.extend(o.skipped);
        timings.push(o.timing);
    }

    ExperimentResults {
        seed: config.seed,
        cost_model: config.cost_model,
        k_values: config.k_values.clone(),
        reports,
        skipped,
        timings,
    }
}
