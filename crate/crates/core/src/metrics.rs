//! Precision/recall, PR-AUC, precision at 100% recall, PCU and boost.
//!
//! Every query window yields one [`Label`]: whether its best reference
//! window falls inside the ground truth of the window's first frame, and the
//! window score used as the acceptance threshold. Sweeping the threshold over
//! the distinct scores gives the PR curve.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::GroundTruth;
use crate::error::{Error, Result};
use crate::matcher::SequenceMatchSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub correct: bool,
    pub score: f64,
}

/// Labels every window of `matches` against the ground truth of its first frame.
pub fn label_matches(matches: &SequenceMatchSet, gt: &GroundTruth) -> Result<Vec<Label>> {
    matches
        .best_ref_window
        .iter()
        .zip(&matches.best_score)
        .enumerate()
        .map(|(i, (&j, &score))| {
            let range = gt
                .get(i)
                .ok_or_else(|| Error::GroundTruth(format!("missing entry for query {i}")))?;
            Ok(Label {
                correct: range.contains(j),
                score,
            })
        })
        .collect()
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn non_empty(labels: &[Label]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labels".into()));
    }
    Ok(())
}

/// Precision and recall when every window scoring at least `threshold` is
/// accepted. An empty denominator counts as 1.
pub fn precision_recall(labels: &[Label], threshold: f64) -> Result<(f64, f64)> {
    non_empty(labels)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for l in labels {
        match (l.score >= threshold, l.correct) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok((ratio(tp, tp + fp), ratio(tp, tp + fn_)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// Descending thresholds, starting with a sentinel above every score.
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

impl PrCurve {
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["threshold", "precision", "recall"])?;
        for p in &self.points {
            wtr.write_record([p.threshold.to_string(), p.precision.to_string(), p.recall.to_string()])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Trapezoidal area under `(recall, precision)` points, with a leading point
/// at recall 0 carrying the first point's precision.
pub fn trapezoid_auc(points: &[PrPoint]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let mut prev = (0.0, first.precision);
    let mut area = 0.0;
    for p in points {
        area += (p.recall - prev.0) * (p.precision + prev.1) / 2.0;
        prev = (p.recall, p.precision);
    }
    area
}

/// Threshold-swept PR curve and its area. A labeling with no correct window
/// has area 0.
pub fn pr_curve(labels: &[Label]) -> Result<PrCurve> {
    non_empty(labels)?;
    let mut sorted: Vec<Label> = labels.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let positives = sorted.iter().filter(|l| l.correct).count();

    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push(PrPoint {
        threshold: sorted[0].score + 1.0,
        precision: 1.0,
        recall: ratio(0, positives),
    });
    let (mut tp, mut accepted) = (0usize, 0usize);
    let mut idx = 0;
    while idx < sorted.len() {
        let threshold = sorted[idx].score;
        while idx < sorted.len() && sorted[idx].score == threshold {
            tp += usize::from(sorted[idx].correct);
            accepted += 1;
            idx += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: ratio(tp, accepted),
            recall: ratio(tp, positives),
        });
    }

    let auc = if positives == 0 { 0.0 } else { trapezoid_auc(&points) };
    Ok(PrCurve { points, auc })
}

/// Precision when every window is accepted.
pub fn p_at_r100(labels: &[Label]) -> Result<f64> {
    non_empty(labels)?;
    let correct = labels.iter().filter(|l| l.correct).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Inputs to the performance-per-compute-unit score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcuInputs {
    p_r100: f64,
    t_e: f64,
    t_e_max: f64,
}

impl PcuInputs {
    pub fn new(p_r100: f64, t_e: f64, t_e_max: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_r100) {
            return Err(Error::InvalidArgument(format!("P_R100 must lie in [0, 1], got {p_r100}")));
        }
        if !(t_e > 0.0 && t_e.is_finite()) {
            return Err(Error::InvalidArgument(format!("encoding time must be > 0, got {t_e}")));
        }
        if !(t_e_max >= t_e && t_e_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "max encoding time {t_e_max} must be >= encoding time {t_e}"
            )));
        }
        Ok(Self { p_r100, t_e, t_e_max })
    }
}

/// `P_R100 * log10(t_e_max / t_e + 9)`. Equals `P_R100` for the slowest technique.
pub fn pcu(inputs: &PcuInputs) -> f64 {
    inputs.p_r100 * pcu_multiplier(inputs.t_e, inputs.t_e_max)
}

pub fn pcu_multiplier(t_e: f64, t_e_max: f64) -> f64 {
    (t_e_max / t_e + 9.0).log10()
}

/// How encoding cost scales with sequence length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostModel {
    /// Every window re-encodes its `k` frames: `t_e * k`.
    #[default]
    Naive,
    /// Frame descriptors are cached across overlapping windows: `t_e`.
    Cached,
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostModel::Naive => "naive",
            CostModel::Cached => "cached",
        })
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(CostModel::Naive),
            "cached" => Ok(CostModel::Cached),
            other => Err(Error::InvalidArgument(format!("unknown cost model {other:?} (naive|cached)"))),
        }
    }
}

pub fn sequence_cost_model(t_e: f64, k: usize, model: CostModel) -> f64 {
    match model {
        CostModel::Naive => t_e * k as f64,
        CostModel::Cached => t_e,
    }
}

/// Relative AUC change in percent; `None` when the baseline AUC is 0.
pub fn boost_pct(auc_seq: f64, auc_single: f64) -> Option<f64> {
    if auc_single > 0.0 {
        Some(100.0 * (auc_seq - auc_single) / auc_single)
    } else {
        None
    }
}

/// Metrics for one (technique, dataset, k) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub technique_name: String,
    pub dataset_name: String,
    pub k: usize,
    pub num_windows: usize,
    pub pr_curve: PrCurve,
    pub auc: f64,
    pub p_r100: f64,
    /// `None` when the technique has no positive encoding time.
    pub pcu: Option<f64>,
    pub encode_time_model: CostModel,
    /// Relative to the same technique and dataset at `k = 1`; `None` when
    /// that baseline AUC is 0.
    pub boost_pct_vs_k1: Option<f64>,
}
