use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::plot::{Chart, Series};
use super::run::{ExperimentResults, SkippedCell};
use crate::error::{Error, Result};
use crate::metrics::{CostModel, MetricsReport};

pub const SUMMARY_CSV_HEADER: [&str; 8] = ["dataset", "technique", "k", "auc", "p_r100", "pcu", "boost_pct", "cost_model"];

const BOOST_DEFINITION: &str = "boost_pct = 100 * (auc_k - auc_k1) / auc_k1 (relative percent, n/a when auc_k1 = 0)";
const PCU_DEFINITION: &str =
    "pcu = p_r100 * log10(t_e_max / t_e + 9), t_e per the cost model, t_e_max the largest t_e over the dataset's cells";

#[derive(Serialize)]
struct Summary<'a> {
    seed: u64,
    cost_model: CostModel,
    k_values: &'a [usize],
    boost_definition: &'a str,
    pcu_definition: &'a str,
    reports: &'a [MetricsReport],
    skipped: &'a [SkippedCell],
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

/// Replaces anything outside `[A-Za-z0-9_-]` so names can be used in file names.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn summary_csv(reports: &[MetricsReport]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(SUMMARY_CSV_HEADER)?;
    for r in reports {
        wtr.write_record([
            r.dataset_name.clone(),
            r.technique_name.clone(),
            r.k.to_string(),
            r.auc.to_string(),
            r.p_r100.to_string(),
            opt(r.pcu),
            opt(r.boost_pct_vs_k1),
            r.encode_time_model.to_string(),
        ])?;
    }
    finish(wtr)
}

pub fn timings_csv(results: &ExperimentResults) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "dataset",
        "technique",
        "encode_time_per_frame_sec",
        "time_source",
        "descriptor_sec",
        "similarity_sec",
        "matching_sec",
    ])?;
    for t in &results.timings {
        wtr.write_record([
            t.dataset_name.clone(),
            t.technique_name.clone(),
            t.encode_time_per_frame_sec.to_string(),
            t.time_source.to_string(),
            t.descriptor_sec.to_string(),
            t.similarity_sec.to_string(),
            t.matching_sec.to_string(),
        ])?;
    }
    finish(wtr)
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn datasets_in_order(reports: &[MetricsReport]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in reports {
        if !out.contains(&r.dataset_name.as_str()) {
            out.push(&r.dataset_name);
        }
    }
    out
}

fn techniques_for<'a>(reports: &'a [MetricsReport], dataset: &str) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for r in reports.iter().filter(|r| r.dataset_name == dataset) {
        if !out.contains(&r.technique_name.as_str()) {
            out.push(&r.technique_name);
        }
    }
    out
}

fn rows_for<'a>(
    reports: &'a [MetricsReport],
    dataset: &'a str,
    technique: &'a str,
) -> impl Iterator<Item = &'a MetricsReport> + 'a {
    reports
        .iter()
        .filter(move |r| r.dataset_name == dataset && r.technique_name == technique)
}

/// The three per-dataset charts: boost vs k, single-frame vs sequence AUC,
/// and PCU vs k.
pub fn dataset_charts<'a>(reports: &'a [MetricsReport], dataset: &'a str) -> [Chart; 3] {
    let techniques = techniques_for(reports, dataset);
    let rows = |t: &'a str| rows_for(reports, dataset, t);

    let boost = techniques
        .iter()
        .map(|&t| Series {
            name: t.to_string(),
            points: rows(t)
                .filter(|r| r.k > 1)
                .filter_map(|r| r.boost_pct_vs_k1.map(|b| (r.k as f64, b, r.k)))
                .collect(),
        })
        .collect();

    let auc = techniques
        .iter()
        .map(|&t| {
            let single = rows(t).find(|r| r.k == 1).map(|r| r.auc);
            Series {
                name: t.to_string(),
                points: single
                    .map(|s| rows(t).filter(|r| r.k > 1).map(|r| (s, r.auc, r.k)).collect())
                    .unwrap_or_default(),
            }
        })
        .collect();

    let pcu = techniques
        .iter()
        .map(|&t| Series {
            name: t.to_string(),
            points: rows(t).filter_map(|r| r.pcu.map(|p| (r.k as f64, p, r.k))).collect(),
        })
        .collect();

    let cost = reports
        .iter()
        .find(|r| r.dataset_name == dataset)
        .map(|r| r.encode_time_model)
        .unwrap_or_default();

    [
        Chart {
            title: format!("{dataset}: AUC boost vs single frame"),
            x_label: "sequence length k".into(),
            y_label: "boost (%)".into(),
            series: boost,
            identity_line: false,
            y_from_zero: true,
        },
        Chart {
            title: format!("{dataset}: single-frame vs sequence AUC"),
            x_label: "single-frame AUC".into(),
            y_label: "sequence AUC (k >= 2)".into(),
            series: auc,
            identity_line: true,
            y_from_zero: false,
        },
        Chart {
            title: format!("{dataset}: PCU vs k ({cost} cost)"),
            x_label: "sequence length k".into(),
            y_label: "PCU".into(),
            series: pcu,
            identity_line: false,
            y_from_zero: true,
        },
    ]
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes `summary.json`, `summary.csv`, `timings.csv`, one PR-curve CSV per
/// report under `pr/`, and three SVG charts per dataset under `plots/`.
/// Returns the written paths.
pub fn emit_reports(results: &ExperimentResults, output_dir: &Path) -> Result<Vec<PathBuf>> {
    let reports = &results.reports;
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to emit".into()));
    }
    let pr_dir = output_dir.join("pr");
    let plot_dir = output_dir.join("plots");
    for dir in [output_dir, &pr_dir, &plot_dir] {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut written = Vec::new();
    let summary = Summary {
        seed: results.seed,
        cost_model: results.cost_model,
        k_values: &results.k_values,
        boost_definition: BOOST_DEFINITION,
        pcu_definition: PCU_DEFINITION,
        reports,
        skipped: &results.skipped,
    };
    write(output_dir.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"), &mut written)?;
    write(output_dir.join("summary.csv"), &summary_csv(reports)?, &mut written)?;
    write(output_dir.join("timings.csv"), &timings_csv(results)?, &mut written)?;

    for r in reports {
        let name = format!(
            "{}__{}__k{}.csv",
            file_stem(&r.dataset_name),
            file_stem(&r.technique_name),
            r.k
        );
        write(pr_dir.join(name), &r.pr_curve.to_csv()?, &mut written)?;
    }

    for dataset in datasets_in_order(reports) {
        let stem = file_stem(dataset);
        let [boost, auc, pcu] = dataset_charts(reports, dataset);
        write(plot_dir.join(format!("{stem}_boost.svg")), &boost.render(), &mut written)?;
        write(plot_dir.join(format!("{stem}_auc.svg")), &auc.render(), &mut written)?;
        write(plot_dir.join(format!("{stem}_pcu.svg")), &pcu.render(), &mut written)?;
    }
    Ok(written)
}
