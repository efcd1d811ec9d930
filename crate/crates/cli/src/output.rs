//! `results.csv` and `summary.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use jdr_core::eval::SpectralMatrix;
use jdr_core::rng::{derive_index, derive_seed};
use jdr_core::spectral::EigenOrdering;

use crate::bootstrap::{bootstrap_mean_ci, DEFAULT_RESAMPLES};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::runner::{ResultRecord, RunOutcome};

pub const CSV_HEADER: &str = "experiment,seed,condition,metric,value,wall_ms";
pub const CONFIDENCE: f64 = 0.95;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn results_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.experiment),
            r.seed,
            r.condition.label(),
            csv_field(&r.metric),
            r.value,
            r.wall_ms
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Group {
    pub experiment: String,
    pub condition: &'static str,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Settings {
    alignment_l: Option<usize>,
    clusters: Option<usize>,
    sc_matrix: &'static str,
    sc_ordering: &'static str,
    sc_skip_first_raw: bool,
    sc_skip_first_jdr: bool,
    sc_after_jdr_on: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct Summary {
    experiment: String,
    kind: &'static str,
    root_seed: u64,
    n_seeds: usize,
    bootstrap_resamples: usize,
    confidence: f64,
    settings: Settings,
    groups: Vec<Group>,
    failures: Vec<String>,
}

/// Mean and bootstrap interval per (experiment, condition, metric), in
/// order of first appearance.
pub fn summarize(records: &[ResultRecord], root_seed: u64) -> Vec<Group> {
    let mut keys: Vec<(&str, &'static str, &str)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in records {
        let key = (r.experiment.as_str(), r.condition.label(), r.metric.as_str());
        match keys.iter().position(|k| *k == key) {
            Some(i) => values[i].push(r.value),
            None => {
                keys.push(key);
                values.push(vec![r.value]);
            }
        }
    }
    let base = derive_seed(root_seed, "bootstrap");
    keys.iter()
        .zip(&values)
        .enumerate()
        .map(|(i, ((e, c, m), v))| {
            let ci = bootstrap_mean_ci(v, DEFAULT_RESAMPLES, CONFIDENCE, derive_index(base, i as u64))
                .expect("groups are nonempty");
            Group {
                experiment: e.to_string(),
                condition: c,
                metric: m.to_string(),
                n: ci.n,
                mean: ci.mean,
                ci_low: ci.ci_low,
                ci_high: ci.ci_high,
            }
        })
        .collect()
}

pub fn summary_json(cfg: &ExperimentConfig, outcome: &RunOutcome) -> String {
    let ev = &cfg.eval;
    let s = Summary {
        experiment: cfg.id.clone(),
        kind: cfg.kind.name(),
        root_seed: cfg.seed,
        n_seeds: cfg.n_seeds,
        bootstrap_resamples: DEFAULT_RESAMPLES,
        confidence: CONFIDENCE,
        settings: Settings {
            alignment_l: ev.l,
            clusters: ev.k,
            sc_matrix: match ev.matrix {
                SpectralMatrix::Adjacency => "adjacency",
                SpectralMatrix::NegLaplacian => "neg_laplacian",
            },
            sc_ordering: match ev.ordering {
                EigenOrdering::ByValueDesc => "by_value",
                EigenOrdering::ByAbsDesc => "by_abs",
            },
            sc_skip_first_raw: ev.skip_first_raw,
            sc_skip_first_jdr: ev.skip_first_jdr,
            sc_after_jdr_on: "rewired operator before top-k sparsification",
        },
        groups: summarize(&outcome.records, cfg.seed),
        failures: outcome
            .failures
            .iter()
            .map(|(e, s, err)| format!("{e} seed {s}: {err}"))
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&s).expect("summary serializes");
    text.push('\n');
    text
}

pub fn write_outputs(cfg: &ExperimentConfig, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let csv = dir.join("results.csv");
    fs::write(&csv, results_csv(&outcome.records)).map_err(|e| CliError::io(&csv, e))?;
    let json = dir.join("summary.json");
    fs::write(&json, summary_json(cfg, outcome)).map_err(|e| CliError::io(&json, e))?;
    Ok(())
}
