//! Executes an [`ExperimentConfig`] over seeds and collects result rows.

use std::time::Instant;

use rayon::prelude::*;

use jdr_core::alignment::dataset_alignment;
use jdr_core::csbm::{sample_csbm, CsbmParams};
use jdr_core::diffusion::{ppr_diffuse, DiglConfig};
use jdr_core::eval::{
    check_prop1, ridge_denoise_sweep, spectral_cluster, spectral_cluster_operator, ClusterOptions, Prop1Side, RidgeSide,
};
use jdr_core::graph::{edge_homophily, load_dataset, Dataset, LabelVector};
use jdr_core::jdr::{jdr_iterate, update_a, JdrConfig};
use jdr_core::rng::derive_seed;
use jdr_core::spectral::SolverOptions;

use crate::config::{Condition, DatasetSource, ExperimentConfig, Metric};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub seed: u64,
    pub condition: Condition,
    pub metric: String,
    pub value: f64,
    pub wall_ms: u64,
}

/// Rows from every seed that finished, plus the failures of the rest.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<(String, u64, CliError)>,
}

/// One seed of one experiment variant.
struct Unit {
    experiment: String,
    seed: u64,
    task: Task,
}

enum Task {
    Csbm(f64),
    Loaded,
    Prop1(Prop1Side),
    Ridge(RidgeSide),
}

fn fmt_phi(phi: f64) -> String {
    if phi == 0.0 {
        "0".to_string()
    } else {
        phi.to_string()
    }
}

fn units(cfg: &ExperimentConfig) -> Vec<Unit> {
    let seeds: Vec<u64> = (0..cfg.n_seeds as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let mut out = Vec::new();
    let mut push = |experiment: String, task: &dyn Fn() -> Task| {
        for &seed in &seeds {
            out.push(Unit {
                experiment: experiment.clone(),
                seed,
                task: task(),
            });
        }
    };
    match (&cfg.dataset, &cfg.prop1, &cfg.ridge) {
        (Some(DatasetSource::Csbm(c)), _, _) => {
            for &phi in &c.phis {
                push(format!("{}[phi={}]", cfg.id, fmt_phi(phi)), &|| Task::Csbm(phi));
            }
        }
        (Some(DatasetSource::Path(_)), _, _) => push(cfg.id.clone(), &|| Task::Loaded),
        (None, Some(p), _) => {
            for &side in &p.sides {
                let name = match side {
                    Prop1Side::Graph => "graph",
                    Prop1Side::Features => "features",
                };
                push(format!("{}[side={name}]", cfg.id), &|| Task::Prop1(side));
            }
        }
        (None, None, Some(r)) => {
            for &side in &r.sides {
                let name = match side {
                    RidgeSide::A => "A",
                    RidgeSide::X => "X",
                };
                push(format!("{}[side={name}]", cfg.id), &|| Task::Ridge(side));
            }
        }
        (None, None, None) => {}
    }
    out
}

type Values = Vec<(Condition, String, f64)>;

/// Run every seed. Per-seed failures are collected, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let loaded = match &cfg.dataset {
        Some(DatasetSource::Path(p)) => {
            let mut d = load_dataset(p)?;
            d.graph = d.graph.to_undirected();
            Some(d)
        }
        _ => None,
    };
    let units = units(cfg);
    let results: Vec<(Result<Values>, u64)> = units
        .par_iter()
        .map(|u| {
            let t = Instant::now();
            let r = run_unit(cfg, u, loaded.as_ref());
            (r, t.elapsed().as_millis() as u64)
        })
        .collect();

    let mut out = RunOutcome::default();
    for (u, (r, ms)) in units.iter().zip(results) {
        match r {
            Ok(values) => {
                for (condition, metric, value) in values {
                    if !value.is_finite() {
                        out.failures.push((
                            u.experiment.clone(),
                            u.seed,
                            CliError::Core(jdr_core::Error::InvalidParameter(format!("{metric} is not finite"))),
                        ));
                        continue;
                    }
                    out.records.push(ResultRecord {
                        experiment: u.experiment.clone(),
                        seed: u.seed,
                        condition,
                        metric,
                        value,
                        wall_ms: if cfg.wall_time { ms } else { 0 },
                    });
                }
            }
            Err(e) => out.failures.push((u.experiment.clone(), u.seed, e)),
        }
    }
    Ok(out)
}

fn run_unit(cfg: &ExperimentConfig, u: &Unit, loaded: Option<&Dataset>) -> Result<Values> {
    let dataset_seed = derive_seed(u.seed, "dataset");
    match &u.task {
        Task::Csbm(phi) => {
            let Some(DatasetSource::Csbm(c)) = &cfg.dataset else {
                unreachable!("cSBM units come from a cSBM source")
            };
            let p = CsbmParams::from_phi(c.n, c.f, c.d, *phi, c.epsilon, dataset_seed)?;
            let d = sample_csbm(&p)?;
            graph_metrics(cfg, &d, cfg.jdr_for(Some(*phi))?, cfg.digl_for(Some(*phi))?, u.seed)
        }
        Task::Loaded => graph_metrics(
            cfg,
            loaded.expect("loaded dataset"),
            cfg.jdr_for(None)?,
            cfg.digl_for(None)?,
            u.seed,
        ),
        Task::Prop1(side) => {
            let p = cfg.prop1.as_ref().expect("prop1 settings");
            let r = check_prop1(p.n, p.f, p.lambda, p.mu, p.eta, *side, p.trials, dataset_seed)?;
            Ok(vec![
                (Condition::Jdr, "fraction_improved".into(), r.fraction_improved),
                (Condition::None, "mean_overlap_before".into(), r.mean_overlap_before),
                (Condition::Jdr, "mean_overlap_after".into(), r.mean_overlap_after),
            ])
        }
        Task::Ridge(side) => {
            let r = cfg.ridge.as_ref().expect("ridge settings");
            let rep = ridge_denoise_sweep(&r.params, *side, &r.grid, r.trials, r.r, dataset_seed)?;
            Ok(rep
                .points
                .iter()
                .map(|p| {
                    let c = if p.eta == 0.0 { Condition::None } else { Condition::Jdr };
                    (c, format!("mse_eta={}", p.eta), p.mean_mse)
                })
                .collect())
        }
    }
}

fn labels_of<'a>(d: &'a Dataset, m: Metric) -> Result<&'a LabelVector> {
    d.labels
        .as_ref()
        .ok_or_else(|| CliError::config("eval.metrics", format!("{} needs node labels", m.name())))
}

fn graph_metrics(
    cfg: &ExperimentConfig,
    d: &Dataset,
    jdr: Option<JdrConfig>,
    digl: Option<DiglConfig>,
    seed: u64,
) -> Result<Values> {
    let ev = &cfg.eval;
    let solver = SolverOptions::default().with_seed(derive_seed(seed, "solver"));
    let classes = d.n_classes();
    let l =
        ev.l.or(classes)
            .ok_or_else(|| CliError::config("eval.L", "unlabeled dataset; set eval.L"))?;
    let k = ev.k.or(classes).unwrap_or(2);
    let cluster = |skip_first: bool| ClusterOptions {
        k,
        skip_first,
        ordering: ev.ordering,
        matrix: ev.matrix,
        seed: derive_seed(seed, "kmeans"),
        solver: solver.clone(),
    };

    let iterate = match jdr {
        Some(mut c) if ev.metrics.iter().any(|m| m.condition() == Condition::Jdr) => {
            c.solver = c.solver.with_seed(derive_seed(seed, "solver"));
            c.trace_l = Some(l);
            Some((jdr_iterate(d, &c)?, c))
        }
        _ => None,
    };
    let diffused = match digl {
        Some(c) if ev.metrics.iter().any(|m| m.condition() == Condition::Digl) => Some(ppr_diffuse(&d.graph, &c)?),
        _ => None,
    };

    let mut out = Vec::new();
    for &m in &ev.metrics {
        let value = match m {
            Metric::AlignmentBefore => match &iterate {
                Some((it, _)) => Some(it.alignment_trace[0]),
                None => Some(dataset_alignment(d, l, ev.ordering, &solver)?.value),
            },
            Metric::AlignmentAfter => iterate
                .as_ref()
                .map(|(it, _)| *it.alignment_trace.last().expect("trace")),
            Metric::ScAccuracyBefore => {
                Some(spectral_cluster(&d.graph, labels_of(d, m)?, &cluster(ev.skip_first_raw))?.accuracy)
            }
            Metric::ScAccuracy => match &iterate {
                Some((it, _)) => Some(
                    spectral_cluster_operator(&it.adjacency, labels_of(d, m)?, &cluster(ev.skip_first_jdr))?.accuracy,
                ),
                None => None,
            },
            Metric::HomophilyBefore => Some(edge_homophily(&d.graph, labels_of(d, m)?)?),
            Metric::HomophilyAfter => match &iterate {
                Some((it, c)) => Some(edge_homophily(
                    &update_a(&it.adjacency, c.top_k, c.block_size),
                    labels_of(d, m)?,
                )?),
                None => None,
            },
            // An identity kernel leaves no edges; those metrics are undefined
            // and the rows are omitted.
            Metric::AlignmentDigl | Metric::ScAccuracyDigl | Metric::HomophilyDigl => match &diffused {
                Some(o) if !o.identity_kernel => {
                    let g = &o.graph;
                    Some(match m {
                        Metric::AlignmentDigl => {
                            let dd = Dataset::new(d.name.clone(), g.clone(), d.features.clone(), d.labels.clone())?;
                            dataset_alignment(&dd, l, ev.ordering, &solver)?.value
                        }
                        Metric::ScAccuracyDigl => {
                            spectral_cluster(g, labels_of(d, m)?, &cluster(ev.skip_first_raw))?.accuracy
                        }
                        _ => edge_homophily(g, labels_of(d, m)?)?,
                    })
                }
                _ => None,
            },
        };
        if let Some(v) = value {
            out.push((m.condition(), m.name().to_string(), v));
        }
    }
    Ok(out)
}

/// Run and write `results.csv` / `summary.json` into `out_dir`. Rows from
/// finished seeds are written even when others fail.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &std::path::Path) -> Result<RunOutcome> {
    let outcome = run_experiment(cfg)?;
    crate::output::write_outputs(cfg, &outcome, out_dir)?;
    if let Some((exp, seed, e)) = outcome.failures.first() {
        return Err(CliError::Partial {
            failed: outcome.failures.len(),
            total: units(cfg).len(),
            first: format!("{exp} seed {seed}: {e}"),
        });
    }
    Ok(outcome)
}
