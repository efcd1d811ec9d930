//! Typed experiment configuration on top of [`KeyValues`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use jdr_core::diffusion::DiglConfig;
use jdr_core::eval::{log_eta_grid, Prop1Side, RidgeParams, RidgeSide, SpectralMatrix};
use jdr_core::jdr::JdrConfig;
use jdr_core::spectral::EigenOrdering;

use crate::error::{CliError, Result};
use crate::kv::KeyValues;
use crate::tables::{self, Downstream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    CsbmSweep,
    RealDataset,
    Prop1,
    RidgeSweep,
    AlignmentSweep,
    DiffusionBaseline,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CsbmSweep => "csbm_sweep",
            ExperimentKind::RealDataset => "real_dataset",
            ExperimentKind::Prop1 => "prop1",
            ExperimentKind::RidgeSweep => "ridge_sweep",
            ExperimentKind::AlignmentSweep => "alignment_sweep",
            ExperimentKind::DiffusionBaseline => "diffusion_baseline",
        }
    }

    fn needs_dataset(self) -> bool {
        !matches!(self, ExperimentKind::Prop1 | ExperimentKind::RidgeSweep)
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "csbm_sweep" => ExperimentKind::CsbmSweep,
            "real_dataset" => ExperimentKind::RealDataset,
            "prop1" => ExperimentKind::Prop1,
            "ridge_sweep" => ExperimentKind::RidgeSweep,
            "alignment_sweep" => ExperimentKind::AlignmentSweep,
            "diffusion_baseline" => ExperimentKind::DiffusionBaseline,
            _ => return Err(s.to_string()),
        })
    }
}

/// Which rewiring produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Condition {
    None,
    Jdr,
    Digl,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::None => "none",
            Condition::Jdr => "jdr",
            Condition::Digl => "digl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    AlignmentBefore,
    AlignmentAfter,
    AlignmentDigl,
    ScAccuracyBefore,
    ScAccuracy,
    ScAccuracyDigl,
    HomophilyBefore,
    HomophilyAfter,
    HomophilyDigl,
}

impl Metric {
    const ALL: [Metric; 9] = [
        Metric::AlignmentBefore,
        Metric::AlignmentAfter,
        Metric::AlignmentDigl,
        Metric::ScAccuracyBefore,
        Metric::ScAccuracy,
        Metric::ScAccuracyDigl,
        Metric::HomophilyBefore,
        Metric::HomophilyAfter,
        Metric::HomophilyDigl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::AlignmentBefore => "alignment_before",
            Metric::AlignmentAfter => "alignment_after",
            Metric::AlignmentDigl => "alignment_digl",
            Metric::ScAccuracyBefore => "sc_accuracy_before",
            Metric::ScAccuracy => "sc_accuracy",
            Metric::ScAccuracyDigl => "sc_accuracy_digl",
            Metric::HomophilyBefore => "homophily_before",
            Metric::HomophilyAfter => "homophily_after",
            Metric::HomophilyDigl => "homophily_digl",
        }
    }

    pub fn condition(self) -> Condition {
        match self {
            Metric::AlignmentBefore | Metric::ScAccuracyBefore | Metric::HomophilyBefore => Condition::None,
            Metric::AlignmentAfter | Metric::ScAccuracy | Metric::HomophilyAfter => Condition::Jdr,
            Metric::AlignmentDigl | Metric::ScAccuracyDigl | Metric::HomophilyDigl => Condition::Digl,
        }
    }

    pub fn needs_labels(self) -> bool {
        !matches!(
            self,
            Metric::AlignmentBefore | Metric::AlignmentAfter | Metric::AlignmentDigl
        )
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsbmSource {
    pub n: usize,
    pub f: usize,
    pub d: f64,
    pub epsilon: f64,
    pub phis: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Path(PathBuf),
    Csbm(CsbmSource),
}

#[derive(Debug, Clone, PartialEq)]
pub enum JdrSpec {
    Off,
    Fixed(JdrConfig),
    /// Tabulated row for each swept phi.
    Table5 {
        max_k: Option<usize>,
        top_k: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiglSpec {
    Off,
    Fixed(DiglConfig),
    /// Tabulated alpha for each swept phi.
    Table5,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub metrics: Vec<Metric>,
    /// Alignment dimension; defaults to the number of classes.
    pub l: Option<usize>,
    /// Clusters; defaults to the number of classes.
    pub k: Option<usize>,
    pub skip_first_raw: bool,
    pub skip_first_jdr: bool,
    pub matrix: SpectralMatrix,
    pub ordering: EigenOrdering,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Settings {
    pub n: usize,
    pub f: usize,
    pub lambda: f64,
    pub mu: f64,
    pub eta: f64,
    pub trials: usize,
    pub sides: Vec<Prop1Side>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSettings {
    pub params: RidgeParams,
    pub r: f64,
    pub trials: usize,
    pub sides: Vec<RidgeSide>,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub id: String,
    pub seed: u64,
    pub n_seeds: usize,
    pub dataset: Option<DatasetSource>,
    pub jdr: JdrSpec,
    pub digl: DiglSpec,
    pub eval: EvalSettings,
    pub prop1: Option<Prop1Settings>,
    pub ridge: Option<RidgeSettings>,
    pub output: Option<PathBuf>,
    /// Record measured wall time; off keeps reruns byte-identical.
    pub wall_time: bool,
}

fn parse_ordering(key: &str, s: &str) -> Result<EigenOrdering> {
    match s {
        "by_value" | "value" => Ok(EigenOrdering::ByValueDesc),
        "by_abs" | "abs" => Ok(EigenOrdering::ByAbsDesc),
        _ => Err(CliError::config(
            key,
            format!("unknown ordering {s:?} (by_value or by_abs)"),
        )),
    }
}

fn parse_matrix(key: &str, s: &str) -> Result<SpectralMatrix> {
    match s {
        "adjacency" => Ok(SpectralMatrix::Adjacency),
        "neg_laplacian" | "laplacian" => Ok(SpectralMatrix::NegLaplacian),
        _ => Err(CliError::config(
            key,
            format!("unknown matrix {s:?} (adjacency or laplacian)"),
        )),
    }
}

fn named<T: FromStr>(kv: &KeyValues, key: &str, what: &str) -> Result<Option<Vec<T>>> {
    let Some(raw) = kv.raw(key) else {
        return Ok(None);
    };
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::config(key, format!("unknown {what} {s:?}")))
        })
        .collect::<Result<Vec<T>>>()
        .map(Some)
}

/// Options shared by explicit and replayed JDR configs.
fn jdr_overrides(kv: &KeyValues, cfg: &mut JdrConfig) -> Result<()> {
    if let Some(v) = kv.get("jdr.top_k")? {
        cfg.top_k = v;
    }
    if let Some(s) = kv.raw("jdr.ordering") {
        cfg.ordering = parse_ordering("jdr.ordering", s)?;
    }
    if let Some(v) = kv.get("jdr.binarize")? {
        cfg.binarize_features = v;
    }
    if let Some(v) = kv.get("jdr.gauss_seidel")? {
        cfg.gauss_seidel = v;
    }
    if let Some(v) = kv.get("jdr.tol")? {
        cfg.solver.tol = v;
    }
    if let Some(v) = kv.get::<usize>("jdr.max_K")? {
        cfg.k = cfg.k.min(v);
    }
    cfg.validate().map_err(|e| CliError::config("jdr", e.to_string()))
}

/// Parse the `jdr.*` section. `sweep` allows per-phi replay.
pub fn parse_jdr(kv: &KeyValues, sweep: bool) -> Result<JdrSpec> {
    if kv.get_or("jdr.replay_table5", false)? {
        if !sweep {
            return Err(CliError::config(
                "jdr.replay_table5",
                "per-phi replay needs a cSBM source; use jdr.table5_phi for a single row",
            ));
        }
        let top_k = kv.get("jdr.top_k")?;
        if top_k == Some(0) {
            return Err(CliError::config("jdr.top_k", "must be at least 1"));
        }
        return Ok(JdrSpec::Table5 {
            max_k: kv.get("jdr.max_K")?,
            top_k,
        });
    }
    let mut cfg = if let Some(phi) = kv.get::<f64>("jdr.table5_phi")? {
        tables::replay_table5(phi).map_err(|e| CliError::config("jdr.table5_phi", e.to_string()))?
    } else if let Some(name) = kv.raw("jdr.replay_dataset") {
        let model: Downstream = kv.get_or("jdr.replay_model", Downstream::Gcn)?;
        tables::replay_real(name, model)?
    } else if kv.has_prefix("jdr.") {
        JdrConfig::new(
            kv.require("jdr.K")?,
            kv.require("jdr.L_A")?,
            kv.require("jdr.L_X")?,
            kv.require("jdr.eta_A")?,
            kv.require("jdr.eta_X1")?,
            kv.require("jdr.eta_X2")?,
        )
    } else {
        return Ok(JdrSpec::Off);
    };
    jdr_overrides(kv, &mut cfg)?;
    Ok(JdrSpec::Fixed(cfg))
}

fn parse_digl(kv: &KeyValues, sweep: bool) -> Result<DiglSpec> {
    let mut cfg = match kv.raw("digl.alpha") {
        None => return Ok(DiglSpec::Off),
        Some("table5") if sweep => return Ok(DiglSpec::Table5),
        Some(_) => DiglConfig::new(kv.require("digl.alpha")?),
    };
    if let Some(k) = kv.get("digl.top_k")? {
        cfg.top_k = k;
    }
    cfg.validate()
        .map_err(|e| CliError::config("digl.alpha", e.to_string()))?;
    Ok(DiglSpec::Fixed(cfg))
}

fn default_metrics(kind: ExperimentKind, jdr: bool, digl: bool) -> Vec<Metric> {
    use Metric::*;
    let mut m = match kind {
        ExperimentKind::CsbmSweep => vec![AlignmentBefore, AlignmentAfter, ScAccuracy],
        ExperimentKind::RealDataset => {
            vec![
                AlignmentBefore,
                AlignmentAfter,
                ScAccuracyBefore,
                ScAccuracy,
                HomophilyBefore,
                HomophilyAfter,
            ]
        }
        ExperimentKind::AlignmentSweep => vec![AlignmentBefore, AlignmentAfter],
        ExperimentKind::DiffusionBaseline => {
            vec![
                AlignmentBefore,
                AlignmentDigl,
                ScAccuracyBefore,
                ScAccuracyDigl,
                HomophilyBefore,
                HomophilyDigl,
            ]
        }
        ExperimentKind::Prop1 | ExperimentKind::RidgeSweep => Vec::new(),
    };
    m.retain(|x| match x.condition() {
        Condition::Jdr => jdr,
        Condition::Digl => digl,
        Condition::None => true,
    });
    m
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KeyValues::load(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text, "<config>")?)
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let kind: ExperimentKind = kv.require::<String>("experiment")?.parse().map_err(|s| {
            CliError::config(
                "experiment",
                format!(
                    "unknown kind {s:?} (csbm_sweep, real_dataset, prop1, ridge_sweep, alignment_sweep, diffusion_baseline)"
                ),
            )
        })?;
        let id = kv.get_or("id", kind.name().to_string())?;
        if id.is_empty() || id.contains([',', '"', '\n']) {
            return Err(CliError::config("id", "must be nonempty without commas or quotes"));
        }
        let seed = kv.get_or("seed", 0u64)?;
        let n_seeds = kv.get_or("n_seeds", 1usize)?;
        if n_seeds == 0 {
            return Err(CliError::config("n_seeds", "must be at least 1"));
        }

        let dataset = Self::parse_dataset(kv, kind)?;
        let sweep = matches!(dataset, Some(DatasetSource::Csbm(_)));
        let jdr = parse_jdr(kv, sweep)?;
        let digl = parse_digl(kv, sweep)?;

        let jdr_on = jdr != JdrSpec::Off;
        let digl_on = digl != DiglSpec::Off;
        let metrics =
            named::<Metric>(kv, "eval.metrics", "metric")?.unwrap_or_else(|| default_metrics(kind, jdr_on, digl_on));
        for m in &metrics {
            if m.condition() == Condition::Jdr && !jdr_on {
                return Err(CliError::config(
                    "jdr.eta_A",
                    format!("metric {} needs a JDR configuration", m.name()),
                ));
            }
            if m.condition() == Condition::Digl && !digl_on {
                return Err(CliError::config(
                    "digl.alpha",
                    format!("metric {} needs a DIGL configuration", m.name()),
                ));
            }
        }
        if kind.needs_dataset() && metrics.is_empty() {
            return Err(CliError::config("eval.metrics", "no metrics to compute"));
        }
        let eval = EvalSettings {
            metrics,
            l: kv.get("eval.L")?,
            k: kv.get("eval.k")?,
            skip_first_raw: kv.get_or("eval.skip_first_raw", true)?,
            skip_first_jdr: kv.get_or("eval.skip_first_jdr", false)?,
            matrix: kv
                .raw("eval.matrix")
                .map_or(Ok(SpectralMatrix::Adjacency), |s| parse_matrix("eval.matrix", s))?,
            ordering: kv
                .raw("eval.ordering")
                .map_or(Ok(EigenOrdering::ByValueDesc), |s| parse_ordering("eval.ordering", s))?,
        };
        if eval.l == Some(0) {
            return Err(CliError::config("eval.L", "must be at least 1"));
        }
        if matches!(eval.k, Some(k) if k < 2) {
            return Err(CliError::config("eval.k", "must be at least 2"));
        }

        let prop1 = if kind == ExperimentKind::Prop1 {
            let p = Prop1Settings {
                n: kv.get_or("prop1.n", 2000)?,
                f: kv.get_or("prop1.f", 800)?,
                lambda: kv.require("prop1.lambda")?,
                mu: kv.require("prop1.mu")?,
                eta: kv.require("prop1.eta")?,
                trials: kv.get_or("prop1.trials", 50)?,
                sides: named(kv, "prop1.side", "side")?.unwrap_or(vec![Prop1Side::Graph, Prop1Side::Features]),
            };
            if !(0.0..=1.0).contains(&p.eta) {
                return Err(CliError::config("prop1.eta", "must lie in [0, 1]"));
            }
            if p.trials == 0 || p.sides.is_empty() {
                return Err(CliError::config("prop1.trials", "need at least one trial and one side"));
            }
            Some(p)
        } else {
            None
        };

        let ridge = if kind == ExperimentKind::RidgeSweep {
            let points: usize = kv.get_or("ridge.grid_points", 13)?;
            let grid = kv.list("ridge.grid")?.unwrap_or_else(|| log_eta_grid(points));
            let r = RidgeSettings {
                params: RidgeParams {
                    n: kv.get_or("ridge.n", 1000)?,
                    gamma: kv.get_or("ridge.gamma", 2.0)?,
                    lambda: kv.require("ridge.lambda")?,
                    mu: kv.require("ridge.mu")?,
                },
                r: kv.get_or("ridge.r", 0.01)?,
                trials: kv.get_or("ridge.trials", 10)?,
                sides: named(kv, "ridge.side", "side")?.unwrap_or(vec![RidgeSide::A, RidgeSide::X]),
                grid,
            };
            if !(r.r >= 0.0) {
                return Err(CliError::config("ridge.r", "must be nonnegative"));
            }
            if r.trials == 0 || r.sides.is_empty() || r.grid.is_empty() {
                return Err(CliError::config(
                    "ridge.trials",
                    "need at least one trial, side and grid point",
                ));
            }
            Some(r)
        } else {
            None
        };

        let cfg = ExperimentConfig {
            kind,
            id,
            seed,
            n_seeds,
            dataset,
            jdr,
            digl,
            eval,
            prop1,
            ridge,
            output: kv.get("output")?,
            wall_time: kv.get_or("output.wall_time", false)?,
        };
        let unused = kv.unused();
        if let Some(k) = unused.first() {
            return Err(CliError::config(k.clone(), "unknown key"));
        }
        Ok(cfg)
    }

    fn parse_dataset(kv: &KeyValues, kind: ExperimentKind) -> Result<Option<DatasetSource>> {
        let path = kv.get::<PathBuf>("dataset.path")?;
        let csbm = kv.has_prefix("csbm.");
        if !kind.needs_dataset() {
            if path.is_some() || csbm {
                return Err(CliError::config(
                    if csbm { "csbm" } else { "dataset.path" },
                    format!("{} does not take a dataset", kind.name()),
                ));
            }
            return Ok(None);
        }
        match (path, csbm) {
            (Some(_), true) => Err(CliError::config(
                "dataset.path",
                "give either dataset.path or csbm.*, not both",
            )),
            (None, false) => Err(CliError::config(
                "dataset.path",
                "missing dataset source (dataset.path or csbm.*)",
            )),
            (Some(p), false) => {
                if kind == ExperimentKind::CsbmSweep {
                    return Err(CliError::config(
                        "dataset.path",
                        "csbm_sweep samples its own graphs; use csbm.*",
                    ));
                }
                Ok(Some(DatasetSource::Path(p)))
            }
            (None, true) => {
                if kind == ExperimentKind::RealDataset {
                    return Err(CliError::config("csbm", "real_dataset reads dataset.path"));
                }
                let phis: Vec<f64> = kv
                    .list("csbm.phi")?
                    .ok_or_else(|| CliError::config("csbm.phi", "missing required key"))?;
                if phis.is_empty() {
                    return Err(CliError::config("csbm.phi", "empty list"));
                }
                Ok(Some(DatasetSource::Csbm(CsbmSource {
                    n: kv.require("csbm.n")?,
                    f: kv.require("csbm.f")?,
                    d: kv.get_or("csbm.d", 5.0)?,
                    epsilon: kv.get_or("csbm.epsilon", 3.25)?,
                    phis,
                })))
            }
        }
    }

    /// JDR configuration for a swept phi (or the fixed one).
    pub fn jdr_for(&self, phi: Option<f64>) -> Result<Option<JdrConfig>> {
        match &self.jdr {
            JdrSpec::Off => Ok(None),
            JdrSpec::Fixed(c) => Ok(Some(c.clone())),
            JdrSpec::Table5 { max_k, top_k } => {
                let mut c = tables::replay_table5(phi.expect("table replay needs a cSBM sweep"))?;
                if let Some(m) = max_k {
                    c.k = c.k.min(*m);
                }
                if let Some(t) = top_k {
                    c.top_k = *t;
                }
                Ok(Some(c))
            }
        }
    }

    pub fn digl_for(&self, phi: Option<f64>) -> Result<Option<DiglConfig>> {
        match &self.digl {
            DiglSpec::Off => Ok(None),
            DiglSpec::Fixed(c) => Ok(Some(c.clone())),
            DiglSpec::Table5 => {
                let row = tables::csbm_row(phi.expect("table replay needs a cSBM sweep"))?;
                Ok(Some(DiglConfig::new(row.digl_alpha)))
            }
        }
    }
}
