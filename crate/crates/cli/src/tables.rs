//! Published hyperparameters, replayable as [`JdrConfig`]s.

use jdr_core::jdr::JdrConfig;
use jdr_core::spectral::EigenOrdering;

use crate::error::{CliError, Result};

/// One row of the cSBM table. `None` is a dash: that side is inactive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsbmRow {
    pub phi: f64,
    pub k: usize,
    pub l_a: Option<usize>,
    pub l_x: Option<usize>,
    pub eta_a: Option<f64>,
    pub eta_x1: Option<f64>,
    pub eta_x2: Option<f64>,
    pub digl_alpha: f64,
}

const fn row(
    phi: f64,
    k: usize,
    l_a: Option<usize>,
    l_x: Option<usize>,
    eta_a: Option<f64>,
    eta_x1: Option<f64>,
    eta_x2: Option<f64>,
    digl_alpha: f64,
) -> CsbmRow {
    CsbmRow {
        phi,
        k,
        l_a,
        l_x,
        eta_a,
        eta_x1,
        eta_x2,
        digl_alpha,
    }
}

#[rustfmt::skip]
pub const CSBM_ROWS: [CsbmRow; 17] = [
    row(-1.0,   28, None,     Some(10), None,        Some(0.482), Some(0.916), 1.0),
    row(-0.875, 41, Some(5),  Some(8),  Some(0.101), Some(0.479), Some(0.858), 1.0),
    row(-0.75,  40, Some(6),  Some(9),  Some(0.042), Some(0.498), Some(0.846), 1.0),
    row(-0.625, 48, Some(6),  Some(8),  Some(0.036), Some(0.453), Some(0.862), 1.0),
    row(-0.5,   50, Some(9),  Some(10), Some(0.189), Some(0.412), Some(0.991), 1.0),
    row(-0.375, 48, Some(8),  Some(10), Some(0.879), Some(0.973), Some(0.773), 1.0),
    row(-0.25,  80, Some(1),  Some(1),  Some(1.000), None,        None,        1.0),
    row(-0.125, 80, Some(1),  Some(1),  Some(1.000), None,        None,        1.0),
    row(0.0,    80, Some(1),  Some(1),  Some(1.000), None,        None,        0.95),
    row(0.125,  76, Some(1),  None,     Some(0.650), None,        None,        1.0),
    row(0.25,   33, Some(1),  None,     Some(0.951), None,        None,        0.5),
    row(0.375,  18, Some(10), Some(10), Some(0.856), Some(0.023), Some(0.228), 0.05),
    row(0.5,    18, Some(10), Some(9),  Some(0.415), Some(0.263), Some(0.880), 0.05),
    row(0.625,  22, Some(8),  Some(7),  Some(0.264), Some(0.340), Some(0.807), 0.05),
    row(0.75,   15, Some(7),  Some(9),  Some(0.056), Some(0.474), Some(0.778), 0.05),
    row(0.875,  16, Some(10), Some(8),  Some(0.035), Some(0.228), Some(0.981), 0.05),
    row(1.0,    80, None,     Some(1),  None,        Some(1.000), Some(1.000), 0.05),
];

impl CsbmRow {
    /// Heterophilic rows order eigenvalues by magnitude.
    pub fn ordering(&self) -> EigenOrdering {
        if self.phi < 0.0 {
            EigenOrdering::ByAbsDesc
        } else {
            EigenOrdering::ByValueDesc
        }
    }

    pub fn to_config(&self) -> JdrConfig {
        let (l_a, eta_a) = match (self.l_a, self.eta_a) {
            (Some(l), Some(e)) => (l, e),
            _ => (0, 0.0),
        };
        let (l_x, eta_x1, eta_x2) = match (self.l_x, self.eta_x1, self.eta_x2) {
            (Some(l), Some(e1), Some(e2)) => (l, e1, e2),
            _ => (0, 0.0, 0.0),
        };
        let mut cfg = JdrConfig::new(self.k, l_a, l_x, eta_a, eta_x1, eta_x2);
        cfg.ordering = self.ordering();
        cfg
    }
}

pub fn csbm_row(phi: f64) -> Result<&'static CsbmRow> {
    CSBM_ROWS.iter().find(|r| (r.phi - phi).abs() < 1e-9).ok_or_else(|| {
        let valid: Vec<String> = CSBM_ROWS.iter().map(|r| r.phi.to_string()).collect();
        CliError::config(
            "csbm.phi",
            format!("no tabulated row for phi = {phi}; valid values: {}", valid.join(", ")),
        )
    })
}

/// Tabulated JDR configuration for a cSBM at `phi`.
pub fn replay_table5(phi: f64) -> Result<JdrConfig> {
    csbm_row(phi).map(CsbmRow::to_config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Downstream {
    Gcn,
    GprGnn,
}

impl std::str::FromStr for Downstream {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Downstream::Gcn),
            "gprgnn" => Ok(Downstream::GprGnn),
            _ => Err(format!("unknown model {s:?} (gcn or gprgnn)")),
        }
    }
}

/// `(K, L_A, L_X, eta_A, eta_X1, eta_X2)`.
type RealParams = (usize, usize, usize, f64, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRow {
    pub dataset: &'static str,
    pub heterophilic: bool,
    pub gcn: RealParams,
    pub gprgnn: RealParams,
    /// DIGL teleport probability tuned for GCN and GPRGNN; dense splits.
    pub digl_alpha: (f64, f64),
}

#[rustfmt::skip]
pub const REAL_ROWS: [RealRow; 13] = [
    RealRow { dataset: "cora", heterophilic: false, gcn: (10, 1853, 38, 0.066, 0.173, 0.071), gprgnn: (10, 772, 76, 0.027, 0.434, 0.005), digl_alpha: (0.25, 0.60) },
    RealRow { dataset: "citeseer", heterophilic: false, gcn: (15, 578, 1330, 0.460, 0.173, 0.049), gprgnn: (4, 1390, 1169, 0.345, 0.099, 0.585), digl_alpha: (0.60, 0.50) },
    RealRow { dataset: "pubmed", heterophilic: false, gcn: (12, 8, 53, 0.316, 0.004, 0.187), gprgnn: (1, 1772, 919, 0.197, 0.893, 0.034), digl_alpha: (0.60, 0.50) },
    RealRow { dataset: "computers", heterophilic: false, gcn: (3, 718, 975, 0.398, 0.021, 0.068), gprgnn: (7, 583, 1533, 0.468, 0.062, 0.127), digl_alpha: (0.05, 0.60) },
    RealRow { dataset: "photo", heterophilic: false, gcn: (6, 467, 1867, 0.479, 0.071, 0.344), gprgnn: (4, 433, 1719, 0.413, 0.115, 0.231), digl_alpha: (0.30, 0.70) },
    RealRow { dataset: "chameleon", heterophilic: true, gcn: (7, 41, 1099, 0.066, 0.375, 0.975), gprgnn: (3, 31, 1331, 0.063, 0.486, 0.755), digl_alpha: (0.15, 0.50) },
    RealRow { dataset: "squirrel", heterophilic: true, gcn: (2, 4, 1941, 0.404, 0.011, 0.022), gprgnn: (2, 53, 1210, 0.234, 0.495, 0.964), digl_alpha: (0.05, 0.15) },
    RealRow { dataset: "actor", heterophilic: true, gcn: (29, 896, 14, 0.298, 0.235, 0.219), gprgnn: (11, 1171, 791, 0.476, 0.028, 0.251), digl_alpha: (1.00, 0.60) },
    RealRow { dataset: "texas", heterophilic: true, gcn: (20, 21, 183, 0.514, 0.028, 0.836), gprgnn: (1, 109, 36, 0.182, 0.004, 0.214), digl_alpha: (1.00, 0.00) },
    RealRow { dataset: "cornell", heterophilic: true, gcn: (17, 10, 125, 0.794, 0.298, 0.113), gprgnn: (1, 39, 67, 0.482, 0.424, 0.068), digl_alpha: (1.00, 1.00) },
    RealRow { dataset: "questions", heterophilic: true, gcn: (8, 248, 284, 0.218, 0.199, 0.841), gprgnn: (2, 89, 2, 0.974, 0.106, 0.311), digl_alpha: (0.05, 1.0) },
    RealRow { dataset: "penn94", heterophilic: true, gcn: (20, 60, 71, 0.445, 0.005, 0.902), gprgnn: (5, 172, 1851, 0.422, 0.094, 0.138), digl_alpha: (0.2, 0.1) },
    RealRow { dataset: "twitch-gamers", heterophilic: true, gcn: (5, 7, 5, 0.235, 0.286, 0.806), gprgnn: (5, 2, 2, 0.165, 0.329, 0.003), digl_alpha: (0.15, 0.25) },
];

/// Tabulated JDR configuration for a real dataset (name is case-insensitive).
pub fn replay_real(dataset: &str, model: Downstream) -> Result<JdrConfig> {
    let name = dataset.to_ascii_lowercase();
    let r = REAL_ROWS.iter().find(|r| r.dataset == name).ok_or_else(|| {
        let valid: Vec<&str> = REAL_ROWS.iter().map(|r| r.dataset).collect();
        CliError::config(
            "jdr.replay_dataset",
            format!("unknown dataset {dataset:?}; valid: {}", valid.join(", ")),
        )
    })?;
    let (k, l_a, l_x, eta_a, eta_x1, eta_x2) = match model {
        Downstream::Gcn => r.gcn,
        Downstream::GprGnn => r.gprgnn,
    };
    let mut cfg = JdrConfig::new(k, l_a, l_x, eta_a, eta_x1, eta_x2);
    if r.heterophilic {
        cfg.ordering = EigenOrdering::ByAbsDesc;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weak_graph_row() {
        let c = replay_table5(0.0).unwrap();
        assert_eq!((c.k, c.l_a, c.eta_a), (80, 1, 1.0));
        assert!(c.graph_active() && !c.features_active());
        assert_eq!(c.ordering, EigenOrdering::ByValueDesc);
    }

    #[test]
    fn half_phi_row() {
        let c = replay_table5(0.5).unwrap();
        assert_eq!((c.k, c.l_a, c.l_x), (18, 10, 9));
        assert_eq!((c.eta_a, c.eta_x1, c.eta_x2), (0.415, 0.263, 0.880));
    }

    #[test]
    fn feature_only_row() {
        let c = replay_table5(-1.0).unwrap();
        assert!(!c.graph_active());
        assert_eq!((c.k, c.l_x, c.eta_x1, c.eta_x2), (28, 10, 0.482, 0.916));
        assert_eq!(c.ordering, EigenOrdering::ByAbsDesc);
    }

    #[test]
    fn untabulated_phi_lists_valid_values() {
        let e = replay_table5(0.3).unwrap_err().to_string();
        assert!(e.contains("-0.875") && e.contains("0.625"), "{e}");
    }

    #[test]
    fn all_rows_validate() {
        for r in &CSBM_ROWS {
            r.to_config().validate().unwrap();
        }
        assert!(CSBM_ROWS
            .windows(2)
            .all(|w| (w[1].phi - w[0].phi - 0.125).abs() < 1e-12));
        for r in &REAL_ROWS {
            replay_real(r.dataset, Downstream::Gcn).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn real_rows() {
        let c = replay_real("Cora", Downstream::Gcn).unwrap();
        assert_eq!((c.k, c.l_a, c.l_x), (10, 1853, 38));
        let c = replay_real("chameleon", Downstream::GprGnn).unwrap();
        assert_eq!(c.ordering, EigenOrdering::ByAbsDesc);
        assert_eq!(c.eta_x2, 0.755);
        assert!(replay_real("arxiv", Downstream::Gcn).is_err());
    }
}
