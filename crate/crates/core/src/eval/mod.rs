//! Downstream evaluation without GNN training.

mod cluster;
mod kmeans;
mod matching;
mod prop1;
mod ridge;

pub use cluster::{
    spectral_cluster, spectral_cluster_features, spectral_cluster_operator, ClusterOptions, ClusteringResult,
    SpectralMatrix,
};
pub use kmeans::{kmeans, KmeansResult};
pub use matching::{hungarian, matched_accuracy};
pub use prop1::{check_prop1, Prop1Report, Prop1Side};
pub use ridge::{
    log_eta_grid, ridge_denoise_sweep, ridge_gcn_mse, ridge_mse_of, RidgeMseReport, RidgeParams, RidgePoint, RidgeSide,
};
