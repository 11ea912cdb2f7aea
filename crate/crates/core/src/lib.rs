//! Change point detection in the clustering structure of multivariate,
//! non-negative time series using non-negative matrix factorization.

pub mod data;
pub mod detection;
pub mod error;
pub mod export;
pub mod matrix;
pub mod network;
pub mod nmf;
pub mod rank;
pub mod seed;
pub mod simulate;

pub use detection::{detect_cps, ChangePointReport, DetectionConfig, TestType};
pub use error::{Error, Result};
pub use matrix::TimeSeriesMatrix;
pub use nmf::{cluster_assign, fit_best, fit_single, kld_loss, Algorithm, NmfConfig, NmfFit};
pub use rank::{opt_rank, permute_matrix, RankSelection};
