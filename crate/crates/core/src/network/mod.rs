//! Stationary network estimation between change points from consensus
//! matrices of repeated NMF clusterings.

mod hclust;

use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hclust::average_linkage_cut;

use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;
use crate::nmf::{check_fit_input, cluster_assign, fit_single, NmfConfig};
use crate::rank::opt_rank;
use crate::seed::{self, stream};

/// Fraction of runs in which each pair of variables shared a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMatrix {
    pub values: Array2<f64>,
    pub nruns_used: usize,
}

impl ConsensusMatrix {
    /// Wrap an existing matrix after checking symmetry, unit diagonal and range.
    pub fn from_values(values: Array2<f64>, nruns_used: usize) -> Result<Self> {
        let (n, m) = values.dim();
        if n != m {
            return Err(Error::Dimension(format!("consensus matrix is {n}x{m}, expected square")));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Data(format!("consensus entry ({i}, {j}) = {v} outside [0, 1]")));
            }
            if v != values[[j, i]] {
                return Err(Error::Data(format!("consensus matrix is not symmetric at ({i}, {j})")));
            }
            if i == j && v != 1.0 {
                return Err(Error::Data(format!("consensus diagonal at {i} is {v}, expected 1")));
            }
        }
        Ok(Self { values, nruns_used })
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    Threshold(f64),
    Clusters(usize),
    /// Read from a file; how it was derived is unknown.
    Imported,
}

/// Undirected, unweighted graph without self-loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    pub values: Array2<u8>,
    pub mode: AdjacencyMode,
}

impl AdjacencyMatrix {
    /// Wrap a 0/1 matrix after checking it is square, symmetric and has an
    /// empty diagonal.
    pub fn from_values(values: Array2<u8>, mode: AdjacencyMode) -> Result<Self> {
        let (n, m) = values.dim();
        if n != m {
            return Err(Error::Dimension(format!("adjacency matrix is {n}x{m}, expected square")));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if v > 1 {
                return Err(Error::Data(format!("adjacency entry ({i}, {j}) = {v}, expected 0 or 1")));
            }
            if v != values[[j, i]] {
                return Err(Error::Data(format!("adjacency matrix is not symmetric at ({i}, {j})")));
            }
            if i == j && v != 0 {
                return Err(Error::Data(format!("adjacency matrix has a self-loop at node {}", i + 1)));
            }
        }
        Ok(Self { values, mode })
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    /// Edges as 0-based pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.values[[i, j]] == 1)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }
}

/// Consensus over `config.nruns` single fits of `y_segment`. Run `k` uses
/// seed [`seed::run_seed`]`(config.master_seed, k)`.
pub fn consensus_matrix(y_segment: ArrayView2<'_, f64>, rank: usize, config: &NmfConfig) -> Result<ConsensusMatrix> {
    config.validate()?;
    check_fit_input(y_segment, rank)?;
    let p = y_segment.ncols();
    let labels = (0..config.nruns)
        .into_par_iter()
        .map(|run| {
            let fit = fit_single(y_segment, rank, seed::run_seed(config.master_seed, run), config)?;
            cluster_assign(fit.h.view())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = Array2::<u32>::zeros((p, p));
    for l in &labels {
        for i in 0..p {
            for j in 0..p {
                if l[i] == l[j] {
                    counts[[i, j]] += 1;
                }
            }
        }
    }
    let runs = config.nruns as f64;
    Ok(ConsensusMatrix {
        values: counts.mapv(|c| c as f64 / runs),
        nruns_used: config.nruns,
    })
}

/// Edge wherever the consensus strictly exceeds `lambda`.
pub fn adjacency_from_threshold(c: &ConsensusMatrix, lambda: f64) -> Result<AdjacencyMatrix> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::parameter("lambda", format!("threshold must lie in (0, 1), got {lambda}")));
    }
    let values = Array2::from_shape_fn(c.values.dim(), |(i, j)| u8::from(i != j && c.values[[i, j]] > lambda));
    Ok(AdjacencyMatrix {
        values,
        mode: AdjacencyMode::Threshold(lambda),
    })
}

/// Edge between every pair placed in the same group when the average-linkage
/// tree on `1 - C` is cut into `k` groups.
pub fn adjacency_from_clustering(c: &ConsensusMatrix, k: usize) -> Result<AdjacencyMatrix> {
    let p = c.n_nodes();
    if k == 0 || k > p {
        return Err(Error::parameter("k", format!("cluster count must lie in 1..={p}, got {k}")));
    }
    let d = c.values.mapv(|v| 1.0 - v);
    let labels = average_linkage_cut(d.view(), k);
    let values = Array2::from_shape_fn((p, p), |(i, j)| u8::from(i != j && labels[i] == labels[j]));
    Ok(AdjacencyMatrix {
        values,
        mode: AdjacencyMode::Clusters(k),
    })
}

/// How adjacency matrices are derived from a consensus matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSpec {
    /// Cut the clustering tree into this many groups.
    Clusters(usize),
    /// One thresholded adjacency per value, in the given order.
    Thresholds(Vec<f64>),
}

impl FromStr for LambdaSpec {
    type Err = Error;

    /// `"4"` means four clusters, `"0.5"` one threshold and
    /// `"0.1,0.2,0.3"` several thresholds.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.contains([',', '.', 'e', 'E']) {
            if let Ok(k) = s.parse::<usize>() {
                return Ok(LambdaSpec::Clusters(k));
            }
        }
        let values = s
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parameter("lambda", format!("`{v}` is neither a cluster count nor a threshold")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LambdaSpec::Thresholds(values))
    }
}

impl LambdaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaSpec::Clusters(0) => Err(Error::parameter("lambda", "cluster count must be positive")),
            LambdaSpec::Thresholds(v) if v.is_empty() => Err(Error::parameter("lambda", "no thresholds given")),
            LambdaSpec::Thresholds(v) => match v.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
                Some(l) => Err(Error::parameter("lambda", format!("threshold must lie in (0, 1), got {l}"))),
                None => Ok(()),
            },
            LambdaSpec::Clusters(_) => Ok(()),
        }
    }

    pub fn apply(&self, c: &ConsensusMatrix) -> Result<Vec<AdjacencyMatrix>> {
        match self {
            LambdaSpec::Clusters(k) => Ok(vec![adjacency_from_clustering(c, *k)?]),
            LambdaSpec::Thresholds(v) => v.iter().map(|&l| adjacency_from_threshold(c, l)).collect(),
        }
    }
}

/// Network estimate for one stationary segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentNetwork {
    /// First time point, 1-based.
    pub start: usize,
    /// Last time point, 1-based and inclusive.
    pub end: usize,
    pub rank: usize,
    pub consensus: ConsensusMatrix,
    /// One matrix per cluster count or threshold.
    pub adjacency: Vec<AdjacencyMatrix>,
}

/// 1-based inclusive segments delimited by `changepoints`: a change point
/// `c` closes the segment that ends at time point `c`.
pub fn segments(n_times: usize, changepoints: &[usize]) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::with_capacity(changepoints.len() + 1);
    let mut start = 1;
    for &c in changepoints {
        if c < start || c >= n_times {
            return Err(Error::Range(format!(
                "change points must be strictly increasing within 1..{n_times}, got {changepoints:?}"
            )));
        }
        out.push((start, c));
        start = c + 1;
    }
    out.push((start, n_times));
    if let Some(&(s, e)) = out.iter().find(|(s, e)| e - s + 1 < 2) {
        return Err(Error::DegenerateSegment { start: s - 1, end: e });
    }
    Ok(out)
}

/// Estimate one network per segment. Without a `rank`, each segment gets
/// its own rank from [`opt_rank`].
pub fn est_net(
    y: &TimeSeriesMatrix,
    lambda: &LambdaSpec,
    rank: Option<usize>,
    config: &NmfConfig,
    changepoints: &[usize],
) -> Result<Vec<SegmentNetwork>> {
    config.validate()?;
    lambda.validate()?;
    let bounds = segments(y.n_times(), changepoints)?;
    bounds
        .iter()
        .enumerate()
        .map(|(index, &(start, end))| {
            let rows = y.values().slice_move(s![start - 1..end, ..]);
            let seg_config = NmfConfig {
                master_seed: seed::derive(config.master_seed, &[stream::CONSENSUS, index as u64]),
                ..config.clone()
            };
            let r = match rank {
                Some(r) => r,
                None => opt_rank(&TimeSeriesMatrix::new(rows.to_owned())?, &seg_config)?.rank,
            };
            log::info!("Estimating network for time points {start}:{end} at rank {r}");
            let consensus = consensus_matrix(rows, r, &seg_config)?;
            let adjacency = lambda.apply(&consensus)?;
            Ok(SegmentNetwork {
                start,
                end,
                rank: r,
                consensus,
                adjacency,
            })
        })
        .collect()
}
