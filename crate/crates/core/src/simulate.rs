//! Gaussian simulators with block-correlated clusters and label reshuffles
//! at known change points.

use nalgebra::{Cholesky, DMatrix};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::rescale;
use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;
use crate::seed::{self, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    /// Number of variables.
    pub p: usize,
    /// Number of time points.
    pub t: usize,
    /// Split offsets of the regime changes, strictly increasing in `1..t`.
    pub changepoints: Vec<usize>,
    pub clusters: usize,
    pub within_corr: f64,
    pub between_corr: f64,
    /// Draw fresh cluster labels at every change point.
    pub reshuffle: bool,
    pub master_seed: u64,
    /// Rescaling applied to the Gaussian draw.
    pub target_mean: f64,
    pub min_sd: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            p: 40,
            t: 300,
            changepoints: vec![],
            clusters: 2,
            within_corr: 0.75,
            between_corr: 0.20,
            reshuffle: true,
            master_seed: 0,
            target_mean: 100.0,
            min_sd: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub changepoints: Vec<usize>,
    /// Cluster label of every variable, one vector per regime.
    pub labels: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub data: TimeSeriesMatrix,
    pub truth: GroundTruth,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 2 || self.t < 2 {
            return Err(Error::Spec(format!("need p >= 2 and T >= 2, got p={} T={}", self.p, self.t)));
        }
        if self.clusters == 0 || self.clusters > self.p {
            return Err(Error::Spec(format!("clusters must be in 1..={}, got {}", self.p, self.clusters)));
        }
        if !(self.within_corr.abs() < 1.0) {
            return Err(Error::Spec(format!("|within_corr| must be < 1, got {}", self.within_corr)));
        }
        if !(self.between_corr.abs() <= 1.0) {
            return Err(Error::Spec(format!("|between_corr| must be <= 1, got {}", self.between_corr)));
        }
        let mut prev = 0;
        for &c in &self.changepoints {
            if c <= prev || c >= self.t {
                return Err(Error::Spec(format!(
                    "change points must be strictly increasing within 1..{}, got {:?}",
                    self.t, self.changepoints
                )));
            }
            prev = c;
        }
        Ok(())
    }
}

/// Block covariance: unit diagonal, `within` inside a cluster, `between` across.
pub fn block_covariance(labels: &[usize], within: f64, between: f64) -> Array2<f64> {
    let p = labels.len();
    Array2::from_shape_fn((p, p), |(i, j)| {
        if i == j {
            1.0
        } else if labels[i] == labels[j] {
            within
        } else {
            between
        }
    })
}

fn cholesky(sigma: &Array2<f64>) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    let m = DMatrix::from_fn(p, p, |i, j| sigma[[i, j]]);
    Cholesky::new(m)
        .map(|c| c.l())
        .ok_or_else(|| Error::Spec("covariance matrix is not positive definite".into()))
}

/// Draw a dataset per `spec`: rows from N(0, Σ_regime), then rescaled so it
/// is strictly positive.
pub fn simulate_dataset(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = seed::rng(seed::derive(spec.master_seed, &[stream::SIMULATE]));

    let base: Vec<usize> = (0..spec.p).map(|j| j * spec.clusters / spec.p).collect();
    let mut labels = vec![base];
    for _ in &spec.changepoints {
        let mut next = labels.last().expect("non-empty").clone();
        if spec.reshuffle {
            next.shuffle(&mut rng);
        }
        labels.push(next);
    }

    let factors = labels
        .iter()
        .map(|l| cholesky(&block_covariance(l, spec.within_corr, spec.between_corr)))
        .collect::<Result<Vec<_>>>()?;

    let mut raw = Array2::<f64>::zeros((spec.t, spec.p));
    let mut z = vec![0.0; spec.p];
    let mut regime = 0;
    for t in 0..spec.t {
        while regime < spec.changepoints.len() && t >= spec.changepoints[regime] {
            regime += 1;
        }
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let l = &factors[regime];
        for i in 0..spec.p {
            let mut acc = 0.0;
            for (k, &zk) in z.iter().enumerate().take(i + 1) {
                acc += l[(i, k)] * zk;
            }
            raw[[t, i]] = acc;
        }
    }

    let data = rescale(raw, spec.target_mean, spec.min_sd)?;
    Ok(Simulation {
        data,
        truth: GroundTruth {
            changepoints: spec.changepoints.clone(),
            labels,
        },
    })
}
