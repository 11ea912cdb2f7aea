//! Change point detection: recursive binary search for candidates, then a
//! refit-versus-permutation test at each candidate with Benjamini-Hochberg
//! adjustment.

pub mod inference;
pub mod search;
pub mod stats;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use inference::{
    reference_losses, refit_and_permute, refit_losses, stat_test, LossDistributions, SegmentBoundaries,
};
pub use search::{
    binary_search_candidate, detect_candidates, grid_search_candidate, Candidate, CandidateSet, SearchOutcome,
};
pub use stats::{bh_adjust, one_sided_p, TestType};

use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;
use crate::nmf::NmfConfig;
use crate::rank::opt_rank;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Minimum distance δ between a candidate and its segment ends.
    pub mindist: usize,
    /// Repetitions in each refit and reference distribution.
    pub nreps: usize,
    /// Report significance at this level instead of p-values.
    pub alpha: Option<f64>,
    /// Factorization rank; chosen with [`opt_rank`] when absent.
    pub rank: Option<usize>,
    pub testtype: TestType,
    /// Also end the recursion when splitting a segment at its candidate
    /// does not lower the loss. Off by default: candidates are then pruned
    /// by the tests alone.
    pub require_loss_decrease: bool,
    /// Restarts, stopping rule and master seed for every fit.
    pub nmf: NmfConfig,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            mindist: 35,
            nreps: 100,
            alpha: None,
            rank: None,
            testtype: TestType::WelchT,
            require_loss_decrease: false,
            nmf: NmfConfig::default(),
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.nmf.validate()?;
        if self.mindist < 2 {
            return Err(Error::parameter("mindist", "must be at least 2"));
        }
        if self.nreps < 2 {
            return Err(Error::parameter("nreps", "must be at least 2"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::parameter("alpha", format!("must lie in (0, 1), got {a}")));
            }
        }
        if self.rank == Some(0) {
            return Err(Error::parameter("rank", "must be positive"));
        }
        Ok(())
    }
}

/// Adjusted p-value, or the decision at level α when one was given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatTest {
    PValue(f64),
    Significant(bool),
}

impl fmt::Display for StatTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatTest::PValue(p) => write!(f, "{p:e}"),
            StatTest::Significant(true) => f.write_str("TRUE"),
            StatTest::Significant(false) => f.write_str("FALSE"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointRow {
    /// Candidate split offset (last time point of the left block).
    #[serde(rename = "T")]
    pub t: usize,
    pub stat_test: StatTest,
    pub p_value: f64,
    pub raw_p_value: f64,
    pub delta_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointReport {
    pub rank: usize,
    pub change_points: Vec<ChangePointRow>,
    #[serde(with = "secs")]
    pub compute_time: Duration,
    pub testtype: TestType,
    pub alpha: Option<f64>,
}

impl ChangePointReport {
    /// Candidates reported significant at `alpha`, or at the configured α
    /// when `alpha` is `None`.
    pub fn significant(&self, alpha: Option<f64>) -> Vec<usize> {
        let Some(a) = alpha.or(self.alpha) else {
            return Vec::new();
        };
        self.change_points
            .iter()
            .filter(|r| r.p_value < a)
            .map(|r| r.t)
            .collect()
    }

    /// Plain-text table in the shape `T stat_test`.
    pub fn table(&self) -> String {
        let mut out = format!("$rank\n[1] {}\n\n$change_points\n", self.rank);
        if self.change_points.is_empty() {
            out.push_str("(none)\n");
        } else {
            out.push_str(&format!("{:>3} {:>6} {:>14}\n", "", "T", "stat_test"));
            for (k, row) in self.change_points.iter().enumerate() {
                out.push_str(&format!("{:>3} {:>6} {:>14}\n", k + 1, row.t, row.stat_test.to_string()));
            }
        }
        out.push_str(&format!("\n$compute_time\n{:.3} secs\n", self.compute_time.as_secs_f64()));
        out
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// Full pipeline: rank selection if needed, candidate search, refit and
/// permutation distributions for every candidate, one-sided tests and BH
/// adjustment over all candidates.
pub fn detect_cps(y: &TimeSeriesMatrix, config: &DetectionConfig) -> Result<ChangePointReport> {
    config.validate()?;
    let started = Instant::now();
    let rank = match config.rank {
        Some(r) => r,
        None => {
            log::info!("Finding optimal rank");
            let r = opt_rank(y, &config.nmf)?.rank;
            log::info!("Optimal rank: {r}");
            r
        }
    };
    let values = y.values();
    let candidates = detect_candidates(values, rank, config)?;
    let indices = candidates.indices();
    let boundaries = SegmentBoundaries::new(&indices, y.n_times())?;

    let mut refits = Vec::with_capacity(indices.len());
    for (i, &q) in indices.iter().enumerate() {
        log::info!("Refitting split at {q}");
        refits.push(refit_losses(values, &boundaries, i, config.nreps, rank, config)?);
    }
    let mut raw = Vec::with_capacity(indices.len());
    for ((i, &q), refit) in indices.iter().enumerate().zip(refits) {
        log::info!("Permuting split at {q}");
        let reference = reference_losses(values, &boundaries, i, config.nreps, rank, config)?;
        raw.push(stat_test(&LossDistributions { refit, reference }, config.testtype)?);
    }
    let adjusted = bh_adjust(&raw);

    let change_points = candidates
        .candidates
        .iter()
        .zip(raw.iter().zip(&adjusted))
        .map(|(c, (&raw_p, &p))| ChangePointRow {
            t: c.index,
            stat_test: match config.alpha {
                Some(a) => StatTest::Significant(p < a),
                None => StatTest::PValue(p),
            },
            p_value: p,
            raw_p_value: raw_p,
            delta_loss: c.delta_loss,
        })
        .collect();
    Ok(ChangePointReport {
        rank,
        change_points,
        compute_time: started.elapsed(),
        testtype: config.testtype,
        alpha: config.alpha,
    })
}
