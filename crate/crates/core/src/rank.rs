//! Factorization rank selection against a randomized baseline.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::TimeSeriesMatrix;
use crate::nmf::{best_loss, NmfConfig};
use crate::seed::{self, stream};

/// Randomize `y` over rows and columns: the entries of every column are
/// shuffled independently, then the entries of every row. The result keeps
/// the shape and the multiset of entries but carries no dependence
/// structure.
pub fn permute_matrix(y: ArrayView2<'_, f64>, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    let mut out = y.to_owned();
    let mut buf = Vec::with_capacity(out.nrows().max(out.ncols()));
    for mut col in out.columns_mut() {
        buf.clear();
        buf.extend(col.iter().copied());
        buf.shuffle(&mut rng);
        col.iter_mut().zip(&buf).for_each(|(o, &v)| *o = v);
    }
    for mut row in out.rows_mut() {
        buf.clear();
        buf.extend(row.iter().copied());
        buf.shuffle(&mut rng);
        row.iter_mut().zip(&buf).for_each(|(o, &v)| *o = v);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankStep {
    pub rank: usize,
    pub loss: f64,
    pub permuted_loss: f64,
    /// Loss decrease from `rank - 1` to `rank` on the data.
    pub decrease: f64,
    /// Same decrease on the randomized data.
    pub permuted_decrease: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankSelection {
    pub rank: usize,
    /// The stopping rule never fired and the largest admissible rank was returned.
    pub hit_limit: bool,
    pub steps: Vec<RankStep>,
}

/// Pick the factorization rank: increase the rank until the loss decrease
/// on `y` falls below the decrease on a randomized copy of `y`, and return
/// the rank before that (never below 2). The randomized copy is drawn once
/// and reused for every rank.
pub fn opt_rank(y: &TimeSeriesMatrix, config: &NmfConfig) -> Result<RankSelection> {
    config.validate()?;
    let r_max = y.n_times().min(y.n_vars()) - 1;
    if r_max < 2 {
        return Err(Error::Data(format!(
            "a {}x{} series is too small to compare ranks (need min(T, p) >= 3)",
            y.n_times(),
            y.n_vars()
        )));
    }
    let values = y.values();
    let permuted = permute_matrix(values, seed::derive(config.master_seed, &[stream::RANK_PERMUTE]));

    let mut prev = best_loss(values, 1, config)?;
    let mut prev_perm = best_loss(permuted.view(), 1, config)?;
    let mut steps = Vec::new();
    for k in 2..=r_max {
        let loss = best_loss(values, k, config)?;
        let permuted_loss = best_loss(permuted.view(), k, config)?;
        let step = RankStep {
            rank: k,
            loss,
            permuted_loss,
            decrease: prev - loss,
            permuted_decrease: prev_perm - permuted_loss,
        };
        log::debug!(
            "rank {k}: decrease {:.6} vs permuted {:.6}",
            step.decrease,
            step.permuted_decrease
        );
        let fired = step.decrease < step.permuted_decrease;
        steps.push(step);
        if fired {
            return Ok(RankSelection {
                rank: (k - 1).max(2),
                hit_limit: false,
                steps,
            });
        }
        prev = loss;
        prev_perm = permuted_loss;
    }
    log::warn!("rank search reached the largest admissible rank {r_max} without stopping");
    Ok(RankSelection {
        rank: r_max,
        hit_limit: true,
        steps,
    })
}
