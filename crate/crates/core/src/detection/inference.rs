//! Refit and permutation distributions behind the candidate tests.

use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{one_sided_p, TestType};
use super::DetectionConfig;
use crate::error::{Error, Result};
use crate::nmf::fit_single;
use crate::seed::{self, stream};

/// Blocks flanking each candidate. With `W = {1, q_1, ..., q_k, T}` (1-based
/// time points), candidate `i` has left block `w_i ..= w_{i+1}` and right
/// block `w_{i+1} + 1 ..= w_{i+2}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentBoundaries {
    /// `W`, 1-based.
    pub w: Vec<usize>,
}

impl SegmentBoundaries {
    /// `candidates` are split offsets, strictly increasing within `1..n_times`.
    pub fn new(candidates: &[usize], n_times: usize) -> Result<Self> {
        let mut prev = 0;
        for &q in candidates {
            if q <= prev || q >= n_times {
                return Err(Error::Range(format!(
                    "candidates must be strictly increasing within 1..{n_times}, got {candidates:?}"
                )));
            }
            prev = q;
        }
        let mut w = Vec::with_capacity(candidates.len() + 2);
        w.push(1);
        w.extend_from_slice(candidates);
        w.push(n_times);
        Ok(Self { w })
    }

    pub fn len(&self) -> usize {
        self.w.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn candidate(&self, i: usize) -> usize {
        self.w[i + 1]
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::Range(format!("candidate ordinal {i} out of range (have {})", self.len())));
        }
        Ok(())
    }

    /// 0-based rows of the left block of candidate `i` (0-based ordinal).
    pub fn left(&self, i: usize) -> Result<Range<usize>> {
        self.check(i)?;
        Ok(self.w[i] - 1..self.w[i + 1])
    }

    /// 0-based rows of the right block of candidate `i`.
    pub fn right(&self, i: usize) -> Result<Range<usize>> {
        self.check(i)?;
        Ok(self.w[i + 1]..self.w[i + 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossDistributions {
    /// Summed loss of independent fits to the two blocks.
    pub refit: Vec<f64>,
    /// Same after shuffling the time points of the joined blocks.
    pub reference: Vec<f64>,
}

fn blocks(y: ArrayView2<'_, f64>, boundaries: &SegmentBoundaries, i: usize) -> Result<(Range<usize>, Range<usize>)> {
    let left = boundaries.left(i)?;
    let right = boundaries.right(i)?;
    for b in [&left, &right] {
        if b.len() < 2 {
            return Err(Error::DegenerateSegment { start: b.start, end: b.end });
        }
    }
    if right.end > y.nrows() {
        return Err(Error::Range(format!(
            "boundaries reach row {} but the series has {}",
            right.end,
            y.nrows()
        )));
    }
    Ok((left, right))
}

fn rep_seed(kind: u64, master: u64, q: usize, rep: usize, part: u64) -> u64 {
    seed::derive(master, &[kind, q as u64, rep as u64, part])
}

/// `nreps` summed losses of single randomized fits to the two blocks of
/// candidate `i`.
pub fn refit_losses(
    y: ArrayView2<'_, f64>,
    boundaries: &SegmentBoundaries,
    i: usize,
    nreps: usize,
    rank: usize,
    config: &DetectionConfig,
) -> Result<Vec<f64>> {
    let (left, right) = blocks(y, boundaries, i)?;
    let q = boundaries.candidate(i);
    let master = config.nmf.master_seed;
    (0..nreps)
        .into_par_iter()
        .map(|rep| {
            let l = fit_single(y.slice(s![left.clone(), ..]), rank, rep_seed(stream::REFIT, master, q, rep, 0), &config.nmf)?;
            let r = fit_single(y.slice(s![right.clone(), ..]), rank, rep_seed(stream::REFIT, master, q, rep, 1), &config.nmf)?;
            Ok(l.loss + r.loss)
        })
        .collect()
}

/// `nreps` summed losses after shuffling the rows of the joined blocks and
/// splitting them at the original left-block length.
pub fn reference_losses(
    y: ArrayView2<'_, f64>,
    boundaries: &SegmentBoundaries,
    i: usize,
    nreps: usize,
    rank: usize,
    config: &DetectionConfig,
) -> Result<Vec<f64>> {
    let (left, right) = blocks(y, boundaries, i)?;
    let q = boundaries.candidate(i);
    let master = config.nmf.master_seed;
    let rows: Vec<usize> = left.clone().chain(right.clone()).collect();
    let split = left.len();
    (0..nreps)
        .into_par_iter()
        .map(|rep| {
            let mut order = rows.clone();
            order.shuffle(&mut seed::rng(rep_seed(stream::REFERENCE, master, q, rep, 0)));
            let z = Array2::from_shape_fn((order.len(), y.ncols()), |(r, c)| y[[order[r], c]]);
            let l = fit_single(z.slice(s![..split, ..]), rank, rep_seed(stream::REFERENCE, master, q, rep, 1), &config.nmf)?;
            let r = fit_single(z.slice(s![split.., ..]), rank, rep_seed(stream::REFERENCE, master, q, rep, 2), &config.nmf)?;
            Ok(l.loss + r.loss)
        })
        .collect()
}

/// Both distributions for candidate `i`.
pub fn refit_and_permute(
    y: ArrayView2<'_, f64>,
    boundaries: &SegmentBoundaries,
    i: usize,
    nreps: usize,
    rank: usize,
    config: &DetectionConfig,
) -> Result<LossDistributions> {
    Ok(LossDistributions {
        refit: refit_losses(y, boundaries, i, nreps, rank, config)?,
        reference: reference_losses(y, boundaries, i, nreps, rank, config)?,
    })
}

/// p-value for "refit losses are smaller than reference losses".
pub fn stat_test(dist: &LossDistributions, test: TestType) -> Result<f64> {
    one_sided_p(&dist.refit, &dist.reference, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_follow_boundary_set() {
        let b = SegmentBoundaries::new(&[35, 70, 136], 197).unwrap();
        assert_eq!(b.w, vec![1, 35, 70, 136, 197]);
        assert_eq!(b.left(0).unwrap(), 0..35);
        assert_eq!(b.right(0).unwrap(), 35..70);
        assert_eq!(b.left(1).unwrap(), 34..70);
        assert_eq!(b.right(1).unwrap(), 70..136);
        assert_eq!(b.right(2).unwrap(), 136..197);
        assert!(matches!(b.left(3), Err(Error::Range(_))));
    }

    #[test]
    fn rejects_unordered_candidates() {
        assert!(SegmentBoundaries::new(&[10, 10], 50).is_err());
        assert!(SegmentBoundaries::new(&[50], 50).is_err());
        assert!(SegmentBoundaries::new(&[], 50).unwrap().is_empty());
    }
}
