//! Locating candidate change points.
//!
//! Indices are split offsets: a candidate `q` puts rows `..q` on the left
//! and `q..` on the right, so `q` is also the 1-based time point that closes
//! the left block.

use ndarray::{s, ArrayView2};
use serde::{Deserialize, Serialize};

use super::DetectionConfig;
use crate::error::{Error, Result};
use crate::nmf::best_loss;

/// Result of one candidate search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub candidate: usize,
    /// Split loss minus unsplit loss over the searched window. Negative
    /// when splitting at the candidate improves the fit.
    pub delta_loss: f64,
    /// Number of candidate splits whose two halves were fitted while
    /// narrowing the interval, plus the final diagnostic split.
    pub split_evaluations: usize,
    /// Active `(lo, hi)` interval before every narrowing step.
    pub intervals: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub delta_loss: f64,
}

/// Candidates found by the recursive search, sorted by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn indices(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.index).collect()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

fn check_interval(y: ArrayView2<'_, f64>, lo: usize, hi: usize, delta: usize) -> Result<()> {
    let t = y.nrows();
    if lo > hi || lo < delta || hi + delta > t {
        return Err(Error::Range(format!(
            "search interval {lo}:{hi} must satisfy {delta} <= lo <= hi <= {}",
            t.saturating_sub(delta)
        )));
    }
    Ok(())
}

/// Total loss of the two halves of `rows` split at `q`.
fn split_loss(
    y: ArrayView2<'_, f64>,
    rows: (usize, usize),
    q: usize,
    rank: usize,
    config: &DetectionConfig,
) -> Result<f64> {
    let left = best_loss(y.slice(s![rows.0..q, ..]), rank, &config.nmf)?;
    let right = best_loss(y.slice(s![q..rows.1, ..]), rank, &config.nmf)?;
    Ok(left + right)
}

fn delta_loss(y: ArrayView2<'_, f64>, rows: (usize, usize), q: usize, rank: usize, config: &DetectionConfig) -> Result<f64> {
    let whole = best_loss(y.slice(s![rows.0..rows.1, ..]), rank, &config.nmf)?;
    Ok(split_loss(y, rows, q, rank, config)? - whole)
}

/// Binary search for a change point in `[lo, hi]`.
///
/// The data spanned by the interval is the window `lo - δ .. hi + δ`. Each
/// step splits the window at `c = ceil((lo + hi) / 2) - 1`, fits both sides
/// and keeps the part of the interval lying in the worse-fitting side:
/// `[c, hi]` when the right side has the higher loss (moved up by one if
/// `c == lo` so the interval always shrinks), otherwise `[lo, c + 1]`.
/// Equal losses go left. The search ends once `hi - lo <= 1` and returns `lo`.
pub fn binary_search_candidate(
    y: ArrayView2<'_, f64>,
    lo: usize,
    hi: usize,
    rank: usize,
    config: &DetectionConfig,
) -> Result<SearchOutcome> {
    config.validate()?;
    let delta = config.mindist;
    check_interval(y, lo, hi, delta)?;
    let (mut lo, mut hi) = (lo, hi);
    let window = (lo - delta, hi + delta);
    let mut intervals = Vec::new();
    let mut evaluations = 0;
    while hi - lo >= 2 {
        log::info!("{lo} : {hi}");
        intervals.push((lo, hi));
        let c = (lo + hi).div_ceil(2) - 1;
        let rows = (lo - delta, hi + delta);
        let left = best_loss(y.slice(s![rows.0..c, ..]), rank, &config.nmf)?;
        let right = best_loss(y.slice(s![c..rows.1, ..]), rank, &config.nmf)?;
        evaluations += 1;
        if right > left {
            lo = c.max(lo + 1);
        } else {
            hi = c + 1;
        }
    }
    let candidate = lo;
    let delta_loss = delta_loss(y, window, candidate, rank, config)?;
    evaluations += 1;
    Ok(SearchOutcome {
        candidate,
        delta_loss,
        split_evaluations: evaluations,
        intervals,
    })
}

/// Exhaustive counterpart of [`binary_search_candidate`]: fits every split
/// in `[lo, hi]` over the same window and returns the one with the lowest
/// total loss (earliest on ties).
pub fn grid_search_candidate(
    y: ArrayView2<'_, f64>,
    lo: usize,
    hi: usize,
    rank: usize,
    config: &DetectionConfig,
) -> Result<SearchOutcome> {
    config.validate()?;
    let delta = config.mindist;
    check_interval(y, lo, hi, delta)?;
    let window = (lo - delta, hi + delta);
    let mut best: Option<(usize, f64)> = None;
    for q in lo..=hi {
        let loss = split_loss(y, window, q, rank, config)?;
        if best.is_none_or(|(_, b)| loss < b) {
            best = Some((q, loss));
        }
    }
    let (candidate, split) = best.expect("non-empty interval");
    let whole = best_loss(y.slice(s![window.0..window.1, ..]), rank, &config.nmf)?;
    Ok(SearchOutcome {
        candidate,
        delta_loss: split - whole,
        split_evaluations: hi - lo + 1,
        intervals: vec![(lo, hi)],
    })
}

/// Recursive binary search over the whole series. A segment `s..e` is
/// searched on `[s + δ, e - δ]` and both sides of the candidate are then
/// searched in turn. Segments shorter than `2δ` are not searched. With
/// [`DetectionConfig::require_loss_decrease`], a candidate whose split does
/// not lower the loss is dropped and its sides are not searched.
pub fn detect_candidates(y: ArrayView2<'_, f64>, rank: usize, config: &DetectionConfig) -> Result<CandidateSet> {
    config.validate()?;
    let mut found = Vec::new();
    search_segment(y, 0, y.nrows(), rank, config, &mut found)?;
    found.sort_by_key(|c: &Candidate| c.index);
    Ok(CandidateSet { candidates: found })
}

fn search_segment(
    y: ArrayView2<'_, f64>,
    start: usize,
    end: usize,
    rank: usize,
    config: &DetectionConfig,
    found: &mut Vec<Candidate>,
) -> Result<()> {
    let delta = config.mindist;
    if end - start < 2 * delta {
        return Ok(());
    }
    let outcome = binary_search_candidate(y, start + delta, end - delta, rank, config)?;
    let q = outcome.candidate;
    if config.require_loss_decrease && outcome.delta_loss >= 0.0 {
        log::info!("No loss decrease splitting at {q} (Delta Loss: {}); stopping", outcome.delta_loss);
        return Ok(());
    }
    log::info!("Change Point At: {q} , Delta Loss: {}", outcome.delta_loss);
    found.push(Candidate {
        index: q,
        delta_loss: outcome.delta_loss,
    });
    search_segment(y, start, q, rank, config, found)?;
    search_segment(y, q, end, rank, config, found)
}
