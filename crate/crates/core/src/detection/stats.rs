//! One-sided two-sample tests and Benjamini-Hochberg adjustment.
//!
//! Every test here asks whether the first sample tends to be *smaller* than
//! the second one: a refit loss distribution sitting below its permuted
//! reference is evidence of a change point.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Exact rank-sum distribution is used while both samples are smaller than this.
const RANK_SUM_EXACT_BELOW: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestType {
    /// Welch's unequal-variance t-test.
    #[default]
    WelchT,
    /// Wilcoxon rank-sum (Mann-Whitney) test.
    Wilcoxon,
    /// Kolmogorov-Smirnov test on the one-sided D+ statistic.
    Ks,
}

impl std::str::FromStr for TestType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t-test" | "t" | "welch" | "welch_t" | "welch-t" => Ok(TestType::WelchT),
            "wilcox" | "wilcoxon" | "mann-whitney" | "rank-sum" => Ok(TestType::Wilcoxon),
            "ks" | "kolmogorov-smirnov" => Ok(TestType::Ks),
            other => Err(Error::parameter(
                "testtype",
                format!("unknown test `{other}` (expected t-test, wilcox or ks)"),
            )),
        }
    }
}

impl std::fmt::Display for TestType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestType::WelchT => "t-test",
            TestType::Wilcoxon => "wilcox",
            TestType::Ks => "ks",
        })
    }
}

/// One-sided p-value for "`a` is stochastically smaller than `b`".
pub fn one_sided_p(a: &[f64], b: &[f64], test: TestType) -> Result<f64> {
    match test {
        TestType::WelchT => welch_t(a, b).map(|w| w.p_value),
        TestType::Wilcoxon => rank_sum_less(a, b),
        TestType::Ks => ks_greater(a, b),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Lower-tail p-value, H1: mean(a) < mean(b).
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn check_finite(x: &[f64], name: &'static str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::parameter(name, "sample contains non-finite values"));
    }
    Ok(())
}

/// Welch's t statistic with Welch-Satterthwaite degrees of freedom.
///
/// When both samples have zero variance the statistic is undefined; the
/// p-value is then 1 for equal means, 0 if `a` lies below `b`, 1 otherwise.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::parameter("samples", "Welch's t-test needs at least 2 values per sample"));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        let (t, p) = if ma < mb {
            (f64::NEG_INFINITY, 0.0)
        } else if ma > mb {
            (f64::INFINITY, 1.0)
        } else {
            (0.0, 1.0)
        };
        return Ok(WelchResult { t, df: na + nb - 2.0, p_value: p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::parameter("df", e.to_string()))?;
    Ok(WelchResult {
        t,
        df,
        p_value: dist.cdf(t).clamp(0.0, 1.0),
    })
}

/// Midranks (1-based) of the pooled sample and the tie group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Rank-sum test, H1: `a` shifted below `b`.
///
/// Exact (conditional on ties) when both samples have fewer than 20 values,
/// otherwise the normal approximation with tie and continuity correction.
pub fn rank_sum_less(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::parameter("samples", "rank-sum test needs non-empty samples"));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (n1, n2) = (a.len(), b.len());
    let rank_sum: f64 = ranks[..n1].iter().sum();

    if n1 < RANK_SUM_EXACT_BELOW && n2 < RANK_SUM_EXACT_BELOW {
        // Doubled midranks are integers; count subsets of size n1 by sum.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let observed = (2.0 * rank_sum).round() as usize;
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![vec![0.0_f64; max_sum + 1]; n1 + 1];
        counts[0][0] = 1.0;
        for &d in &doubled {
            for k in (1..=n1).rev() {
                let (lower, upper) = counts.split_at_mut(k);
                let prev = &lower[k - 1];
                let cur = &mut upper[0];
                for s in (d..=max_sum).rev() {
                    cur[s] += prev[s - d];
                }
            }
        }
        let total: f64 = counts[n1].iter().sum();
        let below: f64 = counts[n1][..=observed.min(max_sum)].iter().sum();
        return Ok((below / total).clamp(0.0, 1.0));
    }

    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let u = rank_sum - n1f * (n1f + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>() / (n * (n - 1.0));
    let sigma = (n1f * n2f / 12.0 * ((n + 1.0) - tie_term)).sqrt();
    if sigma == 0.0 {
        return Ok(1.0);
    }
    let z = (u - n1f * n2f / 2.0 + 0.5) / sigma;
    let normal = Normal::standard();
    Ok(normal.cdf(z).clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov-Smirnov test of H1: the CDF of `a` lies above the
/// CDF of `b`, using D+ = max(F_a - F_b).
///
/// The p-value is exact and conditional on ties, computed by a lattice-path
/// recursion over the pooled order.
pub fn ks_greater(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::parameter("samples", "KS test needs non-empty samples"));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let (m, n) = (a.len(), b.len());
    let mut pooled: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total = m + n;
    // `checkpoint[k]`: D+ may be evaluated after k pooled values.
    let mut checkpoint = vec![false; total + 1];
    checkpoint[total] = true;
    for k in 1..total {
        checkpoint[k] = pooled[k].0 != pooled[k - 1].0;
    }

    // Scaled statistic i*n - j*m keeps everything in integers.
    let scaled = |i: usize, j: usize| (i * n) as i64 - (j * m) as i64;
    let mut observed = 0_i64;
    let (mut i, mut j) = (0, 0);
    for (k, &(_, from_a)) in pooled.iter().enumerate() {
        if from_a {
            i += 1;
        } else {
            j += 1;
        }
        if checkpoint[k + 1] {
            observed = observed.max(scaled(i, j));
        }
    }
    if observed <= 0 {
        return Ok(1.0);
    }

    // prob[i]: mass of paths at (i, k - i) that have not yet reached `observed`.
    let mut prob = vec![0.0_f64; m + 1];
    prob[0] = 1.0;
    let mut exceeded = 0.0;
    for k in 0..total {
        let mut next = vec![0.0_f64; m + 1];
        let remaining = (total - k) as f64;
        let lo = k.saturating_sub(n);
        let hi = k.min(m);
        for i in lo..=hi {
            let mass = prob[i];
            if mass == 0.0 {
                continue;
            }
            let j = k - i;
            let p_a = (m - i) as f64 / remaining;
            if i < m {
                next[i + 1] += mass * p_a;
            }
            if j < n {
                next[i] += mass * (1.0 - p_a);
            }
        }
        if checkpoint[k + 1] {
            let lo = (k + 1).saturating_sub(n);
            for (i, mass) in next.iter_mut().enumerate().take(m.min(k + 1) + 1).skip(lo) {
                if scaled(i, k + 1 - i) >= observed {
                    exceeded += *mass;
                    *mass = 0.0;
                }
            }
        }
        prob = next;
    }
    Ok(exceeded.clamp(0.0, 1.0))
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].total_cmp(&pvals[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (rank, &idx) in order.iter().enumerate().rev() {
        let candidate = pvals[idx] * m as f64 / (rank + 1) as f64;
        running = running.min(candidate);
        adjusted[idx] = running.min(1.0);
    }
    adjusted
}
