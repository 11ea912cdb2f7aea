//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

/// Smallest level at which step-up BH rejects hypothesis `i`: the minimum of
/// m p_(k) / k over every k whose sorted p-value is at least p_i.
pub fn bh_oracle(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    p.iter()
        .map(|&pi| {
            (0..m)
                .filter(|&k| sorted[k] >= pi)
                .map(|k| sorted[k] * m as f64 / (k + 1) as f64)
                .fold(1.0_f64, f64::min)
        })
        .collect()
}

pub fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let t = x + 7.5;
    let s: f64 = C[1..].iter().enumerate().map(|(k, c)| c / (x + k as f64 + 1.0)).sum::<f64>() + C[0];
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

/// Student t CDF by Simpson integration of the density between t and 0.
pub fn t_cdf_oracle(t: f64, df: f64) -> f64 {
    let norm = (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
    let f = |x: f64| norm * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let n = 20_000;
    let (a, b) = (t.min(0.0), t.max(0.0));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let area = s * h / 3.0;
    if t < 0.0 {
        0.5 - area
    } else {
        0.5 + area
    }
}

/// Every way of drawing |a| of the pooled values as the first sample.
pub fn for_each_split(pooled: &[f64], m: usize, mut visit: impl FnMut(&[f64], &[f64])) {
    let n = pooled.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let a: Vec<f64> = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| pooled[k]).collect();
        let b: Vec<f64> = (0..n).filter(|k| mask >> k & 1 == 0).map(|k| pooled[k]).collect();
        visit(&a, &b);
    }
}

pub fn d_plus(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&x| ecdf(a, x) - ecdf(b, x)).fold(0.0, f64::max)
}

pub fn rank_sum(a: &[f64], b: &[f64]) -> f64 {
    // Midrank of x: count below plus half the ties, plus one half.
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    a.iter()
        .map(|&x| {
            let below = pooled.iter().filter(|&&v| v < x).count() as f64;
            let equal = pooled.iter().filter(|&&v| v == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .sum()
}

pub fn permutation_p(a: &[f64], b: &[f64], stat: impl Fn(&[f64], &[f64]) -> f64, extreme_high: bool) -> f64 {
    let observed = stat(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (mut hit, mut total) = (0.0, 0.0);
    for_each_split(&pooled, a.len(), |x, y| {
        let s = stat(x, y);
        let as_extreme = if extreme_high { s >= observed - 1e-9 } else { s <= observed + 1e-9 };
        if as_extreme {
            hit += 1.0;
        }
        total += 1.0;
    });
    hit / total
}

/// Co-membership matrix of the best two-group partition of `c`, scored by
/// within-group minus between-group consensus over all `2^(p-1) - 1` splits.
pub fn best_two_partition(c: &ndarray::Array2<f64>) -> ndarray::Array2<u8> {
    let p = c.nrows();
    let mut best = (f64::NEG_INFINITY, 0u32);
    for mask in 0u32..(1 << (p - 1)) {
        // Node p-1 always sits in group 0; mask 0 would be a single group.
        if mask == 0 {
            continue;
        }
        let group = |k: usize| k < p - 1 && mask >> k & 1 == 1;
        let mut score = 0.0;
        for i in 0..p {
            for j in i + 1..p {
                score += if group(i) == group(j) { c[[i, j]] } else { -c[[i, j]] };
            }
        }
        if score > best.0 {
            best = (score, mask);
        }
    }
    let group = |k: usize| k < p - 1 && best.1 >> k & 1 == 1;
    ndarray::Array2::from_shape_fn((p, p), |(i, j)| u8::from(i != j && group(i) == group(j)))
}

/// Positive random matrix with entries in `[lo, hi)`.
pub fn random_positive(rows: usize, cols: usize, seed: u64, lo: f64, hi: f64) -> ndarray::Array2<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    ndarray::Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}
