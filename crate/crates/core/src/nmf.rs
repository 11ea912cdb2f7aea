//! Non-negative matrix factorization under the generalized Kullback-Leibler
//! divergence, fitted with multiplicative updates and random restarts.

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Guard added to update denominators.
const EPS: f64 = 1e-12;

/// NMF solver. Only the KL multiplicative-update scheme is provided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Lee-Seung multiplicative updates for the KL divergence (the "brunet" scheme).
    #[default]
    MultiplicativeKl,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicative_kl" | "brunet" => Ok(Algorithm::MultiplicativeKl),
            other => Err(Error::parameter(
                "algorithm",
                format!("unknown NMF algorithm `{other}` (expected `brunet`)"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    /// Random restarts per best-of fit.
    pub nruns: usize,
    pub max_iterations: usize,
    /// Stop once the relative loss change between consecutive iterations
    /// falls below this value.
    pub tolerance: f64,
    pub master_seed: u64,
    pub algorithm: Algorithm,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            nruns: 50,
            max_iterations: 2000,
            tolerance: 1e-6,
            master_seed: 0,
            algorithm: Algorithm::MultiplicativeKl,
        }
    }
}

impl NmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nruns == 0 {
            return Err(Error::parameter("nruns", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::parameter("max_iterations", "must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::parameter("tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// A fitted factorization `X ≈ W H`.
#[derive(Clone, Debug, PartialEq)]
pub struct NmfFit {
    /// n×r basis over time.
    pub w: Array2<f64>,
    /// r×p coefficients over variables.
    pub h: Array2<f64>,
    pub rank: usize,
    /// Final KL divergence.
    pub loss: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Restart index that produced this fit (0 for single fits).
    pub run: usize,
}

/// Generalized KL divergence `D(X | WH)`, with `0 log 0 := 0`.
pub fn kld_loss(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, h: ArrayView2<'_, f64>) -> Result<f64> {
    let (n, p) = x.dim();
    if w.nrows() != n || h.ncols() != p || w.ncols() != h.nrows() {
        return Err(Error::Dimension(format!(
            "X is {n}x{p}, W is {}x{}, H is {}x{}",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols()
        )));
    }
    let wh = w.dot(&h);
    let mut loss = 0.0;
    for ((row, col), &xv) in x.indexed_iter() {
        let y = wh[[row, col]];
        if xv > 0.0 {
            if y <= 0.0 {
                return Err(Error::SingularReconstruction { row, col });
            }
            loss += xv * (xv / y).ln() - xv + y;
        } else {
            loss += y;
        }
    }
    Ok(loss)
}

/// Validates a segment for fitting at `rank`.
pub(crate) fn check_fit_input(x: ArrayView2<'_, f64>, rank: usize) -> Result<()> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::Data(format!("segment has {n} time points; need at least 2")));
    }
    let limit = n.min(p);
    if rank == 0 || rank >= limit {
        return Err(Error::Rank { rank, limit });
    }
    for ((row, col), &v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
        if v < 0.0 {
            return Err(Error::Data(format!("negative value {v} at row {row}, column {col}")));
        }
    }
    Ok(())
}

/// Fit one randomly initialized factorization.
pub fn fit_single(x: ArrayView2<'_, f64>, rank: usize, seed: u64, config: &NmfConfig) -> Result<NmfFit> {
    config.validate()?;
    check_fit_input(x, rank)?;
    Ok(Solver::new(x, rank, seed).run(config, None))
}

/// Like [`fit_single`], also returning the loss after every iteration.
pub fn fit_single_traced(
    x: ArrayView2<'_, f64>,
    rank: usize,
    seed: u64,
    config: &NmfConfig,
) -> Result<(NmfFit, Vec<f64>)> {
    config.validate()?;
    check_fit_input(x, rank)?;
    let mut trace = Vec::new();
    let fit = Solver::new(x, rank, seed).run(config, Some(&mut trace));
    Ok((fit, trace))
}

/// Best of `config.nruns` restarts. Run `k` uses seed
/// [`seed::run_seed`]`(master_seed, k)`; the lowest loss wins and ties go
/// to the lowest run index, so the result does not depend on thread count.
pub fn fit_best(x: ArrayView2<'_, f64>, rank: usize, config: &NmfConfig) -> Result<NmfFit> {
    config.validate()?;
    check_fit_input(x, rank)?;
    let fit = (0..config.nruns)
        .into_par_iter()
        .map(|run| {
            let mut fit = Solver::new(x, rank, seed::run_seed(config.master_seed, run)).run(config, None);
            fit.run = run;
            fit
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("nruns >= 1");
    Ok(fit)
}

/// Loss of [`fit_best`] without keeping the factors around.
pub fn best_loss(x: ArrayView2<'_, f64>, rank: usize, config: &NmfConfig) -> Result<f64> {
    fit_best(x, rank, config).map(|f| f.loss)
}

fn better(a: &NmfFit, b: &NmfFit) -> bool {
    a.loss < b.loss || (a.loss == b.loss && a.run < b.run)
}

/// Cluster label of every column of `H`: the row holding its largest
/// coefficient, lowest row on ties.
pub fn cluster_assign(h: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    if h.is_empty() {
        return Err(Error::Data("cannot assign clusters from an empty H".into()));
    }
    Ok(h.columns()
        .into_iter()
        .map(|col| {
            let mut best = 0;
            for (a, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = a;
                }
            }
            best
        })
        .collect())
}

/// Iterations between stopping-rule checks. Each check evaluates the loss
/// on two consecutive iterates.
const CHECK_INTERVAL: usize = 10;

/// Dot product with four independent accumulators so it vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dense row-major working state for the multiplicative updates.
struct Solver {
    n: usize,
    p: usize,
    r: usize,
    seed: u64,
    x: Vec<f64>,
    w: Vec<f64>,
    h: Vec<f64>,
    /// One row of WH and of X / WH.
    wh_row: Vec<f64>,
    q_row: Vec<f64>,
    num_h: Vec<f64>,
    wsum: Vec<f64>,
    /// Σ x ln x - Σ x, the part of the loss that does not depend on WH.
    x_const: f64,
}

impl Solver {
    fn new(x: ArrayView2<'_, f64>, r: usize, seed: u64) -> Self {
        let (n, p) = x.dim();
        let x: Vec<f64> = x.iter().copied().collect();
        let max = x.iter().copied().fold(0.0_f64, f64::max);
        let scale = if max > 0.0 { max } else { 1.0 };
        let mut rng = seed::rng(seed);
        // (0, max]: 1 - U with U in [0, 1).
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| (1.0 - rng.random::<f64>()) * scale)
                .collect()
        };
        let w = draw(n * r);
        let h = draw(r * p);
        let x_const = x
            .iter()
            .map(|&v| if v > 0.0 { v * v.ln() - v } else { 0.0 })
            .sum();
        Self {
            n,
            p,
            r,
            seed,
            x,
            w,
            h,
            wh_row: vec![0.0; p],
            q_row: vec![0.0; p],
            num_h: vec![0.0; r * p],
            wsum: vec![0.0; r],
            x_const,
        }
    }

    /// Fill `wh_row` with row `i` of WH.
    #[inline]
    fn reconstruct_row(wh: &mut [f64], wi: &[f64], h: &[f64], p: usize) {
        wh.fill(0.0);
        for (a, &wia) in wi.iter().enumerate() {
            for (o, &hv) in wh.iter_mut().zip(&h[a * p..(a + 1) * p]) {
                *o += wia * hv;
            }
        }
    }

    /// Accumulate the H-update numerators for the current (W, H); returns
    /// the loss of that state when `with_loss`.
    fn accumulate_h(&mut self, with_loss: bool) -> Option<f64> {
        let (n, p, r) = (self.n, self.p, self.r);
        self.num_h.fill(0.0);
        self.wsum.fill(0.0);
        let mut cross = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            let wi = &self.w[i * r..(i + 1) * r];
            let xi = &self.x[i * p..(i + 1) * p];
            Self::reconstruct_row(&mut self.wh_row, wi, &self.h, p);
            if with_loss {
                for (&x, &y) in xi.iter().zip(&self.wh_row) {
                    if x > 0.0 {
                        cross += x * y.ln();
                    }
                    total += y;
                }
            }
            for ((q, &x), &y) in self.q_row.iter_mut().zip(xi).zip(&self.wh_row) {
                *q = x / (y + EPS);
            }
            for (a, &wia) in wi.iter().enumerate() {
                self.wsum[a] += wia;
                for (o, &qv) in self.num_h[a * p..(a + 1) * p].iter_mut().zip(&self.q_row) {
                    *o += wia * qv;
                }
            }
        }
        with_loss.then(|| (self.x_const - cross + total).max(0.0))
    }

    fn apply_h(&mut self) {
        let p = self.p;
        for a in 0..self.r {
            let d = self.wsum[a] + EPS;
            for (hv, &nv) in self.h[a * p..(a + 1) * p].iter_mut().zip(&self.num_h[a * p..(a + 1) * p]) {
                *hv *= nv / d;
            }
        }
    }

    fn update_w(&mut self) {
        let (n, p, r) = (self.n, self.p, self.r);
        let hsum: Vec<f64> = (0..r)
            .map(|a| self.h[a * p..(a + 1) * p].iter().sum::<f64>() + EPS)
            .collect();
        for i in 0..n {
            let xi = &self.x[i * p..(i + 1) * p];
            Self::reconstruct_row(&mut self.wh_row, &self.w[i * r..(i + 1) * r], &self.h, p);
            for ((q, &x), &y) in self.q_row.iter_mut().zip(xi).zip(&self.wh_row) {
                *q = x / (y + EPS);
            }
            for a in 0..r {
                let dot = dot(&self.q_row, &self.h[a * p..(a + 1) * p]);
                self.w[i * r + a] *= dot / hsum[a];
            }
        }
    }

    fn loss(&mut self) -> f64 {
        let (n, p, r) = (self.n, self.p, self.r);
        let mut cross = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            Self::reconstruct_row(&mut self.wh_row, &self.w[i * r..(i + 1) * r], &self.h, p);
            for (&x, &y) in self.x[i * p..(i + 1) * p].iter().zip(&self.wh_row) {
                if x > 0.0 {
                    cross += x * y.ln();
                }
                total += y;
            }
        }
        (self.x_const - cross + total).max(0.0)
    }

    fn run(mut self, config: &NmfConfig, mut trace: Option<&mut Vec<f64>>) -> NmfFit {
        let mut last: Option<(usize, f64)> = None;
        let mut k = 0;
        let loss = loop {
            if k == config.max_iterations {
                let loss = self.loss();
                if let Some(t) = trace.as_deref_mut() {
                    t.push(loss);
                }
                break loss;
            }
            let phase = k % CHECK_INTERVAL;
            let scheduled = phase == 0 || phase == CHECK_INTERVAL - 1;
            if let Some(loss) = self.accumulate_h(scheduled || trace.is_some()) {
                if k > 0 {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(loss);
                    }
                }
                if scheduled {
                    if let Some((prev_k, prev)) = last {
                        if prev_k + 1 == k && (prev - loss).abs() < config.tolerance * prev {
                            break loss;
                        }
                    }
                    last = Some((k, loss));
                }
            }
            self.apply_h();
            self.update_w();
            k += 1;
        };
        let w = Array2::from_shape_vec((self.n, self.r), self.w).expect("shape");
        let h = Array2::from_shape_vec((self.r, self.p), self.h).expect("shape");
        NmfFit {
            w,
            h,
            rank: self.r,
            loss,
            seed: self.seed,
            iterations: k,
            run: 0,
        }
    }
}
