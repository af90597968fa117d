//! Everything that picks one estimate: posterior benchmarking, the median
//! probability model, adaptive-threshold model paths, and the local false
//! discovery rate rule.
//!
//! Posterior benchmarking measures each candidate's squared prediction error
//! `E_g = ||X beta - X b_g||^2` draw by draw and compares it against the
//! benchmark `E = (1/S) sum_s ||X beta^(s) - X bbar||^2`, the error of the
//! draw-average coefficient vector `bbar` (which minimizes the Monte Carlo
//! posterior expected error, making the decomposition
//! `mean(E_g) = E + ||X bbar - X b_g||^2` an exact identity on the shared
//! draw set). The rule picks the sparsest candidate whose central credible
//! interval of `E_g` contains `E`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, Cholesky, Mat};
use crate::spikeslab::SsDraws;
use crate::weights::CoefDraws;
use crate::wlasso::SolutionPath;

pub const DEFAULT_COVERAGE: f64 = 0.9;
pub const DEFAULT_FDR_THRESHOLD: f64 = 0.10;

/// Threshold recorded for the empty entry of an adaptive-threshold path;
/// sits above every inclusion probability.
pub const THRESHOLD_ABOVE_ALL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    Benchmark,
    Fdr,
}

/// Anything indexed by a sparsity tuning value that yields one estimate per
/// grid entry: weighted-lasso paths and adaptive-threshold model paths.
pub trait EstimatePath {
    fn len(&self) -> usize;
    /// Tuning value of entry `g` (a penalty level or a PIP threshold).
    fn tuning(&self, g: usize) -> f64;
    fn estimate(&self, g: usize) -> &[f64];
    fn size(&self, g: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EstimatePath for SolutionPath {
    fn len(&self) -> usize {
        self.lambdas.len()
    }
    fn tuning(&self, g: usize) -> f64 {
        self.lambdas[g]
    }
    fn estimate(&self, g: usize) -> &[f64] {
        SolutionPath::estimate(self, g)
    }
    fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }
}

/// Nested models obtained by thresholding inclusion probabilities at every
/// attained level, each fitted with its conditional posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ApmPath {
    /// All coordinates ordered by decreasing PIP (ties: larger |post mean|,
    /// then lower index).
    pub order: Vec<usize>,
    /// Model sizes per entry; entry 0 is the empty model.
    pub sizes: Vec<usize>,
    /// PIP of the last variable included per entry (the implied threshold).
    pub thresholds: Vec<f64>,
    /// Conditional posterior means; column g belongs to entry g.
    pub estimates: Mat,
    /// Variables dropped because their inclusion made the model block
    /// singular (exact collinearity with earlier picks).
    pub skipped: Vec<usize>,
}

impl ApmPath {
    /// Support of entry `g` (the first `sizes[g]` coordinates in order,
    /// after skips).
    pub fn support(&self, g: usize) -> Vec<usize> {
        self.estimate_support(g)
    }

    fn estimate_support(&self, g: usize) -> Vec<usize> {
        self.estimates
            .col(g)
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| (b != 0.0).then_some(j))
            .collect()
    }
}

impl EstimatePath for ApmPath {
    fn len(&self) -> usize {
        self.sizes.len()
    }
    fn tuning(&self, g: usize) -> f64 {
        self.thresholds[g]
    }
    fn estimate(&self, g: usize) -> &[f64] {
        self.estimates.col(g)
    }
    fn size(&self, g: usize) -> usize {
        self.sizes[g]
    }
}

/// Per-entry prediction-error summary inside a [`BenchmarkReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct EntrySummary {
    pub index: usize,
    pub tuning: f64,
    pub size: usize,
    pub pred_mean: Option<f64>,
    pub pred_qlo: Option<f64>,
    pub pred_qhi: Option<f64>,
    pub local_fdr: Option<f64>,
}

/// Outcome of a selection rule applied to a path.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rule: SelectionRule,
    /// The posterior benchmark `E`; absent under the FDR rule.
    pub benchmark: Option<f64>,
    pub coverage: Option<f64>,
    pub entries: Vec<EntrySummary>,
    /// Index into the path; `None` when the FDR rule selects the empty model
    /// off-path.
    pub chosen_index: Option<usize>,
    pub chosen_size: usize,
    pub chosen_estimate: Vec<f64>,
    /// Set when no entry qualified and the densest entry was returned.
    pub fallback_dense: bool,
}

/// Cached per-draw fitted values `X beta^(s)` shared by the benchmark and
/// all per-entry summaries.
pub struct PredictionSpread {
    /// n x S; column s is X beta^(s).
    fits: Mat,
    /// X bbar with bbar the draw average (equals the column mean of `fits`).
    fit_mean: Vec<f64>,
    /// E = (1/S) sum_s ||fits_s - fit_mean||^2.
    benchmark: f64,
}

impl PredictionSpread {
    pub fn new<D: CoefDraws>(draws: &D, x: &Mat) -> Self {
        let n = x.nrows();
        let s = draws.num_draws();
        let mut fits = Mat::zeros(n, s);
        for si in 0..s {
            let col = fits.col_mut(si);
            for (j, &bj) in draws.draw(si).iter().enumerate() {
                if bj != 0.0 {
                    axpy(bj, x.col(j), col);
                }
            }
        }
        let mut fit_mean = vec![0.0; n];
        for si in 0..s {
            axpy(1.0, fits.col(si), &mut fit_mean);
        }
        for v in fit_mean.iter_mut() {
            *v /= s as f64;
        }
        let mut benchmark = 0.0;
        for si in 0..s {
            let col = fits.col(si);
            let mut d = 0.0;
            for i in 0..n {
                let e = col[i] - fit_mean[i];
                d += e * e;
            }
            benchmark += d;
        }
        benchmark /= s as f64;
        PredictionSpread {
            fits,
            fit_mean,
            benchmark,
        }
    }

    pub fn benchmark(&self) -> f64 {
        self.benchmark
    }

    /// Fitted values of the draw-average coefficient vector.
    pub fn fit_mean(&self) -> &[f64] {
        &self.fit_mean
    }

    pub fn num_draws(&self) -> usize {
        self.fits.ncols()
    }

    /// Squared prediction error of `estimate` against every draw, plus the
    /// exact mean via the bias-variance identity.
    fn errors(&self, estimate: &[f64], x: &Mat) -> Vec<f64> {
        let n = x.nrows();
        let mut xb = vec![0.0; n];
        for (j, &bj) in estimate.iter().enumerate() {
            if bj != 0.0 {
                axpy(bj, x.col(j), &mut xb);
            }
        }
        let s = self.fits.ncols();
        let mut errs = Vec::with_capacity(s);
        for si in 0..s {
            let col = self.fits.col(si);
            let mut d = 0.0;
            for i in 0..n {
                let e = col[i] - xb[i];
                d += e * e;
            }
            errs.push(d);
        }
        errs
    }

    fn summarize(&self, estimate: &[f64], x: &Mat, coverage: f64) -> (f64, f64, f64) {
        let mut errs = self.errors(estimate, x);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        errs.sort_by(|a, b| a.total_cmp(b));
        let alpha = (1.0 - coverage) / 2.0;
        let qlo = quantile_sorted(&errs, alpha);
        let qhi = quantile_sorted(&errs, 1.0 - alpha);
        (mean, qlo, qhi)
    }
}

/// Interpolated empirical quantile of an ascending slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
    }
}

/// The posterior benchmark `E`: Monte Carlo posterior expected squared
/// prediction error of the draw-average coefficient vector.
pub fn benchmark<D: CoefDraws>(draws: &D, x: &Mat) -> f64 {
    PredictionSpread::new(draws, x).benchmark
}

/// Mean and central-coverage quantiles of `||X beta^(s) - X estimate||^2`
/// over the draws.
pub fn prediction_error_summary<D: CoefDraws>(
    estimate: &[f64],
    draws: &D,
    x: &Mat,
    coverage: f64,
) -> Result<(f64, f64, f64)> {
    if estimate.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "estimate has length {}, X has {} columns",
            estimate.len(),
            x.ncols()
        )));
    }
    if draws.num_draws() == 0 {
        return Err(Error::Parameter(format!("no draws")));
    }
    let spread = PredictionSpread::new(draws, x);
    Ok(spread.summarize(estimate, x, coverage))
}

/// Posterior benchmarking: the sparsest entry whose credible interval of
/// prediction error contains the benchmark; falls back to the densest entry
/// (flagged) when none qualifies.
pub fn select_benchmark<P: EstimatePath, D: CoefDraws>(
    path: &P,
    draws: &D,
    x: &Mat,
    coverage: f64,
) -> Result<BenchmarkReport> {
    if path.is_empty() {
        return Err(Error::Parameter(format!("empty path")));
    }
    if !(0.0 < coverage && coverage < 1.0) {
        return Err(Error::Parameter(format!(
            "coverage must be in (0,1), got {coverage}"
        )));
    }
    let spread = PredictionSpread::new(draws, x);
    select_benchmark_with_spread(path, &spread, x, coverage)
}

/// [`select_benchmark`] against a prebuilt draw cache, so several paths can
/// share one posterior.
pub fn select_benchmark_with_spread<P: EstimatePath>(
    path: &P,
    spread: &PredictionSpread,
    x: &Mat,
    coverage: f64,
) -> Result<BenchmarkReport> {
    let bench = spread.benchmark();
    let mut entries = Vec::with_capacity(path.len());
    for g in 0..path.len() {
        let (mean, qlo, qhi) = spread.summarize(path.estimate(g), x, coverage);
        entries.push(EntrySummary {
            index: g,
            tuning: path.tuning(g),
            size: path.size(g),
            pred_mean: Some(mean),
            pred_qlo: Some(qlo),
            pred_qhi: Some(qhi),
            local_fdr: None,
        });
    }
    // Sparsest qualifying entry; ties resolved toward the earlier grid index
    // (more shrinkage at equal size). Entries are scanned in grid order.
    let mut chosen: Option<usize> = None;
    for e in &entries {
        let qualifies = e.pred_qlo.unwrap() <= bench && bench <= e.pred_qhi.unwrap();
        if qualifies {
            let better = match chosen {
                None => true,
                Some(c) => e.size < entries[c].size,
            };
            if better {
                chosen = Some(e.index);
            }
        }
    }
    let fallback = chosen.is_none();
    let chosen_index = match chosen {
        Some(c) => c,
        None => {
            // Densest entry, ties toward the earlier index.
            let mut best = 0usize;
            for e in &entries {
                if e.size > entries[best].size {
                    best = e.index;
                }
            }
            best
        }
    };
    Ok(BenchmarkReport {
        rule: SelectionRule::Benchmark,
        benchmark: Some(bench),
        coverage: Some(coverage),
        entries,
        chosen_index: Some(chosen_index),
        chosen_size: path.size(chosen_index),
        chosen_estimate: path.estimate(chosen_index).to_vec(),
        fallback_dense: fallback,
    })
}

/// The median probability model: coordinates with PIP >= 1/2.
pub fn mpm(pip: &[f64]) -> Vec<bool> {
    pip.iter().map(|&q| q >= 0.5).collect()
}

/// Nested model path by descending PIP with conditional-posterior-mean
/// estimates. `max_size` caps the densest model; the cap also never exceeds
/// what the g-prior allows (n - 1 variables).
pub fn apm_path(draws: &SsDraws, ds: &Dataset, max_size: Option<usize>) -> Result<ApmPath> {
    let p = ds.p();
    let n = ds.n();
    if draws.pip.len() != p {
        return Err(Error::Dimension(format!(
            "pip has length {}, X has {} columns",
            draws.pip.len(),
            p
        )));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        draws.pip[b]
            .total_cmp(&draws.pip[a])
            .then(libm::fabs(draws.post_mean[b]).total_cmp(&libm::fabs(draws.post_mean[a])))
            .then(a.cmp(&b))
    });
    let cap = max_size
        .unwrap_or(p)
        .min(p)
        .min(n.saturating_sub(1));

    // Incrementally grown Cholesky of the support Gram block.
    let mut chol = Cholesky::empty();
    let mut support: Vec<usize> = Vec::new();
    let mut c: Vec<f64> = Vec::new();
    let n0 = n as f64 / (1.0 + n as f64);

    let mut sizes = vec![0usize];
    let mut thresholds = vec![THRESHOLD_ABOVE_ALL];
    let mut estimate_cols: Vec<Vec<f64>> = vec![vec![0.0; p]];
    let mut skipped = Vec::new();

    for &j in order.iter() {
        if support.len() >= cap {
            break;
        }
        let s_vec: Vec<f64> = support.iter().map(|&i| crate::linalg::dot(ds.x.col(i), ds.x.col(j))).collect();
        let mut t = s_vec;
        chol.solve_lower(&mut t);
        let d = crate::linalg::dot(ds.x.col(j), ds.x.col(j));
        match chol.extend(&t, d, 1e-10 * d.max(1.0)) {
            None => {
                skipped.push(j);
                continue;
            }
            Some(_) => {}
        }
        support.push(j);
        c.push(crate::linalg::dot(ds.x.col(j), &ds.y));
        // beta_tilde = (X_g'X_g)^{-1} c, then scale by n0.
        let mut beta_tilde = chol.forward(&c);
        chol.solve_upper(&mut beta_tilde);
        let mut est = vec![0.0; p];
        for (&jj, &b) in support.iter().zip(beta_tilde.iter()) {
            est[jj] = n0 * b;
        }
        sizes.push(support.len());
        thresholds.push(draws.pip[j]);
        estimate_cols.push(est);
    }

    let mut estimates = Mat::zeros(p, estimate_cols.len());
    for (g, col) in estimate_cols.iter().enumerate() {
        estimates.col_mut(g).copy_from_slice(col);
    }
    Ok(ApmPath {
        order,
        sizes,
        thresholds,
        estimates,
        skipped,
    })
}

/// Posterior-expected false discovery proportion of a sparse estimate.
pub fn local_fdr(estimate: &[f64], pip: &[f64]) -> f64 {
    debug_assert_eq!(estimate.len(), pip.len());
    let mut selected = 0usize;
    let mut acc = 0.0;
    for (&b, &q) in estimate.iter().zip(pip.iter()) {
        if b != 0.0 {
            selected += 1;
            acc += 1.0 - q;
        }
    }
    acc / (selected.max(1) as f64)
}

/// Densest path entry whose local false discovery rate stays at or below
/// `threshold`; the empty model when none does.
pub fn select_fdr<P: EstimatePath>(
    path: &P,
    pip: &[f64],
    threshold: f64,
) -> Result<BenchmarkReport> {
    if path.is_empty() {
        return Err(Error::Parameter(format!("empty path")));
    }
    let p = path.estimate(0).len();
    if pip.len() != p {
        return Err(Error::Dimension(format!(
            "pip has length {}, estimates have length {p}",
            pip.len()
        )));
    }
    let mut entries = Vec::with_capacity(path.len());
    for g in 0..path.len() {
        entries.push(EntrySummary {
            index: g,
            tuning: path.tuning(g),
            size: path.size(g),
            pred_mean: None,
            pred_qlo: None,
            pred_qhi: None,
            local_fdr: Some(local_fdr(path.estimate(g), pip)),
        });
    }
    // Densest qualifying entry; ties toward the later grid index (the less
    // penalized side).
    let mut chosen: Option<usize> = None;
    for e in &entries {
        if e.local_fdr.unwrap() <= threshold {
            let better = match chosen {
                None => true,
                Some(c) => e.size >= entries[c].size,
            };
            if better {
                chosen = Some(e.index);
            }
        }
    }
    match chosen {
        Some(g) => Ok(BenchmarkReport {
            rule: SelectionRule::Fdr,
            benchmark: None,
            coverage: None,
            chosen_size: path.size(g),
            chosen_estimate: path.estimate(g).to_vec(),
            chosen_index: Some(g),
            entries,
            fallback_dense: false,
        }),
        None => Ok(BenchmarkReport {
            rule: SelectionRule::Fdr,
            benchmark: None,
            coverage: None,
            chosen_size: 0,
            chosen_estimate: vec![0.0; p],
            chosen_index: None,
            entries,
            fallback_dense: false,
        }),
    }
}
