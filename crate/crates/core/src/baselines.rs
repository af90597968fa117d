//! Regularized least squares comparators: lasso tuned by k-fold
//! cross-validation and the iteratively reweighted l1 algorithm.
//!
//! Both run on the raw response and share the weighted-lasso kernel from
//! [`crate::wlasso`], so a lasso path here coincides with a unit-weight path
//! there at matched penalty levels.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::math;
use crate::rng::{self, streams};
use crate::weights::{unit_weights, PenaltyKind, WeightVector};
use crate::wlasso::{self, SolutionPath, TargetKind};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_ITERS: usize = 8;
/// Floor of the adaptive stabilizer in reweighting iterations.
pub const EPS_FLOOR: f64 = 1e-3;

/// Cross-validated lasso fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda_grid: Vec<f64>,
    /// Mean held-out MSE per grid point.
    pub cv_mse: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_lambda: f64,
    pub estimate: Vec<f64>,
    pub fold_assignments: Vec<usize>,
    /// Full-data path over the same grid (its `chosen_index` entry is the
    /// estimate).
    pub full_path: SolutionPath,
}

/// Iteratively reweighted l1 fit.
#[derive(Debug, Clone, PartialEq)]
pub struct IterL1Result {
    pub estimate: Vec<f64>,
    /// Stabilizer used at each reweighting iteration (empty for iters = 1).
    pub eps_values: Vec<f64>,
    /// Penalty level chosen by cross-validation at each iteration.
    pub chosen_lambdas: Vec<f64>,
    /// Full-data path of the final iteration.
    pub final_path: SolutionPath,
}

/// Deterministic fold assignment: shuffled indices dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignments(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, streams::FOLDS);
    idx.shuffle(&mut rng);
    let mut assign = vec![0usize; n];
    for (pos, &i) in idx.iter().enumerate() {
        assign[i] = pos % folds;
    }
    assign
}

fn gather_rows(x: &Mat, y: &[f64], keep: &[usize]) -> (Mat, Vec<f64>) {
    let p = x.ncols();
    let mut xs = Mat::zeros(keep.len(), p);
    for j in 0..p {
        let src = x.col(j);
        let dst = xs.col_mut(j);
        for (r, &i) in keep.iter().enumerate() {
            dst[r] = src[i];
        }
    }
    let ys = keep.iter().map(|&i| y[i]).collect();
    (xs, ys)
}

fn held_out_mse(x: &Mat, y: &[f64], rows: &[usize], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &i in rows {
        let mut fit = 0.0;
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                fit += x.col(j)[i] * bj;
            }
        }
        let e = y[i] - fit;
        acc += e * e;
    }
    acc / rows.len().max(1) as f64
}

/// Cross-validate a weighted-lasso path over a shared grid anchored at the
/// full-data lambda_max for these weights, then refit on the full data.
fn cv_weighted(
    ds: &Dataset,
    w: &WeightVector,
    folds: usize,
    assignments: &[usize],
    grid: usize,
) -> Result<CvResult> {
    let n = ds.n();
    let lam_max = wlasso::lambda_max(&ds.y, &ds.x, w)? * (1.0 + 1e-9);
    // The usual floor conventions for cross-validation grids, judged by the
    // fold training size; the CV minimum sits in the interior, so nothing is
    // gained by pushing the grid toward the interpolation regime.
    let n_train_min = n - n.div_ceil(folds);
    let floor = if ds.p() >= n_train_min {
        1e-2
    } else {
        wlasso::GRID_FLOOR
    };
    let lambdas = wlasso::log_grid_with_floor(lam_max, grid, floor);

    let mut cv_mse = vec![0.0; grid];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| assignments[i] != fold).collect();
        let held: Vec<usize> = (0..n).filter(|&i| assignments[i] == fold).collect();
        let (xt, yt) = gather_rows(&ds.x, &ds.y, &train);
        let spread = yt.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - yt.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread == 0.0 {
            return Err(Error::Parameter(format!(
                "fold {fold}: training response is constant"
            )));
        }
        let path = wlasso::solve_on_grid(&yt, &xt, w, TargetKind::RawY, &lambdas)?;
        // A path truncated at the training rank ceiling has saturated; its
        // last entry stands in for the deeper grid points.
        for (g, mse) in cv_mse.iter_mut().enumerate() {
            let est = path.estimate(g.min(path.len() - 1));
            *mse += held_out_mse(&ds.x, &ds.y, &held, est) / folds as f64;
        }
    }

    let mut chosen_index = 0usize;
    for g in 1..grid {
        if cv_mse[g] < cv_mse[chosen_index] {
            chosen_index = g;
        }
    }
    if !cv_mse.iter().all(|v| v.is_finite()) {
        return Err(Error::Convergence(String::from(
            "cross-validation produced non-finite errors",
        )));
    }
    let full_path = wlasso::solve_on_grid(&ds.y, &ds.x, w, TargetKind::RawY, &lambdas)?;
    let est_index = chosen_index.min(full_path.len() - 1);
    Ok(CvResult {
        chosen_lambda: lambdas[chosen_index],
        lambda_grid: lambdas,
        cv_mse,
        chosen_index,
        estimate: full_path.estimate(est_index).to_vec(),
        fold_assignments: assignments.to_vec(),
        full_path,
    })
}

/// Plain lasso with `folds`-fold cross-validation on the raw response.
pub fn lasso_cv(ds: &Dataset, folds: usize, seed: u64) -> Result<CvResult> {
    let n = ds.n();
    if folds < 2 || folds > n {
        return Err(Error::Parameter(format!(
            "folds must lie in [2, n], got {folds} with n = {n}"
        )));
    }
    let assignments = fold_assignments(n, folds, seed);
    cv_weighted(
        ds,
        &unit_weights(ds.p()),
        folds,
        &assignments,
        wlasso::DEFAULT_GRID,
    )
}

/// Stability number for the reweighting iterations: the m-th largest entry
/// magnitude of the previous iterate, floored at `EPS_FLOOR`, with
/// m = ceil(n / (4 log(p/n))) for p > n and m = ceil(n/4) otherwise.
fn adaptive_eps(prev: &[f64], n: usize, p: usize) -> f64 {
    let m = if p > n {
        let denom = 4.0 * math::ln(p as f64 / n as f64);
        math::ceil(n as f64 / denom) as usize
    } else {
        math::ceil(n as f64 / 4.0) as usize
    }
    .clamp(1, p);
    let mut mags: Vec<f64> = prev.iter().map(|&b| math::abs(b)).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags[m - 1].max(EPS_FLOOR)
}

/// Iteratively reweighted l1: a cross-validated lasso start followed by
/// `iters - 1` reweighted solves with weights `1/(|b_prev| + eps_t)`, each
/// re-tuned by cross-validation on the same folds.
pub fn iterative_l1(ds: &Dataset, iters: usize, folds: usize, seed: u64) -> Result<IterL1Result> {
    if iters < 1 {
        return Err(Error::Parameter(format!("iters must be >= 1, got {iters}")));
    }
    let n = ds.n();
    let p = ds.p();
    if folds < 2 || folds > n {
        return Err(Error::Parameter(format!(
            "folds must lie in [2, n], got {folds} with n = {n}"
        )));
    }
    let assignments = fold_assignments(n, folds, seed);
    let first = cv_weighted(
        ds,
        &unit_weights(p),
        folds,
        &assignments,
        wlasso::DEFAULT_GRID,
    )
    .map_err(|e| Error::Convergence(format!("iteration 0: {e}")))?;
    let mut estimate = first.estimate.clone();
    let mut final_path = first.full_path;
    let mut chosen_lambdas = vec![first.chosen_lambda];
    let mut eps_values = Vec::new();

    for it in 1..iters {
        let eps = adaptive_eps(&estimate, n, p);
        let w = WeightVector {
            w: estimate.iter().map(|&b| 1.0 / (math::abs(b) + eps)).collect(),
            kind: PenaltyKind::Is,
            eps: Some(eps),
        };
        debug_assert!(w.w.iter().all(|&v| v.is_finite() && v > 0.0));
        let fit = cv_weighted(ds, &w, folds, &assignments, wlasso::DEFAULT_GRID)
            .map_err(|e| Error::Convergence(format!("iteration {it}: {e}")))?;
        estimate = fit.estimate.clone();
        chosen_lambdas.push(fit.chosen_lambda);
        eps_values.push(eps);
        final_path = fit.full_path;
    }
    Ok(IterL1Result {
        estimate,
        eps_values,
        chosen_lambdas,
        final_path,
    })
}
