//! Data containers, synthetic generation, and column transforms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{mean, Mat};
use crate::math;
use crate::rng::{self, streams};

/// Configuration of one synthetic regression instance: `n` observations on
/// `p` predictors sharing pairwise correlation `rho`, with the first `k`
/// coefficients equal to `s_star` and the rest zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s_star: f64,
    pub rho: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Parameter(format!("n must be >= 1, got {}", self.n)));
        }
        if self.p < 1 {
            return Err(Error::Parameter(format!("p must be >= 1, got {}", self.p)));
        }
        if self.k > self.p {
            return Err(Error::Parameter(format!(
                "k must be <= p, got k={} p={}",
                self.k, self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) || !self.rho.is_finite() {
            return Err(Error::Parameter(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if !self.s_star.is_finite() {
            return Err(Error::Parameter(format!("s_star must be finite")));
        }
        Ok(())
    }
}

/// A regression dataset: response `y`, design `x`, and (for synthetic data)
/// the generating coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Mat,
    pub truth: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub sim: Option<SimConfig>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Mat, truth: Option<Vec<f64>>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "y has length {} but X has {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if let Some(t) = &truth {
            if t.len() != x.ncols() {
                return Err(Error::Dimension(format!(
                    "truth has length {} but X has {} columns",
                    t.len(),
                    x.ncols()
                )));
            }
        }
        Ok(Dataset {
            y,
            x,
            truth,
            seed: None,
            sim: None,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Draw one design row with covariance R = n^{-1}[(1-rho) I + rho 11'].
///
/// R has the closed-form square root
/// n^{-1/2} [ sqrt(1-rho) I + p^{-1} (sqrt(1-rho+p rho) - sqrt(1-rho)) 11' ],
/// so a row costs O(p) with no p x p factorization.
fn fill_design_row<R: Rng>(rng: &mut R, n: usize, rho: f64, row: &mut [f64]) {
    let p = row.len();
    let a = math::sqrt(1.0 - rho);
    let b = (math::sqrt(1.0 - rho + p as f64 * rho) - a) / p as f64;
    let inv_sqrt_n = 1.0 / math::sqrt(n as f64);
    let mut sum = 0.0;
    for r in row.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *r = z;
        sum += z;
    }
    for r in row.iter_mut() {
        *r = inv_sqrt_n * (a * *r + b * sum);
    }
}

fn generate_with_streams(cfg: SimConfig, design_stream: u64, noise_stream: u64) -> Dataset {
    let SimConfig {
        n,
        p,
        k,
        s_star,
        rho,
        seed,
    } = cfg;
    let mut x = Mat::zeros(n, p);
    let mut design_rng = rng::stream(seed, design_stream);
    let mut row = vec![0.0; p];
    for i in 0..n {
        fill_design_row(&mut design_rng, n, rho, &mut row);
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    let mut truth = vec![0.0; p];
    for t in truth.iter_mut().take(k) {
        *t = s_star;
    }
    let mut y = x.matvec(&truth);
    let mut noise_rng = rng::stream(seed, noise_stream);
    for yi in y.iter_mut() {
        let e: f64 = noise_rng.sample(StandardNormal);
        *yi += e;
    }
    Dataset {
        y,
        x,
        truth: Some(truth),
        seed: Some(seed),
        sim: Some(cfg),
    }
}

/// Generate `y = X beta* + eps` with equicorrelated rows; fully reproducible
/// from `cfg.seed`. Design and noise use disjoint generator streams so the
/// noise realization does not depend on `p`.
pub fn generate_synthetic(cfg: SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    Ok(generate_with_streams(cfg, streams::DESIGN, streams::NOISE))
}

/// Fresh rows under the same design, for out-of-sample evaluation. Uses
/// generator streams disjoint from [`generate_synthetic`].
pub fn generate_test_set(cfg: SimConfig, n_test: usize) -> Result<Dataset> {
    let mut cfg = cfg;
    cfg.n = n_test;
    cfg.validate()?;
    Ok(generate_with_streams(
        cfg,
        streams::TEST_DESIGN,
        streams::TEST_NOISE,
    ))
}

/// Subtract the mean from `y` and from every column of `X`; `truth` is
/// untouched.
pub fn center(ds: &Dataset) -> Result<Dataset> {
    let n = ds.n();
    if n < 2 {
        return Err(Error::Parameter(format!(
            "centering needs n >= 2, got n={n}"
        )));
    }
    let mut out = ds.clone();
    let ybar = mean(&out.y);
    for yi in out.y.iter_mut() {
        *yi -= ybar;
    }
    for j in 0..out.p() {
        let col = out.x.col_mut(j);
        let m = mean(col);
        for v in col.iter_mut() {
            *v -= m;
        }
    }
    Ok(out)
}

/// Center and rescale `y` and every column of `X` to unit l2 norm.
pub fn standardize_unit_norm(ds: &Dataset) -> Result<Dataset> {
    let mut out = center(ds)?;
    for j in 0..out.p() {
        let col = out.x.col_mut(j);
        let norm = math::sqrt(col.iter().map(|v| v * v).sum());
        if norm <= 1e-300 {
            return Err(Error::DegenerateColumn(j));
        }
        for v in col.iter_mut() {
            *v /= norm;
        }
    }
    let ynorm = math::sqrt(out.y.iter().map(|v| v * v).sum());
    if ynorm <= 1e-300 {
        return Err(Error::Parameter(format!("response is constant")));
    }
    for v in out.y.iter_mut() {
        *v /= ynorm;
    }
    Ok(out)
}
