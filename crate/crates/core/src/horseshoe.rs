//! Gibbs sampler for the horseshoe prior:
//!
//! ```text
//! beta_j | eta_j, tau, sigma2 ~ N(0, sigma2 eta_j^2 tau^2)
//! eta_j ~ C+(0, 1),  tau ~ C+(0, 1),  p(sigma2) ~ 1/sigma2
//! ```
//!
//! The half-Cauchy scales are represented by the two-level inverse-gamma
//! mixture (auxiliaries nu_j and xi), which makes every conditional an
//! inverse gamma. The coefficient block is drawn exactly from its
//! p-dimensional normal conditional. When p > n this goes through the n x n
//! system
//!
//! ```text
//! u ~ N(0, D),  delta ~ N(0, I_n),  D = sigma2 tau^2 diag(eta^2)
//! (X D X'/sigma2 + I) w = y/sigma - X u/sigma - delta
//! beta = u + D X' w / sigma
//! ```
//!
//! so a sweep costs O(n^2 p) instead of O(p^3); when p <= n the p x p
//! precision system is factored directly against a precomputed Gram matrix.
//! Both routes draw exactly from the same conditional law.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Cholesky, Mat};
use crate::math;
use crate::rng::{self, streams};

/// Default number of retained draws.
pub const DEFAULT_DRAWS: usize = 5000;
/// Default number of discarded warm-up sweeps.
pub const DEFAULT_BURNIN: usize = 1000;

/// Retained horseshoe posterior draws. `beta` stores draw `s` in column `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsDraws {
    pub beta: Mat,
    pub sigma2: Vec<f64>,
    pub tau: Vec<f64>,
    /// Local scales per draw (p x S), kept only on request.
    pub eta: Option<Mat>,
    /// Column average of `beta`.
    pub post_mean: Vec<f64>,
    pub draws: usize,
    pub burnin: usize,
    pub seed: u64,
}

impl HsDraws {
    pub fn p(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_draws(&self) -> usize {
        self.draws
    }

    pub fn draw(&self, s: usize) -> &[f64] {
        self.beta.col(s)
    }
}

/// Column average of the beta draws, recomputed from scratch.
pub fn posterior_mean(d: &HsDraws) -> Vec<f64> {
    let p = d.p();
    let mut m = vec![0.0; p];
    for s in 0..d.draws {
        for (mj, &b) in m.iter_mut().zip(d.draw(s).iter()) {
            *mj += b;
        }
    }
    for v in m.iter_mut() {
        *v /= d.draws as f64;
    }
    m
}

fn inv_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
    rate / g.sample(rng).max(f64::MIN_POSITIVE)
}

/// Accumulate `m += coef_k x_k x_k'` (lower triangle) for a chunk of up to
/// four columns at once; chunking cuts passes over the n^2 buffer, which is
/// what this sampler's runtime is made of.
fn accumulate_outer_products(m: &mut Mat, x: &Mat, coefs: &[f64], cols: &[usize]) {
    let n = x.nrows();
    match cols.len() {
        4 => {
            let (c0, c1, c2, c3) = (cols[0], cols[1], cols[2], cols[3]);
            let (a0, a1, a2, a3) = (coefs[0], coefs[1], coefs[2], coefs[3]);
            for c in 0..n {
                let x0 = x.col(c0)[c] * a0;
                let x1 = x.col(c1)[c] * a1;
                let x2 = x.col(c2)[c] * a2;
                let x3 = x.col(c3)[c] * a3;
                let (s0, s1, s2, s3) = (&x.col(c0)[c..], &x.col(c1)[c..], &x.col(c2)[c..], &x.col(c3)[c..]);
                let dst = &mut m.col_mut(c)[c..];
                for i in 0..dst.len() {
                    dst[i] += x0 * s0[i] + x1 * s1[i] + x2 * s2[i] + x3 * s3[i];
                }
            }
        }
        _ => {
            for (idx, &j) in cols.iter().enumerate() {
                let a = coefs[idx];
                for c in 0..n {
                    let xc = x.col(j)[c] * a;
                    let src = &x.col(j)[c..];
                    let dst = &mut m.col_mut(c)[c..];
                    for i in 0..dst.len() {
                        dst[i] += xc * src[i];
                    }
                }
            }
        }
    }
}

/// Exact draw from `beta | eta, tau, sigma2, y` through the p x p precision
/// system; `m` is workspace, `beta` receives the draw.
#[allow(clippy::too_many_arguments)]
fn draw_beta_tall<R: Rng>(
    gram: &Mat,
    xty: &[f64],
    eta2: &[f64],
    tau2: f64,
    sigma2: f64,
    rng: &mut R,
    m: &mut Mat,
    beta: &mut [f64],
) -> core::result::Result<(), String> {
    let p = gram.ncols();
    for j in 0..p {
        let src = gram.col(j);
        let dst = m.col_mut(j);
        dst.copy_from_slice(src);
        dst[j] += 1.0 / (tau2 * eta2[j]);
    }
    let chol =
        Cholesky::factor(m, 0.0).ok_or_else(|| String::from("p x p precision factorization"))?;
    beta.copy_from_slice(xty);
    chol.solve(beta);
    let mut z: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    chol.solve_upper(&mut z);
    let sigma = math::sqrt(sigma2);
    for (bj, zj) in beta.iter_mut().zip(z.iter()) {
        *bj += sigma * zj;
    }
    Ok(())
}

/// Exact draw from the same conditional through the n x n identity; used
/// when p > n. `m` and `coefs` are workspace, `beta` receives the draw.
#[allow(clippy::too_many_arguments)]
fn draw_beta_wide<R: Rng>(
    x: &Mat,
    y: &[f64],
    eta2: &[f64],
    tau2: f64,
    sigma2: f64,
    rng: &mut R,
    m: &mut Mat,
    coefs: &mut [f64; 4],
    beta: &mut [f64],
) -> core::result::Result<(), String> {
    let n = x.nrows();
    let p = x.ncols();
    let sigma = math::sqrt(sigma2);
    // M = I + tau^2 sum_j eta_j^2 x_j x_j'  (sigma2 cancels inside).
    for c in 0..n {
        for v in m.col_mut(c).iter_mut() {
            *v = 0.0;
        }
    }
    let mut j = 0;
    while j + 4 <= p {
        for k in 0..4 {
            coefs[k] = tau2 * eta2[j + k];
        }
        accumulate_outer_products(m, x, coefs, &[j, j + 1, j + 2, j + 3]);
        j += 4;
    }
    while j < p {
        coefs[0] = tau2 * eta2[j];
        accumulate_outer_products(m, x, &coefs[..1], &[j]);
        j += 1;
    }
    for c in 0..n {
        m[(c, c)] += 1.0;
    }
    let chol =
        Cholesky::factor(m, 0.0).ok_or_else(|| String::from("n x n system factorization"))?;

    // u ~ N(0, D); D_jj = sigma2 tau2 eta2_j.
    let tau_sig = sigma * math::sqrt(tau2);
    for (bj, &e2) in beta.iter_mut().zip(eta2.iter()) {
        let z: f64 = rng.sample(StandardNormal);
        *bj = tau_sig * math::sqrt(e2) * z; // reuse beta as u
    }
    // rhs = y/sigma - X u / sigma - delta
    let mut rhs = vec![0.0f64; n];
    for (i, r) in rhs.iter_mut().enumerate() {
        let delta: f64 = rng.sample(StandardNormal);
        *r = y[i] / sigma - delta;
    }
    for (jj, &uj) in beta.iter().enumerate() {
        if uj != 0.0 {
            axpy(-uj / sigma, x.col(jj), &mut rhs);
        }
    }
    chol.solve(&mut rhs); // rhs <- w
    // beta = u + D X' w / sigma
    for (jj, bj) in beta.iter_mut().enumerate() {
        let xw = dot(x.col(jj), &rhs);
        *bj += sigma * tau2 * eta2[jj] * xw;
    }
    Ok(())
}

/// Repeated exact draws from `beta | eta, tau, sigma2, y` with the scales
/// frozen, through either route. Exposed so the conditional law can be
/// verified against its analytic mean and covariance.
pub fn conditional_beta_draws(
    ds: &Dataset,
    eta2: &[f64],
    tau2: f64,
    sigma2: f64,
    seed: u64,
    count: usize,
    wide_route: bool,
) -> Result<Mat> {
    let p = ds.p();
    let n = ds.n();
    if eta2.len() != p {
        return Err(Error::Dimension(String::from("eta2 length != p")));
    }
    let mut rng = rng::stream(seed, streams::SAMPLER);
    let mut out = Mat::zeros(p, count);
    let mut beta = vec![0.0; p];
    if wide_route {
        let mut m = Mat::zeros(n, n);
        let mut coefs = [0.0f64; 4];
        for s in 0..count {
            draw_beta_wide(
                &ds.x, &ds.y, eta2, tau2, sigma2, &mut rng, &mut m, &mut coefs, &mut beta,
            )
            .map_err(|what| Error::NonFinite { iteration: s, what })?;
            out.col_mut(s).copy_from_slice(&beta);
        }
    } else {
        let gram = ds.x.gram();
        let xty = ds.x.tr_matvec(&ds.y);
        let mut m = Mat::zeros(p, p);
        for s in 0..count {
            draw_beta_tall(
                &gram, &xty, eta2, tau2, sigma2, &mut rng, &mut m, &mut beta,
            )
            .map_err(|what| Error::NonFinite { iteration: s, what })?;
            out.col_mut(s).copy_from_slice(&beta);
        }
    }
    Ok(out)
}

/// Run the blocked Gibbs sampler; deterministic under `seed`.
pub fn sample_hs(ds: &Dataset, draws: usize, burnin: usize, seed: u64) -> Result<HsDraws> {
    sample_hs_with_options(ds, draws, burnin, seed, false)
}

/// [`sample_hs`] optionally retaining the local-scale draws.
pub fn sample_hs_with_options(
    ds: &Dataset,
    draws: usize,
    burnin: usize,
    seed: u64,
    keep_eta: bool,
) -> Result<HsDraws> {
    if draws < 1 {
        return Err(Error::Parameter(String::from("draws must be >= 1")));
    }
    let x = &ds.x;
    let y = &ds.y;
    let n = ds.n();
    let p = ds.p();
    let mut rng = rng::stream(seed, streams::SAMPLER);

    let mut eta2 = vec![1.0f64; p];
    let mut tau2 = 1.0f64;
    let mut sigma2 = 1.0f64;

    let mut beta_out = Mat::zeros(p, draws);
    let mut sigma2_out = vec![0.0; draws];
    let mut tau_out = vec![0.0; draws];
    let mut eta_out = keep_eta.then(|| Mat::zeros(p, draws));
    let mut mean_accum = vec![0.0f64; p];

    let tall = p <= n;
    // p x p route: Gram and X'y are constant across sweeps.
    let (gram, xty) = if tall {
        (Some(x.gram()), Some(x.tr_matvec(y)))
    } else {
        (None, None)
    };
    let mut m = if tall {
        Mat::zeros(p, p)
    } else {
        Mat::zeros(n, n)
    };
    let mut beta = vec![0.0f64; p];
    let mut coefs = [0.0f64; 4];

    let total = burnin + draws;
    for sweep in 0..total {
        // --- beta | eta, tau, sigma2, y ------------------------------------
        if tall {
            draw_beta_tall(
                gram.as_ref().unwrap(),
                xty.as_ref().unwrap(),
                &eta2,
                tau2,
                sigma2,
                &mut rng,
                &mut m,
                &mut beta,
            )
            .map_err(|what| Error::NonFinite {
                iteration: sweep,
                what,
            })?;
        } else {
            draw_beta_wide(
                x,
                y,
                &eta2,
                tau2,
                sigma2,
                &mut rng,
                &mut m,
                &mut coefs,
                &mut beta,
            )
            .map_err(|what| Error::NonFinite {
                iteration: sweep,
                what,
            })?;
        }

        // --- sigma2 | beta, eta, tau, y ------------------------------------
        let mut resid = y.clone();
        for (j, &bj) in beta.iter().enumerate() {
            if bj != 0.0 {
                axpy(-bj, x.col(j), &mut resid);
            }
        }
        let ssr = dot(&resid, &resid);
        let mut prior_quad = 0.0;
        for (bj, &e2) in beta.iter().zip(eta2.iter()) {
            prior_quad += bj * bj / e2;
        }
        prior_quad /= tau2;
        sigma2 = inv_gamma(&mut rng, (n + p) as f64 / 2.0, (ssr + prior_quad) / 2.0);

        // --- local scales --------------------------------------------------
        let mut scaled_sq_sum = 0.0;
        for j in 0..p {
            let nu = inv_gamma(&mut rng, 1.0, 1.0 + 1.0 / eta2[j]);
            let b2 = beta[j] * beta[j];
            eta2[j] = inv_gamma(&mut rng, 1.0, 1.0 / nu + b2 / (2.0 * sigma2 * tau2));
            scaled_sq_sum += b2 / eta2[j];
        }

        // --- global scale --------------------------------------------------
        let xi = inv_gamma(&mut rng, 1.0, 1.0 + 1.0 / tau2);
        tau2 = inv_gamma(
            &mut rng,
            (p as f64 + 1.0) / 2.0,
            1.0 / xi + scaled_sq_sum / (2.0 * sigma2),
        );

        if !(sigma2.is_finite() && tau2.is_finite()) {
            return Err(Error::NonFinite {
                iteration: sweep,
                what: String::from("scale draw"),
            });
        }

        if sweep >= burnin {
            let s_idx = sweep - burnin;
            beta_out.col_mut(s_idx).copy_from_slice(&beta);
            sigma2_out[s_idx] = sigma2;
            tau_out[s_idx] = math::sqrt(tau2);
            if let Some(eo) = eta_out.as_mut() {
                for (dst, &e2) in eo.col_mut(s_idx).iter_mut().zip(eta2.iter()) {
                    *dst = math::sqrt(e2);
                }
            }
            for (acc, &bj) in mean_accum.iter_mut().zip(beta.iter()) {
                *acc += bj;
            }
        }
    }

    for v in mean_accum.iter_mut() {
        *v /= draws as f64;
    }
    Ok(HsDraws {
        beta: beta_out,
        sigma2: sigma2_out,
        tau: tau_out,
        eta: eta_out,
        post_mean: mean_accum,
        draws,
        burnin,
        seed,
    })
}
