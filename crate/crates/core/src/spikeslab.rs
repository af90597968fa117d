//! Spike-and-slab posterior for linear regression under a g-prior slab.
//!
//! Model, for centered data with |model| = a:
//!
//! ```text
//! y | beta, sigma2, gamma ~ N(X_g beta_g, sigma2 I_n)
//! beta_g | gamma, sigma2  ~ N(0, sigma2 n (X_g' X_g)^{-1})
//! gamma_j | pi0           ~ Bernoulli(pi0),  pi0 ~ Beta(1, 1)
//! p(sigma2) proportional to 1/sigma2
//! ```
//!
//! Everything integrates in closed form given `gamma`:
//!
//! ```text
//! log p(y | gamma) = -(a/2) log(1+n) - (n/2) log Q_g + log B(1+a, 1+p-a) + const
//! Q_g = y'y - n0 * y' X_g (X_g'X_g)^{-1} X_g' y,   n0 = n/(1+n)
//! ```
//!
//! The sampler is a systematic-scan Gibbs on `gamma` using single-flip
//! ratios of `log p(y | gamma)`, followed after each sweep by exact draws of
//! `sigma2 | gamma, y` (inverse gamma) and `beta_g | sigma2, gamma, y`
//! (normal). The Cholesky factor of X_g'X_g is carried across flips by
//! rank-one extension/deletion and refreshed periodically.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, gram_submatrix, norm2_sq, Cholesky, Mat};
use crate::math;
use crate::rng::{self, streams};

/// Default number of retained draws.
pub const DEFAULT_DRAWS: usize = 5000;
/// Default number of discarded warm-up sweeps.
pub const DEFAULT_BURNIN: usize = 1000;
/// Full refactorization cadence, in sweeps, to bound update drift.
const REFRESH_EVERY: usize = 500;
/// Relative pivot tolerance treating a model block as singular.
const SINGULAR_TOL: f64 = 1e-10;
/// Precompute the p x p Gram matrix below this many entries (64 MB).
const GRAM_ENTRY_LIMIT: usize = 8_000_000;

/// Bit-packed S x p indicator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BitMat {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BitMat {
            rows,
            cols,
            words_per_row,
            words: vec![0u64; rows * words_per_row],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        let w = self.words[r * self.words_per_row + c / 64];
        (w >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize) {
        self.words[r * self.words_per_row + c / 64] |= 1 << (c % 64);
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// Retained spike-and-slab posterior draws and their summaries.
///
/// `beta` stores draw `s` in column `s` (so a draw is a contiguous slice);
/// `beta[(j, s)]` is coefficient `j` of draw `s` and is exactly zero wherever
/// `gamma.get(s, j)` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct SsDraws {
    pub beta: Mat,
    pub gamma: BitMat,
    pub sigma2: Vec<f64>,
    /// Rao-Blackwellized posterior inclusion probabilities: per-coordinate
    /// averages of the conditional flip probabilities over retained sweeps.
    pub pip: Vec<f64>,
    /// Rao-Blackwellized posterior mean: average over retained sweeps of
    /// E{beta | y, gamma^(s)}.
    pub post_mean: Vec<f64>,
    pub draws: usize,
    pub burnin: usize,
    pub seed: u64,
}

impl SsDraws {
    pub fn p(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_draws(&self) -> usize {
        self.draws
    }

    /// Coefficient vector of one retained draw.
    pub fn draw(&self, s: usize) -> &[f64] {
        self.beta.col(s)
    }

    /// Plain frequency of gamma_j = 1 across retained draws; kept as the
    /// Monte Carlo cross-check for the Rao-Blackwellized `pip`.
    pub fn raw_inclusion_freq(&self) -> Vec<f64> {
        let mut freq = vec![0.0; self.p()];
        for s in 0..self.draws {
            for (j, f) in freq.iter_mut().enumerate() {
                if self.gamma.get(s, j) {
                    *f += 1.0;
                }
            }
        }
        for f in freq.iter_mut() {
            *f /= self.draws as f64;
        }
        freq
    }

    /// Column average of the beta draws.
    pub fn draw_mean(&self) -> Vec<f64> {
        let p = self.p();
        let mut m = vec![0.0; p];
        for s in 0..self.draws {
            let col = self.beta.col(s);
            for j in 0..p {
                m[j] += col[j];
            }
        }
        for v in m.iter_mut() {
            *v /= self.draws as f64;
        }
        m
    }
}

/// Shared precomputations for one dataset.
struct Problem<'a> {
    x: &'a Mat,
    n: usize,
    p: usize,
    yty: f64,
    /// X'y
    xty: Vec<f64>,
    /// Column squared norms, i.e. the Gram diagonal.
    col_sq: Vec<f64>,
    /// Full Gram matrix when affordable.
    gram: Option<Mat>,
    ln_1pn: f64,
    n0: f64,
}

impl<'a> Problem<'a> {
    fn new(ds: &'a Dataset) -> Self {
        let x = &ds.x;
        let n = ds.n();
        let p = ds.p();
        let xty = x.tr_matvec(&ds.y);
        let col_sq: Vec<f64> = (0..p).map(|j| norm2_sq(x.col(j))).collect();
        let gram = if p * p <= GRAM_ENTRY_LIMIT {
            Some(x.gram())
        } else {
            None
        };
        Problem {
            x,
            n,
            p,
            yty: norm2_sq(&ds.y),
            xty,
            col_sq,
            gram,
            ln_1pn: math::ln(1.0 + n as f64),
            n0: n as f64 / (1.0 + n as f64),
        }
    }

    /// Cross products of column `j` with the columns in `support`.
    fn cross(&self, support: &[usize], j: usize, out: &mut Vec<f64>) {
        out.clear();
        if let Some(g) = &self.gram {
            let gj = g.col(j);
            out.extend(support.iter().map(|&i| gj[i]));
        } else {
            let cj = self.x.col(j);
            out.extend(support.iter().map(|&i| dot(self.x.col(i), cj)));
        }
    }

    /// log Beta(1 + a, 1 + p - a): the model-size prior with pi0 ~ Beta(1,1)
    /// integrated out.
    fn ln_size_prior(&self, a: usize) -> f64 {
        math::ln_beta(1.0 + a as f64, 1.0 + (self.p - a) as f64)
    }
}

/// Cholesky state for the active support, updated across flips.
struct ActiveState {
    /// Active coordinates in insertion order.
    support: Vec<usize>,
    /// Position of each coordinate in `support` (usize::MAX if excluded).
    pos: Vec<usize>,
    /// Cholesky factor of X_g' X_g in insertion order.
    chol: Cholesky,
    /// c = X_g' y in insertion order.
    c: Vec<f64>,
    /// w = L^{-1} c.
    w: Vec<f64>,
    /// Q_g = y'y - n0 ||w||^2.
    q: f64,
}

impl ActiveState {
    fn empty(prob: &Problem) -> Self {
        ActiveState {
            support: Vec::new(),
            pos: vec![usize::MAX; prob.p],
            chol: Cholesky::empty(),
            c: Vec::new(),
            w: Vec::new(),
            q: prob.yty,
        }
    }

    fn size(&self) -> usize {
        self.support.len()
    }

    /// Rebuild factorization and derived quantities from scratch.
    fn refresh(&mut self, prob: &Problem) -> Result<()> {
        if self.support.is_empty() {
            self.chol = Cholesky::empty();
            self.c.clear();
            self.w.clear();
            self.q = prob.yty;
            return Ok(());
        }
        let gram = match &prob.gram {
            Some(g) => gram_submatrix(g, &self.support),
            None => {
                let a = self.support.len();
                let mut g = Mat::zeros(a, a);
                for (jj, &j) in self.support.iter().enumerate() {
                    let cj = prob.x.col(j);
                    for (ii, &i) in self.support.iter().enumerate().skip(jj) {
                        let v = dot(prob.x.col(i), cj);
                        g[(ii, jj)] = v;
                        g[(jj, ii)] = v;
                    }
                }
                g
            }
        };
        self.chol = Cholesky::factor(&gram, SINGULAR_TOL).ok_or_else(|| {
            Error::SingularModel(format!("support of size {}", self.support.len()))
        })?;
        self.c = self.support.iter().map(|&j| prob.xty[j]).collect();
        self.w = self.chol.forward(&self.c);
        self.q = (prob.yty - prob.n0 * norm2_sq(&self.w)).max(f64::MIN_POSITIVE);
        Ok(())
    }
}

/// Proposal evaluation for adding coordinate `j`. On success the forward
/// solve L^{-1} s lands in `t` (reused across coordinates).
struct AddEval {
    pivot_sq: f64,
    w_new: f64,
    q_new: f64,
}

fn eval_add(prob: &Problem, st: &ActiveState, j: usize, t: &mut Vec<f64>) -> Option<AddEval> {
    prob.cross(&st.support, j, t);
    st.chol.solve_lower(t);
    let pivot_sq = prob.col_sq[j] - norm2_sq(t);
    let thresh = SINGULAR_TOL * prob.col_sq[j].max(1.0);
    if pivot_sq <= thresh || !pivot_sq.is_finite() {
        return None;
    }
    let e = prob.xty[j] - dot(t, &st.w);
    let w_new = e / math::sqrt(pivot_sq);
    let q_new = (st.q - prob.n0 * w_new * w_new).max(f64::MIN_POSITIVE);
    Some(AddEval {
        pivot_sq,
        w_new,
        q_new,
    })
}

/// Q after removing the active coordinate at position `k` (insertion order).
fn eval_remove_q(prob: &Problem, st: &ActiveState, k: usize, z: &mut Vec<f64>) -> f64 {
    let a = st.size();
    z.clear();
    z.resize(a, 0.0);
    z[k] = 1.0;
    st.chol.solve(z);
    let m_kk = z[k];
    let beta_tilde_k = dot(z, &st.c);
    st.q + prob.n0 * beta_tilde_k * beta_tilde_k / m_kk
}

/// Marginal likelihood of `y` given the model `gamma`, up to one additive
/// constant shared across all models. Returns negative infinity when the
/// selected block is singular (the model is excluded, never an error).
pub fn log_marginal(gamma: &[bool], ds: &Dataset) -> f64 {
    let prob = Problem::new(ds);
    log_marginal_impl(gamma, &prob)
}

fn log_marginal_impl(gamma: &[bool], prob: &Problem) -> f64 {
    let support: Vec<usize> = gamma
        .iter()
        .enumerate()
        .filter_map(|(j, &g)| g.then_some(j))
        .collect();
    let a = support.len();
    let nf = prob.n as f64;
    if a >= prob.n {
        return f64::NEG_INFINITY;
    }
    let q = if a == 0 {
        prob.yty
    } else {
        let g = match &prob.gram {
            Some(g) => gram_submatrix(g, &support),
            None => {
                let mut m = Mat::zeros(a, a);
                for (jj, &j) in support.iter().enumerate() {
                    let cj = prob.x.col(j);
                    for (ii, &i) in support.iter().enumerate().skip(jj) {
                        let v = dot(prob.x.col(i), cj);
                        m[(ii, jj)] = v;
                        m[(jj, ii)] = v;
                    }
                }
                m
            }
        };
        let chol = match Cholesky::factor(&g, SINGULAR_TOL) {
            Some(c) => c,
            None => return f64::NEG_INFINITY,
        };
        let c: Vec<f64> = support.iter().map(|&j| prob.xty[j]).collect();
        let w = chol.forward(&c);
        (prob.yty - prob.n0 * norm2_sq(&w)).max(f64::MIN_POSITIVE)
    };
    -(a as f64 / 2.0) * prob.ln_1pn - (nf / 2.0) * math::ln(q) + prob.ln_size_prior(a)
}

/// E{beta | y, gamma}: zero off-support and `n0 (X_g'X_g)^{-1} X_g' y` on the
/// support.
pub fn conditional_post_mean(gamma: &[bool], ds: &Dataset) -> Result<Vec<f64>> {
    let support: Vec<usize> = gamma
        .iter()
        .enumerate()
        .filter_map(|(j, &g)| g.then_some(j))
        .collect();
    conditional_post_mean_on_support(&support, ds)
}

/// [`conditional_post_mean`] with the model given as a support list.
pub fn conditional_post_mean_on_support(support: &[usize], ds: &Dataset) -> Result<Vec<f64>> {
    let p = ds.p();
    let n0 = ds.n() as f64 / (1.0 + ds.n() as f64);
    let mut out = vec![0.0; p];
    if support.is_empty() {
        return Ok(out);
    }
    let fit = crate::linalg::least_squares_on_support(&ds.x, &ds.y, support)
        .map_err(|_| Error::SingularModel(format!("support {support:?}")))?;
    for (&j, &b) in support.iter().zip(fit.iter()) {
        out[j] = n0 * b;
    }
    Ok(out)
}

fn inv_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("valid gamma shape");
    rate / g.sample(rng).max(f64::MIN_POSITIVE)
}

/// Systematic-scan Gibbs sampler over models, with exact conditional draws
/// of `(sigma2, beta_g)` after each sweep.
pub fn sample_ss(ds: &Dataset, draws: usize, burnin: usize, seed: u64) -> Result<SsDraws> {
    if draws < 1 {
        return Err(Error::Parameter(String::from("draws must be >= 1")));
    }
    let prob = Problem::new(ds);
    let n = prob.n;
    let p = prob.p;
    let nf = n as f64;
    let max_size = n.saturating_sub(1).min(p);
    let mut rng = rng::stream(seed, streams::SAMPLER);

    let mut st = ActiveState::empty(&prob);
    let mut beta = Mat::zeros(p, draws);
    let mut gamma = BitMat::zeros(draws, p);
    let mut sigma2 = vec![0.0; draws];
    let mut pip_accum = vec![0.0; p];
    let mut mean_accum = vec![0.0; p];
    let mut t_buf: Vec<f64> = Vec::with_capacity(max_size);
    let mut z_buf: Vec<f64> = Vec::with_capacity(max_size);

    let total = burnin + draws;
    for sweep in 0..total {
        if sweep > 0 && sweep % REFRESH_EVERY == 0 {
            st.refresh(&prob)?;
        }
        let retained = sweep >= burnin;
        for j in 0..p {
            let k = st.pos[j];
            if k == usize::MAX {
                let eval = if st.size() < max_size {
                    eval_add(&prob, &st, j, &mut t_buf)
                } else {
                    None
                };
                let p_incl = match &eval {
                    None => 0.0,
                    Some(ev) => {
                        let a = st.size() as f64;
                        let delta = -0.5 * prob.ln_1pn
                            - (nf / 2.0) * (math::ln(ev.q_new) - math::ln(st.q))
                            + math::ln((1.0 + a) / (prob.p as f64 - a));
                        math::sigmoid(delta)
                    }
                };
                if retained {
                    pip_accum[j] += p_incl;
                }
                let u: f64 = rng.gen();
                if u < p_incl {
                    let ev = eval.expect("inclusion implies a valid add");
                    let piv = st
                        .chol
                        .extend(&t_buf, prob.col_sq[j], SINGULAR_TOL * prob.col_sq[j].max(1.0))
                        .expect("pivot already validated");
                    debug_assert!(
                        (piv * piv - ev.pivot_sq).abs() <= 1e-6 * ev.pivot_sq.max(1e-12)
                    );
                    st.support.push(j);
                    st.pos[j] = st.support.len() - 1;
                    st.c.push(prob.xty[j]);
                    st.w.push(ev.w_new);
                    st.q = ev.q_new;
                }
            } else {
                let q_rm = eval_remove_q(&prob, &st, k, &mut z_buf).max(f64::MIN_POSITIVE);
                let a = st.size() as f64;
                // Ratio for adding j back to the reduced model.
                let delta = -0.5 * prob.ln_1pn - (nf / 2.0) * (math::ln(st.q) - math::ln(q_rm))
                    + math::ln(a / (prob.p as f64 - a + 1.0));
                let p_incl = math::sigmoid(delta);
                if retained {
                    pip_accum[j] += p_incl;
                }
                let u: f64 = rng.gen();
                if u >= p_incl {
                    st.chol.remove(k);
                    st.support.remove(k);
                    st.c.remove(k);
                    for &jj in st.support.iter().skip(k) {
                        st.pos[jj] -= 1;
                    }
                    st.pos[j] = usize::MAX;
                    st.w = st.chol.forward(&st.c);
                    st.q = q_rm;
                }
            }
        }

        // Conditional parameter draws given the sweep's final model; the
        // model chain itself does not depend on these, so they are drawn
        // only for retained sweeps.
        if retained {
            let a = st.size();
            let sig2 = inv_gamma(&mut rng, nf / 2.0, st.q / 2.0);
            if !sig2.is_finite() {
                return Err(Error::NonFinite {
                    iteration: sweep,
                    what: String::from("sigma2 draw"),
                });
            }
            let s_idx = sweep - burnin;
            sigma2[s_idx] = sig2;
            // beta_tilde = (X_g'X_g)^{-1} X_g'y via the factor; conditional
            // mean is n0 * beta_tilde, covariance sigma2 n0 (X_g'X_g)^{-1}.
            let mut beta_tilde = st.w.clone();
            st.chol.solve_upper(&mut beta_tilde);
            let mut z: Vec<f64> = (0..a).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            st.chol.solve_upper(&mut z);
            let scale = math::sqrt(sig2 * prob.n0);
            let col = beta.col_mut(s_idx);
            for (idx, &j) in st.support.iter().enumerate() {
                let mean_j = prob.n0 * beta_tilde[idx];
                mean_accum[j] += mean_j;
                col[j] = mean_j + scale * z[idx];
                gamma.set(s_idx, j);
            }
        }
    }

    let s_f = draws as f64;
    let pip: Vec<f64> = pip_accum.iter().map(|v| (v / s_f).clamp(0.0, 1.0)).collect();
    let post_mean: Vec<f64> = mean_accum.iter().map(|v| v / s_f).collect();
    Ok(SsDraws {
        beta,
        gamma,
        sigma2,
        pip,
        post_mean,
        draws,
        burnin,
        seed,
    })
}

/// Exact posterior summaries by enumerating all 2^p models.
pub struct Enumeration {
    pub pip: Vec<f64>,
    pub post_mean: Vec<f64>,
    /// Probability of each model, indexed by the bitmask of its support.
    pub model_probs: Vec<f64>,
}

pub fn enumerate_exact(ds: &Dataset) -> Result<Enumeration> {
    let p = ds.p();
    if p > 20 {
        return Err(Error::Budget(format!(
            "exact enumeration needs p <= 20, got p = {p}"
        )));
    }
    let prob = Problem::new(ds);
    let n_models = 1usize << p;
    let mut logm = vec![f64::NEG_INFINITY; n_models];
    let mut gamma = vec![false; p];
    for mask in 0..n_models {
        for (j, g) in gamma.iter_mut().enumerate() {
            *g = (mask >> j) & 1 == 1;
        }
        logm[mask] = log_marginal_impl(&gamma, &prob);
    }
    let max = logm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::SingularModel(String::from(
            "every model is singular",
        )));
    }
    let mut probs: Vec<f64> = logm.iter().map(|&l| math::exp(l - max)).collect();
    let z: f64 = probs.iter().sum();
    for q in probs.iter_mut() {
        *q /= z;
    }
    let mut pip = vec![0.0; p];
    let mut post_mean = vec![0.0; p];
    for (mask, &q) in probs.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        for (j, g) in gamma.iter_mut().enumerate() {
            *g = (mask >> j) & 1 == 1;
        }
        let cond = conditional_post_mean(&gamma, ds)?;
        for j in 0..p {
            if gamma[j] {
                pip[j] += q;
            }
            post_mean[j] += q * cond[j];
        }
    }
    Ok(Enumeration {
        pip,
        post_mean,
        model_probs: probs,
    })
}
