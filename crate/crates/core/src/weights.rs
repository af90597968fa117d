//! Posterior-expected penalty weights for the reweighted-l1 family.
//!
//! The stage-two objective penalizes coordinate j by `lambda * w_j |b_j|`
//! where `w_j` is a posterior expectation:
//!
//! - unit: `w_j = 1` (plain l1);
//! - false-discovery: `w_j = 1 - pip_j`, defined only under a selection
//!   prior, so the constructor takes spike-and-slab draws;
//! - inverse-signal: `w_j = E{ 1/(|beta_j| + eps) | y }`, defined for any
//!   posterior, estimated by averaging over draws.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::horseshoe::HsDraws;
use crate::math;
use crate::spikeslab::SsDraws;

/// Which reweighted-l1 penalty produced a weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    Unit,
    Fd,
    Is,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub kind: PenaltyKind,
    /// Stabilizer of the inverse-signal penalty; `None` for other kinds.
    pub eps: Option<f64>,
}

impl WeightVector {
    pub fn p(&self) -> usize {
        self.w.len()
    }
}

/// Access to posterior coefficient draws, shared by both samplers.
pub trait CoefDraws {
    fn p(&self) -> usize;
    fn num_draws(&self) -> usize;
    /// Coefficient vector of retained draw `s`.
    fn draw(&self, s: usize) -> &[f64];
    /// Posterior mean estimate carried by the fit.
    fn post_mean(&self) -> &[f64];
}

impl CoefDraws for SsDraws {
    fn p(&self) -> usize {
        SsDraws::p(self)
    }
    fn num_draws(&self) -> usize {
        self.draws
    }
    fn draw(&self, s: usize) -> &[f64] {
        SsDraws::draw(self, s)
    }
    fn post_mean(&self) -> &[f64] {
        &self.post_mean
    }
}

impl CoefDraws for HsDraws {
    fn p(&self) -> usize {
        HsDraws::p(self)
    }
    fn num_draws(&self) -> usize {
        self.draws
    }
    fn draw(&self, s: usize) -> &[f64] {
        HsDraws::draw(self, s)
    }
    fn post_mean(&self) -> &[f64] {
        &self.post_mean
    }
}

/// All-ones weights: the plain l1 penalty.
pub fn unit_weights(p: usize) -> WeightVector {
    WeightVector {
        w: vec![1.0; p],
        kind: PenaltyKind::Unit,
        eps: None,
    }
}

/// Weights this far below the Monte Carlo resolution of a PIP estimate are
/// floating-point residue of pip = 1, not a penalization preference; they
/// would otherwise anchor the penalty grid at the 1/epsilon scale.
const FD_WEIGHT_RESOLUTION: f64 = 1e-10;

/// False-discovery weights `1 - pip_j` from a spike-and-slab fit. Only a
/// selection prior carries inclusion probabilities, so shrinkage-prior draws
/// cannot be passed here.
pub fn fd_weights(draws: &SsDraws) -> Result<WeightVector> {
    let mut w = Vec::with_capacity(draws.pip.len());
    for (j, &pi) in draws.pip.iter().enumerate() {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::CorruptDraws(format!(
                "pip[{j}] = {pi} outside [0, 1]"
            )));
        }
        let wj = 1.0 - pi;
        w.push(if wj < FD_WEIGHT_RESOLUTION { 0.0 } else { wj });
    }
    Ok(WeightVector {
        w,
        kind: PenaltyKind::Fd,
        eps: None,
    })
}

/// Inverse-signal weights `(1/S) sum_s 1/(|beta_j^(s)| + eps)`.
pub fn is_weights<D: CoefDraws>(draws: &D, eps: f64) -> Result<WeightVector> {
    if eps < 0.0 || !eps.is_finite() {
        return Err(Error::Parameter(format!("eps must be >= 0, got {eps}")));
    }
    let p = draws.p();
    let s = draws.num_draws();
    let mut w = vec![0.0; p];
    for si in 0..s {
        let row = draws.draw(si);
        for (wj, &b) in w.iter_mut().zip(row.iter()) {
            let denom = math::abs(b) + eps;
            if denom == 0.0 {
                return Err(Error::WeightDomain(format!(
                    "draw has beta_j = 0 with eps = 0; use eps > 0"
                )));
            }
            *wj += 1.0 / denom;
        }
    }
    for wj in w.iter_mut() {
        *wj /= s as f64;
    }
    Ok(WeightVector {
        w,
        kind: PenaltyKind::Is,
        eps: Some(eps),
    })
}
