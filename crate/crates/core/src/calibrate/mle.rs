//! Maximum-likelihood fit of `(Ψ, b̄, σ, σ₁)` by multi-start Nelder–Mead on
//! `(log Ψ, atanh b̄, log σ, log σ₁)`.

use rand::Rng;
use rayon::prelude::*;

use super::kalman::{kalman_filter, KalmanOutput, QLaw, XParams};
use super::optim::{nelder_mead, NmOptions};
use super::ObservationSet;
use crate::error::{Error, Result};
use crate::simulate::path_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleBounds {
    pub psi: (f64, f64),
    /// Bound on `|b̄|`, strictly below 1 so the transform stays finite.
    pub bbar_abs: f64,
    pub sigma: (f64, f64),
    pub sigma1: (f64, f64),
}

impl Default for MleBounds {
    fn default() -> Self {
        Self { psi: (1e-3, 500.0), bbar_abs: 0.999_999, sigma: (1e-4, 10.0), sigma1: (1e-10, 1.0) }
    }
}

impl MleBounds {
    fn contains(&self, p: &XParams) -> bool {
        (self.psi.0..=self.psi.1).contains(&p.psi)
            && p.bbar.abs() <= self.bbar_abs
            && (self.sigma.0..=self.sigma.1).contains(&p.sigma)
            && (self.sigma1.0..=self.sigma1.1).contains(&p.sigma1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub starts: usize,
    pub nm: NmOptions,
    pub bounds: MleBounds,
    /// Set `α = max 𝐆p/p` for every candidate `(Ψ, b̄)` instead of keeping
    /// the initial α.
    pub tie_alpha: bool,
    /// Seed of the perturbed starting points (start 0 is always `init`).
    pub seed: u64,
    pub q_law: QLaw,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { starts: 8, nm: NmOptions::default(), bounds: MleBounds::default(), tie_alpha: true, seed: 0, q_law: QLaw::default() }
    }
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub params: XParams,
    pub loglik: f64,
    pub init_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Starts that reached a finite likelihood.
    pub good_starts: usize,
    /// Names of parameters within 1% (log scale) of a bound.
    pub at_bounds: Vec<&'static str>,
    pub filter: KalmanOutput,
}

fn to_unconstrained(p: &XParams) -> [f64; 4] {
    [p.psi.ln(), p.bbar.atanh(), p.sigma.ln(), p.sigma1.ln()]
}

fn from_unconstrained(u: &[f64], base: &XParams, tie: bool) -> XParams {
    let mut p = XParams { psi: u[0].exp(), bbar: u[1].tanh(), sigma: u[2].exp(), sigma1: u[3].exp(), ..*base };
    if tie {
        p.alpha = p.alpha_upper();
    }
    p
}

pub fn fit_mle(obs: &ObservationSet, init: &XParams, opts: &MleOptions) -> Result<MleFit> {
    let mut init = *init;
    if opts.tie_alpha {
        init.alpha = init.alpha_upper();
    }
    if !opts.bounds.contains(&init) {
        return Err(Error::InvalidArgument(format!("initial parameters outside the bounds: {init:?}")));
    }
    let init_loglik = kalman_filter(&init, obs, opts.q_law).map(|o| o.loglik).unwrap_or(f64::NEG_INFINITY);
    let objective = |u: &[f64]| {
        let p = from_unconstrained(u, &init, opts.tie_alpha);
        if !opts.bounds.contains(&p) {
            return f64::INFINITY;
        }
        match kalman_filter(&p, obs, opts.q_law) {
            Ok(o) if o.loglik.is_finite() => -o.loglik,
            _ => f64::INFINITY,
        }
    };
    let u0 = to_unconstrained(&init);
    let mut rng = path_rng(opts.seed, 0);
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|i| {
            if i == 0 {
                u0.to_vec()
            } else {
                u0.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect()
            }
        })
        .collect();
    let runs: Vec<_> = starts
        .par_iter()
        .map(|s| nelder_mead(objective, s, &[0.3, 0.3, 0.3, 0.3], &opts.nm))
        .collect();
    let good = runs.iter().filter(|r| r.value.is_finite()).count();
    let best = runs
        .into_iter()
        .filter(|r| r.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Optimizer("no start reached a finite log-likelihood".into()))?;
    let params = from_unconstrained(&best.x, &init, opts.tie_alpha);
    let filter = kalman_filter(&params, obs, opts.q_law)?;
    let b = &opts.bounds;
    let near = |v: f64, lo: f64, hi: f64| (v / lo).ln() < 0.01 || (hi / v).ln() < 0.01;
    let mut at_bounds = Vec::new();
    if near(params.psi, b.psi.0, b.psi.1) {
        at_bounds.push("psi");
    }
    if params.bbar.abs() > b.bbar_abs * 0.99 {
        at_bounds.push("bbar");
    }
    if near(params.sigma, b.sigma.0, b.sigma.1) {
        at_bounds.push("sigma");
    }
    if near(params.sigma1, b.sigma1.0, b.sigma1.1) {
        at_bounds.push("sigma1");
    }
    if !at_bounds.is_empty() {
        log::warn!("maximum likelihood estimate at the bounds for {at_bounds:?}");
    }
    Ok(MleFit {
        params,
        loglik: filter.loglik,
        init_loglik,
        iterations: best.iterations,
        converged: best.converged,
        good_starts: good,
        at_bounds,
        filter,
    })
}
