//! Linear Kalman filter for the benchmark factor X observed through
//! `v¹ = e^{−αt}(ρ + cX) + ε₁`.
//!
//! Transition over a step Δ: `X' = Φ0 + Φ1 X + u`, `Φ1 = e^{−ΨΔ}`,
//! `Φ0 = b̄(1 − Φ1)`, `u ~ N(0, Q)` with `Q = E[Var[X' | X]]` under the
//! stationary law, which for the Jacobi factor is `Var_∞(1 − Φ1²)`.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use super::ObservationSet;
use crate::error::{Error, Result};

/// Parameters of the X factor and its measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XParams {
    pub psi: f64,
    pub bbar: f64,
    pub sigma: f64,
    /// Measurement noise standard deviation of `v¹`.
    pub sigma1: f64,
    pub rho: f64,
    pub c: f64,
    pub alpha: f64,
    /// Prior mean of X at the first observation time.
    pub x0: f64,
}

impl XParams {
    pub fn check(&self) -> Result<()> {
        let ok = self.psi > 0.0
            && self.bbar.abs() <= 1.0
            && self.sigma > 0.0
            && self.sigma1 > 0.0
            && [self.rho, self.c, self.alpha, self.x0].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("filter parameters out of range: {self:?}")))
        }
    }

    /// `σ²(1 − b̄²) / (σ² + 2Ψ)`.
    pub fn stationary_variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        s2 * (1.0 - self.bbar * self.bbar) / (s2 + 2.0 * self.psi)
    }

    /// `(Φ0, Φ1, Q)` for a step of length `dt`.
    pub fn transition(&self, dt: f64) -> (f64, f64, f64) {
        let phi1 = (-self.psi * dt).exp();
        let q = self.stationary_variance() * (1.0 - phi1 * phi1);
        (self.bbar * (1.0 - phi1), phi1, q)
    }

    /// Coefficients `(a0, a1, a2)` of `Var[X_{t+dt} | X_t = x] = a0 + a1 x + a2 x²`,
    /// from the exponential of the generator on polynomials of degree ≤ 2.
    pub fn conditional_variance(&self, dt: f64) -> [f64; 3] {
        let s2 = self.sigma * self.sigma;
        let (pb, psi) = (self.psi * self.bbar, self.psi);
        // column j holds the coordinates of 𝐆(x^j) in (1, x, x²)
        let g = Matrix3::new(0.0, pb, s2, 0.0, -psi, 2.0 * pb, 0.0, 0.0, -(s2 + 2.0 * psi));
        let e = (g * dt).exp();
        let (m10, m11) = (e[(0, 1)], e[(1, 1)]);
        [e[(0, 2)] - m10 * m10, e[(1, 2)] - 2.0 * m10 * m11, e[(2, 2)] - m11 * m11]
    }

    /// `max 𝐆p/p` over x ∈ [−1, 1] for `p = ρ + cx`; the maximum of this
    /// monotone ratio sits at an endpoint.
    pub fn alpha_upper(&self) -> f64 {
        let at = |x: f64| self.c * self.psi * (self.bbar - x) / (self.rho + self.c * x);
        at(-1.0).max(at(1.0))
    }
}

#[derive(Debug, Clone, Default)]
pub struct KalmanOutput {
    pub loglik: f64,
    /// `X̂_{t_k}`.
    pub filtered: Vec<f64>,
    /// `Σ_{t_k}`.
    pub variance: Vec<f64>,
    /// `X̂_{t_k|t_{k−1}}`.
    pub predicted: Vec<f64>,
    /// `w_{t_k}`.
    pub innovations: Vec<f64>,
    /// `F_{t_k}`.
    pub innovation_var: Vec<f64>,
    /// `Σ_{t_k|t_{k−1}} Θ1 / F`.
    pub gains: Vec<f64>,
}

impl KalmanOutput {
    pub fn standardized(&self) -> Vec<f64> {
        self.innovations.iter().zip(&self.innovation_var).map(|(w, f)| w / f.sqrt()).collect()
    }

    /// Sample mean and variance of the standardized innovations against the
    /// window `|mean| ≤ 3/√N`, `variance ∈ [0.8, 1.2]`.
    pub fn innovation_check(&self) -> InnovationCheck {
        let s = self.standardized();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let variance = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let passed = mean.abs() <= 3.0 / n.sqrt() && (0.8..=1.2).contains(&variance);
        InnovationCheck { mean, variance, passed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnovationCheck {
    pub mean: f64,
    pub variance: f64,
    pub passed: bool,
}

/// Law under which the transition variance `Q = E[Var[X_k | X_{k−1}]]` is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QLaw {
    /// Stationary law of X; `Q` is the same at every step.
    Stationary,
    /// Current filtering law `N(X̂_{k−1}, Σ_{k−1})`.
    #[default]
    Filtered,
}

/// [`kalman_filter`] under the default [`QLaw`].
pub fn kalman_loglik(prm: &XParams, obs: &ObservationSet) -> Result<KalmanOutput> {
    kalman_filter(prm, obs, QLaw::default())
}

/// Runs the filter over the benchmark-inverse observations.
///
/// The prior at the first time is `N(x0, Var_∞)`. The log-likelihood is
/// `Σ_k [−log 2π − ½ log F − ½ w²/F]`.
pub fn kalman_filter(prm: &XParams, obs: &ObservationSet, law: QLaw) -> Result<KalmanOutput> {
    prm.check()?;
    let n = obs.len();
    let mut out = KalmanOutput {
        filtered: Vec::with_capacity(n),
        variance: Vec::with_capacity(n),
        predicted: Vec::with_capacity(n),
        innovations: Vec::with_capacity(n),
        innovation_var: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
        ..Default::default()
    };
    let s1 = prm.sigma1 * prm.sigma1;
    let mut x = prm.x0;
    let mut sig = prm.stationary_variance();
    let mut loglik = 0.0;
    // calendar grids repeat a handful of step lengths up to rounding
    let mut cache: Vec<(f64, [f64; 3])> = Vec::new();
    for k in 0..n {
        let t = obs.times[k];
        let (xp, sp) = if k == 0 {
            (x, sig)
        } else {
            let dt = t - obs.times[k - 1];
            let (phi0, phi1, mut q) = prm.transition(dt);
            if law == QLaw::Filtered {
                let a = match cache.iter().find(|(h, _)| (h - dt).abs() <= 1e-12 * dt) {
                    Some((_, a)) => *a,
                    None => {
                        let a = prm.conditional_variance(dt);
                        if cache.len() < 16 {
                            cache.push((dt, a));
                        }
                        a
                    }
                };
                // E[a0 + a1 X + a2 X² | V_{k−1}] with X ~ N(X̂, Σ)
                q = (a[0] + a[1] * x + a[2] * (x * x + sig)).max(f64::MIN_POSITIVE);
            }
            (phi0 + phi1 * x, phi1 * phi1 * sig + q)
        };
        let disc = (-prm.alpha * t).exp();
        let (th0, th1) = (disc * prm.rho, disc * prm.c);
        let w = obs.benchmark_inverse[k] - (th0 + th1 * xp);
        let f = th1 * th1 * sp + s1;
        if !(f > 0.0 && f.is_finite() && sp > 0.0) {
            return Err(Error::FilterBreakdown { step: k, value: f });
        }
        let gain = sp * th1 / f;
        x = xp + gain * w;
        // (Σ⁻¹ + Θ²/σ₁²)⁻¹
        sig = sp * s1 / f;
        loglik += -(2.0 * PI).ln() - 0.5 * f.ln() - 0.5 * w * w / f;
        out.filtered.push(x);
        out.variance.push(sig);
        out.predicted.push(xp);
        out.innovations.push(w);
        out.innovation_var.push(f);
        out.gains.push(gain);
    }
    out.loglik = loglik;
    Ok(out)
}
