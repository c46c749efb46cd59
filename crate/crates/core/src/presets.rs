//! Ready-made models.
//!
//! [`Sec5Params`] is a one-factor Jacobi benchmark with a linearly coupled
//! mortality factor, at parameter values fitted to monthly world-index and
//! annual mortality data for 1970–2013. [`Hedge2dParams`] has two
//! independent Jacobi factors so that the two hedging instruments span the
//! noise.

use crate::error::Result;
use crate::generator::{DiffusionSpec, StateBox};
use crate::market::{calibrate_levels, derive_y_box, LevelOptions, LevelReport, MarketModel, YRange};
use crate::poly::{MultiIndex, Polynomial};

/// Jacobi benchmark factor X on [−1, 1] and mortality factor Y:
///
/// `dX = Ψ(b̄ − X)dt + σ√(1 − X²)dW`, `dY = (d(b̄ − X) + κ(η − Y))dt`,
/// `p(x) = ρ + c x`, `q(y) = δ + ν y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sec5Params {
    pub psi: f64,
    pub bbar: f64,
    pub sigma: f64,
    pub d: f64,
    pub kappa: f64,
    pub eta: f64,
    pub rho: f64,
    pub c: f64,
    pub delta: f64,
    pub nu: f64,
    /// Published level of the benchmark.
    pub alpha: f64,
    /// Published level of the survival index.
    pub gamma: f64,
}

impl Default for Sec5Params {
    fn default() -> Self {
        Self {
            psi: 14.98581,
            bbar: -0.79506,
            sigma: 1.25299,
            d: 5.18417,
            kappa: -5.87517,
            eta: -5.05117,
            rho: 0.01,
            c: 0.006,
            delta: 0.998,
            nu: -0.00044,
            alpha: 4.6068,
            gamma: 0.0045607,
        }
    }
}

fn affine(dim: usize, constant: f64, linear: &[(usize, f64)]) -> Polynomial {
    let mut terms = vec![(MultiIndex::zero(dim), constant)];
    for &(v, c) in linear {
        terms.push((MultiIndex::unit(dim, v), c));
    }
    Polynomial::from_terms(dim, terms).expect("dimensions agree")
}

fn jacobi_variance(dim: usize, var: usize, sigma: f64) -> Polynomial {
    let s2 = sigma * sigma;
    let mut sq = vec![0; dim];
    sq[var] = 2;
    Polynomial::from_terms(dim, [(MultiIndex::zero(dim), s2), (MultiIndex::new(sq), -s2)]).expect("dimensions agree")
}

impl Sec5Params {
    /// `p(x) = ρ + c x` on (x, y).
    pub fn p(&self) -> Polynomial {
        affine(2, self.rho, &[(0, self.c)])
    }

    /// `q(y) = δ + ν y` on (x, y).
    pub fn q(&self) -> Polynomial {
        affine(2, self.delta, &[(1, self.nu)])
    }

    /// `σ²`, the coefficient of the Jacobi diffusion `σ²(1 − x²)`.
    pub fn sigma_sq(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Stationary variance of X.
    pub fn stationary_variance(&self) -> f64 {
        let s2 = self.sigma_sq();
        s2 * (1.0 - self.bbar * self.bbar) / (s2 + 2.0 * self.psi)
    }

    /// `ᾱ = max 𝐆p/p`, attained at x = −1 when `c > 0`.
    pub fn alpha_upper(&self) -> f64 {
        let at = |x: f64| self.c * self.psi * (self.bbar - x) / (self.rho + self.c * x);
        at(-1.0).max(at(1.0))
    }
}

/// The X factor alone, on [−1, 1].
pub fn jacobi_x_spec(prm: &Sec5Params) -> Result<DiffusionSpec> {
    DiffusionSpec::new(
        1,
        0,
        vec![affine(1, prm.psi * prm.bbar, &[(0, -prm.psi)])],
        vec![vec![jacobi_variance(1, 0, prm.sigma)]],
        StateBox::new(vec![-1.0], vec![1.0])?,
        vec![Polynomial::parse("x1^2 - 1", 1)?],
        vec![0.0],
    )
}

/// The (X, Y) specification with the Y side of the box bounding every Y path
/// over `[0, 1]`.
pub fn sec5_spec(prm: &Sec5Params) -> Result<DiffusionSpec> {
    sec5_spec_over(prm, 1.0)
}

/// As [`sec5_spec`], with the Y range covering `[0, horizon]`.
pub fn sec5_spec_over(prm: &Sec5Params, horizon: f64) -> Result<DiffusionSpec> {
    let drift = vec![
        affine(2, prm.psi * prm.bbar, &[(0, -prm.psi)]),
        affine(2, prm.d * prm.bbar + prm.kappa * prm.eta, &[(0, -prm.d), (1, -prm.kappa)]),
    ];
    let z = Polynomial::zero(2);
    let a = vec![vec![jacobi_variance(2, 0, prm.sigma), z.clone()], vec![z.clone(), z]];
    let wide = StateBox::new(vec![-1.0, -1e12], vec![1.0, 1e12])?;
    let boundary = vec![Polynomial::parse("x1^2 - 1", 2)?];
    let spec = DiffusionSpec::new(1, 1, drift, a, wide, boundary, vec![0.0, 0.0])?;
    let bx = derive_y_box(&spec, horizon)?;
    spec.with_box(bx)
}

/// Model at the published α and γ.
pub fn sec5_model(prm: &Sec5Params) -> Result<MarketModel> {
    MarketModel::new(sec5_spec(prm)?, prm.p(), prm.q(), prm.alpha, prm.gamma)
}

/// Model with α and γ set to the upper bounds over the working box.
pub fn sec5_calibrated(prm: &Sec5Params, refine: usize) -> Result<(MarketModel, LevelReport)> {
    let spec = sec5_spec(prm)?;
    calibrate_levels(&spec, &prm.p(), &prm.q(), &LevelOptions { y_range: YRange::SpecBox, refine })
}

/// Two independent Jacobi factors X1, X2 and a stable mortality factor Y
/// driven by X2:
///
/// `dXi = Ψ(b̄ − Xi)dt + σ√(1 − Xi²)dWi`, `dY = (d(b̄ − X2) + κ(η − Y))dt`,
/// `p = ρ + c x1`, `q = δ + ν y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hedge2dParams {
    pub psi: f64,
    pub bbar: f64,
    pub sigma: f64,
    pub d: f64,
    pub kappa: f64,
    pub eta: f64,
    pub rho: f64,
    pub c: f64,
    pub delta: f64,
    pub nu: f64,
}

impl Default for Hedge2dParams {
    fn default() -> Self {
        Self { psi: 2.0, bbar: 0.0, sigma: 0.5, d: 1.0, kappa: 1.0, eta: 0.0, rho: 0.01, c: 0.002, delta: 1.0, nu: 0.02 }
    }
}

impl Hedge2dParams {
    pub fn p(&self) -> Polynomial {
        affine(3, self.rho, &[(0, self.c)])
    }

    pub fn q(&self) -> Polynomial {
        affine(3, self.delta, &[(2, self.nu)])
    }

    pub fn spec(&self, horizon: f64) -> Result<DiffusionSpec> {
        let z = Polynomial::zero(3);
        let drift = vec![
            affine(3, self.psi * self.bbar, &[(0, -self.psi)]),
            affine(3, self.psi * self.bbar, &[(1, -self.psi)]),
            affine(3, self.d * self.bbar + self.kappa * self.eta, &[(1, -self.d), (2, -self.kappa)]),
        ];
        let a = vec![
            vec![jacobi_variance(3, 0, self.sigma), z.clone(), z.clone()],
            vec![z.clone(), jacobi_variance(3, 1, self.sigma), z.clone()],
            vec![z.clone(), z.clone(), z],
        ];
        let wide = StateBox::new(vec![-1.0, -1.0, -1e12], vec![1.0, 1.0, 1e12])?;
        let boundary = vec![Polynomial::parse("x1^2 - 1", 3)?, Polynomial::parse("x2^2 - 1", 3)?];
        let spec = DiffusionSpec::new(2, 1, drift, a, wide, boundary, vec![0.0; 3])?;
        let bx = derive_y_box(&spec, horizon)?;
        spec.with_box(bx)
    }

    /// Model with levels at their upper bounds, Y range covering `[0, horizon]`.
    pub fn model(&self, horizon: f64) -> Result<MarketModel> {
        let spec = self.spec(horizon)?;
        let opts = LevelOptions { y_range: YRange::SpecBox, refine: 400 };
        Ok(calibrate_levels(&spec, &self.p(), &self.q(), &opts)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::validate_state_space;

    #[test]
    fn stationary_variance_value() {
        let v = Sec5Params::default().stationary_variance();
        assert!((v - 0.018313).abs() < 5e-6, "{v}");
    }

    #[test]
    fn closed_form_alpha() {
        assert!((Sec5Params::default().alpha_upper() - 4.6068).abs() < 5e-4);
    }

    #[test]
    fn presets_validate() {
        let prm = Sec5Params::default();
        assert!(validate_state_space(&jacobi_x_spec(&prm).unwrap()).passed());
        let r = validate_state_space(&sec5_spec(&prm).unwrap());
        assert!(r.passed(), "{:?}", r.violations);
        let h = Hedge2dParams::default();
        let r = validate_state_space(&h.spec(1.0).unwrap());
        assert!(r.passed(), "{:?}", r.violations);
    }

    #[test]
    fn hedge2d_levels_are_finite_and_positive() {
        let m = Hedge2dParams::default().model(1.0).unwrap();
        assert!((m.alpha() - 0.5).abs() < 1e-9, "{}", m.alpha());
        assert!(m.gamma() > 0.0 && m.gamma() < 0.1, "{}", m.gamma());
    }
}
