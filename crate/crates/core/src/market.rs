//! Benchmark-approach market on a polynomial diffusion.
//!
//! The inverse benchmark is `e^{−αt} p(Z_t)` and the survival index is
//! `I_t = e^{−γt} q(Y_t)`. Short rate and mortality intensity follow from the
//! generator: `r = α − 𝐆p/p`, `μ = γ − 𝐆q/q`. Choosing `α = max 𝐆p/p` and
//! `γ = max 𝐆q/q` over the state space makes both non-negative.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generator::{apply_generator, expm, propagate, rational_bounds, DiffusionSpec, RationalBounds, StateBox};
use crate::poly::Polynomial;

const STATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MarketModel {
    spec: DiffusionSpec,
    p: Polynomial,
    q: Polynomial,
    alpha: f64,
    gamma: f64,
    gp: Polynomial,
    gq: Polynomial,
}

impl MarketModel {
    /// Builds a model with explicit level parameters.
    ///
    /// `q` may only depend on the Y coordinates. Positivity of `p` and `q`
    /// is checked at the initial point here and over the box by
    /// [`calibrate_levels`].
    pub fn new(spec: DiffusionSpec, p: Polynomial, q: Polynomial, alpha: f64, gamma: f64) -> Result<Self> {
        let d = spec.dim();
        for f in [&p, &q] {
            if f.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: f.dim() });
            }
        }
        if !(alpha.is_finite() && gamma.is_finite()) {
            return Err(Error::NonFinite("level parameter".into()));
        }
        if (0..spec.dim_x()).any(|v| q.depends_on(v)) {
            return Err(Error::InvalidSpec("index polynomial q must depend on Y only".into()));
        }
        let z0 = spec.z0();
        for (name, f) in [("p", &p), ("q", &q)] {
            let v = f.value_at(z0);
            if !(v > 0.0) {
                return Err(Error::ModelViolation(format!("{name}(z0) = {v} is not positive")));
            }
        }
        let gp = apply_generator(&spec, &p);
        let gq = apply_generator(&spec, &q);
        Ok(Self { spec, p, q, alpha, gamma, gp, gq })
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn p(&self) -> &Polynomial {
        &self.p
    }

    pub fn q(&self) -> &Polynomial {
        &self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `𝐆p`, the numerator of the drift part of the short rate.
    pub fn generator_p(&self) -> &Polynomial {
        &self.gp
    }

    /// `𝐆q`, the numerator of the drift part of the mortality intensity.
    pub fn generator_q(&self) -> &Polynomial {
        &self.gq
    }

    pub fn with_levels(&self, alpha: f64, gamma: f64) -> Self {
        Self { alpha, gamma, ..self.clone() }
    }

    pub(crate) fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.spec.dim() {
            return Err(Error::DimensionMismatch { expected: self.spec.dim(), got: z.len() });
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state {z:?}")));
        }
        if !self.spec.contains(z, STATE_TOL) {
            return Err(Error::OutsideStateSpace { point: z.to_vec() });
        }
        Ok(())
    }

    pub(crate) fn p_at(&self, z: &[f64]) -> Result<f64> {
        let v = self.p.value_at(z);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NonPositiveDenominator { value: v, point: z.to_vec() })
        }
    }

    pub(crate) fn q_at(&self, z: &[f64]) -> Result<f64> {
        let v = self.q.value_at(z);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::NonPositiveDenominator { value: v, point: z.to_vec() })
        }
    }

    /// `(S*_t)^{-1} = e^{−αt} p(z)`.
    pub fn benchmark_inverse(&self, t: f64, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        Ok((-self.alpha * t).exp() * self.p_at(z)?)
    }

    /// Zero-coupon OIS bond `P(t,T) = e^{−α(T−t)} p̂_{(t,T)}(z) / p(z)`.
    pub fn ois_bond(&self, t: f64, maturity: f64, z: &[f64]) -> Result<f64> {
        check_times(t, maturity)?;
        self.check_point(z)?;
        let pz = self.p_at(z)?;
        if t == maturity {
            return Ok(1.0);
        }
        let h = maturity - t;
        let ph = propagate(&self.spec, &self.p, h)?.value_at(z);
        Ok((-self.alpha * h).exp() * ph / pz)
    }

    pub fn short_rate(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.alpha - self.gp.value_at(z) / self.p_at(z)?)
    }

    /// `I_t = e^{−γt} q(y)` for the Y coordinates `y`.
    pub fn longevity_index(&self, t: f64, y: &[f64]) -> Result<f64> {
        let m = self.spec.dim_x();
        if y.len() != self.spec.dim_y() {
            return Err(Error::DimensionMismatch { expected: self.spec.dim_y(), got: y.len() });
        }
        let mut z = vec![0.0; m];
        for v in 0..m {
            z[v] = 0.5 * (self.spec.state_box().lo[v] + self.spec.state_box().hi[v]);
        }
        z.extend_from_slice(y);
        let bx = self.spec.state_box();
        for (k, v) in y.iter().enumerate() {
            if !(*v >= bx.lo[m + k] - STATE_TOL && *v <= bx.hi[m + k] + STATE_TOL) {
                return Err(Error::OutsideStateSpace { point: y.to_vec() });
            }
        }
        Ok((-self.gamma * t).exp() * self.q_at(&z)?)
    }

    pub fn mortality_intensity(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.gamma - self.gq.value_at(z) / self.q_at(z)?)
    }

    /// `P^l(t,T) = e^{−γT−α(T−t)} (pq)̂_{(t,T)}(z) / p(z)`.
    pub fn longevity_bond(&self, t: f64, maturity: f64, z: &[f64]) -> Result<f64> {
        check_times(t, maturity)?;
        self.check_point(z)?;
        let pz = self.p_at(z)?;
        let h = maturity - t;
        let pq = &self.p * &self.q;
        let v = if h == 0.0 { pq.value_at(z) } else { propagate(&self.spec, &pq, h)?.value_at(z) };
        Ok((-self.gamma * maturity - self.alpha * h).exp() * v / pz)
    }
}

pub(crate) fn check_times(t: f64, maturity: f64) -> Result<()> {
    if !(t.is_finite() && maturity.is_finite()) || t < 0.0 || t > maturity {
        return Err(Error::InvalidArgument(format!("need 0 <= t <= T, got t = {t}, T = {maturity}")));
    }
    Ok(())
}

/// Where the Y range used for the mortality level comes from.
#[derive(Debug, Clone)]
pub enum YRange {
    /// Use the Y sides of the specification's box as given.
    SpecBox,
    /// Use this box for Y (must have `dim_y` sides).
    Given { lo: Vec<f64>, hi: Vec<f64> },
    /// Bound Y over `[0, horizon]` from its linear dynamics with X ranging over its box.
    Derive { horizon: f64 },
}

#[derive(Debug, Clone)]
pub struct LevelOptions {
    pub y_range: YRange,
    pub refine: usize,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self { y_range: YRange::SpecBox, refine: crate::generator::DEFAULT_REFINE }
    }
}

#[derive(Debug, Clone)]
pub struct LevelReport {
    pub alpha: f64,
    pub gamma: f64,
    /// Bounds of `𝐆p/p` over the state box.
    pub alpha_bounds: RationalBounds,
    /// Bounds of `𝐆q/q` over the working box.
    pub gamma_bounds: RationalBounds,
    pub working_box: StateBox,
    pub y_range_source: String,
}

/// Sets `α = max 𝐆p/p` and `γ = max 𝐆q/q` over the working box.
pub fn calibrate_levels(
    spec: &DiffusionSpec,
    p: &Polynomial,
    q: &Polynomial,
    opts: &LevelOptions,
) -> Result<(MarketModel, LevelReport)> {
    let m = spec.dim_x();
    let (working_box, source) = match &opts.y_range {
        YRange::SpecBox => (spec.state_box().clone(), "specification box".to_string()),
        YRange::Given { lo, hi } => {
            if lo.len() != spec.dim_y() || hi.len() != spec.dim_y() {
                return Err(Error::DimensionMismatch { expected: spec.dim_y(), got: lo.len().min(hi.len()) });
            }
            let mut l = spec.state_box().lo[..m].to_vec();
            let mut h = spec.state_box().hi[..m].to_vec();
            l.extend_from_slice(lo);
            h.extend_from_slice(hi);
            (StateBox::new(l, h)?, "given Y range".to_string())
        }
        YRange::Derive { horizon } => {
            (derive_y_box(spec, *horizon)?, format!("linear Y dynamics bounded over [0, {horizon}]"))
        }
    };
    let spec = spec.with_box(working_box.clone())?;
    let gp = apply_generator(&spec, p);
    let gq = apply_generator(&spec, q);
    let alpha_bounds = rational_bounds(&gp, p, &working_box, opts.refine)?;
    let gamma_bounds = rational_bounds(&gq, q, &working_box, opts.refine)?;
    let alpha = alpha_bounds.upper;
    let gamma = gamma_bounds.upper;
    log::info!(
        "levels: alpha = {alpha} (lower {}), gamma = {gamma} (lower {}), Y range from {source}",
        alpha_bounds.lower,
        gamma_bounds.lower
    );
    let model = MarketModel::new(spec, p.clone(), q.clone(), alpha, gamma)?;
    Ok((model, LevelReport { alpha, gamma, alpha_bounds, gamma_bounds, working_box, y_range_source: source }))
}

/// Box containing every Y path over `[0, horizon]` when X stays in its box.
///
/// With `dY = (A X + B Y + c) dt`,
/// `Y_t = e^{Bt} Y_0 + ∫_0^t e^{Bu} (A X_{t−u} + c) du`; each row of the
/// integrand is bounded by optimizing the linear form over the X box, and
/// the integral is accumulated with the trapezoid rule.
pub fn derive_y_box(spec: &DiffusionSpec, horizon: f64) -> Result<StateBox> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("Y range horizon must be positive, got {horizon}")));
    }
    let m1 = spec.dim_x();
    let m2 = spec.dim_y();
    let d = m1 + m2;
    let bx = spec.state_box();
    if m2 == 0 {
        return Ok(bx.clone());
    }
    let unit = |i: usize| crate::poly::MultiIndex::unit(d, i);
    let zero = crate::poly::MultiIndex::zero(d);
    let a = DMatrix::from_fn(m2, m1, |i, j| spec.drift()[m1 + i].coefficient(&unit(j)));
    let b = DMatrix::from_fn(m2, m2, |i, j| spec.drift()[m1 + i].coefficient(&unit(m1 + j)));
    let c: Vec<f64> = (0..m2).map(|i| spec.drift()[m1 + i].coefficient(&zero)).collect();
    let y0 = nalgebra::DVector::from_column_slice(&spec.z0()[m1..]);

    let steps = 4000;
    let h = horizon / steps as f64;
    let step = expm(&b, h)?;
    let mut kernel = DMatrix::identity(m2, m2);
    // integrand bounds at u = j h
    let integrand = |k: &DMatrix<f64>| -> (Vec<f64>, Vec<f64>) {
        let ka = k * &a;
        let kc: Vec<f64> = (0..m2).map(|i| (0..m2).map(|j| k[(i, j)] * c[j]).sum()).collect();
        let mut lo = kc.clone();
        let mut hi = kc;
        for i in 0..m2 {
            for j in 0..m1 {
                let w = ka[(i, j)];
                let (x1, x2) = (w * bx.lo[j], w * bx.hi[j]);
                lo[i] += x1.min(x2);
                hi[i] += x1.max(x2);
            }
        }
        (lo, hi)
    };
    let (mut prev_lo, mut prev_hi) = integrand(&kernel);
    let mut int_lo = vec![0.0; m2];
    let mut int_hi = vec![0.0; m2];
    let mut y_lo: Vec<f64> = y0.iter().copied().collect();
    let mut y_hi = y_lo.clone();
    for _ in 0..steps {
        kernel = &kernel * &step;
        let (lo, hi) = integrand(&kernel);
        let free = &kernel * &y0;
        for i in 0..m2 {
            int_lo[i] += 0.5 * h * (prev_lo[i] + lo[i]);
            int_hi[i] += 0.5 * h * (prev_hi[i] + hi[i]);
            y_lo[i] = y_lo[i].min(free[i] + int_lo[i]);
            y_hi[i] = y_hi[i].max(free[i] + int_hi[i]);
        }
        prev_lo = lo;
        prev_hi = hi;
    }
    let mut lo = bx.lo[..m1].to_vec();
    let mut hi = bx.hi[..m1].to_vec();
    for i in 0..m2 {
        let pad = 1e-3 * (y_hi[i] - y_lo[i]) + 1e-9;
        lo.push(y_lo[i] - pad);
        hi.push(y_hi[i] + pad);
    }
    StateBox::new(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{sec5_spec, Sec5Params};

    fn sec5_model() -> MarketModel {
        let prm = Sec5Params::default();
        let spec = sec5_spec(&prm).unwrap();
        let opts = LevelOptions { y_range: YRange::Derive { horizon: 1.0 }, refine: 2000 };
        let (m, _) = calibrate_levels(&spec, &prm.p(), &prm.q(), &opts).unwrap();
        m.with_levels(4.6068, 0.0045607)
    }

    #[test]
    fn benchmark_inverse_examples() {
        let m = sec5_model();
        assert!((m.benchmark_inverse(0.0, &[0.0, 0.0]).unwrap() - 0.01).abs() < 1e-15);
        assert!((m.benchmark_inverse(1.0, &[0.0, 0.0]).unwrap() - 0.01 * (-4.6068f64).exp()).abs() < 1e-15);
        assert!((m.benchmark_inverse(1.0, &[0.0, 0.0]).unwrap() - 9.986e-5).abs() < 1e-7);
    }

    #[test]
    fn ois_bond_matches_closed_form() {
        let m = sec5_model();
        let prm = Sec5Params::default();
        let (rho, c, psi, b, a) = (prm.rho, prm.c, prm.psi, prm.bbar, 4.6068);
        for (x, h) in [(0.0, 1.0), (-0.5, 0.25), (0.9, 3.0)] {
            let got = m.ois_bond(0.0, h, &[x, 0.0]).unwrap();
            let want = ((rho + c * b) * (-a * h).exp() + c * (-(a + psi) * h).exp() * (x - b)) / (rho + c * x);
            assert!((got - want).abs() < 1e-13 * want.abs().max(1e-3), "{got} {want}");
        }
        assert_eq!(m.ois_bond(0.7, 0.7, &[0.3, 0.0]).unwrap(), 1.0);
        assert!(m.ois_bond(1.0, 0.5, &[0.0, 0.0]).is_err());
        assert!(matches!(m.ois_bond(0.0, 1.0, &[1.5, 0.0]), Err(Error::OutsideStateSpace { .. })));
    }

    #[test]
    fn short_rate_and_intensity_at_origin() {
        let m = sec5_model();
        let r = m.short_rate(&[0.0, 0.0]).unwrap();
        assert!((r - (4.6068 - 0.006 * 14.98581 * -0.79506 / 0.01)).abs() < 1e-12);
        assert!((r - 11.756).abs() < 1e-3);
        let mu = m.mortality_intensity(&[0.0, 0.0]).unwrap();
        let want = 0.0045607 + 0.00044 * (5.18417 * -0.79506 + -5.87517 * -5.05117) / 0.998;
        assert!((mu - want).abs() < 1e-14);
        assert!((mu - 0.01583).abs() < 1e-5);
    }

    #[test]
    fn index_and_longevity_bond_at_maturity() {
        let m = sec5_model();
        assert!((m.longevity_index(0.0, &[0.0]).unwrap() - 0.998).abs() < 1e-15);
        assert!((m.longevity_index(1.0, &[0.0]).unwrap() - 0.99346).abs() < 1e-5);
        let z = [0.2, 3.0];
        let pl = m.longevity_bond(0.8, 0.8, &z).unwrap();
        assert!((pl - m.longevity_index(0.8, &[3.0]).unwrap()).abs() < 1e-12);
        assert!(m.longevity_bond(0.0, 1.0, &[0.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn alpha_reproduces_calibrated_level() {
        let prm = Sec5Params::default();
        let spec = sec5_spec(&prm).unwrap();
        let opts = LevelOptions { y_range: YRange::Derive { horizon: 1.0 }, refine: 10_000 };
        let (m, rep) = calibrate_levels(&spec, &prm.p(), &prm.q(), &opts).unwrap();
        assert!((m.alpha() - 4.6068).abs() < 5e-3, "{}", m.alpha());
        let exact = prm.c * prm.psi * (prm.bbar + 1.0) / (prm.rho - prm.c);
        assert!((m.alpha() - exact).abs() < 1e-12);
        assert!(rep.alpha_bounds.lower < 0.0);
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            assert!(m.short_rate(&[x, 0.0]).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn trivial_levels() {
        let prm = Sec5Params::default();
        let spec = sec5_spec(&prm).unwrap();
        let one = Polynomial::constant(2, 1.0);
        let opts = LevelOptions { y_range: YRange::Derive { horizon: 1.0 }, refine: 500 };
        let (m, _) = calibrate_levels(&spec, &one, &one, &opts).unwrap();
        assert_eq!(m.alpha(), 0.0);
        assert_eq!(m.gamma(), 0.0);
        assert_eq!(m.ois_bond(0.0, 2.0, &[0.3, 0.0]).unwrap(), 1.0);
        assert_eq!(m.longevity_index(3.0, &[0.0]).unwrap(), 1.0);
        assert_eq!(m.short_rate(&[0.1, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn derived_y_box_contains_extreme_paths() {
        // Y driven by X pinned at either end of its box stays inside the derived range
        let prm = Sec5Params::default();
        let spec = sec5_spec(&prm).unwrap();
        let bx = derive_y_box(&spec, 1.0).unwrap();
        for x in [-1.0, 1.0] {
            let (d, k, e) = (prm.d, prm.kappa, prm.eta);
            let drift = d * (prm.bbar - x) + k * e;
            let y1 = drift / k * (1.0 - (-k * 1.0f64).exp());
            assert!(y1 >= bx.lo[1] && y1 <= bx.hi[1], "{y1} not in [{}, {}]", bx.lo[1], bx.hi[1]);
        }
        assert!(bx.lo[1] <= 0.0 && bx.hi[1] > 1000.0);
    }
}
