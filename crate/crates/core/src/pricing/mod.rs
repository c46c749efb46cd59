//! Real-world prices of the three insurance building blocks.
//!
//! With `n − N_t` survivors and state `z = (x, y)`:
//!
//! * pure endowment paying `g(Z_T)` per survivor at `T`:
//!   `V^T = (n−N) e^{−(γ+α)(T−t)} (pqg)̂_{(t,T)}(z) / (p(z) q(y))`;
//! * term insurance paying `R(Z_τ)` at death `τ ≤ T`:
//!   `V^τ = (n−N) e^{(γ+α)t} ∫_t^T e^{−(γ+α)u} E[R p (γq − 𝐆q)](u) du / (p q)`,
//!   the time integral by Gauss–Legendre;
//! * annuity with rate `C`: `V^C = V^T + V^τ` with `g = R = C`.

mod chebyshev;
mod quadrature;

use std::fmt;
use std::sync::Arc;

pub use chebyshev::{approximate_payoff, approximate_payoff_in, PayoffApproximation};
pub use quadrature::gauss_legendre;

use crate::error::{Error, Result};
use crate::generator::build_generator;
use crate::market::{check_times, MarketModel};
use crate::poly::{MultiIndex, Polynomial};

pub const DEFAULT_QUAD_NODES: usize = 64;

/// Policyholder count `n`, deaths so far `N_t`, and the valuation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioState {
    pub n: u64,
    pub deaths: u64,
    pub t: f64,
}

impl PortfolioState {
    pub fn new(n: u64, deaths: u64, t: f64) -> Result<Self> {
        if deaths > n {
            return Err(Error::InvalidArgument(format!("{deaths} deaths among {n} policyholders")));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!("valuation time {t}")));
        }
        Ok(Self { n, deaths, t })
    }

    pub fn survivors(&self) -> u64 {
        self.n - self.deaths
    }
}

fn check_state(ps: &PortfolioState, maturity: f64) -> Result<()> {
    if ps.deaths > ps.n {
        return Err(Error::InvalidArgument(format!("{} deaths among {} policyholders", ps.deaths, ps.n)));
    }
    check_times(ps.t, maturity)
}

pub fn price_pure_endowment(
    m: &MarketModel,
    ps: &PortfolioState,
    g: &Polynomial,
    maturity: f64,
    z: &[f64],
) -> Result<f64> {
    check_state(ps, maturity)?;
    m.check_point(z)?;
    let pq = m.p_at(z)? * m.q_at(z)?;
    let h = maturity - ps.t;
    let pqg = &(m.p() * m.q()) * g;
    let e = if h == 0.0 { pqg.value_at(z) } else { build_generator(m.spec(), pqg.degree())?.propagate(&pqg, h)?.value_at(z) };
    Ok(ps.survivors() as f64 * ((-(m.gamma() + m.alpha()) * h).exp() * e / pq))
}

/// Polynomial whose conditional expectation is the benchmarked death-benefit
/// density: `R p (γq − 𝐆q)`.
pub fn term_insurance_integrand(m: &MarketModel, r: &Polynomial) -> Polynomial {
    let hazard = &m.q().scale(m.gamma()) - m.generator_q();
    &(r * m.p()) * &hazard
}

pub fn price_term_insurance(
    m: &MarketModel,
    ps: &PortfolioState,
    r: &Polynomial,
    maturity: f64,
    z: &[f64],
    quad_nodes: usize,
) -> Result<f64> {
    check_state(ps, maturity)?;
    if quad_nodes < 2 {
        return Err(Error::InvalidArgument(format!("at least 2 quadrature nodes required, got {quad_nodes}")));
    }
    m.check_point(z)?;
    let pq = m.p_at(z)? * m.q_at(z)?;
    let t = ps.t;
    if maturity == t || ps.survivors() == 0 {
        return Ok(0.0);
    }
    let f = term_insurance_integrand(m, r);
    if f.is_zero() {
        return Ok(0.0);
    }
    let gen = build_generator(m.spec(), f.degree())?;
    let coeffs = nalgebra::DVector::from_vec(f.to_dense(gen.basis())?);
    let h_z = nalgebra::DVector::from_iterator(gen.basis().len(), gen.basis().iter().map(|b| monomial_at(b, z)));
    let rate = m.gamma() + m.alpha();
    let (nodes, weights) = gauss_legendre(quad_nodes, t, maturity);
    let mut integral = 0.0;
    for (u, w) in nodes.iter().zip(&weights) {
        let moved = gen.semigroup(u - t)? * &coeffs;
        integral += w * (-rate * (u - t)).exp() * h_z.dot(&moved);
    }
    Ok(ps.survivors() as f64 * (integral / pq))
}

fn monomial_at(m: &MultiIndex, z: &[f64]) -> f64 {
    m.exponents().iter().zip(z).map(|(e, x)| x.powi(*e as i32)).product()
}

pub fn price_annuity(
    m: &MarketModel,
    ps: &PortfolioState,
    c: &Polynomial,
    maturity: f64,
    z: &[f64],
    quad_nodes: usize,
) -> Result<f64> {
    let survival = price_pure_endowment(m, ps, c, maturity, z)?;
    let death = price_term_insurance(m, ps, c, maturity, z, quad_nodes)?;
    Ok(survival + death)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingBlock {
    PureEndowment,
    TermInsurance,
    Annuity,
}

impl fmt::Display for BuildingBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PureEndowment => "pure_endowment",
            Self::TermInsurance => "term_insurance",
            Self::Annuity => "annuity",
        })
    }
}

pub type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Payoff {
    Polynomial(Polynomial),
    /// Priced through a Chebyshev interpolant of the given degree in `vars`.
    Continuous { label: String, func: PayoffFn, vars: Vec<usize>, degree: usize },
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Polynomial(p) => write!(f, "Polynomial({p})"),
            Self::Continuous { label, vars, degree, .. } => {
                write!(f, "Continuous {{ label: {label:?}, vars: {vars:?}, degree: {degree} }}")
            }
        }
    }
}

/// `max(K − e^{−γT} q(y), 0)`: a put on the survival index at `T`.
pub fn index_put(m: &MarketModel, strike: f64, maturity: f64) -> Payoff {
    index_option(m, strike, maturity, true, 16)
}

/// `max(e^{−γT} q(y) − K, 0)`.
pub fn index_call(m: &MarketModel, strike: f64, maturity: f64) -> Payoff {
    index_option(m, strike, maturity, false, 16)
}

pub fn index_option(m: &MarketModel, strike: f64, maturity: f64, put: bool, degree: usize) -> Payoff {
    let q = crate::poly::CompiledPoly::new(m.q());
    let disc = (-m.gamma() * maturity).exp();
    let func: PayoffFn = Arc::new(move |z: &[f64]| {
        let i = disc * q.eval(z);
        if put { (strike - i).max(0.0) } else { (i - strike).max(0.0) }
    });
    let vars = (m.spec().dim_x()..m.spec().dim()).collect();
    let kind = if put { "index_put" } else { "index_call" };
    Payoff::Continuous { label: format!("{kind}(K={strike}, T={maturity})"), func, vars, degree }
}

impl Payoff {
    pub fn with_degree(&self, degree: usize) -> Payoff {
        match self {
            Self::Continuous { label, func, vars, .. } => {
                Self::Continuous { label: label.clone(), func: func.clone(), vars: vars.clone(), degree }
            }
            p => p.clone(),
        }
    }

    /// Polynomial to price with, and the interpolation error if any.
    pub fn polynomial(&self, m: &MarketModel) -> Result<(Polynomial, Option<f64>)> {
        match self {
            Self::Polynomial(p) => Ok((p.clone(), None)),
            Self::Continuous { func, vars, degree, .. } => {
                let a = approximate_payoff_in(func.as_ref(), m.spec().state_box(), vars, *degree)?;
                Ok((a.poly, Some(a.sup_error)))
            }
        }
    }

    /// Value of the payoff itself at `z`.
    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            Self::Polynomial(p) => p.value_at(z),
            Self::Continuous { func, .. } => func(z),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PayoffSpec {
    pub kind: BuildingBlock,
    pub payoff: Payoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceResult {
    pub value: f64,
    /// `closed_form` or `chebyshev(<degree>)`.
    pub method: String,
    pub approx_error: Option<f64>,
}

pub fn price(
    m: &MarketModel,
    ps: &PortfolioState,
    spec: &PayoffSpec,
    maturity: f64,
    z: &[f64],
    quad_nodes: usize,
) -> Result<PriceResult> {
    let (poly, approx_error) = spec.payoff.polynomial(m)?;
    let value = match spec.kind {
        BuildingBlock::PureEndowment => price_pure_endowment(m, ps, &poly, maturity, z)?,
        BuildingBlock::TermInsurance => price_term_insurance(m, ps, &poly, maturity, z, quad_nodes)?,
        BuildingBlock::Annuity => price_annuity(m, ps, &poly, maturity, z, quad_nodes)?,
    };
    let method = match &spec.payoff {
        Payoff::Polynomial(_) => "closed_form".to_string(),
        Payoff::Continuous { degree, .. } => format!("chebyshev({degree})"),
    };
    Ok(PriceResult { value, method, approx_error })
}

/// Bound on the pricing error of a pure endowment caused by replacing the
/// payoff with an approximant of sup-norm error `err`.
pub fn pure_endowment_error_bound(
    m: &MarketModel,
    ps: &PortfolioState,
    maturity: f64,
    z: &[f64],
    err: f64,
    refine: usize,
) -> Result<f64> {
    let pq = m.p() * m.q();
    let one = Polynomial::constant(pq.dim(), 1.0);
    let b = crate::generator::rational_bounds(&pq, &one, m.spec().state_box(), refine)?;
    let h = maturity - ps.t;
    Ok(ps.survivors() as f64 * (-(m.gamma() + m.alpha()) * h).exp() * b.upper * err / (m.p_at(z)? * m.q_at(z)?))
}
