//! Benchmarked risk-minimizing hedge of a pure endowment portfolio with the
//! OIS bond and the longevity bond maturing at `T`.
//!
//! With `U_t = (pqg)̂_{(t,T)}(Z_t)` and benchmarked bonds
//! `P̃¹ = e^{−αT} p̂`, `P̃² = e^{−(α+γ)T} (pq)̂`, the integrand `φ` solves
//! `θφ = σᵀ∇_x U` where `θ = [σᵀ∇_x P̃¹, σᵀ∇_x P̃²]`, and the holdings are
//! `δ̄ = (n − N_{t−}) e^{−αT−γ(T−t)} φ / q(Y_t)`.
//!
//! Writing `I_t = e^{−γt} q(Y_t)` and `M = N − ∫(n − N)μ dt`, the benchmarked
//! value is `S̃ = (n − N) e^{−(α+γ)T} U / I` and the cost process obeys
//! `dC = −e^{−(α+γ)T} (U / I) dM`: flat up to the compensator drift between
//! deaths, jumping by `−e^{−αT−γ(T−u)} U_u / q(Y_u)` per death at `u`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{build_generator, conditional_expectation_path};
use crate::market::{check_times, MarketModel};
use crate::poly::{CompiledPoly, MultiIndex, Polynomial};
use crate::pricing::PortfolioState;
use crate::simulate::{path_rng, time_grid, Stepper};

/// Relative singular-value cutoff below which `θ` is treated as rank deficient.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

const DEATH_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// `θ_t` with one row per Brownian component of X and one column per bond.
pub fn theta_matrix(m: &MarketModel, t: f64, maturity: f64, z: &[f64]) -> Result<DMatrix<f64>> {
    check_times(t, maturity)?;
    m.check_point(z)?;
    let spec = m.spec();
    let h = maturity - t;
    let (_, gp) = conditional_expectation_path(spec, m.p(), z, h)?;
    let (_, gpq) = conditional_expectation_path(spec, &(m.p() * m.q()), z, h)?;
    let sigma = spec.sigma_at(z);
    let k1 = (-m.alpha() * maturity).exp();
    let k2 = (-(m.alpha() + m.gamma()) * maturity).exp();
    let c1 = sigma.transpose() * DVector::from_vec(gp) * k1;
    let c2 = sigma.transpose() * DVector::from_vec(gpq) * k2;
    Ok(DMatrix::from_columns(&[c1, c2]))
}

/// Holdings in the OIS bond and the longevity bond, with solve diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub delta: [f64; 2],
    pub phi: [f64; 2],
    /// Ratio of extreme singular values of `θ`; infinite when rank deficient.
    pub condition: f64,
    /// Set when `θφ = σᵀ∇U` was not solved exactly.
    pub least_squares: bool,
}

/// Solves `θφ = target` for `θ = [c0, c1]`.
///
/// Square and well conditioned: Cramer's rule. Full column rank with more
/// rows: least squares. Rank one: the whole exposure goes to the first
/// non-negligible column, OIS bond first, so that an OIS-replicable claim is
/// not split across two collinear instruments.
fn solve_phi(c0: &[f64], c1: &[f64], target: &[f64]) -> ([f64; 2], f64, bool) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // singular values of θ from the 2×2 Gram matrix
    let (g00, g01, g11) = (dot(c0, c0), dot(c0, c1), dot(c1, c1));
    let det = if c0.len() == 2 { (c0[0] * c1[1] - c1[0] * c0[1]).powi(2) } else { (g00 * g11 - g01 * g01).max(0.0) };
    let half_tr = 0.5 * (g00 + g11);
    let l_max = half_tr + (half_tr * half_tr - det).max(0.0).sqrt();
    let l_min = if l_max > 0.0 { det / l_max } else { 0.0 };
    let (s_max, s_min) = (l_max.sqrt(), l_min.sqrt());
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(s_max > 0.0 && s_max.is_finite()) {
        return ([0.0, 0.0], condition, true);
    }
    if s_min > SINGULAR_CUTOFF * s_max {
        if c0.len() == 2 {
            let d = c0[0] * c1[1] - c1[0] * c0[1];
            let x0 = (target[0] * c1[1] - c1[0] * target[1]) / d;
            let x1 = (c0[0] * target[1] - target[0] * c0[1]) / d;
            return ([x0, x1], condition, false);
        }
        let (r0, r1) = (dot(c0, target), dot(c1, target));
        let d = g00 * g11 - g01 * g01;
        return ([(r0 * g11 - g01 * r1) / d, (g00 * r1 - g01 * r0) / d], condition, true);
    }
    for (j, col) in [c0, c1].into_iter().enumerate() {
        let nn = dot(col, col);
        if nn.sqrt() > SINGULAR_CUTOFF * s_max {
            let mut phi = [0.0, 0.0];
            phi[j] = dot(col, target) / nn;
            return (phi, condition, true);
        }
    }
    ([0.0, 0.0], condition, true)
}

/// Risk-minimizing holdings at time `ps.t` for a pure endowment paying `g(Z_T)`.
pub fn rm_strategy(
    m: &MarketModel,
    ps: &PortfolioState,
    g: &Polynomial,
    maturity: f64,
    z: &[f64],
) -> Result<Strategy> {
    if ps.deaths > ps.n {
        return Err(Error::InvalidArgument(format!("{} deaths among {} policyholders", ps.deaths, ps.n)));
    }
    let theta = theta_matrix(m, ps.t, maturity, z)?;
    let pqg = &(m.p() * m.q()) * g;
    let (_, gu) = conditional_expectation_path(m.spec(), &pqg, z, maturity - ps.t)?;
    let target = m.spec().sigma_at(z).transpose() * DVector::from_vec(gu);
    let (c0, c1) = (theta.column(0).iter().copied().collect::<Vec<_>>(), theta.column(1).iter().copied().collect::<Vec<_>>());
    let (phi, condition, least_squares) = solve_phi(&c0, &c1, target.as_slice());
    let weight = ps.survivors() as f64 * (-m.alpha() * maturity - m.gamma() * (maturity - ps.t)).exp() / m.q_at(z)?;
    Ok(Strategy { delta: [weight * phi[0], weight * phi[1]], phi, condition, least_squares })
}

/// One row of the recorded sample path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeRow {
    pub t: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Benchmarked value `S̃_t` of the hedge portfolio (after the payment at `T`).
    pub value: f64,
    pub cost: f64,
    pub deaths: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSummary {
    pub index: usize,
    pub deaths: u64,
    /// `Ṽ_0 + ∫δ̄ dP̃ − A_T`.
    pub hedged_error: f64,
    /// `Ṽ_0 − A_T`.
    pub unhedged_error: f64,
    /// `Σ (n − N) e^{−(α+γ)T} (φ·ΔP̃ − ΔU) / I`: the part of the hedged error
    /// not explained by mortality.
    pub replication_error: f64,
    pub worst_condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub mean: f64,
    pub variance: f64,
}

/// Cost increments over steps with deaths against `−ΔN e^{−αT−γ(T−u)} U_u / q(Y_u)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JumpStats {
    pub count: usize,
    pub mean_abs_rel_deviation: f64,
    pub max_abs_rel_deviation: f64,
}

/// Pooled sample covariance of the continuous gains `δ̄·ΔP̃` and the death
/// martingale increments `ΔM`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Orthogonality {
    pub covariance: f64,
    pub std_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default)]
pub struct HedgeReport {
    pub n_paths: usize,
    pub policies: u64,
    pub maturity: f64,
    pub dt: f64,
    pub seed: u64,
    /// Benchmarked price `Ṽ_0` at the start.
    pub initial_value: f64,
    pub hedged: ErrorStats,
    pub unhedged: ErrorStats,
    /// Hedged over unhedged terminal error variance.
    pub variance_ratio: f64,
    pub replication_rms: f64,
    pub zero_death_paths: usize,
    /// RMS of the terminal hedged error over paths without deaths, net of the
    /// mortality compensator, i.e. of their replication error.
    pub zero_death_rms: f64,
    pub jumps: JumpStats,
    pub orthogonality: Orthogonality,
    pub worst_condition: f64,
    pub least_squares_steps: usize,
    pub clipped_steps: usize,
    /// Rows of the first path, every step.
    pub sample_path: Vec<HedgeRow>,
    pub paths: Vec<PathSummary>,
}

impl HedgeReport {
    /// `key = value` lines.
    pub fn summary_text(&self) -> String {
        let lines = [
            ("paths", self.n_paths.to_string()),
            ("policies", self.policies.to_string()),
            ("maturity", self.maturity.to_string()),
            ("dt", self.dt.to_string()),
            ("seed", self.seed.to_string()),
            ("initial_value", format!("{:e}", self.initial_value)),
            ("hedged_error_mean", format!("{:e}", self.hedged.mean)),
            ("hedged_error_variance", format!("{:e}", self.hedged.variance)),
            ("unhedged_error_mean", format!("{:e}", self.unhedged.mean)),
            ("unhedged_error_variance", format!("{:e}", self.unhedged.variance)),
            ("variance_ratio", format!("{:.6}", self.variance_ratio)),
            ("replication_rms", format!("{:e}", self.replication_rms)),
            ("zero_death_paths", self.zero_death_paths.to_string()),
            ("zero_death_rms", format!("{:e}", self.zero_death_rms)),
            ("death_jumps", self.jumps.count.to_string()),
            ("jump_mean_abs_rel_deviation", format!("{:e}", self.jumps.mean_abs_rel_deviation)),
            ("jump_max_abs_rel_deviation", format!("{:e}", self.jumps.max_abs_rel_deviation)),
            ("orthogonality_covariance", format!("{:e}", self.orthogonality.covariance)),
            ("orthogonality_std_error", format!("{:e}", self.orthogonality.std_error)),
            ("worst_condition", format!("{:e}", self.worst_condition)),
            ("least_squares_steps", self.least_squares_steps.to_string()),
            ("clipped_steps", self.clipped_steps.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

// Values and X-gradients of every basis monomial at a point.
struct BasisEval {
    exps: Vec<Vec<u32>>,
    dim_x: usize,
    max_deg: usize,
}

impl BasisEval {
    fn new(basis: &[MultiIndex], dim_x: usize) -> Self {
        let max_deg = basis.iter().map(|m| m.degree() as usize).max().unwrap_or(0);
        Self { exps: basis.iter().map(|m| m.exponents().to_vec()).collect(), dim_x, max_deg }
    }

    // `vals[j]` and `grads[i * len + j] = ∂_{x_i}` of monomial j.
    fn fill(&self, z: &[f64], pows: &mut [f64], vals: &mut [f64], grads: &mut [f64]) {
        let w = self.max_deg + 1;
        for (v, &x) in z.iter().enumerate() {
            pows[v * w] = 1.0;
            for e in 1..w {
                pows[v * w + e] = pows[v * w + e - 1] * x;
            }
        }
        let len = self.exps.len();
        for (j, ex) in self.exps.iter().enumerate() {
            vals[j] = ex.iter().enumerate().map(|(v, &e)| pows[v * w + e as usize]).product();
            for i in 0..self.dim_x {
                let e = ex[i] as usize;
                grads[i * len + j] = if e == 0 {
                    0.0
                } else {
                    e as f64
                        * ex.iter()
                            .enumerate()
                            .map(|(v, &f)| if v == i { pows[v * w + e - 1] } else { pows[v * w + f as usize] })
                            .product::<f64>()
                };
            }
        }
    }
}

// Coefficient vectors of U, P̃¹ and P̃² at every grid time.
struct Plan {
    u: Vec<DVector<f64>>,
    p1: Vec<DVector<f64>>,
    p2: Vec<DVector<f64>>,
    eval: BasisEval,
}

fn plan(m: &MarketModel, g: &Polynomial, n_steps: usize, dt: f64, maturity: f64) -> Result<Plan> {
    let pq = m.p() * m.q();
    let pqg = &pq * g;
    let degree = pqg.degree().max(pq.degree());
    let gen = build_generator(m.spec(), degree)?;
    let basis = gen.basis().to_vec();
    let k1 = (-m.alpha() * maturity).exp();
    let k2 = (-(m.alpha() + m.gamma()) * maturity).exp();
    let step = gen.semigroup(dt)?;
    let mut u = vec![DVector::from_vec(pqg.to_dense(&basis)?)];
    let mut p1 = vec![DVector::from_vec(m.p().to_dense(&basis)?) * k1];
    let mut p2 = vec![DVector::from_vec(pq.to_dense(&basis)?) * k2];
    // backward from T
    for _ in 0..n_steps {
        u.push(&step * u.last().unwrap());
        p1.push(&step * p1.last().unwrap());
        p2.push(&step * p2.last().unwrap());
    }
    u.reverse();
    p1.reverse();
    p2.reverse();
    Ok(Plan { u, p1, p2, eval: BasisEval::new(&basis, m.spec().dim_x()) })
}

struct PathOutcome {
    summary: PathSummary,
    jumps: Vec<f64>,
    ls_steps: usize,
    clipped: usize,
    // Σxy, Σx, Σy, Σ(xy)², count for the orthogonality estimate
    cross: [f64; 5],
    rows: Vec<HedgeRow>,
    initial_value: f64,
}

/// Simulates the hedge of `ps.survivors()` pure endowments paying `g(Z_T)`,
/// rebalanced at every step of size `dt` from `ps.t` to `maturity`.
pub fn hedge_simulation(
    m: &MarketModel,
    ps: &PortfolioState,
    g: &Polynomial,
    maturity: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<HedgeReport> {
    check_times(ps.t, maturity)?;
    if ps.deaths > ps.n {
        return Err(Error::InvalidArgument(format!("{} deaths among {} policyholders", ps.deaths, ps.n)));
    }
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::InvalidArgument(format!("hedging step must lie in (0, 0.01], got {dt}")));
    }
    if g.dim() != m.spec().dim() {
        return Err(Error::DimensionMismatch { expected: m.spec().dim(), got: g.dim() });
    }
    let mut report = HedgeReport { n_paths: paths, policies: ps.n, maturity, dt, seed, ..Default::default() };
    if ps.survivors() == 0 || paths == 0 {
        report.paths = (0..paths)
            .map(|index| PathSummary { index, deaths: ps.deaths, ..zero_summary() })
            .collect();
        return Ok(report);
    }

    let horizon = maturity - ps.t;
    let (n_steps, dt_eff) = time_grid(dt, horizon)?;
    report.dt = dt_eff;
    let plan = plan(m, g, n_steps, dt_eff, maturity)?;
    let stepper = Stepper::new(m.spec(), dt_eff)?;
    let q = CompiledPoly::new(m.q());
    let gq = CompiledPoly::new(m.generator_q());
    let p = CompiledPoly::new(m.p());
    let gc = CompiledPoly::new(g);

    let outcomes: Result<Vec<PathOutcome>> = (0..paths)
        .into_par_iter()
        .map(|i| hedge_path(m, ps, &plan, &stepper, (&p, &q, &gq, &gc), maturity, n_steps, dt_eff, seed, i))
        .collect();
    let outcomes = outcomes?;

    report.initial_value = outcomes[0].initial_value;
    let hedged: Vec<f64> = outcomes.iter().map(|o| o.summary.hedged_error).collect();
    let unhedged: Vec<f64> = outcomes.iter().map(|o| o.summary.unhedged_error).collect();
    report.hedged = stats(&hedged);
    report.unhedged = stats(&unhedged);
    report.variance_ratio = if report.unhedged.variance > 0.0 { report.hedged.variance / report.unhedged.variance } else { 0.0 };
    report.replication_rms = rms(outcomes.iter().map(|o| o.summary.replication_error));
    let zero: Vec<f64> =
        outcomes.iter().filter(|o| o.summary.deaths == ps.deaths).map(|o| o.summary.replication_error).collect();
    report.zero_death_paths = zero.len();
    report.zero_death_rms = if zero.is_empty() { f64::NAN } else { rms(zero.iter().copied()) };

    let jumps: Vec<f64> = outcomes.iter().flat_map(|o| o.jumps.iter().copied()).collect();
    if !jumps.is_empty() {
        report.jumps = JumpStats {
            count: jumps.len(),
            mean_abs_rel_deviation: jumps.iter().sum::<f64>() / jumps.len() as f64,
            max_abs_rel_deviation: jumps.iter().copied().fold(0.0, f64::max),
        };
    }
    let mut c = [0.0; 5];
    for o in &outcomes {
        for (a, b) in c.iter_mut().zip(&o.cross) {
            *a += b;
        }
    }
    if c[4] > 1.0 {
        let n = c[4];
        let mean_xy = c[0] / n;
        let var_xy = (c[3] / n - mean_xy * mean_xy).max(0.0);
        report.orthogonality = Orthogonality {
            covariance: mean_xy - (c[1] / n) * (c[2] / n),
            std_error: (var_xy / (n - 1.0)).sqrt(),
            samples: n as usize,
        };
    }
    report.worst_condition = outcomes.iter().map(|o| o.summary.worst_condition).fold(0.0, f64::max);
    report.least_squares_steps = outcomes.iter().map(|o| o.ls_steps).sum();
    report.clipped_steps = outcomes.iter().map(|o| o.clipped).sum();
    let mut outcomes = outcomes;
    report.sample_path = std::mem::take(&mut outcomes[0].rows);
    report.paths = outcomes.into_iter().map(|o| o.summary).collect();
    Ok(report)
}

fn zero_summary() -> PathSummary {
    PathSummary { index: 0, deaths: 0, hedged_error: 0.0, unhedged_error: 0.0, replication_error: 0.0, worst_condition: 0.0 }
}

#[allow(clippy::too_many_arguments)]
fn hedge_path(
    m: &MarketModel,
    ps: &PortfolioState,
    plan: &Plan,
    stepper: &Stepper,
    (p, q, gq, g): (&CompiledPoly, &CompiledPoly, &CompiledPoly, &CompiledPoly),
    maturity: f64,
    n_steps: usize,
    dt: f64,
    seed: u64,
    index: usize,
) -> Result<PathOutcome> {
    let spec = m.spec();
    let m1 = spec.dim_x();
    let d = spec.dim();
    let (alpha, gamma) = (m.alpha(), m.gamma());
    let k = (-(alpha + gamma) * maturity).exp();
    let survivors0 = ps.survivors();

    let mut rng = path_rng(seed, index as u64);
    let mut death_rng = path_rng(seed ^ DEATH_SALT, index as u64);
    let mut thresholds: Vec<f64> = (0..survivors0).map(|_| Exp1.sample(&mut death_rng)).collect();
    thresholds.sort_by(f64::total_cmp);

    let len = plan.eval.exps.len();
    let mut pows = vec![0.0; d * (plan.eval.max_deg + 1)];
    let mut vals = vec![0.0; len];
    let mut grads = vec![0.0; m1 * len];
    let mut sigma = vec![0.0; m1 * m1];
    let mut scratch = stepper.scratch();
    let mut dw = vec![0.0; m1];
    let mut c0 = vec![0.0; m1];
    let mut c1 = vec![0.0; m1];
    let mut target = vec![0.0; m1];

    // values of U, P̃¹, P̃² and the X-gradients at the current grid point
    let eval_at = |kk: usize, z: &[f64], pows: &mut [f64], vals: &mut [f64], grads: &mut [f64]| {
        plan.eval.fill(z, pows, vals, grads);
        let dot = |c: &DVector<f64>, v: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let vals_ = [dot(&plan.u[kk], vals), dot(&plan.p1[kk], vals), dot(&plan.p2[kk], vals)];
        let mut gr = [vec![0.0; m1], vec![0.0; m1], vec![0.0; m1]];
        for i in 0..m1 {
            let gi = &grads[i * len..(i + 1) * len];
            gr[0][i] = dot(&plan.u[kk], gi);
            gr[1][i] = dot(&plan.p1[kk], gi);
            gr[2][i] = dot(&plan.p2[kk], gi);
        }
        (vals_, gr)
    };

    let mut z = spec.z0().to_vec();
    let mut t = ps.t;
    let mut dead: u64 = 0;
    let mut cum_hazard = 0.0;
    let mu = |z: &[f64]| (gamma - gq.eval(z) / q.eval(z)).max(0.0);
    let mut mu_prev = mu(&z);

    let (mut cur, mut cur_grad) = eval_at(0, &z, &mut pows, &mut vals, &mut grads);
    let mut inv_i = (gamma * t).exp() / q.eval(&z);
    let mut alive = survivors0 as f64;
    let initial_value = alive * k * cur[0] * inv_i;
    let mut value = initial_value;
    let mut gains = 0.0;
    let mut replication = 0.0;
    let mut worst = 0.0f64;
    let mut ls_steps = 0;
    let mut clipped = 0;
    let mut jumps = Vec::new();
    let mut cross = [0.0; 5];
    let record = index == 0;
    let mut rows = Vec::new();

    for step in 0..n_steps {
        // rebalance
        stepper.sigma(&z, &mut sigma);
        for j in 0..m1 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for i in 0..m1 {
                let s = sigma[i * m1 + j];
                a += s * cur_grad[1][i];
                b += s * cur_grad[2][i];
                c += s * cur_grad[0][i];
            }
            c0[j] = a;
            c1[j] = b;
            target[j] = c;
        }
        let (phi, cond, ls) = solve_phi(&c0, &c1, &target);
        if ls {
            ls_steps += 1;
        }
        if cond.is_finite() {
            worst = worst.max(cond);
        } else {
            worst = f64::INFINITY;
        }
        let weight = alive * k * inv_i;
        let delta = [weight * phi[0], weight * phi[1]];
        if record {
            rows.push(HedgeRow {
                t,
                delta1: delta[0],
                delta2: delta[1],
                value,
                cost: value - gains,
                deaths: ps.deaths + dead,
            });
        }

        // evolve the state and the deaths
        stepper.draw(&mut rng, &mut dw);
        if stepper.step(&mut z, &dw, &mut scratch)? {
            clipped += 1;
        }
        t = ps.t + (step + 1) as f64 * dt;
        let mu_new = mu(&z);
        if !mu_new.is_finite() {
            return Err(Error::NonFinite(format!("mortality intensity at {z:?}")));
        }
        cum_hazard += 0.5 * dt * (mu_prev + mu_new);
        let compensator = alive * mu_prev * dt;
        mu_prev = mu_new;
        let new_dead = thresholds.partition_point(|e| *e <= cum_hazard) as u64 - dead;

        let (next, next_grad) = eval_at(step + 1, &z, &mut pows, &mut vals, &mut grads);
        let d1 = next[1] - cur[1];
        let d2 = next[2] - cur[2];
        let gain = delta[0] * d1 + delta[1] * d2;
        replication += weight * (phi[0] * d1 + phi[1] * d2 - (next[0] - cur[0]));
        gains += gain;

        dead += new_dead;
        alive = (survivors0 - dead) as f64;
        let inv_i_next = (gamma * t).exp() / q.eval(&z);
        let value_next = alive * k * next[0] * inv_i_next;
        let cost_change = value_next - value - gain;
        if new_dead > 0 {
            let predicted = -(new_dead as f64) * k * next[0] * inv_i_next;
            if predicted != 0.0 {
                jumps.push(((cost_change - predicted) / predicted).abs());
            }
        }
        let dm = new_dead as f64 - compensator;
        cross[0] += gain * dm;
        cross[1] += gain;
        cross[2] += dm;
        cross[3] += (gain * dm).powi(2);
        cross[4] += 1.0;

        value = value_next;
        inv_i = inv_i_next;
        cur = next;
        cur_grad = next_grad;
    }

    let payment = alive * (-alpha * maturity).exp() * p.eval(&z) * g.eval(&z);
    let hedged_error = initial_value + gains - payment;
    if record {
        rows.push(HedgeRow { t: maturity, delta1: 0.0, delta2: 0.0, value: 0.0, cost: payment - gains, deaths: ps.deaths + dead });
    }
    Ok(PathOutcome {
        summary: PathSummary {
            index,
            deaths: ps.deaths + dead,
            hedged_error,
            unhedged_error: initial_value - payment,
            replication_error: replication,
            worst_condition: worst,
        },
        jumps,
        ls_steps,
        clipped,
        cross,
        rows,
        initial_value,
    })
}

fn stats(x: &[f64]) -> ErrorStats {
    let n = x.len();
    if n == 0 {
        return ErrorStats::default();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 { x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    ErrorStats { mean, variance }
}

fn rms(x: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in x {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}
