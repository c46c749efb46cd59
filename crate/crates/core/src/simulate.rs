//! Path simulation of the state, the market quantities derived from it,
//! and policyholder death times.
//!
//! X follows an Euler–Maruyama step with volatility `√a` (negative parts of
//! `a` clamped) and is clipped back to its box afterwards. Y solves its linear
//! ODE by the trapezoidal rule, implicit in Y. Every path owns a ChaCha
//! stream selected by its index, so results do not depend on thread count.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::{DiffusionSpec, StateBox};
use crate::market::MarketModel;
use crate::poly::{CompiledPoly, MultiIndex};
use crate::pricing::{BuildingBlock, PayoffSpec};

const DEATH_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Random stream of path `index` under `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub(crate) struct StepScratch {
    sigma: Vec<f64>,
    x_new: Vec<f64>,
    y_rhs: Vec<f64>,
}

/// One Euler step of the state.
pub(crate) struct Stepper {
    dim_x: usize,
    dim_y: usize,
    dt: f64,
    sqrt_dt: f64,
    drift_x: Vec<CompiledPoly>,
    // X block of a; only the diagonal when it is diagonal everywhere
    a_x: Vec<Vec<CompiledPoly>>,
    diagonal: bool,
    y_a: DMatrix<f64>,
    y_b: DMatrix<f64>,
    y_c: DVector<f64>,
    y_solve: DMatrix<f64>,
    x_box: StateBox,
}

impl Stepper {
    pub(crate) fn new(spec: &DiffusionSpec, dt: f64) -> Result<Self> {
        let m1 = spec.dim_x();
        let m2 = spec.dim_y();
        let d = m1 + m2;
        let drift_x = spec.drift()[..m1].iter().map(CompiledPoly::new).collect();
        let diagonal = (0..m1).all(|i| (0..m1).all(|j| i == j || spec.diffusion()[i][j].is_zero()));
        let a_x = (0..m1).map(|i| (0..m1).map(|j| CompiledPoly::new(&spec.diffusion()[i][j])).collect()).collect();
        let unit = |i: usize| MultiIndex::unit(d, i);
        let y_a = DMatrix::from_fn(m2, m1, |i, j| spec.drift()[m1 + i].coefficient(&unit(j)));
        let y_b = DMatrix::from_fn(m2, m2, |i, j| spec.drift()[m1 + i].coefficient(&unit(m1 + j)));
        let y_c = DVector::from_fn(m2, |i, _| spec.drift()[m1 + i].coefficient(&MultiIndex::zero(d)));
        let lhs = DMatrix::identity(m2, m2) - &y_b * (0.5 * dt);
        let y_solve = lhs
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument(format!("trapezoidal Y step is singular at dt = {dt}")))?;
        let bx = spec.state_box();
        let x_box = StateBox::new(bx.lo[..m1].to_vec(), bx.hi[..m1].to_vec())?;
        Ok(Self { dim_x: m1, dim_y: m2, dt, sqrt_dt: dt.sqrt(), drift_x, a_x, diagonal, y_a, y_b, y_c, y_solve, x_box })
    }

    /// Volatility matrix at the X part of `z`, written row-major into `out`.
    pub(crate) fn sigma(&self, z: &[f64], out: &mut [f64]) {
        let m = self.dim_x;
        if self.diagonal {
            out.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                out[i * m + i] = self.a_x[i][i].eval(z).max(0.0).sqrt();
            }
            return;
        }
        let a = DMatrix::from_fn(m, m, |i, j| self.a_x[i][j].eval(z));
        let eig = nalgebra::SymmetricEigen::new(a);
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let s = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = s[(i, j)];
            }
        }
    }

    /// Working buffers for [`Stepper::step`].
    pub(crate) fn scratch(&self) -> StepScratch {
        StepScratch {
            sigma: vec![0.0; self.dim_x * self.dim_x],
            x_new: vec![0.0; self.dim_x],
            y_rhs: vec![0.0; self.dim_y],
        }
    }

    /// Advances `z` by one step using the Brownian increments `dw`; returns
    /// whether X had to be clipped.
    pub(crate) fn step(&self, z: &mut [f64], dw: &[f64], s: &mut StepScratch) -> Result<bool> {
        let m1 = self.dim_x;
        self.sigma(z, &mut s.sigma);
        for i in 0..m1 {
            let b = self.drift_x[i].eval(z);
            let mut noise = 0.0;
            for j in 0..m1 {
                noise += s.sigma[i * m1 + j] * dw[j];
            }
            s.x_new[i] = z[i] + b * self.dt + noise;
        }
        if s.x_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state after Euler step from {z:?}")));
        }
        let clipped = self.x_box.clamp(&mut s.x_new);
        if self.dim_y > 0 {
            let (x, y) = z.split_at(m1);
            for i in 0..self.dim_y {
                let mut f = 2.0 * self.y_c[i];
                for j in 0..m1 {
                    f += self.y_a[(i, j)] * (x[j] + s.x_new[j]);
                }
                for j in 0..self.dim_y {
                    f += self.y_b[(i, j)] * y[j];
                }
                s.y_rhs[i] = y[i] + 0.5 * self.dt * f;
            }
            for i in 0..self.dim_y {
                let mut v = 0.0;
                for j in 0..self.dim_y {
                    v += self.y_solve[(i, j)] * s.y_rhs[j];
                }
                z[m1 + i] = v;
            }
        }
        z[..m1].copy_from_slice(&s.x_new);
        Ok(clipped)
    }

    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng, dw: &mut [f64]) {
        for v in dw.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *v = n * self.sqrt_dt;
        }
    }
}

/// Number of steps and effective step size covering `[0, horizon]`.
pub fn time_grid(dt: f64, horizon: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && dt > 0.0) || !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt}, horizon = {horizon}")));
    }
    let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return Ok((0, dt));
    }
    Ok((n, horizon / n as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Requested step; the grid uses `horizon / ceil(horizon / dt)`.
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Keep every `record_every`-th step (the final time is always kept).
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        Self { n_paths, dt, horizon, seed, record_every: 1 }
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// Row-major `times.len() × dim` states.
    pub states: Vec<f64>,
    /// Cumulative mortality hazard at the recorded times, when tracked.
    pub hazard: Vec<f64>,
    pub clipped_steps: usize,
    pub negative_intensity_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub dim: usize,
    pub dt: f64,
    pub seed: u64,
    pub paths: Vec<Path>,
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn state(&self, path: usize, k: usize) -> &[f64] {
        &self.paths[path].states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn has_hazard(&self) -> bool {
        self.paths.first().is_some_and(|p| !p.hazard.is_empty())
    }

    /// Fraction of Euler steps whose X update left the box.
    pub fn clipped_fraction(&self) -> f64 {
        let steps = self.n_steps() * self.paths.len();
        if steps == 0 {
            return 0.0;
        }
        self.paths.iter().map(|p| p.clipped_steps).sum::<usize>() as f64 / steps as f64
    }

    pub fn negative_intensity_steps(&self) -> usize {
        self.paths.iter().map(|p| p.negative_intensity_steps).sum()
    }

    pub fn n_steps(&self) -> usize {
        let horizon = self.times.last().copied().unwrap_or(0.0);
        (horizon / self.dt).round() as usize
    }

    /// Index of the recorded time equal to `t` (to rounding).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }

    /// State at time `t` by linear interpolation between recorded times.
    pub fn state_at(&self, path: usize, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|s| *s <= t).saturating_sub(1).min(self.times.len() - 1);
        if k + 1 >= self.times.len() || self.times[k] == t {
            return self.state(path, k).to_vec();
        }
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let a = self.state(path, k);
        let b = self.state(path, k + 1);
        a.iter().zip(b).map(|(a, b)| a + w * (b - a)).collect()
    }
}

fn run_paths(
    spec: &DiffusionSpec,
    cfg: &SimConfig,
    intensity: Option<(&CompiledPoly, &CompiledPoly, f64)>,
) -> Result<PathBundle> {
    let (n_steps, dt) = time_grid(cfg.dt, cfg.horizon)?;
    let stepper = Stepper::new(spec, dt)?;
    let d = spec.dim();
    let m1 = spec.dim_x();
    let stride = cfg.record_every.max(1);
    let recorded: Vec<usize> = (0..=n_steps).filter(|k| k % stride == 0 || *k == n_steps).collect();
    let times: Vec<f64> = recorded.iter().map(|&k| k as f64 * dt).collect();
    let mu = |z: &[f64]| -> f64 {
        let (gq, q, gamma) = intensity.expect("intensity requested");
        gamma - gq.eval(z) / q.eval(z)
    };
    let paths: Result<Vec<Path>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i as u64);
            let mut z = spec.z0().to_vec();
            let mut dw = vec![0.0; m1];
            let mut scratch = stepper.scratch();
            let mut states = Vec::with_capacity(recorded.len() * d);
            let mut hazard = Vec::new();
            let mut cum = 0.0;
            let mut mu_prev = 0.0;
            let mut negative = 0;
            if intensity.is_some() {
                let m0 = mu(&z);
                if m0 < 0.0 {
                    negative += 1;
                }
                mu_prev = m0.max(0.0);
                hazard.reserve(recorded.len());
            }
            let mut clipped = 0;
            let mut next = 0;
            for k in 0..=n_steps {
                if k > 0 {
                    stepper.draw(&mut rng, &mut dw);
                    if stepper.step(&mut z, &dw, &mut scratch)? {
                        clipped += 1;
                    }
                    if intensity.is_some() {
                        let m = mu(&z);
                        if !m.is_finite() {
                            return Err(Error::NonFinite(format!("mortality intensity at {z:?}")));
                        }
                        if m < 0.0 {
                            negative += 1;
                        }
                        let m = m.max(0.0);
                        cum += 0.5 * dt * (mu_prev + m);
                        mu_prev = m;
                    }
                }
                if next < recorded.len() && recorded[next] == k {
                    states.extend_from_slice(&z);
                    if intensity.is_some() {
                        hazard.push(cum);
                    }
                    next += 1;
                }
            }
            Ok(Path { states, hazard, clipped_steps: clipped, negative_intensity_steps: negative })
        })
        .collect();
    let bundle = PathBundle { times, dim: d, dt, seed: cfg.seed, paths: paths? };
    if bundle.negative_intensity_steps() > 0 {
        log::warn!("mortality intensity clipped at 0 on {} steps", bundle.negative_intensity_steps());
    }
    Ok(bundle)
}

/// Simulates the state only.
pub fn simulate_state(spec: &DiffusionSpec, cfg: &SimConfig) -> Result<PathBundle> {
    run_paths(spec, cfg, None)
}

/// Simulates the state and accumulates the mortality hazard `∫μ` along each path.
pub fn simulate_market(m: &MarketModel, cfg: &SimConfig) -> Result<PathBundle> {
    let gq = CompiledPoly::new(m.generator_q());
    let q = CompiledPoly::new(m.q());
    run_paths(m.spec(), cfg, Some((&gq, &q, m.gamma())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeathTime {
    At(f64),
    /// No death within the simulated horizon.
    Beyond,
}

impl DeathTime {
    pub fn before(&self, t: f64) -> bool {
        matches!(self, DeathTime::At(s) if *s <= t)
    }
}

/// Death times of `n` policyholders on every path: `τ = inf{t : ∫_0^t μ ≥ E}`
/// with independent unit exponentials `E`.
pub fn simulate_deaths(bundle: &PathBundle, n: usize, seed: u64) -> Result<Vec<Vec<DeathTime>>> {
    if !bundle.has_hazard() && bundle.n_paths() > 0 {
        return Err(Error::InvalidArgument("path bundle carries no mortality hazard".into()));
    }
    Ok((0..bundle.n_paths())
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed ^ DEATH_SEED_SALT, i as u64);
            let h = &bundle.paths[i].hazard;
            (0..n)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut rng);
                    invert_hazard(&bundle.times, h, e)
                })
                .collect()
        })
        .collect())
}

/// First time the piecewise-linear cumulative hazard reaches `level`.
pub fn invert_hazard(times: &[f64], hazard: &[f64], level: f64) -> DeathTime {
    let k = hazard.partition_point(|h| *h < level);
    if k >= hazard.len() {
        return DeathTime::Beyond;
    }
    if k == 0 {
        return DeathTime::At(times[0].max(f64::MIN_POSITIVE));
    }
    let (h0, h1) = (hazard[k - 1], hazard[k]);
    let w = if h1 > h0 { (level - h0) / (h1 - h0) } else { 1.0 };
    DeathTime::At(times[k - 1] + w * (times[k] - times[k - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Monte Carlo price per policyholder at time 0 and the initial state:
/// `S*_0 E[∫ (S*_u)^{-1} dD_u]` with one simulated life per path.
///
/// Continuous payoffs are evaluated directly, not through their interpolant.
pub fn mc_price(bundle: &PathBundle, spec: &PayoffSpec, m: &MarketModel, maturity: f64) -> Result<McEstimate> {
    let n = bundle.n_paths();
    if n < 100 {
        return Err(Error::InvalidArgument(format!("Monte Carlo needs at least 100 paths, got {n}")));
    }
    let k_t = bundle
        .time_index(maturity)
        .ok_or_else(|| Error::InvalidArgument(format!("maturity {maturity} is not a recorded time of the bundle")))?;
    let deaths = simulate_deaths(bundle, 1, bundle.seed)?;
    let p = CompiledPoly::new(m.p());
    let p0 = p.eval(bundle.state(0, 0));
    let alpha = m.alpha();
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let tau = deaths[i][0];
            let mut v = 0.0;
            if matches!(spec.kind, BuildingBlock::PureEndowment | BuildingBlock::Annuity) && !tau.before(maturity) {
                let z = bundle.state(i, k_t);
                v += (-alpha * maturity).exp() * p.eval(z) * spec.payoff.value(z) / p0;
            }
            if matches!(spec.kind, BuildingBlock::TermInsurance | BuildingBlock::Annuity) {
                if let DeathTime::At(s) = tau {
                    if s <= maturity {
                        let z = bundle.state_at(i, s);
                        v += (-alpha * s).exp() * p.eval(&z) * spec.payoff.value(&z) / p0;
                    }
                }
            }
            v
        })
        .collect();
    Ok(mean_and_error(&samples))
}

pub fn mean_and_error(samples: &[f64]) -> McEstimate {
    let n = samples.len();
    if n == 0 {
        return McEstimate { mean: f64::NAN, std_error: f64::NAN, n: 0 };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return McEstimate { mean, std_error: f64::NAN, n };
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    McEstimate { mean, std_error: (var / n as f64).sqrt(), n }
}
