//! Reconstruction of the mortality factor from the filtered benchmark factor
//! and least-squares fit of `(d, κ, η)` to the longevity index.

use super::optim::{nelder_mead, NmOptions};
use super::ObservationSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YParams {
    pub d: f64,
    pub kappa: f64,
    pub eta: f64,
}

/// `Ŷ_{t_k} = e^{−κt_k} Σ_{s<k} (−d X̂_s + d b̄ + κη) e^{κt_s} (t_{s+1} − t_s)`
/// at every grid time (left Riemann sum, so `Ŷ_{t_0} = 0`).
pub fn reconstruct_y(prm: &YParams, bbar: f64, xhat: &[f64], times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            let s = k - 1;
            let drive = -prm.d * xhat[s] + prm.d * bbar + prm.kappa * prm.eta;
            acc += drive * (prm.kappa * times[s]).exp() * (times[k] - times[s]);
        }
        out.push((-prm.kappa * times[k]).exp() * acc);
    }
    out
}

/// Fixed coefficients of the longevity index `e^{−γt}(δ + νy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexLevels {
    pub delta: f64,
    pub nu: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YFit {
    pub params: YParams,
    pub sse: f64,
    /// Residual standard deviation, used as `σ₂`.
    pub residual_sd: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The objective does not depend on `(d, κ, η)` (ν = 0); `params` is the
    /// initial point.
    pub degenerate: bool,
}

/// Sum of squared longevity-index residuals at `prm`.
pub fn y_objective(prm: &YParams, bbar: f64, levels: &IndexLevels, obs: &ObservationSet, xhat: &[f64]) -> f64 {
    let y = reconstruct_y(prm, bbar, xhat, &obs.times);
    obs.longevity_points()
        .map(|(k, t, v)| {
            let model = (-levels.gamma * t).exp() * (levels.delta + levels.nu * y[k]);
            (v - model).powi(2)
        })
        .sum()
}

/// Minimizes [`y_objective`] over `(d, κ, η)` by Nelder–Mead from `init`.
pub fn fit_y_least_squares(
    obs: &ObservationSet,
    xhat: &[f64],
    bbar: f64,
    init: &YParams,
    levels: &IndexLevels,
    opts: &NmOptions,
) -> Result<YFit> {
    if xhat.len() != obs.len() {
        return Err(Error::DimensionMismatch { expected: obs.len(), got: xhat.len() });
    }
    let m = obs.longevity_points().count();
    if m < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 longevity observations, got {m}")));
    }
    let f = |x: &[f64]| y_objective(&YParams { d: x[0], kappa: x[1], eta: x[2] }, bbar, levels, obs, xhat);
    let x0 = [init.d, init.kappa, init.eta];
    if levels.nu == 0.0 {
        let sse = f(&x0);
        return Ok(YFit {
            params: *init,
            sse,
            residual_sd: (sse / m as f64).sqrt(),
            iterations: 0,
            converged: true,
            degenerate: true,
        });
    }
    let step: Vec<f64> = x0.iter().map(|v| if v.abs() > 1e-8 { 0.1 * v.abs() } else { 0.1 }).collect();
    // restart from the best point until a restart no longer improves it
    let mut best = nelder_mead(f, &x0, &step, opts);
    let mut iterations = best.iterations;
    for _ in 0..5 {
        let step: Vec<f64> = best.x.iter().map(|v| if v.abs() > 1e-8 { 0.05 * v.abs() } else { 0.05 }).collect();
        let again = nelder_mead(f, &best.x, &step, opts);
        iterations += again.iterations;
        let improved = again.value < best.value * (1.0 - 1e-12);
        best = if again.value <= best.value { again } else { best };
        if !improved {
            break;
        }
    }
    if !best.converged {
        log::warn!("longevity least squares stopped after {iterations} iterations without converging");
    }
    let params = YParams { d: best.x[0], kappa: best.x[1], eta: best.x[2] };
    Ok(YFit {
        params,
        sse: best.value,
        residual_sd: (best.value / m as f64).sqrt(),
        iterations,
        converged: best.converged,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Sec5Params;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
    }

    fn paper_y() -> YParams {
        let p = Sec5Params::default();
        YParams { d: p.d, kappa: p.kappa, eta: p.eta }
    }

    fn xpath(times: &[f64]) -> Vec<f64> {
        times.iter().map(|t| -0.79506 + 0.7 * (-15.0 * t).exp() + 0.1 * (40.0 * t).sin()).collect()
    }

    #[test]
    fn no_drive_gives_zero() {
        let t = grid(100);
        let y = reconstruct_y(&YParams { d: 0.0, kappa: 2.0, eta: 0.0 }, -0.5, &xpath(&t), &t);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_factor_matches_ode_solution() {
        // X̂ ≡ b̄: Y' = κ(η − Y), Y(0) = 0 ⇒ Y = η(1 − e^{−κt})
        let prm = YParams { d: 3.0, kappa: 1.5, eta: 0.7 };
        for n in [101, 1001] {
            let t = grid(n);
            let y = reconstruct_y(&prm, -0.3, &vec![-0.3; n], &t);
            let err = t.iter().zip(&y).map(|(t, y)| (y - prm.eta * (1.0 - (-prm.kappa * t).exp())).abs()).fold(0.0, f64::max);
            let dt = 1.0 / (n - 1) as f64;
            assert!(err < prm.eta * prm.kappa * dt, "n = {n}: {err}");
        }
    }

    #[test]
    fn linear_in_d_and_eta() {
        let t = grid(200);
        let x = xpath(&t);
        let a = YParams { d: 1.0, kappa: -2.0, eta: 0.5 };
        let b = YParams { d: -0.4, kappa: -2.0, eta: 3.0 };
        let sum = YParams { d: a.d + b.d, kappa: -2.0, eta: a.eta + b.eta };
        let (ya, yb, ys) = (reconstruct_y(&a, 0.1, &x, &t), reconstruct_y(&b, 0.1, &x, &t), reconstruct_y(&sum, 0.1, &x, &t));
        for k in 0..t.len() {
            assert!((ya[k] + yb[k] - ys[k]).abs() < 1e-9 * (1.0 + ys[k].abs()));
        }
    }

    #[test]
    fn golden_value_at_paper_parameters() {
        let t = grid(517);
        let x = xpath(&t);
        let prm = paper_y();
        let y = reconstruct_y(&prm, -0.79506, &x, &t);
        // direct evaluation of the displayed sum
        for k in [12usize, 240, 516] {
            let direct: f64 = (0..k)
                .map(|s| {
                    (-prm.d * x[s] + prm.d * -0.79506 + prm.kappa * prm.eta)
                        * (prm.kappa * (t[s] - t[k])).exp()
                        * (t[s + 1] - t[s])
                })
                .sum();
            assert!((y[k] / direct - 1.0).abs() < 1e-12);
        }
        // frozen fixture
        assert!((y[12] - 0.660_472_881_949_432_9).abs() < 1e-12);
        assert!((y[516] - 1_736.141_950_521_411_4).abs() < 1e-8);
    }

    fn synthetic(nu: f64) -> (ObservationSet, Vec<f64>, IndexLevels) {
        let t = grid(517);
        let x = xpath(&t);
        let levels = IndexLevels { delta: 0.998, nu, gamma: 0.0045607 };
        let y = reconstruct_y(&paper_y(), -0.79506, &x, &t);
        let idx: Vec<Option<f64>> = (0..517)
            .map(|k| if k % 12 == 0 { Some((-levels.gamma * t[k]).exp() * (levels.delta + levels.nu * y[k])) } else { None })
            .collect();
        (ObservationSet::new(t, vec![0.01; 517], idx).unwrap(), x, levels)
    }

    #[test]
    fn noiseless_recovery() {
        let (obs, x, levels) = synthetic(-0.00044);
        let init = YParams { d: 4.0, kappa: -5.0, eta: -4.0 };
        let fit = fit_y_least_squares(&obs, &x, -0.79506, &init, &levels, &NmOptions { tol: 1e-10, max_iter: 20_000 }).unwrap();
        let p = paper_y();
        for (got, want) in [(fit.params.d, p.d), (fit.params.kappa, p.kappa), (fit.params.eta, p.eta)] {
            assert!((got / want - 1.0).abs() < 1e-3, "{fit:?}");
        }
        assert!(fit.sse < 1e-12);
    }

    #[test]
    fn zero_loading_is_degenerate() {
        let (obs, x, levels) = synthetic(0.0);
        let init = YParams { d: 1.0, kappa: 1.0, eta: 1.0 };
        let fit = fit_y_least_squares(&obs, &x, -0.79506, &init, &levels, &NmOptions::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params, init);
    }

    #[test]
    fn too_few_points() {
        let t = grid(30);
        let idx: Vec<Option<f64>> = (0..30).map(|k| if k % 12 == 0 { Some(0.99) } else { None }).collect();
        let obs = ObservationSet::new(t, vec![0.01; 30], idx).unwrap();
        let levels = IndexLevels { delta: 0.998, nu: -0.00044, gamma: 0.0 };
        assert!(fit_y_least_squares(&obs, &vec![0.0; 30], 0.0, &paper_y(), &levels, &NmOptions::default()).is_err());
    }
}
