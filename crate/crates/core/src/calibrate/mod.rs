//! Estimation of the (X, Y) model from benchmark-inverse and longevity-index
//! time series: Kalman filter likelihood for X, reconstruction of Y from
//! the filtered X, least squares for the Y parameters, and Monte Carlo
//! RMSE of the resulting fit.

mod kalman;
mod mle;
mod optim;
mod rmse;
mod synthetic;
mod ylsq;

pub use kalman::{kalman_filter, kalman_loglik, InnovationCheck, KalmanOutput, QLaw, XParams};
pub use mle::{fit_mle, MleBounds, MleFit, MleOptions};
pub use optim::{nelder_mead, NmOptions, NmResult};
pub use rmse::{rmse_monte_carlo, RmseReport, DEFAULT_REPLICATIONS};
pub use synthetic::{monthly_times, synthesize, Synthetic, SyntheticConfig};
pub use ylsq::{fit_y_least_squares, reconstruct_y, y_objective, IndexLevels, YFit, YParams};

use crate::error::{Error, Result};
use crate::market::{calibrate_levels, LevelOptions, YRange};
use crate::presets::{sec5_spec, Sec5Params};

/// Observation times with the benchmark inverse at every time and the
/// longevity index where observed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub benchmark_inverse: Vec<f64>,
    pub longevity_index: Vec<Option<f64>>,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, benchmark_inverse: Vec<f64>, longevity_index: Vec<Option<f64>>) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty observation set".into()));
        }
        for len in [benchmark_inverse.len(), longevity_index.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("observation times must be strictly increasing".into()));
        }
        let finite = times.iter().chain(&benchmark_inverse).chain(longevity_index.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("observation".into()));
        }
        Ok(Self { times, benchmark_inverse, longevity_index })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(index, time, value)` of every longevity-index observation.
    pub fn longevity_points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.longevity_index.iter().enumerate().filter_map(|(k, v)| v.map(|v| (k, self.times[k], v)))
    }
}

/// Model parameters together with the two measurement noise levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub params: Sec5Params,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Calibration {
    pub fn x_params(&self) -> XParams {
        let p = &self.params;
        XParams { psi: p.psi, bbar: p.bbar, sigma: p.sigma, sigma1: self.sigma1, rho: p.rho, c: p.c, alpha: p.alpha, x0: 0.0 }
    }

    pub fn y_params(&self) -> YParams {
        YParams { d: self.params.d, kappa: self.params.kappa, eta: self.params.eta }
    }

    /// TOML model description, loadable with [`crate::config::ModelConfig`].
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let rows = [
            ("psi", p.psi),
            ("bbar", p.bbar),
            ("sigma", p.sigma),
            ("d", p.d),
            ("kappa", p.kappa),
            ("eta", p.eta),
            ("rho", p.rho),
            ("c", p.c),
            ("delta", p.delta),
            ("nu", p.nu),
            ("alpha", p.alpha),
            ("gamma", p.gamma),
        ];
        let mut out = format!("preset = \"sec5\"\nsigma1 = {:?}\nsigma2 = {:?}\n\n[params]\n", self.sigma1, self.sigma2);
        for (k, v) in rows {
            out.push_str(&format!("{k} = {v:?}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub mle: MleOptions,
    pub y_nm: NmOptions,
    /// Rounds of (Y least squares, γ update); at least one.
    pub gamma_rounds: usize,
    /// Recompute γ from the fitted model after each round; when false the
    /// initial γ is kept.
    pub update_gamma: bool,
    pub refine: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { mle: MleOptions::default(), y_nm: NmOptions { tol: 1e-9, max_iter: 20_000 }, gamma_rounds: 3, update_gamma: true, refine: 2_000 }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub calibration: Calibration,
    pub mle: MleFit,
    /// `None` when there were too few index observations to fit Y.
    pub y_fit: Option<YFit>,
    pub gamma_rounds: usize,
    pub innovations: InnovationCheck,
}

/// Fits X by maximum likelihood, then `(d, κ, η)` by least squares with γ
/// held fixed, then γ as the level bound of the fitted model, repeating the
/// last two steps until γ settles or `gamma_rounds` is reached.
///
/// With fewer than four index observations only X is fitted and the Y
/// parameters, γ and `σ₂ = 0` are returned unchanged from `init`.
pub fn calibrate(obs: &ObservationSet, init: &Sec5Params, sigma1: f64, opts: &PipelineOptions) -> Result<PipelineResult> {
    let x_init = Calibration { params: *init, sigma1, sigma2: 0.0 }.x_params();
    let mle = fit_mle(obs, &x_init, &opts.mle)?;
    let index_points = obs.longevity_points().count();
    let mut params = Sec5Params {
        psi: mle.params.psi,
        bbar: mle.params.bbar,
        sigma: mle.params.sigma,
        alpha: mle.params.alpha,
        ..*init
    };
    let mut y_init = YParams { d: init.d, kappa: init.kappa, eta: init.eta };
    let mut rounds = 0;
    let mut y_fit = None;
    if index_points < 4 {
        log::warn!("{index_points} longevity-index observation(s): fitting X only");
    }
    while index_points >= 4 && rounds < opts.gamma_rounds.max(1) {
        rounds += 1;
        let levels = IndexLevels { delta: params.delta, nu: params.nu, gamma: params.gamma };
        let fit = fit_y_least_squares(obs, &mle.filter.filtered, params.bbar, &y_init, &levels, &opts.y_nm)?;
        params.d = fit.params.d;
        params.kappa = fit.params.kappa;
        params.eta = fit.params.eta;
        y_init = fit.params;
        y_fit = Some(fit);
        if !opts.update_gamma {
            break;
        }
        let horizon = obs.times.last().copied().unwrap_or(1.0).max(1e-9);
        let spec = crate::presets::sec5_spec_over(&params, horizon).or_else(|_| sec5_spec(&params))?;
        let lopts = LevelOptions { y_range: YRange::SpecBox, refine: opts.refine };
        match calibrate_levels(&spec, &params.p(), &params.q(), &lopts) {
            Ok((_, report)) => {
                let moved = (report.gamma - params.gamma).abs();
                params.gamma = report.gamma;
                if moved < 1e-10 {
                    break;
                }
            }
            Err(e) => {
                log::warn!("keeping γ = {}: level bound unavailable ({e})", params.gamma);
                break;
            }
        }
    }
    log::info!("longevity fit used {rounds} γ round(s)");
    let innovations = mle.filter.innovation_check();
    let sigma2 = y_fit.as_ref().map_or(0.0, |f: &YFit| f.residual_sd);
    Ok(PipelineResult {
        calibration: Calibration { params, sigma1: mle.params.sigma1, sigma2 },
        mle,
        y_fit,
        gamma_rounds: rounds,
        innovations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_set_validation() {
        assert!(ObservationSet::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![None, None]).is_err());
        assert!(ObservationSet::new(vec![0.0, 1.0], vec![1.0], vec![None, None]).is_err());
        assert!(ObservationSet::new(vec![0.0, 1.0], vec![1.0, f64::NAN], vec![None, None]).is_err());
        let o = ObservationSet::new(vec![0.0, 0.5, 1.0], vec![1.0; 3], vec![Some(0.9), None, Some(0.8)]).unwrap();
        assert_eq!(o.longevity_points().collect::<Vec<_>>(), vec![(0, 0.0, 0.9), (2, 1.0, 0.8)]);
    }

    #[test]
    fn calibration_text_round_trip_keys() {
        let c = Calibration { params: Sec5Params::default(), sigma1: 1e-6, sigma2: 1e-3 };
        let cfg: crate::config::ModelConfig = toml::from_str(&c.to_text()).unwrap();
        assert_eq!(cfg.sec5_params(), Some(c.params));
        assert_eq!((cfg.sigma1, cfg.sigma2), (Some(1e-6), Some(1e-3)));
        assert!(cfg.build(std::path::Path::new(".")).is_ok());
    }

    #[test]
    fn benchmark_only_data_fits_x() {
        let mut syn = synthesize(&SyntheticConfig { seed: 4, n_points: 121, ..Default::default() }).unwrap();
        syn.obs.longevity_index.iter_mut().for_each(|v| *v = None);
        let init = Sec5Params::default();
        let opts = PipelineOptions { mle: MleOptions { starts: 2, ..Default::default() }, ..Default::default() };
        let res = calibrate(&syn.obs, &init, 2e-6, &opts).unwrap();
        assert!(res.y_fit.is_none());
        assert_eq!(res.gamma_rounds, 0);
        assert_eq!((res.calibration.params.kappa, res.calibration.params.gamma), (init.kappa, init.gamma));
        assert_ne!(res.calibration.params.psi, init.psi);
    }
}
