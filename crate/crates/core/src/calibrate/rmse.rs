//! Monte Carlo root-mean-square pricing errors of the filtered fit.

use rayon::prelude::*;

use super::kalman::kalman_loglik;
use super::synthetic::{synthesize, SyntheticConfig};
use super::ylsq::reconstruct_y;
use super::Calibration;
use crate::error::{Error, Result};

pub const DEFAULT_REPLICATIONS: usize = 100;

/// RMSE series in basis points (errors × 10⁴).
#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub times: Vec<f64>,
    pub benchmark_bps: Vec<f64>,
    /// Grid indices at which the longevity index is observed.
    pub longevity_index: Vec<usize>,
    pub longevity_bps: Vec<f64>,
    pub mean_benchmark_bps: f64,
    pub mean_longevity_bps: f64,
    pub replications: usize,
}

/// For each replication: simulate observations at `cal`, filter with the same
/// parameters, and record `v − fit` per time; RMSE over replications.
pub fn rmse_monte_carlo(
    cal: &Calibration,
    replications: usize,
    seed: u64,
    n_points: usize,
    substeps: usize,
) -> Result<RmseReport> {
    if replications < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replications, got {replications}")));
    }
    let xp = cal.x_params();
    let yp = cal.y_params();
    let prm = cal.params;
    let errors: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let cfg = SyntheticConfig {
                params: prm,
                sigma1: cal.sigma1,
                sigma2: cal.sigma2,
                n_points,
                substeps,
                seed: seed.wrapping_add(r as u64),
            };
            let syn = synthesize(&cfg)?;
            let out = kalman_loglik(&xp, &syn.obs)?;
            let y = reconstruct_y(&yp, prm.bbar, &out.filtered, &syn.obs.times);
            let bench: Vec<f64> = syn
                .obs
                .times
                .iter()
                .enumerate()
                .map(|(k, &t)| syn.obs.benchmark_inverse[k] - (-prm.alpha * t).exp() * (prm.rho + prm.c * out.filtered[k]))
                .collect();
            let longevity: Vec<f64> = syn
                .obs
                .longevity_points()
                .map(|(k, t, v)| v - (-prm.gamma * t).exp() * (prm.delta + prm.nu * y[k]))
                .collect();
            Ok((bench, longevity))
        })
        .collect();
    let errors = errors?;
    let times = super::synthetic::monthly_times(n_points);
    let longevity_index: Vec<usize> = (0..n_points).filter(|k| k % 12 == 0).collect();
    let rms_at = |get: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> f64| {
        1e4 * (errors.iter().map(|e| get(e).powi(2)).sum::<f64>() / replications as f64).sqrt()
    };
    let benchmark_bps: Vec<f64> = (0..n_points).map(|k| rms_at(&|e| e.0[k])).collect();
    let longevity_bps: Vec<f64> = (0..longevity_index.len()).map(|j| rms_at(&|e| e.1[j])).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(RmseReport {
        mean_benchmark_bps: mean(&benchmark_bps),
        mean_longevity_bps: mean(&longevity_bps),
        times,
        benchmark_bps,
        longevity_index,
        longevity_bps,
        replications,
    })
}
