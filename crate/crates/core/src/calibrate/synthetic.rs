//! Synthetic observation sets generated from the (X, Y) model.

use rand_distr::{Distribution, StandardNormal};

use super::ObservationSet;
use crate::error::{Error, Result};
use crate::presets::{sec5_spec, Sec5Params};
use crate::simulate::{path_rng, Stepper};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub params: Sec5Params,
    pub sigma1: f64,
    pub sigma2: f64,
    /// Monthly points on `[0, 1]`; the index is observed every twelfth point.
    pub n_points: usize,
    /// Euler steps per observation interval.
    pub substeps: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { params: Sec5Params::default(), sigma1: 2e-6, sigma2: 1.5e-3, n_points: 517, substeps: 20, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub obs: ObservationSet,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// `t_k = k / (n − 1)`.
pub fn monthly_times(n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n).map(|k| k as f64 / (n - 1) as f64).collect()
}

/// Simulates the state from `Z_0 = 0` and observes
/// `v¹ = e^{−αt}(ρ + cX) + σ₁ε₁` monthly and `v² = e^{−γt}(δ + νY) + σ₂ε₂`
/// at `k = 0, 12, 24, …`.
pub fn synthesize(cfg: &SyntheticConfig) -> Result<Synthetic> {
    if cfg.n_points < 2 || cfg.substeps == 0 {
        return Err(Error::InvalidArgument(format!("{} points with {} substeps", cfg.n_points, cfg.substeps)));
    }
    let prm = &cfg.params;
    let times = monthly_times(cfg.n_points);
    let dt = 1.0 / ((cfg.n_points - 1) * cfg.substeps) as f64;
    let spec = sec5_spec(prm)?;
    let stepper = Stepper::new(&spec, dt)?;
    let mut rng = path_rng(cfg.seed, 0);
    let mut noise = path_rng(cfg.seed, 1);
    let mut z = vec![0.0, 0.0];
    let (mut dw, mut scratch) = (vec![0.0], stepper.scratch());
    let mut x = Vec::with_capacity(cfg.n_points);
    let mut y = Vec::with_capacity(cfg.n_points);
    let mut v1 = Vec::with_capacity(cfg.n_points);
    let mut v2 = Vec::with_capacity(cfg.n_points);
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            for _ in 0..cfg.substeps {
                stepper.draw(&mut rng, &mut dw);
                stepper.step(&mut z, &dw, &mut scratch)?;
            }
        }
        x.push(z[0]);
        y.push(z[1]);
        let e1: f64 = StandardNormal.sample(&mut noise);
        let e2: f64 = StandardNormal.sample(&mut noise);
        v1.push((-prm.alpha * t).exp() * (prm.rho + prm.c * z[0]) + cfg.sigma1 * e1);
        v2.push((k % 12 == 0).then(|| (-prm.gamma * t).exp() * (prm.delta + prm.nu * z[1]) + cfg.sigma2 * e2));
    }
    Ok(Synthetic { obs: ObservationSet::new(times, v1, v2)?, x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticConfig { seed: 5, ..Default::default() };
        let a = synthesize(&cfg).unwrap();
        let b = synthesize(&cfg).unwrap();
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.obs.len(), 517);
        assert_eq!(a.obs.longevity_points().count(), 44);
        assert!(a.x.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(a.x[0], 0.0);
        let c = synthesize(&SyntheticConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.obs, c.obs);
    }

    #[test]
    fn noiseless_observations_are_exact() {
        let cfg = SyntheticConfig { sigma1: 0.0, sigma2: 0.0, n_points: 25, ..Default::default() };
        let s = synthesize(&cfg).unwrap();
        let p = cfg.params;
        for k in 0..25 {
            let t = s.obs.times[k];
            assert_eq!(s.obs.benchmark_inverse[k], (-p.alpha * t).exp() * (p.rho + p.c * s.x[k]));
        }
    }
}
