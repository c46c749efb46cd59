use polylife::calibrate::*;
use polylife::presets::Sec5Params;

fn truth() -> XParams {
    Calibration { params: Sec5Params::default(), sigma1: 2e-6, sigma2: 0.0 }.x_params()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

#[test]
fn likelihood_prefers_true_psi() {
    let prm = truth();
    let ll = |psi: f64, obs: &ObservationSet| {
        let mut q = prm;
        q.psi = psi;
        q.alpha = q.alpha_upper();
        kalman_loglik(&q, obs).unwrap().loglik
    };
    let wins = (0..100u64)
        .filter(|&seed| {
            let syn = synthesize(&SyntheticConfig { seed, ..Default::default() }).unwrap();
            let at = ll(prm.psi, &syn.obs);
            at > ll(1.5 * prm.psi, &syn.obs) && at > ll(0.5 * prm.psi, &syn.obs)
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn filter_is_pure_and_innovations_are_standard() {
    let syn = synthesize(&SyntheticConfig { seed: 11, ..Default::default() }).unwrap();
    let a = kalman_loglik(&truth(), &syn.obs).unwrap();
    let b = kalman_loglik(&truth(), &syn.obs).unwrap();
    assert_eq!(a.loglik, b.loglik);
    assert_eq!(a.filtered, b.filtered);
    assert!(a.variance.iter().all(|s| *s > 0.0));
    let check = a.innovation_check();
    assert!(check.passed, "{check:?}");
    for law in [QLaw::Stationary, QLaw::Filtered] {
        let out = kalman_filter(&truth(), &syn.obs, law).unwrap();
        assert!(out.innovation_var.iter().all(|f| *f >= 2e-6 * 2e-6));
    }
}

#[test]
fn fit_never_loses_to_its_start() {
    for seed in 0..3u64 {
        let syn = synthesize(&SyntheticConfig { seed, ..Default::default() }).unwrap();
        let mut init = truth();
        init.psi = 40.0;
        init.sigma = 0.6;
        let fit = fit_mle(&syn.obs, &init, &MleOptions { seed, ..Default::default() }).unwrap();
        assert!(fit.loglik >= fit.init_loglik);
        assert_eq!(fit.good_starts, 8);
    }
}

#[test]
fn constant_observations_collapse_sigma() {
    let obs = ObservationSet::new(monthly_times(517), vec![0.0052; 517], vec![None; 517]).unwrap();
    let fit = fit_mle(&obs, &truth(), &MleOptions::default()).unwrap();
    assert!(fit.params.sigma < 0.01, "{:?}", fit.params);
    assert!(!fit.at_bounds.is_empty());
}

#[test]
fn recovery_over_twenty_seeds() {
    let p = Sec5Params::default();
    let mut psi = Vec::new();
    let mut sigma = Vec::new();
    let mut bbar = Vec::new();
    let mut kappa = Vec::new();
    for seed in 0..20u64 {
        let syn = synthesize(&SyntheticConfig { seed, ..Default::default() }).unwrap();
        let opts = PipelineOptions { mle: MleOptions { seed, ..Default::default() }, update_gamma: false, ..Default::default() };
        let res = calibrate(&syn.obs, &p, 2e-6, &opts).unwrap();
        psi.push(res.calibration.params.psi);
        sigma.push(res.calibration.params.sigma);
        bbar.push(res.calibration.params.bbar);
        kappa.push(res.calibration.params.kappa);
    }
    let (psi, sigma, bbar, kappa) = (median(psi), median(sigma), median(bbar), median(kappa));
    assert!((psi / p.psi - 1.0).abs() <= 0.25, "psi {psi}");
    assert!((sigma / p.sigma - 1.0).abs() <= 0.15, "sigma {sigma}");
    assert!((bbar - p.bbar).abs() <= 0.15, "bbar {bbar}");
    assert!((kappa / p.kappa - 1.0).abs() <= 0.30, "kappa {kappa}");
}

#[test]
fn refit_on_simulated_data_is_stable() {
    // the refit parameters are a different point on the original likelihood;
    // sampling noise alone moves it by about ½χ²₄, so the median is checked
    let p = Sec5Params::default();
    let mut gaps = Vec::new();
    for seed in 0..8u64 {
        let syn = synthesize(&SyntheticConfig { seed, ..Default::default() }).unwrap();
        let opts = PipelineOptions { update_gamma: false, ..Default::default() };
        let res = calibrate(&syn.obs, &p, 2e-6, &opts).unwrap();
        let cal = res.calibration;
        let again = synthesize(&SyntheticConfig { seed: 1000 + seed, params: cal.params, sigma1: cal.sigma1, ..Default::default() }).unwrap();
        let refit = fit_mle(&again.obs, &cal.x_params(), &MleOptions::default()).unwrap();
        let gap = res.mle.loglik - kalman_loglik(&refit.params, &syn.obs).unwrap().loglik;
        assert!(gap > -1e-3, "refit beats the maximizer by {}", -gap);
        gaps.push(gap);
    }
    assert!(median(gaps.clone()) < 2.0, "{gaps:?}");
}

#[test]
fn rmse_without_noise() {
    let cal = Calibration { params: Sec5Params::default(), sigma1: 1e-12, sigma2: 0.0 };
    let r = rmse_monte_carlo(&cal, 10, 3, 517, 20).unwrap();
    assert_eq!(r.benchmark_bps.len(), 517);
    assert_eq!(r.longevity_bps.len(), 44);
    assert!(r.mean_benchmark_bps < 1e-6, "{}", r.mean_benchmark_bps);
    // what remains on the index is the left Riemann sum behind Ŷ, of order |κ|Δ/2 relative to Y
    assert!(r.mean_longevity_bps < 15.0, "{}", r.mean_longevity_bps);
    assert!(rmse_monte_carlo(&cal, 1, 3, 517, 20).is_err());
}
