use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use polylife::calibrate::{
    calibrate, kalman_filter, reconstruct_y, rmse_monte_carlo, synthesize, Calibration, MleOptions, PipelineOptions,
    SyntheticConfig,
};
use polylife::hedging::hedge_simulation;
use polylife::market::MarketModel;
use polylife::poly::{CompiledPoly, Polynomial};
use polylife::pricing::{price, PortfolioState};
use polylife::simulate::{simulate_market, SimConfig};

use crate::observations::{monthly_dates, read_observations, write_observations, Observations};
use crate::run::{section, RunConfig};
use crate::CliError;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    /// Directory of the config file; relative paths resolve against it.
    pub base: &'a Path,
    pub out: &'a Path,
    pub seed: u64,
}

impl Context<'_> {
    fn model(&self) -> Result<MarketModel, CliError> {
        Ok(self.config.model_config(self.base)?.build(self.base)?)
    }

    fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        Ok(csv::Writer::from_writer(BufWriter::new(File::create(self.out.join(name))?)))
    }

    fn text(&self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.out.join(name), body)?;
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn cmd_price(cx: &Context) -> Result<(), CliError> {
    let sec = section(&cx.config.price, "price")?;
    let m = cx.model()?;
    let ps = PortfolioState::new(sec.policies, sec.deaths, sec.t)?;
    let z = sec.state.clone().unwrap_or_else(|| m.spec().z0().to_vec());
    let mut w = cx.csv("price.csv")?;
    w.write_record(["block", "maturity", "payoff", "price", "method", "approx_error"])?;
    for payoff in &sec.payoffs {
        for &maturity in &sec.maturities {
            let spec = payoff.build(&m, maturity)?;
            let r = price(&m, &ps, &spec, maturity, &z, sec.quad_nodes)?;
            w.write_record([
                payoff.kind.to_string(),
                maturity.to_string(),
                payoff.label(),
                r.value.to_string(),
                r.method,
                fmt_opt(r.approx_error),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_hedge(cx: &Context) -> Result<(), CliError> {
    let sec = section(&cx.config.hedge, "hedge")?;
    let m = cx.model()?;
    let ps = PortfolioState::new(sec.policies, sec.deaths, sec.t)?;
    let g = Polynomial::parse(&sec.payoff, m.spec().dim()).map_err(polylife::Error::from)?;
    let report = hedge_simulation(&m, &ps, &g, sec.maturity, sec.paths, sec.dt, cx.seed)?;

    let mut w = cx.csv("hedge_strategy.csv")?;
    w.write_record(["t", "delta1", "delta2", "value", "cost", "deaths"])?;
    for r in &report.sample_path {
        w.write_record([r.t, r.delta1, r.delta2, r.value, r.cost].map(|v| v.to_string()).iter().chain([&r.deaths.to_string()]))?;
    }
    w.flush()?;

    let mut w = cx.csv("hedge_paths.csv")?;
    w.write_record(["path", "deaths", "hedged_error", "unhedged_error", "replication_error", "worst_condition"])?;
    for p in &report.paths {
        w.write_record([
            p.index.to_string(),
            p.deaths.to_string(),
            p.hedged_error.to_string(),
            p.unhedged_error.to_string(),
            p.replication_error.to_string(),
            p.worst_condition.to_string(),
        ])?;
    }
    w.flush()?;
    let summary = report.summary_text();
    cx.text("hedge_summary.txt", &summary)?;
    println!("variance_ratio = {:.6}", report.variance_ratio);
    Ok(())
}

pub fn cmd_simulate(cx: &Context, dump_flag: bool) -> Result<(), CliError> {
    let sec = section(&cx.config.simulate, "simulate")?;
    let m = cx.model()?;
    let cfg = SimConfig::new(sec.paths, sec.dt, sec.horizon, cx.seed).recording_every(sec.record_every);
    let bundle = simulate_market(&m, &cfg)?;
    let (d, mx) = (m.spec().dim(), m.spec().dim_x());
    let p = CompiledPoly::new(m.p());
    let gp = CompiledPoly::new(m.generator_p());
    let q = CompiledPoly::new(m.q());
    let gq = CompiledPoly::new(m.generator_q());
    let rate = |z: &[f64]| m.alpha() - gp.eval(z) / p.eval(z);
    let intensity = |z: &[f64]| m.gamma() - gq.eval(z) / q.eval(z);
    let index = |t: f64, z: &[f64]| (-m.gamma() * t).exp() * q.eval(z);

    if dump_flag || sec.dump {
        let mut w = cx.csv("paths.csv")?;
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend((0..mx).map(|i| format!("x{}", i + 1)));
        header.extend((mx..d).map(|i| format!("y{}", i - mx + 1)));
        header.extend(["r", "mu", "I"].map(String::from));
        w.write_record(&header)?;
        for i in 0..bundle.n_paths() {
            for (k, &t) in bundle.times.iter().enumerate() {
                let z = bundle.state(i, k);
                let mut row = vec![i.to_string(), t.to_string()];
                row.extend(z.iter().map(|v| v.to_string()));
                row.extend([rate(z), intensity(z), index(t, z)].map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
    }

    let last = bundle.times.len() - 1;
    let n = bundle.n_paths().max(1) as f64;
    let mut summary = format!(
        "seed = {}\npaths = {}\ndt = {}\nhorizon = {}\nsteps = {}\nrecorded_times = {}\nclipped_fraction = {:e}\nnegative_intensity_steps = {}\n",
        cx.seed,
        bundle.n_paths(),
        bundle.dt,
        sec.horizon,
        bundle.n_steps(),
        bundle.times.len(),
        bundle.clipped_fraction(),
        bundle.negative_intensity_steps()
    );
    for v in 0..d {
        let mean = (0..bundle.n_paths()).map(|i| bundle.state(i, last)[v]).sum::<f64>() / n;
        summary.push_str(&format!("terminal_mean_z{} = {mean}\n", v + 1));
    }
    cx.text("simulate_summary.txt", &summary)?;
    Ok(())
}

pub struct CalibrateFlags {
    pub rmse: Option<usize>,
    pub bps: bool,
    pub data: Option<std::path::PathBuf>,
}

pub fn cmd_calibrate(cx: &Context, flags: &CalibrateFlags) -> Result<(), CliError> {
    let sec = section(&cx.config.calibrate, "calibrate")?;
    let model_cfg = cx.config.model_config(cx.base)?;
    let init = model_cfg
        .sec5_params()
        .ok_or_else(|| CliError::Config("calibration needs the sec5 model as starting point".into()))?;
    let data = flags.data.clone().or_else(|| sec.data.as_ref().map(|p| cx.base.join(p)));
    let obs: Observations = match (&data, &sec.synthetic) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            read_observations(file, flags.bps || sec.bps)?
        }
        (None, Some(s)) => {
            let defaults = SyntheticConfig::default();
            let cfg = SyntheticConfig {
                params: init,
                sigma1: s.sigma1.unwrap_or(defaults.sigma1),
                sigma2: s.sigma2.unwrap_or(defaults.sigma2),
                n_points: s.n_points.unwrap_or(defaults.n_points),
                seed: s.seed.unwrap_or(cx.seed),
                ..defaults
            };
            let syn = synthesize(&cfg)?;
            let dates = monthly_dates(syn.obs.len());
            write_observations(BufWriter::new(File::create(cx.out.join("observations.csv"))?), &dates, &syn.obs)?;
            Observations { set: syn.obs, dates, has_index: true }
        }
        (None, None) => return Err(CliError::Config("[calibrate] needs data or synthetic".into())),
    };
    if !obs.has_index {
        log::warn!("no longevity_index column: calibrating the benchmark factor only");
    }
    let sigma1 = sec.sigma1.or(model_cfg.sigma1).unwrap_or(2e-6);
    let opts = PipelineOptions {
        mle: MleOptions {
            starts: sec.starts,
            tie_alpha: sec.tie_alpha,
            q_law: sec.q_law.into(),
            seed: cx.seed,
            ..Default::default()
        },
        gamma_rounds: sec.gamma_rounds,
        update_gamma: sec.update_gamma,
        ..Default::default()
    };
    let res = calibrate(&obs.set, &init, sigma1, &opts)?;
    let cal: Calibration = res.calibration;
    cx.text("fitted_model.toml", &cal.to_text())?;

    let filter = kalman_filter(&cal.x_params(), &obs.set, opts.mle.q_law)?;
    let prm = cal.params;
    let mut w = cx.csv("filter.csv")?;
    w.write_record(["date", "t", "benchmark_inverse", "fitted", "x_hat", "variance", "innovation", "innovation_var", "standardized"])?;
    for (k, &t) in obs.set.times.iter().enumerate() {
        let fitted = (-prm.alpha * t).exp() * (prm.rho + prm.c * filter.filtered[k]);
        let (wk, fk) = (filter.innovations[k], filter.innovation_var[k]);
        w.write_record([
            obs.dates[k].to_string(),
            t.to_string(),
            obs.set.benchmark_inverse[k].to_string(),
            fitted.to_string(),
            filter.filtered[k].to_string(),
            filter.variance[k].to_string(),
            wk.to_string(),
            fk.to_string(),
            (wk / fk.sqrt()).to_string(),
        ])?;
    }
    w.flush()?;

    if res.y_fit.is_some() {
        let y = reconstruct_y(&cal.y_params(), prm.bbar, &filter.filtered, &obs.set.times);
        let mut w = cx.csv("longevity.csv")?;
        w.write_record(["date", "t", "longevity_index", "fitted", "y_hat"])?;
        for (k, t, v) in obs.set.longevity_points() {
            let fitted = (-prm.gamma * t).exp() * (prm.delta + prm.nu * y[k]);
            w.write_record([obs.dates[k].to_string(), t.to_string(), v.to_string(), fitted.to_string(), y[k].to_string()])?;
        }
        w.flush()?;
    }

    let replications = flags.rmse.unwrap_or(sec.rmse);
    let mut rmse_lines = String::new();
    if replications > 0 {
        let r = rmse_monte_carlo(&cal, replications, cx.seed, obs.set.len(), 20)?;
        let mut w = cx.csv("rmse.csv")?;
        w.write_record(["t", "benchmark_bps"])?;
        for (t, v) in r.times.iter().zip(&r.benchmark_bps) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        let mut w = cx.csv("rmse_longevity.csv")?;
        w.write_record(["t", "longevity_bps"])?;
        for (k, v) in r.longevity_index.iter().zip(&r.longevity_bps) {
            w.write_record([r.times[*k].to_string(), v.to_string()])?;
        }
        w.flush()?;
        rmse_lines = format!(
            "rmse_replications = {}\nrmse_mean_benchmark_bps = {}\nrmse_mean_longevity_bps = {}\n",
            r.replications, r.mean_benchmark_bps, r.mean_longevity_bps
        );
    }

    let mut summary = format!(
        "seed = {}\nobservations = {}\nindex_observations = {}\nloglik = {}\ninit_loglik = {}\nmle_iterations = {}\nmle_converged = {}\ngood_starts = {}\nat_bounds = {}\ngamma_rounds = {}\ninnovation_mean = {}\ninnovation_variance = {}\ninnovations_pass = {}\n",
        cx.seed,
        obs.set.len(),
        obs.set.longevity_points().count(),
        res.mle.loglik,
        res.mle.init_loglik,
        res.mle.iterations,
        res.mle.converged,
        res.mle.good_starts,
        res.mle.at_bounds.join(","),
        res.gamma_rounds,
        res.innovations.mean,
        res.innovations.variance,
        res.innovations.passed
    );
    if let Some(y) = &res.y_fit {
        summary.push_str(&format!("y_sse = {}\ny_converged = {}\ny_degenerate = {}\n", y.sse, y.converged, y.degenerate));
    }
    summary.push_str(&rmse_lines);
    cx.text("calibrate_summary.txt", &summary)?;
    print!("{}", cal.to_text());
    Ok(())
}
