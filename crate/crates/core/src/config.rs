//! TOML descriptions of diffusion specifications, market models and payoffs.
//!
//! Polynomials are written in their text form, e.g. `0.01 + 0.006*x1`.
//! A model is either a named preset with optional parameter overrides or an
//! explicit specification with `p` and `q`:
//!
//! ```toml
//! [model]
//! preset = "sec5"
//!
//! [model.params]
//! psi = 14.98581
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{DiffusionSpec, StateBox};
use crate::market::{calibrate_levels, derive_y_box, LevelOptions, MarketModel, YRange};
use crate::poly::Polynomial;
use crate::presets::{sec5_spec_over, Hedge2dParams, Sec5Params};
use crate::pricing::{index_option, BuildingBlock, Payoff, PayoffSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub dim_x: usize,
    #[serde(default)]
    pub dim_y: usize,
    /// One polynomial per coordinate.
    pub drift: Vec<String>,
    /// The symmetric matrix `a`, row by row.
    pub diffusion: Vec<Vec<String>>,
    /// Lower box corner; may stop after the X coordinates when `y_horizon` is set.
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    #[serde(default)]
    pub boundary: Vec<String>,
    pub z0: Option<Vec<f64>>,
    /// Derive the Y sides of the box from the Y dynamics over `[0, y_horizon]`.
    pub y_horizon: Option<f64>,
}

fn parse_poly(text: &str, dim: usize) -> Result<Polynomial> {
    Ok(Polynomial::parse(text, dim)?)
}

impl SpecConfig {
    pub fn build(&self) -> Result<DiffusionSpec> {
        let d = self.dim_x + self.dim_y;
        let drift = self.drift.iter().map(|s| parse_poly(s, d)).collect::<Result<Vec<_>>>()?;
        let diffusion = self
            .diffusion
            .iter()
            .map(|row| row.iter().map(|s| parse_poly(s, d)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let boundary = self.boundary.iter().map(|s| parse_poly(s, d)).collect::<Result<Vec<_>>>()?;
        let z0 = self.z0.clone().unwrap_or_else(|| vec![0.0; d]);
        let (mut lo, mut hi) = (self.box_lo.clone(), self.box_hi.clone());
        if self.y_horizon.is_some() {
            lo.resize(d, -1e12);
            hi.resize(d, 1e12);
        }
        let spec = DiffusionSpec::new(self.dim_x, self.dim_y, drift, diffusion, StateBox::new(lo, hi)?, boundary, z0)?;
        match self.y_horizon {
            Some(h) => {
                let bx = derive_y_box(&spec, h)?;
                spec.with_box(bx)
            }
            None => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Sec5,
    Hedge2d,
}

/// Overrides of preset parameters; unset fields keep the preset value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub psi: Option<f64>,
    pub bbar: Option<f64>,
    pub sigma: Option<f64>,
    pub d: Option<f64>,
    pub kappa: Option<f64>,
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub nu: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
}

impl ParamOverrides {
    fn apply_sec5(&self, mut p: Sec5Params) -> Sec5Params {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.psi, self.psi);
        set(&mut p.bbar, self.bbar);
        set(&mut p.sigma, self.sigma);
        set(&mut p.d, self.d);
        set(&mut p.kappa, self.kappa);
        set(&mut p.eta, self.eta);
        set(&mut p.rho, self.rho);
        set(&mut p.c, self.c);
        set(&mut p.delta, self.delta);
        set(&mut p.nu, self.nu);
        set(&mut p.alpha, self.alpha);
        set(&mut p.gamma, self.gamma);
        p
    }

    fn apply_hedge2d(&self, mut p: Hedge2dParams) -> Result<Hedge2dParams> {
        if self.alpha.is_some() || self.gamma.is_some() {
            return Err(Error::Config("hedge2d levels are always calibrated; set alpha/gamma on [model] instead".into()));
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.psi, self.psi);
        set(&mut p.bbar, self.bbar);
        set(&mut p.sigma, self.sigma);
        set(&mut p.d, self.d);
        set(&mut p.kappa, self.kappa);
        set(&mut p.eta, self.eta);
        set(&mut p.rho, self.rho);
        set(&mut p.c, self.c);
        set(&mut p.delta, self.delta);
        set(&mut p.nu, self.nu);
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Option<Preset>,
    #[serde(default)]
    pub params: ParamOverrides,
    pub spec: Option<SpecConfig>,
    /// TOML file holding a [`SpecConfig`], relative to the config file.
    pub spec_file: Option<PathBuf>,
    pub p: Option<String>,
    pub q: Option<String>,
    /// Explicit levels; when absent they are set to their upper bounds
    /// (presets other than `sec5` and explicit specifications) or taken from
    /// the parameters (`sec5`).
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    /// Force `α`, `γ` to their upper bounds even for `sec5`.
    #[serde(default)]
    pub calibrate_levels: bool,
    /// Time span the Y box must cover (default 1).
    pub horizon: Option<f64>,
    /// Grid refinement for the level bounds.
    pub refine: Option<usize>,
    /// Measurement noise of the benchmark-inverse and index observations.
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
}

impl ModelConfig {
    /// `sec5` parameters after overrides, if this is the `sec5` preset.
    pub fn sec5_params(&self) -> Option<Sec5Params> {
        (self.preset == Some(Preset::Sec5)).then(|| self.params.apply_sec5(Sec5Params::default()))
    }

    pub fn build(&self, base_dir: &Path) -> Result<MarketModel> {
        let horizon = self.horizon.unwrap_or(1.0);
        let refine = self.refine.unwrap_or(2_000);
        let levels = |spec: &DiffusionSpec, p: &Polynomial, q: &Polynomial| -> Result<MarketModel> {
            let (m, _) = calibrate_levels(spec, p, q, &LevelOptions { y_range: YRange::SpecBox, refine })?;
            Ok(m)
        };
        let model = match self.preset {
            Some(preset) => {
                if self.spec.is_some() || self.spec_file.is_some() || self.p.is_some() || self.q.is_some() {
                    return Err(Error::Config("a preset model takes no spec, spec_file, p or q".into()));
                }
                match preset {
                    Preset::Sec5 => {
                        let prm = self.params.apply_sec5(Sec5Params::default());
                        let spec = sec5_spec_over(&prm, horizon)?;
                        if self.calibrate_levels {
                            levels(&spec, &prm.p(), &prm.q())?
                        } else {
                            MarketModel::new(spec, prm.p(), prm.q(), prm.alpha, prm.gamma)?
                        }
                    }
                    Preset::Hedge2d => self.params.apply_hedge2d(Hedge2dParams::default())?.model(horizon)?,
                }
            }
            None => {
                if self.params != ParamOverrides::default() {
                    return Err(Error::Config("[model.params] needs a preset".into()));
                }
                let spec = match (&self.spec, &self.spec_file) {
                    (Some(s), None) => s.build()?,
                    (None, Some(f)) => load_spec(&base_dir.join(f))?.build()?,
                    _ => return Err(Error::Config("model needs exactly one of preset, spec, spec_file".into())),
                };
                let d = spec.dim();
                let (p, q) = match (&self.p, &self.q) {
                    (Some(p), Some(q)) => (parse_poly(p, d)?, parse_poly(q, d)?),
                    _ => return Err(Error::Config("an explicit model needs both p and q".into())),
                };
                if self.alpha.is_some() && self.gamma.is_some() && !self.calibrate_levels {
                    MarketModel::new(spec, p, q, 0.0, 0.0)?
                } else {
                    levels(&spec, &p, &q)?
                }
            }
        };
        match (self.alpha, self.gamma) {
            (None, None) => Ok(model),
            (a, g) => Ok(model.with_levels(a.unwrap_or(model.alpha()), g.unwrap_or(model.gamma()))),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_spec(path: &Path) -> Result<SpecConfig> {
    toml::from_str(&read(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    IndexPut,
    IndexCall,
    Constant,
}

/// A payoff entry: either `poly` or a `builtin` with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    pub kind: BuildingBlock,
    pub poly: Option<String>,
    pub builtin: Option<Builtin>,
    pub strike: Option<f64>,
    pub value: Option<f64>,
    /// Chebyshev degree for the index options (default 16).
    pub degree: Option<usize>,
}

impl PayoffConfig {
    pub fn build(&self, m: &MarketModel, maturity: f64) -> Result<PayoffSpec> {
        let d = m.spec().dim();
        let payoff = match (&self.poly, self.builtin) {
            (Some(p), None) => Payoff::Polynomial(parse_poly(p, d)?),
            (None, Some(Builtin::Constant)) => Payoff::Polynomial(Polynomial::constant(d, self.value.unwrap_or(1.0))),
            (None, Some(b)) => {
                let strike = self.strike.ok_or_else(|| Error::Config("index option needs a strike".into()))?;
                index_option(m, strike, maturity, b == Builtin::IndexPut, self.degree.unwrap_or(16))
            }
            _ => return Err(Error::Config("payoff needs exactly one of poly, builtin".into())),
        };
        Ok(PayoffSpec { kind: self.kind, payoff })
    }

    /// Short label for output tables.
    pub fn label(&self) -> String {
        match (&self.poly, self.builtin) {
            (Some(p), _) => p.clone(),
            (None, Some(Builtin::Constant)) => format!("constant({})", self.value.unwrap_or(1.0)),
            (None, Some(Builtin::IndexPut)) => format!("index_put({})", self.strike.unwrap_or(f64::NAN)),
            (None, Some(Builtin::IndexCall)) => format!("index_call({})", self.strike.unwrap_or(f64::NAN)),
            (None, None) => String::new(),
        }
    }
}
