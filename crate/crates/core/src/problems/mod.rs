//! Concrete forward-backward problems.
//!
//! A [`Problem`] bundles the forward model (how fBM paths become state
//! paths), the diagonal `D^phi_t X_t` the Wick correction needs, the
//! driver `f` and the terminal condition `g`.
//!
//! The diagonal convention: `D^phi_s X_t` carries a factor
//! `s^{2H-1} + (t - s)^{2H-1}` for `s < t`; on the diagonal `s = t` only
//! the first term survives when `H > 1/2`.

mod drivers;
mod forward;

use std::fmt;
use std::str::FromStr;

pub use drivers::{
    driver_heat, driver_linear_bs, driver_two_rates, terminal_call_spread, terminal_heat,
    terminal_max_call, Driver, Terminal,
};
pub use forward::{
    bs_closed_form, dphi_diag_additive, dphi_diag_gbm, euler_forward, geometric_fbm_forward,
    BsParams, Diffusion,
};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::fbm::{covariance, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    BlackScholes1d,
    BlackScholesMaxCall,
    TwoRatesSpread,
    SemilinearHeat,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::BlackScholes1d => "black_scholes_1d",
            ProblemKind::BlackScholesMaxCall => "black_scholes_maxcall",
            ProblemKind::TwoRatesSpread => "two_rates_spread",
            ProblemKind::SemilinearHeat => "semilinear_heat",
        }
    }

    /// Parameter keys the problem reads; all of them are mandatory.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            ProblemKind::BlackScholes1d | ProblemKind::BlackScholesMaxCall => {
                &["mu", "sigma", "r", "strike", "hurst", "t_end", "dim", "x0"]
            }
            ProblemKind::TwoRatesSpread => {
                &["mu", "sigma", "r_l", "r_b", "hurst", "t_end", "dim", "x0"]
            }
            ProblemKind::SemilinearHeat => &["mu", "sigma", "hurst", "t_end", "dim", "x0"],
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "black_scholes_1d" => ProblemKind::BlackScholes1d,
            "black_scholes_maxcall" => ProblemKind::BlackScholesMaxCall,
            "two_rates_spread" => ProblemKind::TwoRatesSpread,
            "semilinear_heat" => ProblemKind::SemilinearHeat,
            other => return Err(Error::Config(format!("unknown problem '{other}'"))),
        })
    }
}

/// Raw parameter block; keys absent from the config stay `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemParams {
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub r: Option<f64>,
    pub r_l: Option<f64>,
    pub r_b: Option<f64>,
    pub strike: Option<f64>,
    pub hurst: Option<f64>,
    pub t_end: Option<f64>,
    pub dim: Option<usize>,
    pub x0: Option<f64>,
}

impl ProblemParams {
    pub const KEYS: [&'static str; 10] = [
        "mu", "sigma", "r", "r_l", "r_b", "strike", "hurst", "t_end", "dim", "x0",
    ];

    pub fn is_set(&self, key: &str) -> bool {
        match key {
            "mu" => self.mu.is_some(),
            "sigma" => self.sigma.is_some(),
            "r" => self.r.is_some(),
            "r_l" => self.r_l.is_some(),
            "r_b" => self.r_b.is_some(),
            "strike" => self.strike.is_some(),
            "hurst" => self.hurst.is_some(),
            "t_end" => self.t_end.is_some(),
            "dim" => self.dim.is_some(),
            "x0" => self.x0.is_some(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForwardModel {
    /// `dX = mu X dt + sigma X dB^H`, solved exactly.
    Geometric { mu: f64, sigma: f64 },
    /// `dX = mu dt + sigma dB^H`, Euler (exact for constant coefficients).
    Additive { mu: f64, sigma: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub kind: ProblemKind,
    pub dim: usize,
    pub t_end: f64,
    pub hurst: f64,
    pub x0: Vec<f64>,
    pub forward: ForwardModel,
    pub driver: Driver,
    pub terminal: Terminal,
    pub wick_correction_enabled: bool,
    /// Black-Scholes rates, kept for the closed-form price.
    pub bs: Option<BsParams>,
}

fn need<T: Copy>(v: Option<T>, key: &str, kind: ProblemKind) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key '{key}' for problem {kind}")))
}

impl Problem {
    pub fn build(kind: ProblemKind, p: &ProblemParams, wick_correction: bool) -> Result<Self> {
        for key in kind.required_keys() {
            if !p.is_set(key) {
                return Err(Error::Config(format!("missing key '{key}' for problem {kind}")));
            }
        }
        let hurst = need(p.hurst, "hurst", kind)?;
        let t_end = need(p.t_end, "t_end", kind)?;
        let dim = need(p.dim, "dim", kind)?;
        let x0 = need(p.x0, "x0", kind)?;
        if !(0.5..=1.0).contains(&hurst) {
            return Err(Error::Config(format!("hurst must lie in [0.5, 1], got {hurst}")));
        }
        if hurst == 0.5 && wick_correction {
            return Err(Error::Config(
                "hurst = 0.5 requires wick_correction = false".into(),
            ));
        }
        if !(t_end > 0.0) {
            return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
        }
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        let mu = need(p.mu, "mu", kind)?;
        let sigma = need(p.sigma, "sigma", kind)?;

        let (forward, driver, terminal, bs) = match kind {
            ProblemKind::BlackScholes1d | ProblemKind::BlackScholesMaxCall => {
                if kind == ProblemKind::BlackScholes1d && dim != 1 {
                    return Err(Error::Config(format!(
                        "black_scholes_1d needs dim = 1, got {dim}"
                    )));
                }
                let r = need(p.r, "r", kind)?;
                let strike = need(p.strike, "strike", kind)?;
                let bs = BsParams {
                    mu,
                    sigma,
                    r,
                    strike,
                    r_l: r,
                    r_b: r,
                };
                bs.validate()?;
                // with mu != r the hedge term of the zero-spread two-rate driver remains
                let driver = if mu == r {
                    Driver::LinearBs { r }
                } else {
                    Driver::TwoRates {
                        mu,
                        sigma,
                        r_l: r,
                        r_b: r,
                    }
                };
                (
                    ForwardModel::Geometric { mu, sigma },
                    driver,
                    Terminal::MaxCall { strike },
                    Some(bs),
                )
            }
            ProblemKind::TwoRatesSpread => {
                let r_l = need(p.r_l, "r_l", kind)?;
                let r_b = need(p.r_b, "r_b", kind)?;
                let bs = BsParams {
                    mu,
                    sigma,
                    r: r_l,
                    strike: 120.0,
                    r_l,
                    r_b,
                };
                bs.validate()?;
                (
                    ForwardModel::Geometric { mu, sigma },
                    Driver::TwoRates { mu, sigma, r_l, r_b },
                    Terminal::CallSpread,
                    None,
                )
            }
            ProblemKind::SemilinearHeat => (
                ForwardModel::Additive { mu, sigma },
                Driver::Heat,
                Terminal::Heat { t_end, hurst },
                None,
            ),
        };
        Ok(Self {
            kind,
            dim,
            t_end,
            hurst,
            x0: vec![x0; dim],
            forward,
            driver,
            terminal,
            wick_correction_enabled: wick_correction,
            bs,
        })
    }

    /// State paths `[m, N + 1, d]` from fBM paths on `grid`.
    pub fn simulate_forward(&self, paths: &Tensor, grid: &Grid) -> Result<Tensor> {
        match self.forward {
            ForwardModel::Geometric { mu, sigma } => {
                geometric_fbm_forward(paths, &self.x0, mu, sigma, grid, self.hurst)
            }
            ForwardModel::Additive { mu, sigma } => {
                euler_forward(paths, &self.x0, |_, _| mu, Diffusion::Constant(sigma), grid)
            }
        }
    }

    /// `D^phi_t X_t` per sample and component for a `[m, d]` state slice.
    pub fn dphi_diag(&self, t: f64, x: &Tensor) -> Tensor {
        match self.forward {
            ForwardModel::Geometric { sigma, .. } => {
                x.map(|xv| dphi_diag_gbm(t, xv, sigma, self.hurst))
            }
            ForwardModel::Additive { sigma, .. } => {
                let v = dphi_diag_additive(t, sigma, self.hurst);
                x.map(|_| v)
            }
        }
    }

    /// Step average `(1/dt) int_{t0}^{t1} D^phi_s X_{t0} ds` per sample and
    /// component. Equals `D^phi_{t0} X_{t0} * Cov(B_{t0}, B_{t1} - B_{t0}) / (H t0^{2H-1} dt)`,
    /// so it agrees with [`Self::dphi_diag`] as `dt -> 0` and makes
    /// `Z ΔB - c dt` the exact Wick product `Z ⋄ ΔB` for `Z = z(X_{t0})`.
    pub fn dphi_step(&self, t0: f64, t1: f64, x: &Tensor) -> Tensor {
        self.dphi_window(t0, t0, t1, x)
    }

    /// `(1/dt) int_{t0}^{t1} D^phi_s X_{tk} ds` for an earlier state
    /// `x = X_{tk}`, `tk <= t0`; the `D^phi X` weight on the step-`k` input
    /// of the exact Wick product `Z_{t0} ⋄ ΔB`.
    pub fn dphi_window(&self, tk: f64, t0: f64, t1: f64, x: &Tensor) -> Tensor {
        let cov = covariance(tk, t1, self.hurst) - covariance(tk, t0, self.hurst);
        let scale = cov / (t1 - t0);
        match self.forward {
            ForwardModel::Geometric { sigma, .. } => x.map(|xv| sigma * xv * scale),
            ForwardModel::Additive { sigma, .. } => x.map(|_| sigma * scale),
        }
    }

    /// `g(X_T)` for a `[m, d]` terminal slice, shaped `[m, 1]`.
    pub fn terminal_values(&self, x_t: &Tensor) -> Tensor {
        let d = x_t.cols();
        let data: Vec<f64> = x_t
            .data()
            .chunks(d)
            .map(|row| self.terminal.eval(row))
            .collect();
        let m = data.len();
        Tensor::new(vec![m, 1], data).expect("one value per row")
    }

    /// Closed-form `u(0, x0)` where one exists (the 1-d call).
    pub fn closed_form_u0(&self) -> Option<f64> {
        match (self.kind, &self.bs) {
            (ProblemKind::BlackScholes1d, Some(bs)) => {
                bs_closed_form(0.0, self.x0[0], bs, self.t_end, self.hurst).ok()
            }
            _ => None,
        }
    }
}
