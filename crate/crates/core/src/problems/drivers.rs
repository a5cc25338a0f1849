//! Drivers `f(t, x, y, z)` and terminal conditions `g(x)`.
//!
//! Scalar versions are the reference definitions; [`Driver::apply`]
//! builds the same expressions on the autodiff graph.

use crate::autodiff::{Graph, Var};
use crate::error::Result;

pub fn driver_linear_bs(y: f64, r: f64) -> f64 {
    -r * y
}

/// `-r_l y - (mu - r_l)/sigma * sum(z) + (r_b - r_l) max(0, sum(z)/sigma - y)`
pub fn driver_two_rates(y: f64, z: &[f64], mu: f64, sigma: f64, r_l: f64, r_b: f64) -> f64 {
    let sz: f64 = z.iter().sum();
    -r_l * y - (mu - r_l) / sigma * sz + (r_b - r_l) * (sz / sigma - y).max(0.0)
}

/// `(1 - y^2) / (1 + y^2)`
pub fn driver_heat(y: f64) -> f64 {
    let y2 = y * y;
    (1.0 - y2) / (1.0 + y2)
}

/// `5 exp(T^{2H}) / (10 + 2 |x|^2)`
pub fn terminal_heat(x: &[f64], t_end: f64, hurst: f64) -> f64 {
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    5.0 * t_end.powf(2.0 * hurst).exp() / (10.0 + 2.0 * norm2)
}

/// `max(max_i x_i - K, 0)`
pub fn terminal_max_call(x: &[f64], strike: f64) -> f64 {
    let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top - strike).max(0.0)
}

/// `max(max_i x_i - 120, 0) - 2 max(max_i x_i - 150, 0)`
pub fn terminal_call_spread(x: &[f64]) -> f64 {
    let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top - 120.0).max(0.0) - 2.0 * (top - 150.0).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Driver {
    LinearBs { r: f64 },
    TwoRates { mu: f64, sigma: f64, r_l: f64, r_b: f64 },
    Heat,
}

impl Driver {
    pub fn eval(&self, y: f64, z: &[f64]) -> f64 {
        match *self {
            Driver::LinearBs { r } => driver_linear_bs(y, r),
            Driver::TwoRates { mu, sigma, r_l, r_b } => driver_two_rates(y, z, mu, sigma, r_l, r_b),
            Driver::Heat => driver_heat(y),
        }
    }

    /// Graph version; `y` is `[m, 1]`, `z` is `[m, d]`, result `[m, 1]`.
    pub fn apply(&self, g: &mut Graph, y: Var, z: Var) -> Result<Var> {
        match *self {
            Driver::LinearBs { r } => Ok(g.mul_scalar(y, -r)),
            Driver::TwoRates { mu, sigma, r_l, r_b } => {
                let sz = g.sum_last(z);
                let lend = g.mul_scalar(y, -r_l);
                let hedge = g.mul_scalar(sz, -(mu - r_l) / sigma);
                let scaled = g.mul_scalar(sz, 1.0 / sigma);
                let short = g.sub(scaled, y)?;
                let borrowed = g.max0(short);
                let spread = g.mul_scalar(borrowed, r_b - r_l);
                let a = g.add(lend, hedge)?;
                g.add(a, spread)
            }
            Driver::Heat => {
                let y2 = g.square(y);
                let neg = g.mul_scalar(y2, -1.0);
                let num = g.add_scalar(neg, 1.0);
                let den = g.add_scalar(y2, 1.0);
                g.div(num, den)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Terminal {
    MaxCall { strike: f64 },
    CallSpread,
    Heat { t_end: f64, hurst: f64 },
}

impl Terminal {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Terminal::MaxCall { strike } => terminal_max_call(x, strike),
            Terminal::CallSpread => terminal_call_spread(x),
            Terminal::Heat { t_end, hurst } => terminal_heat(x, t_end, hurst),
        }
    }
}
