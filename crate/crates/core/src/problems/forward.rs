use statrs::distribution::{ContinuousCDF, Normal};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::fbm::Grid;

/// Risk parameters of the Black-Scholes family.
#[derive(Clone, Debug, PartialEq)]
pub struct BsParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub strike: f64,
    pub r_l: f64,
    pub r_b: f64,
}

impl BsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.strike > 0.0) {
            return Err(Error::Domain(format!("strike must be positive, got {}", self.strike)));
        }
        if self.r_l > self.r_b {
            return Err(Error::Domain(format!(
                "lending rate {} exceeds borrowing rate {}",
                self.r_l, self.r_b
            )));
        }
        Ok(())
    }
}

fn check_paths(paths: &Tensor, grid: &Grid, x0: &[f64]) -> Result<(usize, usize, usize)> {
    let s = paths.shape();
    if s.len() != 3 || s[1] != grid.n_steps() + 1 || s[2] != x0.len() {
        return Err(Error::Dimension {
            op: "forward simulation",
            lhs: vec![0, grid.n_steps() + 1, x0.len()],
            rhs: s.to_vec(),
        });
    }
    Ok((s[0], s[1], s[2]))
}

/// Pathwise `X_t = x0 exp(mu t + sigma B_t - sigma^2 t^{2H} / 2)` per component.
pub fn geometric_fbm_forward(
    paths: &Tensor,
    x0: &[f64],
    mu: f64,
    sigma: f64,
    grid: &Grid,
    hurst: f64,
) -> Result<Tensor> {
    let (m, t_len, d) = check_paths(paths, grid, x0)?;
    let mut out = Vec::with_capacity(paths.len());
    for i in 0..m {
        for j in 0..t_len {
            let t = grid.t(j);
            let drift = mu * t - 0.5 * sigma * sigma * t.powf(2.0 * hurst);
            for (k, &x0k) in x0.iter().enumerate().take(d) {
                out.push(x0k * (drift + sigma * paths.at3(i, j, k)).exp());
            }
        }
    }
    Tensor::new(paths.shape().to_vec(), out)
}

/// `D^phi_t X_t` for geometric fBM on the diagonal `s = t`:
/// `sigma H X_t t^{2H-1}`, and 0 at `t = 0`.
pub fn dphi_diag_gbm(t: f64, x: f64, sigma: f64, hurst: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    sigma * hurst * x * t.powf(2.0 * hurst - 1.0)
}

/// `D^phi_t X_t = sigma H t^{2H-1}` for additive noise `dX = mu dt + sigma dB^H`.
pub fn dphi_diag_additive(t: f64, sigma: f64, hurst: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    sigma * hurst * t.powf(2.0 * hurst - 1.0)
}

/// Diffusion coefficient accepted by [`euler_forward`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Diffusion {
    Constant(f64),
    /// `sigma * x`; the Wick product with a random coefficient is not an
    /// ordinary product, so the Euler scheme rejects it.
    Linear(f64),
}

/// Euler recursion `X_{k+1} = X_k + mu(t_k, X_k) dt + sigma dB^H_k` with
/// constant `sigma`, for which the Wick product is the ordinary product.
pub fn euler_forward(
    paths: &Tensor,
    x0: &[f64],
    mu: impl Fn(f64, f64) -> f64,
    sigma: Diffusion,
    grid: &Grid,
) -> Result<Tensor> {
    let sigma = match sigma {
        Diffusion::Constant(s) => s,
        Diffusion::Linear(_) => {
            return Err(Error::Unsupported(
                "euler_forward needs a state-independent diffusion; \
                 use geometric_fbm_forward for sigma * x"
                    .into(),
            ))
        }
    };
    let (m, t_len, d) = check_paths(paths, grid, x0)?;
    let mut out = vec![0.0; paths.len()];
    for i in 0..m {
        for (k, &x0k) in x0.iter().enumerate().take(d) {
            let mut x = x0k;
            out[(i * t_len) * d + k] = x;
            for j in 0..t_len - 1 {
                let db = paths.at3(i, j + 1, k) - paths.at3(i, j, k);
                x += mu(grid.t(j), x) * grid.dt(j) + sigma * db;
                out[(i * t_len + j + 1) * d + k] = x;
            }
        }
    }
    Tensor::new(paths.shape().to_vec(), out)
}

/// European call under geometric fBM:
/// `u(t, x) = x N(d1) - K e^{-r(T-t)} N(d2)` with total volatility
/// `sigma sqrt(T^{2H} - t^{2H})`.
pub fn bs_closed_form(t: f64, x: f64, p: &BsParams, t_end: f64, hurst: f64) -> Result<f64> {
    if t > t_end {
        return Err(Error::Domain(format!("t = {t} lies beyond the horizon T = {t_end}")));
    }
    if t < 0.0 || !(x > 0.0) {
        return Err(Error::Domain(format!("need t >= 0 and x > 0, got t = {t}, x = {x}")));
    }
    if t == t_end {
        return Ok((x - p.strike).max(0.0));
    }
    let vol = p.sigma * (t_end.powf(2.0 * hurst) - t.powf(2.0 * hurst)).sqrt();
    let tau = t_end - t;
    let eta = ((x / p.strike).ln() + p.r * tau) / vol;
    let d1 = eta + 0.5 * vol;
    let d2 = eta - 0.5 * vol;
    let n = Normal::standard();
    Ok(x * n.cdf(d1) - p.strike * (-p.r * tau).exp() * n.cdf(d2))
}
