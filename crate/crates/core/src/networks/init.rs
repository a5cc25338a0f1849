use nalgebra::DMatrix;
use rand::RngCore;

use crate::autodiff::Tensor;
use crate::random::{standard_normal, uniform};

/// Layer-norm parameter initialization and epsilon.
#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    pub ln_gamma_min: f64,
    pub ln_gamma_max: f64,
    pub ln_beta_std: f64,
    pub ln_eps: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            ln_gamma_min: 0.9,
            ln_gamma_max: 1.1,
            ln_beta_std: 0.1,
            ln_eps: crate::autodiff::DEFAULT_LN_EPS,
        }
    }
}

/// Glorot/Xavier uniform on `[-b, b]`, `b = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform(rng: &mut impl RngCore, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| uniform(rng, -bound, bound))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches")
}

/// Orthogonal matrix from the QR factorization of a Gaussian matrix, with
/// column signs fixed so that `R` has a positive diagonal.
pub fn orthogonal(rng: &mut impl RngCore, rows: usize, cols: usize) -> Tensor {
    let n = rows.max(cols);
    let a = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let data = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| q[(i, j)])
        .collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches")
}

pub fn ln_gamma(rng: &mut impl RngCore, width: usize, cfg: &InitConfig) -> Tensor {
    let data = (0..width)
        .map(|_| uniform(rng, cfg.ln_gamma_min, cfg.ln_gamma_max))
        .collect();
    Tensor::new(vec![width], data).expect("shape matches")
}

pub fn ln_beta(rng: &mut impl RngCore, width: usize, cfg: &InitConfig) -> Tensor {
    let data = (0..width)
        .map(|_| cfg.ln_beta_std * standard_normal(rng))
        .collect();
    Tensor::new(vec![width], data).expect("shape matches")
}
