//! Exact fractional Brownian motion on a fixed grid.
//!
//! Paths are drawn as `L z` where `L` is the lower Cholesky factor of the
//! covariance of `(B_{t_1}, ..., B_{t_N})` and `z` is a vector of standard
//! normals. `B_{t_0} = 0` is not part of the factorization.
//!
//! Normals come from a counter-based stream (ChaCha with an explicit word
//! position) pushed through the inverse normal CDF. Path `k` of stream `s`
//! always consumes the same block of the stream, so any slicing of a batch
//! reproduces the same paths.

pub mod quadrature;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::random::{open_unit, stream_rng};

/// Time partition `0 = t_0 < t_1 < ... < t_N = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    times: Vec<f64>,
}

impl Grid {
    pub fn uniform(t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::Domain(format!(
                "uniform grid needs N >= 1 and T > 0 (got N = {n_steps}, T = {t_end})"
            )));
        }
        let dt = t_end / n_steps as f64;
        let mut times: Vec<f64> = (0..=n_steps).map(|j| j as f64 * dt).collect();
        times[n_steps] = t_end;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return Err(Error::Domain(
                "grid must start at 0 and contain at least one step".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("grid times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t(&self, j: usize) -> f64 {
        self.times[j]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("grid is non-empty")
    }

    /// Width of step `n`, `t_{n+1} - t_n`.
    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_times(self.times.iter().map(|t| t * c).collect())
    }
}

/// Kernel `phi(s, t) = H (2H - 1) |s - t|^(2H - 2)`.
pub fn phi(s: f64, t: f64, hurst: f64) -> Result<f64> {
    if s == t {
        return Err(Error::Singularity { s, t });
    }
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::Domain(format!("phi needs H in (1/2, 1), got {hurst}")));
    }
    Ok(hurst * (2.0 * hurst - 1.0) * (s - t).abs().powf(2.0 * hurst - 2.0))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
    }
    Ok(())
}

/// `Cov(B_s, B_t) = (s^{2H} + t^{2H} - |s - t|^{2H}) / 2`.
pub fn covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    0.5 * (s.powf(two_h) + t.powf(two_h) - (s - t).abs().powf(two_h))
}

/// Covariance of `(B_{t_1}, ..., B_{t_N})`, an `N x N` matrix.
pub fn fbm_covariance(grid: &Grid, hurst: f64) -> Result<DMatrix<f64>> {
    check_hurst(hurst)?;
    let n = grid.n_steps();
    Ok(DMatrix::from_fn(n, n, |j, k| {
        covariance(grid.t(j + 1), grid.t(k + 1), hurst)
    }))
}

/// Cholesky sampler for `dim` independent fBM components.
#[derive(Clone, Debug)]
pub struct FbmSampler {
    hurst: f64,
    grid: Grid,
    chol: DMatrix<f64>,
    dim: usize,
    seed: u64,
}

impl FbmSampler {
    pub fn new(grid: Grid, hurst: f64, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("fBM dimension must be at least 1".into()));
        }
        let sigma = fbm_covariance(&grid, hurst)?;
        let chol = sigma
            .cholesky()
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "fBM covariance (H = {hurst}, N = {}) is not numerically positive definite; \
                     consider a coarser grid or adding explicit diagonal jitter",
                    grid.n_steps()
                ))
            })?
            .unpack();
        Ok(Self {
            hurst,
            grid,
            chol,
            dim,
            seed,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower triangular factor `L` with `L L^T = Sigma`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// First `m` paths of stream 0.
    pub fn sample_paths(&self, m: usize) -> Tensor {
        self.sample(0, 0, m)
    }

    /// Paths `first_path .. first_path + m` of substream `stream`, shaped
    /// `[m, N + 1, dim]` with `path[., 0, .] = 0`.
    pub fn sample(&self, stream: u64, first_path: u64, m: usize) -> Tensor {
        let n = self.grid.n_steps();
        let d = self.dim;
        let per_path = (n * d) as u128;
        let mut rng = stream_rng(self.seed, stream);
        // each u64 draw consumes two 32-bit words
        rng.set_word_pos(2 * per_path * first_path as u128);

        let normal = Normal::standard();
        let mut z = vec![0.0; n * d];
        let mut out = vec![0.0; m * (n + 1) * d];
        for p in 0..m {
            for v in z.iter_mut() {
                *v = normal.inverse_cdf(open_unit(&mut rng));
            }
            let path = &mut out[p * (n + 1) * d..(p + 1) * (n + 1) * d];
            for comp in 0..d {
                let zc = &z[comp * n..(comp + 1) * n];
                for j in 0..n {
                    let mut acc = 0.0;
                    for (l, zl) in zc.iter().enumerate().take(j + 1) {
                        acc += self.chol[(j, l)] * zl;
                    }
                    path[(j + 1) * d + comp] = acc;
                }
            }
        }
        Tensor::new(vec![m, n + 1, d], out).expect("shape matches buffer")
    }
}

/// `dB[., n, .] = B[., n + 1, .] - B[., n, .]`, shaped `[m, N, d]`.
pub fn increments(paths: &Tensor) -> Result<Tensor> {
    if paths.rank() != 3 || paths.shape()[1] < 2 {
        return Err(Error::Contract(format!(
            "increments need a [m, N + 1, d] tensor with N >= 1, got {:?}",
            paths.shape()
        )));
    }
    let (m, t, d) = (paths.shape()[0], paths.shape()[1], paths.shape()[2]);
    let mut out = Vec::with_capacity(m * (t - 1) * d);
    for i in 0..m {
        for j in 0..t - 1 {
            for k in 0..d {
                out.push(paths.at3(i, j + 1, k) - paths.at3(i, j, k));
            }
        }
    }
    Tensor::new(vec![m, t - 1, d], out)
}
