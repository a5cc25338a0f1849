//! Wick-corrected Euler rollout of the backward equation.
//!
//! ```text
//! Y_{n+1} = Y_n - (f(t_n, X_n, Y_n, Z_n) + c_n) dt_n + Z_n . dB^H_n
//! c_n     = sum_i dZ^i_n / dx^i_n * (D^phi_{t_n} X_{t_n})^i
//! ```
//!
//! `Z_n` is the network output at step `n` and the derivative is taken
//! with respect to the network input at the same step. The whole rollout,
//! correction included, lives on one graph so the loss gradient reaches the
//! network through `c_n` as well.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{input_jacobian_contract, input_jacobian_diag, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::fbm::Grid;
use crate::networks::Network;
use crate::problems::{Driver, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrectionMode {
    Off,
    /// `sum_i J_ii v_i`
    Diagonal,
    /// `sum_i sum_j J_ij v_j`
    Full,
}

impl CorrectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrectionMode::Off => "off",
            CorrectionMode::Diagonal => "diagonal",
            CorrectionMode::Full => "full",
        }
    }
}

impl fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(CorrectionMode::Off),
            "diagonal" => Ok(CorrectionMode::Diagonal),
            "full" => Ok(CorrectionMode::Full),
            other => Err(Error::Config(format!(
                "unknown jacobian mode '{other}' (expected diagonal or full)"
            ))),
        }
    }
}

/// Where `D^phi X` is evaluated within a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DphiRule {
    /// `D^phi_{t_n} X_{t_n}` at the left end point.
    LeftPoint,
    /// Average of `D^phi_s X_{t_n}` over `s in [t_n, t_{n+1}]`; removes the
    /// `O(dt^{2H-1})` bias of the left point rule for Markov `Z`.
    StepAverage,
    /// Step averages paired with every earlier input `X_{t_k}`, `k <= n`:
    /// `c_n dt = sum_k dZ_n/dx_k * int_{t_n}^{t_{n+1}} D^phi_s X_{t_k} ds`.
    /// This is the exact Wick product for a `Z_n` that reads the whole path,
    /// as a recurrent network does. Costs `O(N^2)` graph replays.
    History,
}

impl DphiRule {
    pub fn as_str(self) -> &'static str {
        match self {
            DphiRule::LeftPoint => "left_point",
            DphiRule::StepAverage => "step_average",
            DphiRule::History => "history",
        }
    }
}

impl fmt::Display for DphiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DphiRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left_point" => Ok(DphiRule::LeftPoint),
            "step_average" => Ok(DphiRule::StepAverage),
            "history" => Ok(DphiRule::History),
            other => Err(Error::Config(format!(
                "unknown dphi rule '{other}' (expected left_point, step_average or history)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutOptions {
    pub correction: CorrectionMode,
    pub dphi: DphiRule,
    /// Treat `c_n` as a constant during backpropagation.
    pub stop_gradient: bool,
}

/// Per-step affine standardization of network inputs, `(x - shift) * inv_scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputNorm {
    shift: Vec<Tensor>,
    inv_scale: Vec<Tensor>,
}

impl InputNorm {
    /// Sample mean and inverse standard deviation of each input step
    /// `0..N` of a `[m, N + 1, d]` state tensor. Components with
    /// (near) zero spread get unit scale.
    pub fn from_paths(x: &Tensor) -> Result<Self> {
        if x.rank() != 3 || x.shape()[1] < 2 {
            return Err(Error::Contract(format!(
                "input statistics need a [m, N + 1, d] tensor, got {:?}",
                x.shape()
            )));
        }
        let (m, t, d) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut shift = Vec::with_capacity(t - 1);
        let mut inv_scale = Vec::with_capacity(t - 1);
        for j in 0..t - 1 {
            let mut mean = vec![0.0; d];
            let mut var = vec![0.0; d];
            for k in 0..d {
                let col: Vec<f64> = (0..m).map(|i| x.at3(i, j, k)).collect();
                let mu = col.iter().sum::<f64>() / m as f64;
                mean[k] = mu;
                var[k] = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m as f64;
            }
            let inv: Vec<f64> = var
                .iter()
                .zip(&mean)
                .map(|(&v, &mu)| {
                    let sd = v.sqrt();
                    if sd <= 1e-12 * mu.abs().max(1.0) {
                        1.0
                    } else {
                        1.0 / sd
                    }
                })
                .collect();
            shift.push(Tensor::new(vec![d], mean)?);
            inv_scale.push(Tensor::new(vec![d], inv)?);
        }
        Ok(Self { shift, inv_scale })
    }

    /// No-op normalization for `n_steps` inputs of width `d`.
    pub fn identity(n_steps: usize, d: usize) -> Self {
        Self {
            shift: vec![Tensor::zeros(&[d]); n_steps],
            inv_scale: vec![Tensor::full(&[d], 1.0); n_steps],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.shift.len()
    }
}

/// Graph handles of one rollout.
pub struct RolloutGraph {
    /// `N + 1` nodes of shape `[m, 1]`.
    pub y: Vec<Var>,
    /// `N` network inputs (raw state, before normalization), `[m, d]`.
    pub x: Vec<Var>,
    /// `N` outputs `[m, d]`.
    pub z: Vec<Var>,
    /// `N` correction terms `[m, 1]`.
    pub correction: Vec<Var>,
    /// `g(X_T) - Y_N`, `[m, 1]`.
    pub gap: Var,
    /// Mean squared terminal gap.
    pub loss: Var,
}

/// Plain tensors extracted from a rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    /// `[m, N + 1]`
    pub y: Tensor,
    /// `[m, N, d]`
    pub z: Tensor,
    /// `[m, N]`
    pub correction: Tensor,
    /// `[m]`
    pub terminal_gap: Tensor,
}

impl RolloutGraph {
    pub fn result(&self, g: &Graph) -> RolloutResult {
        let m = g.shape(self.gap)[0];
        let n = self.z.len();
        let d = self.z.first().map_or(0, |z| g.shape(*z)[1]);
        let columns = |vars: &[Var]| -> Tensor {
            let k = vars.len();
            let mut data = vec![0.0; m * k];
            for (j, v) in vars.iter().enumerate() {
                for (i, &val) in g.value(*v).data().iter().enumerate() {
                    data[i * k + j] = val;
                }
            }
            Tensor::new(vec![m, k], data).expect("shape matches")
        };
        let mut z = vec![0.0; m * n * d];
        for (j, v) in self.z.iter().enumerate() {
            let t = g.value(*v);
            for i in 0..m {
                for k in 0..d {
                    z[(i * n + j) * d + k] = t.at2(i, k);
                }
            }
        }
        RolloutResult {
            y: columns(&self.y),
            z: Tensor::new(vec![m, n, d], z).expect("shape matches"),
            correction: columns(&self.correction),
            terminal_gap: Tensor::new(vec![m], g.value(self.gap).data().to_vec())
                .expect("shape matches"),
        }
    }
}

/// Empirical mean of the squared terminal gap.
pub fn loss(result: &RolloutResult) -> f64 {
    let gaps = result.terminal_gap.data();
    gaps.iter().map(|v| v * v).sum::<f64>() / gaps.len() as f64
}

/// The backward Euler recursion alone, for given `Z_n` and `c_n` nodes.
///
/// `y0` may be `[1]` (broadcast over samples) or `[m, 1]`; `db` is the
/// `[m, N, d]` increment tensor. Returns the `N + 1` states `Y_n`.
pub fn backward_euler(
    g: &mut Graph,
    y0: Var,
    z: &[Var],
    correction: &[Var],
    db: &Tensor,
    grid: &Grid,
    driver: &Driver,
) -> Result<Vec<Var>> {
    let n_steps = grid.n_steps();
    if db.rank() != 3 || db.shape()[1] != n_steps || z.len() != n_steps || correction.len() != n_steps {
        return Err(Error::Dimension {
            op: "backward_euler",
            lhs: vec![0, n_steps, 0],
            rhs: db.shape().to_vec(),
        });
    }
    let m = db.shape()[0];
    let zeros = g.constant(Tensor::zeros(&[m, 1]));
    let mut y = g.add(zeros, y0)?;
    let mut ys = Vec::with_capacity(n_steps + 1);
    ys.push(y);
    for n in 0..n_steps {
        let f = driver.apply(g, y, z[n])?;
        let fc = g.add(f, correction[n])?;
        let drift = g.mul_scalar(fc, grid.dt(n));
        let dbn = g.constant(db.time_slice(n)?);
        let zdb = g.mul(z[n], dbn)?;
        let noise = g.sum_last(zdb);
        let y_minus = g.sub(y, drift)?;
        y = g.add(y_minus, noise)?;
        ys.push(y);
    }
    Ok(ys)
}

/// `sum_k J_{n,k} w_{n,k}` over the inputs `k = 1..=n` (`X_{t_0}` is
/// deterministic and carries no weight), diagonal or fully contracted over
/// components.
fn history_correction(
    g: &mut Graph,
    problem: &Problem,
    grid: &Grid,
    raw: &[Var],
    zn: Var,
    n: usize,
    mode: CorrectionMode,
) -> Result<Var> {
    let (t0, t1) = (grid.t(n), grid.t(n + 1));
    let weights: Vec<(Var, Tensor)> = (1..=n)
        .map(|k| (raw[k], problem.dphi_window(grid.t(k), t0, t1, g.value(raw[k]))))
        .collect();
    let shape = g.shape(zn).to_vec();
    if weights.is_empty() {
        return Ok(g.constant(Tensor::zeros(&[shape[0], 1])));
    }
    match mode {
        CorrectionMode::Full => {
            let seeds: Vec<(Var, Var)> = weights
                .into_iter()
                .map(|(x, w)| (x, g.constant(w)))
                .collect();
            let t = g.jvp_multi(&seeds, zn)?;
            Ok(g.sum_last(t))
        }
        CorrectionMode::Diagonal => {
            let d = shape[1];
            let mut total: Option<Var> = None;
            for i in 0..d {
                let seeds: Vec<(Var, Var)> = weights
                    .iter()
                    .map(|(x, w)| {
                        let mut masked = Tensor::zeros(w.shape());
                        for (j, v) in masked.data_mut().iter_mut().enumerate() {
                            if j % d == i {
                                *v = w.data()[j];
                            }
                        }
                        (*x, g.constant(masked))
                    })
                    .collect();
                let t = g.jvp_multi(&seeds, zn)?;
                let col = g.column(t, i)?;
                total = Some(match total {
                    Some(acc) => g.add(acc, col)?,
                    None => col,
                });
            }
            Ok(total.expect("d >= 1"))
        }
        CorrectionMode::Off => unreachable!(),
    }
}

/// Full rollout: network forward, correction by forward-mode replay,
/// backward recursion and terminal loss.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    g: &mut Graph,
    net: &Network,
    bound: &[Var],
    y0: Var,
    x: &Tensor,
    db: &Tensor,
    problem: &Problem,
    grid: &Grid,
    norm: &InputNorm,
    opts: RolloutOptions,
    iteration: usize,
) -> Result<RolloutGraph> {
    let n_steps = grid.n_steps();
    let d = problem.dim;
    if x.rank() != 3 || x.shape()[1] != n_steps + 1 || x.shape()[2] != d {
        return Err(Error::Dimension {
            op: "rollout",
            lhs: vec![0, n_steps + 1, d],
            rhs: x.shape().to_vec(),
        });
    }
    if norm.n_steps() != n_steps {
        return Err(Error::Contract(format!(
            "input normalization covers {} steps, grid has {n_steps}",
            norm.n_steps()
        )));
    }
    let m = x.shape()[0];

    let mut raw = Vec::with_capacity(n_steps);
    let mut inputs = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let xn = g.constant(x.time_slice(n)?);
        let shift = g.constant(norm.shift[n].clone());
        let inv = g.constant(norm.inv_scale[n].clone());
        let centered = g.sub(xn, shift)?;
        inputs.push(g.mul(centered, inv)?);
        raw.push(xn);
    }
    let z = net.forward(g, bound, &inputs)?;

    let use_correction = problem.wick_correction_enabled && opts.correction != CorrectionMode::Off;
    let mut correction = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let c = if use_correction {
            let c = if opts.dphi == DphiRule::History {
                history_correction(g, problem, grid, &raw, z[n], n, opts.correction)?
            } else {
                let dphi = match opts.dphi {
                    DphiRule::LeftPoint => problem.dphi_diag(grid.t(n), g.value(raw[n])),
                    _ => problem.dphi_step(grid.t(n), grid.t(n + 1), g.value(raw[n])),
                };
                let dphi = g.constant(dphi);
                match opts.correction {
                    CorrectionMode::Diagonal => {
                        let jac = input_jacobian_diag(g, z[n], raw[n])?;
                        let weighted = g.mul(jac, dphi)?;
                        g.sum_last(weighted)
                    }
                    CorrectionMode::Full => input_jacobian_contract(g, z[n], raw[n], dphi)?,
                    CorrectionMode::Off => unreachable!(),
                }
            };
            if opts.stop_gradient {
                g.detach(c)
            } else {
                c
            }
        } else {
            g.constant(Tensor::zeros(&[m, 1]))
        };
        correction.push(c);
    }
    if grid.t(0) == 0.0 && g.value(correction[0]).data().iter().any(|&v| v != 0.0) {
        return Err(Error::Contract(
            "Wick correction must vanish at t = 0".into(),
        ));
    }

    let y = backward_euler(g, y0, &z, &correction, db, grid, &problem.driver)?;
    for (n, v) in y.iter().enumerate() {
        if !g.value(*v).all_finite() {
            return Err(Error::Divergence {
                iteration,
                step: n,
                detail: "non-finite Y".into(),
            });
        }
    }

    let terminal = problem.terminal_values(&x.time_slice(n_steps)?);
    let gt = g.constant(terminal);
    let gap = g.sub(gt, y[n_steps])?;
    let sq = g.square(gap);
    let loss = g.mean_all(sq);
    Ok(RolloutGraph {
        y,
        x: raw,
        z,
        correction,
        gap,
        loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_nodes(g: &mut Graph, n: usize, m: usize, d: usize, v: f64) -> Vec<Var> {
        (0..n).map(|_| g.constant(Tensor::full(&[m, d], v))).collect()
    }

    #[test]
    fn zero_driver_zero_z_keeps_y0() {
        let grid = Grid::uniform(0.5, 4).unwrap();
        let mut g = Graph::new();
        let y0 = g.param(Tensor::scalar(3.25));
        let z = const_nodes(&mut g, 4, 5, 2, 0.0);
        let c = const_nodes(&mut g, 4, 5, 1, 0.0);
        let db = Tensor::full(&[5, 4, 2], 0.3);
        let ys = backward_euler(&mut g, y0, &z, &c, &db, &grid, &Driver::LinearBs { r: 0.0 }).unwrap();
        assert!(g.value(ys[4]).data().iter().all(|&v| v == 3.25));
    }

    #[test]
    fn constant_driver_telescopes() {
        // with f = 0, a constant correction c plays the role of f = c
        let grid = Grid::uniform(0.5, 5).unwrap();
        let mut g = Graph::new();
        let y0 = g.param(Tensor::scalar(1.0));
        let z = const_nodes(&mut g, 5, 3, 1, 0.0);
        let c = const_nodes(&mut g, 5, 3, 1, 0.8);
        let db = Tensor::zeros(&[3, 5, 1]);
        let ys = backward_euler(&mut g, y0, &z, &c, &db, &grid, &Driver::LinearBs { r: 0.0 }).unwrap();
        for &v in g.value(ys[5]).data() {
            assert!((v - (1.0 - 0.8 * 0.5)).abs() < 1e-14);
        }
    }
}
