//! Recurrent approximators for `t_n -> Z_{t_n}`.
//!
//! Two architectures share one parameter store:
//!
//! * [`NetworkKind::StackedRnn`]: `L` tanh layers of width `d + 10` and a
//!   width-`d` output layer that feeds its previous output back in,
//!
//!   ```text
//!   h1_n = tanh(LN1(x_n U1 + h1_{n-1} W1) + b1)
//!   h2_n = tanh(LN2(h1_n U2 + h2_{n-1} W2) + b2)
//!   Z_n  = LN3(h2_n Uo + Z_{n-1} Wo) + b3
//!   ```
//!
//! * [`NetworkKind::Lstm`]: `L` LSTM layers of width `d + 10` followed by
//!   one width-`d` LSTM layer whose hidden state is the output. Every gate
//!   pre-activation and the cell state are layer-normalized before their
//!   nonlinearity.
//!
//! A layer-norm site of width 1 cannot standardize anything, so there it
//! reduces to its affine part `gamma * x + beta` (same parameters).

pub mod checkpoint;
pub mod init;

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{layer_norm, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::random::stream_rng;
pub use init::InitConfig;

const INIT_STREAM: u64 = 0x1717;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    StackedRnn,
    Lstm,
}

impl NetworkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::StackedRnn => "stacked_rnn",
            NetworkKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stacked_rnn" => Ok(NetworkKind::StackedRnn),
            "lstm" => Ok(NetworkKind::Lstm),
            other => Err(Error::Config(format!(
                "unknown network kind '{other}' (expected stacked_rnn or lstm)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub value: Tensor,
}

/// Indices into the parameter store for one normalized affine site.
#[derive(Clone, Copy, Debug)]
struct Site {
    u: usize,
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    width: usize,
}

#[derive(Clone, Debug)]
struct LstmLayer {
    /// input, forget, candidate, output
    gates: [Site; 4],
    cell_gamma: usize,
    cell_beta: usize,
    width: usize,
}

#[derive(Clone, Debug)]
enum Arch {
    Rnn { hidden: Vec<Site>, output: Site },
    Lstm { layers: Vec<LstmLayer> },
}

#[derive(Clone, Debug)]
pub struct Network {
    kind: NetworkKind,
    dim: usize,
    layers: usize,
    ln_eps: f64,
    params: Vec<NamedTensor>,
    arch: Arch,
}

struct Builder<'a, R: rand::RngCore> {
    params: Vec<NamedTensor>,
    rng: &'a mut R,
    cfg: &'a InitConfig,
}

impl<R: rand::RngCore> Builder<'_, R> {
    fn push(&mut self, name: String, value: Tensor) -> usize {
        self.params.push(NamedTensor { name, value });
        self.params.len() - 1
    }

    fn site(&mut self, prefix: &str, fan_in: usize, width: usize) -> Site {
        let u = init::xavier_uniform(self.rng, fan_in, width);
        let w = init::orthogonal(self.rng, width, width);
        let gamma = init::ln_gamma(self.rng, width, self.cfg);
        let beta = init::ln_beta(self.rng, width, self.cfg);
        Site {
            u: self.push(format!("{prefix}.u"), u),
            w: self.push(format!("{prefix}.w"), w),
            b: self.push(format!("{prefix}.b"), Tensor::zeros(&[width])),
            gamma: self.push(format!("{prefix}.ln_gamma"), gamma),
            beta: self.push(format!("{prefix}.ln_beta"), beta),
            width,
        }
    }

    fn lstm_layer(&mut self, prefix: &str, fan_in: usize, width: usize) -> LstmLayer {
        let gates = ["input", "forget", "cell", "output"]
            .map(|gate| self.site(&format!("{prefix}.{gate}"), fan_in, width));
        let cg = init::ln_gamma(self.rng, width, self.cfg);
        let cb = init::ln_beta(self.rng, width, self.cfg);
        LstmLayer {
            gates,
            cell_gamma: self.push(format!("{prefix}.state.ln_gamma"), cg),
            cell_beta: self.push(format!("{prefix}.state.ln_beta"), cb),
            width,
        }
    }
}

/// Recurrent state carried between time steps.
enum State {
    Rnn { hidden: Vec<Var>, output: Var },
    Lstm { h: Vec<Var>, c: Vec<Var> },
}

impl Network {
    /// Fresh network with Xavier input weights, orthogonal recurrent
    /// weights and zero biases; deterministic per seed.
    pub fn init(
        kind: NetworkKind,
        dim: usize,
        layers: usize,
        seed: u64,
        cfg: &InitConfig,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("network width d must be at least 1".into()));
        }
        if layers < 2 {
            return Err(Error::Domain(format!(
                "at least two hidden layers are required, got {layers}"
            )));
        }
        let hidden = dim + 10;
        let mut rng = stream_rng(seed, INIT_STREAM);
        let mut b = Builder {
            params: Vec::new(),
            rng: &mut rng,
            cfg,
        };
        let arch = match kind {
            NetworkKind::StackedRnn => {
                let mut sites = Vec::with_capacity(layers);
                for l in 0..layers {
                    let fan_in = if l == 0 { dim } else { hidden };
                    sites.push(b.site(&format!("rnn{}", l + 1), fan_in, hidden));
                }
                let output = b.site("out", hidden, dim);
                Arch::Rnn {
                    hidden: sites,
                    output,
                }
            }
            NetworkKind::Lstm => {
                let mut ls = Vec::with_capacity(layers + 1);
                for l in 0..layers {
                    let fan_in = if l == 0 { dim } else { hidden };
                    ls.push(b.lstm_layer(&format!("lstm{}", l + 1), fan_in, hidden));
                }
                ls.push(b.lstm_layer("lstm_out", hidden, dim));
                Arch::Lstm { layers: ls }
            }
        };
        let params = b.params;
        Ok(Self {
            kind,
            dim,
            layers,
            ln_eps: cfg.ln_eps,
            params,
            arch,
        })
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn ln_eps(&self) -> f64 {
        self.ln_eps
    }

    pub fn params(&self) -> &[NamedTensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [NamedTensor] {
        &mut self.params
    }

    /// Trainable scalars of the network plus the scalar `Y_0`.
    pub fn param_count(&self) -> usize {
        1 + self.params.iter().map(|p| p.value.len()).sum::<usize>()
    }

    /// Registers every parameter tensor once as a trainable leaf.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|p| g.param(p.value.clone())).collect()
    }

    /// Runs the recurrence over `xs` (one `[m, d]` node per time step).
    pub fn forward(&self, g: &mut Graph, bound: &[Var], xs: &[Var]) -> Result<Vec<Var>> {
        if bound.len() != self.params.len() {
            return Err(Error::Contract(format!(
                "{} bound parameters for a network with {}",
                bound.len(),
                self.params.len()
            )));
        }
        let Some(first) = xs.first() else {
            return Ok(Vec::new());
        };
        let m = g.shape(*first)[0];
        for &x in xs {
            let s = g.shape(x);
            if s.len() != 2 || s[1] != self.dim || s[0] != m {
                return Err(Error::Dimension {
                    op: "network forward",
                    lhs: vec![m, self.dim],
                    rhs: s.to_vec(),
                });
            }
        }
        let mut state = self.zero_state(g, m);
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            out.push(self.step(g, bound, x, &mut state)?);
        }
        Ok(out)
    }

    /// Convenience wrapper: `[m, N, d]` in, `[m, N, d]` out, on a throwaway graph.
    pub fn forward_tensor(&self, x_seq: &Tensor) -> Result<Tensor> {
        if x_seq.rank() != 3 || x_seq.shape()[2] != self.dim {
            return Err(Error::Dimension {
                op: "network forward",
                lhs: vec![0, 0, self.dim],
                rhs: x_seq.shape().to_vec(),
            });
        }
        let (m, n, d) = (x_seq.shape()[0], x_seq.shape()[1], x_seq.shape()[2]);
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let xs = (0..n)
            .map(|j| Ok(g.constant(x_seq.time_slice(j)?)))
            .collect::<Result<Vec<_>>>()?;
        let zs = self.forward(&mut g, &bound, &xs)?;
        let mut data = vec![0.0; m * n * d];
        for (j, z) in zs.iter().enumerate() {
            let zt = g.value(*z);
            for i in 0..m {
                for k in 0..d {
                    data[(i * n + j) * d + k] = zt.at2(i, k);
                }
            }
        }
        Tensor::new(vec![m, n, d], data)
    }

    fn zero_state(&self, g: &mut Graph, m: usize) -> State {
        match &self.arch {
            Arch::Rnn { hidden, output } => State::Rnn {
                hidden: hidden
                    .iter()
                    .map(|s| g.constant(Tensor::zeros(&[m, s.width])))
                    .collect(),
                output: g.constant(Tensor::zeros(&[m, output.width])),
            },
            Arch::Lstm { layers } => State::Lstm {
                h: layers
                    .iter()
                    .map(|l| g.constant(Tensor::zeros(&[m, l.width])))
                    .collect(),
                c: layers
                    .iter()
                    .map(|l| g.constant(Tensor::zeros(&[m, l.width])))
                    .collect(),
            },
        }
    }

    fn normalize(&self, g: &mut Graph, x: Var, gamma: Var, beta: Var, width: usize) -> Result<Var> {
        if width >= 2 {
            layer_norm(g, x, gamma, beta, self.ln_eps)
        } else {
            let scaled = g.mul(x, gamma)?;
            g.add(scaled, beta)
        }
    }

    /// `normalize(input U + prev W) + b`
    fn site(&self, g: &mut Graph, p: &[Var], site: &Site, input: Var, prev: Var) -> Result<Var> {
        let a = g.matmul(input, p[site.u])?;
        let r = g.matmul(prev, p[site.w])?;
        let pre = g.add(a, r)?;
        let normed = self.normalize(g, pre, p[site.gamma], p[site.beta], site.width)?;
        g.add(normed, p[site.b])
    }

    fn step(&self, g: &mut Graph, p: &[Var], x: Var, state: &mut State) -> Result<Var> {
        match (&self.arch, state) {
            (Arch::Rnn { hidden, output }, State::Rnn { hidden: hs, output: z_prev }) => {
                let mut input = x;
                for (site, h) in hidden.iter().zip(hs.iter_mut()) {
                    let pre = self.site(g, p, site, input, *h)?;
                    *h = g.tanh(pre);
                    input = *h;
                }
                let z = self.site(g, p, output, input, *z_prev)?;
                *z_prev = z;
                Ok(z)
            }
            (Arch::Lstm { layers }, State::Lstm { h, c }) => {
                let mut input = x;
                for (k, layer) in layers.iter().enumerate() {
                    let [gi, gf, gc, go] = &layer.gates;
                    let i_pre = self.site(g, p, gi, input, h[k])?;
                    let f_pre = self.site(g, p, gf, input, h[k])?;
                    let c_pre = self.site(g, p, gc, input, h[k])?;
                    let o_pre = self.site(g, p, go, input, h[k])?;
                    let i_gate = g.sigmoid(i_pre);
                    let f_gate = g.sigmoid(f_pre);
                    let cand = g.tanh(c_pre);
                    let o_gate = g.sigmoid(o_pre);
                    let keep = g.mul(f_gate, c[k])?;
                    let write = g.mul(i_gate, cand)?;
                    let cell = g.add(keep, write)?;
                    let cn = self.normalize(
                        g,
                        cell,
                        p[layer.cell_gamma],
                        p[layer.cell_beta],
                        layer.width,
                    )?;
                    let ct = g.tanh(cn);
                    let hn = g.mul(o_gate, ct)?;
                    c[k] = cell;
                    h[k] = hn;
                    input = hn;
                }
                Ok(input)
            }
            _ => unreachable!("state always matches architecture"),
        }
    }
}

/// Trainable-parameter count of a two-hidden-layer stacked RNN as stated
/// in closed form: `1 + 2d(d+10) + 3(d+10)^2 + d^2 + 6(d+10) + 3d`.
pub fn stacked_rnn_formula_count(d: usize) -> usize {
    let h = d + 10;
    1 + 2 * d * h + 3 * h * h + d * d + 6 * h + 3 * d
}
