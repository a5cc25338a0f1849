//! Dense tensors and a dynamic reverse-mode autodiff graph.
//!
//! The graph is rebuilt for every training iteration. Besides ordinary
//! gradients it can produce derivatives of network outputs with respect to
//! network inputs ([`input_jacobian_diag`]) as graph nodes, so a loss that
//! contains such derivatives can still be differentiated with a single
//! first-order backward sweep.

mod graph;
mod tensor;

pub use graph::{Binary, Gradients, Graph, Unary, Var};
pub use tensor::Tensor;

use crate::error::{Error, Result};

pub const DEFAULT_LN_EPS: f64 = 1e-5;

/// Per-row layer normalization over the feature axis followed by the
/// affine map `gamma * x_hat + beta`.
///
/// Composed from primitive ops so that both reverse- and forward-mode
/// derivatives come for free.
pub fn layer_norm(g: &mut Graph, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
    let shape = g.shape(x).to_vec();
    if shape.len() != 2 || shape[1] < 2 {
        return Err(Error::Dimension {
            op: "layer_norm",
            lhs: shape,
            rhs: vec![2],
        });
    }
    let features = shape[1];
    for p in [gamma, beta] {
        if g.shape(p) != [features] {
            return Err(Error::Dimension {
                op: "layer_norm",
                lhs: shape.clone(),
                rhs: g.shape(p).to_vec(),
            });
        }
    }
    if eps == 0.0 {
        let t = g.value(x);
        let constant_row = t
            .data()
            .chunks(features)
            .any(|row| row.iter().all(|&v| v == row[0]));
        if constant_row {
            return Err(Error::Degenerate(
                "layer_norm of a constant row with eps = 0".into(),
            ));
        }
    }
    let mean = g.mean_last(x);
    let centered = g.sub(x, mean)?;
    let sq = g.square(centered);
    let var = g.mean_last(sq);
    let shifted = g.add_scalar(var, eps);
    let inv_std = g.rsqrt(shifted);
    let normed = g.mul(centered, inv_std)?;
    let scaled = g.mul(normed, gamma)?;
    g.add(scaled, beta)
}

/// Diagonal of the per-sample Jacobian `d outputs[m, i] / d inputs[m, i]`.
///
/// One forward-mode replay per coordinate. The result lives on the graph,
/// so gradients flow through it. Rows never mix as long as the ops between
/// `inputs` and `outputs` are per-sample.
pub fn input_jacobian_diag(g: &mut Graph, outputs: Var, inputs: Var) -> Result<Var> {
    let (os, is) = (g.shape(outputs).to_vec(), g.shape(inputs).to_vec());
    if os.len() != 2 || os != is {
        return Err(Error::Dimension {
            op: "input_jacobian_diag",
            lhs: os,
            rhs: is,
        });
    }
    let (m, d) = (is[0], is[1]);
    let mut cols = Vec::with_capacity(d);
    for i in 0..d {
        let mut seed = Tensor::zeros(&[m, d]);
        for row in 0..m {
            seed.data_mut()[row * d + i] = 1.0;
        }
        let seed = g.constant(seed);
        let t = g.jvp(inputs, seed, outputs)?;
        cols.push(g.column(t, i)?);
    }
    if d == 1 {
        Ok(cols[0])
    } else {
        g.concat_cols(&cols)
    }
}

/// Per-sample Jacobian-vector product contracted over output coordinates:
/// `sum_i sum_j d outputs[m, i] / d inputs[m, j] * direction[m, j]`, shape `[m, 1]`.
pub fn input_jacobian_contract(
    g: &mut Graph,
    outputs: Var,
    inputs: Var,
    direction: Var,
) -> Result<Var> {
    let t = g.jvp(inputs, direction, outputs)?;
    Ok(g.sum_last(t))
}
