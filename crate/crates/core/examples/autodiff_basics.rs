//! Reverse- and forward-mode derivatives on the tape, plus the per-sample
//! input Jacobian diagonal used by the correction term.
//!
//! `cargo run --example autodiff_basics`

use fracbsde::autodiff::{input_jacobian_diag, Graph, Tensor};

fn main() -> fracbsde::Result<()> {
    let mut g = Graph::new();
    let w = g.param(Tensor::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]])?);
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![-0.5, 0.3]])?);

    // z = tanh(x W), loss = mean(z^2)
    let xw = g.matmul(x, w)?;
    let z = g.tanh(xw);
    let z2 = g.square(z);
    let loss = g.mean_all(z2);
    let grads = g.backward(loss)?;
    println!("loss   = {:.6}", g.value(loss).item()?);
    println!("dL/dW  = {:?}", grads.get(w).expect("W is trainable").data());

    let diag = input_jacobian_diag(&mut g, z, x)?;
    println!("dz_i/dx_i per row = {:?}", g.value(diag).data());
    Ok(())
}
