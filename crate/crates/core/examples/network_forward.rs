//! Builds both architectures, counts their parameters and runs a forward
//! pass over a short random sequence.
//!
//! `cargo run --example network_forward -- [dim]`

use fracbsde::autodiff::Tensor;
use fracbsde::networks::{stacked_rnn_formula_count, InitConfig, Network, NetworkKind};

fn main() -> fracbsde::Result<()> {
    let d: usize = std::env::args().nth(1).map_or(3, |s| s.parse().expect("dim"));
    let (m, n) = (4, 5);
    let data = (0..m * n * d).map(|k| ((k as f64) * 0.37).sin()).collect();
    let x = Tensor::new(vec![m, n, d], data)?;

    for kind in [NetworkKind::StackedRnn, NetworkKind::Lstm] {
        let net = Network::init(kind, d, 2, 0, &InitConfig::default())?;
        let z = net.forward_tensor(&x)?;
        println!("{kind}: {} trainable scalars (incl. Y_0)", net.param_count());
        for p in net.params() {
            println!("  {:<16} {:?}", p.name, p.value.shape());
        }
        println!("  output {:?}, max |z| = {:.4}", z.shape(), z.max_abs());
    }
    println!("closed-form stacked RNN count: {}", stacked_rnn_formula_count(d));
    Ok(())
}
