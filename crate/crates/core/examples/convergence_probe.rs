//! Trains the Brownian 1-d call on several grids and fits the log-log
//! slope of the error in `u0` against the step size.
//!
//! `cargo run --release --example convergence_probe -- [iters]`

use fracbsde::experiment::{convergence_probe, ExperimentConfig};

fn main() -> fracbsde::Result<()> {
    let iters = std::env::args().nth(1).unwrap_or_else(|| "800".into());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/bs1d_h05.cfg");
    let overrides = [
        format!("max_iters={iters}"),
        "runs=1".into(),
        "nc_window=200".into(),
        format!("output_dir={}", std::env::temp_dir().join("fracbsde_probe").display()),
    ];
    let cfg = ExperimentConfig::from_file(path.as_ref(), &overrides)?;
    let res = convergence_probe(&cfg, &[4, 8, 16])?;
    println!("reference {:.6}", res.reference_u0);
    for row in &res.rows {
        println!("N = {:>3}  dt = {:.4}  u0 = {:?}  error = {:?}", row.n_steps, row.dt, row.mean_u0, row.error);
    }
    println!("slope {:?}", res.slope);
    Ok(())
}
