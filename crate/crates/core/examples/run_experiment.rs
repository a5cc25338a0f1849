//! Runs a bundled experiment config with a reduced budget and prints the
//! summary that is also written to `summary.json`.
//!
//! `cargo run --release --example run_experiment -- [config] [key=value ...]`

use fracbsde::experiment::{run_experiment, ExperimentConfig};

fn main() -> fracbsde::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/bs1d_h05.cfg").into());
    let mut overrides = vec![
        "max_iters=500".to_string(),
        "runs=2".into(),
        "nc_window=200".into(),
        format!("output_dir={}", std::env::temp_dir().join("fracbsde_example").display()),
    ];
    overrides.extend(args);

    let cfg = ExperimentConfig::from_file(path.as_ref(), &overrides)?;
    let summary = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
