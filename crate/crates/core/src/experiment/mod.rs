//! Configuration, multi-seed experiments and their files.

mod config;
mod run;

pub use config::{known_keys, parse_pairs, ExperimentConfig};
pub use run::{
    convergence_probe, fit_slope, history_file, is_unsettled, read_history_u0, run_experiment,
    write_history_csv, ExperimentSummary, ProbeResult, ProbeRow, RunStatus, RunSummary,
};

/// `x` with six significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    // round first so that 9.999996 is placed in the right decade
    let sci = format!("{x:.5e}");
    let exp: i32 = sci
        .split_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("formatted exponent");
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}
