//! Trains the 1-d fractional Black-Scholes call and compares `Y_0` with
//! the closed-form price.
//!
//! `cargo run --release --example train_bs1d -- --hurst 0.75 --iters 2000 --network lstm`

use clap::Parser;
use fracbsde::networks::{InitConfig, NetworkKind};
use fracbsde::problems::{Problem, ProblemKind, ProblemParams};
use fracbsde::solver::{CorrectionMode, DphiRule, TrainConfig, Trainer};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 0.75)]
    hurst: f64,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value = "stacked_rnn")]
    network: NetworkKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// off | diagonal | full
    #[arg(long, default_value = "diagonal")]
    correction: CorrectionMode,
    /// left_point | step_average | history
    #[arg(long, default_value = "left_point")]
    dphi: DphiRule,
    #[arg(long)]
    stop_gradient: bool,
    /// Feed raw states to the network instead of standardized ones.
    #[arg(long)]
    raw_inputs: bool,
}

fn main() -> fracbsde::Result<()> {
    let a = Args::parse();
    let params = ProblemParams {
        mu: Some(0.06),
        sigma: Some(0.2),
        r: Some(0.06),
        strike: Some(100.0),
        hurst: Some(a.hurst),
        t_end: Some(0.5),
        dim: Some(1),
        x0: Some(100.0),
        ..Default::default()
    };
    let wick = a.hurst > 0.5 && a.correction != CorrectionMode::Off;
    let problem = Problem::build(ProblemKind::BlackScholes1d, &params, wick)?;
    let truth = problem.closed_form_u0().expect("1-d call has a closed form");
    let cfg = TrainConfig {
        network: a.network,
        layers: 2,
        n_steps: 20,
        lr: 0.005,
        max_iters: a.iters,
        batch: 64,
        valid: 256,
        eval_every: 100,
        y0_min: 4.0,
        y0_max: 10.0,
        correction: a.correction,
        dphi: a.dphi,
        stop_gradient: a.stop_gradient,
        normalize_inputs: !a.raw_inputs,
        record_timing: true,
        init: InitConfig::default(),
    };
    let mut trainer = Trainer::new(problem, cfg, a.seed)?;
    println!("truth u0 = {truth:.6}");
    while trainer.state().iter < a.iters {
        let rec = trainer.step()?.clone();
        if let Some(v) = rec.valid_loss {
            println!(
                "iter {:>6}  valid loss {:>10.6}  u0 {:>9.6}  rel err {:.3e}  {:.1}s",
                rec.iteration,
                v,
                rec.u0,
                (rec.u0 - truth).abs() / truth,
                rec.elapsed_s
            );
        }
    }
    Ok(())
}
