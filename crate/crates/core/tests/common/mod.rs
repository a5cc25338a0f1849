//! One check per stated invariant, shared by the `invariants` test target
//! and the acceptance report. Every check panics on failure.

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use fracbsde::autodiff::{input_jacobian_diag, layer_norm, Graph, Tensor, Var};
use fracbsde::experiment::{history_file, read_history_u0, run_experiment, ExperimentConfig};
use fracbsde::fbm::{fbm_covariance, increments, FbmSampler, Grid};
use fracbsde::networks::{InitConfig, Network, NetworkKind};
use fracbsde::problems::{
    bs_closed_form, driver_linear_bs, driver_two_rates, geometric_fbm_forward, BsParams, Problem,
    ProblemKind, ProblemParams,
};
use fracbsde::solver::{CorrectionMode, DphiRule, TrainConfig, Trainer};
use fracbsde::Result;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

pub type Check = fn();

/// `(module, invariant, check)`
pub const ALL: &[(&str, &str, Check)] = &[
    ("autodiff", "backward matches central differences for every op", ops_match_finite_differences),
    ("autodiff", "graph replay is bitwise deterministic", replay_is_deterministic),
    ("autodiff", "layer_norm rows have zero mean and unit variance", layer_norm_statistics),
    ("autodiff", "input_jacobian_diag never mixes batch rows", jacobian_rows_independent),
    ("fbm", "Cholesky reconstruction residual <= 1e-10", cholesky_reconstruction),
    ("fbm", "increment correlation sign", increment_correlation_sign),
    ("fbm", "chol(c grid) = c^H chol(grid)", cholesky_scaling_law),
    ("fbm", "sampling is deterministic", sampling_determinism),
    ("networks", "gradients reach every tensor and match finite differences", network_gradient_flow),
    ("networks", "LSTM output stays in (-1, 1) for inputs in [-1, 1]", lstm_boundedness),
    ("networks", "stacked RNN weights are shared across steps", rnn_weight_sharing),
    ("problems", "geometric forward at H = 1/2 is classical GBM", brownian_forward_exact),
    ("problems", "price nondecreasing in x, nonincreasing in K", price_monotonicity),
    ("problems", "price continuous as H -> 1/2", price_h_continuity),
    ("problems", "two-rate driver without spread is linear", driver_consistency),
    ("solver", "H = 1/2 rollout is the classical Euler step", brownian_scheme_equivalence),
    ("solver", "correction vanishes at t = 0", correction_vanishes_at_origin),
    ("solver", "d loss / d y0 matches finite differences", y0_gradient_completeness),
    ("solver", "identical seed gives bitwise identical history", seed_determinism),
    ("solver", "loss falls over the first 200 iterations", loss_sanity),
    ("cli", "parse(emit(cfg)) == cfg", config_round_trip),
    ("cli", "summary equals recomputation from history files", summary_recomputation),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

// ---------------------------------------------------------------- autodiff

type Build = fn(&mut Graph, &[Var]) -> Result<Var>;

/// `sum(w * f(leaves))` with fixed weights so every output entry counts.
fn objective(leaves: &[Tensor], f: Build, grads: bool) -> (f64, Vec<Tensor>) {
    let mut g = Graph::new();
    let vars: Vec<Var> = leaves.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars).unwrap();
    let n = g.value(out).len();
    let w = Tensor::new(
        g.shape(out).to_vec(),
        (0..n).map(|k| 0.3 + ((k * 7 + 3) % 11) as f64 / 10.0).collect(),
    )
    .unwrap();
    let w = g.constant(w);
    let prod = g.mul(out, w).unwrap();
    let loss = g.sum_all(prod);
    let value = g.value(loss).item().unwrap();
    if !grads {
        return (value, vec![]);
    }
    let gr = g.backward(loss).unwrap();
    let gs = vars.iter().zip(leaves).map(|(v, t)| gr.get_or_zeros(*v, t.shape())).collect();
    (value, gs)
}

fn fd_mismatch(leaves: &[Tensor], f: Build, tol: f64) -> Option<String> {
    let (_, grads) = objective(leaves, f, true);
    let h = 1e-6;
    for (li, leaf) in leaves.iter().enumerate() {
        for k in 0..leaf.len() {
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[k] += h;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[k] -= h;
            let fd = (objective(&plus, f, false).0 - objective(&minus, f, false).0) / (2.0 * h);
            let an = grads[li].data()[k];
            if (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3) > tol {
                return Some(format!("leaf {li}[{k}]: analytic {an} vs finite difference {fd}"));
            }
        }
    }
    None
}

fn tensor(shape: &[usize], vals: &[f64]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), vals[..n].to_vec()).unwrap()
}

pub const OPS: &[(&str, Build)] = &[
    ("add", |g, v| g.add(v[0], v[1])),
    ("sub", |g, v| g.sub(v[0], v[1])),
    ("mul", |g, v| g.mul(v[0], v[1])),
    ("div", |g, v| {
        let d = g.square(v[1]);
        let d = g.add_scalar(d, 0.5);
        g.div(v[0], d)
    }),
    ("neg", |g, v| Ok(g.neg(v[0]))),
    ("tanh", |g, v| Ok(g.tanh(v[0]))),
    ("sigmoid", |g, v| Ok(g.sigmoid(v[0]))),
    ("exp", |g, v| Ok(g.exp(v[0]))),
    ("max0", |g, v| Ok(g.max0(v[0]))),
    ("square", |g, v| Ok(g.square(v[0]))),
    ("rsqrt", |g, v| {
        let p = g.square(v[0]);
        let p = g.add_scalar(p, 0.2);
        Ok(g.rsqrt(p))
    }),
    ("add_scalar", |g, v| Ok(g.add_scalar(v[0], 1.7))),
    ("mul_scalar", |g, v| Ok(g.mul_scalar(v[0], -2.3))),
    ("matmul", |g, v| g.matmul(v[0], v[2])),
    ("sum_all", |g, v| Ok(g.sum_all(v[0]))),
    ("mean_all", |g, v| Ok(g.mean_all(v[0]))),
    ("sum_last", |g, v| Ok(g.sum_last(v[0]))),
    ("mean_last", |g, v| Ok(g.mean_last(v[0]))),
    ("column", |g, v| g.column(v[0], 1)),
    ("concat_cols", |g, v| g.concat_cols(&[v[0], v[1], v[0]])),
    ("broadcast_row", |g, v| g.mul(v[0], v[3])),
    ("broadcast_col", |g, v| {
        let c = g.sum_last(v[1]);
        g.sub(v[0], c)
    }),
    ("layer_norm", |g, v| layer_norm(g, v[0], v[3], v[4], 1e-5)),
    ("jvp", |g, v| {
        // forward-mode derivative, itself differentiated in reverse mode
        let a = g.matmul(v[0], v[2])?;
        let y = g.tanh(a);
        let dir = g.constant(Tensor::full(&[2, 3], 0.5));
        g.jvp(v[0], dir, y)
    }),
];

/// Leaves: a, b `[2, 3]`; m `[3, 2]`; row vectors r, s `[3]`. Entries are
/// kept at least 0.1 away from zero so `max0` is differentiable.
pub fn op_leaves(vals: &[f64]) -> Vec<Tensor> {
    let v: Vec<f64> = vals
        .iter()
        .map(|x| if x.abs() < 0.1 { x.signum() * 0.1 + x } else { *x })
        .collect();
    vec![
        tensor(&[2, 3], &v[0..]),
        tensor(&[2, 3], &v[6..]),
        tensor(&[3, 2], &v[12..]),
        tensor(&[3], &v[18..]),
        tensor(&[3], &v[21..]),
    ]
}

pub fn ops_match_finite_differences() {
    runner(24)
        .run(&prop::collection::vec(-1.5f64..1.5, 24), |vals| {
            let leaves = op_leaves(&vals);
            for (name, f) in OPS {
                if let Some(msg) = fd_mismatch(&leaves, *f, 1e-5) {
                    return Err(TestCaseError::fail(format!("{name}: {msg}")));
                }
            }
            Ok(())
        })
        .unwrap();
}

pub fn replay_is_deterministic() {
    runner(16)
        .run(&prop::collection::vec(-1.5f64..1.5, 24), |vals| {
            let run = || {
                let l = op_leaves(&vals);
                let mut all = vec![];
                for (_, f) in OPS {
                    let (v, gs) = objective(&l, *f, true);
                    all.push(v.to_bits());
                    all.extend(gs.iter().flat_map(|t| t.data().iter().map(|x| x.to_bits())));
                }
                all
            };
            prop_assert_eq!(run(), run());
            Ok(())
        })
        .unwrap();
}

pub fn layer_norm_statistics() {
    let rows = prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..8), 1..6);
    runner(64)
        .run(&rows, |rows| {
            let w = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| {
                r.resize(w, 1.0);
                r
            }).collect();
            if rows.iter().any(|r| r.iter().all(|&x| (x - r[0]).abs() < 1e-3)) {
                return Ok(());
            }
            let mut g = Graph::new();
            let x = g.constant(Tensor::from_rows(&rows).unwrap());
            let gamma = g.constant(Tensor::full(&[w], 1.0));
            let beta = g.constant(Tensor::zeros(&[w]));
            let y = layer_norm(&mut g, x, gamma, beta, 1e-14).unwrap();
            for row in g.value(y).data().chunks(w) {
                let mean = row.iter().sum::<f64>() / w as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64;
                prop_assert!(mean.abs() <= 1e-10, "mean {}", mean);
                prop_assert!((var - 1.0).abs() <= 1e-6, "var {}", var);
            }
            Ok(())
        })
        .unwrap();
}

/// `tanh(tanh(x W1) W2)` applied row by row.
pub fn tanh_net(g: &mut Graph, x: Var) -> Var {
    let w1 = Tensor::from_rows(&[vec![0.8, -0.4, 0.3], vec![0.2, 0.9, -0.6], vec![-0.5, 0.1, 0.7]]);
    let w2 = Tensor::from_rows(&[vec![0.6, 0.3, -0.2], vec![-0.7, 0.5, 0.4], vec![0.1, -0.3, 0.9]]);
    let (w1, w2) = (g.constant(w1.unwrap()), g.constant(w2.unwrap()));
    let a = g.matmul(x, w1).unwrap();
    let a = g.tanh(a);
    let b = g.matmul(a, w2).unwrap();
    g.tanh(b)
}

pub fn jacobian_rows_independent() {
    let diag_of = |x: &Tensor| {
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let y = tanh_net(&mut g, xv);
        let d = input_jacobian_diag(&mut g, y, xv).unwrap();
        g.value(d).clone()
    };
    let strategy = (prop::collection::vec(-2.0f64..2.0, 12), 0usize..4, -1.0f64..1.0);
    runner(32)
        .run(&strategy, |(vals, row, bump)| {
            let base = Tensor::new(vec![4, 3], vals).unwrap();
            let mut moved = base.clone();
            for v in &mut moved.data_mut()[row * 3..row * 3 + 3] {
                *v += bump;
            }
            let (d0, d1) = (diag_of(&base), diag_of(&moved));
            for other in (0..4).filter(|&r| r != row) {
                for i in 0..3 {
                    prop_assert_eq!(d0.at2(other, i).to_bits(), d1.at2(other, i).to_bits());
                }
            }
            Ok(())
        })
        .unwrap();
}

// -------------------------------------------------------------------- fbm

pub fn cholesky_reconstruction() {
    for h in [0.55, 2.0 / 3.0, 0.75, 0.9] {
        for n in [1, 2, 8, 20, 64] {
            let grid = Grid::uniform(0.5, n).unwrap();
            let s = FbmSampler::new(grid.clone(), h, 1, 0).unwrap();
            let sigma = fbm_covariance(&grid, h).unwrap();
            let l = s.chol();
            let resid = (l * l.transpose() - &sigma).amax() / sigma.amax();
            assert!(resid <= 1e-10, "H={h} N={n}: {resid:e}");
        }
    }
}

/// Correlation of consecutive increments and its standard error.
pub fn increment_correlation(h: f64, m: usize) -> (f64, f64) {
    let grid = Grid::uniform(1.0, 4).unwrap();
    let p = FbmSampler::new(grid, h, 1, 3).unwrap().sample_paths(m);
    let db = increments(&p).unwrap();
    let (a, b): (Vec<f64>, Vec<f64>) = (0..m).map(|i| (db.at3(i, 1, 0), db.at3(i, 2, 0))).unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / m as f64;
    let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / m as f64;
    let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / m as f64;
    let rho = cov / (va * vb).sqrt();
    (rho, (1.0 - rho * rho) / (m as f64).sqrt())
}

pub fn increment_correlation_sign() {
    let (rho, se) = increment_correlation(0.75, 100_000);
    assert!(rho > 4.0 * se, "H = 0.75: rho {rho}, se {se}");
    let (rho, se) = increment_correlation(0.5, 100_000);
    assert!(rho.abs() < 4.0 * se, "H = 0.5: rho {rho}, se {se}");
}

pub fn cholesky_scaling_law() {
    runner(40)
        .run(&(0.5f64..0.95, 0.1f64..10.0, 1usize..32), |(h, c, n)| {
            let grid = Grid::uniform(1.0, n).unwrap();
            let a = FbmSampler::new(grid.clone(), h, 1, 0).unwrap();
            let b = FbmSampler::new(grid.scaled(c).unwrap(), h, 1, 0).unwrap();
            let diff = (b.chol() - a.chol() * c.powf(h)).amax();
            prop_assert!(diff <= 1e-10 * c.powf(h).max(1.0), "{:e}", diff);
            Ok(())
        })
        .unwrap();
}

pub fn sampling_determinism() {
    let draw = || {
        let grid = Grid::uniform(0.5, 10).unwrap();
        FbmSampler::new(grid, 0.75, 3, 42).unwrap().sample(2, 17, 9)
    };
    let (a, b) = (draw(), draw());
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

// --------------------------------------------------------------- networks

pub const KINDS: [NetworkKind; 2] = [NetworkKind::StackedRnn, NetworkKind::Lstm];

pub fn net(kind: NetworkKind, d: usize, seed: u64) -> Network {
    Network::init(kind, d, 2, seed, &InitConfig::default()).unwrap()
}

pub fn seq(m: usize, n: usize, d: usize, phase: f64) -> Tensor {
    let data = (0..m * n * d).map(|k| (k as f64 * 0.61 + phase).sin()).collect();
    Tensor::new(vec![m, n, d], data).unwrap()
}

/// `mean(z^2 / 2 + z)` over the whole output sequence.
fn seq_loss(n: &Network, x: &Tensor) -> f64 {
    let z = n.forward_tensor(x).unwrap();
    z.data().iter().map(|v| 0.5 * v * v + v).sum::<f64>() / z.len() as f64
}

pub fn network_gradient_flow() {
    let (d, steps, m) = (2, 3, 2);
    for kind in KINDS {
        let n = net(kind, d, 3);
        let x = seq(m, steps, d, 0.4);
        let mut g = Graph::new();
        let bound = n.bind(&mut g);
        let xs: Vec<_> = (0..steps).map(|j| g.constant(x.time_slice(j).unwrap())).collect();
        let zs = n.forward(&mut g, &bound, &xs).unwrap();
        let mut terms = vec![];
        for z in zs {
            let sq = g.square(z);
            let half = g.mul_scalar(sq, 0.5);
            terms.push(g.add(half, z).unwrap());
        }
        let all = g.concat_cols(&terms).unwrap();
        let loss = g.mean_all(all);
        let grads = g.backward(loss).unwrap();
        let h = 1e-6;
        for (pi, var) in bound.iter().enumerate() {
            let an = grads.get_or_zeros(*var, n.params()[pi].value.shape());
            let name = &n.params()[pi].name;
            assert!(an.max_abs() > 0.0, "{kind}: no gradient reaches {name}");
            for k in 0..an.len() {
                let mut p = n.clone();
                p.params_mut()[pi].value.data_mut()[k] += h;
                let mut q = n.clone();
                q.params_mut()[pi].value.data_mut()[k] -= h;
                let fd = (seq_loss(&p, &x) - seq_loss(&q, &x)) / (2.0 * h);
                let a = an.data()[k];
                let scale = a.abs().max(fd.abs()).max(1e-4);
                assert!((a - fd).abs() / scale <= 1e-4, "{kind} {name}[{k}]: {a} vs {fd}");
            }
        }
    }
}

pub fn lstm_boundedness() {
    let strategy = (prop::collection::vec(-1.0f64..=1.0, 2 * 6 * 3), 0u64..1000);
    runner(32)
        .run(&strategy, |(vals, seed)| {
            let n = net(NetworkKind::Lstm, 3, seed);
            let z = n.forward_tensor(&Tensor::new(vec![2, 6, 3], vals).unwrap()).unwrap();
            prop_assert!(z.data().iter().all(|v| v.abs() < 1.0));
            Ok(())
        })
        .unwrap();
}

pub fn rnn_weight_sharing() {
    let n = net(NetworkKind::StackedRnn, 2, 0);
    let mut g = Graph::new();
    let bound = n.bind(&mut g);
    let xs: Vec<_> = (0..5).map(|_| g.constant(Tensor::full(&[3, 2], 0.5))).collect();
    n.forward(&mut g, &bound, &xs).unwrap();
    // U, W, b of every layer are registered once, whatever the step count
    assert_eq!(g.trainable_leaves(), bound);
    assert_eq!(bound.len(), 15);
}

// --------------------------------------------------------------- problems

pub fn table_params(strike: f64) -> BsParams {
    BsParams {
        mu: 0.06,
        sigma: 0.2,
        r: 0.06,
        strike,
        r_l: 0.06,
        r_b: 0.06,
    }
}

pub fn brownian_forward_exact() {
    let grid = Grid::uniform(0.5, 10).unwrap();
    let b = FbmSampler::new(grid.clone(), 0.5, 2, 1).unwrap().sample_paths(20);
    let x = geometric_fbm_forward(&b, &[100.0, 80.0], 0.06, 0.2, &grid, 0.5).unwrap();
    for i in 0..20 {
        for j in 0..=10 {
            for (k, x0) in [100.0, 80.0].iter().enumerate() {
                let t = grid.t(j);
                let classical = x0 * ((0.06 - 0.5 * 0.04) * t + 0.2 * b.at3(i, j, k)).exp();
                assert!((x.at3(i, j, k) - classical).abs() <= 4.0 * f64::EPSILON * classical);
            }
        }
    }
}

pub fn price_monotonicity() {
    for h in [0.5, 0.6, 0.75, 0.9] {
        let mut last = f64::NEG_INFINITY;
        for k in 0..80 {
            let x = 50.0 + 1.5 * k as f64;
            let u = bs_closed_form(0.0, x, &table_params(100.0), 0.5, h).unwrap();
            assert!(u >= last, "H={h} x={x}");
            last = u;
        }
        let mut last = f64::INFINITY;
        for k in 0..80 {
            let strike = 50.0 + 1.5 * k as f64;
            let u = bs_closed_form(0.0, 100.0, &table_params(strike), 0.5, h).unwrap();
            assert!(u <= last, "H={h} K={strike}");
            last = u;
        }
    }
}

pub fn price_h_continuity() {
    let p = table_params(100.0);
    let a = bs_closed_form(0.0, 100.0, &p, 0.5, 0.5001).unwrap();
    let b = bs_closed_form(0.0, 100.0, &p, 0.5, 0.5).unwrap();
    assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
}

pub fn driver_consistency() {
    runner(64)
        .run(&(-100.0f64..100.0, prop::collection::vec(-50.0f64..50.0, 0..6)), |(y, z)| {
            prop_assert_eq!(driver_two_rates(y, &z, 0.06, 0.2, 0.06, 0.06), driver_linear_bs(y, 0.06));
            Ok(())
        })
        .unwrap();
}

// ----------------------------------------------------------------- solver

pub fn bs1d(hurst: f64, wick: bool) -> Problem {
    let p = ProblemParams {
        mu: Some(0.06),
        sigma: Some(0.2),
        r: Some(0.06),
        strike: Some(100.0),
        hurst: Some(hurst),
        t_end: Some(0.5),
        dim: Some(1),
        x0: Some(100.0),
        ..Default::default()
    };
    Problem::build(ProblemKind::BlackScholes1d, &p, wick).unwrap()
}

pub fn train_config(n_steps: usize, batch: usize) -> TrainConfig {
    TrainConfig {
        network: NetworkKind::StackedRnn,
        layers: 2,
        n_steps,
        lr: 0.005,
        max_iters: 10,
        batch,
        valid: 16,
        eval_every: 5,
        y0_min: 4.0,
        y0_max: 10.0,
        correction: CorrectionMode::Diagonal,
        dphi: DphiRule::LeftPoint,
        stop_gradient: false,
        normalize_inputs: true,
        record_timing: false,
        init: InitConfig::default(),
    }
}

pub fn brownian_scheme_equivalence() {
    let mut cfg = train_config(6, 8);
    cfg.correction = CorrectionMode::Off;
    let t = Trainer::new(bs1d(0.5, false), cfg, 2).unwrap();
    let (x, db) = t.batch(3).unwrap();
    let r = t.rollout_on(&x, &db).unwrap();
    let dt = t.grid().dt(0);
    for i in 0..8 {
        for n in 0..6 {
            let y = r.y.at2(i, n);
            let next = y - (-0.06 * y) * dt + r.z.at3(i, n, 0) * db.at3(i, n, 0);
            assert!((r.y.at2(i, n + 1) - next).abs() < 1e-12);
            assert_eq!(r.correction.at2(i, n), 0.0);
        }
    }
}

pub fn correction_vanishes_at_origin() {
    for dphi in [DphiRule::LeftPoint, DphiRule::StepAverage, DphiRule::History] {
        for corr in [CorrectionMode::Diagonal, CorrectionMode::Full] {
            let mut cfg = train_config(5, 6);
            cfg.dphi = dphi;
            cfg.correction = corr;
            let t = Trainer::new(bs1d(0.75, true), cfg, 0).unwrap();
            let (x, db) = t.batch(0).unwrap();
            let r = t.rollout_on(&x, &db).unwrap();
            assert!((0..6).all(|i| r.correction.at2(i, 0) == 0.0), "{dphi} {corr}");
            assert!((0..6).any(|i| r.correction.at2(i, 2) != 0.0), "{dphi} {corr}");
        }
    }
}

/// `(finite difference, analytic)` of the pipeline loss with respect to
/// entry `entry` of parameter `param` (0 is `Y_0`, then network tensors).
pub fn pipeline_gradient(cfg: TrainConfig, param: usize, entry: usize) -> (f64, f64) {
    let trainer = Trainer::new(bs1d(0.75, true), cfg, 5).unwrap();
    let (x, db) = trainer.batch(0).unwrap();
    let (_, grads) = trainer.loss_and_grads(&x, &db).unwrap();
    let at = |delta: f64| {
        let mut t = Trainer::new(bs1d(0.75, true), trainer.config().clone(), 5).unwrap();
        let st = t.state_mut();
        if param == 0 {
            st.y0.data_mut()[0] += delta;
        } else {
            st.net.params_mut()[param - 1].value.data_mut()[entry] += delta;
        }
        t.loss_and_grads(&x, &db).unwrap().0
    };
    let h = 1e-6;
    ((at(h) - at(-h)) / (2.0 * h), grads[param].data()[entry])
}

pub fn y0_gradient_completeness() {
    // d = 1, N = 3, m = 4
    for dphi in [DphiRule::LeftPoint, DphiRule::StepAverage, DphiRule::History] {
        let mut cfg = train_config(3, 4);
        cfg.dphi = dphi;
        let (fd, an) = pipeline_gradient(cfg, 0, 0);
        assert!((an - fd).abs() <= 1e-5 * fd.abs(), "{dphi}: {an} vs {fd}");
    }
}

pub fn seed_determinism() {
    let run = || {
        let mut t = Trainer::new(bs1d(0.75, true), train_config(5, 8), 17).unwrap();
        t.run().unwrap();
        t.state().history.clone()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 10);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        assert_eq!(x.valid_loss.map(f64::to_bits), y.valid_loss.map(f64::to_bits));
        assert_eq!(x.u0.to_bits(), y.u0.to_bits());
        assert_eq!(x.elapsed_s.to_bits(), y.elapsed_s.to_bits());
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub fn loss_sanity() {
    let mut cfg = train_config(20, 64);
    cfg.max_iters = 200;
    cfg.eval_every = 100;
    let mut t = Trainer::new(bs1d(0.75, true), cfg, 3).unwrap();
    // zero the output layer's input and recurrent weights and its scale, so
    // that Z is the learnable constant beta + b
    for p in t.state_mut().net.params_mut() {
        if matches!(p.name.as_str(), "out.u" | "out.w" | "out.ln_gamma") {
            p.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
    t.run().unwrap();
    let z1 = t.state().net.forward_tensor(&Tensor::full(&[1, 3, 1], 0.4)).unwrap();
    let z2 = t.state().net.forward_tensor(&Tensor::full(&[1, 3, 1], -2.0)).unwrap();
    assert_eq!(z1, z2, "output must not depend on the state");
    let h = &t.state().history;
    let mut early: Vec<f64> = h[..50].iter().map(|r| r.train_loss).collect();
    let mut late: Vec<f64> = h[150..].iter().map(|r| r.train_loss).collect();
    let (e, l) = (median(&mut early), median(&mut late));
    assert!(l < e, "median loss {l} over 150..200 vs {e} over 0..50");
}

// -------------------------------------------------------------------- cli

pub fn bundled(name: &str, overrides: &[&str]) -> ExperimentConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_file(&Path::new(CONFIGS).join(name), &o).unwrap()
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let base = bundled("bs1d_h075.cfg", &[]);
    (
        (0.51f64..1.0, 0.01f64..2.0, 1usize..50, 1e-5f64..0.1, 0usize..20_000),
        (1usize..512, 1usize..512, 1usize..1000, 1usize..10, any::<u64>()),
        (0.0f64..5.0, 0.0f64..5.0, any::<bool>(), any::<bool>(), any::<bool>()),
        (any::<bool>(), 0usize..3, any::<bool>(), 1usize..1000, 1e-6f64..1.0),
        (prop::option::of(0.1f64..100.0), 2usize..4, any::<bool>()),
    )
        .prop_map(move |(a, b, c, d, e)| {
            let mut cfg = base.clone();
            cfg.params.hurst = Some(a.0);
            cfg.params.t_end = Some(a.1);
            cfg.n_steps = a.2;
            cfg.lr = a.3;
            cfg.max_iters = a.4;
            cfg.batch = b.0;
            cfg.valid = b.1;
            cfg.eval_every = b.2;
            cfg.runs = b.3;
            cfg.base_seed = b.4;
            cfg.y0_min = c.0;
            cfg.y0_max = c.0 + c.1;
            cfg.wick_correction = c.2;
            cfg.stop_gradient_correction = c.3;
            cfg.normalize_inputs = c.4;
            cfg.jacobian = if d.0 { CorrectionMode::Full } else { CorrectionMode::Diagonal };
            cfg.dphi_rule = [DphiRule::LeftPoint, DphiRule::StepAverage, DphiRule::History][d.1];
            cfg.network = if d.2 { NetworkKind::Lstm } else { NetworkKind::StackedRnn };
            cfg.nc_window = d.3;
            cfg.nc_tolerance = d.4;
            cfg.reference = e.0;
            cfg.layers = e.1;
            cfg.record_timing = e.2;
            cfg
        })
}

pub fn config_round_trip() {
    runner(256)
        .run(&arb_config(), |cfg| {
            let back = ExperimentConfig::parse(&cfg.emit(), &[]).unwrap();
            prop_assert_eq!(back, cfg);
            Ok(())
        })
        .unwrap();
    for entry in fs::read_dir(CONFIGS).unwrap() {
        let cfg = ExperimentConfig::from_file(&entry.unwrap().path(), &[]).unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.emit(), &[]).unwrap(), cfg);
    }
}

pub fn summary_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let out = format!("output_dir={}", dir.path().display());
    let cfg = bundled(
        "bs1d_h075.cfg",
        &["max_iters=20", "valid=32", "batch=16", "eval_every=10", "n_steps=5", "runs=3", &out],
    );
    let s = run_experiment(&cfg).unwrap();
    assert_eq!(s.nc_count, 0);
    let finals: Vec<f64> = (0..3)
        .map(|k| *read_history_u0(&history_file(dir.path(), k)).unwrap().last().unwrap())
        .collect();
    let mean = finals.iter().sum::<f64>() / 3.0;
    let std = (finals.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    let truth = s.reference_u0.unwrap();
    let rel: Vec<f64> = finals.iter().map(|u| (u - truth).abs() / truth).collect();
    let rel_mean = rel.iter().sum::<f64>() / 3.0;
    let rel_std = (rel.iter().map(|e| (e - rel_mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!((s.mean_u0.unwrap() - mean).abs() < 1e-12);
    assert!((s.std_u0.unwrap() - std).abs() < 1e-12);
    assert!((s.rel_l1_error.unwrap() - rel_mean).abs() < 1e-12);
    assert!((s.std_rel_err.unwrap() - rel_std).abs() < 1e-12);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    // the default serde_json float parser may be off by one ulp
    assert!((json["mean_u0"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!((json["std_u0"].as_f64().unwrap() - std).abs() < 1e-12);
}
