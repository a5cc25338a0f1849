use std::time::Instant;

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::fbm::{increments, FbmSampler, Grid};
use crate::networks::{InitConfig, Network, NetworkKind};
use crate::problems::Problem;
use crate::random::{stream_rng, uniform};

use super::adam::Adam;
use super::rollout::{rollout, CorrectionMode, DphiRule, InputNorm, RolloutOptions, RolloutResult};

const VALID_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const Y0_STREAM: u64 = 0x5930;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub network: NetworkKind,
    pub layers: usize,
    pub n_steps: usize,
    pub lr: f64,
    pub max_iters: usize,
    /// Mini-batch size, drawn fresh every iteration.
    pub batch: usize,
    /// Size of the fixed validation set.
    pub valid: usize,
    pub eval_every: usize,
    pub y0_min: f64,
    pub y0_max: f64,
    pub correction: CorrectionMode,
    pub dphi: DphiRule,
    pub stop_gradient: bool,
    /// Standardize network inputs with validation-set statistics.
    pub normalize_inputs: bool,
    /// Store wall-clock times in the history; off gives byte-stable output.
    pub record_timing: bool,
    pub init: InitConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1".into());
        }
        if self.batch == 0 || self.valid == 0 {
            return bad("batch and valid sizes must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if !(self.y0_min <= self.y0_max) {
            return bad(format!(
                "y0_min = {} exceeds y0_max = {}",
                self.y0_min, self.y0_max
            ));
        }
        Ok(())
    }
}

/// One optimization step. `valid_loss` is present on evaluation iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    /// `Y_0` after the update.
    pub u0: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub y0: Tensor,
    pub net: Network,
    pub adam: Adam,
    pub iter: usize,
    pub history: Vec<IterRecord>,
}

impl TrainState {
    pub fn u0(&self) -> f64 {
        self.y0.data()[0]
    }
}

/// One training run: fixed validation set, fresh mini-batches, Adam.
pub struct Trainer {
    problem: Problem,
    grid: Grid,
    sampler: FbmSampler,
    cfg: TrainConfig,
    norm: InputNorm,
    valid_x: Tensor,
    valid_db: Tensor,
    state: TrainState,
    started: Option<Instant>,
}

impl Trainer {
    pub fn new(problem: Problem, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let grid = Grid::uniform(problem.t_end, cfg.n_steps)?;
        let sampler = FbmSampler::new(grid.clone(), problem.hurst, problem.dim, seed)?;
        let paths = sampler.sample(VALID_STREAM, 0, cfg.valid);
        let valid_x = problem.simulate_forward(&paths, &grid)?;
        let valid_db = increments(&paths)?;
        let norm = if cfg.normalize_inputs {
            InputNorm::from_paths(&valid_x)?
        } else {
            InputNorm::identity(cfg.n_steps, problem.dim)
        };
        let net = Network::init(cfg.network, problem.dim, cfg.layers, seed, &cfg.init)?;
        let y0 = uniform(&mut stream_rng(seed, Y0_STREAM), cfg.y0_min, cfg.y0_max);
        let y0 = if cfg.y0_min == cfg.y0_max { cfg.y0_min } else { y0 };
        let mut shapes: Vec<&[usize]> = vec![&[1]];
        shapes.extend(net.params().iter().map(|p| p.value.shape()));
        let adam = Adam::new(cfg.lr, &shapes);
        Ok(Self {
            problem,
            grid,
            sampler,
            cfg,
            norm,
            valid_x,
            valid_db,
            state: TrainState {
                y0: Tensor::scalar(y0),
                net,
                adam,
                iter: 0,
                history: Vec::new(),
            },
            started: None,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut TrainState {
        &mut self.state
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn input_norm(&self) -> &InputNorm {
        &self.norm
    }

    fn options(&self) -> RolloutOptions {
        RolloutOptions {
            correction: self.cfg.correction,
            dphi: self.cfg.dphi,
            stop_gradient: self.cfg.stop_gradient,
        }
    }

    /// Mini-batch `iter` of the training stream: `(X, dB)`.
    pub fn batch(&self, iter: usize) -> Result<(Tensor, Tensor)> {
        let first = (iter * self.cfg.batch) as u64;
        let paths = self.sampler.sample(TRAIN_STREAM, first, self.cfg.batch);
        Ok((self.problem.simulate_forward(&paths, &self.grid)?, increments(&paths)?))
    }

    /// Loss and its gradient with respect to `(Y_0, theta)` on `(x, db)`.
    pub fn loss_and_grads(&self, x: &Tensor, db: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let st = &self.state;
        let mut g = Graph::new();
        let y0 = g.param(st.y0.clone());
        let bound = st.net.bind(&mut g);
        let r = rollout(
            &mut g,
            &st.net,
            &bound,
            y0,
            x,
            db,
            &self.problem,
            &self.grid,
            &self.norm,
            self.options(),
            st.iter,
        )?;
        let loss = g.value(r.loss).data()[0];
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration: st.iter,
                step: self.grid.n_steps(),
                detail: format!("non-finite training loss {loss}"),
            });
        }
        let grads = g.backward(r.loss)?;
        let mut out = Vec::with_capacity(bound.len() + 1);
        out.push(grads.get_or_zeros(y0, &[1]));
        for (v, p) in bound.iter().zip(st.net.params()) {
            out.push(grads.get_or_zeros(*v, p.value.shape()));
        }
        Ok((loss, out))
    }

    /// Rollout without gradients on arbitrary paths.
    pub fn rollout_on(&self, x: &Tensor, db: &Tensor) -> Result<RolloutResult> {
        let st = &self.state;
        let mut g = Graph::new();
        let y0 = g.constant(st.y0.clone());
        let bound = st.net.bind(&mut g);
        let r = rollout(
            &mut g,
            &st.net,
            &bound,
            y0,
            x,
            db,
            &self.problem,
            &self.grid,
            &self.norm,
            self.options(),
            st.iter,
        )?;
        Ok(r.result(&g))
    }

    /// Validation loss on the fixed validation set.
    pub fn evaluate(&self) -> Result<f64> {
        let r = self.rollout_on(&self.valid_x, &self.valid_db)?;
        Ok(super::rollout::loss(&r))
    }

    /// One Adam step on a fresh mini-batch.
    pub fn step(&mut self) -> Result<&IterRecord> {
        let started = *self.started.get_or_insert_with(Instant::now);
        let (x, db) = self.batch(self.state.iter)?;
        let (train_loss, grads) = self.loss_and_grads(&x, &db)?;
        let st = &mut self.state;
        let mut params: Vec<&mut Tensor> = Vec::with_capacity(grads.len());
        params.push(&mut st.y0);
        params.extend(st.net.params_mut().iter_mut().map(|p| &mut p.value));
        st.adam.step(&mut params, &grads, st.iter)?;
        st.iter += 1;
        let iteration = st.iter;
        let valid_loss = if iteration % self.cfg.eval_every == 0 || iteration == self.cfg.max_iters {
            Some(self.evaluate()?)
        } else {
            None
        };
        let elapsed_s = if self.cfg.record_timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let st = &mut self.state;
        st.history.push(IterRecord {
            iteration,
            train_loss,
            valid_loss,
            u0: st.y0.data()[0],
            elapsed_s,
        });
        Ok(st.history.last().expect("just pushed"))
    }

    /// Runs the remaining iterations up to `max_iters`. On divergence the
    /// history up to the failing iteration stays available in [`Self::state`].
    pub fn run(&mut self) -> Result<()> {
        while self.state.iter < self.cfg.max_iters {
            self.step()?;
        }
        Ok(())
    }
}

/// Statistics of `u_0` over independent runs.
#[derive(Clone, Debug, PartialEq)]
pub struct U0Summary {
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
    /// Mean of `|u0 - truth| / |truth|` over runs.
    pub rel_l1_error: Option<f64>,
    pub std_rel_err: Option<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn estimate_u0(u0s: &[f64], truth: Option<f64>) -> Result<U0Summary> {
    if u0s.is_empty() {
        return Err(Error::Contract("u0 statistics need at least one run".into()));
    }
    let (mean, std) = mean_std(u0s);
    let (rel_l1_error, std_rel_err) = match truth {
        Some(t) => {
            let rel: Vec<f64> = u0s.iter().map(|u| (u - t).abs() / t.abs()).collect();
            let (m, s) = mean_std(&rel);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    Ok(U0Summary {
        mean,
        std,
        rel_l1_error,
        std_rel_err,
    })
}
