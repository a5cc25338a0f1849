use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{estimate_u0, IterRecord, Trainer};

use super::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RunStatus {
    Ok,
    /// Not converged: diverged, or `u0` still moving at the end.
    Nc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    /// Final `Y_0`; `None` when the run diverged.
    pub u0: Option<f64>,
    pub rel_err: Option<f64>,
    pub final_valid_loss: Option<f64>,
    pub iterations: usize,
    pub runtime_s: f64,
    pub note: Option<String>,
}

/// Experiment summary; the statistics cover converged runs only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub problem: String,
    pub network: String,
    pub dim: usize,
    pub hurst: f64,
    pub n_steps: usize,
    pub max_iters: usize,
    pub reference_u0: Option<f64>,
    pub mean_u0: Option<f64>,
    pub std_u0: Option<f64>,
    pub rel_l1_error: Option<f64>,
    pub std_rel_err: Option<f64>,
    pub avg_runtime_s: f64,
    pub nc_count: usize,
    pub runs: Vec<RunSummary>,
}

impl ExperimentSummary {
    pub fn has_nc(&self) -> bool {
        self.nc_count > 0
    }
}

/// `u0` range over the trailing window exceeds `tolerance * |mean|`.
pub fn is_unsettled(history: &[IterRecord], window: usize, tolerance: f64) -> bool {
    if history.is_empty() || window == 0 {
        return false;
    }
    let tail = &history[history.len().saturating_sub(window)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.u0), hi.max(r.u0))
        });
    let mean = tail.iter().map(|r| r.u0).sum::<f64>() / tail.len() as f64;
    !(hi - lo <= tolerance * mean.abs())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:?}"))
}

/// History CSV: `iteration, train_loss, valid_loss, u0, rel_err, elapsed_s`.
/// Row 0 holds the initial state. Values are written at full precision.
pub fn write_history_csv(
    path: &Path,
    initial: &IterRecord,
    history: &[IterRecord],
    reference: Option<f64>,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "iteration,train_loss,valid_loss,u0,rel_err,elapsed_s")?;
    let rows = std::iter::once((initial, true)).chain(history.iter().map(|r| (r, false)));
    for (r, first) in rows {
        let rel = reference.map(|t| (r.u0 - t).abs() / t.abs());
        let train = if first { String::new() } else { format!("{:?}", r.train_loss) };
        writeln!(
            w,
            "{},{},{},{:?},{},{:?}",
            r.iteration,
            train,
            opt(r.valid_loss),
            r.u0,
            opt(rel),
            r.elapsed_s
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the `u0` column of a history CSV.
pub fn read_history_u0(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.starts_with("iteration,") => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                detail: "missing history header".into(),
            })
        }
    }
    lines
        .map(|(i, l)| {
            l.split(',')
                .nth(3)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    detail: format!("bad u0 field in '{l}'"),
                })
        })
        .collect()
}

pub fn history_file(dir: &Path, run: usize) -> std::path::PathBuf {
    dir.join(format!("run_{run}.csv"))
}

fn train_one(cfg: &ExperimentConfig, run: usize, reference: Option<f64>) -> Result<RunSummary> {
    let seed = cfg.base_seed + run as u64;
    let problem = cfg.build_problem()?;
    let mut trainer = Trainer::new(problem, cfg.train_config(), seed)?;
    let initial = IterRecord {
        iteration: 0,
        train_loss: f64::NAN,
        valid_loss: trainer.evaluate().ok(),
        u0: trainer.state().u0(),
        elapsed_s: 0.0,
    };
    let outcome = trainer.run();
    let st = trainer.state();
    write_history_csv(&history_file(&cfg.output_dir, run), &initial, &st.history, reference)?;
    let runtime_s = st.history.last().map_or(0.0, |r| r.elapsed_s);
    let final_valid_loss = st
        .history
        .iter()
        .rev()
        .find_map(|r| r.valid_loss)
        .or(initial.valid_loss);
    let mut summary = RunSummary {
        run,
        seed,
        status: RunStatus::Ok,
        u0: Some(st.u0()),
        rel_err: reference.map(|t| (st.u0() - t).abs() / t.abs()),
        final_valid_loss,
        iterations: st.iter,
        runtime_s,
        note: None,
    };
    match outcome {
        Ok(()) => {
            if is_unsettled(&st.history, cfg.nc_window, cfg.nc_tolerance) {
                summary.status = RunStatus::Nc;
                summary.note = Some(format!(
                    "u0 range over the last {} iterations exceeds {} of its mean",
                    cfg.nc_window, cfg.nc_tolerance
                ));
            }
        }
        Err(e @ Error::Divergence { .. }) => {
            summary.status = RunStatus::Nc;
            summary.u0 = None;
            summary.rel_err = None;
            summary.note = Some(e.to_string());
        }
        Err(e) => return Err(e),
    }
    Ok(summary)
}

/// Trains `cfg.runs` independent runs with seeds `base_seed + k`, writes
/// `run_k.csv` and `summary.json` into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let reference = cfg.reference_u0()?;
    let runs = (0..cfg.runs)
        .map(|k| train_one(cfg, k, reference))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, reference, runs)?;
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(cfg.output_dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

fn summarize(
    cfg: &ExperimentConfig,
    reference: Option<f64>,
    runs: Vec<RunSummary>,
) -> Result<ExperimentSummary> {
    let problem = cfg.build_problem()?;
    let good: Vec<f64> = runs
        .iter()
        .filter(|r| r.status == RunStatus::Ok)
        .filter_map(|r| r.u0)
        .collect();
    let stats = if good.is_empty() {
        None
    } else {
        Some(estimate_u0(&good, reference)?)
    };
    Ok(ExperimentSummary {
        problem: cfg.problem.to_string(),
        network: cfg.network.to_string(),
        dim: problem.dim,
        hurst: problem.hurst,
        n_steps: cfg.n_steps,
        max_iters: cfg.max_iters,
        reference_u0: reference,
        mean_u0: stats.as_ref().map(|s| s.mean),
        std_u0: stats.as_ref().map(|s| s.std),
        rel_l1_error: stats.as_ref().and_then(|s| s.rel_l1_error),
        std_rel_err: stats.as_ref().and_then(|s| s.std_rel_err),
        avg_runtime_s: runs.iter().map(|r| r.runtime_s).sum::<f64>() / runs.len() as f64,
        nc_count: runs.iter().filter(|r| r.status == RunStatus::Nc).count(),
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n_steps: usize,
    pub dt: f64,
    pub mean_u0: Option<f64>,
    /// `|mean u0 - reference|`
    pub error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub reference_u0: f64,
    pub rows: Vec<ProbeRow>,
    /// Least-squares slope of `ln error` against `ln dt`, from three rows on.
    pub slope: Option<f64>,
}

/// Least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Trains the configured experiment once per `N` and reports the
/// terminal error against the reference value.
pub fn convergence_probe(cfg: &ExperimentConfig, n_list: &[usize]) -> Result<ProbeResult> {
    if n_list.is_empty() {
        return Err(Error::Config("convergence probe needs at least one N".into()));
    }
    let reference = cfg.reference_u0()?.ok_or_else(|| {
        Error::Config(format!(
            "problem {} has no closed form; set 'reference' to probe convergence",
            cfg.problem
        ))
    })?;
    let t_end = cfg.build_problem()?.t_end;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut c = cfg.clone();
        c.n_steps = n;
        c.output_dir = cfg.output_dir.join(format!("n_{n}"));
        let s = run_experiment(&c)?;
        rows.push(ProbeRow {
            n_steps: n,
            dt: t_end / n as f64,
            mean_u0: s.mean_u0,
            error: s.mean_u0.map(|u| (u - reference).abs()),
        });
    }
    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r.dt.ln(), e.ln())))
        .collect();
    let slope = if usable.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
        fit_slope(&x, &y)
    } else {
        None
    };
    let result = ProbeResult {
        reference_u0: reference,
        rows,
        slope,
    };
    fs::create_dir_all(&cfg.output_dir)?;
    let json = serde_json::to_string_pretty(&result)?;
    fs::write(cfg.output_dir.join("convergence.json"), json + "\n")?;
    Ok(result)
}
