//! Command-line front end shared by the `fracbsde` binary.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiment::{convergence_probe, run_experiment, sig6, ExperimentConfig, ExperimentSummary};
use crate::fbm::{FbmSampler, Grid};
use crate::problems::{bs_closed_form, BsParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "fracbsde", version, about = "Deep recurrent solver for fractional FBSDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample fBM paths on a uniform grid and write them as CSV.
    SimulateFbm {
        #[arg(long = "h")]
        hurst: f64,
        #[arg(long)]
        n_steps: usize,
        #[arg(long = "t")]
        t_end: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form price of a European call under geometric fBM.
    Price {
        #[arg(long = "h")]
        hurst: f64,
        #[arg(long, default_value_t = 100.0)]
        x: f64,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 0.5)]
        t_end: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 0.06)]
        r: f64,
        #[arg(long, default_value_t = 100.0)]
        strike: f64,
    },
    /// Train a single run (seed `base_seed`).
    Train(ConfigArgs),
    /// Train `runs` independent runs and summarize them.
    Experiment(ConfigArgs),
    /// Train once per grid size and report the error against the reference.
    ConvergenceProbe {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated step counts, e.g. `5,10,20`.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
    },
}

#[derive(Args, Debug)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(out) = &self.out {
            overrides.push(format!("output_dir={}", out.display()));
        }
        ExperimentConfig::from_file(&self.config, &overrides)
    }
}

/// Exit status for an error value.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Domain(_) => EXIT_CONFIG,
        Error::Divergence { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::SimulateFbm {
            hurst,
            n_steps,
            t_end,
            dim,
            paths,
            seed,
            out: file,
        } => {
            let grid = Grid::uniform(t_end, n_steps)?;
            let sampler = FbmSampler::new(grid, hurst, dim, seed)?;
            let p = sampler.sample_paths(paths);
            match file {
                Some(path) => write_paths(&mut BufWriter::new(fs::File::create(path)?), &p)?,
                None => write_paths(out, &p)?,
            }
            Ok(EXIT_OK)
        }
        Command::Price {
            hurst,
            x,
            t,
            t_end,
            sigma,
            r,
            strike,
        } => {
            if !(0.0..1.0).contains(&hurst) || hurst <= 0.0 {
                return Err(Error::Domain(format!("hurst must lie in (0, 1), got {hurst}")));
            }
            let p = BsParams {
                mu: r,
                sigma,
                r,
                strike,
                r_l: r,
                r_b: r,
            };
            p.validate()?;
            writeln!(out, "{}", sig6(bs_closed_form(t, x, &p, t_end, hurst)?))?;
            Ok(EXIT_OK)
        }
        Command::Train(args) => {
            let mut cfg = args.load()?;
            cfg.runs = 1;
            let s = run_experiment(&cfg)?;
            print_summary(out, &s, &cfg)?;
            Ok(status(&s))
        }
        Command::Experiment(args) => {
            let cfg = args.load()?;
            let s = run_experiment(&cfg)?;
            print_summary(out, &s, &cfg)?;
            Ok(status(&s))
        }
        Command::ConvergenceProbe { config, n_list } => {
            let cfg = config.load()?;
            let res = convergence_probe(&cfg, &n_list)?;
            writeln!(out, "reference_u0 {}", sig6(res.reference_u0))?;
            writeln!(out, "n_steps,dt,mean_u0,error")?;
            let mut nc = false;
            for row in &res.rows {
                nc |= row.mean_u0.is_none();
                writeln!(
                    out,
                    "{},{},{},{}",
                    row.n_steps,
                    sig6(row.dt),
                    row.mean_u0.map_or("NC".into(), sig6),
                    row.error.map_or("NC".into(), sig6)
                )?;
            }
            match res.slope {
                Some(s) => writeln!(out, "slope {}", sig6(s))?,
                None => writeln!(out, "slope n/a")?,
            }
            Ok(if nc { EXIT_NOT_CONVERGED } else { EXIT_OK })
        }
    }
}

fn status(s: &ExperimentSummary) -> i32 {
    if s.has_nc() {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    }
}

fn write_paths(w: &mut dyn Write, p: &crate::autodiff::Tensor) -> Result<()> {
    writeln!(w, "path_id,time_index,component,value")?;
    let (m, t, d) = (p.shape()[0], p.shape()[1], p.shape()[2]);
    for i in 0..m {
        for j in 0..t {
            for k in 0..d {
                writeln!(w, "{i},{j},{k},{}", sig6(p.at3(i, j, k)))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), sig6)
}

fn print_summary(out: &mut dyn Write, s: &ExperimentSummary, cfg: &ExperimentConfig) -> io::Result<()> {
    writeln!(
        out,
        "{} d={} H={} network={} N={} iterations={}",
        s.problem,
        s.dim,
        sig6(s.hurst),
        s.network,
        s.n_steps,
        s.max_iters
    )?;
    writeln!(out, "run,seed,status,u0,rel_err,valid_loss,runtime_s")?;
    for r in &s.runs {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.run,
            r.seed,
            if r.status == crate::experiment::RunStatus::Ok { "ok" } else { "NC" },
            fmt_opt(r.u0),
            fmt_opt(r.rel_err),
            fmt_opt(r.final_valid_loss),
            sig6(r.runtime_s)
        )?;
    }
    writeln!(out, "reference_u0 {}", fmt_opt(s.reference_u0))?;
    writeln!(out, "mean_u0 {}", fmt_opt(s.mean_u0))?;
    writeln!(out, "std_u0 {}", fmt_opt(s.std_u0))?;
    writeln!(out, "rel_l1_error {}", fmt_opt(s.rel_l1_error))?;
    writeln!(out, "std_rel_err {}", fmt_opt(s.std_rel_err))?;
    writeln!(out, "avg_runtime_s {}", sig6(s.avg_runtime_s))?;
    writeln!(out, "nc_count {}", s.nc_count)?;
    writeln!(out, "output {}", cfg.output_dir.display())?;
    Ok(())
}
