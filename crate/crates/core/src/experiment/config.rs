//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key may
//! appear at most once; unknown keys are rejected. Overrides given as
//! `key=value` strings replace (or add) entries before validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::networks::{InitConfig, NetworkKind};
use crate::problems::{Problem, ProblemKind, ProblemParams};
use crate::solver::{CorrectionMode, DphiRule, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub params: ProblemParams,
    pub network: NetworkKind,
    pub layers: usize,
    pub n_steps: usize,
    pub lr: f64,
    pub max_iters: usize,
    pub batch: usize,
    pub valid: usize,
    pub eval_every: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub y0_min: f64,
    pub y0_max: f64,
    pub wick_correction: bool,
    pub stop_gradient_correction: bool,
    pub jacobian: CorrectionMode,
    pub dphi_rule: DphiRule,
    pub normalize_inputs: bool,
    pub record_timing: bool,
    /// Trailing window (iterations) for the non-convergence test.
    pub nc_window: usize,
    /// A run is NC when `u0` moves by more than this fraction of its mean
    /// within the window.
    pub nc_tolerance: f64,
    /// Reference `u(0, x0)`; defaults to the closed form where one exists.
    pub reference: Option<f64>,
    pub output_dir: PathBuf,
}

const REQUIRED: [&str; 8] = [
    "problem", "n_steps", "lr", "max_iters", "batch", "valid", "y0_min", "y0_max",
];

const OPTIONAL: [&str; 14] = [
    "network",
    "layers",
    "eval_every",
    "runs",
    "base_seed",
    "wick_correction",
    "stop_gradient_correction",
    "jacobian",
    "dphi_rule",
    "normalize_inputs",
    "record_timing",
    "nc_window",
    "nc_tolerance",
    "reference",
];

const OUTPUT_DIR: &str = "output_dir";

/// All keys the format understands.
pub fn known_keys() -> Vec<&'static str> {
    let mut keys: Vec<&str> = REQUIRED.to_vec();
    keys.extend(ProblemParams::KEYS);
    keys.extend(OPTIONAL);
    keys.push(OUTPUT_DIR);
    keys
}

fn is_known(key: &str) -> bool {
    known_keys().contains(&key)
}

/// Splits `text` into key/value pairs; `line` numbers are 1-based.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                detail: format!("expected 'key = value', got '{line}'"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                detail: "empty key".into(),
            });
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                detail: format!("duplicate key '{k}'"),
            });
        }
    }
    Ok(map)
}

fn apply_overrides(map: &mut BTreeMap<String, String>, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let Some((k, v)) = o.split_once('=') else {
            return Err(Error::Config(format!("override '{o}' is not key=value")));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

struct Reader {
    map: BTreeMap<String, String>,
}

impl Reader {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value '{v}' for key '{key}'"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing mandatory key '{key}'")))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

impl ExperimentConfig {
    /// Parses config text plus overrides and validates the result.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = parse_pairs(text)?;
        if map.is_empty() && overrides.is_empty() {
            return Err(Error::Config("configuration is empty".into()));
        }
        apply_overrides(&mut map, overrides)?;
        let unknown: Vec<&str> = map.keys().map(String::as_str).filter(|k| !is_known(k)).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !map.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "missing mandatory keys: {}",
                missing.join(", ")
            )));
        }
        let r = Reader { map };
        let problem: ProblemKind = r
            .raw("problem")
            .expect("checked above")
            .parse()?;
        let params = ProblemParams {
            mu: r.parsed("mu")?,
            sigma: r.parsed("sigma")?,
            r: r.parsed("r")?,
            r_l: r.parsed("r_l")?,
            r_b: r.parsed("r_b")?,
            strike: r.parsed("strike")?,
            hurst: r.parsed("hurst")?,
            t_end: r.parsed("t_end")?,
            dim: r.parsed("dim")?,
            x0: r.parsed("x0")?,
        };
        let network = match r.raw("network") {
            Some(v) => v.parse()?,
            None => NetworkKind::StackedRnn,
        };
        let jacobian = match r.raw("jacobian") {
            Some(v) => v.parse()?,
            None => CorrectionMode::Diagonal,
        };
        if jacobian == CorrectionMode::Off {
            return Err(Error::Config(
                "jacobian selects diagonal or full; disable the correction with wick_correction = false"
                    .into(),
            ));
        }
        let dphi_rule = match r.raw("dphi_rule") {
            Some(v) => v.parse()?,
            None => DphiRule::LeftPoint,
        };
        let cfg = Self {
            problem,
            params,
            network,
            layers: r.or("layers", 2)?,
            n_steps: r.required("n_steps")?,
            lr: r.required("lr")?,
            max_iters: r.required("max_iters")?,
            batch: r.required("batch")?,
            valid: r.required("valid")?,
            eval_every: r.or("eval_every", 100)?,
            runs: r.or("runs", 1)?,
            base_seed: r.or("base_seed", 0)?,
            y0_min: r.required("y0_min")?,
            y0_max: r.required("y0_max")?,
            wick_correction: r.or("wick_correction", true)?,
            stop_gradient_correction: r.or("stop_gradient_correction", false)?,
            jacobian,
            dphi_rule,
            normalize_inputs: r.or("normalize_inputs", true)?,
            record_timing: r.or("record_timing", true)?,
            nc_window: r.or("nc_window", 500)?,
            nc_tolerance: r.or("nc_tolerance", 0.1)?,
            reference: r.parsed("reference")?,
            output_dir: PathBuf::from(r.raw(OUTPUT_DIR).unwrap_or("output")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if !(self.nc_tolerance > 0.0) {
            return Err(Error::Config("nc_tolerance must be positive".into()));
        }
        if self.layers < 2 {
            return Err(Error::Config(format!(
                "layers must be at least 2, got {}",
                self.layers
            )));
        }
        self.train_config().validate()?;
        self.build_problem()?;
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Problem> {
        Problem::build(self.problem, &self.params, self.wick_correction)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            network: self.network,
            layers: self.layers,
            n_steps: self.n_steps,
            lr: self.lr,
            max_iters: self.max_iters,
            batch: self.batch,
            valid: self.valid,
            eval_every: self.eval_every,
            y0_min: self.y0_min,
            y0_max: self.y0_max,
            correction: if self.wick_correction {
                self.jacobian
            } else {
                CorrectionMode::Off
            },
            dphi: self.dphi_rule,
            stop_gradient: self.stop_gradient_correction,
            normalize_inputs: self.normalize_inputs,
            record_timing: self.record_timing,
            init: InitConfig::default(),
        }
    }

    /// Configured reference, else the closed form when the problem has one.
    pub fn reference_u0(&self) -> Result<Option<f64>> {
        match self.reference {
            Some(v) => Ok(Some(v)),
            None => Ok(self.build_problem()?.closed_form_u0()),
        }
    }

    /// Canonical text form; `parse(emit(cfg)) == cfg`.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").expect("write to string");
        };
        put("problem", self.problem.to_string());
        let p = &self.params;
        let floats = [
            ("mu", p.mu),
            ("sigma", p.sigma),
            ("r", p.r),
            ("r_l", p.r_l),
            ("r_b", p.r_b),
            ("strike", p.strike),
            ("hurst", p.hurst),
            ("t_end", p.t_end),
        ];
        for (k, v) in floats {
            if let Some(v) = v {
                put(k, format!("{v:?}"));
            }
        }
        if let Some(d) = p.dim {
            put("dim", d.to_string());
        }
        if let Some(x) = p.x0 {
            put("x0", format!("{x:?}"));
        }
        put("network", self.network.to_string());
        put("layers", self.layers.to_string());
        put("n_steps", self.n_steps.to_string());
        put("lr", format!("{:?}", self.lr));
        put("max_iters", self.max_iters.to_string());
        put("batch", self.batch.to_string());
        put("valid", self.valid.to_string());
        put("eval_every", self.eval_every.to_string());
        put("runs", self.runs.to_string());
        put("base_seed", self.base_seed.to_string());
        put("y0_min", format!("{:?}", self.y0_min));
        put("y0_max", format!("{:?}", self.y0_max));
        put("wick_correction", self.wick_correction.to_string());
        put(
            "stop_gradient_correction",
            self.stop_gradient_correction.to_string(),
        );
        put("jacobian", self.jacobian.to_string());
        put("dphi_rule", self.dphi_rule.to_string());
        put("normalize_inputs", self.normalize_inputs.to_string());
        put("record_timing", self.record_timing.to_string());
        put("nc_window", self.nc_window.to_string());
        put("nc_tolerance", format!("{:?}", self.nc_tolerance));
        if let Some(v) = self.reference {
            put("reference", format!("{v:?}"));
        }
        put(OUTPUT_DIR, self.output_dir.display().to_string());
        s
    }
}
