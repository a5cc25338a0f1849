//! Plain-text parameter checkpoints.
//!
//! ```text
//! fracbsde-checkpoint 1
//! kind stacked_rnn
//! dim 1
//! layers 2
//! ln_eps 1e-5
//! y0 7.1e0
//! tensor rnn1.u 1 11
//! <11 values, space separated>
//! ...
//! end
//! ```
//!
//! Values use Rust's shortest round-trip scientific notation, so a
//! save/load cycle is bit exact. Tensors appear in the network's own
//! parameter order; loading checks every name and shape.

use std::io::{BufRead, Write};

use super::{InitConfig, Network, NetworkKind};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

const MAGIC: &str = "fracbsde-checkpoint";
const VERSION: u32 = 1;

pub fn write_checkpoint(mut w: impl Write, net: &Network, y0: f64) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "kind {}", net.kind())?;
    writeln!(w, "dim {}", net.dim())?;
    writeln!(w, "layers {}", net.layers())?;
    writeln!(w, "ln_eps {:e}", net.ln_eps())?;
    writeln!(w, "y0 {y0:e}")?;
    for p in net.params() {
        let dims: Vec<String> = p.value.shape().iter().map(ToString::to_string).collect();
        writeln!(w, "tensor {} {}", p.name, dims.join(" "))?;
        let vals: Vec<String> = p.value.data().iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", vals.join(" "))?;
    }
    writeln!(w, "end")?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, detail: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            detail: detail.into(),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.next()?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(self.err(format!("expected '{key} <value>', found '{l}'"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| self.err(format!("cannot parse '{s}'")))
    }
}

/// Reads a checkpoint, returning the network and `Y_0`.
pub fn read_checkpoint(r: impl BufRead) -> Result<(Network, f64)> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    let header = lines.next()?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(lines.err(format!("unsupported header '{header}'")));
    }
    let kind: NetworkKind = lines.keyed("kind")?.parse()?;
    let dim: usize = {
        let v = lines.keyed("dim")?;
        lines.parse(&v)?
    };
    let layers: usize = {
        let v = lines.keyed("layers")?;
        lines.parse(&v)?
    };
    let ln_eps: f64 = {
        let v = lines.keyed("ln_eps")?;
        lines.parse(&v)?
    };
    let y0: f64 = {
        let v = lines.keyed("y0")?;
        lines.parse(&v)?
    };
    let cfg = InitConfig {
        ln_eps,
        ..InitConfig::default()
    };
    let mut net = Network::init(kind, dim, layers, 0, &cfg)?;
    for idx in 0..net.params().len() {
        let head = lines.keyed("tensor")?;
        let mut parts = head.split_whitespace();
        let name = parts.next().unwrap_or_default().to_string();
        let shape = parts
            .map(|s| lines.parse::<usize>(s))
            .collect::<Result<Vec<_>>>()?;
        let expected = &net.params()[idx];
        if name != expected.name || shape != expected.value.shape() {
            return Err(lines.err(format!(
                "expected tensor {} {:?}, found {name} {shape:?}",
                expected.name,
                expected.value.shape()
            )));
        }
        let vals = lines.next()?;
        let data = vals
            .split_whitespace()
            .map(|s| lines.parse::<f64>(s))
            .collect::<Result<Vec<_>>>()?;
        let value = Tensor::new(shape, data).map_err(|e| lines.err(e.to_string()))?;
        net.params_mut()[idx].value = value;
    }
    let tail = lines.next()?;
    if tail != "end" {
        return Err(lines.err(format!("expected 'end', found '{tail}'")));
    }
    Ok((net, y0))
}
