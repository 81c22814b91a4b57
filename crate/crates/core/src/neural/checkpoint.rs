//! Plain-text checkpoints.
//!
//! ```text
//! # evmodel v1
//! hidden_dim 80
//! hidden_layers 2
//! income_values 1 0.472
//! n_params 6801
//! <one parameter per line, shortest round-trip decimal>
//! ```
//!
//! Lines starting with `#` before the shape header are comments; callers may
//! put a provenance block there.

use std::io::{BufRead, Write};

use super::EVModel;
use crate::error::{Error, Result};

const MAGIC: &str = "# evmodel v1";

pub fn write_checkpoint<W: Write>(model: &EVModel, header: &[String], mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    for line in header {
        writeln!(w, "# {line}")?;
    }
    let iv = model.income_values();
    writeln!(w, "hidden_dim {}", model.hidden_dim())?;
    writeln!(w, "hidden_layers {}", model.hidden_layers())?;
    writeln!(w, "income_values {} {}", iv[0], iv[1])?;
    writeln!(w, "n_params {}", model.n_params())?;
    for x in model.params() {
        writeln!(w, "{x:?}")?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn keyed<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| bad(format!("missing `{key}`")))?;
    line.strip_prefix(key)
        .map(str::trim)
        .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<EVModel> {
    let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().map(String::as_str);
    if it.next() != Some(MAGIC) {
        return Err(bad("not an evmodel v1 checkpoint"));
    }
    let mut it = it.skip_while(|l| l.starts_with('#'));
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s}: {e}")));
    let hidden_dim = parse_usize(keyed(it.next(), "hidden_dim")?)?;
    let hidden_layers = parse_usize(keyed(it.next(), "hidden_layers")?)?;
    let iv: Vec<f64> = keyed(it.next(), "income_values")?
        .split_whitespace()
        .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{s}: {e}"))))
        .collect::<Result<_>>()?;
    if iv.len() != 2 {
        return Err(bad("income_values needs two entries"));
    }
    let n = parse_usize(keyed(it.next(), "n_params")?)?;
    let phi: Vec<f64> = it
        .filter(|l| !l.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("{s}: {e}"))))
        .collect::<Result<_>>()?;
    if phi.len() != n {
        return Err(bad(format!("header says {n} parameters, found {}", phi.len())));
    }
    let m = EVModel::unflatten(hidden_dim, hidden_layers, [iv[0], iv[1]], &phi)?;
    if !m.is_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok(m)
}
