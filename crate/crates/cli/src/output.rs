//! CSV and JSON artifact writers. Floats are written with the shortest
//! round-trip representation, so identical runs produce identical bytes.

use anyhow::{Context, Result};
use lognodal_core::RadialFn;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Solution profile as `r,u,du` rows over the grid abscissae, bracketed by
/// the endpoint values.
pub fn write_profile_csv(path: &Path, u: &RadialFn) -> Result<()> {
    let mut out = String::from("r,u,du\n");
    let grid = u.grid();
    let mut row = |r: f64, v: f64, d: f64| {
        out.push_str(&format!("{r:?},{v:?},{d:?}\n"));
    };
    row(0.0, u.eval(0.0), u.eval_deriv(0.0));
    for (i, &r) in grid.abscissae().iter().enumerate() {
        row(r, u.values()[i], u.derivs()[i]);
    }
    let radius = grid.radius();
    row(radius, u.eval(radius), u.eval_deriv(radius));
    write_atomic(path, out.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing JSON artifact")?;
    write_atomic(path, text.as_bytes())
}

/// `axis,value,status` sweep matrix; failed points carry NaN and the error.
pub fn write_sweep_csv(path: &Path, rows: &[(f64, Result<f64, String>)]) -> Result<()> {
    let mut out = String::from("axis,value,status\n");
    for (axis, row) in rows {
        match row {
            Ok(v) => out.push_str(&format!("{axis:?},{v:?},ok\n")),
            Err(why) => out.push_str(&format!(
                "{axis:?},NaN,{}\n",
                why.replace([',', '\n'], ";")
            )),
        }
    }
    write_atomic(path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating output directory {}", parent.display()))?;
    }
    let mut f =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
