//! File output: CSV series, JSON reports, atomic writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use barostab_core::evolve::{FluidState, Grid};
use barostab_core::relenergy::RelEnergySample;
use barostab_core::steady::{pointwise_residuals, SteadyProfile};
use barostab_core::Eos;

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temporary sibling of `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv_bytes<F>(fill: F) -> CliResult<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> CliResult<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w)?;
    w.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))
}

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_profile_csv(path: &Path, profile: &SteadyProfile, eos: &Eos) -> CliResult<()> {
    let (rc, rm) = pointwise_residuals(profile, eos);
    let bytes = csv_bytes(|w| {
        w.write_record(["r", "rho_tilde", "u_tilde", "du_tilde", "div_u", "residual_c", "residual_m"])?;
        for i in 0..profile.r.len() {
            w.write_record([
                fmt(profile.r[i]),
                fmt(profile.rho[i]),
                fmt(profile.u[i]),
                fmt(profile.du[i]),
                fmt(profile.div_u(i)),
                fmt(rc[i]),
                fmt(rm[i]),
            ])?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

pub const TRAJECTORY_HEADER: [&str; 12] = [
    "t",
    "E",
    "D",
    "B_in",
    "B_out",
    "T_grad",
    "T_press",
    "T_rem",
    "lhs_minus_rhs",
    "monotone_flag",
    "w7_rel_pressure",
    "w7_density_sq",
];

pub fn trajectory_csv(samples: &[RelEnergySample]) -> CliResult<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(TRAJECTORY_HEADER)?;
        for s in samples {
            w.write_record([
                fmt(s.t),
                fmt(s.energy),
                fmt(s.dissipation),
                fmt(s.b_in),
                fmt(s.b_out),
                fmt(s.t_grad),
                fmt(s.t_press),
                fmt(s.t_rem),
                fmt(s.lhs_minus_rhs),
                (s.monotone_flag as u8).to_string(),
                fmt(s.w7_rel_pressure),
                fmt(s.w7_density_sq),
            ])?;
        }
        Ok(())
    })
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    t: f64,
    #[serde(rename = "E")]
    energy: f64,
    #[serde(rename = "D")]
    dissipation: f64,
    #[serde(rename = "B_in")]
    b_in: f64,
    #[serde(rename = "B_out")]
    b_out: f64,
    #[serde(rename = "T_grad")]
    t_grad: f64,
    #[serde(rename = "T_press")]
    t_press: f64,
    #[serde(rename = "T_rem")]
    t_rem: f64,
    lhs_minus_rhs: f64,
    monotone_flag: u8,
    #[serde(default)]
    w7_rel_pressure: f64,
    #[serde(default)]
    w7_density_sq: f64,
}

pub fn read_trajectory(path: &Path) -> CliResult<Vec<RelEnergySample>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: TrajectoryRow = row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        out.push(RelEnergySample {
            t: r.t,
            energy: r.energy,
            dissipation: r.dissipation,
            b_in: r.b_in,
            b_out: r.b_out,
            t_grad: r.t_grad,
            t_press: r.t_press,
            t_rem: r.t_rem,
            lhs_minus_rhs: r.lhs_minus_rhs,
            monotone_flag: r.monotone_flag != 0,
            w7_rel_pressure: r.w7_rel_pressure,
            w7_density_sq: r.w7_density_sq,
        });
    }
    Ok(out)
}

pub fn write_snapshot_csv(path: &Path, state: &FluidState) -> CliResult<()> {
    let bytes = csv_bytes(|w| {
        w.write_record(["r", "rho", "u"])?;
        for i in 0..state.grid.n {
            w.write_record([fmt(state.grid.centers[i]), fmt(state.rho[i]), fmt(state.m[i] / state.rho[i])])?;
        }
        Ok(())
    })?;
    write_atomic(path, &bytes)
}

pub fn snapshot_path(dir: &Path, t: f64) -> PathBuf {
    dir.join(format!("snapshot_t{t:.6}.csv"))
}

#[derive(Debug, Deserialize)]
struct StateRow {
    r: f64,
    rho: f64,
    u: f64,
}

/// Reads an `(r, rho, u)` CSV and interpolates it linearly to the cell
/// centres of `grid` (constant extrapolation beyond the data).
pub fn read_custom_state(path: &Path, grid: Arc<Grid>) -> CliResult<FluidState> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<StateRow> = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    if rows.len() < 2 || rows.windows(2).any(|w| w[1].r <= w[0].r) {
        return Err(CliError::Config(format!("{}: need at least two rows with increasing r", path.display())));
    }
    let interp = |x: f64, f: &dyn Fn(&StateRow) -> f64| {
        let k = rows.partition_point(|row| row.r <= x);
        if k == 0 {
            return f(&rows[0]);
        }
        if k == rows.len() {
            return f(&rows[k - 1]);
        }
        let (a, b) = (&rows[k - 1], &rows[k]);
        let t = (x - a.r) / (b.r - a.r);
        (1.0 - t) * f(a) + t * f(b)
    };
    let mut rho = Vec::with_capacity(grid.n);
    let mut m = Vec::with_capacity(grid.n);
    for &x in &grid.centers {
        let r = interp(x, &|row| row.rho);
        let u = interp(x, &|row| row.u);
        if !(r > 0.0 && r.is_finite() && u.is_finite()) {
            return Err(CliError::Config(format!("{}: invalid state at r = {x}", path.display())));
        }
        rho.push(r);
        m.push(r * u);
    }
    Ok(FluidState { grid, rho, m, t: 0.0, clamp_events: 0 })
}
