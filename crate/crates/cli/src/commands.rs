use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use barostab_core::evolve::{InitialCondition, RunSummary, Simulation};
use barostab_core::relenergy::{decay_report, monitor, DecayCriteria, DecayReport};
use barostab_core::steady::{
    exterior_decay_exponents, flat_curved_comparison, solve_steady, ComparisonRow, DecayExponents, PropertyReport,
    SteadyFlags,
};
use barostab_core::{Eos, Geometry};

use crate::config::{CompareConfig, EvolveConfig, SteadyConfig, SweepConfig, SweepParameter};
use crate::error::{CliError, CliResult};
use crate::io;

/// Largest admissible max-norm residual of a steady profile.
pub const RESIDUAL_CAP: f64 = 1e-6;
/// Admissible distance of a fitted far-field exponent from its nominal
/// value.
pub const EXPONENT_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
}

fn check(name: &str, pass: bool, value: f64) -> Check {
    Check { name: name.to_string(), pass, value }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    pub geometry: Geometry,
    pub n_cells: usize,
    pub parameter: f64,
    pub mass_flux: f64,
    pub residual_continuity: f64,
    pub residual_momentum: f64,
    pub properties: PropertyReport,
    pub decay_exponents: Option<DecayExponents>,
    pub flags: SteadyFlags,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_seconds: f64,
}

pub fn cmd_steady(cfg: &SteadyConfig, out: &Path) -> CliResult<SteadyReport> {
    let start = std::time::Instant::now();
    let eos = Eos::new(cfg.eos)?;
    let profile = solve_steady(&eos, &cfg.geometry, &cfg.boundary, &cfg.solver)?;
    let properties = profile.property_report(&cfg.boundary);
    let decay_exponents = exterior_decay_exponents(&profile);
    let residual = profile.residual_continuity.max(profile.residual_momentum);

    let mut checks = vec![
        check("residual_cap", residual <= RESIDUAL_CAP, residual),
        check("mass_flux_constant", properties.mass_flux_deviation <= 1e-8, properties.mass_flux_deviation),
        check("velocity_sign", properties.velocity_sign_ok, if properties.velocity_sign_ok { 1.0 } else { 0.0 }),
    ];
    match profile.geometry {
        Geometry::Strip => {
            let increasing = cfg.boundary.u_b_plus >= cfg.boundary.u_b_minus;
            let ok = if increasing { properties.min_du >= 0.0 } else { true };
            checks.push(check("velocity_monotone", ok, properties.min_du));
        }
        Geometry::Annulus { .. } => {}
        Geometry::Exterior { .. } => {
            let below = properties.below_far_field.unwrap_or(false);
            checks.push(check("density_below_far_field", below, properties.max_rho));
            checks.push(check("density_increasing", properties.min_drho > 0.0, properties.min_drho));
            checks.push(check("divergence_positive", properties.min_div_u > 0.0, properties.min_div_u));
            if let Some(e) = decay_exponents {
                checks.push(check("deficit_exponent", (e.density_deficit + 4.0).abs() <= EXPONENT_TOLERANCE, e.density_deficit));
                checks.push(check("velocity_exponent", (e.velocity + 2.0).abs() <= EXPONENT_TOLERANCE, e.velocity));
                checks.push(check("velocity_slope_exponent", (e.velocity_slope + 3.0).abs() <= EXPONENT_TOLERANCE, e.velocity_slope));
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    io::write_profile_csv(&out.join("profile.csv"), &profile, &eos)?;
    let report = SteadyReport {
        geometry: profile.geometry,
        n_cells: profile.n_cells(),
        parameter: profile.parameter,
        mass_flux: profile.mass_flux,
        residual_continuity: profile.residual_continuity,
        residual_momentum: profile.residual_momentum,
        properties,
        decay_exponents,
        flags: profile.flags,
        checks,
        pass,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    io::write_json(&out.join("steady_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub flow_through_time: f64,
    pub criteria: DecayCriteria,
    pub decay: DecayReport,
    pub run: RunSummary,
    pub pass: bool,
}

/// Applies `--seed` to the perturbation phase.
fn seeded(mut cfg: EvolveConfig, seed: Option<u64>) -> EvolveConfig {
    if let (Some(seed), InitialCondition::Perturbed { phase, .. }) = (seed, &mut cfg.run.initial) {
        *phase = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..2.0 * PI);
    }
    cfg
}

/// Runs an evolution, writing `trajectory.csv`, the snapshots and
/// `decay_report.json` into `out` (when given).
pub fn cmd_evolve(cfg: &EvolveConfig, out: Option<&Path>, seed: Option<u64>) -> CliResult<EvolveReport> {
    let cfg = seeded(cfg.clone(), seed);
    let sim = Simulation::new(&cfg.run)?;
    let state = match &cfg.run.initial {
        InitialCondition::Custom { path } => io::read_custom_state(Path::new(path), sim.grid.clone())?,
        _ => sim.initial_state()?,
    };
    let traj = monitor(&sim, state)?;
    let criteria = cfg.expectations.criteria(&cfg.run);
    let decay = decay_report(&traj.samples, &criteria)?;
    let report = EvolveReport {
        flow_through_time: cfg.run.flow_through_time(),
        criteria,
        pass: decay.pass && decay.ledger_nonnegative && traj.summary.clamp_events == 0,
        decay,
        run: traj.summary.clone(),
    };
    if let Some(out) = out {
        io::write_atomic(&out.join("trajectory.csv"), &io::trajectory_csv(&traj.samples)?)?;
        for s in &traj.snapshots {
            io::write_snapshot_csv(&io::snapshot_path(out, s.t), s)?;
        }
        io::write_json(&out.join("decay_report.json"), &report)?;
    }
    Ok(report)
}

pub fn cmd_verify(trajectory: &Path, criteria: &DecayCriteria, out: &Path) -> CliResult<DecayReport> {
    let samples = io::read_trajectory(trajectory)?;
    let report = decay_report(&samples, criteria)?;
    io::write_json(&out.join("decay_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// `pass`, `fail` or `error`.
    pub status: String,
    pub monotone: Option<bool>,
    pub decayed: Option<bool>,
    pub final_over_post_transient: Option<f64>,
    pub max_uptick: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    /// Largest value whose row passes.
    pub largest_pass: Option<f64>,
    /// Whether the passing rows form a prefix of the (sorted) values.
    pub prefix_property: bool,
}

fn sweep_row_config(base: &EvolveConfig, parameter: SweepParameter, value: f64) -> EvolveConfig {
    let mut cfg = base.clone();
    match parameter {
        SweepParameter::UBPlusMinusGap => cfg.run.boundary.u_b_plus = cfg.run.boundary.u_b_minus + value,
        SweepParameter::UB => cfg.run.boundary.u_b = value,
        SweepParameter::Amplitude => match &mut cfg.run.initial {
            InitialCondition::Perturbed { amplitude, .. } => *amplitude = value,
            other => *other = InitialCondition::Perturbed { amplitude: value, mode: 1, phase: 0.0, support: None },
        },
    }
    cfg
}

/// Runs every sweep value (concurrently) and tabulates the verdicts. A
/// failing row is recorded and never aborts the sweep.
pub fn cmd_sweep(cfg: &SweepConfig, out: &Path, seed: Option<u64>) -> CliResult<SweepReport> {
    if cfg.values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let mut values = cfg.values.clone();
    values.sort_by(f64::total_cmp);
    let row_dir = out.join("rows");
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let row_cfg = sweep_row_config(&cfg.base, cfg.parameter, value);
            let row = match cmd_evolve(&row_cfg, None, seed) {
                Ok(r) => SweepRow {
                    value,
                    status: if r.decay.pass { "pass" } else { "fail" }.to_string(),
                    monotone: Some(r.decay.monotone),
                    decayed: r.decay.decayed,
                    final_over_post_transient: r.decay.final_over_post_transient,
                    max_uptick: Some(r.decay.max_uptick),
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    status: "error".to_string(),
                    monotone: None,
                    decayed: None,
                    final_over_post_transient: None,
                    max_uptick: None,
                    error: Some(e.to_string()),
                },
            };
            io::write_json(&row_dir.join(format!("row_{i:03}.json")), &row)?;
            Ok(row)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let largest_pass = rows.iter().filter(|r| r.status == "pass").map(|r| r.value).fold(None, |a: Option<f64>, v| {
        Some(a.map_or(v, |a| a.max(v)))
    });
    let n_pass = rows.iter().take_while(|r| r.status == "pass").count();
    let prefix_property = rows[n_pass..].iter().all(|r| r.status != "pass");

    let table = csv_table(&rows)?;
    io::write_atomic(&out.join("sweep.csv"), &table)?;
    let report = SweepReport { parameter: cfg.parameter, rows, largest_pass, prefix_property };
    io::write_json(&out.join("sweep_report.json"), &report)?;
    Ok(report)
}

fn csv_table(rows: &[SweepRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "status", "monotone", "decayed", "final_over_post_transient", "max_uptick", "error"])?;
    let opt_f = |v: Option<f64>| v.map(io::fmt).unwrap_or_default();
    let opt_b = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            io::fmt(r.value),
            r.status.clone(),
            opt_b(r.monotone),
            opt_b(r.decayed),
            opt_f(r.final_over_post_transient),
            opt_f(r.max_uptick),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub c1_distances: Vec<f64>,
    pub decay_order: Option<f64>,
    pub strictly_decreasing: bool,
    /// Last distance over first distance.
    pub final_over_initial: f64,
    pub wall_seconds: f64,
}

pub fn cmd_compare(cfg: &CompareConfig, out: &Path) -> CliResult<ComparisonReport> {
    let start = std::time::Instant::now();
    let eos = Eos::new(cfg.eos)?;
    let table = flat_curved_comparison(&eos, &cfg.boundary, &cfg.r_list, &cfg.solver)?;
    let c1: Vec<f64> = table.rows.iter().map(|r| r.c1_distance()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r_minus", "velocity_c0", "velocity_slope_c0", "density_c0", "c1_distance"])?;
    for (row, d) in table.rows.iter().zip(&c1) {
        w.write_record([io::fmt(row.r), io::fmt(row.velocity_c0), io::fmt(row.velocity_slope_c0), io::fmt(row.density_c0), io::fmt(*d)])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io("<csv buffer>", e.into_error()))?;
    io::write_atomic(&out.join("comparison.csv"), &bytes)?;
    let report = ComparisonReport {
        strictly_decreasing: table.is_strictly_decreasing(),
        final_over_initial: c1.last().copied().unwrap_or(f64::NAN) / c1.first().copied().unwrap_or(f64::NAN),
        decay_order: table.decay_order,
        c1_distances: c1,
        rows: table.rows,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    io::write_json(&out.join("comparison.json"), &report)?;
    Ok(report)
}

/// `BAROSTAB_OUT` overrides `--out`; the default is `./out`.
pub fn resolve_out(flag: Option<PathBuf>) -> PathBuf {
    match std::env::var_os("BAROSTAB_OUT") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.unwrap_or_else(|| PathBuf::from("out")),
    }
}
