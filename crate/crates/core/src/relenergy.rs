//! Relative energy with respect to a steady state and the terms of its
//! dissipation inequality, evaluated on finite-volume states.
//!
//! With `v = u - u_s` vanishing on the boundary, a solution satisfies
//!
//! ```text
//! dE/dt + D + B_out - B_in <= T_grad + T_press + T_rem
//! ```
//!
//! where `E = int [rho v^2 / 2 + P(rho | rho_s)] w dr`. The ledger reports
//! the slack `D + B_out - B_in - T_grad - T_press - T_rem`, an upper bound
//! for `-dE/dt`.

use serde::{Deserialize, Serialize};

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::evolve::{BoundaryConditions, FluidState, ReferenceState, RunConfig, RunSummary, Simulation};
use crate::geometry::Geometry;

/// One row of the diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelEnergySample {
    pub t: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "D")]
    pub dissipation: f64,
    #[serde(rename = "B_in")]
    pub b_in: f64,
    #[serde(rename = "B_out")]
    pub b_out: f64,
    #[serde(rename = "T_grad")]
    pub t_grad: f64,
    #[serde(rename = "T_press")]
    pub t_press: f64,
    #[serde(rename = "T_rem")]
    pub t_rem: f64,
    pub lhs_minus_rhs: f64,
    /// `E` did not increase since the previous sample.
    pub monotone_flag: bool,
    /// `int p(rho | rho_s) r^-7 w dr` (exterior only, zero otherwise).
    pub w7_rel_pressure: f64,
    /// `int |rho - rho_s|^2 r^-7 w dr` (exterior only, zero otherwise).
    pub w7_density_sq: f64,
}

impl RelEnergySample {
    /// Sum of the magnitudes of all ledger terms; the scale against which the
    /// slack is judged.
    pub fn scale(&self) -> f64 {
        self.dissipation + self.b_in + self.b_out + self.t_grad.abs() + self.t_press.abs() + self.t_rem.abs()
    }
}

/// `int [rho |u - u_s|^2 / 2 + P(rho | rho_s)] w dr` by the cell midpoint
/// rule.
pub fn relative_energy(state: &FluidState, reference: &ReferenceState, eos: &Eos) -> Result<f64> {
    check_grids(state, reference)?;
    let g = &*state.grid;
    let mut sum = 0.0;
    for i in 0..g.n {
        let rho = state.rho[i];
        let v = state.m[i] / rho - reference.u[i];
        sum += (0.5 * rho * v * v + eos.relative_potential(rho, reference.rho[i])?) * g.cell_w[i];
    }
    Ok(sum * g.h)
}

/// Viscous dissipation of `v = u - u_s`, with `v = 0` on the boundary faces,
/// by the trapezoidal rule on the faces.
///
/// Flat: `nu int (v')^2`; radial:
/// `int [2 mu (v'^2 + 2 (v/r)^2) + (lambda - 2 mu / 3)(v' + 2 v / r)^2] r^2 dr`.
pub fn dissipation(state: &FluidState, reference: &ReferenceState, mu: f64, lambda: f64) -> Result<f64> {
    check_grids(state, reference)?;
    let g = &*state.grid;
    let n = g.n;
    let h = g.h;
    let v: Vec<f64> = (0..n).map(|i| state.m[i] / state.rho[i] - reference.u[i]).collect();
    let radial = g.geometry.alpha() == 2;
    let density = |r: f64, vf: f64, dv: f64| {
        if radial {
            let q = vf / r;
            (2.0 * mu * (dv * dv + 2.0 * q * q) + (lambda - 2.0 * mu / 3.0) * (dv + 2.0 * q).powi(2)) * r * r
        } else {
            (4.0 / 3.0 * mu + lambda) * dv * dv
        }
    };
    let mut sum = 0.0;
    for k in 0..=n {
        let (vf, dv, weight) = if k == 0 {
            (0.0, (9.0 * v[0] - v[1]) / (3.0 * h), 0.5)
        } else if k == n {
            (0.0, (-9.0 * v[n - 1] + v[n - 2]) / (3.0 * h), 0.5)
        } else {
            (0.5 * (v[k - 1] + v[k]), (v[k] - v[k - 1]) / h, 1.0)
        };
        sum += weight * density(g.faces[k], vf, dv);
    }
    Ok(sum * h)
}

/// Evaluates every term of the inequality. `previous` sets the monotone
/// flag.
pub fn inequality_ledger(
    state: &FluidState,
    reference: &ReferenceState,
    eos: &Eos,
    boundary: &BoundaryConditions,
    mu: f64,
    lambda: f64,
    previous: Option<&RelEnergySample>,
) -> Result<RelEnergySample> {
    let energy = relative_energy(state, reference, eos)?;
    let dissipation = dissipation(state, reference, mu, lambda)?;
    let g = &*state.grid;
    let n = g.n;
    let div_s = reference.div_u();
    let exterior = matches!(g.geometry, Geometry::Exterior { .. });

    let (mut t_grad, mut t_press, mut t_rem, mut w7p, mut w7d) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let rho = state.rho[i];
        let (rs, us) = (reference.rho[i], reference.u[i]);
        let u = state.m[i] / rho;
        let v = u - us;
        let wh = g.cell_w[i];
        let p_rel = eos.relative_pressure(rho, rs)?;
        t_grad -= rho * v * v * reference.du[i] * wh;
        t_press -= p_rel * div_s[i] * wh;
        let steady_force = rs * us * reference.du[i] + eos.dp(rs) * reference.drho[i];
        t_rem += (rho / rs - 1.0) * (us - u) * steady_force * wh;
        if exterior {
            let r7 = g.centers[i].powi(-7);
            w7p += p_rel * r7 * wh;
            w7d += (rho - rs).powi(2) * r7 * wh;
        }
    }
    let h = g.h;
    let (t_grad, t_press, t_rem, w7p, w7d) = (t_grad * h, t_press * h, t_rem * h, w7p * h, w7d * h);

    // Boundary Bregman terms: the face density is the imposed one where
    // given, the adjacent cell value otherwise; the outward normal velocity
    // is the imposed face velocity (with sign flipped on the left face).
    let mut b_in = 0.0;
    let mut b_out = 0.0;
    for (side, face, cell) in [(0usize, &boundary.left, 0usize), (1, &boundary.right, n - 1)] {
        let (rho_f, rs_f) = match face.rho {
            Some(r) => (r, reference.face_rho[side]),
            None => (state.rho[cell], reference.rho[cell]),
        };
        let outward = if side == 0 { -face.u } else { face.u };
        let k = if side == 0 { 0 } else { n };
        let term = eos.relative_potential(rho_f, rs_f)? * outward.abs() * g.face_w[k];
        if outward > 0.0 {
            b_out += term;
        } else {
            b_in += term;
        }
    }

    let lhs_minus_rhs = dissipation + b_out - b_in - t_grad - t_press - t_rem;
    Ok(RelEnergySample {
        t: state.t,
        energy,
        dissipation,
        b_in,
        b_out,
        t_grad,
        t_press,
        t_rem,
        lhs_minus_rhs,
        monotone_flag: previous.is_none_or(|p| energy <= p.energy),
        w7_rel_pressure: w7p,
        w7_density_sq: w7d,
    })
}

fn check_grids(state: &FluidState, reference: &ReferenceState) -> Result<()> {
    if state.grid.n != reference.grid.n || state.grid.geometry != reference.grid.geometry {
        return Err(Error::InvalidParameter("state and reference live on different grids".into()));
    }
    Ok(())
}

/// Thresholds of the decay verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayCriteria {
    /// Samples before this time are excluded from the monotonicity check.
    pub transient: f64,
    /// Largest admissible increase of `E` between consecutive samples,
    /// relative to `E` at the end of the transient.
    pub uptick_tolerance: f64,
    /// Required `E_final / E_post_transient`, when set.
    pub decay_factor: Option<f64>,
    /// Largest admissible negative slack relative to the ledger scale.
    pub slack_tolerance: f64,
}

impl Default for DecayCriteria {
    fn default() -> Self {
        Self { transient: 0.0, uptick_tolerance: 1e-6, decay_factor: None, slack_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub samples: usize,
    pub initial_energy: f64,
    pub post_transient_energy: f64,
    pub final_energy: f64,
    /// `None` when the initial energy vanishes.
    pub final_over_initial: Option<f64>,
    pub final_over_post_transient: Option<f64>,
    /// Largest increase of `E` between consecutive samples after the
    /// transient, relative to the post-transient energy.
    pub max_uptick: f64,
    /// `-d ln E / dt` fitted over the final half of the run.
    pub decay_rate: Option<f64>,
    /// `int D dt` (trapezoidal).
    pub integrated_dissipation: f64,
    /// Share of the integrated dissipation accumulated in the final half.
    pub dissipation_final_half_share: f64,
    /// Smallest `lhs_minus_rhs / scale` after the transient.
    pub min_relative_slack: f64,
    /// Largest `(dE/dt + slack) / scale` after the transient, with `dE/dt`
    /// from centred differences of the samples.
    pub max_gradient_excess: f64,
    /// `int w7_density_sq dt`.
    pub w7_density_integral: f64,
    /// Share of that integral accumulated in the final half.
    pub w7_final_half_share: f64,
    pub monotone: bool,
    pub decayed: Option<bool>,
    pub ledger_nonnegative: bool,
    pub pass: bool,
}

/// Summarizes a sampled trajectory.
pub fn decay_report(samples: &[RelEnergySample], criteria: &DecayCriteria) -> Result<DecayReport> {
    if samples.len() < 10 {
        return Err(Error::InsufficientSamples { needed: 10, got: samples.len() });
    }
    let first = samples[0];
    let last = samples[samples.len() - 1];
    let post_idx = samples.iter().position(|s| s.t >= criteria.transient).unwrap_or(samples.len() - 1);
    let post = &samples[post_idx..];
    let e_post = post[0].energy;
    let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };

    let max_uptick = post
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(0.0f64, f64::max)
        / if e_post > 0.0 { e_post } else { 1.0 };

    let half_t = 0.5 * (first.t + last.t);
    let final_half: Vec<(f64, f64)> =
        samples.iter().filter(|s| s.t >= half_t && s.energy > 0.0).map(|s| (s.t, s.energy.ln())).collect();
    let decay_rate = crate::steady::linear_fit_slope(&final_half).map(|s| -s);

    let trapezoid = |f: &dyn Fn(&RelEnergySample) -> f64, from: f64| {
        samples
            .windows(2)
            .filter(|w| w[0].t >= from)
            .map(|w| 0.5 * (f(&w[0]) + f(&w[1])) * (w[1].t - w[0].t))
            .sum::<f64>()
    };
    let integrated_dissipation = trapezoid(&|s| s.dissipation, f64::NEG_INFINITY);
    let diss_late = trapezoid(&|s| s.dissipation, half_t);
    let w7_density_integral = trapezoid(&|s| s.w7_density_sq, f64::NEG_INFINITY);
    let w7_late = trapezoid(&|s| s.w7_density_sq, half_t);

    let rel_slack = |s: &RelEnergySample| if s.scale() > 0.0 { s.lhs_minus_rhs / s.scale() } else { 0.0 };
    let min_relative_slack = post.iter().map(rel_slack).fold(f64::INFINITY, f64::min);

    let mut max_gradient_excess = f64::NEG_INFINITY;
    for w in samples.windows(3).filter(|w| w[1].t >= criteria.transient) {
        let de = (w[2].energy - w[0].energy) / (w[2].t - w[0].t);
        let s = &w[1];
        let scale = s.scale().max(de.abs());
        if scale > 0.0 {
            max_gradient_excess = max_gradient_excess.max((de + s.lhs_minus_rhs) / scale);
        }
    }
    if !max_gradient_excess.is_finite() {
        max_gradient_excess = 0.0;
    }

    let trivial = first.energy == 0.0;
    let monotone = trivial || max_uptick <= criteria.uptick_tolerance;
    let decayed = criteria.decay_factor.map(|f| trivial || last.energy <= f * e_post);
    let ledger_nonnegative = trivial || min_relative_slack >= -criteria.slack_tolerance;
    let pass = monotone && decayed.unwrap_or(true);

    Ok(DecayReport {
        samples: samples.len(),
        initial_energy: first.energy,
        post_transient_energy: e_post,
        final_energy: last.energy,
        final_over_initial: ratio(last.energy, first.energy),
        final_over_post_transient: ratio(last.energy, e_post),
        max_uptick,
        decay_rate,
        integrated_dissipation,
        dissipation_final_half_share: ratio(diss_late, integrated_dissipation).unwrap_or(0.0),
        min_relative_slack: if min_relative_slack.is_finite() { min_relative_slack } else { 0.0 },
        max_gradient_excess,
        w7_density_integral,
        w7_final_half_share: ratio(w7_late, w7_density_integral).unwrap_or(0.0),
        monotone,
        decayed,
        ledger_nonnegative,
        pass,
    })
}

/// A monitored run: the sampled ledger and the run summary.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<RelEnergySample>,
    pub final_state: FluidState,
    pub snapshots: Vec<FluidState>,
    pub summary: RunSummary,
}

/// Runs `sim` from `state`, evaluating the ledger against the cell-averaged
/// steady profile at every sample.
pub fn monitor(sim: &Simulation, state: FluidState) -> Result<Trajectory> {
    let reference = ReferenceState::from_profile(sim.grid.clone(), &sim.profile);
    let (mu, lambda) = (sim.config.boundary.mu, sim.config.boundary.lambda);
    let mut samples: Vec<RelEnergySample> = Vec::new();
    let outcome = sim.run(state, |s, _| {
        let sample = inequality_ledger(s, &reference, &sim.eos, &sim.boundary, mu, lambda, samples.last())?;
        samples.push(sample);
        Ok(())
    })?;
    Ok(Trajectory { samples, final_state: outcome.final_state, snapshots: outcome.snapshots, summary: outcome.summary })
}

/// Builds the simulation for `config`, runs it from the configured initial
/// state and returns the trajectory together with its decay report.
pub fn monitored_run(config: &RunConfig, criteria: Option<DecayCriteria>) -> Result<(Trajectory, DecayReport)> {
    let sim = Simulation::new(config)?;
    let state = sim.initial_state()?;
    let traj = monitor(&sim, state)?;
    let criteria = criteria.unwrap_or(DecayCriteria { transient: config.transient_time(), ..Default::default() });
    let report = decay_report(&traj.samples, &criteria)?;
    Ok((traj, report))
}
