use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eos::{Eos, EosSpec};
use crate::error::{Error, Result};
use crate::geometry::{flow_through_time, BoundaryData, Geometry};
use crate::steady::{solve_steady, SolverOptions, SteadyProfile};

use super::{density_window, BoundaryConditions, FluidState, Grid, Order, Scheme, ViscousTreatment};

/// Initial data of an evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Cell averages of the steady profile.
    #[default]
    Steady,
    /// Steady density times `1 + amplitude sin(2 pi mode x + phase)`, with
    /// `x` the position rescaled to `[0, 1]` over `support` (the whole domain
    /// by default); steady momentum is kept.
    Perturbed {
        amplitude: f64,
        #[serde(default = "default_mode")]
        mode: u32,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        support: Option<[f64; 2]>,
    },
    /// State read from a file by the caller; [`initial_state`] rejects it.
    Custom { path: String },
}

fn default_mode() -> u32 {
    1
}

fn default_cfl() -> f64 {
    0.45
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub eos: EosSpec,
    pub geometry: Geometry,
    pub boundary: BoundaryData,
    pub n_cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub order: Order,
    #[serde(default)]
    pub viscous: ViscousTreatment,
    /// Length of the initial transient excluded from the monotonicity
    /// verdict; two flow-through times when absent.
    #[serde(default)]
    pub transient: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Wall-clock budget in seconds.
    #[serde(default)]
    pub wall_clock_limit: Option<f64>,
    /// Options of the steady solve that provides the reference profile.
    #[serde(default)]
    pub steady: SolverOptions,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        self.eos.validate()?;
        let geometry = self.geometry.with_default_truncation();
        geometry.validate()?;
        self.boundary.validate(&geometry, self.eos.rho_bar())?;
        self.steady.validate()?;
        if self.n_cells < 4 {
            return bad("n_cells must be at least 4");
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return bad("cfl must lie in (0, 0.9]");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.sample_dt > 0.0 && self.sample_dt <= self.t_end) {
            return bad("sample_dt must lie in (0, t_end]");
        }
        if let Some(t) = self.transient {
            if !(t >= 0.0) {
                return bad("transient must be non-negative");
            }
        }
        if let Some(w) = self.wall_clock_limit {
            if !(w > 0.0) {
                return bad("wall_clock_limit must be positive");
            }
        }
        if let InitialCondition::Perturbed { amplitude, mode, support, .. } = &self.initial {
            let (amplitude, mode, support) = (*amplitude, *mode, *support);
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return bad("perturbation amplitude must be non-negative");
            }
            if mode == 0 {
                return bad("perturbation mode must be positive");
            }
            if let Some([a, b]) = support {
                if !(b > a) {
                    return bad("perturbation support must be an increasing pair");
                }
            }
        }
        Ok(())
    }

    pub fn flow_through_time(&self) -> f64 {
        flow_through_time(&self.geometry.with_default_truncation(), &self.boundary)
    }

    /// Transient window, defaulting to two flow-through times.
    pub fn transient_time(&self) -> f64 {
        self.transient.unwrap_or_else(|| 2.0 * self.flow_through_time())
    }
}

/// Progress information handed to the sampling callback.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunProgress {
    pub steps: usize,
    pub last_dt: f64,
    /// Cumulative mass that entered through the boundary.
    pub boundary_mass: f64,
    /// Largest per-step relative defect of the discrete mass balance.
    pub max_mass_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub boundary_mass: f64,
    pub max_mass_defect: f64,
    pub clamp_events: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: FluidState,
    pub snapshots: Vec<FluidState>,
    pub summary: RunSummary,
}

/// A configured run: the equation of state, the steady reference profile
/// and the evolution grid.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: RunConfig,
    pub eos: Eos,
    pub profile: SteadyProfile,
    pub grid: Arc<Grid>,
    pub boundary: BoundaryConditions,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mut config = config.clone();
        config.geometry = config.geometry.with_default_truncation();
        let eos = Eos::new(config.eos)?;
        let profile = solve_steady(&eos, &config.geometry, &config.boundary, &config.steady)?;
        let grid = Arc::new(Grid::new(config.geometry, config.n_cells)?);
        let boundary = BoundaryConditions::for_problem(&config.geometry, &config.boundary, Some(&profile));
        Ok(Self { config, eos, profile, grid, boundary })
    }

    pub fn scheme(&self) -> Scheme<'_> {
        Scheme::new(&self.eos, self.grid.clone(), self.config.boundary.nu(), self.boundary, self.config.order, self.config.viscous)
    }

    pub fn initial_state(&self) -> Result<FluidState> {
        initial_state(&self.config.initial, &self.eos, self.grid.clone(), &self.profile)
    }

    /// Advances `state` to `t_end`, calling `on_sample` at `t = 0` and every
    /// `sample_dt`. Time steps are shortened to land on sample and snapshot
    /// times exactly.
    pub fn run<F>(&self, mut state: FluidState, mut on_sample: F) -> Result<RunOutcome>
    where
        F: FnMut(&FluidState, &RunProgress) -> Result<()>,
    {
        let cfg = &self.config;
        let mut scheme = self.scheme();
        let start = Instant::now();
        let mut progress = RunProgress::default();
        let initial_mass = state.total_mass();
        let mut snapshot_times: Vec<f64> = cfg.snapshot_times.iter().copied().filter(|t| *t >= 0.0 && *t <= cfg.t_end).collect();
        snapshot_times.sort_by(f64::total_cmp);
        let mut snapshots = Vec::new();
        let mut next_snapshot = 0;
        while next_snapshot < snapshot_times.len() && snapshot_times[next_snapshot] <= 0.0 {
            snapshots.push(state.clone());
            next_snapshot += 1;
        }

        on_sample(&state, &progress)?;
        let mut sample_index = 1usize;
        let t0 = state.t;
        let mut mass = initial_mass;
        while state.t < cfg.t_end {
            let next_sample = (t0 + sample_index as f64 * cfg.sample_dt).min(cfg.t_end);
            let mut target = next_sample;
            if let Some(&ts) = snapshot_times.get(next_snapshot) {
                target = target.min(ts);
            }
            let mut dt = scheme.cfl_dt(&state, cfg.cfl);
            let remaining = target - state.t;
            // Land on the target, splitting the last stretch evenly instead
            // of leaving a sliver step.
            if dt >= remaining {
                dt = remaining;
            } else if 2.0 * dt > remaining {
                dt = 0.5 * remaining;
            }
            if !(dt > 0.0) {
                return Err(Error::NonFiniteState { t: state.t });
            }
            let landed = dt == remaining;
            let report = scheme.step(&mut state, dt)?;
            if landed {
                state.t = target;
            }
            let new_mass = state.total_mass();
            if report.clamp_events == 0 {
                let defect = (new_mass - mass - report.boundary_mass - report.source_mass).abs() / mass.abs().max(f64::MIN_POSITIVE);
                progress.max_mass_defect = progress.max_mass_defect.max(defect);
            }
            mass = new_mass;
            progress.steps += 1;
            progress.last_dt = dt;
            progress.boundary_mass += report.boundary_mass;

            if landed && next_snapshot < snapshot_times.len() && state.t >= snapshot_times[next_snapshot] {
                snapshots.push(state.clone());
                next_snapshot += 1;
            }
            if landed && state.t >= next_sample {
                on_sample(&state, &progress)?;
                sample_index += 1;
            }
            if progress.steps % 64 == 0 {
                if let Some(limit) = cfg.wall_clock_limit {
                    if start.elapsed().as_secs_f64() > limit {
                        return Err(Error::WallClockBudget { seconds: limit });
                    }
                }
            }
        }
        let summary = RunSummary {
            steps: progress.steps,
            t_final: state.t,
            initial_mass,
            final_mass: mass,
            boundary_mass: progress.boundary_mass,
            max_mass_defect: progress.max_mass_defect,
            clamp_events: state.clamp_events,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        Ok(RunOutcome { final_state: state, snapshots, summary })
    }
}

/// Initial state for `initial` on `grid`, built from the steady profile.
pub fn initial_state(initial: &InitialCondition, eos: &Eos, grid: Arc<Grid>, profile: &SteadyProfile) -> Result<FluidState> {
    let mut state = FluidState::from_profile(grid, profile);
    match *initial {
        InitialCondition::Steady => {}
        InitialCondition::Perturbed { amplitude, mode, phase, support } => {
            let (a, b) = match support {
                Some([a, b]) => (a, b),
                None => state.grid.geometry.bounds(),
            };
            let (lo, hi) = density_window(eos);
            let upper = if hi.is_finite() { hi } else { f64::INFINITY };
            for i in 0..state.grid.n {
                let r = state.grid.centers[i];
                if r < a || r > b {
                    continue;
                }
                let x = (r - a) / (b - a);
                let factor = 1.0 + amplitude * (2.0 * PI * mode as f64 * x + phase).sin();
                state.rho[i] = (state.rho[i] * factor).clamp(lo, upper);
            }
        }
        InitialCondition::Custom { .. } => {
            return Err(Error::InvalidParameter("custom initial data must be loaded by the caller".into()));
        }
    }
    Ok(state)
}

/// Builds the simulation, its initial state and runs it.
pub fn run<F>(config: &RunConfig, on_sample: F) -> Result<RunOutcome>
where
    F: FnMut(&FluidState, &RunProgress) -> Result<()>,
{
    let sim = Simulation::new(config)?;
    let state = sim.initial_state()?;
    sim.run(state, on_sample)
}
