//! The coupled time loop: one fluid step driven by the current `n`, then one
//! KS step transported by the new velocity.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fields::{self, Grid2D, ScalarBc, ScalarField, VectorField};
use crate::ks_macro::{KsParams, KsSolver, KsState};
use crate::ns_fluid::{linear_potential, step_fluid, FluidParams, FluidState, StepReport};

use super::config::{InitSpec, Model, SimConfig};
use super::monitor::{Monitor, MonitorRecord};
use super::HarnessError;

/// Builds an initial field; bumps are normalised to the requested mass on
/// the grid.
pub fn initial_field(spec: &InitSpec, grid: Grid2D) -> Result<ScalarField, HarnessError> {
    let bc = ScalarBc::Neumann0;
    let pi = std::f64::consts::PI;
    Ok(match spec {
        InitSpec::GaussianBump { cx, cy, width, mass } => {
            let f = ScalarField::from_fn(grid, bc, |x, y| (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * width * width)).exp());
            let total = f.integral();
            let scale = if total > 0.0 { mass / total } else { 0.0 };
            f.with_values(f.values.iter().map(|v| v * scale).collect())
        }
        InitSpec::CosineMode { j, k, amp, offset } => ScalarField::from_fn(grid, bc, |x, y| {
            offset + amp * (*j as f64 * pi * x / grid.lx).cos() * (*k as f64 * pi * y / grid.ly).cos()
        }),
        InitSpec::Constant(v) => ScalarField::constant(grid, bc, *v),
        InitSpec::FromFile(path) => {
            let snap = fields::read_snapshot(path)?;
            if snap.field.grid != grid {
                return Err(fields::FieldError::GridMismatch.into());
            }
            snap.field
        }
    })
}

/// One splitting cycle. `fluid = None` freezes `u = 0`.
pub fn advance_coupled(
    solver: &KsSolver,
    ks: &mut KsState,
    fluid: Option<&mut FluidState>,
    fluid_params: &FluidParams,
    dt: f64,
) -> Result<Option<StepReport>, HarnessError> {
    match fluid {
        Some(fl) => {
            let report = step_fluid(fl, &ks.n, dt, fluid_params)?;
            solver.step(ks, &fl.u)?;
            Ok(Some(report))
        }
        None => {
            solver.step(ks, &VectorField::zeros(ks.grid()))?;
            Ok(None)
        }
    }
}

/// Full state of a run, enough to continue bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub ks: KsState,
    pub fluid: Option<FluidState>,
    pub monitor: Monitor,
    pub step: usize,
}

/// A `ks_only` or `tfksns` run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: SimConfig,
    pub solver: KsSolver,
    pub fluid_params: FluidParams,
    pub ks: KsState,
    pub fluid: Option<FluidState>,
    pub monitor: Monitor,
    pub step: usize,
    /// Largest post-projection `‖div u‖∞` seen so far.
    pub max_divergence: f64,
    pub initial_mass: f64,
}

impl Simulation {
    pub fn new(cfg: &SimConfig) -> Result<Self, HarnessError> {
        if !matches!(cfg.model, Model::KsOnly | Model::Tfksns) {
            return Err(HarnessError::Config(format!("model {} is not a field simulation", cfg.model.name())));
        }
        let g = cfg.grid;
        let n0 = initial_field(&cfg.n0, g)?;
        let c0 = initial_field(&cfg.c0, g)?;
        let params = KsParams::new(cfg.alpha, cfg.gamma, cfg.chi_model)?;
        let solver = KsSolver::new(params, g)?;
        let fluid = (cfg.model == Model::Tfksns).then(|| {
            let phi = if cfg.buoyancy {
                linear_potential(g)
            } else {
                ScalarField::zeros(g, ScalarBc::Neumann0)
            };
            FluidState::at_rest(phi)
        });
        let fluid_params = FluidParams {
            viscosity: cfg.viscosity,
            ..FluidParams::default()
        };
        let initial_mass = n0.integral();
        Ok(Self {
            cfg: cfg.clone(),
            solver,
            fluid_params,
            ks: KsState::new(n0, c0, cfg.dt)?,
            fluid,
            monitor: Monitor::new(&cfg.monitor),
            step: 0,
            max_divergence: 0.0,
            initial_mass,
        })
    }

    pub fn total_steps(&self) -> usize {
        (self.cfg.t_end / self.cfg.dt).round() as usize
    }

    pub fn done(&self) -> bool {
        self.step >= self.total_steps() || self.monitor.flagged()
    }

    /// Relative drift of `∫n` from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let m = self.ks.mass();
        (m - self.initial_mass).abs() / self.initial_mass.abs().max(f64::MIN_POSITIVE)
    }

    /// Advances one step and returns the monitor record for the new time.
    /// Non-finite values raise the flag instead of an error.
    pub fn step_once(&mut self) -> Result<MonitorRecord, HarnessError> {
        let dt = self.cfg.dt;
        let res = advance_coupled(&self.solver, &mut self.ks, self.fluid.as_mut(), &self.fluid_params, dt);
        let t = self.ks.t;
        match res {
            Ok(report) => {
                if let Some(r) = report {
                    self.max_divergence = self.max_divergence.max(r.divergence);
                }
                self.step += 1;
                let u = self.fluid.as_ref().map(|f| &f.u);
                Ok(self.monitor.observe(&self.ks.n, &self.ks.c, u, self.ks.t))
            }
            Err(e) if e.is_blowup() => {
                let nan = ScalarField::constant(self.ks.grid(), ScalarBc::Neumann0, f64::NAN);
                let record = self.monitor.observe(&nan, &self.ks.c, None, t + dt);
                self.step += 1;
                Ok(record)
            }
            Err(e) => Err(e),
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            ks: self.ks.clone(),
            fluid: self.fluid.clone(),
            monitor: self.monitor.clone(),
            step: self.step,
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), HarnessError> {
        let bytes = bincode::serialize(&self.checkpoint()).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        fs::write(path, bytes)?;
        Ok(())
    }

    /// Continues from `path` with the solver settings of `cfg`.
    pub fn restore(cfg: &SimConfig, path: &Path) -> Result<Self, HarnessError> {
        let bytes = fs::read(path)?;
        let ck: Checkpoint = bincode::deserialize(&bytes).map_err(|e| HarnessError::Checkpoint(e.to_string()))?;
        let mut sim = Self::new(cfg)?;
        if ck.ks.grid() != cfg.grid || ck.ks.dt() != cfg.dt {
            return Err(HarnessError::Checkpoint("checkpoint grid or dt differs from config".into()));
        }
        sim.initial_mass = ck.ks.n_hist.snapshot(0).iter().sum::<f64>() * cfg.grid.cell_area();
        sim.ks = ck.ks;
        sim.fluid = ck.fluid;
        sim.monitor = ck.monitor;
        sim.step = ck.step;
        Ok(sim)
    }
}
