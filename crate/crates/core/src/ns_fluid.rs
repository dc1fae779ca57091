//! Incompressible Navier–Stokes on the MAC grid with no-slip walls:
//! implicit viscous predictor, explicit convection and buoyancy `n∇Φ`,
//! then a Chorin pressure projection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{self, FieldError, Grid2D, ScalarBc, ScalarField, VectorField};
use crate::linalg::{pcg, CgFailure, CgSettings};

#[derive(Debug, Error)]
pub enum FluidError {
    #[error("pressure Poisson solve failed: {0}")]
    PoissonNonConvergence(CgFailure),
    #[error("viscous solve failed: {0}")]
    SolverFailure(CgFailure),
    #[error("divergence {value:e} exceeds tolerance {tol:e} after projection")]
    DivergenceTooLarge { value: f64, tol: f64 },
    #[error("non-finite velocity at t = {t}")]
    BlowupDetected { t: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    /// Coefficient of `Δu` (1 in the nondimensional model).
    pub viscosity: f64,
    pub div_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            viscosity: 1.0,
            div_tol: 1e-8,
            cg_tol: 1e-10,
            cg_max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub u: VectorField,
    /// Mean-zero pressure.
    pub p: ScalarField,
    /// Static potential.
    pub phi: ScalarField,
    pub t: f64,
}

impl FluidState {
    pub fn at_rest(phi: ScalarField) -> Self {
        let g = phi.grid;
        Self {
            u: VectorField::zeros(g),
            p: ScalarField::zeros(g, ScalarBc::Neumann0),
            phi,
            t: 0.0,
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.u.grid
    }
}

/// `Φ = y`.
pub fn linear_potential(grid: Grid2D) -> ScalarField {
    ScalarField::from_fn(grid, ScalarBc::Neumann0, |_, y| y)
}

/// `½ Σ |u|² dx dy` over the faces.
pub fn kinetic_energy(u: &VectorField) -> f64 {
    let a = u.grid.cell_area();
    0.5 * a * (u.ux.iter().map(|v| v * v).sum::<f64>() + u.uy.iter().map(|v| v * v).sum::<f64>())
}

/// Net horizontal momentum `Σ ux dx dy`.
pub fn horizontal_momentum(u: &VectorField) -> f64 {
    u.ux.iter().sum::<f64>() * u.grid.cell_area()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub viscous_iterations: usize,
    pub pressure_iterations: usize,
    pub divergence: f64,
}

// Vector Laplacian with no-slip ghosts. Wall-normal faces are pinned and
// map to themselves so the operator `I - s L` stays SPD on the full array.
fn viscous_ux(g: Grid2D, s: f64, x: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let w = nx + 1;
    for j in 0..ny {
        out[j * w] = x[j * w];
        out[j * w + nx] = x[j * w + nx];
        for i in 1..nx {
            let c = x[j * w + i];
            let s_ = if j > 0 { x[(j - 1) * w + i] } else { -c };
            let n_ = if j + 1 < ny { x[(j + 1) * w + i] } else { -c };
            let lap = (x[j * w + i + 1] - 2.0 * c + x[j * w + i - 1]) * ix2 + (n_ - 2.0 * c + s_) * iy2;
            out[j * w + i] = c - s * lap;
        }
    }
}

fn viscous_uy(g: Grid2D, s: f64, x: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    for i in 0..nx {
        out[i] = x[i];
        out[ny * nx + i] = x[ny * nx + i];
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = x[j * nx + i];
            let w_ = if i > 0 { x[j * nx + i - 1] } else { -c };
            let e_ = if i + 1 < nx { x[j * nx + i + 1] } else { -c };
            let lap = (x[(j + 1) * nx + i] - 2.0 * c + x[(j - 1) * nx + i]) * iy2 + (e_ - 2.0 * c + w_) * ix2;
            out[j * nx + i] = c - s * lap;
        }
    }
}

fn viscous_diag_ux(g: Grid2D, s: f64) -> Vec<f64> {
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let mut d = vec![1.0; g.ux_len()];
    for j in 0..g.ny {
        let wall = if j == 0 || j + 1 == g.ny { 1.0 } else { 0.0 };
        for i in 1..g.nx {
            d[j * (g.nx + 1) + i] = 1.0 + s * (2.0 * ix2 + (2.0 + wall) * iy2);
        }
    }
    d
}

fn viscous_diag_uy(g: Grid2D, s: f64) -> Vec<f64> {
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let mut d = vec![1.0; g.uy_len()];
    for j in 1..g.ny {
        for i in 0..g.nx {
            let wall = if i == 0 || i + 1 == g.nx { 1.0 } else { 0.0 };
            d[j * g.nx + i] = 1.0 + s * (2.0 * iy2 + (2.0 + wall) * ix2);
        }
    }
    d
}

/// Advective `(u·∇)u` with central differences at the faces.
fn convection(u: &VectorField) -> (Vec<f64>, Vec<f64>) {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (dx, dy) = (g.dx(), g.dy());
    let mut cx = vec![0.0; g.ux_len()];
    let mut cy = vec![0.0; g.uy_len()];
    for j in 0..ny {
        for i in 1..nx {
            let c = u.ux_at(i, j);
            let v = 0.25 * (u.uy_at(i - 1, j) + u.uy_at(i, j) + u.uy_at(i - 1, j + 1) + u.uy_at(i, j + 1));
            let n_ = if j + 1 < ny { u.ux_at(i, j + 1) } else { -c };
            let s_ = if j > 0 { u.ux_at(i, j - 1) } else { -c };
            cx[j * (nx + 1) + i] = c * (u.ux_at(i + 1, j) - u.ux_at(i - 1, j)) / (2.0 * dx) + v * (n_ - s_) / (2.0 * dy);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = u.uy_at(i, j);
            let w = 0.25 * (u.ux_at(i, j - 1) + u.ux_at(i + 1, j - 1) + u.ux_at(i, j) + u.ux_at(i + 1, j));
            let e_ = if i + 1 < nx { u.uy_at(i + 1, j) } else { -c };
            let w_ = if i > 0 { u.uy_at(i - 1, j) } else { -c };
            cy[j * nx + i] = w * (e_ - w_) / (2.0 * dx) + c * (u.uy_at(i, j + 1) - u.uy_at(i, j - 1)) / (2.0 * dy);
        }
    }
    (cx, cy)
}

/// Buoyancy `n ∇Φ` at interior faces.
fn buoyancy(n: &ScalarField, phi: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = n.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut fx = vec![0.0; g.ux_len()];
    let mut fy = vec![0.0; g.uy_len()];
    for j in 0..ny {
        for i in 1..nx {
            let nf = 0.5 * (n.at(i - 1, j) + n.at(i, j));
            fx[j * (nx + 1) + i] = nf * (phi.at(i, j) - phi.at(i - 1, j)) / g.dx();
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let nf = 0.5 * (n.at(i, j - 1) + n.at(i, j));
            fy[j * nx + i] = nf * (phi.at(i, j) - phi.at(i, j - 1)) / g.dy();
        }
    }
    (fx, fy)
}

/// `u* = u + dt(νΔu* - (u·∇)u + n∇Φ)`, diffusion implicit.
pub fn predict(state: &FluidState, n: &ScalarField, dt: f64, params: &FluidParams) -> Result<(VectorField, usize), FluidError> {
    let g = state.grid();
    if n.grid != g || state.phi.grid != g {
        return Err(FieldError::GridMismatch.into());
    }
    let (cx, cy) = convection(&state.u);
    let (fx, fy) = buoyancy(n, &state.phi);
    let mut bx: Vec<f64> = (0..g.ux_len()).map(|k| state.u.ux[k] + dt * (fx[k] - cx[k])).collect();
    let mut by: Vec<f64> = (0..g.uy_len()).map(|k| state.u.uy[k] + dt * (fy[k] - cy[k])).collect();
    let mut tmp = VectorField {
        grid: g,
        ux: std::mem::take(&mut bx),
        uy: std::mem::take(&mut by),
    };
    fields::enforce_no_slip(&mut tmp);
    let s = dt * params.viscosity;
    let settings = CgSettings {
        rel_tol: params.cg_tol,
        abs_tol_inf: f64::INFINITY,
        max_iter: params.cg_max_iter,
        mean_free: false,
    };
    let ox = pcg(
        |x, out| viscous_ux(g, s, x, out),
        &viscous_diag_ux(g, s),
        &tmp.ux,
        Some(&state.u.ux),
        settings,
    )
    .map_err(FluidError::SolverFailure)?;
    let oy = pcg(
        |x, out| viscous_uy(g, s, x, out),
        &viscous_diag_uy(g, s),
        &tmp.uy,
        Some(&state.u.uy),
        settings,
    )
    .map_err(FluidError::SolverFailure)?;
    let mut u = VectorField {
        grid: g,
        ux: ox.x,
        uy: oy.x,
    };
    fields::enforce_no_slip(&mut u);
    Ok((u, ox.iterations + oy.iterations))
}

/// `-Δ` with Neumann ghosts on cell values.
fn neg_laplacian(g: Grid2D, x: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    for j in 0..ny {
        for i in 0..nx {
            let c = x[j * nx + i];
            let mut acc = 0.0;
            if i > 0 {
                acc += (c - x[j * nx + i - 1]) * ix2;
            }
            if i + 1 < nx {
                acc += (c - x[j * nx + i + 1]) * ix2;
            }
            if j > 0 {
                acc += (c - x[(j - 1) * nx + i]) * iy2;
            }
            if j + 1 < ny {
                acc += (c - x[(j + 1) * nx + i]) * iy2;
            }
            out[j * nx + i] = acc;
        }
    }
}

fn neg_laplacian_diag(g: Grid2D) -> Vec<f64> {
    let (ix2, iy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let mut d = Vec::with_capacity(g.cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let kx = (i > 0) as u8 + (i + 1 < g.nx) as u8;
            let ky = (j > 0) as u8 + (j + 1 < g.ny) as u8;
            d.push(kx as f64 * ix2 + ky as f64 * iy2);
        }
    }
    d
}

/// Solves `Δp = ∇·u*/dt` (Neumann, mean-zero) and returns `u* - dt∇p`.
/// `p_guess` warm-starts the iteration.
pub fn project(
    u_star: &VectorField,
    dt: f64,
    params: &FluidParams,
    p_guess: Option<&ScalarField>,
) -> Result<(VectorField, ScalarField, usize, f64), FluidError> {
    let g = u_star.grid;
    let div = fields::divergence(u_star);
    let b: Vec<f64> = div.values.iter().map(|v| -v / dt).collect();
    let settings = CgSettings {
        rel_tol: params.cg_tol,
        abs_tol_inf: 0.1 * params.div_tol / dt,
        max_iter: params.cg_max_iter,
        mean_free: true,
    };
    let out = pcg(
        |x, o| neg_laplacian(g, x, o),
        &neg_laplacian_diag(g),
        &b,
        p_guess.map(|p| p.values.as_slice()),
        settings,
    )
    .map_err(FluidError::PoissonNonConvergence)?;
    let p = ScalarField::from_values(g, ScalarBc::Neumann0, out.x)?;
    let gp = fields::gradient(&p);
    let mut u = u_star.clone();
    for (a, b) in u.ux.iter_mut().zip(&gp.ux) {
        *a -= dt * b;
    }
    for (a, b) in u.uy.iter_mut().zip(&gp.uy) {
        *a -= dt * b;
    }
    fields::enforce_no_slip(&mut u);
    let d = fields::divergence(&u).max_abs();
    if d > params.div_tol {
        return Err(FluidError::DivergenceTooLarge {
            value: d,
            tol: params.div_tol,
        });
    }
    Ok((u, p, out.iterations, d))
}

/// Predict then project; advances `state` in place.
pub fn step_fluid(state: &mut FluidState, n: &ScalarField, dt: f64, params: &FluidParams) -> Result<StepReport, FluidError> {
    let (u_star, vi) = predict(state, n, dt, params)?;
    let (u, p, pi, d) = project(&u_star, dt, params, Some(&state.p))?;
    let t = state.t + dt;
    if !u.all_finite() {
        return Err(FluidError::BlowupDetected { t });
    }
    state.u = u;
    state.p = p;
    state.t = t;
    Ok(StepReport {
        viscous_iterations: vi,
        pressure_iterations: pi,
        divergence: d,
    })
}
