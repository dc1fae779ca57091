//! Time-fractional Keller–Segel pair on the grid: L1 memory in time,
//! implicit Neumann diffusion solved exactly in the cosine basis, explicit
//! chemotaxis, transport and reaction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{self, AdvectionScheme, CosineTransform, FieldError, Grid2D, ScalarBc, ScalarField, VectorField};
use crate::fracops::{self, FracError, FracHistory};

#[derive(Debug, Error)]
pub enum KsError {
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("reciprocal sensitivity met c = {c:e} <= c_floor at cell ({i}, {j})")]
    DegenerateChi { i: usize, j: usize, c: f64 },
    #[error("non-finite {field} at t = {t}")]
    BlowupDetected { t: f64, field: &'static str },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChiModel {
    Unit,
    ConstBeta(f64),
    Reciprocal,
}

impl ChiModel {
    pub fn chi(self, c: f64) -> f64 {
        match self {
            ChiModel::Unit => 1.0,
            ChiModel::ConstBeta(b) => b,
            ChiModel::Reciprocal => 1.0 / c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsParams {
    pub alpha: f64,
    /// Slime consumption rate.
    pub gamma: f64,
    pub chi_model: ChiModel,
    /// Coefficient of `Δn` (1 in the nondimensional model).
    pub diffusion_n: f64,
    /// Coefficient of `Δc`.
    pub diffusion_c: f64,
    /// Coefficient of the chemotactic term.
    pub chemotaxis: f64,
    /// Freeze `c` at its initial value (CTRW comparison runs).
    pub static_c: bool,
    pub advection: AdvectionScheme,
    pub c_floor: f64,
    pub cfl_safety: f64,
}

impl KsParams {
    pub fn new(alpha: f64, gamma: f64, chi_model: ChiModel) -> Result<Self, KsError> {
        let p = Self {
            alpha,
            gamma,
            chi_model,
            diffusion_n: 1.0,
            diffusion_c: 1.0,
            chemotaxis: 1.0,
            static_c: false,
            advection: AdvectionScheme::Upwind,
            c_floor: 1e-8,
            cfl_safety: 0.25,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), KsError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(KsError::InvalidParameter(format!("alpha = {} not in (0,1)", self.alpha)));
        }
        if !(self.gamma >= 0.0) {
            return Err(KsError::InvalidParameter(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !(self.diffusion_n >= 0.0 && self.diffusion_c >= 0.0) {
            return Err(KsError::InvalidParameter("diffusion coefficients must be >= 0".into()));
        }
        if let ChiModel::ConstBeta(b) = self.chi_model {
            if !b.is_finite() {
                return Err(KsError::InvalidParameter("beta must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsState {
    pub n: ScalarField,
    pub c: ScalarField,
    pub n_hist: FracHistory,
    pub c_hist: FracHistory,
    pub t: f64,
}

impl KsState {
    pub fn new(n: ScalarField, c: ScalarField, dt: f64) -> Result<Self, KsError> {
        if n.grid != c.grid {
            return Err(FieldError::GridMismatch.into());
        }
        Ok(Self {
            n_hist: FracHistory::new(n.values.clone(), 0.0, dt)?,
            c_hist: FracHistory::new(c.values.clone(), 0.0, dt)?,
            n,
            c,
            t: 0.0,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.n.grid
    }

    pub fn dt(&self) -> f64 {
        self.n_hist.dt()
    }

    pub fn steps(&self) -> usize {
        self.n_hist.steps()
    }

    pub fn mass(&self) -> f64 {
        self.n.integral()
    }
}

/// Face flux `n χ(c) ∇c`, with `n` taken from the upwind side of
/// `χ(c_face)(∇c)_face`. Wall faces carry no flux.
pub fn chemotaxis_flux(n: &ScalarField, c: &ScalarField, chi_model: ChiModel, c_floor: f64) -> Result<VectorField, KsError> {
    let g = n.grid;
    if c.grid != g {
        return Err(FieldError::GridMismatch.into());
    }
    if chi_model == ChiModel::Reciprocal {
        if let Some(k) = c.values.iter().position(|&v| !(v > c_floor)) {
            return Err(KsError::DegenerateChi {
                i: k % g.nx,
                j: k / g.nx,
                c: c.values[k],
            });
        }
    }
    let (dx, dy) = (g.dx(), g.dy());
    let face = |nl: f64, nr: f64, cl: f64, cr: f64, h: f64| -> f64 {
        let a = chi_model.chi(0.5 * (cl + cr)) * (cr - cl) / h;
        if a >= 0.0 {
            a * nl
        } else {
            a * nr
        }
    };
    let mut f = VectorField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            f.ux[j * (g.nx + 1) + i] = face(n.at(i - 1, j), n.at(i, j), c.at(i - 1, j), c.at(i, j), dx);
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            f.uy[j * g.nx + i] = face(n.at(i, j - 1), n.at(i, j), c.at(i, j - 1), c.at(i, j), dy);
        }
    }
    Ok(f)
}

/// Exact solver for `(I - s Δ) y = rhs` with the Neumann five-point `Δ`.
#[derive(Debug, Clone)]
pub struct SpectralDiffusion {
    transform: CosineTransform,
    eigenvalues: Vec<f64>,
}

impl SpectralDiffusion {
    pub fn new(grid: Grid2D) -> Self {
        let transform = CosineTransform::new(grid);
        let eigenvalues = transform.eigenvalues();
        Self { transform, eigenvalues }
    }

    pub fn grid(&self) -> Grid2D {
        self.transform.grid
    }

    pub fn solve(&self, rhs: &[f64], s: f64) -> Vec<f64> {
        if s == 0.0 {
            return rhs.to_vec();
        }
        let mut coeffs = self.transform.forward(rhs);
        for (a, &l) in coeffs.iter_mut().zip(&self.eigenvalues) {
            *a /= 1.0 - s * l;
        }
        // The constant mode is untouched; copy it back exactly.
        let mut y = self.transform.inverse(&coeffs);
        let drift = (rhs.iter().sum::<f64>() - y.iter().sum::<f64>()) / y.len() as f64;
        y.iter_mut().for_each(|v| *v += drift);
        y
    }
}

/// Cached spectral solver plus parameters; steps a [`KsState`] in place.
#[derive(Debug, Clone)]
pub struct KsSolver {
    pub params: KsParams,
    diffusion: SpectralDiffusion,
}

/// Stability indicators of one explicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    /// `Γ(2-α) dt^α · Σ_d max|drift_d| / h_d`; the explicit transport is
    /// expected to be stable below `cfl_safety`.
    pub number: f64,
    pub limit: f64,
}

impl CflReport {
    pub fn ok(&self) -> bool {
        self.number <= self.limit
    }
}

impl KsSolver {
    pub fn new(params: KsParams, grid: Grid2D) -> Result<Self, KsError> {
        params.validate()?;
        Ok(Self {
            params,
            diffusion: SpectralDiffusion::new(grid),
        })
    }

    fn n_rhs(&self, n: &ScalarField, c: &ScalarField, u: &VectorField) -> Result<Vec<f64>, KsError> {
        let p = &self.params;
        let flux = chemotaxis_flux(n, c, p.chi_model, p.c_floor)?;
        let div = fields::divergence(&flux);
        let adv = fields::advect(n, u, p.advection);
        Ok(div
            .values
            .iter()
            .zip(&adv.values)
            .map(|(d, a)| -p.chemotaxis * d - a)
            .collect())
    }

    fn c_rhs(&self, n: &ScalarField, c: &ScalarField, u: &VectorField) -> Vec<f64> {
        let p = &self.params;
        let adv = fields::advect(c, u, p.advection);
        adv.values
            .iter()
            .zip(&c.values)
            .zip(&n.values)
            .map(|((a, cv), nv)| -a - p.gamma * cv + nv)
            .collect()
    }

    fn check_shapes(&self, state: &KsState, u: &VectorField) -> Result<(), KsError> {
        let g = self.diffusion.grid();
        if state.n.grid != g || state.c.grid != g || u.grid != g {
            return Err(FieldError::GridMismatch.into());
        }
        Ok(())
    }

    /// One L1 step of both equations; appends the new levels to the histories.
    pub fn step(&self, state: &mut KsState, u: &VectorField) -> Result<(), KsError> {
        self.check_shapes(state, u)?;
        let p = &self.params;
        let fn_ = self.n_rhs(&state.n, &state.c, u)?;
        let fc = if p.static_c { None } else { Some(self.c_rhs(&state.n, &state.c, u)) };

        let dn = p.diffusion_n;
        let mut solve_n = |rhs: &[f64], mu: f64| -> Result<Vec<f64>, FracError> { Ok(self.diffusion.solve(rhs, mu * dn)) };
        let n_new = fracops::implicit_l1_step(&state.n_hist, p.alpha, &fn_, &mut solve_n)?;
        let c_new = match fc {
            Some(fc) => {
                let dc = p.diffusion_c;
                let mut solve_c =
                    |rhs: &[f64], mu: f64| -> Result<Vec<f64>, FracError> { Ok(self.diffusion.solve(rhs, mu * dc)) };
                fracops::implicit_l1_step(&state.c_hist, p.alpha, &fc, &mut solve_c)?
            }
            None => state.c.values.clone(),
        };
        let t = state.n_hist.time_of(state.steps() + 1);
        if n_new.iter().any(|v| !v.is_finite()) {
            return Err(KsError::BlowupDetected { t, field: "n" });
        }
        if c_new.iter().any(|v| !v.is_finite()) {
            return Err(KsError::BlowupDetected { t, field: "c" });
        }
        state.n_hist.push(n_new.clone())?;
        state.c_hist.push(c_new.clone())?;
        state.n.values = n_new;
        state.c.values = c_new;
        state.t = t;
        Ok(())
    }

    /// Backward Euler in the diffusion, same explicit terms: the `α → 1`
    /// reference. Works on bare fields and keeps no memory.
    pub fn classical_reference_step(
        &self,
        n: &ScalarField,
        c: &ScalarField,
        u: &VectorField,
        dt: f64,
    ) -> Result<(ScalarField, ScalarField), KsError> {
        let p = &self.params;
        let fn_ = self.n_rhs(n, c, u)?;
        let rn: Vec<f64> = n.values.iter().zip(&fn_).map(|(y, f)| y + dt * f).collect();
        let n_new = self.diffusion.solve(&rn, dt * p.diffusion_n);
        let c_new = if p.static_c {
            c.values.clone()
        } else {
            let fc = self.c_rhs(n, c, u);
            let rc: Vec<f64> = c.values.iter().zip(&fc).map(|(y, f)| y + dt * f).collect();
            self.diffusion.solve(&rc, dt * p.diffusion_c)
        };
        if n_new.iter().any(|v| !v.is_finite()) {
            return Err(KsError::BlowupDetected { t: f64::NAN, field: "n" });
        }
        if c_new.iter().any(|v| !v.is_finite()) {
            return Err(KsError::BlowupDetected { t: f64::NAN, field: "c" });
        }
        Ok((n.with_values(n_new), c.with_values(c_new)))
    }

    /// Pure fractional diffusion of one history (no other terms).
    pub fn fractional_diffusion_step(&self, hist: &FracHistory, coefficient: f64) -> Result<Vec<f64>, KsError> {
        let zero = vec![0.0; hist.width()];
        let mut solve = |rhs: &[f64], mu: f64| -> Result<Vec<f64>, FracError> { Ok(self.diffusion.solve(rhs, mu * coefficient)) };
        Ok(fracops::implicit_l1_step(hist, self.params.alpha, &zero, &mut solve)?)
    }

    /// Advective CFL indicator for the explicit terms at the current state.
    pub fn cfl(&self, state: &KsState, u: &VectorField) -> Result<CflReport, KsError> {
        let p = &self.params;
        let g = state.grid();
        let ones = ScalarField::constant(g, ScalarBc::Neumann0, 1.0);
        let drift = chemotaxis_flux(&ones, &state.c, p.chi_model, p.c_floor)?;
        let max_x = drift.ux.iter().fold(0.0f64, |m, v| m.max(v.abs())) * p.chemotaxis
            + u.ux.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_y = drift.uy.iter().fold(0.0f64, |m, v| m.max(v.abs())) * p.chemotaxis
            + u.uy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mu = fracops::implicit_coefficient(p.alpha, state.dt());
        Ok(CflReport {
            number: mu * (max_x / g.dx() + max_y / g.dy()),
            limit: p.cfl_safety,
        })
    }
}

/// Convenience one-shot step returning a fresh state.
pub fn step_ks(state: &KsState, u: &VectorField, params: &KsParams) -> Result<KsState, KsError> {
    let solver = KsSolver::new(*params, state.grid())?;
    let mut next = state.clone();
    solver.step(&mut next, u)?;
    Ok(next)
}
