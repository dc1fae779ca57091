//! Mittag-Leffler operators on the discrete Neumann spectrum, Picard
//! iteration of the Duhamel form of the `(n, c)` equations with a frozen
//! velocity, and the explicit local existence-time estimate.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::fields::{self, AdvectionScheme, CosineTransform, FieldError, Grid2D, ScalarBc, ScalarField, VectorField};
use crate::ks_macro::{chemotaxis_flux, ChiModel, KsError};
use crate::specfun::{beta_fn, mittag_leffler, EvalPolicy, SpecfunError};

#[derive(Debug, Error)]
pub enum MildError {
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Ks(#[from] KsError),
    #[error("Picard distances stopped decreasing: {distances:?}")]
    NoContraction { distances: Vec<f64> },
    #[error("parameter outside the admissible regime: {0}")]
    DomainError(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Cosine basis and eigenvalues of the Neumann five-point Laplacian.
#[derive(Debug, Clone)]
pub struct NeumannSpectrum {
    transform: CosineTransform,
    eigenvalues: Vec<f64>,
}

impl NeumannSpectrum {
    pub fn new(grid: Grid2D) -> Self {
        let transform = CosineTransform::new(grid);
        let eigenvalues = transform.eigenvalues();
        Self { transform, eigenvalues }
    }

    pub fn grid(&self) -> Grid2D {
        self.transform.grid
    }

    /// Layout `k*nx + j` for mode `(j, k)`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn to_coeffs(&self, f: &ScalarField) -> Vec<f64> {
        self.transform.forward(&f.values)
    }

    pub fn from_coeffs(&self, coeffs: &[f64], bc: ScalarBc) -> ScalarField {
        ScalarField {
            grid: self.grid(),
            values: self.transform.inverse(coeffs),
            bc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MlKind {
    /// `E_{α,1}`
    EAlpha,
    /// `E_{α,α}`
    EAlphaAlpha,
}

/// Evaluates `f` once per distinct eigenvalue.
fn per_mode<F>(eigs: &[f64], f: F) -> Result<Vec<f64>, SpecfunError>
where
    F: Fn(f64) -> Result<f64, SpecfunError> + Sync,
{
    let mut keys: Vec<u64> = eigs.iter().map(|l| l.to_bits()).collect();
    keys.sort_unstable();
    keys.dedup();
    let vals: Vec<f64> = keys
        .par_iter()
        .map(|&k| f(f64::from_bits(k)))
        .collect::<Result<_, _>>()?;
    let table: HashMap<u64, f64> = keys.into_iter().zip(vals).collect();
    Ok(eigs.iter().map(|l| table[&l.to_bits()]).collect())
}

/// Multiplies mode `(j, k)` by `E_{α,β}(t^α (λ_{jk} - γ))`.
pub fn ml_operator_apply(
    spec: &NeumannSpectrum,
    kind: MlKind,
    alpha: f64,
    t: f64,
    gamma_shift: f64,
    field: &ScalarField,
    policy: &EvalPolicy,
) -> Result<ScalarField, MildError> {
    if !(t >= 0.0) {
        return Err(MildError::InvalidParameter(format!("t = {t} must be >= 0")));
    }
    if kind == MlKind::EAlpha && t == 0.0 {
        return Ok(field.clone());
    }
    let beta = match kind {
        MlKind::EAlpha => 1.0,
        MlKind::EAlphaAlpha => alpha,
    };
    let ta = t.powf(alpha);
    let mult = per_mode(&spec.eigenvalues, |l| mittag_leffler(alpha, beta, ta * (l - gamma_shift), policy))?;
    let mut c = spec.to_coeffs(field);
    c.iter_mut().zip(&mult).for_each(|(a, m)| *a *= m);
    Ok(spec.from_coeffs(&c, field.bc))
}

/// `∫_0^τ s^{α-1} E_{α,α}(λ s^α) ds = τ^α E_{α,α+1}(λ τ^α)`.
fn kernel_integral(alpha: f64, lambda: f64, tau: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    let ta = tau.powf(alpha);
    let z = lambda * ta;
    if z == 0.0 {
        return Ok(ta / gamma(alpha + 1.0));
    }
    if z.abs() < 0.5 {
        return Ok(ta * mittag_leffler(alpha, alpha + 1.0, z, policy)?);
    }
    // E_{α,α+1}(z) = (E_α(z) - 1)/z
    Ok(ta * (mittag_leffler(alpha, 1.0, z, policy)? - 1.0) / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardParams {
    pub alpha: f64,
    pub gamma: f64,
    pub t_end: f64,
    /// Uniform time levels after `t = 0`.
    pub steps: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Norm exponent is `rho*q`; weight exponent `β = α d / (2 rho q)`.
    pub rho: f64,
    pub q: f64,
}

impl PicardParams {
    pub fn weight_exponent(&self) -> f64 {
        self.alpha * 2.0 / (2.0 * self.rho * self.q)
    }

    fn validate(&self) -> Result<(), MildError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MildError::InvalidParameter(format!("alpha = {} not in (0,1)", self.alpha)));
        }
        if !(self.t_end > 0.0) || self.steps == 0 {
            return Err(MildError::InvalidParameter("need t_end > 0 and steps >= 1".into()));
        }
        if !(self.gamma >= 0.0) || !(self.rho * self.q >= 1.0) {
            return Err(MildError::InvalidParameter("need gamma >= 0 and rho*q >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub times: Vec<f64>,
    pub n: Vec<ScalarField>,
    pub c: Vec<ScalarField>,
    /// Weighted distance between consecutive iterates, one per iteration.
    pub distances: Vec<f64>,
    pub converged: bool,
}

/// Cell-centred `|∇f|` from the face gradient.
fn grad_magnitude(f: &ScalarField) -> ScalarField {
    fields::gradient(f).speed()
}

fn diff(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.with_values(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect())
}

/// `sup_k t_k^β (‖Δn‖ + ‖Δc‖ + ‖∇Δc‖)` in `L^{ρq}`.
fn weighted_distance(
    times: &[f64],
    beta: f64,
    p: f64,
    n1: &[ScalarField],
    c1: &[ScalarField],
    n0: &[ScalarField],
    c0: &[ScalarField],
) -> f64 {
    (1..times.len())
        .map(|k| {
            let dn = diff(&n1[k], &n0[k]);
            let dc = diff(&c1[k], &c0[k]);
            times[k].powf(beta) * (fields::lq_norm(&dn, p) + fields::lq_norm(&dc, p) + fields::lq_norm(&grad_magnitude(&dc), p))
        })
        .fold(0.0, f64::max)
}

/// Picard iteration of the Duhamel equations for `(n, c)` with velocity
/// `u_fixed`, unit sensitivity and unit diffusivities. Time convolutions use
/// product rectangles with the integrand frozen at the left end of each step.
pub fn duhamel_picard(
    n0: &ScalarField,
    c0: &ScalarField,
    u_fixed: &VectorField,
    params: &PicardParams,
    policy: &EvalPolicy,
) -> Result<PicardResult, MildError> {
    params.validate()?;
    let g = n0.grid;
    if c0.grid != g || u_fixed.grid != g {
        return Err(FieldError::GridMismatch.into());
    }
    let spec = NeumannSpectrum::new(g);
    let (alpha, kmax) = (params.alpha, params.steps);
    let h = params.t_end / kmax as f64;
    let times: Vec<f64> = (0..=kmax).map(|k| k as f64 * h).collect();
    let eig_n = spec.eigenvalues().to_vec();
    let eig_c: Vec<f64> = eig_n.iter().map(|l| l - params.gamma).collect();

    let free = |eigs: &[f64]| -> Result<Vec<Vec<f64>>, SpecfunError> {
        times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    Ok(vec![1.0; eigs.len()])
                } else {
                    let ta = t.powf(alpha);
                    per_mode(eigs, |l| mittag_leffler(alpha, 1.0, ta * l, policy))
                }
            })
            .collect()
    };
    // weights[m-1][i] = G_m - G_{m-1}
    let weights = |eigs: &[f64]| -> Result<Vec<Vec<f64>>, SpecfunError> {
        let cum: Vec<Vec<f64>> = (0..=kmax)
            .map(|m| {
                if m == 0 {
                    Ok(vec![0.0; eigs.len()])
                } else {
                    per_mode(eigs, |l| kernel_integral(alpha, l, m as f64 * h, policy))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok((1..=kmax)
            .map(|m| cum[m].iter().zip(&cum[m - 1]).map(|(a, b)| a - b).collect())
            .collect())
    };
    let (free_n, free_c) = (free(&eig_n)?, free(&eig_c)?);
    let (w_n, w_c) = (weights(&eig_n)?, weights(&eig_c)?);
    let n0_hat = spec.to_coeffs(n0);
    let c0_hat = spec.to_coeffs(c0);

    let beta = params.weight_exponent();
    let p = params.rho * params.q;
    let mut n_traj: Vec<ScalarField> = vec![n0.clone(); kmax + 1];
    let mut c_traj: Vec<ScalarField> = vec![c0.clone(); kmax + 1];
    let mut distances = Vec::new();
    let mut rising = 0;
    for _ in 0..params.max_iters {
        let forcing: Vec<(Vec<f64>, Vec<f64>)> = (0..kmax)
            .into_par_iter()
            .map(|j| -> Result<(Vec<f64>, Vec<f64>), MildError> {
                let (n, c) = (&n_traj[j], &c_traj[j]);
                let flux = chemotaxis_flux(n, c, ChiModel::Unit, 0.0)?;
                let div = fields::divergence(&flux);
                let an = fields::advect(n, u_fixed, AdvectionScheme::Upwind);
                let ac = fields::advect(c, u_fixed, AdvectionScheme::Upwind);
                let fn_: Vec<f64> = div.values.iter().zip(&an.values).map(|(a, b)| a + b).collect();
                let fc: Vec<f64> = ac.values.iter().zip(&n.values).map(|(a, b)| a - b).collect();
                Ok((spec.transform.forward(&fn_), spec.transform.forward(&fc)))
            })
            .collect::<Result<_, _>>()?;
        let next: Vec<(ScalarField, ScalarField)> = (0..=kmax)
            .into_par_iter()
            .map(|k| {
                let mut nh: Vec<f64> = n0_hat.iter().zip(&free_n[k]).map(|(a, e)| a * e).collect();
                let mut ch: Vec<f64> = c0_hat.iter().zip(&free_c[k]).map(|(a, e)| a * e).collect();
                for m in 1..=k {
                    let (fnh, fch) = &forcing[k - m];
                    for i in 0..nh.len() {
                        nh[i] -= w_n[m - 1][i] * fnh[i];
                        ch[i] -= w_c[m - 1][i] * fch[i];
                    }
                }
                (spec.from_coeffs(&nh, n0.bc), spec.from_coeffs(&ch, c0.bc))
            })
            .collect();
        let (n_new, c_new): (Vec<_>, Vec<_>) = next.into_iter().unzip();
        let d = weighted_distance(&times, beta, p, &n_new, &c_new, &n_traj, &c_traj);
        if let Some(&last) = distances.last() {
            if d >= last && d > 0.0 {
                rising += 1;
            } else {
                rising = 0;
            }
        }
        distances.push(d);
        n_traj = n_new;
        c_traj = c_new;
        if !d.is_finite() || rising >= 3 {
            return Err(MildError::NoContraction { distances });
        }
        if d <= params.tol {
            return Ok(PicardResult {
                times,
                n: n_traj,
                c: c_traj,
                distances,
                converged: true,
            });
        }
    }
    Ok(PicardResult {
        times,
        n: n_traj,
        c: c_traj,
        distances,
        converged: false,
    })
}

/// Largest ratio of consecutive distances; `0/0` counts as 0.
pub fn contraction_ratio(distances: &[f64]) -> f64 {
    distances
        .windows(2)
        .map(|w| if w[0] == 0.0 { if w[1] == 0.0 { 0.0 } else { f64::INFINITY } } else { w[1] / w[0] })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExistenceParams {
    pub alpha: f64,
    pub d: u32,
    pub q: f64,
    pub rho: f64,
    pub r: f64,
    pub c: f64,
    /// `‖∇c₀‖` in `L^{ρq}`.
    pub grad_c0: f64,
    /// Bounds on the unweighted sup norms of the three free evolutions
    /// (`n₀`, `c₀`, `u₀` data); the weighted sup over `(0, T)` is at most
    /// `T^β` times these.
    pub free_n: f64,
    pub free_c: f64,
    pub free_u: f64,
}

impl ExistenceParams {
    pub fn beta(&self) -> f64 {
        self.alpha * self.d as f64 / (2.0 * self.rho * self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// `T^β ‖∇c₀‖ ≤ R/(8C)`
    InitialGradient,
    /// `T^{α/2} B(1-β, α/2) + C T^α B(1-β, α) + C T ≤ 1/8`
    Linear,
    /// `T^{α/2 - αd/(2q) - β} ≤ 1 / (8 C B(1-2β, α/2 - αd/(2q)) R)`
    NonlinearN,
    /// `T^{1/2 - d/(2ρq) - β} ≤ 1 / (8 C B(1-2β, 1/2 - d/(2ρq)) R)`
    NonlinearC,
    /// `T^β (S_n + S_c + S_u) ≤ R/8`
    FreeEvolution,
}

impl Constraint {
    pub const ALL: [Constraint; 5] = [
        Constraint::InitialGradient,
        Constraint::Linear,
        Constraint::NonlinearN,
        Constraint::NonlinearC,
        Constraint::FreeEvolution,
    ];

    /// 1-based position in the list of smallness conditions.
    pub fn index(self) -> usize {
        Constraint::ALL.iter().position(|&c| c == self).unwrap() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceResult {
    pub t: f64,
    /// `None` when the cap `T = 1` binds.
    pub binding: Option<Constraint>,
    pub per_constraint: [f64; 5],
}

/// Pre-evaluated Beta functions and exponents of the five conditions.
#[derive(Debug, Clone, Copy)]
pub struct ExistenceConditions {
    p: ExistenceParams,
    beta: f64,
    b_lin_half: f64,
    b_lin_full: f64,
    e_n: f64,
    b_n: f64,
    e_c: f64,
    b_c: f64,
}

impl ExistenceConditions {
    pub fn new(p: ExistenceParams) -> Result<Self, MildError> {
        let dom = |m: String| Err(MildError::DomainError(m));
        let bad = |m: String| Err(MildError::InvalidParameter(m));
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return bad(format!("alpha = {} not in (0,1)", p.alpha));
        }
        if p.d < 2 {
            return bad(format!("d = {} must be >= 2", p.d));
        }
        let d = p.d as f64;
        if !(p.q > 2.0 * d) {
            return dom(format!("q > 2d violated: q = {}, d = {}", p.q, p.d));
        }
        let beta = p.beta();
        let a = p.alpha;
        let arg_n = a / 2.0 - a * d / (2.0 * p.q);
        let arg_c = 0.5 - d / (2.0 * p.rho * p.q);
        for (name, v) in [("1-beta", 1.0 - beta), ("1-2beta", 1.0 - 2.0 * beta), ("alpha/2-alpha d/(2q)", arg_n), ("1/2-d/(2 rho q)", arg_c)] {
            if !(v > 0.0) {
                return dom(format!("Beta argument {name} = {v} is not positive"));
            }
        }
        if !(p.rho >= 2.0) {
            return bad(format!("rho = {} must be >= 2", p.rho));
        }
        if !(p.r > 0.0 && p.c > 0.0) {
            return bad("R and C must be > 0".into());
        }
        if [p.grad_c0, p.free_n, p.free_c, p.free_u].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("initial norms must be finite and >= 0".into());
        }
        let b = |x: f64, y: f64| beta_fn(x, y).map_err(MildError::from);
        Ok(Self {
            p,
            beta,
            b_lin_half: b(1.0 - beta, a / 2.0)?,
            b_lin_full: b(1.0 - beta, a)?,
            e_n: arg_n - beta,
            b_n: b(1.0 - 2.0 * beta, arg_n)?,
            e_c: arg_c - beta,
            b_c: b(1.0 - 2.0 * beta, arg_c)?,
        })
    }

    /// Whether condition `k` holds at `t`.
    pub fn holds(&self, k: Constraint, t: f64) -> bool {
        let p = &self.p;
        let (a, c, r) = (p.alpha, p.c, p.r);
        match k {
            Constraint::InitialGradient => t.powf(self.beta) * p.grad_c0 <= r / (8.0 * c),
            Constraint::Linear => {
                t.powf(a / 2.0) * self.b_lin_half + c * t.powf(a) * self.b_lin_full + c * t <= 0.125
            }
            Constraint::NonlinearN => t.powf(self.e_n) <= 1.0 / (8.0 * c * self.b_n * r),
            Constraint::NonlinearC => t.powf(self.e_c) <= 1.0 / (8.0 * c * self.b_c * r),
            Constraint::FreeEvolution => t.powf(self.beta) * (p.free_n + p.free_c + p.free_u) <= r / 8.0,
        }
    }

    pub fn all_hold(&self, t: f64) -> bool {
        Constraint::ALL.iter().all(|&k| self.holds(k, t))
    }
}

const T_FLOOR: f64 = 1e-300;

/// Largest `T ∈ (0, 1]` satisfying all five conditions; every left side is
/// increasing in `T`, so each condition is bisected separately (in `ln T`,
/// to relative tolerance 1e-10) and the smallest bound wins. Returns 0 when
/// some condition fails even at `T = 1e-300`.
pub fn existence_time(params: &ExistenceParams) -> Result<ExistenceResult, MildError> {
    let conds = ExistenceConditions::new(*params)?;
    let mut per = [0.0; 5];
    for (slot, &k) in per.iter_mut().zip(Constraint::ALL.iter()) {
        *slot = if conds.holds(k, 1.0) {
            1.0
        } else if !conds.holds(k, T_FLOOR) {
            0.0
        } else {
            let (mut lo, mut hi) = (T_FLOOR.ln(), 0.0f64);
            while hi - lo > 1e-11 {
                let mid = 0.5 * (lo + hi);
                if conds.holds(k, mid.exp()) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo.exp()
        };
    }
    let (imin, &tmin) = per
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    Ok(ExistenceResult {
        t: tmin,
        binding: if tmin < 1.0 { Some(Constraint::ALL[imin]) } else { None },
        per_constraint: per,
    })
}

/// Smallest constants for which the operator bounds hold on the discrete
/// spectrum over the sampled times: `‖E_α(t^αΔ)‖ ≤ C₀`,
/// `t^{α/2} ‖∇E_α(t^αΔ)‖ ≤ C₁`, `Γ(α) ‖E_{α,α}(t^αΔ)‖ ≤ C₂` (all in `L²`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub semigroup: f64,
    pub gradient: f64,
    pub alpha_alpha: f64,
}

pub fn empirical_bound_constants(
    spec: &NeumannSpectrum,
    alpha: f64,
    times: &[f64],
    policy: &EvalPolicy,
) -> Result<BoundConstants, MildError> {
    let mut out = BoundConstants {
        semigroup: 0.0,
        gradient: 0.0,
        alpha_alpha: 0.0,
    };
    let ga = gamma(alpha);
    for &t in times {
        let ta = t.powf(alpha);
        let e1 = per_mode(spec.eigenvalues(), |l| mittag_leffler(alpha, 1.0, ta * l, policy))?;
        let e2 = per_mode(spec.eigenvalues(), |l| mittag_leffler(alpha, alpha, ta * l, policy))?;
        for ((&l, a), b) in spec.eigenvalues().iter().zip(&e1).zip(&e2) {
            out.semigroup = out.semigroup.max(a.abs());
            // ‖∇φ‖² = -λ ‖φ‖² for a discrete Neumann eigenvector.
            out.gradient = out.gradient.max(t.powf(alpha / 2.0) * (-l).max(0.0).sqrt() * a.abs());
            out.alpha_alpha = out.alpha_alpha.max(ga * b.abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pol() -> EvalPolicy {
        EvalPolicy::default()
    }

    fn grid() -> Grid2D {
        Grid2D::new(12, 10, 1.0, 1.0).unwrap()
    }

    fn mode(spec: &NeumannSpectrum, j: usize, k: usize) -> ScalarField {
        let g = spec.grid();
        let mut c = vec![0.0; g.cells()];
        c[k * g.nx + j] = 1.0;
        spec.from_coeffs(&c, ScalarBc::Neumann0)
    }

    #[test]
    fn spectrum_basics() {
        let spec = NeumannSpectrum::new(grid());
        assert_eq!(spec.eigenvalues()[0], 0.0);
        assert!(spec.eigenvalues().iter().all(|&l| l <= 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = ScalarField::from_fn(grid(), ScalarBc::Neumann0, |_, _| rng.random::<f64>());
        let back = spec.from_coeffs(&spec.to_coeffs(&f), ScalarBc::Neumann0);
        assert!(f.values.iter().zip(&back.values).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn operator_examples() {
        let spec = NeumannSpectrum::new(grid());
        let one = ScalarField::constant(grid(), ScalarBc::Neumann0, 2.0);
        let out = ml_operator_apply(&spec, MlKind::EAlpha, 0.5, 3.0, 0.0, &one, &pol()).unwrap();
        assert!(out.values.iter().all(|v| (v - 2.0).abs() < 1e-12));
        let m = mode(&spec, 2, 3);
        let lam = spec.eigenvalues()[3 * 12 + 2];
        let (alpha, t) = (0.6, 0.01);
        let out = ml_operator_apply(&spec, MlKind::EAlpha, alpha, t, 0.0, &m, &pol()).unwrap();
        let e = mittag_leffler(alpha, 1.0, t.powf(alpha) * lam, &pol()).unwrap();
        assert!(out.values.iter().zip(&m.values).all(|(a, b)| (a - e * b).abs() < 1e-12));
        assert_eq!(ml_operator_apply(&spec, MlKind::EAlpha, 0.6, 0.0, 0.0, &m, &pol()).unwrap(), m);
    }

    #[test]
    fn unit_alpha_is_heat_semigroup() {
        let spec = NeumannSpectrum::new(grid());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = ScalarField::from_fn(grid(), ScalarBc::Neumann0, |_, _| rng.random::<f64>());
        let t = 0.003;
        let out = ml_operator_apply(&spec, MlKind::EAlpha, 1.0, t, 0.0, &f, &pol()).unwrap();
        let mut c = spec.to_coeffs(&f);
        c.iter_mut().zip(spec.eigenvalues()).for_each(|(a, l)| *a *= (t * l).exp());
        let exact = spec.from_coeffs(&c, ScalarBc::Neumann0);
        assert!(out.values.iter().zip(&exact.values).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn kernel_integral_matches_quadrature() {
        for &(alpha, lam, tau) in &[(0.5f64, -3.0f64, 0.2f64), (0.7, -400.0, 0.05), (0.3, 0.0, 1.0), (0.8, -0.1, 0.3)] {
            // s = w^{1/α} turns s^{α-1} ds into dw/α.
            let r = quadrature::double_exponential::integrate(
                |w: f64| mittag_leffler(alpha, alpha, lam * w, &pol()).unwrap() / alpha,
                0.0,
                tau.powf(alpha),
                1e-13,
            );
            let k = kernel_integral(alpha, lam, tau, &pol()).unwrap();
            assert!((k - r.integral).abs() < 1e-9 * k.abs().max(1e-3), "{alpha} {lam} {tau}: {k} vs {}", r.integral);
        }
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let g = grid();
        let z = ScalarField::zeros(g, ScalarBc::Neumann0);
        let params = PicardParams {
            alpha: 0.5,
            gamma: 0.7,
            t_end: 0.1,
            steps: 8,
            max_iters: 5,
            tol: 1e-14,
            rho: 2.0,
            q: 5.0,
        };
        let r = duhamel_picard(&z, &z, &VectorField::zeros(g), &params, &pol()).unwrap();
        assert!(r.converged);
        assert!(r.n.iter().chain(&r.c).all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn linear_case_is_exact_after_one_step() {
        let g = grid();
        let spec = NeumannSpectrum::new(g);
        let c0 = mode(&spec, 1, 2);
        let lam = spec.eigenvalues()[2 * 12 + 1];
        let params = PicardParams {
            alpha: 0.6,
            gamma: 0.4,
            t_end: 0.05,
            steps: 10,
            max_iters: 10,
            tol: 1e-13,
            rho: 2.0,
            q: 5.0,
        };
        let r = duhamel_picard(&ScalarField::zeros(g, ScalarBc::Neumann0), &c0, &VectorField::zeros(g), &params, &pol()).unwrap();
        assert!(r.converged);
        assert!(contraction_ratio(&r.distances) < 1e-12);
        for (k, &t) in r.times.iter().enumerate() {
            let e = mittag_leffler(0.6, 1.0, t.powf(0.6) * (lam - 0.4), &pol()).unwrap();
            assert!(r.c[k].values.iter().zip(&c0.values).all(|(a, b)| (a - e * b).abs() < 1e-12));
        }
    }

    #[test]
    fn ratio_helper() {
        assert_eq!(contraction_ratio(&[1.0, 0.5, 0.1]), 0.5);
        assert_eq!(contraction_ratio(&[1.0, 0.0, 0.0]), 0.0);
        assert!(contraction_ratio(&[1.0, 2.0]) > 1.0);
    }

    fn base() -> ExistenceParams {
        ExistenceParams {
            alpha: 0.8,
            d: 2,
            q: 5.0,
            rho: 2.0,
            r: 1.0,
            c: 1.0,
            grad_c0: 0.01,
            free_n: 0.01,
            free_c: 0.01,
            free_u: 0.01,
        }
    }

    #[test]
    fn existence_example_and_domain_errors() {
        let p = base();
        assert!((p.beta() - 0.08).abs() < 1e-15);
        let r = existence_time(&p).unwrap();
        assert!(r.t > 0.0 && r.t < 1.0);
        let conds = ExistenceConditions::new(p).unwrap();
        assert!(conds.all_hold(r.t));
        assert!(!conds.all_hold(r.t * (1.0 + 1e-8)));
        assert!(matches!(existence_time(&ExistenceParams { q: 4.0, ..p }), Err(MildError::DomainError(_))));
        assert!(matches!(existence_time(&ExistenceParams { rho: 1.5, ..p }), Err(MildError::InvalidParameter(_))));
        assert!(matches!(existence_time(&ExistenceParams { rho: 0.2, ..p }), Err(MildError::DomainError(_))));
        let big = existence_time(&ExistenceParams { grad_c0: 1e6, ..p }).unwrap();
        assert!(big.t > 0.0);
        assert_eq!(big.binding, Some(Constraint::InitialGradient));
    }

    #[test]
    fn bound_constants_on_spectrum() {
        let spec = NeumannSpectrum::new(grid());
        let b = empirical_bound_constants(&spec, 0.5, &[1e-3, 1e-2, 0.1, 1.0], &pol()).unwrap();
        assert!((b.semigroup - 1.0).abs() < 1e-12);
        assert!(b.gradient > 0.0 && b.gradient.is_finite());
        assert!((b.alpha_alpha - 1.0).abs() < 1e-12);
    }
}
