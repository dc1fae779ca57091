//! Caputo derivative machinery: L1 weights, the full-history buffer, the L1
//! derivative itself, the semi-implicit L1 step, and a quadrature oracle of
//! the defining memory integral.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::quad::{self, QuadSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("snapshot has {got} values, history expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("history needs at least {needed} snapshots, has {have}")]
    ShortHistory { needed: usize, have: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("implicit solve failed: {0}")]
    SolverFailure(String),
    #[error("quadrature oracle failed: {0}")]
    QuadratureFailure(String),
}

/// `b_j = (j+1)^{1-α} - j^{1-α}` together with the step that scales them.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Weights {
    pub alpha: f64,
    pub dt: f64,
    pub b: Vec<f64>,
}

impl L1Weights {
    pub fn new(alpha: f64, dt: f64, count: usize) -> Result<Self, FracError> {
        check_alpha(alpha)?;
        if !(dt > 0.0) {
            return Err(FracError::InvalidParameter(format!("dt = {dt} must be > 0")));
        }
        let one_m = 1.0 - alpha;
        let b = (0..count)
            .map(|j| {
                if j == 0 {
                    1.0
                } else {
                    // j^{1-α} ((1 + 1/j)^{1-α} - 1) without cancellation.
                    let jf = j as f64;
                    jf.powf(one_m) * (one_m * (1.0 / jf).ln_1p()).exp_m1()
                }
            })
            .collect();
        Ok(Self { alpha, dt, b })
    }

    /// `dt^{-α} / Γ(2-α)`.
    pub fn scale(&self) -> f64 {
        self.dt.powf(-self.alpha) / gamma(2.0 - self.alpha)
    }

    /// `Γ(2-α) dt^α`, the coefficient in front of the implicit operator.
    pub fn implicit_coefficient(&self) -> f64 {
        implicit_coefficient(self.alpha, self.dt)
    }
}

pub fn implicit_coefficient(alpha: f64, dt: f64) -> f64 {
    gamma(2.0 - alpha) * dt.powf(alpha)
}

fn check_alpha(alpha: f64) -> Result<(), FracError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(FracError::InvalidParameter(format!("alpha = {alpha} not in (0,1)")))
    }
}

/// Every past time level of one field, on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracHistory {
    snapshots: Vec<Vec<f64>>,
    t0: f64,
    dt: f64,
}

impl FracHistory {
    pub fn new(initial: Vec<f64>, t0: f64, dt: f64) -> Result<Self, FracError> {
        if !(dt > 0.0) {
            return Err(FracError::InvalidParameter(format!("dt = {dt} must be > 0")));
        }
        Ok(Self {
            snapshots: vec![initial],
            t0,
            dt,
        })
    }

    pub fn push(&mut self, snapshot: Vec<f64>) -> Result<(), FracError> {
        let expected = self.width();
        if snapshot.len() != expected {
            return Err(FracError::ShapeMismatch {
                expected,
                got: snapshot.len(),
            });
        }
        self.snapshots.push(snapshot);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Completed steps (snapshots minus the initial level).
    pub fn steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn time_of(&self, level: usize) -> f64 {
        self.t0 + level as f64 * self.dt
    }

    pub fn latest(&self) -> &[f64] {
        self.snapshots.last().expect("history is never empty")
    }

    pub fn snapshot(&self, level: usize) -> &[f64] {
        &self.snapshots[level]
    }

    pub fn snapshots(&self) -> &[Vec<f64>] {
        &self.snapshots
    }
}

const CHUNK: usize = 512;

/// L1 approximation of the Caputo derivative at the latest level:
/// `dt^{-α}/Γ(2-α) Σ_{j<k} b_j (y_{k-j} - y_{k-j-1})`.
pub fn l1_caputo(history: &FracHistory, alpha: f64) -> Result<Vec<f64>, FracError> {
    if history.len() < 2 {
        return Err(FracError::ShortHistory {
            needed: 2,
            have: history.len(),
        });
    }
    let k = history.steps();
    let w = L1Weights::new(alpha, history.dt, k)?;
    let scale = w.scale();
    let snaps = &history.snapshots;
    let mut out = vec![0.0; history.width()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (j, &bj) in w.b.iter().enumerate() {
            let hi = &snaps[k - j][base..base + chunk.len()];
            let lo = &snaps[k - j - 1][base..base + chunk.len()];
            for ((o, &a), &b) in chunk.iter_mut().zip(hi).zip(lo) {
                *o += bj * (a - b);
            }
        }
        chunk.iter_mut().for_each(|o| *o *= scale);
    });
    Ok(out)
}

/// History part of the next L1 step,
/// `y_{k-1} - Σ_{j=1}^{k-1} b_j (y_{k-j} - y_{k-j-1})`, written as a convex
/// combination of the stored levels.
pub fn l1_memory(history: &FracHistory, alpha: f64) -> Result<Vec<f64>, FracError> {
    let k = history.len();
    let w = L1Weights::new(alpha, history.dt, k)?;
    let mut coeff = vec![0.0; k];
    if k == 1 {
        coeff[0] = 1.0;
    } else {
        coeff[k - 1] = 1.0 - w.b[1];
        for (m, c) in coeff.iter_mut().enumerate().take(k - 1).skip(1) {
            *c = w.b[k - m - 1] - w.b[k - m];
        }
        coeff[0] = w.b[k - 1];
    }
    let snaps = &history.snapshots;
    let mut out = vec![0.0; history.width()];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (m, &cm) in coeff.iter().enumerate().rev() {
            let y = &snaps[m][base..base + chunk.len()];
            for (o, &v) in chunk.iter_mut().zip(y) {
                *o += cm * v;
            }
        }
    });
    Ok(out)
}

/// Solves `(I - shift·L) y = rhs` for a fixed linear operator `L`.
pub trait ImplicitSolver {
    fn solve(&mut self, rhs: &[f64], shift: f64) -> Result<Vec<f64>, FracError>;
}

impl<F> ImplicitSolver for F
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>, FracError>,
{
    fn solve(&mut self, rhs: &[f64], shift: f64) -> Result<Vec<f64>, FracError> {
        self(rhs, shift)
    }
}

/// One L1 step of `∂_t^α y = L y + f`: the memory moves to the right-hand
/// side and `(I - Γ(2-α) dt^α L) y_k = memory + Γ(2-α) dt^α f` is solved.
/// The caller appends the returned level to the history.
pub fn implicit_l1_step<S: ImplicitSolver + ?Sized>(
    history: &FracHistory,
    alpha: f64,
    explicit_rhs: &[f64],
    solver: &mut S,
) -> Result<Vec<f64>, FracError> {
    if explicit_rhs.len() != history.width() {
        return Err(FracError::ShapeMismatch {
            expected: history.width(),
            got: explicit_rhs.len(),
        });
    }
    let mu = implicit_coefficient(alpha, history.dt);
    let mut rhs = l1_memory(history, alpha)?;
    for (r, &f) in rhs.iter_mut().zip(explicit_rhs) {
        *r += mu * f;
    }
    let y = solver.solve(&rhs, mu)?;
    if y.len() != rhs.len() {
        return Err(FracError::ShapeMismatch {
            expected: rhs.len(),
            got: y.len(),
        });
    }
    Ok(y)
}

/// Adaptive-quadrature evaluation of
/// `(1/Γ(1-α)) ∫_0^t (t-s)^{-α} y'(s) ds`, with `y'` from a five-point
/// central difference. `y` must be smooth on a neighbourhood of `[0, t]`.
pub fn caputo_quadrature_oracle<F: Fn(f64) -> f64>(
    y: F,
    alpha: f64,
    t: f64,
    tol: f64,
) -> Result<f64, FracError> {
    check_alpha(alpha)?;
    if !(tol > 0.0) || !(t >= 0.0) {
        return Err(FracError::InvalidParameter(format!("need tol > 0 and t >= 0 (tol={tol}, t={t})")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = tol.powf(0.25).clamp(1e-4, 5e-2) * t.max(1.0);
    let deriv = |s: f64| (8.0 * (y(s + h) - y(s - h)) - (y(s + 2.0 * h) - y(s - 2.0 * h))) / (12.0 * h);
    let one_m = 1.0 - alpha;
    // s = t - w^{1/(1-α)} removes the kernel singularity.
    let integrand = |w: f64| deriv(t - w.powf(1.0 / one_m)) / one_m;
    let settings = QuadSettings {
        panels: 16,
        abs_tol: tol,
        rel_tol: 0.0,
        max_intervals: 10_000,
    };
    let r = quad::integrate(integrand, 0.0, t.powf(one_m), settings)
        .map_err(|e| FracError::QuadratureFailure(e.to_string()))?;
    Ok(r.value / gamma(one_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{mittag_leffler, EvalPolicy};

    fn history_of(f: impl Fn(f64) -> f64, dt: f64, steps: usize) -> FracHistory {
        let mut h = FracHistory::new(vec![f(0.0)], 0.0, dt).unwrap();
        for k in 1..=steps {
            h.push(vec![f(k as f64 * dt)]).unwrap();
        }
        h
    }

    #[test]
    fn weight_identities() {
        for &alpha in &[0.1, 0.5, 0.9] {
            let w = L1Weights::new(alpha, 0.1, 400).unwrap();
            assert_eq!(w.b[0], 1.0);
            assert!(w.b.windows(2).all(|p| p[1] < p[0] && p[1] > 0.0));
            let mut sum = 0.0;
            for k in 1..=400usize {
                sum += w.b[k - 1];
                let target = (k as f64).powf(1.0 - alpha);
                assert!((sum - target).abs() <= 1e-13 * target, "alpha={alpha} k={k}");
            }
        }
    }

    #[test]
    fn constant_history_has_zero_derivative() {
        let h = history_of(|_| 3.0, 0.1, 20);
        assert!(l1_caputo(&h, 0.4).unwrap().iter().all(|&v| v.abs() < 1e-14));
        let o = caputo_quadrature_oracle(|_| 3.0, 0.4, 1.0, 1e-12).unwrap();
        assert_eq!(o, 0.0);
    }

    #[test]
    fn linear_history_is_exact() {
        let h = history_of(|t| t, 1.0 / 16.0, 16);
        let d = l1_caputo(&h, 0.5).unwrap()[0];
        assert!((d - 1.0 / gamma(1.5)).abs() < 1e-13);
        assert!((d - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn quadratic_history_within_l1_error() {
        let h = history_of(|t| t * t, 1.0 / 64.0, 64);
        let d = l1_caputo(&h, 0.5).unwrap()[0];
        assert!((d - 2.0 / gamma(2.5)).abs() < 5e-3);
        assert!((2.0 / gamma(2.5) - 1.504506).abs() < 1e-6);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let v = caputo_quadrature_oracle(|t| t, 0.3, 2.0, 1e-12).unwrap();
        assert!((v - 2f64.powf(0.7) / gamma(1.7)).abs() < 1e-10);
        assert!((v - 1.787).abs() < 1e-3);
        let v = caputo_quadrature_oracle(|t| t * t, 0.5, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / gamma(2.5)).abs() < 1e-10);
    }

    #[test]
    fn oracle_sine_matches_series_and_tanh_sinh() {
        // D^α sin at t: Σ_k (-1)^k t^{2k+1-α} / Γ(2k+2-α).
        let (alpha, t) = (0.5f64, 1.0f64);
        let mut series = 0.0;
        for k in 0..30 {
            let kf = k as f64;
            series += (-1f64).powi(k) * t.powf(2.0 * kf + 1.0 - alpha) / gamma(2.0 * kf + 2.0 - alpha);
        }
        let gk = caputo_quadrature_oracle(f64::sin, alpha, t, 1e-12).unwrap();
        // s = t - v^2 turns the kernel into a smooth integrand.
        let ts = quadrature::double_exponential::integrate(
            |v: f64| 2.0 * (t - v * v).cos(),
            0.0,
            t.sqrt(),
            1e-13,
        )
        .integral
            / gamma(1.0 - alpha);
        assert!((gk - series).abs() < 1e-9, "{gk} vs {series}");
        assert!((gk - ts).abs() < 1e-9, "{gk} vs {ts}");
    }

    #[test]
    fn l1_order_for_quadratic() {
        let alpha = 0.5;
        let exact = caputo_quadrature_oracle(|t| t * t, alpha, 1.0, 1e-13).unwrap();
        let errs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let h = history_of(|t| t * t, 1.0 / n as f64, n);
                (l1_caputo(&h, alpha).unwrap()[0] - exact).abs()
            })
            .collect();
        for p in errs.windows(2) {
            let order = (p[0] / p[1]).log2();
            assert!((order - (2.0 - alpha)).abs() < 0.1, "order {order}");
        }
    }

    fn relax(alpha: f64, lambda: f64, dt: f64, steps: usize) -> Vec<f64> {
        let mut h = FracHistory::new(vec![1.0], 0.0, dt).unwrap();
        let mut solver = |rhs: &[f64], shift: f64| Ok(vec![rhs[0] / (1.0 + shift * lambda)]);
        for _ in 0..steps {
            let y = implicit_l1_step(&h, alpha, &[0.0], &mut solver).unwrap();
            h.push(y).unwrap();
        }
        h.snapshots().iter().map(|s| s[0]).collect()
    }

    #[test]
    fn zero_operator_keeps_constant_history() {
        let mut h = FracHistory::new(vec![2.5, -1.0], 0.0, 0.1).unwrap();
        let mut id = |rhs: &[f64], _s: f64| Ok(rhs.to_vec());
        for _ in 0..10 {
            let y = implicit_l1_step(&h, 0.6, &[0.0, 0.0], &mut id).unwrap();
            assert!((y[0] - 2.5).abs() < 1e-14 && (y[1] + 1.0).abs() < 1e-14);
            h.push(y).unwrap();
        }
    }

    #[test]
    fn scalar_relaxation_tracks_mittag_leffler() {
        let pol = EvalPolicy::default();
        // For small alpha the first few levels carry the L1 start-up error
        // of the t^α singularity (about 0.03 at alpha = 0.3, k = 1).
        for &(alpha, from) in &[(0.3, 4usize), (0.5, 4), (0.6, 0), (0.8, 0)] {
            let dt = 1.0 / 256.0;
            let ys = relax(alpha, 1.0, dt, 512);
            for (k, p) in ys.windows(2).enumerate() {
                assert!(p[1] > 0.0 && p[1] < p[0], "alpha={alpha} step {k}");
            }
            for (k, &y) in ys.iter().enumerate().skip(from) {
                let t = k as f64 * dt;
                let e = mittag_leffler(alpha, 1.0, -t.powf(alpha), &pol).unwrap();
                assert!((y - e).abs() < 0.01, "alpha={alpha} t={t}: {y} vs {e}");
            }
        }
    }

    #[test]
    fn scalar_relaxation_error_shrinks_with_dt() {
        let pol = EvalPolicy::default();
        let alpha = 0.6;
        let exact = mittag_leffler(alpha, 1.0, -2.0, &pol).unwrap();
        let e1 = (relax(alpha, 2.0, 1.0 / 64.0, 64)[64] - exact).abs();
        let e2 = (relax(alpha, 2.0, 1.0 / 128.0, 128)[128] - exact).abs();
        assert!(e2 < e1 && e2 < 5e-3, "{e1} {e2}");
    }

    #[test]
    fn near_unit_alpha_matches_backward_euler() {
        let dt = 1.0 / 256.0;
        let ys = relax(0.999, 1.0, dt, 512);
        let mut be = 1.0;
        for &y in ys.iter().skip(1) {
            be /= 1.0 + dt;
            assert!((y - be).abs() < 1e-2);
        }
    }

    #[test]
    fn shape_errors() {
        let mut h = FracHistory::new(vec![0.0; 3], 0.0, 0.1).unwrap();
        assert!(matches!(h.push(vec![0.0; 2]), Err(FracError::ShapeMismatch { .. })));
        assert!(matches!(l1_caputo(&h, 0.5), Err(FracError::ShortHistory { .. })));
        let mut id = |rhs: &[f64], _s: f64| Ok(rhs.to_vec());
        assert!(implicit_l1_step(&h, 0.5, &[0.0], &mut id).is_err());
    }
}
