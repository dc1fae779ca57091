//! Wright, Mainardi, Mittag-Leffler, Beta and reciprocal Gamma functions on
//! the real line.
//!
//! Power series are the primary route. Where a series loses too many digits
//! to cancellation the functions switch to a non-oscillatory integral
//! representation (Mainardi, Mittag-Leffler on the negative axis) or to the
//! algebraic asymptotic expansion (Mittag-Leffler, large negative argument).

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};
use thiserror::Error;

use crate::quad::{self, QuadError, QuadSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("{function}: series did not converge within {terms} terms")]
    NonConvergence { function: &'static str, terms: usize },
    #[error("{function}: argument outside domain ({detail})")]
    DomainError {
        function: &'static str,
        detail: String,
    },
    #[error("{function}: {source}")]
    Quadrature {
        function: &'static str,
        #[source]
        source: QuadError,
    },
}

fn domain(function: &'static str, detail: impl Into<String>) -> SpecfunError {
    SpecfunError::DomainError {
        function,
        detail: detail.into(),
    }
}

/// Evaluation knobs shared by every special function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPolicy {
    /// Relative size of a series term below which summation stops.
    pub series_tol: f64,
    pub max_terms: usize,
    /// Equal panels used to seed the adaptive quadrature of integral branches.
    pub quad_points: usize,
    /// `|z|` beyond which the Mittag-Leffler asymptotic expansion is tried
    /// on the negative axis.
    pub asymptotic_switch: f64,
    /// Relative tolerance for integral branches.
    pub quad_tol: f64,
}

impl Default for EvalPolicy {
    fn default() -> Self {
        Self {
            series_tol: 1e-16,
            max_terms: 2000,
            quad_points: 64,
            asymptotic_switch: 5.0,
            quad_tol: 1e-13,
        }
    }
}

impl EvalPolicy {
    pub fn new(series_tol: f64, max_terms: usize, quad_points: usize) -> Result<Self, SpecfunError> {
        if !(series_tol > 0.0) {
            return Err(domain("EvalPolicy", "series_tol must be > 0"));
        }
        if max_terms < 16 {
            return Err(domain("EvalPolicy", "max_terms must be >= 16"));
        }
        if quad_points < 32 {
            return Err(domain("EvalPolicy", "quad_points must be >= 32"));
        }
        Ok(Self {
            series_tol,
            max_terms,
            quad_points,
            ..Self::default()
        })
    }

    /// Oracle mode: series run until terms are far below double-precision
    /// resolution and quadratures are pushed to their limit.
    pub fn extended() -> Self {
        Self {
            series_tol: 1e-20,
            max_terms: 5000,
            quad_points: 128,
            asymptotic_switch: 5.0,
            quad_tol: 5e-15,
        }
    }

    fn quad_settings(&self) -> QuadSettings {
        QuadSettings {
            panels: self.quad_points,
            abs_tol: 0.0,
            rel_tol: self.quad_tol,
            max_intervals: 20_000,
        }
    }
}

/// A series is only trusted if its largest term is at most this multiple of
/// the result (about three digits lost to cancellation).
const CANCELLATION_LIMIT: f64 = 1e3;

/// `sin(pi x)` with argument reduction, exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    if x == x.floor() {
        return 0.0;
    }
    let r = x - 2.0 * (x / 2.0).round();
    (PI * r).sin()
}

/// `1/Gamma(x)` split as `(ln|1/Gamma(x)|, sign)`; `None` at the poles,
/// where the reciprocal is zero.
fn ln_abs_rgamma(x: f64) -> Option<(f64, f64)> {
    if x <= 0.0 && x == x.floor() {
        return None;
    }
    if x > 0.0 {
        return Some((-ln_gamma(x), 1.0));
    }
    let s = sin_pi(x);
    Some((s.abs().ln() + ln_gamma(1.0 - x) - PI.ln(), s.signum()))
}

/// Reciprocal Gamma function, zero at the non-positive integers.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    // (x-1)! is exact in f64 up to 22!.
    if x == x.floor() && x <= 23.0 {
        return 1.0 / (2..x as u64).fold(1.0, |p, k| p * k as f64);
    }
    if x.abs() < 160.0 {
        return 1.0 / gamma(x);
    }
    match ln_abs_rgamma(x) {
        Some((l, s)) => s * l.exp(),
        None => 0.0,
    }
}

#[derive(Debug, Clone, Copy)]
struct SeriesSum {
    value: f64,
    max_abs_term: f64,
}

/// Neumaier-compensated summation of `Σ term(j)`; stops once two
/// consecutive non-zero terms are below `series_tol` relative to the sum.
fn sum_series(
    policy: &EvalPolicy,
    function: &'static str,
    mut term: impl FnMut(usize) -> f64,
) -> Result<SeriesSum, SpecfunError> {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut max_abs_term = 0.0f64;
    let mut small_run = 0;
    for j in 0..policy.max_terms {
        let t = term(j);
        if !t.is_finite() {
            return Err(SpecfunError::NonConvergence { function, terms: j });
        }
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
        max_abs_term = max_abs_term.max(t.abs());
        if t != 0.0 {
            if t.abs() <= policy.series_tol * (sum + comp).abs() {
                small_run += 1;
                if small_run >= 2 {
                    return Ok(SeriesSum {
                        value: sum + comp,
                        max_abs_term,
                    });
                }
            } else {
                small_run = 0;
            }
        }
    }
    Err(SpecfunError::NonConvergence {
        function,
        terms: policy.max_terms,
    })
}

/// `z^j / j!` (or `z^j` when `factorial` is false) times `1/Gamma(arg)`,
/// switching to logarithms when the direct product would leave range.
struct PowerTerm {
    z: f64,
    factorial: bool,
    direct: f64,
    log_abs: f64,
}

impl PowerTerm {
    fn new(z: f64, factorial: bool) -> Self {
        Self {
            z,
            factorial,
            direct: 1.0,
            log_abs: 0.0,
        }
    }

    /// Advance to power `j` (must be called with j = 0, 1, 2, ...).
    fn at(&mut self, j: usize, rgamma_arg: f64) -> f64 {
        if j > 0 {
            let div = if self.factorial { j as f64 } else { 1.0 };
            self.direct *= self.z / div;
            self.log_abs += self.z.abs().ln() - div.ln();
        }
        let sign_z = if self.z < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
        if rgamma_arg.abs() < 160.0 && self.direct.abs() > 1e-280 && self.direct.abs() < 1e280 {
            return self.direct * rgamma(rgamma_arg);
        }
        match ln_abs_rgamma(rgamma_arg) {
            None => 0.0,
            Some((l, s)) => sign_z * s * (self.log_abs + l).exp(),
        }
    }
}

fn wright_series(kappa: f64, lambda: f64, z: f64, policy: &EvalPolicy) -> Result<SeriesSum, SpecfunError> {
    let mut p = PowerTerm::new(z, true);
    sum_series(policy, "wright", |j| p.at(j, kappa * j as f64 + lambda))
}

/// Wright function `W_{κ,λ}(z) = Σ z^j / (j! Γ(κ j + λ))`.
pub fn wright(kappa: f64, lambda: f64, z: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    if !(kappa > -1.0) {
        return Err(domain("wright", format!("kappa = {kappa} must exceed -1")));
    }
    if !lambda.is_finite() || !z.is_finite() {
        return Err(domain("wright", "non-finite argument"));
    }
    if z == 0.0 {
        return Ok(rgamma(lambda));
    }
    Ok(wright_series(kappa, lambda, z, policy)?.value)
}

/// Below this argument the Mainardi series is used directly.
const MAINARDI_SERIES_LIMIT: f64 = 1.0;

/// Mainardi function `M_α(z) = W_{-α,1-α}(-z)` for `z ≥ 0`.
pub fn mainardi(alpha: f64, z: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain("mainardi", format!("alpha = {alpha} not in (0,1)")));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(domain("mainardi", format!("z = {z} must be finite and >= 0")));
    }
    if z == 0.0 {
        return Ok(rgamma(1.0 - alpha));
    }
    if z <= MAINARDI_SERIES_LIMIT {
        if let Ok(s) = wright_series(-alpha, 1.0 - alpha, -z, policy) {
            if s.max_abs_term <= CANCELLATION_LIMIT * s.value.abs() {
                if s.value >= 0.0 {
                    return Ok(s.value);
                }
                if s.value.abs() < 10.0 * policy.series_tol {
                    log::warn!("mainardi: clamped round-off value {:e} to 0 at alpha={alpha}, z={z}", s.value);
                    return Ok(0.0);
                }
            }
        }
    }
    mainardi_integral(alpha, z, policy)
}

/// Non-oscillatory integral over `[0, π]` obtained from the one-sided stable
/// density; the integrand is non-negative so the result is too.
fn mainardi_integral(alpha: f64, z: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    let one_m = 1.0 - alpha;
    let k = z.powf(1.0 / one_m);
    let a_zero = one_m * alpha.powf(alpha / one_m);
    let shape = |phi: f64| -> f64 {
        if phi <= 0.0 {
            return a_zero;
        }
        let ln_ratio = (alpha * (alpha * phi).sin().ln() - phi.sin().ln()) / one_m;
        ln_ratio.exp() * (one_m * phi).sin()
    };
    let integrand = |phi: f64| -> f64 {
        let a = shape(phi);
        let e = k * a;
        if !a.is_finite() || e > 745.0 {
            0.0
        } else {
            a * (-e).exp()
        }
    };
    // Mass sits near phi = 0 for large k; give the adaptive rule a hint.
    let width = (4.0 / (k * a_zero).max(1e-300)).sqrt();
    let breaks = [width.min(PI / 2.0), (2.0 * width).min(PI / 2.0)];
    let r = quad::integrate_with_breaks(integrand, 0.0, PI, &breaks, policy.quad_settings())
        .map_err(|source| SpecfunError::Quadrature {
            function: "mainardi",
            source,
        })?;
    let prefactor = z.powf(alpha / one_m) / (one_m * PI);
    Ok((prefactor * r.value).max(0.0))
}

/// `∫_0^∞ t^γ M_α(t) dt` by adaptive quadrature up to a cutoff past which the
/// integrand is below `policy.quad_tol`. Should equal `Γ(1+γ)/Γ(1+αγ)`.
pub fn mainardi_moment(alpha: f64, gamma_exp: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    if !(gamma_exp > -1.0) {
        return Err(domain("mainardi_moment", format!("moment order {gamma_exp} must be > -1")));
    }
    let weighted = |t: f64| mainardi(alpha, t, policy).map(|m| t.powf(gamma_exp) * m);
    let mut cutoff = 2.0;
    while weighted(cutoff)? * cutoff > 1e-3 * policy.quad_tol {
        cutoff *= 1.5;
        if cutoff > 1e6 {
            return Err(domain("mainardi_moment", "tail does not decay".to_string()));
        }
    }
    let failure = std::cell::Cell::new(None);
    let integrand = |t: f64| match weighted(t) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let settings = QuadSettings {
        panels: 32,
        abs_tol: 1e-12,
        rel_tol: 1e-11,
        max_intervals: 4000,
    };
    let r = quad::integrate(integrand, 0.0, cutoff, settings);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    r.map(|r| r.value).map_err(|source| SpecfunError::Quadrature {
        function: "mainardi_moment",
        source,
    })
}

/// Mittag-Leffler function `E_{α,β}(z) = Σ z^j / Γ(α j + β)`.
pub fn mittag_leffler(alpha: f64, beta: f64, z: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(domain("mittag_leffler", format!("alpha = {alpha} not in (0,1]")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(domain("mittag_leffler", format!("beta = {beta} must be > 0")));
    }
    if z.is_nan() {
        return Err(domain("mittag_leffler", "z is NaN"));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(z.exp());
    }
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    if z > 0.0 {
        return Ok(ml_series(alpha, beta, z, policy)?.value);
    }
    // Negative axis.
    let x = -z;
    if alpha < 1.0 && x >= policy.asymptotic_switch {
        if let Some(v) = ml_asymptotic(alpha, beta, z, policy) {
            return Ok(v);
        }
    }
    let integral_ok = alpha < 1.0 && beta < 1.0 + alpha;
    match ml_series(alpha, beta, z, policy) {
        Ok(s) if s.max_abs_term <= CANCELLATION_LIMIT * s.value.abs() => Ok(s.value),
        Ok(_) | Err(_) if integral_ok => ml_negative_integral(alpha, beta, x, policy),
        Ok(s) => {
            log::warn!("mittag_leffler: series cancellation at alpha={alpha}, beta={beta}, z={z}");
            Ok(s.value)
        }
        Err(e) => Err(e),
    }
}

fn ml_series(alpha: f64, beta: f64, z: f64, policy: &EvalPolicy) -> Result<SeriesSum, SpecfunError> {
    let mut p = PowerTerm::new(z, false);
    sum_series(policy, "mittag_leffler", |j| p.at(j, alpha * j as f64 + beta))
}

/// `E_{α,β}(z) ≈ -Σ_{k≥1} z^{-k} / Γ(β - α k)` for large negative `z`.
/// Returns `None` if the expansion starts to diverge before reaching tolerance.
fn ml_asymptotic(alpha: f64, beta: f64, z: f64, policy: &EvalPolicy) -> Option<f64> {
    // |1/Γ(β-αk)| <= Γ(αk+1-β)/π bounds each term; individual terms can
    // vanish near poles, so convergence is judged on this envelope.
    let ln_abs_z = z.abs().ln();
    let zinv = 1.0 / z;
    let mut pow = 1.0;
    let mut sum = 0.0;
    let mut last_env = f64::INFINITY;
    for k in 1..policy.max_terms {
        let kf = k as f64;
        pow *= zinv;
        sum -= pow * rgamma(beta - alpha * kf);
        let arg = alpha * kf + 1.0 - beta;
        let ln_env = if arg > 0.0 { ln_gamma(arg) } else { 0.0 } - PI.ln() - kf * ln_abs_z;
        let env = ln_env.exp();
        if arg > 1.5 && env > last_env {
            return None;
        }
        last_env = env;
        if sum != 0.0 && env <= policy.series_tol.max(1e-17) * sum.abs() {
            return Some(sum);
        }
    }
    None
}

/// Laplace-type representation on the negative axis, valid for
/// `0 < α < 1`, `0 < β < 1 + α`:
/// `t^{β-1} E_{α,β}(-t^α) = ∫_0^∞ e^{-rt} K(r) dr` with a positive-denominator kernel.
/// The substitutions `r = u/t`, `u = w^{1/p}` (`p = 1+α-β`) remove the
/// endpoint singularity.
fn ml_negative_integral(alpha: f64, beta: f64, x: f64, policy: &EvalPolicy) -> Result<f64, SpecfunError> {
    let t = x.powf(1.0 / alpha);
    let p = 1.0 + alpha - beta;
    let sb = sin_pi(beta);
    let sba = sin_pi(beta - alpha);
    let ca = (PI * alpha).cos();
    let sa = (PI * alpha).sin();
    let integrand = |w: f64| -> f64 {
        let u = w.powf(1.0 / p);
        let ra = (u / t).powf(alpha);
        let d = (ra + ca) * (ra + ca) + sa * sa;
        (-u).exp() * (ra * sb + sba) / d
    };
    let upper = 46f64.powf(p);
    let peak = t.powf(p);
    let breaks = [peak, 0.5 * peak, 2.0 * peak];
    let r = quad::integrate_with_breaks(integrand, 0.0, upper, &breaks, policy.quad_settings())
        .map_err(|source| SpecfunError::Quadrature {
            function: "mittag_leffler",
            source,
        })?;
    Ok(t.powf(-alpha) / (p * PI) * r.value)
}

/// Beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn(a: f64, b: f64) -> Result<f64, SpecfunError> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain("beta_fn", format!("arguments ({a}, {b}) must be positive")));
    }
    if a + b < 170.0 {
        Ok(gamma(a) * gamma(b) / gamma(a + b))
    } else {
        Ok((ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp())
    }
}
