//! Jacobi-preconditioned conjugate gradients for the grid's symmetric
//! positive (semi)definite systems.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("CG stopped after {iterations} iterations with residual {residual:e}")]
pub struct CgFailure {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CgSettings {
    /// Stop when `‖r‖₂ ≤ rel_tol ‖b‖₂` ...
    pub rel_tol: f64,
    /// ... and `‖r‖∞ ≤ abs_tol_inf`.
    pub abs_tol_inf: f64,
    pub max_iter: usize,
    /// Keep iterates and residuals mean-free (singular Neumann operators).
    pub mean_free: bool,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_inf: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `A x = b`; `apply(x, out)` writes `A x`, `diag` is the diagonal of `A`.
pub fn pcg<F>(apply: F, diag: &[f64], b: &[f64], x0: Option<&[f64]>, s: CgSettings) -> Result<CgOutcome, CgFailure>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut b = b.to_vec();
    if s.mean_free {
        remove_mean(&mut b);
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    if s.mean_free {
        remove_mean(&mut x);
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    if s.mean_free {
        remove_mean(&mut r);
    }
    let bnorm = dot(&b, &b).sqrt();
    let done = |r: &[f64]| dot(r, r).sqrt() <= s.rel_tol * bnorm && inf_norm(r) <= s.abs_tol_inf;
    if done(&r) {
        return Ok(CgOutcome {
            residual_inf: inf_norm(&r),
            x,
            iterations: 0,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, d)| ri / d).collect();
    if s.mean_free {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=s.max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(CgFailure {
                iterations: it,
                residual: inf_norm(&r),
            });
        }
        let a = rz / pap;
        for k in 0..n {
            x[k] += a * p[k];
            r[k] -= a * ap[k];
        }
        if s.mean_free {
            remove_mean(&mut r);
        }
        if done(&r) {
            if s.mean_free {
                remove_mean(&mut x);
            }
            return Ok(CgOutcome {
                residual_inf: inf_norm(&r),
                x,
                iterations: it,
            });
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        if s.mean_free {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(CgFailure {
        iterations: s.max_iter,
        residual: inf_norm(&r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(mean_free: bool) -> CgSettings {
        CgSettings {
            rel_tol: 1e-12,
            abs_tol_inf: 1e-12,
            max_iter: 500,
            mean_free,
        }
    }

    #[test]
    fn solves_spd_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                out[i] = 3.0 * x[i] - l - r;
            }
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&truth, &mut b);
        let out = pcg(apply, &vec![3.0; n], &b, None, settings(false)).unwrap();
        assert!(out.x.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn singular_neumann_chain() {
        let n = 40;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i] - x[i + 1] } else { 0.0 };
                out[i] = l + r;
            }
        };
        let mut truth: Vec<f64> = (0..n).map(|i| (i as f64).powi(2) / 100.0).collect();
        remove_mean(&mut truth);
        let mut b = vec![0.0; n];
        apply(&truth, &mut b);
        let diag: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 1.0 } else { 2.0 }).collect();
        let out = pcg(apply, &diag, &b, None, settings(true)).unwrap();
        assert!(out.x.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn reports_budget_exhaustion() {
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..x.len() {
                out[i] = (i + 1) as f64 * x[i];
            }
        };
        let s = CgSettings {
            max_iter: 1,
            ..settings(false)
        };
        let b: Vec<f64> = (0..10).map(|i| i as f64 + 1.0).collect();
        assert!(pcg(apply, &[1.0; 10], &b, None, s).is_err());
    }
}
