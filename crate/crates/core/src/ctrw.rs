//! One-dimensional continuous-time random walk on a lattice: Pareto waiting
//! times, jumps to a neighbour chosen by the slime profile, and reflecting
//! or absorbing ends.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtrwError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("jump weights vanish around site {site}")]
    DegenerateProfile { site: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitingLaw {
    pub alpha: f64,
    pub tau: f64,
}

impl WaitingLaw {
    pub fn new(alpha: f64, tau: f64) -> Result<Self, CtrwError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CtrwError::InvalidParameter(format!("alpha = {alpha} not in (0,1)")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CtrwError::InvalidParameter(format!("tau = {tau} must be > 0")));
        }
        Ok(Self { alpha, tau })
    }

    /// Inverse-CDF draw `τ u^{-1/α}`; `u → 1` gives the minimum wait `τ`.
    pub fn sample_wait(&self, uniform_draw: f64) -> f64 {
        self.tau * uniform_draw.powf(-1.0 / self.alpha)
    }

    /// Coefficient `A` in the tail `ψ(t) ≈ A / t^{1+α}`; `ατ^α` for Pareto.
    pub fn tail_amplitude(&self) -> f64 {
        self.alpha * self.tau.powf(self.alpha)
    }

    /// `α / Γ(1-α)`.
    pub fn d_alpha(&self) -> f64 {
        self.alpha / gamma(1.0 - self.alpha)
    }

    /// Macroscale diffusivity `D_α δx² / (2A)` for lattice spacing `dx`.
    pub fn diffusivity(&self, dx: f64) -> f64 {
        self.d_alpha() * dx * dx / (2.0 * self.tail_amplitude())
    }

    /// Macroscale chemotactic coefficient, twice the diffusivity.
    pub fn chemotactic_coefficient(&self, dx: f64) -> f64 {
        2.0 * self.diffusivity(dx)
    }

    /// The law whose diffusivity on spacing `dx` equals `diffusivity`.
    pub fn for_diffusivity(alpha: f64, dx: f64, diffusivity: f64) -> Result<Self, CtrwError> {
        if !(diffusivity > 0.0 && dx > 0.0) {
            return Err(CtrwError::InvalidParameter("diffusivity and dx must be > 0".into()));
        }
        // D = δx² / (2 Γ(1-α) τ^α)
        let tau_alpha = dx * dx / (2.0 * gamma(1.0 - alpha) * diffusivity);
        Self::new(alpha, tau_alpha.powf(1.0 / alpha))
    }
}

/// Free-function form of [`WaitingLaw::sample_wait`].
pub fn sample_wait(law: &WaitingLaw, uniform_draw: f64) -> f64 {
    law.sample_wait(uniform_draw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sensitivity {
    /// `v = c`, sensitivity `1/c`.
    Identity,
    /// `v = exp(βc)`, sensitivity `β`.
    Exponential { beta: f64 },
}

impl Sensitivity {
    pub fn v(self, c: f64) -> f64 {
        match self {
            Sensitivity::Identity => c,
            Sensitivity::Exponential { beta } => (beta * c).exp(),
        }
    }

    pub fn chi(self, c: f64) -> f64 {
        match self {
            Sensitivity::Identity => 1.0 / c,
            Sensitivity::Exponential { beta } => beta,
        }
    }
}

/// Static slime concentration at the lattice sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlimeProfile {
    c: Vec<f64>,
    sensitivity: Sensitivity,
    v: Vec<f64>,
}

impl SlimeProfile {
    pub fn new(c: Vec<f64>, sensitivity: Sensitivity) -> Result<Self, CtrwError> {
        if c.len() < 2 {
            return Err(CtrwError::InvalidParameter("lattice needs at least 2 sites".into()));
        }
        if let Some(k) = c.iter().position(|x| !x.is_finite()) {
            return Err(CtrwError::InvalidParameter(format!("c[{k}] is not finite")));
        }
        if sensitivity == Sensitivity::Identity {
            if let Some(k) = c.iter().position(|&x| x <= 0.0) {
                return Err(CtrwError::InvalidParameter(format!(
                    "identity sensitivity needs c > 0, c[{k}] = {}",
                    c[k]
                )));
            }
        }
        let v = c.iter().map(|&x| sensitivity.v(x)).collect();
        Ok(Self { c, sensitivity, v })
    }

    pub fn uniform(sites: usize, value: f64) -> Result<Self, CtrwError> {
        Self::new(vec![value; sites], Sensitivity::Identity)
    }

    pub fn sites(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn sensitivity(&self) -> Sensitivity {
        self.sensitivity
    }

    /// Profile reflected about the lattice centre.
    pub fn mirrored(&self) -> Self {
        let mut c = self.c.clone();
        c.reverse();
        Self::new(c, self.sensitivity).expect("mirror of a valid profile is valid")
    }

    /// `v` at a neighbour; off-lattice neighbours mirror the end site.
    fn v_at(&self, site: isize) -> f64 {
        let last = self.v.len() as isize - 1;
        self.v[site.clamp(0, last) as usize]
    }
}

/// `(p_left, p_right)` with `p_left = v(x-δx) / (v(x-δx) + v(x+δx))`. At an
/// end site the missing neighbour takes the end site's own value. The larger
/// probability is computed by division and the other as its complement, so
/// the two sum to exactly 1.
pub fn jump_probs(profile: &SlimeProfile, site: usize) -> Result<(f64, f64), CtrwError> {
    let s = site as isize;
    let vl = profile.v_at(s - 1);
    let vr = profile.v_at(s + 1);
    let total = vl + vr;
    if !(total > 0.0) || !total.is_finite() {
        return Err(CtrwError::DegenerateProfile { site });
    }
    if vl >= vr {
        let pl = vl / total;
        Ok((pl, 1.0 - pl))
    } else {
        let pr = vr / total;
        Ok((1.0 - pr, pr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundaryMode {
    /// Outward jumps are rejected and the walker stays put.
    #[default]
    Reflecting,
    /// Walkers leaving the lattice are removed from further motion.
    Absorbing,
}

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub positions: Vec<usize>,
    pub origins: Vec<usize>,
    pub next_event_times: Vec<f64>,
    pub absorbed: Vec<bool>,
    /// Time up to which the ensemble has been evolved.
    pub time: f64,
    rng_streams: Vec<ChaCha8Rng>,
    shard_len: usize,
}

impl ParticleEnsemble {
    /// Walkers start at `sites` with clocks set to a first wait drawn from
    /// `law`. Shard `s` owns a contiguous block of walkers and RNG stream `s`.
    pub fn new(sites: Vec<usize>, law: &WaitingLaw, seed: u64, shards: usize) -> Result<Self, CtrwError> {
        if sites.is_empty() {
            return Err(CtrwError::InvalidParameter("ensemble needs at least one walker".into()));
        }
        let shards = shards.clamp(1, sites.len());
        let shard_len = sites.len().div_ceil(shards);
        let shards = sites.len().div_ceil(shard_len);
        let mut rng_streams: Vec<ChaCha8Rng> = (0..shards)
            .map(|s| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(s as u64);
                r
            })
            .collect();
        let mut next_event_times = vec![0.0; sites.len()];
        for (chunk, rng) in next_event_times.chunks_mut(shard_len).zip(rng_streams.iter_mut()) {
            for t in chunk {
                *t = law.sample_wait(open_unit(rng));
            }
        }
        Ok(Self {
            origins: sites.clone(),
            absorbed: vec![false; sites.len()],
            positions: sites,
            next_event_times,
            time: 0.0,
            rng_streams,
            shard_len,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn shards(&self) -> usize {
        self.rng_streams.len()
    }

    pub fn active(&self) -> usize {
        self.absorbed.iter().filter(|a| !**a).count()
    }

    /// Mean squared displacement in lattice units over non-absorbed walkers.
    pub fn msd_sites(&self) -> f64 {
        let (s, k) = self
            .positions
            .iter()
            .zip(&self.origins)
            .zip(&self.absorbed)
            .filter(|(_, a)| !**a)
            .fold((0.0, 0usize), |(s, k), ((&p, &o), _)| {
                let d = p as f64 - o as f64;
                (s + d * d, k + 1)
            });
        if k == 0 {
            0.0
        } else {
            s / k as f64
        }
    }

    /// Mean displacement and its standard error, lattice units.
    pub fn mean_displacement(&self) -> (f64, f64) {
        let d: Vec<f64> = self
            .positions
            .iter()
            .zip(&self.origins)
            .map(|(&p, &o)| p as f64 - o as f64)
            .collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

/// Uniform draw in `(0, 1]`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Runs every walker until its next jump would happen after `t_end`.
pub fn evolve(
    ensemble: &mut ParticleEnsemble,
    law: &WaitingLaw,
    profile: &SlimeProfile,
    mode: BoundaryMode,
    t_end: f64,
) -> Result<(), CtrwError> {
    if !(t_end > 0.0) {
        return Err(CtrwError::InvalidParameter(format!("t_end = {t_end} must be > 0")));
    }
    let sites = profile.sites();
    if let Some(&bad) = ensemble.positions.iter().find(|&&p| p >= sites) {
        return Err(CtrwError::InvalidParameter(format!("walker at site {bad} outside {sites}-site lattice")));
    }
    let p_left: Vec<f64> = (0..sites)
        .map(|s| jump_probs(profile, s).map(|p| p.0))
        .collect::<Result<_, _>>()?;
    let n = ensemble.shard_len;
    ensemble
        .positions
        .par_chunks_mut(n)
        .zip(ensemble.next_event_times.par_chunks_mut(n))
        .zip(ensemble.absorbed.par_chunks_mut(n))
        .zip(ensemble.rng_streams.par_iter_mut())
        .for_each(|(((pos, clock), gone), rng)| {
            for ((x, t), a) in pos.iter_mut().zip(clock.iter_mut()).zip(gone.iter_mut()) {
                if *a {
                    continue;
                }
                while *t <= t_end {
                    let left = rng.random::<f64>() < p_left[*x];
                    let target = if left { x.checked_sub(1) } else { Some(*x + 1).filter(|&y| y < sites) };
                    match (target, mode) {
                        (Some(y), _) => *x = y,
                        (None, BoundaryMode::Reflecting) => {}
                        (None, BoundaryMode::Absorbing) => {
                            *a = true;
                            break;
                        }
                    }
                    *t += law.sample_wait(open_unit(rng));
                }
            }
        });
    ensemble.time = ensemble.time.max(t_end);
    Ok(())
}

/// Normalised histogram of walker positions `x = (site + ½)·dx` over
/// `bins` equal bins on `[lo, hi]`; integrates to 1 over the bins. Absorbed
/// walkers are excluded, so the integral is the surviving fraction.
pub fn density_histogram(ensemble: &ParticleEnsemble, dx: f64, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for (&p, &a) in ensemble.positions.iter().zip(&ensemble.absorbed) {
        if a {
            continue;
        }
        let x = (p as f64 + 0.5) * dx;
        let k = ((x - lo) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let norm = 1.0 / (ensemble.len() as f64 * width);
    counts.into_iter().map(|c| c as f64 * norm).collect()
}

/// Deterministic stratified placement of `count` walkers following a
/// non-negative per-site weight: walker `k` goes to the site where the
/// cumulative weight first reaches `(k + ½)/count`.
pub fn stratified_sites(weights: &[f64], count: usize) -> Result<Vec<usize>, CtrwError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(CtrwError::InvalidParameter("weights must be non-negative with positive sum".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut site = 0;
    let mut cum = weights[0] / total;
    for k in 0..count {
        let target = (k as f64 + 0.5) / count as f64;
        while cum < target && site + 1 < weights.len() {
            site += 1;
            cum += weights[site] / total;
        }
        out.push(site);
    }
    Ok(out)
}

/// MSD (lattice units squared) after evolving to each of `times` in turn.
pub fn msd_series(
    ensemble: &mut ParticleEnsemble,
    law: &WaitingLaw,
    profile: &SlimeProfile,
    mode: BoundaryMode,
    times: &[f64],
) -> Result<Vec<f64>, CtrwError> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        evolve(ensemble, law, profile, mode, t)?;
        out.push(ensemble.msd_sites());
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
