//! Experiment recipes. Each returns its measurements plus pass/fail lines
//! against fixed tolerances, and writes CSV reports and `summary.txt`.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::ctrw::{self, BoundaryMode, ParticleEnsemble, SlimeProfile, WaitingLaw};
use crate::fields::{self, Grid2D, ScalarBc, ScalarField, VectorField};
use crate::ks_macro::{ChiModel, KsError, KsParams, KsSolver, KsState};
use crate::mild_verify::{contraction_ratio, duhamel_picard, PicardParams};
use crate::specfun::EvalPolicy;

use super::config::{InitSpec, MonitorConfig, SimConfig, DIM};
use super::coupled::initial_field;
use super::monitor::{monitor_csv, Monitor, MonitorRecord};
use super::output::{slime_profile, write_text, xy_csv, Summary};
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CriterionLine {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value < tolerance,
        }
    }
}

impl fmt::Display for CriterionLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.6e} (tolerance {:.3e})", self.name, self.value, self.tolerance)
    }
}

fn finish(dir: &Path, mut summary: Summary, lines: &[CriterionLine]) -> Result<Summary, HarnessError> {
    for l in lines {
        summary.push(&l.name, l);
    }
    summary.push("overall", if lines.iter().all(|l| l.pass) { "PASS" } else { "FAIL" });
    summary.write(dir)?;
    Ok(summary)
}

/// Log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, count: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|k| (la + (lb - la) * k as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

// ---------------------------------------------------------------- micro-macro

#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacroParams {
    pub alpha: f64,
    pub sites: usize,
    pub particles: usize,
    pub diffusivity: f64,
    /// `g(c) = exp(βc)` with `c = x` in the gradient case.
    pub gradient_beta: f64,
    pub bins: usize,
    pub times: Vec<f64>,
    pub macro_dt: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub shards: usize,
    pub seed: u64,
    pub msd_particles: usize,
    pub msd_sites: usize,
    pub msd_tau: f64,
    pub msd_t0: f64,
    pub msd_t1: f64,
    pub msd_points: usize,
}

impl Default for MicroMacroParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            sites: 200,
            particles: 100_000,
            diffusivity: 0.01,
            gradient_beta: 5.0,
            bins: 50,
            times: vec![0.5, 1.0],
            macro_dt: 1e-3,
            bump_center: 0.5,
            bump_width: 0.1,
            shards: 64,
            seed: 7,
            msd_particles: 20_000,
            msd_sites: 4001,
            msd_tau: 1e-6,
            msd_t0: 1e-3,
            msd_t1: 1.0,
            msd_points: 16,
        }
    }
}

impl MicroMacroParams {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, HarnessError> {
        let d = Self::default();
        Ok(Self {
            alpha: cfg.extra_f64("alpha", d.alpha)?,
            sites: cfg.extra_usize("sites", d.sites)?,
            particles: cfg.extra_usize("particles", d.particles)?,
            diffusivity: cfg.extra_f64("diffusivity", d.diffusivity)?,
            gradient_beta: cfg.extra_f64("gradient_beta", d.gradient_beta)?,
            bins: cfg.extra_usize("bins", d.bins)?,
            macro_dt: cfg.extra_f64("macro_dt", d.macro_dt)?,
            msd_particles: cfg.extra_usize("msd_particles", d.msd_particles)?,
            seed: cfg.seed,
            ..d
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacroRow {
    pub case: &'static str,
    pub t: f64,
    pub l1: f64,
}

#[derive(Debug, Clone)]
pub struct MicroMacroReport {
    pub rows: Vec<MicroMacroRow>,
    pub msd_times: Vec<f64>,
    pub msd: Vec<f64>,
    pub msd_slope: f64,
    pub tau: f64,
    pub diffusivity: f64,
    pub chemotactic_coefficient: f64,
    pub criteria: Vec<CriterionLine>,
    pub summary: Summary,
}

/// Bin averages of a per-site density, renormalised to unit integral.
fn bin_density(per_site: &[f64], bins: usize, lx: f64) -> Vec<f64> {
    let per_bin = per_site.len() / bins;
    let raw: Vec<f64> = (0..bins)
        .map(|b| per_site[b * per_bin..(b + 1) * per_bin].iter().sum::<f64>() / per_bin as f64)
        .collect();
    let width = lx / bins as f64;
    let total: f64 = raw.iter().sum::<f64>() * width;
    raw.iter().map(|v| v / total).collect()
}

pub fn l1_distance(a: &[f64], b: &[f64], width: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * width
}

/// 1D CTRW ensembles against the macroscale fractional equation with the
/// matching `𝒟`, `𝒯`, for a uniform and an exponential slime profile; then
/// the MSD exponent on a long lattice.
pub fn micro_macro(p: &MicroMacroParams, dir: &Path) -> Result<MicroMacroReport, HarnessError> {
    fs::create_dir_all(dir)?;
    if !p.sites.is_multiple_of(p.bins) {
        return Err(HarnessError::Config(format!("sites = {} must be a multiple of bins = {}", p.sites, p.bins)));
    }
    let lx = 1.0;
    let dx = lx / p.sites as f64;
    let law = WaitingLaw::for_diffusivity(p.alpha, dx, p.diffusivity)?;
    let xs: Vec<f64> = (0..p.sites).map(|i| (i as f64 + 0.5) * dx).collect();
    let weights: Vec<f64> = xs
        .iter()
        .map(|x| (-(x - p.bump_center).powi(2) / (2.0 * p.bump_width * p.bump_width)).exp())
        .collect();
    let grid = Grid2D::new(p.sites, 4, lx, 4.0 * dx)?;
    let bin_w = lx / p.bins as f64;
    let centres: Vec<f64> = (0..p.bins).map(|b| (b as f64 + 0.5) * bin_w).collect();
    let mut rows = Vec::new();

    for (case, slope) in [("uniform", 0.0), ("gradient", 1.0)] {
        let profile = slime_profile(&xs, 0.0, slope, p.gradient_beta)?;
        let mut ens = ParticleEnsemble::new(ctrw::stratified_sites(&weights, p.particles)?, &law, p.seed, p.shards)?;

        let params = KsParams {
            diffusion_n: law.diffusivity(dx),
            chemotaxis: law.chemotactic_coefficient(dx),
            static_c: true,
            ..KsParams::new(p.alpha, 0.0, ChiModel::ConstBeta(p.gradient_beta))?
        };
        let solver = KsSolver::new(params, grid)?;
        let n0 = ScalarField::from_fn(grid, ScalarBc::Neumann0, |x, _| {
            (-(x - p.bump_center).powi(2) / (2.0 * p.bump_width * p.bump_width)).exp()
        });
        let c0 = ScalarField::from_fn(grid, ScalarBc::Neumann0, |x, _| slope * x);
        let mut state = KsState::new(n0, c0, p.macro_dt)?;
        let u = VectorField::zeros(grid);

        for &t in &p.times {
            ctrw::evolve(&mut ens, &law, &profile, BoundaryMode::Reflecting, t)?;
            let hist = ctrw::density_histogram(&ens, dx, 0.0, lx, p.bins);
            let target = (t / p.macro_dt).round() as usize;
            while state.steps() < target {
                solver.step(&mut state, &u)?;
            }
            let column: Vec<f64> = (0..p.sites)
                .map(|i| (0..grid.ny).map(|j| state.n.at(i, j)).sum::<f64>() / grid.ny as f64)
                .collect();
            let macro_bins = bin_density(&column, p.bins, lx);
            let l1 = l1_distance(&hist, &macro_bins, bin_w);
            let mut csv = String::from("x,ctrw,macro\n");
            for b in 0..p.bins {
                csv.push_str(&format!("{:e},{:e},{:e}\n", centres[b], hist[b], macro_bins[b]));
            }
            write_text(dir, &format!("micro_macro_{case}_t{t}.csv"), &csv)?;
            rows.push(MicroMacroRow { case, t, l1 });
        }
    }

    // MSD on a lattice wide enough that no walker meets the ends.
    let msd_law = WaitingLaw::new(p.alpha, p.msd_tau)?;
    let flat = SlimeProfile::uniform(p.msd_sites, 1.0)?;
    let mut ens = ParticleEnsemble::new(vec![p.msd_sites / 2; p.msd_particles], &msd_law, p.seed ^ 0x5eed, p.shards)?;
    let msd_times = log_space(p.msd_t0, p.msd_t1, p.msd_points);
    let msd = ctrw::msd_series(&mut ens, &msd_law, &flat, BoundaryMode::Reflecting, &msd_times)?;
    let msd_slope = ctrw::log_log_slope(&msd_times, &msd);
    write_text(dir, "msd.csv", &xy_csv(("t", "msd"), &msd_times, &msd))?;

    let mut criteria: Vec<CriterionLine> = rows
        .iter()
        .map(|r| CriterionLine::below(&format!("micro_macro_l1_{}_t{}", r.case, r.t), r.l1, 0.05))
        .collect();
    criteria.push(CriterionLine::below("msd_exponent_error", (msd_slope - p.alpha).abs(), 0.05));
    let mut s = Summary::default();
    s.push("experiment", "micro_macro");
    s.push("alpha", p.alpha);
    s.push("tau", law.tau);
    s.push("diffusivity", law.diffusivity(dx));
    s.push("chemotactic_coefficient", law.chemotactic_coefficient(dx));
    s.push("msd_slope", msd_slope);
    let summary = finish(dir, s, &criteria)?;
    Ok(MicroMacroReport {
        rows,
        msd_times,
        msd,
        msd_slope,
        tau: law.tau,
        diffusivity: law.diffusivity(dx),
        chemotactic_coefficient: law.chemotactic_coefficient(dx),
        criteria,
        summary,
    })
}

// ---------------------------------------------------------------- alpha limit

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaLimitParams {
    pub nx: usize,
    pub t_end: f64,
    pub dt: f64,
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub mass: f64,
    pub width: f64,
}

impl Default for AlphaLimitParams {
    fn default() -> Self {
        Self {
            nx: 64,
            t_end: 0.5,
            dt: 2e-3,
            alphas: vec![0.9, 0.99, 0.999],
            gamma: 1.0,
            mass: 5.0,
            width: 0.1,
        }
    }
}

impl AlphaLimitParams {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, HarnessError> {
        let d = Self::default();
        Ok(Self {
            nx: cfg.extra_usize("nx", d.nx)?,
            t_end: cfg.extra_f64("t_end", d.t_end)?,
            dt: cfg.extra_f64("dt", d.dt)?,
            gamma: cfg.extra_f64("gamma", d.gamma)?,
            mass: cfg.extra_f64("mass", d.mass)?,
            width: cfg.extra_f64("width", d.width)?,
            ..d
        })
    }
}

#[derive(Debug, Clone)]
pub struct AlphaLimitReport {
    /// `(α, max over steps of the relative sup-norm difference)`.
    pub rows: Vec<(f64, f64)>,
    pub criteria: Vec<CriterionLine>,
    pub summary: Summary,
}

fn rel_sup(a: &ScalarField, b: &ScalarField) -> f64 {
    let d = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    d / b.max_abs().max(f64::MIN_POSITIVE)
}

/// Fractional L1 stepper against backward Euler on the same KS problem
/// (no fluid); the difference is `max_k max(‖Δn‖∞/‖n‖∞, ‖Δc‖∞/‖c‖∞)`.
pub fn alpha_limit(p: &AlphaLimitParams, dir: &Path) -> Result<AlphaLimitReport, HarnessError> {
    fs::create_dir_all(dir)?;
    let grid = Grid2D::unit_square(p.nx)?;
    let n0 = initial_field(
        &InitSpec::GaussianBump {
            cx: 0.5,
            cy: 0.5,
            width: p.width,
            mass: p.mass,
        },
        grid,
    )?;
    let c0 = ScalarField::zeros(grid, ScalarBc::Neumann0);
    let u = VectorField::zeros(grid);
    let steps = (p.t_end / p.dt).round() as usize;

    // Classical reference trajectory, computed once.
    let reference = KsSolver::new(KsParams::new(0.5, p.gamma, ChiModel::Unit)?, grid)?;
    let mut classical = Vec::with_capacity(steps);
    let (mut n, mut c) = (n0.clone(), c0.clone());
    for _ in 0..steps {
        (n, c) = reference.classical_reference_step(&n, &c, &u, p.dt)?;
        classical.push((n.clone(), c.clone()));
    }

    let mut rows = Vec::new();
    for &alpha in &p.alphas {
        let solver = KsSolver::new(KsParams::new(alpha, p.gamma, ChiModel::Unit)?, grid)?;
        let mut state = KsState::new(n0.clone(), c0.clone(), p.dt)?;
        let mut worst = 0.0f64;
        for (cn, cc) in &classical {
            solver.step(&mut state, &u)?;
            worst = worst.max(rel_sup(&state.n, cn)).max(rel_sup(&state.c, cc));
        }
        rows.push((alpha, worst));
    }
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.1).collect();
    write_text(dir, "alpha_limit.csv", &xy_csv(("alpha", "max_rel_diff"), &a, &d))?;

    let mut criteria = Vec::new();
    if let Some(&(alpha, diff)) = rows.iter().max_by(|x, y| x.0.total_cmp(&y.0)) {
        criteria.push(CriterionLine::below(&format!("alpha_limit_diff_at_{alpha}"), diff, 1e-2));
    }
    // Monotone decrease as α → 1: report the largest successive ratio.
    let mut sorted = rows.clone();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let worst_ratio = sorted.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0f64, f64::max);
    criteria.push(CriterionLine::below("alpha_limit_successive_ratio", worst_ratio, 1.0));
    let mut s = Summary::default();
    s.push("experiment", "alpha_limit");
    for (alpha, diff) in &rows {
        s.push(&format!("max_rel_diff_alpha_{alpha}"), format!("{diff:e}"));
    }
    let summary = finish(dir, s, &criteria)?;
    Ok(AlphaLimitReport { rows, criteria, summary })
}

// ---------------------------------------------------------- picard vs stepper

#[derive(Debug, Clone, PartialEq)]
pub struct PicardVsStepperParams {
    pub nx: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub t_end: f64,
    pub steps: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub n0: InitSpec,
    pub c0: InitSpec,
}

impl Default for PicardVsStepperParams {
    fn default() -> Self {
        Self {
            nx: 16,
            alpha: 0.6,
            gamma: 1.0,
            t_end: 0.05,
            steps: 50,
            max_iters: 40,
            tol: 1e-12,
            n0: InitSpec::CosineMode {
                j: 1,
                k: 1,
                amp: 0.05,
                offset: 0.1,
            },
            c0: InitSpec::CosineMode {
                j: 1,
                k: 0,
                amp: 0.05,
                offset: 0.1,
            },
        }
    }
}

impl PicardVsStepperParams {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, HarnessError> {
        let d = Self::default();
        Ok(Self {
            nx: cfg.extra_usize("nx", d.nx)?,
            alpha: cfg.extra_f64("alpha", d.alpha)?,
            gamma: cfg.extra_f64("gamma", d.gamma)?,
            t_end: cfg.extra_f64("t_end", d.t_end)?,
            steps: cfg.extra_usize("steps", d.steps)?,
            ..d
        })
    }
}

#[derive(Debug, Clone)]
pub struct PicardVsStepperReport {
    pub distances: Vec<f64>,
    pub ratio: f64,
    pub converged: bool,
    pub relative_l2: f64,
    pub criteria: Vec<CriterionLine>,
    pub summary: Summary,
}

fn l2_sq(f: &ScalarField) -> f64 {
    fields::inner(f, f)
}

/// Picard limit against the L1 stepper on the same grid and time levels,
/// `u = 0`. The difference is the joint relative `L²` error of `(n, c)` at `T`.
pub fn picard_vs_stepper(p: &PicardVsStepperParams, dir: &Path) -> Result<PicardVsStepperReport, HarnessError> {
    fs::create_dir_all(dir)?;
    let grid = Grid2D::unit_square(p.nx)?;
    let n0 = initial_field(&p.n0, grid)?;
    let c0 = initial_field(&p.c0, grid)?;
    let u = VectorField::zeros(grid);
    let pp = PicardParams {
        alpha: p.alpha,
        gamma: p.gamma,
        t_end: p.t_end,
        steps: p.steps,
        max_iters: p.max_iters,
        tol: p.tol,
        rho: 2.0,
        q: 5.0,
    };
    let pic = duhamel_picard(&n0, &c0, &u, &pp, &EvalPolicy::default())?;
    let ratio = contraction_ratio(&pic.distances);

    let solver = KsSolver::new(KsParams::new(p.alpha, p.gamma, ChiModel::Unit)?, grid)?;
    let mut state = KsState::new(n0, c0, p.t_end / p.steps as f64)?;
    for _ in 0..p.steps {
        solver.step(&mut state, &u)?;
    }
    let last = pic.times.len() - 1;
    let dn = state.n.with_values(state.n.values.iter().zip(&pic.n[last].values).map(|(a, b)| a - b).collect());
    let dc = state.c.with_values(state.c.values.iter().zip(&pic.c[last].values).map(|(a, b)| a - b).collect());
    let relative_l2 = ((l2_sq(&dn) + l2_sq(&dc)) / (l2_sq(&pic.n[last]) + l2_sq(&pic.c[last]))).sqrt();

    let iters: Vec<f64> = (1..=pic.distances.len()).map(|k| k as f64).collect();
    write_text(dir, "picard_distances.csv", &xy_csv(("iteration", "distance"), &iters, &pic.distances))?;
    let t = pic.times[last];
    fields::write_snapshot(&dir.join("n_picard.csv"), &pic.n[last], "n", t)?;
    fields::write_snapshot(&dir.join("n_stepper.csv"), &state.n, "n", t)?;
    fields::write_snapshot(&dir.join("c_picard.csv"), &pic.c[last], "c", t)?;
    fields::write_snapshot(&dir.join("c_stepper.csv"), &state.c, "c", t)?;

    let criteria = vec![
        CriterionLine::below("picard_contraction_ratio", ratio, 1.0),
        CriterionLine::below("picard_vs_stepper_rel_l2", relative_l2, 1e-2),
    ];
    let mut s = Summary::default();
    s.push("experiment", "picard_vs_stepper");
    s.push("iterations", pic.distances.len());
    s.push("converged", pic.converged);
    let summary = finish(dir, s, &criteria)?;
    Ok(PicardVsStepperReport {
        distances: pic.distances,
        ratio,
        converged: pic.converged,
        relative_l2,
        criteria,
        summary,
    })
}

// ----------------------------------------------------------- blow-up dichotomy

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupParams {
    pub nx: usize,
    pub mass: f64,
    /// The second run uses `mass / reduction`.
    pub reduction: f64,
    pub width: f64,
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub monitor: MonitorConfig,
}

impl Default for BlowupParams {
    fn default() -> Self {
        let (rho, q) = (2.0, 5.0);
        Self {
            nx: 64,
            mass: 100.0,
            reduction: 10.0,
            width: 0.1,
            gamma: 1.0,
            dt: 1e-4,
            t_end: 0.2,
            monitor: MonitorConfig {
                rho,
                q,
                threshold: 1e4,
                beta: DIM as f64 / (2.0 * rho * q),
            },
        }
    }
}

impl BlowupParams {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, HarnessError> {
        let d = Self::default();
        Ok(Self {
            nx: cfg.extra_usize("nx", d.nx)?,
            mass: cfg.extra_f64("mass", d.mass)?,
            reduction: cfg.extra_f64("reduction", d.reduction)?,
            width: cfg.extra_f64("width", d.width)?,
            dt: cfg.extra_f64("dt", d.dt)?,
            t_end: cfg.extra_f64("t_end", d.t_end)?,
            monitor: MonitorConfig {
                threshold: cfg.extra_f64("threshold", d.monitor.threshold)?,
                ..d.monitor
            },
            ..d
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupRun {
    pub mass: f64,
    pub flagged: bool,
    pub t_max: Option<f64>,
    pub t_reached: f64,
    pub records: Vec<MonitorRecord>,
}

#[derive(Debug, Clone)]
pub struct BlowupReport {
    pub high: BlowupRun,
    pub low: BlowupRun,
    pub criteria: Vec<CriterionLine>,
    pub summary: Summary,
}

/// Classical KS (backward Euler, `u = 0`) from a centred Gaussian, run
/// until the monitor flags or `t_end`.
pub fn classical_blowup_run(p: &BlowupParams, mass: f64) -> Result<BlowupRun, HarnessError> {
    let grid = Grid2D::unit_square(p.nx)?;
    let mut n = initial_field(
        &InitSpec::GaussianBump {
            cx: 0.5,
            cy: 0.5,
            width: p.width,
            mass,
        },
        grid,
    )?;
    let mut c = ScalarField::zeros(grid, ScalarBc::Neumann0);
    let u = VectorField::zeros(grid);
    let solver = KsSolver::new(KsParams::new(0.5, p.gamma, ChiModel::Unit)?, grid)?;
    let mut monitor = Monitor::new(&p.monitor);
    let steps = (p.t_end / p.dt).round() as usize;
    let mut records = Vec::new();
    let mut t = 0.0;
    for k in 1..=steps {
        t = k as f64 * p.dt;
        let rec = match solver.classical_reference_step(&n, &c, &u, p.dt) {
            Ok((n1, c1)) => {
                n = n1;
                c = c1;
                monitor.observe(&n, &c, None, t)
            }
            Err(KsError::BlowupDetected { .. }) => {
                let nan = n.with_values(vec![f64::NAN; n.values.len()]);
                monitor.observe(&nan, &c, None, t)
            }
            Err(e) => return Err(e.into()),
        };
        if k % 10 == 0 || rec.blowup_flag {
            records.push(rec);
        }
        if rec.blowup_flag {
            break;
        }
    }
    Ok(BlowupRun {
        mass,
        flagged: monitor.flagged(),
        t_max: monitor.t_max(),
        t_reached: t,
        records,
    })
}

/// Supercritical versus reduced mass. Evidence for the dichotomy, not a
/// proof: the grid caps the attainable concentration.
pub fn blowup_dichotomy(p: &BlowupParams, dir: &Path) -> Result<BlowupReport, HarnessError> {
    fs::create_dir_all(dir)?;
    let high = classical_blowup_run(p, p.mass)?;
    let low = classical_blowup_run(p, p.mass / p.reduction)?;
    write_text(dir, "monitor_high_mass.csv", &monitor_csv(&high.records))?;
    write_text(dir, "monitor_low_mass.csv", &monitor_csv(&low.records))?;
    let criteria = vec![
        CriterionLine {
            name: "blowup_high_mass_flagged".into(),
            value: high.t_max.unwrap_or(f64::INFINITY),
            tolerance: p.t_end,
            pass: high.flagged,
        },
        CriterionLine {
            name: "blowup_low_mass_completes".into(),
            value: low.t_reached,
            tolerance: p.t_end,
            pass: !low.flagged && (low.t_reached - p.t_end).abs() < 0.5 * p.dt,
        },
    ];
    let mut s = Summary::default();
    s.push("experiment", "blowup_dichotomy");
    s.push("mass_high", high.mass);
    s.push("mass_low", low.mass);
    s.push("t_max_high", high.t_max.map_or("none".into(), |t| t.to_string()));
    let summary = finish(dir, s, &criteria)?;
    Ok(BlowupReport {
        high,
        low,
        criteria,
        summary,
    })
}

/// Names accepted by [`run_experiment`].
pub const EXPERIMENTS: [&str; 4] = ["micro_macro", "alpha_limit", "picard_vs_stepper", "blowup_dichotomy"];

/// Dispatches by name; returns the criterion lines.
pub fn run_experiment(name: &str, cfg: &SimConfig, dir: &Path) -> Result<Vec<CriterionLine>, HarnessError> {
    match name {
        "micro_macro" => Ok(micro_macro(&MicroMacroParams::from_config(cfg)?, dir)?.criteria),
        "alpha_limit" => Ok(alpha_limit(&AlphaLimitParams::from_config(cfg)?, dir)?.criteria),
        "picard_vs_stepper" => Ok(picard_vs_stepper(&PicardVsStepperParams::from_config(cfg)?, dir)?.criteria),
        "blowup_dichotomy" => Ok(blowup_dichotomy(&BlowupParams::from_config(cfg)?, dir)?.criteria),
        other => Err(HarnessError::Config(format!(
            "unknown experiment `{other}`; expected one of {}",
            EXPERIMENTS.join(", ")
        ))),
    }
}
