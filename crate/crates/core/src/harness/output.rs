//! Run drivers that write snapshots, `monitor.csv` and `summary.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ctrw::{self, BoundaryMode, ParticleEnsemble, Sensitivity, SlimeProfile, WaitingLaw};
use crate::fields::{self, VectorField};
use crate::mild_verify::{contraction_ratio, duhamel_picard, PicardParams, PicardResult};
use crate::specfun::EvalPolicy;

use super::config::{Model, SimConfig, DIM};
use super::coupled::{initial_field, Simulation};
use super::monitor::{monitor_csv, MonitorRecord};
use super::HarnessError;

/// Ordered `key: value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}: {v}");
            s
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::write(dir.join("summary.txt"), self.to_text())?;
        Ok(())
    }
}

/// Writes `text` to `dir/name` and returns the path.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, HarnessError> {
    let p = dir.join(name);
    fs::write(&p, text)?;
    Ok(p)
}

/// Two-column CSV with a header row.
pub fn xy_csv(header: (&str, &str), x: &[f64], y: &[f64]) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(s, "{a:e},{b:e}");
    }
    s
}

fn write_field_snapshots(dir: &Path, sim: &Simulation) -> Result<(), HarnessError> {
    let t = sim.ks.t;
    let tag = format!("{:06}", sim.step);
    fields::write_snapshot(&dir.join(format!("n_{tag}.csv")), &sim.ks.n, "n", t)?;
    fields::write_snapshot(&dir.join(format!("c_{tag}.csv")), &sim.ks.c, "c", t)?;
    if let Some(f) = &sim.fluid {
        let (ux, uy) = f.u.cell_centered();
        fields::write_snapshot(&dir.join(format!("ux_{tag}.csv")), &ux, "ux", t)?;
        fields::write_snapshot(&dir.join(format!("uy_{tag}.csv")), &uy, "uy", t)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub records: Vec<MonitorRecord>,
    pub summary: Summary,
    pub final_state: Simulation,
}

/// Runs a field model to `t_end` (or until the monitor flags), writing
/// snapshots every `output_every` steps.
pub fn run_simulation(cfg: &SimConfig, dir: &Path) -> Result<SimulationOutcome, HarnessError> {
    fs::create_dir_all(dir)?;
    let mut sim = Simulation::new(cfg)?;
    write_field_snapshots(dir, &sim)?;
    let mut records = Vec::new();
    let mut cfl_warned = false;
    while !sim.done() {
        if !cfl_warned {
            let zero = VectorField::zeros(cfg.grid);
            let u = sim.fluid.as_ref().map_or(&zero, |f| &f.u);
            let rep = sim.solver.cfl(&sim.ks, u)?;
            if !rep.ok() {
                log::warn!("CFL indicator {:.3} above {:.3} at t = {}", rep.number, rep.limit, sim.ks.t);
                cfl_warned = true;
            }
        }
        let rec = sim.step_once()?;
        let last = sim.done();
        if sim.step % cfg.output_every == 0 || last {
            records.push(rec);
            if rec.norm_n.is_finite() {
                write_field_snapshots(dir, &sim)?;
            }
        }
    }
    fs::write(dir.join("monitor.csv"), monitor_csv(&records))?;
    let mut s = Summary::default();
    s.push("model", cfg.model.name());
    s.push("alpha", cfg.alpha);
    s.push("steps", sim.step);
    s.push("t_final", sim.ks.t);
    s.push("mass_drift", format!("{:e}", sim.mass_drift()));
    s.push("max_divergence", format!("{:e}", sim.max_divergence));
    s.push("blowup_flag", sim.monitor.flagged());
    s.push("t_max", sim.monitor.t_max().map_or("none".to_string(), |t| t.to_string()));
    s.write(dir)?;
    Ok(SimulationOutcome {
        records,
        summary: s,
        final_state: sim,
    })
}

#[derive(Debug, Clone)]
pub struct CtrwOutcome {
    pub times: Vec<f64>,
    pub msd: Vec<f64>,
    pub slope: f64,
    pub summary: Summary,
}

/// CTRW on `ctrw.sites` sites of `[0, lx]`: walkers start from the `x`
/// profile of `initial.n` and move in the slime `c = base + slope x`.
pub fn run_ctrw(cfg: &SimConfig, dir: &Path) -> Result<CtrwOutcome, HarnessError> {
    fs::create_dir_all(dir)?;
    let cc = &cfg.ctrw;
    let lx = cfg.grid.lx;
    let dx = lx / cc.sites as f64;
    let law = WaitingLaw::for_diffusivity(cfg.alpha, dx, cc.diffusivity)?;
    let xs: Vec<f64> = (0..cc.sites).map(|i| (i as f64 + 0.5) * dx).collect();
    let profile = slime_profile(&xs, cc.slime_base, cc.slime_slope, cc.sensitivity_beta)?;
    let line = initial_line(cfg, cc.sites)?;
    let sites = ctrw::stratified_sites(&line, cc.particles)?;
    let mut ens = ParticleEnsemble::new(sites, &law, cfg.seed, cc.shards)?;
    let outputs = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let frames = outputs.div_ceil(cfg.output_every).max(1);
    let times: Vec<f64> = (1..=frames).map(|k| cfg.t_end * k as f64 / frames as f64).collect();
    let mut msd = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        ctrw::evolve(&mut ens, &law, &profile, BoundaryMode::Reflecting, t)?;
        msd.push(ens.msd_sites() * dx * dx);
        let hist = ctrw::density_histogram(&ens, dx, 0.0, lx, cc.bins);
        let centres: Vec<f64> = (0..cc.bins).map(|b| (b as f64 + 0.5) * lx / cc.bins as f64).collect();
        write_text(dir, &format!("density_{:04}.csv", k + 1), &xy_csv(("x", "density"), &centres, &hist))?;
    }
    write_text(dir, "msd.csv", &xy_csv(("t", "msd"), &times, &msd))?;
    let usable: Vec<usize> = (0..times.len()).filter(|&i| msd[i] > 0.0).collect();
    let slope = if usable.len() >= 2 {
        let t: Vec<f64> = usable.iter().map(|&i| times[i]).collect();
        let m: Vec<f64> = usable.iter().map(|&i| msd[i]).collect();
        ctrw::log_log_slope(&t, &m)
    } else {
        f64::NAN
    };
    let mut s = Summary::default();
    s.push("model", Model::Ctrw.name());
    s.push("alpha", cfg.alpha);
    s.push("tau", law.tau);
    s.push("diffusivity", law.diffusivity(dx));
    s.push("chemotactic_coefficient", law.chemotactic_coefficient(dx));
    s.push("particles", ens.len());
    s.push("msd_slope", slope);
    s.write(dir)?;
    Ok(CtrwOutcome { times, msd, slope, summary: s })
}

/// `g(c) = exp(βc)` for `β ≠ 0`, else `g(c) = c`.
pub fn slime_profile(xs: &[f64], base: f64, slope: f64, beta: f64) -> Result<SlimeProfile, HarnessError> {
    let c: Vec<f64> = xs.iter().map(|x| base + slope * x).collect();
    let sens = if beta != 0.0 {
        Sensitivity::Exponential { beta }
    } else {
        Sensitivity::Identity
    };
    Ok(SlimeProfile::new(c, sens)?)
}

/// `initial.n` averaged over `y`, resampled on `sites` points.
fn initial_line(cfg: &SimConfig, sites: usize) -> Result<Vec<f64>, HarnessError> {
    let g = fields::Grid2D::new(sites, 4, cfg.grid.lx, cfg.grid.ly)?;
    let f = initial_field(&cfg.n0, g)?;
    Ok((0..sites).map(|i| (0..4).map(|j| f.at(i, j)).sum::<f64>() / 4.0).collect())
}

#[derive(Debug, Clone)]
pub struct MildOutcome {
    pub result: PicardResult,
    pub ratio: f64,
    pub summary: Summary,
}

pub fn picard_params(cfg: &SimConfig) -> PicardParams {
    PicardParams {
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        t_end: cfg.t_end,
        steps: cfg.mild.steps,
        max_iters: cfg.mild.max_iters,
        tol: cfg.mild.tol,
        rho: cfg.monitor.rho,
        q: cfg.monitor.q,
    }
}

/// Picard iteration with `u = 0` on the configured data.
pub fn run_mild(cfg: &SimConfig, dir: &Path) -> Result<MildOutcome, HarnessError> {
    fs::create_dir_all(dir)?;
    let g = cfg.grid;
    let n0 = initial_field(&cfg.n0, g)?;
    let c0 = initial_field(&cfg.c0, g)?;
    let result = duhamel_picard(&n0, &c0, &VectorField::zeros(g), &picard_params(cfg), &EvalPolicy::default())?;
    let ratio = contraction_ratio(&result.distances);
    let iters: Vec<f64> = (1..=result.distances.len()).map(|k| k as f64).collect();
    write_text(dir, "picard_distances.csv", &xy_csv(("iteration", "distance"), &iters, &result.distances))?;
    let last = result.times.len() - 1;
    let t = result.times[last];
    fields::write_snapshot(&dir.join("n_picard.csv"), &result.n[last], "n", t)?;
    fields::write_snapshot(&dir.join("c_picard.csv"), &result.c[last], "c", t)?;
    let mut s = Summary::default();
    s.push("model", Model::Mild.name());
    s.push("alpha", cfg.alpha);
    s.push("dimension", DIM);
    s.push("iterations", result.distances.len());
    s.push("converged", result.converged);
    s.push("contraction_ratio", ratio);
    s.write(dir)?;
    Ok(MildOutcome { result, ratio, summary: s })
}

/// Reads every snapshot CSV in `dir` (files starting with a field-name
/// header); used to check that outputs parse.
pub fn read_all_snapshots(dir: &Path) -> Result<Vec<fields::Snapshot>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p)?;
        if text.starts_with("# field=") {
            out.push(fields::parse_snapshot(&text, &p.display().to_string())?);
        }
    }
    Ok(out)
}
