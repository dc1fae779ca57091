//! Flat `key = value` run configuration with `[section]` headers.
//!
//! ```text
//! [run]
//! model = tfksns
//! alpha = 0.7
//! [grid]
//! nx = 64
//! ny = 64
//! [initial]
//! n = gaussian_bump(0.5, 0.5, 0.1, 1.0)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::fields::Grid2D;
use crate::ks_macro::ChiModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {key} violates {constraint}")]
    Constraint { key: String, line: usize, constraint: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ctrw,
    KsOnly,
    Tfksns,
    Mild,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Ctrw => "ctrw",
            Model::KsOnly => "ks_only",
            Model::Tfksns => "tfksns",
            Model::Mild => "mild",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Centre, standard deviation and total mass.
    GaussianBump { cx: f64, cy: f64, width: f64, mass: f64 },
    /// `offset + amp cos(jπx/lx) cos(kπy/ly)`.
    CosineMode { j: usize, k: usize, amp: f64, offset: f64 },
    Constant(f64),
    /// A snapshot CSV as written by the harness.
    FromFile(PathBuf),
}

impl InitSpec {
    fn render(&self) -> String {
        match self {
            InitSpec::GaussianBump { cx, cy, width, mass } => format!("gaussian_bump({cx}, {cy}, {width}, {mass})"),
            InitSpec::CosineMode { j, k, amp, offset } => format!("cosine_mode({j}, {k}, {amp}, {offset})"),
            InitSpec::Constant(v) => format!("constant({v})"),
            InitSpec::FromFile(p) => format!("from_file({})", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub rho: f64,
    pub q: f64,
    pub threshold: f64,
    /// `α d / (2 ρ q)`, derived.
    pub beta: f64,
}

impl MonitorConfig {
    pub fn exponent(&self) -> f64 {
        self.rho * self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtrwConfig {
    pub particles: usize,
    pub sites: usize,
    /// Target `𝒟`; sets the waiting-time scale.
    pub diffusivity: f64,
    /// `0` selects identity sensitivity `g(c) = c`.
    pub sensitivity_beta: f64,
    /// Slope of the linear slime profile `c = c0 + slope x`.
    pub slime_slope: f64,
    pub slime_base: f64,
    pub shards: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MildConfig {
    pub steps: usize,
    pub max_iters: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: Model,
    pub alpha: f64,
    pub gamma: f64,
    pub chi_model: ChiModel,
    pub grid: Grid2D,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Snapshot and monitor cadence in steps.
    pub output_every: usize,
    pub viscosity: f64,
    /// `true` uses `Φ = y`; `false` a constant potential.
    pub buoyancy: bool,
    pub monitor: MonitorConfig,
    pub n0: InitSpec,
    pub c0: InitSpec,
    pub ctrw: CtrwConfig,
    pub mild: MildConfig,
    /// Keys not understood by the core run, kept for experiment recipes.
    pub extra: BTreeMap<String, String>,
}

/// Spatial dimension of every grid this crate builds.
pub const DIM: usize = 2;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Doc {
    entries: BTreeMap<String, Entry>,
    last_line: usize,
}

impl Doc {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::from("run");
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: format!("unterminated section header `{s}`"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(ConfigError::Parse { line, msg: "empty section name".into() });
                }
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("expected `key = value`, found `{s}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Parse { line, msg: "empty key or value".into() });
            }
            let key = format!("{section}.{k}");
            if entries.contains_key(&key) {
                return Err(ConfigError::Parse { line, msg: format!("duplicate key {key}") });
            }
            entries.insert(
                key,
                Entry {
                    value: v.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Self { entries, last_line })
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(self.last_line, |e| e.line)
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T, ConfigError> {
        match self.raw(key) {
            Some((v, line)) => v.parse().map_err(|_| ConfigError::Parse {
                line,
                msg: format!("cannot parse {key} = `{v}`"),
            }),
            None => default.ok_or_else(|| ConfigError::Parse {
                line: self.last_line,
                msg: format!("missing required key {key}"),
            }),
        }
    }
}

fn constraint(doc: &Doc, key: &str, what: &str) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        line: doc.line_of(key),
        constraint: what.to_string(),
    }
}

fn parse_call(s: &str) -> Option<(&str, Vec<&str>)> {
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Some((s[..open].trim(), args))
}

fn parse_init(doc: &mut Doc, key: &str, default: InitSpec) -> Result<InitSpec, ConfigError> {
    let Some((v, line)) = doc.raw(key) else {
        return Ok(default);
    };
    let bad = |msg: String| ConfigError::Parse { line, msg };
    let (name, args) = parse_call(&v).ok_or_else(|| bad(format!("{key}: expected name(args), found `{v}`")))?;
    let nums = |n_min: usize, n_max: usize| -> Result<Vec<f64>, ConfigError> {
        if args.len() < n_min || args.len() > n_max {
            return Err(bad(format!("{key}: {name} takes {n_min}..={n_max} arguments")));
        }
        args.iter()
            .map(|a| a.parse::<f64>().map_err(|_| bad(format!("{key}: bad number `{a}`"))))
            .collect()
    };
    match name {
        "gaussian_bump" => {
            let a = nums(4, 4)?;
            if !(a[2] > 0.0) || !(a[3] >= 0.0) {
                return Err(ConfigError::Constraint {
                    key: key.into(),
                    line,
                    constraint: "width > 0 and mass >= 0".into(),
                });
            }
            Ok(InitSpec::GaussianBump {
                cx: a[0],
                cy: a[1],
                width: a[2],
                mass: a[3],
            })
        }
        "cosine_mode" => {
            let a = nums(3, 4)?;
            if a[0] < 0.0 || a[1] < 0.0 || a[0].fract() != 0.0 || a[1].fract() != 0.0 {
                return Err(bad(format!("{key}: mode indices must be non-negative integers")));
            }
            Ok(InitSpec::CosineMode {
                j: a[0] as usize,
                k: a[1] as usize,
                amp: a[2],
                offset: a.get(3).copied().unwrap_or(0.0),
            })
        }
        "constant" => Ok(InitSpec::Constant(nums(1, 1)?[0])),
        "from_file" => {
            if args.len() != 1 {
                return Err(bad(format!("{key}: from_file takes one path")));
            }
            Ok(InitSpec::FromFile(PathBuf::from(args[0])))
        }
        other => Err(bad(format!("{key}: unknown initial-data form `{other}`"))),
    }
}

fn parse_chi(doc: &mut Doc) -> Result<ChiModel, ConfigError> {
    let Some((v, line)) = doc.raw("run.chi_model") else {
        return Ok(ChiModel::Unit);
    };
    match v.as_str() {
        "unit" => Ok(ChiModel::Unit),
        "reciprocal" => Ok(ChiModel::Reciprocal),
        s => {
            let b = s
                .strip_prefix("beta:")
                .and_then(|b| b.trim().parse::<f64>().ok())
                .ok_or_else(|| ConfigError::Parse {
                    line,
                    msg: format!("chi_model must be unit, reciprocal or beta:<value>, found `{s}`"),
                })?;
            Ok(ChiModel::ConstBeta(b))
        }
    }
}

const EXTRA_SECTIONS: [&str; 1] = ["experiment"];

/// Parses and validates; the first problem found is reported.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut doc = Doc::parse(text)?;
    let model = match doc.raw("run.model") {
        None => {
            return Err(ConfigError::Parse {
                line: doc.last_line,
                msg: "missing required key run.model".into(),
            })
        }
        Some((v, line)) => match v.as_str() {
            "ctrw" => Model::Ctrw,
            "ks_only" => Model::KsOnly,
            "tfksns" => Model::Tfksns,
            "mild" => Model::Mild,
            s => {
                return Err(ConfigError::Parse {
                    line,
                    msg: format!("model must be ctrw, ks_only, tfksns or mild, found `{s}`"),
                })
            }
        },
    };
    let alpha: f64 = doc.get("run.alpha", None)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(constraint(&doc, "run.alpha", "alpha ∈ (0,1)"));
    }
    let gamma: f64 = doc.get("run.gamma", Some(1.0))?;
    if !(gamma >= 0.0) {
        return Err(constraint(&doc, "run.gamma", "gamma >= 0"));
    }
    let chi_model = parse_chi(&mut doc)?;

    let nx: usize = doc.get("grid.nx", None)?;
    let ny: usize = doc.get("grid.ny", Some(nx))?;
    let lx: f64 = doc.get("grid.lx", Some(1.0))?;
    let ly: f64 = doc.get("grid.ly", Some(lx))?;
    let grid = Grid2D::new(nx, ny, lx, ly).map_err(|e| constraint(&doc, "grid.nx", &e.to_string()))?;

    let dt: f64 = doc.get("run.dt", Some(1e-3))?;
    if !(dt > 0.0) {
        return Err(constraint(&doc, "run.dt", "dt > 0"));
    }
    let t_end: f64 = doc.get("run.t_end", Some(0.1))?;
    if !(t_end > dt) {
        return Err(constraint(&doc, "run.t_end", "t_end > dt"));
    }
    let seed: u64 = doc.get("run.seed", Some(1))?;
    let output_dir: String = doc.get("run.output_dir", Some("output".to_string()))?;
    let output_every: usize = doc.get("run.output_every", Some(10))?;
    if output_every == 0 {
        return Err(constraint(&doc, "run.output_every", "output_every >= 1"));
    }
    let viscosity: f64 = doc.get("fluid.viscosity", Some(1.0))?;
    if !(viscosity > 0.0) {
        return Err(constraint(&doc, "fluid.viscosity", "viscosity > 0"));
    }
    let buoyancy: bool = doc.get("fluid.buoyancy", Some(true))?;

    let rho: f64 = doc.get("monitor.rho", Some(2.0))?;
    let q: f64 = doc.get("monitor.q", Some(5.0))?;
    let threshold: f64 = doc.get("monitor.threshold", Some(1e6))?;
    let d = DIM as f64;
    if !(q > 2.0 * d) {
        return Err(constraint(&doc, "monitor.q", "q > 2d"));
    }
    if !(rho >= 2.0) {
        return Err(constraint(&doc, "monitor.rho", "rho >= 2"));
    }
    if !(threshold > 0.0) {
        return Err(constraint(&doc, "monitor.threshold", "threshold > 0"));
    }
    let monitor = MonitorConfig {
        rho,
        q,
        threshold,
        beta: alpha * d / (2.0 * rho * q),
    };

    let n0 = parse_init(
        &mut doc,
        "initial.n",
        InitSpec::GaussianBump {
            cx: 0.5 * lx,
            cy: 0.5 * ly,
            width: 0.1 * lx.min(ly),
            mass: 1.0,
        },
    )?;
    let c0 = parse_init(&mut doc, "initial.c", InitSpec::Constant(0.0))?;

    let ctrw = CtrwConfig {
        particles: doc.get("ctrw.particles", Some(100_000))?,
        sites: doc.get("ctrw.sites", Some(200))?,
        diffusivity: doc.get("ctrw.diffusivity", Some(0.01))?,
        sensitivity_beta: doc.get("ctrw.sensitivity_beta", Some(0.0))?,
        slime_slope: doc.get("ctrw.slime_slope", Some(0.0))?,
        slime_base: doc.get("ctrw.slime_base", Some(1.0))?,
        shards: doc.get("ctrw.shards", Some(64))?,
        bins: doc.get("ctrw.bins", Some(50))?,
    };
    if ctrw.particles == 0 || ctrw.sites < 4 || ctrw.shards == 0 || ctrw.bins == 0 {
        return Err(constraint(&doc, "ctrw.particles", "particles, shards, bins >= 1 and sites >= 4"));
    }
    if !(ctrw.diffusivity > 0.0) {
        return Err(constraint(&doc, "ctrw.diffusivity", "diffusivity > 0"));
    }
    let mild = MildConfig {
        steps: doc.get("mild.steps", Some(40))?,
        max_iters: doc.get("mild.max_iters", Some(30))?,
        tol: doc.get("mild.tol", Some(1e-10))?,
    };
    if mild.steps == 0 {
        return Err(constraint(&doc, "mild.steps", "steps >= 1"));
    }

    let mut extra = BTreeMap::new();
    for (k, e) in doc.entries.iter_mut() {
        if e.used {
            continue;
        }
        let section = k.split('.').next().unwrap_or("");
        if EXTRA_SECTIONS.contains(&section) {
            extra.insert(k.clone(), e.value.clone());
        } else {
            return Err(ConfigError::Parse {
                line: e.line,
                msg: format!("unknown key {k}"),
            });
        }
    }

    Ok(SimConfig {
        model,
        alpha,
        gamma,
        chi_model,
        grid,
        dt,
        t_end,
        seed,
        output_dir: PathBuf::from(output_dir),
        output_every,
        viscosity,
        buoyancy,
        monitor,
        n0,
        c0,
        ctrw,
        mild,
        extra,
    })
}

impl SimConfig {
    /// Every setting, defaults included, in parseable form.
    pub fn normalized(&self) -> String {
        let chi = match self.chi_model {
            ChiModel::Unit => "unit".to_string(),
            ChiModel::Reciprocal => "reciprocal".to_string(),
            ChiModel::ConstBeta(b) => format!("beta:{b}"),
        };
        let g = &self.grid;
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "model = {}", self.model.name());
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "chi_model = {chi}");
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "output_every = {}", self.output_every);
        let _ = writeln!(s, "\n[grid]\nnx = {}\nny = {}\nlx = {}\nly = {}", g.nx, g.ny, g.lx, g.ly);
        let _ = writeln!(s, "\n[fluid]\nviscosity = {}\nbuoyancy = {}", self.viscosity, self.buoyancy);
        let m = &self.monitor;
        let _ = writeln!(s, "\n[monitor]\nrho = {}\nq = {}\nthreshold = {}", m.rho, m.q, m.threshold);
        let _ = writeln!(s, "# beta = {}", m.beta);
        let _ = writeln!(s, "\n[initial]\nn = {}\nc = {}", self.n0.render(), self.c0.render());
        let c = &self.ctrw;
        let _ = writeln!(
            s,
            "\n[ctrw]\nparticles = {}\nsites = {}\ndiffusivity = {}\nsensitivity_beta = {}\nslime_slope = {}\nslime_base = {}\nshards = {}\nbins = {}",
            c.particles, c.sites, c.diffusivity, c.sensitivity_beta, c.slime_slope, c.slime_base, c.shards, c.bins
        );
        let _ = writeln!(s, "\n[mild]\nsteps = {}\nmax_iters = {}\ntol = {}", self.mild.steps, self.mild.max_iters, self.mild.tol);
        if !self.extra.is_empty() {
            let _ = writeln!(s, "\n[experiment]");
            for (k, v) in &self.extra {
                let _ = writeln!(s, "{} = {v}", k.trim_start_matches("experiment."));
            }
        }
        s
    }

    pub fn extra_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.extra_parse(key, default)
    }

    pub fn extra_usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.extra_parse(key, default)
    }

    fn extra_parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.extra.get(&format!("experiment.{key}")) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Parse {
                line: 0,
                msg: format!("cannot parse experiment.{key} = `{v}`"),
            }),
        }
    }

    /// Minimal valid config for `model` on an `nx × nx` unit square.
    pub fn minimal(model: Model, alpha: f64, nx: usize) -> Self {
        parse_config(&format!("model = {}\nalpha = {alpha}\n[grid]\nnx = {nx}\n", model.name())).expect("minimal config is valid")
    }
}
