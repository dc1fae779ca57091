//! Rectangular grid, cell-centred scalars, MAC-staggered velocities and the
//! discrete operators acting on them.
//!
//! Storage is row-major with `x` fastest: cell `(i, j)` lives at `j*nx + i`,
//! the x-face left of cell `(i, j)` at `j*(nx+1) + i`, the y-face below it at
//! `j*nx + i`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("array of length {got} does not fit a grid needing {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, FieldError> {
        if nx < 4 || ny < 4 {
            return Err(FieldError::InvalidGrid(format!("need nx, ny >= 4, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(FieldError::InvalidGrid(format!("lengths must be positive, got {lx} x {ly}")));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    pub fn unit_square(n: usize) -> Result<Self, FieldError> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dy()
    }

    pub fn ux_len(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn uy_len(&self) -> usize {
        self.nx * (self.ny + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarBc {
    /// Zero normal derivative (mirror ghosts).
    Neumann0,
    /// Zero value on the boundary face (odd ghosts).
    Dirichlet0,
}

impl ScalarBc {
    pub fn name(self) -> &'static str {
        match self {
            ScalarBc::Neumann0 => "neumann0",
            ScalarBc::Dirichlet0 => "dirichlet0",
        }
    }

    fn ghost(self, interior: f64) -> f64 {
        match self {
            ScalarBc::Neumann0 => interior,
            ScalarBc::Dirichlet0 => -interior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid2D,
    pub values: Vec<f64>,
    pub bc: ScalarBc,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D, bc: ScalarBc) -> Self {
        Self::constant(grid, bc, 0.0)
    }

    pub fn constant(grid: Grid2D, bc: ScalarBc, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.cells()],
            bc,
        }
    }

    pub fn from_values(grid: Grid2D, bc: ScalarBc, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.cells() {
            return Err(FieldError::ShapeMismatch {
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values, bc })
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: Grid2D, bc: ScalarBc, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.xc(i), grid.yc(j)));
            }
        }
        Self { grid, values, bc }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid,
            values,
            bc: self.bc,
        }
    }

    /// `Σ v dx dy`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// NaN if any value is NaN.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| nan_max(m, v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Scalar values with one layer of ghost cells, indexed from `-1` to `n`.
#[derive(Debug, Clone)]
pub struct Padded {
    nx: usize,
    data: Vec<f64>,
}

impl Padded {
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        let w = self.nx + 2;
        self.data[(j + 1) as usize * w + (i + 1) as usize]
    }
}

/// Fills ghost cells according to the field's boundary condition.
pub fn apply_bc(field: &ScalarField) -> Padded {
    let g = field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let w = nx + 2;
    let mut data = vec![0.0; w * (ny + 2)];
    for j in 0..ny {
        let row = &field.values[j * nx..(j + 1) * nx];
        let dst = &mut data[(j + 1) * w..(j + 2) * w];
        dst[1..=nx].copy_from_slice(row);
        dst[0] = field.bc.ghost(row[0]);
        dst[nx + 1] = field.bc.ghost(row[nx - 1]);
    }
    for i in 0..w {
        data[i] = field.bc.ghost(data[w + i]);
        data[(ny + 1) * w + i] = field.bc.ghost(data[ny * w + i]);
    }
    Padded { nx, data }
}

/// Face-staggered velocity with no-slip walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub grid: Grid2D,
    /// `(nx+1) × ny` x-face values.
    pub ux: Vec<f64>,
    /// `nx × (ny+1)` y-face values.
    pub uy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            ux: vec![0.0; grid.ux_len()],
            uy: vec![0.0; grid.uy_len()],
        }
    }

    /// Samples `(fx, fy)` at the respective face centres.
    pub fn from_fn(grid: Grid2D, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let (dx, dy) = (grid.dx(), grid.dy());
        let mut v = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                v.ux[j * (grid.nx + 1) + i] = fx(i as f64 * dx, grid.yc(j));
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                v.uy[j * grid.nx + i] = fy(grid.xc(i), j as f64 * dy);
            }
        }
        v
    }

    #[inline]
    pub fn ux_at(&self, i: usize, j: usize) -> f64 {
        self.ux[j * (self.grid.nx + 1) + i]
    }

    #[inline]
    pub fn uy_at(&self, i: usize, j: usize) -> f64 {
        self.uy[j * self.grid.nx + i]
    }

    pub fn max_abs(&self) -> f64 {
        self.ux.iter().chain(&self.uy).fold(0.0, |m, v| nan_max(m, v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.ux.iter().chain(&self.uy).all(|v| v.is_finite())
    }

    /// Cell-centred components (averages of the two bounding faces).
    pub fn cell_centered(&self) -> (ScalarField, ScalarField) {
        let g = self.grid;
        let cx = ScalarField::from_fn_idx(g, ScalarBc::Dirichlet0, |i, j| 0.5 * (self.ux_at(i, j) + self.ux_at(i + 1, j)));
        let cy = ScalarField::from_fn_idx(g, ScalarBc::Dirichlet0, |i, j| 0.5 * (self.uy_at(i, j) + self.uy_at(i, j + 1)));
        (cx, cy)
    }

    /// Cell-centred speed `|u|`.
    pub fn speed(&self) -> ScalarField {
        let (cx, cy) = self.cell_centered();
        let v = cx.values.iter().zip(&cy.values).map(|(a, b)| a.hypot(*b)).collect();
        cx.with_values(v)
    }
}

impl ScalarField {
    fn from_fn_idx(grid: Grid2D, bc: ScalarBc, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(i, j));
            }
        }
        Self { grid, values, bc }
    }
}

/// Zeroes the wall-normal components (no penetration).
pub fn apply_no_slip(u: &VectorField) -> VectorField {
    let mut out = u.clone();
    enforce_no_slip(&mut out);
    out
}

pub fn enforce_no_slip(u: &mut VectorField) {
    let g = u.grid;
    for j in 0..g.ny {
        u.ux[j * (g.nx + 1)] = 0.0;
        u.ux[j * (g.nx + 1) + g.nx] = 0.0;
    }
    for i in 0..g.nx {
        u.uy[i] = 0.0;
        u.uy[g.ny * g.nx + i] = 0.0;
    }
}

pub fn divergence(u: &VectorField) -> ScalarField {
    let g = u.grid;
    let (dx, dy) = (g.dx(), g.dy());
    let mut values = vec![0.0; g.cells()];
    values.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = (u.ux_at(i + 1, j) - u.ux_at(i, j)) / dx + (u.uy_at(i, j + 1) - u.uy_at(i, j)) / dy;
        }
    });
    ScalarField {
        grid: g,
        values,
        bc: ScalarBc::Neumann0,
    }
}

/// Face-centred differences; boundary faces use the ghost cells.
pub fn gradient(p: &ScalarField) -> VectorField {
    let g = p.grid;
    let (dx, dy) = (g.dx(), g.dy());
    let pad = apply_bc(p);
    let mut out = VectorField::zeros(g);
    out.ux.par_chunks_mut(g.nx + 1).enumerate().for_each(|(j, row)| {
        let j = j as isize;
        for (i, v) in row.iter_mut().enumerate() {
            let i = i as isize;
            *v = (pad.get(i, j) - pad.get(i - 1, j)) / dx;
        }
    });
    out.uy.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        let j = j as isize;
        for (i, v) in row.iter_mut().enumerate() {
            let i = i as isize;
            *v = (pad.get(i, j) - pad.get(i, j - 1)) / dy;
        }
    });
    out
}

/// Five-point Laplacian with boundary-consistent ghosts.
pub fn laplacian(p: &ScalarField) -> ScalarField {
    let g = p.grid;
    let (idx2, idy2) = (1.0 / (g.dx() * g.dx()), 1.0 / (g.dy() * g.dy()));
    let pad = apply_bc(p);
    let mut values = vec![0.0; g.cells()];
    values.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        let j = j as isize;
        for (i, v) in row.iter_mut().enumerate() {
            let i = i as isize;
            let c = pad.get(i, j);
            *v = (pad.get(i + 1, j) - 2.0 * c + pad.get(i - 1, j)) * idx2
                + (pad.get(i, j + 1) - 2.0 * c + pad.get(i, j - 1)) * idy2;
        }
    });
    p.with_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    /// Second order but may oscillate near steep fronts.
    Central,
}

/// Conservative transport term `∇·(u f)`, which equals `u·∇f` for
/// divergence-free `u`.
pub fn advect(f: &ScalarField, u: &VectorField, scheme: AdvectionScheme) -> ScalarField {
    let g = f.grid;
    let (dx, dy) = (g.dx(), g.dy());
    let pad = apply_bc(f);
    let face = |vel: f64, left: f64, right: f64| -> f64 {
        match scheme {
            AdvectionScheme::Upwind => {
                if vel >= 0.0 {
                    vel * left
                } else {
                    vel * right
                }
            }
            AdvectionScheme::Central => vel * 0.5 * (left + right),
        }
    };
    let mut values = vec![0.0; g.cells()];
    values.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        let ji = j as isize;
        for (i, v) in row.iter_mut().enumerate() {
            let ii = i as isize;
            let c = pad.get(ii, ji);
            let fw = face(u.ux_at(i, j), pad.get(ii - 1, ji), c);
            let fe = face(u.ux_at(i + 1, j), c, pad.get(ii + 1, ji));
            let fs = face(u.uy_at(i, j), pad.get(ii, ji - 1), c);
            let fn_ = face(u.uy_at(i, j + 1), c, pad.get(ii, ji + 1));
            *v = (fe - fw) / dx + (fn_ - fs) / dy;
        }
    });
    f.with_values(values)
}

/// `(Σ |v|^q dx dy)^{1/q}`; `q = ∞` gives `max |v|`.
pub fn lq_norm(field: &ScalarField, q: f64) -> f64 {
    assert!(q >= 1.0, "lq_norm needs q >= 1, got {q}");
    if q.is_infinite() {
        return field.max_abs();
    }
    let scale = field.max_abs();
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    // Scaling by the max keeps |v/scale|^q in range for large q.
    let s: f64 = field.values.iter().map(|v| (v.abs() / scale).powf(q)).sum();
    scale * (s * field.grid.cell_area()).powf(1.0 / q)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Discrete L² inner product `Σ a b dx dy`.
pub fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() * a.grid.cell_area()
}

/// Orthonormal DCT-II along both axes. Diagonalises the Neumann five-point
/// Laplacian: mode `(j, k)` has eigenvalue
/// `-(2/dx²)(1 - cos(jπ/nx)) - (2/dy²)(1 - cos(kπ/ny))`.
#[derive(Debug, Clone)]
pub struct CosineTransform {
    pub grid: Grid2D,
    cx: Vec<f64>,
    cy: Vec<f64>,
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    let nf = n as f64;
    for k in 0..n {
        let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        for i in 0..n {
            m[k * n + i] = s * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / nf).cos();
        }
    }
    m
}

impl CosineTransform {
    pub fn new(grid: Grid2D) -> Self {
        Self {
            grid,
            cx: dct_matrix(grid.nx),
            cy: dct_matrix(grid.ny),
        }
    }

    pub fn eigenvalue(&self, j: usize, k: usize) -> f64 {
        let g = self.grid;
        let (dx, dy) = (g.dx(), g.dy());
        let pi = std::f64::consts::PI;
        -(2.0 / (dx * dx)) * (1.0 - (j as f64 * pi / g.nx as f64).cos())
            - (2.0 / (dy * dy)) * (1.0 - (k as f64 * pi / g.ny as f64).cos())
    }

    /// All eigenvalues in coefficient layout (`k*nx + j`).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let g = self.grid;
        let mut v = Vec::with_capacity(g.cells());
        for k in 0..g.ny {
            for j in 0..g.nx {
                v.push(self.eigenvalue(j, k));
            }
        }
        v
    }

    /// Values to coefficients; layout `k*nx + j` for mode `(j, k)`.
    pub fn forward(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values, false)
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        self.apply(coeffs, true)
    }

    fn apply(&self, input: &[f64], transpose: bool) -> Vec<f64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        assert_eq!(input.len(), nx * ny);
        let mx = |a: usize, b: usize| if transpose { self.cx[b * nx + a] } else { self.cx[a * nx + b] };
        let my = |a: usize, b: usize| if transpose { self.cy[b * ny + a] } else { self.cy[a * ny + b] };
        // Along x, row by row.
        let mut tmp = vec![0.0; nx * ny];
        tmp.par_chunks_mut(nx).enumerate().for_each(|(r, out)| {
            let row = &input[r * nx..(r + 1) * nx];
            for (a, o) in out.iter_mut().enumerate() {
                *o = row.iter().enumerate().map(|(b, &v)| mx(a, b) * v).sum();
            }
        });
        // Along y.
        let mut out = vec![0.0; nx * ny];
        out.par_chunks_mut(nx).enumerate().for_each(|(a, orow)| {
            for (col, o) in orow.iter_mut().enumerate() {
                let mut s = 0.0;
                for b in 0..ny {
                    s += my(a, b) * tmp[b * nx + col];
                }
                *o = s;
            }
        });
        out
    }
}

fn fmt_header(grid: &Grid2D, name: &str, bc: ScalarBc) -> String {
    format!(
        "# field={name} nx={} ny={} lx={} ly={} bc={}",
        grid.nx,
        grid.ny,
        grid.lx,
        grid.ly,
        bc.name()
    )
}

/// CSV snapshot text: two header lines (grid metadata, time), then `ny`
/// rows of `nx` values, `j = 0` first.
pub fn snapshot_csv(field: &ScalarField, name: &str, t: f64) -> String {
    let g = field.grid;
    let mut s = String::with_capacity(g.cells() * 24 + 128);
    s.push_str(&fmt_header(&g, name, field.bc));
    let _ = write!(s, "\n# t={t}\n");
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", field.at(i, j));
        }
        s.push('\n');
    }
    s
}

pub fn write_snapshot(path: &Path, field: &ScalarField, name: &str, t: f64) -> Result<(), FieldError> {
    fs::write(path, snapshot_csv(field, name, t))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub t: f64,
    pub field: ScalarField,
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, FieldError> {
    let text = fs::read_to_string(path)?;
    parse_snapshot(&text, &path.display().to_string())
}

pub fn parse_snapshot(text: &str, origin: &str) -> Result<Snapshot, FieldError> {
    let err = |line: usize, msg: String| FieldError::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| err(1, "missing grid header".into()))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| err(1, "grid header must start with '# '".into()))?;
    let mut name = None;
    let (mut nx, mut ny, mut lx, mut ly, mut bc) = (None, None, None, None, ScalarBc::Neumann0);
    for tok in meta.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| err(1, format!("bad token '{tok}'")))?;
        let bad = |_| err(1, format!("bad value for {k}: '{v}'"));
        match k {
            "field" => name = Some(v.to_string()),
            "nx" => nx = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "ny" => ny = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "lx" => lx = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "ly" => ly = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "bc" => {
                bc = match v {
                    "neumann0" => ScalarBc::Neumann0,
                    "dirichlet0" => ScalarBc::Dirichlet0,
                    _ => return Err(err(1, format!("unknown bc '{v}'"))),
                }
            }
            _ => {}
        }
    }
    let missing = |k: &str| err(1, format!("header lacks {k}"));
    let grid = Grid2D::new(
        nx.ok_or_else(|| missing("nx"))?,
        ny.ok_or_else(|| missing("ny"))?,
        lx.ok_or_else(|| missing("lx"))?,
        ly.ok_or_else(|| missing("ly"))?,
    )
    .map_err(|e| err(1, e.to_string()))?;
    let tline = lines.next().ok_or_else(|| err(2, "missing time header".into()))?;
    let t = tline
        .strip_prefix("# t=")
        .ok_or_else(|| err(2, "time header must read '# t=<value>'".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|e| err(2, e.to_string()))?;
    let mut values = Vec::with_capacity(grid.cells());
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let lineno = k + 3;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for cell in line.split(',') {
            values.push(cell.trim().parse::<f64>().map_err(|e| err(lineno, format!("'{cell}': {e}")))?);
        }
        if values.len() - before != grid.nx {
            return Err(err(lineno, format!("expected {} values, found {}", grid.nx, values.len() - before)));
        }
        rows += 1;
    }
    if rows != grid.ny {
        return Err(err(rows + 3, format!("expected {} rows, found {rows}", grid.ny)));
    }
    Ok(Snapshot {
        name: name.unwrap_or_default(),
        t,
        field: ScalarField { grid, values, bc },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid2D {
        Grid2D::new(12, 9, 1.5, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid2D::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid2D::new(8, 8, 0.0, 1.0).is_err());
        let g = grid();
        assert_eq!(g.ux_len(), 13 * 9);
        assert_eq!(g.uy_len(), 12 * 10);
    }

    #[test]
    fn neumann_ghosts_mirror_interior() {
        let f = ScalarField::constant(grid(), ScalarBc::Neumann0, 2.0);
        let p = apply_bc(&f);
        assert_eq!(p.get(-1, 3), 2.0);
        assert_eq!(p.get(12, 3), 2.0);
        assert_eq!(p.get(4, -1), 2.0);
        assert_eq!(p.get(4, 9), 2.0);
        let lin = ScalarField::from_fn(grid(), ScalarBc::Neumann0, |x, _| x);
        let p = apply_bc(&lin);
        assert_eq!(p.get(-1, 2) - p.get(0, 2), 0.0);
        assert_eq!(p.get(12, 2) - p.get(11, 2), 0.0);
        let d = ScalarField::constant(grid(), ScalarBc::Dirichlet0, 2.0);
        assert_eq!(apply_bc(&d).get(-1, 0), -2.0);
    }

    #[test]
    fn no_slip_zeroes_normal_faces() {
        let g = grid();
        let u = apply_no_slip(&VectorField::from_fn(g, |_, _| 1.0, |_, _| -1.0));
        for j in 0..g.ny {
            assert_eq!(u.ux_at(0, j), 0.0);
            assert_eq!(u.ux_at(g.nx, j), 0.0);
        }
        for i in 0..g.nx {
            assert_eq!(u.uy_at(i, 0), 0.0);
            assert_eq!(u.uy_at(i, g.ny), 0.0);
        }
    }

    #[test]
    fn divergence_examples() {
        let g = grid();
        let uniform = VectorField::from_fn(g, |_, _| 0.3, |_, _| -0.7);
        assert!(divergence(&uniform).max_abs() < 1e-14);
        let saddle = VectorField::from_fn(g, |x, _| x, |_, y| -y);
        assert!(divergence(&saddle).max_abs() < 1e-13);
        let source = VectorField::from_fn(g, |x, _| x, |_, y| y);
        assert!(divergence(&source).values.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn constant_field_operators_vanish() {
        let g = grid();
        let f = ScalarField::constant(g, ScalarBc::Neumann0, 4.2);
        assert!(gradient(&f).max_abs() == 0.0);
        assert!(laplacian(&f).max_abs() == 0.0);
        let u = apply_no_slip(&VectorField::from_fn(g, |x, y| x * y, |x, _| x));
        assert!(advect(&ScalarField::zeros(g, ScalarBc::Neumann0), &u, AdvectionScheme::Upwind).max_abs() == 0.0);
    }

    #[test]
    fn laplacian_of_quadratic_is_four_inside() {
        let g = Grid2D::new(16, 16, 1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g, ScalarBc::Neumann0, |x, y| x * x + y * y);
        let l = laplacian(&f);
        for j in 1..g.ny - 1 {
            for i in 1..g.nx - 1 {
                assert!((l.at(i, j) - 4.0).abs() < 1e-9);
            }
        }
    }

    /// Stream function sampled at nodes gives a discretely divergence-free field.
    fn div_free(g: Grid2D, psi: impl Fn(f64, f64) -> f64) -> VectorField {
        let (dx, dy) = (g.dx(), g.dy());
        let mut u = VectorField::zeros(g);
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let x = i as f64 * dx;
                u.ux[j * (g.nx + 1) + i] = (psi(x, (j + 1) as f64 * dy) - psi(x, j as f64 * dy)) / dy;
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let y = j as f64 * dy;
                u.uy[j * g.nx + i] = -(psi((i + 1) as f64 * dx, y) - psi(i as f64 * dx, y)) / dx;
            }
        }
        u
    }

    fn wall_psi(x: f64, y: f64) -> f64 {
        // Vanishes on the boundary of [0,1.5]x[0,1].
        (std::f64::consts::PI * x / 1.5).sin().powi(2) * (std::f64::consts::PI * y).sin().powi(2)
    }

    #[test]
    fn advecting_uniform_field_by_div_free_flow_is_zero() {
        let g = grid();
        let u = div_free(g, wall_psi);
        assert!(divergence(&u).max_abs() < 1e-12);
        for scheme in [AdvectionScheme::Upwind, AdvectionScheme::Central] {
            let f = ScalarField::constant(g, ScalarBc::Neumann0, 3.0);
            assert!(advect(&f, &u, scheme).max_abs() < 1e-12);
        }
    }

    #[test]
    fn conservative_advection_conserves_integral() {
        let g = grid();
        let u = div_free(g, wall_psi);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::from_fn(g, ScalarBc::Neumann0, |_, _| rng.random::<f64>());
        for scheme in [AdvectionScheme::Upwind, AdvectionScheme::Central] {
            assert!(advect(&f, &u, scheme).integral().abs() < 1e-13);
        }
    }

    #[test]
    fn norms() {
        let g = Grid2D::unit_square(8).unwrap();
        for q in [1.0, 2.0, 7.5, f64::INFINITY] {
            assert!((lq_norm(&ScalarField::constant(g, ScalarBc::Neumann0, 1.0), q) - 1.0).abs() < 1e-14);
        }
        assert!((lq_norm(&ScalarField::constant(g, ScalarBc::Neumann0, 2.0), 2.0) - 2.0).abs() < 1e-14);
        let half = ScalarField::from_fn(g, ScalarBc::Neumann0, |x, _| if x < 0.5 { 1.0 } else { 0.0 });
        assert!((lq_norm(&half, 1.0) - 0.5).abs() < 1e-14);
        let big = ScalarField::constant(g, ScalarBc::Neumann0, 1e200);
        assert!((lq_norm(&big, 10.0) / 1e200 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_modes_are_laplacian_eigenvectors() {
        let g = grid();
        let t = CosineTransform::new(g);
        for &(j, k) in &[(0, 0), (1, 0), (3, 2), (11, 8)] {
            let mut c = vec![0.0; g.cells()];
            c[k * g.nx + j] = 1.0;
            let f = ScalarField::from_values(g, ScalarBc::Neumann0, t.inverse(&c)).unwrap();
            let l = laplacian(&f);
            let lam = t.eigenvalue(j, k);
            for (a, b) in l.values.iter().zip(&f.values) {
                assert!((a - lam * b).abs() < 1e-9 * lam.abs().max(1.0));
            }
        }
        assert_eq!(t.eigenvalue(0, 0), 0.0);
        assert!(t.eigenvalues().iter().all(|&l| l <= 0.0));
    }

    #[test]
    fn cosine_round_trip() {
        let g = grid();
        let t = CosineTransform::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..g.cells()).map(|_| rng.random::<f64>() - 0.5).collect();
        let back = t.inverse(&t.forward(&v));
        assert!(v.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn snapshot_round_trip_and_errors() {
        let g = grid();
        let f = ScalarField::from_fn(g, ScalarBc::Neumann0, |x, y| (x * 3.1).sin() + y / 7.0);
        let text = snapshot_csv(&f, "n", 0.125);
        let s = parse_snapshot(&text, "mem").unwrap();
        assert_eq!(s.field, f);
        assert_eq!(s.name, "n");
        assert_eq!(s.t, 0.125);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.csv");
        write_snapshot(&p, &f, "n", 1.0).unwrap();
        assert_eq!(read_snapshot(&p).unwrap().field, f);

        let no_header = text.lines().skip(2).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_snapshot(&no_header, "x"), Err(FieldError::Parse { line: 1, .. })));
        let short: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(parse_snapshot(&short, "x").is_err());
    }

    fn random_field(g: Grid2D, bc: ScalarBc, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_fn(g, bc, |_, _| rng.random::<f64>() - 0.5)
    }

    proptest! {
        #[test]
        fn laplacian_is_symmetric_nonpositive(seed in 0u64..1000, nx in 4usize..20, ny in 4usize..20, dir in any::<bool>()) {
            let g = Grid2D::new(nx, ny, 1.0, 0.7).unwrap();
            let bc = if dir { ScalarBc::Dirichlet0 } else { ScalarBc::Neumann0 };
            let a = random_field(g, bc, seed);
            let b = random_field(g, bc, seed + 10_000);
            let lab = inner(&laplacian(&a), &b);
            let alb = inner(&a, &laplacian(&b));
            prop_assert!((lab - alb).abs() < 1e-10);
            prop_assert!(inner(&laplacian(&a), &a) <= 1e-12);
        }

        #[test]
        fn neumann_laplacian_kills_constants(v in -1e3f64..1e3, nx in 4usize..16, ny in 4usize..16) {
            let g = Grid2D::new(nx, ny, 2.0, 1.0).unwrap();
            let l = laplacian(&ScalarField::constant(g, ScalarBc::Neumann0, v));
            prop_assert!(l.max_abs() == 0.0);
        }
    }
}
