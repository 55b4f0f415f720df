//! Uniform rectangular grid, cell-centered scalar fields, MAC face fields and
//! the compatible discrete gradient / divergence / Laplacian.
//!
//! Scalars live at cell centers, indexed row-major as `j * nx + i`. Face
//! fields store the normal component on every cell face: x-faces are indexed
//! `j * (nx + 1) + i` (face `i` is the west face of cell `i`), y-faces
//! `j * nx + i` (face `j` is the south face of cell row `j`).
//!
//! Boundary conditions enter only through ghost values: a homogeneous Neumann
//! ghost mirrors the adjacent interior cell, a Dirichlet ghost for boundary
//! value `g` is `2g - interior`. The Laplacian is literally
//! `divergence_from_faces(gradient_to_faces(f))`, so every identity that
//! holds for the pair (summation by parts, curl-free gradients) holds for it
//! too.
//!
//! Face inner products weight interior faces by the cell volume and boundary
//! faces by half of it. With that weighting `<div v, f> = -<v, grad f>` holds
//! exactly for Dirichlet-zero `f`.

use std::io::{BufRead, Write};

use crate::error::Error;

/// Uniform rectangular grid with `nx * ny` cells covering `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 4;

    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, Error> {
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {m}x{m} cells, got {nx}x{ny}",
                m = Self::MIN_CELLS
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    /// `n x n` cells on the unit square.
    pub fn unit_square(n: usize) -> Result<Self, Error> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn num_x_faces(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn num_y_faces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn xface_idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface_idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn min_spacing(&self) -> f64 {
        self.hx.min(self.hy)
    }
}

/// Boundary condition applied to one unknown on the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    DirichletZero,
    DirichletOne,
    NeumannZero,
    /// Zero normal flux; treated as homogeneous Neumann for the unknown.
    NoFlux,
}

impl Condition {
    /// Ghost value across the boundary from an interior cell value.
    #[inline]
    pub fn ghost(self, interior: f64) -> f64 {
        match self {
            Condition::DirichletZero => -interior,
            Condition::DirichletOne => 2.0 - interior,
            Condition::NeumannZero | Condition::NoFlux => interior,
        }
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(self, Condition::DirichletZero | Condition::DirichletOne)
    }
}

/// Boundary condition for each unknown of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundarySpec {
    pub mu: Condition,
    pub pi: Condition,
    pub n: Condition,
    pub phi: Condition,
    pub p: Condition,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            mu: Condition::DirichletZero,
            pi: Condition::DirichletZero,
            n: Condition::DirichletOne,
            phi: Condition::NeumannZero,
            p: Condition::DirichletZero,
        }
    }
}

impl BoundarySpec {
    /// Default set with a no-flux pressure, used by the singular-limit runs.
    pub fn singular_limit() -> Self {
        Self {
            pi: Condition::NoFlux,
            ..Self::default()
        }
    }
}

/// Cell-centered samples of one scalar unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self {
            grid,
            data: vec![value; grid.num_cells()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.num_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        Self { grid, data }
    }

    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self, Error> {
        if data.len() != grid.num_cells() {
            return Err(Error::Shape(format!(
                "expected {} cell values, got {}",
                grid.num_cells(),
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("cell {k} holds {}", data[k])));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Quadrature-weighted inner product `sum f_i g_i hx hy`.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    /// Discrete L2(Omega) norm.
    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Max-norm of the difference to another field on the same grid.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn l2_diff(&self, other: &Self) -> f64 {
        self.zip_map(other, |a, b| a - b).l2_norm()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Write the plain-text snapshot format: a header line
    /// `nx ny hx hy time` followed by one value per line, row-major.
    pub fn write_snapshot<W: Write>(&self, mut w: W, time: f64) -> std::io::Result<()> {
        let g = &self.grid;
        writeln!(w, "{} {} {} {} {}", g.nx, g.ny, g.hx, g.hy, time)?;
        for v in &self.data {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    /// Read a snapshot written by [`ScalarField::write_snapshot`]. Returns the
    /// field and the stored time.
    pub fn read_snapshot<R: BufRead>(r: R) -> Result<(Self, f64), Error> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Snapshot("empty snapshot".into()))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Snapshot(format!("bad header `{header}`")));
        }
        let bad = |s: &str| Error::Snapshot(format!("bad header entry `{s}`"));
        let nx: usize = parts[0].parse().map_err(|_| bad(parts[0]))?;
        let ny: usize = parts[1].parse().map_err(|_| bad(parts[1]))?;
        let hx: f64 = parts[2].parse().map_err(|_| bad(parts[2]))?;
        let hy: f64 = parts[3].parse().map_err(|_| bad(parts[3]))?;
        let time: f64 = parts[4].parse().map_err(|_| bad(parts[4]))?;
        let grid = GridSpec::new(nx, ny, hx * nx as f64, hy * ny as f64)?;
        let mut data = Vec::with_capacity(grid.num_cells());
        for (k, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Snapshot(format!("line {}: bad value `{line}`", k + 2)))?;
            data.push(v);
        }
        Ok((Self::from_vec(grid, data)?, time))
    }
}

/// Normal components on cell faces (MAC staggering).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVectorField {
    grid: GridSpec,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.num_x_faces()],
            y: vec![0.0; grid.num_y_faces()],
        }
    }

    pub fn from_vecs(grid: GridSpec, x: Vec<f64>, y: Vec<f64>) -> Result<Self, Error> {
        if x.len() != grid.num_x_faces() || y.len() != grid.num_y_faces() {
            return Err(Error::Shape(format!(
                "expected {}+{} face values, got {}+{}",
                grid.num_x_faces(),
                grid.num_y_faces(),
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("face field".into()));
        }
        Ok(Self { grid, x, y })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn x_faces(&self) -> &[f64] {
        &self.x
    }
    pub fn y_faces(&self) -> &[f64] {
        &self.y
    }
    pub fn x_faces_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }
    pub fn y_faces_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    #[inline]
    pub fn xf(&self, i: usize, j: usize) -> f64 {
        self.x[self.grid.xface_idx(i, j)]
    }

    #[inline]
    pub fn yf(&self, i: usize, j: usize) -> f64 {
        self.y[self.grid.yface_idx(i, j)]
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect();
        Self {
            grid: self.grid,
            x: zip(&self.x, &other.x),
            y: zip(&self.y, &other.y),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Face inner product: interior faces weighted by `hx hy`, boundary faces
    /// by `hx hy / 2`.
    pub fn dot(&self, other: &Self) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let k = g.xface_idx(i, j);
                let w = if i == 0 || i == g.nx { 0.5 } else { 1.0 };
                s += w * self.x[k] * other.x[k];
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let k = g.yface_idx(i, j);
                let w = if j == 0 || j == g.ny { 0.5 } else { 1.0 };
                s += w * self.y[k] * other.y[k];
            }
        }
        s * g.cell_volume()
    }

    /// Discrete `int |v|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }
}

/// Face-normal difference quotient of `f`, with boundary faces closed by the
/// ghost values of `bc`.
pub fn gradient_to_faces(f: &ScalarField, bc: Condition) -> FaceVectorField {
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx, g.hy);
    let mut out = FaceVectorField::zeros(g);
    for j in 0..ny {
        for i in 0..=nx {
            let west = if i == 0 { bc.ghost(f.at(0, j)) } else { f.at(i - 1, j) };
            let east = if i == nx { bc.ghost(f.at(nx - 1, j)) } else { f.at(i, j) };
            out.x[g.xface_idx(i, j)] = (east - west) / hx;
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let south = if j == 0 { bc.ghost(f.at(i, 0)) } else { f.at(i, j - 1) };
            let north = if j == ny { bc.ghost(f.at(i, ny - 1)) } else { f.at(i, j) };
            out.y[g.yface_idx(i, j)] = (north - south) / hy;
        }
    }
    out
}

/// Arithmetic mean of the two cells sharing each face; boundary faces use the
/// ghost value of `bc`.
pub fn face_average(f: &ScalarField, bc: Condition) -> FaceVectorField {
    let g = *f.grid();
    let (nx, ny) = (g.nx, g.ny);
    let mut out = FaceVectorField::zeros(g);
    for j in 0..ny {
        for i in 0..=nx {
            let west = if i == 0 { bc.ghost(f.at(0, j)) } else { f.at(i - 1, j) };
            let east = if i == nx { bc.ghost(f.at(nx - 1, j)) } else { f.at(i, j) };
            out.x[g.xface_idx(i, j)] = 0.5 * (east + west);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let south = if j == 0 { bc.ghost(f.at(i, 0)) } else { f.at(i, j - 1) };
            let north = if j == ny { bc.ghost(f.at(i, ny - 1)) } else { f.at(i, j) };
            out.y[g.yface_idx(i, j)] = 0.5 * (north + south);
        }
    }
    out
}

/// Per-cell net outflow of the face field divided by the spacing.
pub fn divergence_from_faces(v: &FaceVectorField) -> ScalarField {
    let g = *v.grid();
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let dx = (v.xf(i + 1, j) - v.xf(i, j)) / g.hx;
            let dy = (v.yf(i, j + 1) - v.yf(i, j)) / g.hy;
            out.data[g.idx(i, j)] = dx + dy;
        }
    }
    out
}

/// Five-point Laplacian, defined as `div(grad f)`.
pub fn laplacian(f: &ScalarField, bc: Condition) -> ScalarField {
    divergence_from_faces(&gradient_to_faces(f, bc))
}

/// Midpoint quadrature `sum f_i hx hy`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.data().iter().sum::<f64>() * f.grid().cell_volume()
}

/// Net outward flux of a face field through the boundary, `int_{dOmega} v.nu`.
pub fn boundary_flux(v: &FaceVectorField) -> f64 {
    let g = v.grid();
    let mut s = 0.0;
    for j in 0..g.ny {
        s += (v.xf(g.nx, j) - v.xf(0, j)) * g.hy;
    }
    for i in 0..g.nx {
        s += (v.yf(i, g.ny) - v.yf(i, 0)) * g.hx;
    }
    s
}
