//! Matrix-free preconditioned conjugate gradient for the symmetric elliptic
//! problems of the model:
//!
//! ```text
//! -lap(x) + c x = b      with c >= 0
//! ```
//!
//! under homogeneous Dirichlet or Neumann/no-flux closure. The pure Neumann
//! Poisson problem (`c == 0`) is solved in the zero-mean gauge by projecting
//! out the constant mode every iteration.

use crate::error::Error;
use crate::fields::{laplacian, Condition, GridSpec, ScalarField};

/// Choice of the additive constant for singular Neumann problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    None,
    ZeroMean,
}

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    /// Zeroth-order coefficient, nonnegative.
    pub coeff0: ScalarField,
    pub rhs: ScalarField,
    /// Homogeneous closure of the unknown. Inhomogeneous data is handled by the
    /// caller through a shift.
    pub bc: Condition,
    pub gauge: Gauge,
}

impl EllipticProblem {
    /// `-lap(x) = rhs`.
    pub fn poisson(rhs: ScalarField, bc: Condition) -> Self {
        let gauge = if bc.is_dirichlet() {
            Gauge::None
        } else {
            Gauge::ZeroMean
        };
        Self {
            coeff0: ScalarField::zeros(*rhs.grid()),
            rhs,
            bc,
            gauge,
        }
    }

    /// `-lap(x) + coeff0 x = rhs`.
    pub fn helmholtz(coeff0: ScalarField, rhs: ScalarField, bc: Condition) -> Self {
        Self {
            coeff0,
            rhs,
            bc,
            gauge: Gauge::None,
        }
    }

    fn check(&self) -> Result<(), Error> {
        if self.coeff0.grid() != self.rhs.grid() {
            return Err(Error::InvalidProblem("coefficient and rhs grids differ".into()));
        }
        if !self.rhs.is_finite() || !self.coeff0.is_finite() {
            return Err(Error::NonFinite("elliptic data".into()));
        }
        if self.coeff0.min() < 0.0 {
            return Err(Error::InvalidProblem(format!(
                "zeroth-order coefficient must be >= 0, min is {}",
                self.coeff0.min()
            )));
        }
        if self.bc == Condition::DirichletOne {
            return Err(Error::InvalidProblem(
                "only homogeneous boundary data; shift the unknown".into(),
            ));
        }
        let singular = !self.bc.is_dirichlet() && self.coeff0.max() == 0.0;
        match (singular, self.gauge) {
            (true, Gauge::None) => Err(Error::InvalidProblem(
                "pure Neumann problem needs the zero-mean gauge".into(),
            )),
            (false, Gauge::ZeroMean) => Err(Error::InvalidProblem(
                "zero-mean gauge is only meaningful for the pure Neumann problem".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Euclidean norm of the final true residual `b - A x`.
    pub residual_norm: f64,
    pub converged: bool,
}

/// Apply `-lap(x) + c x` with the homogeneous closure `bc`.
pub fn apply_operator(x: &ScalarField, coeff0: &ScalarField, bc: Condition) -> ScalarField {
    let lap = laplacian(x, bc);
    let mut out = lap;
    for ((o, &xi), &c) in out.data_mut().iter_mut().zip(x.data()).zip(coeff0.data()) {
        *o = -*o + c * xi;
    }
    out
}

fn diagonal(grid: &GridSpec, coeff0: &ScalarField, bc: Condition) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ix2 = 1.0 / (grid.hx() * grid.hx());
    let iy2 = 1.0 / (grid.hy() * grid.hy());
    let wall = if bc.is_dirichlet() { 2.0 } else { 0.0 };
    let mut d = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut v = coeff0.at(i, j);
            v += if i == 0 { wall } else { 1.0 } * ix2;
            v += if i == nx - 1 { wall } else { 1.0 } * ix2;
            v += if j == 0 { wall } else { 1.0 } * iy2;
            v += if j == ny - 1 { wall } else { 1.0 } * iy2;
            d.push(v);
        }
    }
    d
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solve to relative residual `tol`, i.e. `|b - A x| <= tol * max(1, |b|)`.
pub fn solve(
    problem: &EllipticProblem,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveReport), Error> {
    solve_observed(problem, tol, max_iter, |_, _| {})
}

/// Default iteration cap, `10 nx ny`.
pub fn default_max_iter(grid: &GridSpec) -> usize {
    10 * grid.num_cells()
}

/// As [`solve`], calling `observe(iteration, iterate)` after every update.
pub fn solve_observed(
    problem: &EllipticProblem,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(usize, &[f64]),
) -> Result<(ScalarField, SolveReport), Error> {
    problem.check()?;
    let grid = *problem.rhs.grid();
    let bc = problem.bc;
    let zero_mean = problem.gauge == Gauge::ZeroMean;

    let mut b = problem.rhs.data().to_vec();
    if zero_mean {
        let n = b.len() as f64;
        let net = b.iter().sum::<f64>();
        // component of b along the normalized constant vector
        if (net / n.sqrt()).abs() > tol * norm(&b).max(1.0) {
            return Err(Error::IncompatibleRhs {
                net: net * grid.cell_volume(),
            });
        }
        remove_mean(&mut b);
    }
    let b_norm = norm(&b);
    let target = tol * b_norm.max(1.0);

    let diag = diagonal(&grid, &problem.coeff0, bc);
    let apply = |v: &[f64]| -> Vec<f64> {
        let f = ScalarField::from_vec(grid, v.to_vec()).expect("finite iterate");
        apply_operator(&f, &problem.coeff0, bc).into_vec()
    };

    let n = b.len();
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut best = (f64::INFINITY, x.clone());

    // Restart from the true residual whenever the recurrence claims convergence
    // but the recomputed residual disagrees.
    for _restart in 0..8 {
        let ax = apply(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if zero_mean {
            remove_mean(&mut r);
        }
        let true_norm = norm(&r);
        if true_norm < best.0 {
            best = (true_norm, x.clone());
        }
        if true_norm <= target {
            let sol = finish(grid, x, zero_mean);
            return Ok((
                sol,
                SolveReport {
                    iterations,
                    residual_norm: true_norm,
                    converged: true,
                },
            ));
        }
        if iterations >= max_iter {
            break;
        }
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
        if zero_mean {
            remove_mean(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            let ap = apply(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            if zero_mean {
                remove_mean(&mut r);
            }
            iterations += 1;
            observe(iterations, &x);
            if norm(&r) <= target {
                break;
            }
            for k in 0..n {
                z[k] = r[k] / diag[k];
            }
            if zero_mean {
                remove_mean(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
    }

    let report = SolveReport {
        iterations,
        residual_norm: best.0,
        converged: false,
    };
    Err(Error::NoConvergence {
        best: Box::new(finish(grid, best.1, zero_mean)),
        report,
    })
}

fn finish(grid: GridSpec, mut x: Vec<f64>, zero_mean: bool) -> ScalarField {
    if zero_mean {
        remove_mean(&mut x);
    }
    ScalarField::from_vec(grid, x).expect("finite solution")
}
