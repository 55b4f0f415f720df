//! Darcy closure with a Korteweg forcing.
//!
//! `u = -grad(pi) + k`, `div u = S_T`, where the Korteweg flux
//! `k = avg(mu) grad(phi)` lives on faces. The pressure solves
//! `-lap(pi) = S_T - div(k)` with the same face gradient that builds `u`, so
//! the discrete divergence of `u` misses `S_T` only by the linear-solver
//! residual.

use crate::elliptic::{self, EllipticProblem, SolveReport};
use crate::error::Error;
use crate::fields::{
    divergence_from_faces, face_average, gradient_to_faces, BoundarySpec, Condition,
    FaceVectorField, ScalarField,
};

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub pi: ScalarField,
    pub u: FaceVectorField,
    /// `max |div u - S_T|`.
    pub div_residual: f64,
    pub report: SolveReport,
}

/// Face flux `avg(mu) grad(phi)`.
pub fn korteweg_flux(mu: &ScalarField, phi: &ScalarField, bc: &BoundarySpec) -> FaceVectorField {
    let mu_f = face_average(mu, bc.mu);
    let grad_phi = gradient_to_faces(phi, bc.phi);
    mu_f.zip_map(&grad_phi, |a, b| a * b)
}

/// Solve for pressure and velocity. `tol` bounds the Euclidean norm of the
/// pressure residual, which is exactly `div u - S_T` cell by cell.
pub fn solve_darcy(
    mu: &ScalarField,
    phi: &ScalarField,
    st_field: &ScalarField,
    bc: &BoundarySpec,
    tol: f64,
) -> Result<FlowResult, Error> {
    let grid = *phi.grid();
    let k = korteweg_flux(mu, phi, bc);
    let div_k = divergence_from_faces(&k);
    let rhs = st_field.zip_map(&div_k, |s, d| s - d);
    let problem = match bc.pi {
        Condition::DirichletZero => EllipticProblem::poisson(rhs, Condition::DirichletZero),
        Condition::NoFlux | Condition::NeumannZero => {
            EllipticProblem::poisson(rhs, Condition::NoFlux)
        }
        Condition::DirichletOne => {
            return Err(Error::InvalidProblem(
                "pressure supports zero Dirichlet or no-flux closure".into(),
            ))
        }
    };
    let b_norm = problem.rhs.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel_tol = tol / b_norm.max(1.0);
    let (pi, report) = elliptic::solve(&problem, rel_tol, elliptic::default_max_iter(&grid))?;
    let grad_pi = gradient_to_faces(&pi, problem.bc);
    let u = k.zip_map(&grad_pi, |kf, g| kf - g);
    let div_u = divergence_from_faces(&u);
    let div_residual = div_u.max_diff(st_field);
    Ok(FlowResult {
        pi,
        u,
        div_residual,
        report,
    })
}

/// Gradient of a cell field at the interior grid nodes, averaging the two
/// adjacent face differences in each direction. Nodes are indexed
/// `(i, j)` for `1 <= i < nx`, `1 <= j < ny`, at `(i hx, j hy)`.
fn node_gradient(f: &ScalarField, i: usize, j: usize) -> (f64, f64) {
    let g = f.grid();
    let fx = 0.5 * ((f.at(i, j - 1) - f.at(i - 1, j - 1)) + (f.at(i, j) - f.at(i - 1, j))) / g.hx();
    let fy = 0.5 * ((f.at(i - 1, j) - f.at(i - 1, j - 1)) + (f.at(i, j) - f.at(i, j - 1))) / g.hy();
    (fx, fy)
}

/// Scalar curl `d_x u_y - d_y u_x` at the interior nodes, row-major over
/// `(nx - 1) x (ny - 1)`.
pub fn node_curl(u: &FaceVectorField) -> Vec<f64> {
    let g = *u.grid();
    let mut out = Vec::with_capacity((g.nx() - 1) * (g.ny() - 1));
    for j in 1..g.ny() {
        for i in 1..g.nx() {
            let duy_dx = (u.yf(i, j) - u.yf(i - 1, j)) / g.hx();
            let dux_dy = (u.xf(i, j) - u.xf(i, j - 1)) / g.hy();
            out.push(duy_dx - dux_dy);
        }
    }
    out
}

/// Discrete L2 norm over interior nodes of `curl u - (mu_x phi_y - mu_y phi_x)`.
pub fn curl_residual(u: &FaceVectorField, mu: &ScalarField, phi: &ScalarField) -> f64 {
    let g = *u.grid();
    let curl = node_curl(u);
    let mut s = 0.0;
    let mut k = 0;
    for j in 1..g.ny() {
        for i in 1..g.nx() {
            let (mx, my) = node_gradient(mu, i, j);
            let (px, py) = node_gradient(phi, i, j);
            let d = curl[k] - (mx * py - my * px);
            s += d * d;
            k += 1;
        }
    }
    (s * g.cell_volume()).sqrt()
}

/// Discrete L2 norm over interior nodes of `curl u - cross(x, y)`, where
/// `cross` is a known `mu_x phi_y - mu_y phi_x`. With [`curl_residual`] the
/// identity holds to round-off on this stencil, so convergence toward the
/// continuous cross product has to be measured against exact data.
pub fn curl_consistency_error(u: &FaceVectorField, cross: impl Fn(f64, f64) -> f64) -> f64 {
    let g = *u.grid();
    let curl = node_curl(u);
    let mut s = 0.0;
    let mut k = 0;
    for j in 1..g.ny() {
        for i in 1..g.nx() {
            let d = curl[k] - cross(i as f64 * g.hx(), j as f64 * g.hy());
            s += d * d;
            k += 1;
        }
    }
    (s * g.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::unit_square(n).unwrap()
    }

    #[test]
    fn zero_forcing_gives_rest() {
        let g = grid(8);
        let phi = ScalarField::from_fn(g, |x, y| 0.5 + 0.1 * x * y);
        let r = solve_darcy(
            &ScalarField::zeros(g),
            &phi,
            &ScalarField::zeros(g),
            &BoundarySpec::default(),
            1e-10,
        )
        .unwrap();
        assert_eq!(r.pi.max_abs(), 0.0);
        assert_eq!(r.u.max_abs(), 0.0);
    }

    #[test]
    fn constant_phi_reduces_to_poisson() {
        let g = grid(16);
        let st = ScalarField::from_fn(g, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let mu = ScalarField::from_fn(g, |x, _| x);
        let phi = ScalarField::constant(g, 0.4);
        let r = solve_darcy(&mu, &phi, &st, &BoundarySpec::default(), 1e-11).unwrap();
        let p = EllipticProblem::poisson(st.clone(), Condition::DirichletZero);
        let (pi, _) = elliptic::solve(&p, 1e-13, 10_000).unwrap();
        assert!(r.pi.max_diff(&pi) < 1e-9);
        assert!(r.div_residual < 1e-10);
    }

    #[test]
    fn no_flux_mode_closes_the_boundary() {
        let g = grid(12);
        let phi = ScalarField::from_fn(g, |x, y| 0.5 + 0.2 * (PI * x).cos() * (PI * y).cos());
        let mu = ScalarField::from_fn(g, |x, y| (2.0 * x).sin() + y * y);
        let st = ScalarField::zeros(g);
        let r = solve_darcy(&mu, &phi, &st, &BoundarySpec::singular_limit(), 1e-10).unwrap();
        for j in 0..g.ny() {
            assert_eq!(r.u.xf(0, j), 0.0);
            assert_eq!(r.u.xf(g.nx(), j), 0.0);
        }
        for i in 0..g.nx() {
            assert_eq!(r.u.yf(i, 0), 0.0);
            assert_eq!(r.u.yf(i, g.ny()), 0.0);
        }
        assert!(r.div_residual < 1e-9);
        assert!(r.pi.mean().abs() < 1e-12);
        assert!(r.u.max_abs() > 1e-4);
    }

    #[test]
    fn energy_pairing_identity() {
        // -<u, k> = -|u|^2 + <pi, S_T>
        let g = grid(16);
        let phi = ScalarField::from_fn(g, |x, y| 0.5 + 0.2 * (3.0 * x).sin() * (2.0 * y).cos());
        let mu = ScalarField::from_fn(g, |x, y| x * (1.0 - x) * (1.0 + y));
        let st = ScalarField::from_fn(g, |x, y| (x - 0.3) * (y + 0.1));
        let bc = BoundarySpec::default();
        let r = solve_darcy(&mu, &phi, &st, &bc, 1e-12).unwrap();
        let k = korteweg_flux(&mu, &phi, &bc);
        let lhs = -r.u.dot(&k);
        let rhs = -r.u.norm_sq() + r.pi.dot(&st);
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs}");
    }

    #[test]
    fn discrete_curl_identity_is_exact() {
        let g = grid(10);
        let phi = ScalarField::from_fn(g, |x, y| 0.5 + 0.2 * (3.0 * x).sin() * y);
        let mu = ScalarField::from_fn(g, |x, y| x * x - (2.0 * y).cos());
        let st = ScalarField::from_fn(g, |x, _| x - 0.5);
        let r = solve_darcy(&mu, &phi, &st, &BoundarySpec::default(), 1e-12).unwrap();
        assert!(curl_residual(&r.u, &mu, &phi) < 1e-11);
    }

    #[test]
    fn gradient_fields_are_curl_free() {
        let g = grid(9);
        let f = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() * (y * y + 1.0));
        let grad = gradient_to_faces(&f, Condition::DirichletZero);
        assert!(node_curl(&grad).iter().all(|c| c.abs() < 1e-10));
    }
}
