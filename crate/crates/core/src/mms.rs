//! Manufactured-solution convergence suite for the elliptic solver.

use std::f64::consts::PI;

use crate::elliptic::{self, EllipticProblem};
use crate::error::Error;
use crate::fields::{Condition, GridSpec, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct MmsCase {
    pub name: &'static str,
    /// `(h, discrete L2 error)` per grid, finest last.
    pub errors: Vec<(f64, f64)>,
}

impl MmsCase {
    /// Observed orders between consecutive grids.
    pub fn orders(&self) -> Vec<f64> {
        self.errors
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln())
            .collect()
    }
}

fn l2_error(x: &ScalarField, exact: &ScalarField) -> f64 {
    x.l2_diff(exact)
}

fn run_case(
    n: usize,
    exact: impl Fn(f64, f64) -> f64,
    coeff: impl Fn(f64, f64) -> f64,
    forcing: impl Fn(f64, f64) -> f64,
    bc: Condition,
) -> Result<f64, Error> {
    let g = GridSpec::unit_square(n)?;
    let c = ScalarField::from_fn(g, coeff);
    let rhs = ScalarField::from_fn(g, forcing);
    let mut ex = ScalarField::from_fn(g, exact);
    let problem = if c.max() == 0.0 {
        EllipticProblem::poisson(rhs, bc)
    } else {
        EllipticProblem::helmholtz(c, rhs, bc)
    };
    let problem = if problem.bc == Condition::NoFlux || problem.bc == Condition::NeumannZero {
        // discrete compatibility: remove the quadrature error of the mean
        let mut p = problem;
        if p.coeff0.max() == 0.0 {
            let m = p.rhs.mean();
            p.rhs = p.rhs.map(|v| v - m);
            let me = ex.mean();
            ex = ex.map(|v| v - me);
        }
        p
    } else {
        problem
    };
    let (x, _) = elliptic::solve(&problem, 1e-12, elliptic::default_max_iter(&g))?;
    Ok(l2_error(&x, &ex))
}

/// Poisson (Dirichlet and Neumann) and variable-coefficient Helmholtz cases
/// on the given resolutions.
pub fn run_suite(resolutions: &[usize]) -> Result<Vec<MmsCase>, Error> {
    let mut cases = Vec::new();

    let mut errs = Vec::new();
    for &n in resolutions {
        let e = run_case(
            n,
            |x, y| (PI * x).sin() * (PI * y).sin(),
            |_, _| 0.0,
            |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(),
            Condition::DirichletZero,
        )?;
        errs.push((1.0 / n as f64, e));
    }
    cases.push(MmsCase {
        name: "poisson-dirichlet",
        errors: errs,
    });

    let mut errs = Vec::new();
    for &n in resolutions {
        let e = run_case(
            n,
            |x, y| (PI * x).cos() * (2.0 * PI * y).cos(),
            |_, _| 0.0,
            |x, y| 5.0 * PI * PI * (PI * x).cos() * (2.0 * PI * y).cos(),
            Condition::NoFlux,
        )?;
        errs.push((1.0 / n as f64, e));
    }
    cases.push(MmsCase {
        name: "poisson-neumann",
        errors: errs,
    });

    let mut errs = Vec::new();
    for &n in resolutions {
        let u = |x: f64, y: f64| (PI * x).sin() * (2.0 * PI * y).sin();
        let c = |x: f64, y: f64| 1.0 + 10.0 * x * y;
        let e = run_case(
            n,
            u,
            c,
            move |x, y| (5.0 * PI * PI + c(x, y)) * u(x, y),
            Condition::DirichletZero,
        )?;
        errs.push((1.0 / n as f64, e));
    }
    cases.push(MmsCase {
        name: "helmholtz-dirichlet",
        errors: errs,
    });

    let mut errs = Vec::new();
    for &n in resolutions {
        let u = |x: f64, y: f64| (PI * x).cos() * (PI * y).cos() + 0.5;
        let c = |x: f64, _y: f64| 2.0 + x;
        let e = run_case(
            n,
            u,
            c,
            move |x, y| 2.0 * PI * PI * (PI * x).cos() * (PI * y).cos() + c(x, y) * u(x, y),
            Condition::NeumannZero,
        )?;
        errs.push((1.0 / n as f64, e));
    }
    cases.push(MmsCase {
        name: "helmholtz-neumann",
        errors: errs,
    });

    Ok(cases)
}

/// Text table of errors and observed orders.
pub fn format_table(cases: &[MmsCase]) -> String {
    let mut s = String::from("case,h,l2_error,order\n");
    for c in cases {
        let orders = c.orders();
        for (k, (h, e)) in c.errors.iter().enumerate() {
            let o = if k == 0 {
                String::from("-")
            } else {
                format!("{:.4}", orders[k - 1])
            };
            s.push_str(&format!("{},{},{:.6e},{}\n", c.name, h, e, o));
        }
    }
    s
}
