//! Quasi-static nutrient: for fixed `(P, phi)` the nutrient equation
//! `-lap n + n P = kappa(phi) (n_c - n)` with `n = 1` on the boundary is the
//! linear Helmholtz problem `-lap n + (P + kappa) n = kappa n_c`. It is solved
//! for the shift `m = n - 1`, which has zero boundary data.

use crate::elliptic::{self, EllipticProblem, SolveReport};
use crate::error::Error;
use crate::fields::{Condition, ScalarField};
use crate::physics::{transfer_coefficient, ModelParams};

pub fn solve_nutrient(
    p: &ScalarField,
    phi: &ScalarField,
    params: &ModelParams,
    tol: f64,
) -> Result<(ScalarField, SolveReport), Error> {
    if p.min() < 0.0 {
        return Err(Error::InvalidProblem(format!(
            "nutrient uptake needs P >= 0, min is {}",
            p.min()
        )));
    }
    let kappa = phi.map(|f| transfer_coefficient(f, params));
    let coeff = p.zip_map(&kappa, |pv, k| pv + k);
    let rhs = kappa.zip_map(&coeff, |k, c| k * params.n_c - c);
    let problem = EllipticProblem::helmholtz(coeff, rhs, Condition::DirichletZero);
    let (m, report) = elliptic::solve(&problem, tol, elliptic::default_max_iter(p.grid()))?;
    Ok((m.map(|v| v + 1.0), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    #[test]
    fn no_uptake_no_supply_gives_unit_nutrient() {
        let g = GridSpec::unit_square(8).unwrap();
        let params = ModelParams {
            nu1: 0.0,
            nu2: 0.0,
            ..ModelParams::default()
        };
        let (n, _) = solve_nutrient(
            &ScalarField::zeros(g),
            &ScalarField::constant(g, 0.3),
            &params,
            1e-12,
        )
        .unwrap();
        assert!(n.max_diff(&ScalarField::constant(g, 1.0)) < 1e-14);
    }

    #[test]
    fn negative_uptake_is_rejected() {
        let g = GridSpec::unit_square(4).unwrap();
        let p = ScalarField::constant(g, -0.1);
        assert!(solve_nutrient(&p, &p, &ModelParams::default(), 1e-10).is_err());
    }

    #[test]
    fn raising_capillary_level_raises_nutrient() {
        let g = GridSpec::unit_square(10).unwrap();
        let p = ScalarField::from_fn(g, |x, y| 0.8 * x * y);
        let phi = ScalarField::from_fn(g, |x, _| x);
        let lo = ModelParams {
            n_c: 0.3,
            ..ModelParams::default()
        };
        let hi = ModelParams {
            n_c: 0.6,
            ..ModelParams::default()
        };
        let (a, _) = solve_nutrient(&p, &phi, &lo, 1e-12).unwrap();
        let (b, _) = solve_nutrient(&p, &phi, &hi, 1e-12).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x < y));
        assert!(a.min() >= 0.0 && b.max() <= 1.0);
    }
}
