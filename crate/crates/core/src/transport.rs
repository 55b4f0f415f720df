//! Explicit upwind update of the viable-cell fraction `P`.
//!
//! The update discretizes the advective form
//!
//! ```text
//! dP/dt + u . grad P = P [ -S_T + phi (T(n) - lambda1 - lambda2 H(n_N - n)) ] + delta lap P
//! ```
//!
//! with `T` the truncation to `[0, 1]`. The advective part is written as
//! `div(F) - P div(u)` with the upwind face flux `F = u P_up`. Boundary faces
//! with inflow (`u . nu < 0`) carry the boundary state `P = 0`, outflow faces
//! carry the interior value. Under the CFL restriction every new value is a
//! nonnegative combination of old values, so `P >= 0` is preserved, and the
//! reaction factor is nonpositive at `P = 1` for admissible `(phi, n)`.

use crate::error::Error;
use crate::fields::{divergence_from_faces, laplacian, Condition, FaceVectorField, ScalarField};
use crate::physics::{heaviside_smooth, source_st, ModelParams};

/// Largest admissible time step for the explicit update.
pub fn admissible_dt(u: &FaceVectorField, params: &ModelParams) -> f64 {
    let g = u.grid();
    let h = g.min_spacing();
    let mut dt = params.cfl * h / u.max_abs().max(1e-14);
    if params.delta > 0.0 {
        dt = dt.min(params.cfl * h * h / (4.0 * params.delta));
    }
    dt
}

/// Upwind face flux `u P_up` with inflow boundary state zero.
pub fn upwind_flux(p: &ScalarField, u: &FaceVectorField) -> FaceVectorField {
    let g = *p.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mut f = FaceVectorField::zeros(g);
    {
        let fx = f.x_faces_mut();
        for j in 0..ny {
            for i in 0..=nx {
                let v = u.xf(i, j);
                let up = if v > 0.0 {
                    if i == 0 { 0.0 } else { p.at(i - 1, j) }
                } else if i == nx {
                    0.0
                } else {
                    p.at(i, j)
                };
                fx[g.xface_idx(i, j)] = v * up;
            }
        }
    }
    {
        let fy = f.y_faces_mut();
        for j in 0..=ny {
            for i in 0..nx {
                let v = u.yf(i, j);
                let up = if v > 0.0 {
                    if j == 0 { 0.0 } else { p.at(i, j - 1) }
                } else if j == ny {
                    0.0
                } else {
                    p.at(i, j)
                };
                fy[g.yface_idx(i, j)] = v * up;
            }
        }
    }
    f
}

/// Pointwise reaction factor `-S_T + phi (T(n) - lambda1 - lambda2 H(n_N - n))`.
#[inline]
pub fn reaction_factor(n: f64, p: f64, phi: f64, params: &ModelParams) -> f64 {
    let h = heaviside_smooth(params.n_n - n, params.sigma_h);
    -source_st(n, p, phi, params)
        + phi * (n.clamp(0.0, 1.0) - params.lambda1 - params.lambda2 * h)
}

/// Advance `P` by one explicit step.
pub fn transport_step(
    p_old: &ScalarField,
    u: &FaceVectorField,
    phi: &ScalarField,
    n: &ScalarField,
    dt: f64,
    params: &ModelParams,
) -> Result<ScalarField, Error> {
    let admissible = admissible_dt(u, params);
    if dt > admissible {
        return Err(Error::CflViolation { dt, admissible });
    }
    let flux = upwind_flux(p_old, u);
    let div_f = divergence_from_faces(&flux);
    let div_u = divergence_from_faces(u);
    let diffusion = if params.delta > 0.0 {
        Some(laplacian(p_old, Condition::DirichletZero))
    } else {
        None
    };
    let mut out = p_old.clone();
    let data = out.data_mut();
    for k in 0..data.len() {
        let p = p_old.data()[k];
        let adv = div_f.data()[k] - p * div_u.data()[k];
        let react = p * reaction_factor(n.data()[k], p, phi.data()[k], params);
        let diff = diffusion.as_ref().map_or(0.0, |l| params.delta * l.data()[k]);
        data[k] = p + dt * (-adv + react + diff);
    }
    Ok(out)
}
