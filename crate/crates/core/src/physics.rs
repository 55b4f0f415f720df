//! Mixing potential, constitutive functions and source terms of the model,
//! plus validation of parameters and initial data.
//!
//! The potential is `F = C + B` with the logarithmic part
//! `C(phi) = phi ln phi + (1 - phi) ln(1 - phi)` and the concave quadratic
//! `B(phi) = theta phi (1 - phi)`. Mitotic rate and nutrient uptake rate are
//! fixed to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};
use crate::fields::ScalarField;

/// Model constants, constitutive choices and solver tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Apoptosis rate.
    pub lambda1: f64,
    /// Necrosis rate.
    pub lambda2: f64,
    /// Lysing rate.
    pub lambda3: f64,
    pub nu1: f64,
    pub nu2: f64,
    /// Capillary nutrient level.
    pub n_c: f64,
    /// Necrotic threshold.
    pub n_n: f64,
    /// Strength of the concave part of the potential.
    pub theta: f64,
    /// Interface coefficient; `eps = 1` is the unscaled system.
    pub eps: f64,
    /// Regularization strength of the approximating scheme.
    pub delta: f64,
    /// Width of the smoothed Heaviside function.
    pub sigma_h: f64,
    /// Iterates of the Cahn-Hilliard Newton solve are kept in
    /// `[clamp_margin, 1 - clamp_margin]`.
    pub clamp_margin: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
    pub lin_tol: f64,
    /// Courant number of the explicit transport update.
    pub cfl: f64,
    /// Number of passes of the outer source update per step. One pass lags
    /// the sources from the start-of-step nutrient solve.
    pub source_passes: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            nu1: 1.0,
            nu2: 1.0,
            n_c: 0.5,
            n_n: 0.4,
            theta: 2.5,
            eps: 1.0,
            delta: 0.0,
            sigma_h: 0.05,
            clamp_margin: 1e-9,
            picard_tol: 1e-10,
            picard_max: 50,
            newton_tol: 1e-9,
            newton_max: 50,
            lin_tol: 1e-10,
            cfl: 0.25,
            source_passes: 1,
        }
    }
}

impl ModelParams {
    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec {
            theta: self.theta,
            clamp_margin: self.clamp_margin,
        }
    }

    /// Parameter checks only; see [`validate`] for the initial data.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, tag: &'static str, message: String| {
            if !ok {
                out.push(Violation { tag, message });
            }
        };
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            check(v >= 0.0, "aHl", format!("{name} >= 0 (got {v})"));
        }
        check(
            self.n_c > 0.0 && self.n_c < 1.0,
            "aQ",
            format!("0 < n_c < 1 (got {})", self.n_c),
        );
        check(self.nu1 >= 0.0, "aQ", format!("nu1 >= 0 (got {})", self.nu1));
        check(self.nu2 >= 0.0, "aQ", format!("nu2 >= 0 (got {})", self.nu2));
        check(
            (0.0..=1.0).contains(&self.n_n),
            "n_N",
            format!("0 <= n_N <= 1 (got {})", self.n_n),
        );
        check(self.theta >= 0.0, "theta", format!("theta >= 0 (got {})", self.theta));
        check(self.eps > 0.0, "eps", format!("eps > 0 (got {})", self.eps));
        check(
            self.delta >= 0.0 && self.delta < 0.25,
            "delta",
            format!("0 <= delta < 1/4 (got {})", self.delta),
        );
        check(self.sigma_h > 0.0, "H", format!("sigma_h > 0 (got {})", self.sigma_h));
        check(
            self.clamp_margin > 0.0 && self.clamp_margin < 0.5,
            "potential",
            format!("0 < clamp_margin < 1/2 (got {})", self.clamp_margin),
        );
        check(
            self.cfl > 0.0 && self.cfl <= 1.0,
            "cfl",
            format!("0 < cfl <= 1 (got {})", self.cfl),
        );
        for (name, v) in [
            ("picard_tol", self.picard_tol),
            ("newton_tol", self.newton_tol),
            ("lin_tol", self.lin_tol),
        ] {
            check(v > 0.0, "solver", format!("{name} > 0 (got {v})"));
        }
        check(self.picard_max > 0, "solver", "picard_max > 0".into());
        check(self.newton_max > 0, "solver", "newton_max > 0".into());
        check(self.source_passes > 0, "solver", "source_passes > 0".into());
        // NaN fails every comparison above except the negated ones; catch it here.
        let all = [
            self.lambda1,
            self.lambda2,
            self.lambda3,
            self.nu1,
            self.nu2,
            self.n_c,
            self.n_n,
            self.theta,
            self.eps,
            self.delta,
            self.sigma_h,
            self.clamp_margin,
            self.picard_tol,
            self.newton_tol,
            self.lin_tol,
            self.cfl,
        ];
        check(
            all.iter().all(|v| v.is_finite()),
            "finite",
            "all parameters finite".into(),
        );
        out
    }
}

/// `F = C + B` together with the numerical floor of its domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub theta: f64,
    pub clamp_margin: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        ModelParams::default().potential()
    }
}

impl PotentialSpec {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }

    /// Project into `[clamp_margin, 1 - clamp_margin]`.
    #[inline]
    pub fn clamp(&self, phi: f64) -> f64 {
        phi.clamp(self.clamp_margin, 1.0 - self.clamp_margin)
    }

    /// Lower bound of `F''` on `(0, 1)`, attained at `phi = 1/2`.
    pub fn min_curvature(&self) -> f64 {
        4.0 - 2.0 * self.theta
    }
}

#[inline]
fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `F(phi)` for `phi` in `[0, 1]`, using `x ln x -> 0` at the endpoints.
pub fn potential_value(phi: f64, p: &PotentialSpec) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::DomainViolation {
            value: phi,
            domain: "[0, 1]",
        });
    }
    Ok(xlnx(phi) + xlnx(1.0 - phi) + p.theta * phi * (1.0 - phi))
}

fn open_unit(phi: f64) -> Result<(), Error> {
    if phi > 0.0 && phi < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainViolation {
            value: phi,
            domain: "(0, 1)",
        })
    }
}

/// `C'(phi) = ln(phi / (1 - phi))`.
pub fn potential_dc(phi: f64) -> Result<f64, Error> {
    open_unit(phi)?;
    Ok(dc_unchecked(phi))
}

/// `B'(phi) = theta (1 - 2 phi)`.
pub fn potential_db(phi: f64, p: &PotentialSpec) -> Result<f64, Error> {
    open_unit(phi)?;
    Ok(db_unchecked(phi, p.theta))
}

/// `F''(phi) = 1 / (phi (1 - phi)) - 2 theta`.
pub fn potential_d2(phi: f64, p: &PotentialSpec) -> Result<f64, Error> {
    open_unit(phi)?;
    Ok(d2c_unchecked(phi) - 2.0 * p.theta)
}

/// `F'(phi) = C'(phi) + B'(phi)`.
pub fn potential_d1(phi: f64, p: &PotentialSpec) -> Result<f64, Error> {
    open_unit(phi)?;
    Ok(dc_unchecked(phi) + db_unchecked(phi, p.theta))
}

#[inline]
pub(crate) fn dc_unchecked(phi: f64) -> f64 {
    (phi / (1.0 - phi)).ln()
}

#[inline]
pub(crate) fn d2c_unchecked(phi: f64) -> f64 {
    1.0 / (phi * (1.0 - phi))
}

#[inline]
pub(crate) fn db_unchecked(phi: f64, theta: f64) -> f64 {
    theta * (1.0 - 2.0 * phi)
}

/// Logistic smoothing of the Heaviside function, `1 / (1 + exp(-s / sigma))`.
#[inline]
pub fn heaviside_smooth(s: f64, sigma_h: f64) -> f64 {
    1.0 / (1.0 + (-s / sigma_h).exp())
}

/// Cubic smoothstep `c^2 (3 - 2c)` of `c = clamp(phi, 0, 1)`.
#[inline]
pub fn q_interp(phi: f64) -> f64 {
    let c = phi.clamp(0.0, 1.0);
    c * c * (3.0 - 2.0 * c)
}

/// Total tumor source `S_T = n P - lambda3 (phi - P)`.
#[inline]
pub fn source_st(n: f64, p: f64, phi: f64, params: &ModelParams) -> f64 {
    n * p - params.lambda3 * (phi - p)
}

/// Dead-cell source `S_D = (lambda1 + lambda2 H(n_N - n)) P - lambda3 (phi - P)`.
#[inline]
pub fn source_sd(n: f64, p: f64, phi: f64, params: &ModelParams) -> f64 {
    let h = heaviside_smooth(params.n_n - n, params.sigma_h);
    (params.lambda1 + params.lambda2 * h) * p - params.lambda3 * (phi - p)
}

/// Nutrient transfer coefficient `kappa(phi) = nu1 (1 - Q) + nu2 Q`.
#[inline]
pub fn transfer_coefficient(phi: f64, params: &ModelParams) -> f64 {
    let q = q_interp(phi);
    params.nu1 * (1.0 - q) + params.nu2 * q
}

/// Capillary supply `T_c = kappa(phi) (n_c - n)`.
#[inline]
pub fn nutrient_tc(n: f64, phi: f64, params: &ModelParams) -> f64 {
    transfer_coefficient(phi, params) * (params.n_c - n)
}

/// Check parameters and initial data. Every failed assumption is reported.
pub fn validate(
    params: &ModelParams,
    phi0: &ScalarField,
    p0: &ScalarField,
) -> Result<(), Error> {
    let mut v = params.violations();
    let in_unit = |f: &ScalarField| f.data().iter().all(|x| (0.0..=1.0).contains(x));
    if !in_unit(phi0) {
        v.push(Violation {
            tag: "iphi",
            message: format!("0 <= Phi_0 <= 1 (range [{}, {}])", phi0.min(), phi0.max()),
        });
    }
    if !in_unit(p0) {
        v.push(Violation {
            tag: "iP",
            message: format!("0 <= P_0 <= 1 (range [{}, {}])", p0.min(), p0.max()),
        });
    }
    if phi0.grid() != p0.grid() {
        v.push(Violation {
            tag: "grid",
            message: "Phi_0 and P_0 live on different grids".into(),
        });
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(v))
    }
}
