//! Semi-implicit Cahn-Hilliard step with convex splitting.
//!
//! One step solves, for `(phi, mu)` at the new time level,
//!
//! ```text
//! (phi - phi_old) - delta lap_D(mu - mu_old) - dt lap_D(mu) + dt A = 0
//! mu + eps^2 lap_N(phi) - C'(phi) - B'(phi_old)                  = 0
//! ```
//!
//! where `A = div(u phi_old) - phi_old S_T` is the lagged transport and source
//! term, `lap_D` closes `mu` with zero Dirichlet data and `lap_N` closes `phi`
//! with zero Neumann data. The logarithmic part `C` is implicit, the concave
//! part `B` explicit.
//!
//! The nonlinear system is solved by a damped Newton iteration on the
//! interleaved unknowns. Newton matrices are factorized with a sparse LU and
//! the factorization is kept and reused (a chord step) as long as it keeps
//! contracting the residual fast enough, which makes repeated calls within a
//! Picard loop cheap.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::elliptic::SolveReport;
use crate::error::Error;
use crate::fields::{
    divergence_from_faces, face_average, gradient_to_faces, laplacian, Condition,
    FaceVectorField, GridSpec, ScalarField,
};
use crate::physics::{
    d2c_unchecked, db_unchecked, dc_unchecked, potential_value, ModelParams, PotentialSpec,
};

/// Data of one Cahn-Hilliard step.
#[derive(Debug, Clone, Copy)]
pub struct ChStepInput<'a> {
    pub phi_old: &'a ScalarField,
    pub mu_old: &'a ScalarField,
    pub u: &'a FaceVectorField,
    pub st_field: &'a ScalarField,
    pub dt: f64,
    pub params: &'a ModelParams,
    pub potential: &'a PotentialSpec,
}

#[derive(Debug, Clone)]
pub struct ChStepOutput {
    pub phi: ScalarField,
    pub mu: ScalarField,
    /// Newton iterations and final residual.
    pub report: SolveReport,
}

/// Explicit transport/source term `div(u phi_f) - phi S_T`, with `phi_f` the
/// arithmetic face average. When `div u = S_T` this equals the cell average
/// of `u . grad(phi)` over the faces of each cell.
pub fn advective_term(u: &FaceVectorField, phi: &ScalarField, st: &ScalarField) -> ScalarField {
    let phi_f = face_average(phi, Condition::NeumannZero);
    let flux = u.zip_map(&phi_f, |a, b| a * b);
    let div = divergence_from_faces(&flux);
    let mut out = div;
    for ((o, &p), &s) in out.data_mut().iter_mut().zip(phi.data()).zip(st.data()) {
        *o -= p * s;
    }
    out
}

/// Discrete free energy `int eps^2/2 |grad phi|^2 + F(phi)`.
pub fn free_energy(phi: &ScalarField, eps: f64, potential: &PotentialSpec) -> Result<f64, Error> {
    let grad = gradient_to_faces(phi, Condition::NeumannZero);
    let mut bulk = 0.0;
    for &v in phi.data() {
        bulk += potential_value(v, potential)?;
    }
    Ok(0.5 * eps * eps * grad.norm_sq() + bulk * phi.grid().cell_volume())
}

/// Bulk part `int F(phi)` only.
pub fn bulk_energy(phi: &ScalarField, potential: &PotentialSpec) -> Result<f64, Error> {
    let mut bulk = 0.0;
    for &v in phi.data() {
        bulk += potential_value(v, potential)?;
    }
    Ok(bulk * phi.grid().cell_volume())
}

/// Settings of the nonlinear solve, independent of the model parameters so
/// the same machinery serves the `eps = 0` limit problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChSettings {
    pub dt: f64,
    pub eps2: f64,
    pub delta: f64,
    pub theta: f64,
    pub clamp_margin: f64,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl ChSettings {
    pub fn from_params(dt: f64, params: &ModelParams, potential: &PotentialSpec) -> Self {
        Self {
            dt,
            eps2: params.eps * params.eps,
            delta: params.delta,
            theta: potential.theta,
            clamp_margin: potential.clamp_margin,
            newton_tol: params.newton_tol,
            newton_max: params.newton_max,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct FactorKey {
    grid: (usize, usize, u64, u64),
    dt: u64,
    eps2: u64,
    delta: u64,
}

impl FactorKey {
    fn new(grid: &GridSpec, s: &ChSettings) -> Self {
        Self {
            grid: (grid.nx(), grid.ny(), grid.hx().to_bits(), grid.hy().to_bits()),
            dt: s.dt.to_bits(),
            eps2: s.eps2.to_bits(),
            delta: s.delta.to_bits(),
        }
    }
}

struct Factorization {
    key: FactorKey,
    lu: Lu<usize, f64>,
}

/// Reusable Cahn-Hilliard solver. Holds the symbolic analysis and the most
/// recent numeric factorization of the Newton matrix.
#[derive(Default)]
pub struct ChSolver {
    symbolic: Option<(FactorKey, SymbolicLu<usize>)>,
    factor: Option<Factorization>,
    /// Number of numeric factorizations performed so far.
    pub factorizations: usize,
}

impl std::fmt::Debug for ChSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChSolver")
            .field("factorizations", &self.factorizations)
            .finish()
    }
}

/// Accept a chord step only if it shrinks the residual at least this much.
const CHORD_CONTRACTION: f64 = 0.25;
const MAX_HALVINGS: usize = 40;

impl ChSolver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance `(phi, mu)` by one step of the regularized Cahn-Hilliard system.
    pub fn step(&mut self, input: &ChStepInput<'_>) -> Result<ChStepOutput, Error> {
        let ChStepInput {
            phi_old,
            mu_old,
            u,
            st_field,
            dt,
            params,
            potential,
        } = *input;
        if !(dt > 0.0) {
            return Err(Error::InvalidProblem(format!("time step must be > 0, got {dt}")));
        }
        let lo = potential.clamp_margin;
        if phi_old.min() < lo || phi_old.max() > 1.0 - lo {
            return Err(Error::DomainViolation {
                value: if phi_old.min() < lo { phi_old.min() } else { phi_old.max() },
                domain: "[clamp_margin, 1 - clamp_margin]",
            });
        }
        let advect = advective_term(u, phi_old, st_field);
        let settings = ChSettings::from_params(dt, params, potential);
        self.solve_system(phi_old, mu_old, &advect, &settings)
    }

    /// Solve the discrete system for a given explicit term `advect`.
    pub fn solve_system(
        &mut self,
        phi_old: &ScalarField,
        mu_old: &ScalarField,
        advect: &ScalarField,
        s: &ChSettings,
    ) -> Result<ChStepOutput, Error> {
        let grid = *phi_old.grid();
        let n = grid.num_cells();
        let key = FactorKey::new(&grid, s);
        let lo = s.clamp_margin;
        let hi = 1.0 - lo;

        // Fixed parts of the first equation: phi_old - delta lap(mu_old) - dt A
        let lap_mu_old = laplacian(mu_old, Condition::DirichletZero);
        let fixed1: Vec<f64> = (0..n)
            .map(|k| phi_old.data()[k] - s.delta * lap_mu_old.data()[k] - s.dt * advect.data()[k])
            .collect();
        let explicit_db: Vec<f64> = phi_old.data().iter().map(|&p| db_unchecked(p, s.theta)).collect();

        let mut phi: Vec<f64> = phi_old.data().iter().map(|&p| p.clamp(lo, hi)).collect();
        let mut mu: Vec<f64> = mu_old.data().to_vec();
        // A consistent starting chemical potential speeds up the first iterations.
        if s.delta == 0.0 {
            mu = chemical_potential(&grid, &phi, &explicit_db, s.eps2);
        }

        let residual = |phi: &[f64], mu: &[f64]| -> (Vec<f64>, f64) {
            residual_vector(&grid, phi, mu, &fixed1, &explicit_db, s)
        };

        let (mut r, mut rnorm) = residual(&phi, &mu);
        let mut iterations = 0;
        let mut fresh = false;
        while rnorm > s.newton_tol {
            if iterations >= s.newton_max {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: rnorm,
                });
            }
            let have_factor = matches!(&self.factor, Some(f) if f.key == key);
            if !have_factor {
                self.factorize(&grid, &phi, s, key)?;
                fresh = true;
            }
            let dir = self.solve_linear(&r);
            let (mut t, mut accepted) = (1.0, None);
            for _ in 0..MAX_HALVINGS {
                let trial_ok = (0..n).all(|k| {
                    let v = phi[k] + t * dir[2 * k];
                    v >= lo && v <= hi
                });
                if trial_ok {
                    let tp: Vec<f64> = (0..n).map(|k| phi[k] + t * dir[2 * k]).collect();
                    let tm: Vec<f64> = (0..n).map(|k| mu[k] + t * dir[2 * k + 1]).collect();
                    let (tr, tn) = residual(&tp, &tm);
                    let needed = if fresh { 1.0 } else { CHORD_CONTRACTION };
                    if tn < needed * rnorm || tn <= s.newton_tol {
                        accepted = Some((tp, tm, tr, tn));
                        break;
                    }
                    if !fresh {
                        // stale Jacobian: refactor instead of shrinking the step
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((tp, tm, tr, tn)) => {
                    phi = tp;
                    mu = tm;
                    r = tr;
                    rnorm = tn;
                    iterations += 1;
                    fresh = false;
                }
                None if !fresh => {
                    self.factorize(&grid, &phi, s, key)?;
                    fresh = true;
                }
                None => {
                    // A fresh Newton direction that cannot reduce the residual
                    // inside the domain. Project as a last resort.
                    let tp: Vec<f64> = (0..n).map(|k| (phi[k] + dir[2 * k]).clamp(lo, hi)).collect();
                    let tm: Vec<f64> = (0..n).map(|k| mu[k] + dir[2 * k + 1]).collect();
                    if tp.iter().chain(&tm).any(|v| !v.is_finite()) {
                        return Err(Error::DomainEscape);
                    }
                    let (tr, tn) = residual(&tp, &tm);
                    if !(tn < rnorm) {
                        return Err(Error::NewtonDivergence {
                            iterations,
                            residual: rnorm,
                        });
                    }
                    phi = tp;
                    mu = tm;
                    r = tr;
                    rnorm = tn;
                    iterations += 1;
                    fresh = false;
                }
            }
        }
        Ok(ChStepOutput {
            phi: ScalarField::from_vec(grid, phi)?,
            mu: ScalarField::from_vec(grid, mu)?,
            report: SolveReport {
                iterations,
                residual_norm: rnorm,
                converged: true,
            },
        })
    }

    fn factorize(
        &mut self,
        grid: &GridSpec,
        phi: &[f64],
        s: &ChSettings,
        key: FactorKey,
    ) -> Result<(), Error> {
        let mat = newton_matrix(grid, phi, s)?;
        let symbolic = match &self.symbolic {
            Some((k, sym)) if k.grid == key.grid && (k.eps2 == 0) == (key.eps2 == 0) => sym.clone(),
            _ => {
                let sym = SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                self.symbolic = Some((key, sym.clone()));
                sym
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        self.factor = Some(Factorization { key, lu });
        self.factorizations += 1;
        Ok(())
    }

    /// Newton direction `-J^{-1} r` in interleaved layout.
    fn solve_linear(&self, r: &[f64]) -> Vec<f64> {
        let f = self.factor.as_ref().expect("factorization present");
        let mut rhs = Mat::<f64>::from_fn(r.len(), 1, |i, _| -r[i]);
        f.lu.solve_in_place(rhs.as_mut());
        (0..r.len()).map(|i| rhs[(i, 0)]).collect()
    }
}

/// One step with a throwaway solver.
pub fn ch_step(input: &ChStepInput<'_>) -> Result<ChStepOutput, Error> {
    ChSolver::new().step(input)
}

fn chemical_potential(grid: &GridSpec, phi: &[f64], explicit_db: &[f64], eps2: f64) -> Vec<f64> {
    let f = ScalarField::from_vec(*grid, phi.to_vec()).expect("finite phi");
    let lap = laplacian(&f, Condition::NeumannZero);
    (0..phi.len())
        .map(|k| -eps2 * lap.data()[k] + dc_unchecked(phi[k]) + explicit_db[k])
        .collect()
}

/// Interleaved residual `[R1_0, R2_0, R1_1, ...]` and its scaled max-norm
/// `max(|R1|/dt, |R2|)`.
fn residual_vector(
    grid: &GridSpec,
    phi: &[f64],
    mu: &[f64],
    fixed1: &[f64],
    explicit_db: &[f64],
    s: &ChSettings,
) -> (Vec<f64>, f64) {
    let n = phi.len();
    let phi_f = ScalarField::from_vec(*grid, phi.to_vec()).expect("finite phi");
    let mu_f = ScalarField::from_vec(*grid, mu.to_vec()).expect("finite mu");
    let lap_mu = laplacian(&mu_f, Condition::DirichletZero);
    let lap_phi = laplacian(&phi_f, Condition::NeumannZero);
    let mut r = vec![0.0; 2 * n];
    let mut norm: f64 = 0.0;
    for k in 0..n {
        let r1 = phi[k] - (s.delta + s.dt) * lap_mu.data()[k] - fixed1[k];
        let r2 = mu[k] + s.eps2 * lap_phi.data()[k] - dc_unchecked(phi[k]) - explicit_db[k];
        r[2 * k] = r1;
        r[2 * k + 1] = r2;
        norm = norm.max((r1 / s.dt).abs()).max(r2.abs());
    }
    if !norm.is_finite() {
        norm = f64::INFINITY;
    }
    (r, norm)
}

/// Jacobian of [`residual_vector`] in interleaved ordering.
fn newton_matrix(
    grid: &GridSpec,
    phi: &[f64],
    s: &ChSettings,
) -> Result<SparseColMat<usize, f64>, Error> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ix2 = 1.0 / (grid.hx() * grid.hx());
    let iy2 = 1.0 / (grid.hy() * grid.hy());
    let sd = s.delta + s.dt;
    let mut t = Vec::with_capacity(2 * nx * ny * 7);
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.idx(i, j);
            let (rphi, rmu) = (2 * c, 2 * c + 1);
            let nbrs = [
                (i > 0, if i > 0 { grid.idx(i - 1, j) } else { 0 }, ix2),
                (i + 1 < nx, if i + 1 < nx { grid.idx(i + 1, j) } else { 0 }, ix2),
                (j > 0, if j > 0 { grid.idx(i, j - 1) } else { 0 }, iy2),
                (j + 1 < ny, if j + 1 < ny { grid.idx(i, j + 1) } else { 0 }, iy2),
            ];
            // R1 = phi - sd lap_D(mu) - fixed
            let mut diag_d = 0.0;
            // R2 = mu + eps2 lap_N(phi) - C'(phi) - fixed
            let mut diag_n = 0.0;
            for &(inside, nb, w) in &nbrs {
                if inside {
                    diag_d += w;
                    diag_n += w;
                    t.push(Triplet::new(rphi, 2 * nb + 1, -sd * w));
                    if s.eps2 != 0.0 {
                        t.push(Triplet::new(rmu, 2 * nb, s.eps2 * w));
                    }
                } else {
                    diag_d += 2.0 * w;
                }
            }
            t.push(Triplet::new(rphi, rphi, 1.0));
            t.push(Triplet::new(rphi, rmu, sd * diag_d));
            t.push(Triplet::new(rmu, rmu, 1.0));
            t.push(Triplet::new(rmu, rphi, -s.eps2 * diag_n - d2c_unchecked(phi[c])));
        }
    }
    let dim = 2 * nx * ny;
    SparseColMat::try_new_from_triplets(dim, dim, &t)
        .map_err(|e| Error::Factorization(format!("{e:?}")))
}

/// Mass ledger of one step: the change of `int phi` predicted by the source
/// and boundary fluxes,
/// `dt [int phi_old S_T - flux(u phi_f) + flux(grad mu)] + delta flux(grad(mu - mu_old))`.
pub fn mass_change_prediction(
    phi_old: &ScalarField,
    mu_old: &ScalarField,
    mu_new: &ScalarField,
    u: &FaceVectorField,
    st: &ScalarField,
    dt: f64,
    delta: f64,
) -> f64 {
    use crate::fields::{boundary_flux, integrate};
    let phi_f = face_average(phi_old, Condition::NeumannZero);
    let adv_flux = boundary_flux(&u.zip_map(&phi_f, |a, b| a * b));
    let source = integrate(&phi_old.zip_map(st, |p, s| p * s));
    let diff_flux = boundary_flux(&gradient_to_faces(mu_new, Condition::DirichletZero));
    let dmu = mu_new.zip_map(mu_old, |a, b| a - b);
    let reg_flux = boundary_flux(&gradient_to_faces(&dmu, Condition::DirichletZero));
    dt * (source - adv_flux + diff_flux) + delta * reg_flux
}
