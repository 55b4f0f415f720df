//! The coupled time loop.
//!
//! Each step runs, in order:
//!
//! 1. the quasi-static nutrient solve with the start-of-step `(P, phi)`;
//! 2. the source fields `S_T` (and through the transport reaction, `S_D`);
//! 3. a Picard loop alternating Darcy and Cahn-Hilliard solves until the
//!    increment of `phi` drops below `picard_tol`;
//! 4. the explicit transport update of `P` with the converged velocity;
//! 5. diagnostics.
//!
//! With `source_passes > 1` steps 1-4 are repeated with the nutrient and
//! sources re-evaluated from the end-of-step `(P, phi)`.

use std::io::Write;
use std::path::Path;

use crate::cahn_hilliard::{free_energy, mass_change_prediction, ChSolver, ChStepInput};
use crate::config::RunConfig;
use crate::error::Error;
use crate::fields::{
    gradient_to_faces, integrate, laplacian, BoundarySpec, Condition, FaceVectorField,
    ScalarField,
};
use crate::flow::solve_darcy;
use crate::nutrient::solve_nutrient;
use crate::physics::{dc_unchecked, db_unchecked, source_st, validate, ModelParams};
use crate::transport::transport_step;

/// Which parts of the model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All four equations with the default boundary conditions.
    Full,
    /// Cahn-Hilliard alone: `u = 0`, `S_T = 0`, `P` and `n` frozen.
    Decoupled,
    /// Sources off, no-flux pressure; `P` and `n` frozen.
    Limit,
}

impl Mode {
    pub fn boundary(self) -> BoundarySpec {
        match self {
            Mode::Limit => BoundarySpec::singular_limit(),
            _ => BoundarySpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub pi: ScalarField,
    pub p: ScalarField,
    pub n: ScalarField,
    pub u: FaceVectorField,
    /// Source `S_T` that the velocity of this state balances.
    pub st: ScalarField,
}

/// Per-step report. The first fields are the CSV columns, in order. Reals
/// are written in the shortest exponent form that round-trips.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub energy_balance_residual: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub l2_u: f64,
    pub div_residual: f64,
    pub mass_phi: f64,
    pub mass_ledger_residual: f64,
    pub picard_iters: usize,
    pub newton_iters: usize,
    /// Max-norm increments of `phi` over the Picard iterations of the last
    /// source pass.
    pub picard_increments: Vec<f64>,
    /// Largest `div u - S_T` over every flow solve of the step.
    pub max_flow_div_residual: f64,
}

pub const CSV_HEADER: &str = "step,t,energy,energy_balance_residual,phi_min,phi_max,p_min,p_max,n_min,n_max,l2_u,div_residual,mass_phi,mass_ledger_residual,picard_iters,newton_iters";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.step,
            self.t,
            self.energy,
            self.energy_balance_residual,
            self.phi_min,
            self.phi_max,
            self.p_min,
            self.p_max,
            self.n_min,
            self.n_max,
            self.l2_u,
            self.div_residual,
            self.mass_phi,
            self.mass_ledger_residual,
            self.picard_iters,
            self.newton_iters
        )
    }

    pub fn all_finite(&self) -> bool {
        [
            self.t,
            self.energy,
            self.energy_balance_residual,
            self.phi_min,
            self.phi_max,
            self.p_min,
            self.p_max,
            self.n_min,
            self.n_max,
            self.l2_u,
            self.div_residual,
            self.mass_phi,
            self.mass_ledger_residual,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Write diagnostics as CSV with [`CSV_HEADER`].
pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Signed residual of the discrete energy balance
/// `(E' - E)/dt + int |grad mu'|^2 + |u'|^2 - int pi' S_T`.
pub fn energy_balance_residual(
    prev: &SimState,
    next: &SimState,
    dt: f64,
    params: &ModelParams,
) -> Result<f64, Error> {
    let pot = params.potential();
    let e0 = free_energy(&prev.phi, params.eps, &pot)?;
    let e1 = free_energy(&next.phi, params.eps, &pot)?;
    let grad_mu = gradient_to_faces(&next.mu, Condition::DirichletZero);
    Ok((e1 - e0) / dt + grad_mu.norm_sq() + next.u.norm_sq() - next.pi.dot(&next.st))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldBounds {
    pub min: f64,
    pub max: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// `0 < phi < 1` strictly.
    pub phi: FieldBounds,
    /// `0 <= P <= 1 + 10 dt^2`.
    pub p: FieldBounds,
    /// `-tol <= n <= 1 + tol`.
    pub n: FieldBounds,
    /// Minimum of the dead-cell fraction `phi - P`.
    pub phi_d_min: f64,
    /// Minimum of the host fraction `1 - phi`.
    pub phi_h_min: f64,
    /// `phi - P < -tol` somewhere. Reported, not a failure.
    pub phi_d_negative: bool,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.phi.ok && self.p.ok && self.n.ok
    }

    /// Failed bounds, each naming the bound it breaks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.phi.ok {
            out.push(format!(
                "(ee7) 0 < phi < 1 failed: range [{}, {}]",
                self.phi.min, self.phi.max
            ));
        }
        if !self.p.ok {
            out.push(format!(
                "(ee13) 0 <= P <= 1 failed: range [{}, {}]",
                self.p.min, self.p.max
            ));
        }
        if !self.n.ok {
            out.push(format!(
                "(ee13--) 0 <= n <= 1 failed: range [{}, {}]",
                self.n.min, self.n.max
            ));
        }
        out
    }
}

/// Check the pointwise bounds of a state. `dt` enters the `P` bound, `tol`
/// the nutrient bound and the `phi - P` flag.
pub fn check_bounds(state: &SimState, dt: f64, tol: f64) -> BoundsReport {
    let (phi_min, phi_max) = (state.phi.min(), state.phi.max());
    let (p_min, p_max) = (state.p.min(), state.p.max());
    let (n_min, n_max) = (state.n.min(), state.n.max());
    let phi_d = state.phi.zip_map(&state.p, |f, p| f - p);
    BoundsReport {
        phi: FieldBounds {
            min: phi_min,
            max: phi_max,
            ok: phi_min > 0.0 && phi_max < 1.0,
        },
        p: FieldBounds {
            min: p_min,
            max: p_max,
            ok: p_min >= 0.0 && p_max <= 1.0 + 10.0 * dt * dt,
        },
        n: FieldBounds {
            min: n_min,
            max: n_max,
            ok: n_min >= -tol && n_max <= 1.0 + tol,
        },
        phi_d_min: phi_d.min(),
        phi_h_min: 1.0 - phi_max,
        phi_d_negative: phi_d.min() < -tol,
    }
}

/// Initial chemical potential: `-eps^2 lap(phi) + F'(phi)` on the clamped
/// data, or zero when the regularization is active.
pub fn initial_mu(phi: &ScalarField, params: &ModelParams) -> ScalarField {
    if params.delta > 0.0 {
        return ScalarField::zeros(*phi.grid());
    }
    let pot = params.potential();
    let clamped = phi.map(|v| pot.clamp(v));
    let lap = laplacian(&clamped, Condition::NeumannZero);
    let eps2 = params.eps * params.eps;
    clamped.zip_map(&lap, |f, l| -eps2 * l + dc_unchecked(f) + db_unchecked(f, pot.theta))
}

/// Coupled stepper. Owns the reusable Cahn-Hilliard factorization.
#[derive(Debug)]
pub struct Simulator {
    params: ModelParams,
    mode: Mode,
    bc: BoundarySpec,
    ch: ChSolver,
    steps_taken: usize,
}

impl Simulator {
    pub fn new(params: ModelParams, mode: Mode) -> Result<Self, Error> {
        let v = params.violations();
        if !v.is_empty() {
            return Err(Error::Validation(v));
        }
        if mode == Mode::Limit && params.theta >= 2.0 {
            return Err(Error::ConvexityViolation {
                theta: params.theta,
            });
        }
        Ok(Self {
            params,
            mode,
            bc: mode.boundary(),
            ch: ChSolver::new(),
            steps_taken: 0,
        })
    }

    /// As [`Simulator::new`] with explicit boundary conditions instead of the
    /// mode's defaults.
    pub fn with_boundary(params: ModelParams, mode: Mode, bc: BoundarySpec) -> Result<Self, Error> {
        let mut s = Self::new(params, mode)?;
        s.bc = bc;
        Ok(s)
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.bc
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of sparse factorizations used by the Cahn-Hilliard solver.
    pub fn factorizations(&self) -> usize {
        self.ch.factorizations
    }

    /// Build the state at `t = 0` from validated initial data.
    pub fn initial_state(&self, phi0: &ScalarField, p0: &ScalarField) -> Result<SimState, Error> {
        validate(&self.params, phi0, p0)?;
        let grid = *phi0.grid();
        let pot = self.params.potential();
        let phi = phi0.map(|v| pot.clamp(v));
        let mu = initial_mu(phi0, &self.params);
        let p = p0.clone();
        let (n, st) = self.nutrient_and_source(&p, &phi)?;
        let (pi, u) = match self.mode {
            Mode::Decoupled => (ScalarField::zeros(grid), FaceVectorField::zeros(grid)),
            _ => {
                let f = solve_darcy(&mu, &phi, &st, &self.bc, self.params.lin_tol)?;
                (f.pi, f.u)
            }
        };
        Ok(SimState {
            t: 0.0,
            phi,
            mu,
            pi,
            p,
            n,
            u,
            st,
        })
    }

    fn nutrient_and_source(
        &self,
        p: &ScalarField,
        phi: &ScalarField,
    ) -> Result<(ScalarField, ScalarField), Error> {
        let grid = *phi.grid();
        match self.mode {
            Mode::Full => {
                let (n, _) = solve_nutrient(p, phi, &self.params, self.params.lin_tol)?;
                let mut st = ScalarField::zeros(grid);
                for (k, s) in st.data_mut().iter_mut().enumerate() {
                    *s = source_st(n.data()[k], p.data()[k], phi.data()[k], &self.params);
                }
                Ok((n, st))
            }
            // frozen nutrient; the sources are switched off
            _ => Ok((ScalarField::constant(grid, 1.0), ScalarField::zeros(grid))),
        }
    }

    /// Advance one step of size `dt`.
    pub fn step(&mut self, state: &SimState, dt: f64) -> Result<(SimState, DiagnosticsRecord), Error> {
        let params = self.params.clone();
        let pot = params.potential();
        let grid = *state.phi.grid();

        let mut p_end = state.p.clone();
        let mut phi_end = state.phi.clone();
        let mut result = None;
        let mut picard_total = 0;
        let mut newton_total = 0;
        let mut max_div: f64 = 0.0;

        for _pass in 0..params.source_passes {
            let (n, st) = if self.mode == Mode::Full {
                self.nutrient_and_source(&p_end, &phi_end)?
            } else {
                (state.n.clone(), ScalarField::zeros(grid))
            };

            // Picard coupling of the (phi, mu) and (pi, u) blocks.
            let (mut pi, mut u) = match self.mode {
                Mode::Decoupled => (ScalarField::zeros(grid), FaceVectorField::zeros(grid)),
                _ => {
                    let f = solve_darcy(&state.mu, &state.phi, &st, &self.bc, params.lin_tol)?;
                    max_div = max_div.max(f.div_residual);
                    (f.pi, f.u)
                }
            };
            let mut phi_k = state.phi.clone();
            let mut mu_k = state.mu.clone();
            let mut u_used = u.clone();
            let mut increments = Vec::new();
            let mut converged = false;
            for _ in 0..params.picard_max {
                let out = self.ch.step(&ChStepInput {
                    phi_old: &state.phi,
                    mu_old: &state.mu,
                    u: &u,
                    st_field: &st,
                    dt,
                    params: &params,
                    potential: &pot,
                })?;
                newton_total += out.report.iterations;
                picard_total += 1;
                let incr = out.phi.max_diff(&phi_k);
                increments.push(incr);
                phi_k = out.phi;
                mu_k = out.mu;
                u_used = u.clone();
                if self.mode != Mode::Decoupled {
                    let f = solve_darcy(&mu_k, &phi_k, &st, &self.bc, params.lin_tol)?;
                    max_div = max_div.max(f.div_residual);
                    pi = f.pi;
                    u = f.u;
                }
                // Without a flow the first solve is already the fixed point.
                if incr < params.picard_tol || self.mode == Mode::Decoupled {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::PicardStall {
                    iterations: increments.len(),
                    increment: increments.last().copied().unwrap_or(f64::NAN),
                });
            }

            let p_new = match self.mode {
                Mode::Full => transport_step(&state.p, &u, &phi_k, &n, dt, &params)?,
                _ => state.p.clone(),
            };
            p_end = p_new.clone();
            phi_end = phi_k.clone();
            result = Some((phi_k, mu_k, pi, u, u_used, p_new, n, st, increments));
        }

        let (phi, mu, pi, u, u_used, p, n, st, increments) =
            result.expect("at least one source pass");
        let div_residual = {
            let d = crate::fields::divergence_from_faces(&u);
            d.max_diff(&st)
        };
        let predicted = mass_change_prediction(&state.phi, &state.mu, &mu, &u_used, &st, dt, params.delta);
        let mass_phi = integrate(&phi);
        let mass_ledger_residual = mass_phi - integrate(&state.phi) - predicted;

        let next = SimState {
            t: state.t + dt,
            phi,
            mu,
            pi,
            p,
            n,
            u,
            st,
        };
        self.steps_taken += 1;
        let energy = free_energy(&next.phi, params.eps, &pot)?;
        let record = DiagnosticsRecord {
            step: self.steps_taken,
            t: next.t,
            energy,
            energy_balance_residual: energy_balance_residual(state, &next, dt, &params)?,
            phi_min: next.phi.min(),
            phi_max: next.phi.max(),
            p_min: next.p.min(),
            p_max: next.p.max(),
            n_min: next.n.min(),
            n_max: next.n.max(),
            l2_u: next.u.norm_sq().sqrt(),
            div_residual,
            mass_phi,
            mass_ledger_residual,
            picard_iters: picard_total,
            newton_iters: newton_total,
            picard_increments: increments,
            max_flow_div_residual: max_div.max(div_residual),
        };
        Ok((next, record))
    }
}

/// Final state and per-step diagnostics of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SimState,
    pub records: Vec<DiagnosticsRecord>,
}

fn write_snapshots(dir: &Path, state: &SimState, step: usize) -> Result<(), Error> {
    for (name, f) in [
        ("phi", &state.phi),
        ("mu", &state.mu),
        ("pi", &state.pi),
        ("p", &state.p),
        ("n", &state.n),
    ] {
        let file = std::fs::File::create(dir.join(format!("{name}_{step}.dat")))?;
        let mut w = std::io::BufWriter::new(file);
        f.write_snapshot(&mut w, state.t)?;
        w.flush()?;
    }
    Ok(())
}

/// Run a configuration from `t = 0` to `t_end` with its fixed step. With an
/// output directory, writes `diagnostics.csv` and the snapshots
/// `<field>_<step>.dat` every `snapshot_every` steps (including step 0).
pub fn run(config: &RunConfig) -> Result<RunOutput, Error> {
    run_with(config, |_, _| {})
}

/// As [`run`], calling `observe` with every accepted state and its record.
pub fn run_with(
    config: &RunConfig,
    mut observe: impl FnMut(&SimState, &DiagnosticsRecord),
) -> Result<RunOutput, Error> {
    let (phi0, p0) = config.initial_fields()?;
    let mut sim = Simulator::new(config.params.clone(), config.run.mode)?;
    let mut state = sim.initial_state(&phi0, &p0)?;
    let dt = config.time.dt;
    let every = config.time.snapshot_every;
    let out_dir = config.run.output_dir.as_deref();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        if every > 0 {
            write_snapshots(dir, &state, 0)?;
        }
    }
    let mut records = Vec::with_capacity(config.time.num_steps());
    for k in 1..=config.time.num_steps() {
        let (next, rec) = sim.step(&state, dt).map_err(|e| match e {
            Error::Validation(_) | Error::Io(_) => e,
            other => Error::StepFailed {
                step: k,
                t: state.t,
                source: Box::new(other),
            },
        })?;
        observe(&next, &rec);
        state = next;
        if let Some(dir) = out_dir {
            if every > 0 && k % every == 0 {
                write_snapshots(dir, &state, k)?;
            }
        }
        records.push(rec);
    }
    if let Some(dir) = out_dir {
        let file = std::fs::File::create(dir.join("diagnostics.csv"))?;
        let mut w = std::io::BufWriter::new(file);
        write_csv(&mut w, &records)?;
        w.flush()?;
    }
    Ok(RunOutput {
        final_state: state,
        records,
    })
}
