//! Vanishing-interface sweep.
//!
//! With sources off, `P` and `n` play no role and the model reduces to
//! Cahn-Hilliard coupled to a divergence-free Darcy flow with no-flux walls.
//! As `eps -> 0` the velocity should vanish and `phi` should approach the
//! solution of the nonlinear diffusion `d_t phi = lap F'(phi)`, which is what
//! the Cahn-Hilliard machinery solves when `eps^2` is set to zero.

use std::io::Write;

use crate::cahn_hilliard::{bulk_energy, ChSettings, ChSolver};
use crate::config::RunConfig;
use crate::error::Error;
use crate::fields::{gradient_to_faces, laplacian, BoundarySpec, Condition, ScalarField};
use crate::flow::curl_residual;
use crate::physics::{dc_unchecked, db_unchecked, ModelParams};
use crate::simulate::{Mode, SimState, Simulator};

pub const LIMIT_CSV_HEADER: &str =
    "eps,l2_u_spacetime,curl_residual,int_eps_lap_phi_sq,int_grad_phi_sq,dist_to_limit";

/// One sweep member. Time integrals are left Riemann sums over the
/// end-of-step states.
#[derive(Debug, Clone)]
pub struct LimitRow {
    pub eps: f64,
    /// `sqrt(int_0^T |u|^2 dt)`.
    pub l2_u_spacetime: f64,
    /// `sqrt(int_0^T |curl u - (mu_x phi_y - mu_y phi_x)|^2 dt)` over interior nodes.
    pub curl_residual: f64,
    pub int_eps_lap_phi_sq: f64,
    pub int_grad_phi_sq: f64,
    /// L2 distance of the final `phi` to the final state of the limit system.
    pub dist_to_limit: f64,
    /// Largest `|div u|` seen over the run.
    pub max_div_residual: f64,
    pub final_state: SimState,
}

impl LimitRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e}",
            self.eps,
            self.l2_u_spacetime,
            self.curl_residual,
            self.int_eps_lap_phi_sq,
            self.int_grad_phi_sq,
            self.dist_to_limit
        )
    }
}

#[derive(Debug, Clone)]
pub struct LimitTrajectory {
    pub times: Vec<f64>,
    /// `phi` at every time level, starting with the initial data.
    pub phi: Vec<ScalarField>,
    /// `int F(phi)` at every time level.
    pub bulk_energy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LimitReport {
    pub rows: Vec<LimitRow>,
    pub limit: LimitTrajectory,
}

impl LimitReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{LIMIT_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

fn limit_params(config: &RunConfig) -> Result<ModelParams, Error> {
    let params = config.params.clone();
    if params.theta >= 2.0 {
        return Err(Error::ConvexityViolation {
            theta: params.theta,
        });
    }
    Ok(params)
}

/// Run one member of the sweep with the given pressure closure.
pub fn run_limit_member(config: &RunConfig, eps: f64, bc: BoundarySpec) -> Result<LimitRow, Error> {
    let params = ModelParams {
        eps,
        ..limit_params(config)?
    };
    let (phi0, p0) = config.initial_fields()?;
    let mut sim = Simulator::with_boundary(params, Mode::Limit, bc)?;
    let mut state = sim.initial_state(&phi0, &p0)?;
    let dt = config.time.dt;
    let (mut u2, mut curl2, mut lap2, mut grad2) = (0.0, 0.0, 0.0, 0.0);
    let mut max_div: f64 = 0.0;
    for _ in 0..config.time.num_steps() {
        let (next, rec) = sim.step(&state, dt)?;
        state = next;
        max_div = max_div.max(rec.max_flow_div_residual);
        u2 += dt * state.u.norm_sq();
        curl2 += dt * curl_residual(&state.u, &state.mu, &state.phi).powi(2);
        let lap = laplacian(&state.phi, Condition::NeumannZero);
        lap2 += dt * eps * eps * lap.dot(&lap);
        grad2 += dt * gradient_to_faces(&state.phi, Condition::NeumannZero).norm_sq();
    }
    Ok(LimitRow {
        eps,
        l2_u_spacetime: u2.sqrt(),
        curl_residual: curl2.sqrt(),
        int_eps_lap_phi_sq: lap2,
        int_grad_phi_sq: grad2,
        dist_to_limit: f64::NAN,
        max_div_residual: max_div,
        final_state: state,
    })
}

/// Sweep `eps_list` (strictly decreasing, positive) with sources off and
/// no-flux pressure, and compare each final state to the limit system. Sweep
/// members run on separate threads.
pub fn run_limit_study(eps_list: &[f64], config: &RunConfig) -> Result<LimitReport, Error> {
    if eps_list.is_empty()
        || eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite()))
        || eps_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidProblem(
            "eps_list must be nonempty, positive and strictly decreasing".into(),
        ));
    }
    limit_params(config)?;
    let (limit, rows) = std::thread::scope(|s| {
        let handles: Vec<_> = eps_list
            .iter()
            .map(|&eps| s.spawn(move || run_limit_member(config, eps, BoundarySpec::singular_limit())))
            .collect();
        let limit = run_limit_system(config);
        let rows: Vec<_> = handles
            .into_iter()
            .map(|h| h.join().expect("sweep member panicked"))
            .collect();
        (limit, rows)
    });
    let limit = limit?;
    let reference = limit.phi.last().expect("initial level present");
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let mut r = r?;
        r.dist_to_limit = r.final_state.phi.l2_diff(reference);
        out.push(r);
    }
    Ok(LimitReport { rows: out, limit })
}

/// Advance `d_t phi = lap F'(phi)` (zero-Neumann `phi`, zero-Dirichlet `mu`)
/// with the convex-splitting step at `eps = 0`.
pub fn run_limit_system(config: &RunConfig) -> Result<LimitTrajectory, Error> {
    let params = limit_params(config)?;
    let pot = params.potential();
    let (phi0, p0) = config.initial_fields()?;
    crate::physics::validate(&params, &phi0, &p0)?;
    let grid = *phi0.grid();
    let dt = config.time.dt;
    let settings = ChSettings {
        eps2: 0.0,
        ..ChSettings::from_params(dt, &params, &pot)
    };
    let mut phi = phi0.map(|v| pot.clamp(v));
    let mut mu = if params.delta > 0.0 {
        ScalarField::zeros(grid)
    } else {
        phi.map(|f| dc_unchecked(f) + db_unchecked(f, pot.theta))
    };
    let advect = ScalarField::zeros(grid);
    let mut solver = ChSolver::new();
    let mut traj = LimitTrajectory {
        times: vec![0.0],
        bulk_energy: vec![bulk_energy(&phi, &pot)?],
        phi: vec![phi.clone()],
    };
    for k in 1..=config.time.num_steps() {
        let out = solver.solve_system(&phi, &mu, &advect, &settings)?;
        phi = out.phi;
        mu = out.mu;
        traj.times.push(k as f64 * dt);
        traj.bulk_energy.push(bulk_energy(&phi, &pot)?);
        traj.phi.push(phi.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(phi: &str) -> RunConfig {
        parse_config(&format!(
            "[run]\nmode = \"limit\"\n[grid]\nnx = 12\nny = 12\n[time]\nt_end = 0.01\ndt = 1e-3\n\
             [params]\ntheta = 1.0\nlambda3 = 0.0\n[initial.p]\nkind = \"uniform\"\nvalue = 0.0\n\
             [initial.phi]\n{phi}\n"
        ))
        .unwrap()
    }

    #[test]
    fn constant_data_stays_at_rest() {
        // mu is pinned to zero on the wall, so 0.5 is the constant at rest
        let c = config("kind = \"uniform\"\nvalue = 0.5");
        let rep = run_limit_study(&[0.2, 0.1], &c).unwrap();
        for r in &rep.rows {
            assert!(r.l2_u_spacetime < 1e-12, "{}", r.l2_u_spacetime);
            assert!(r.dist_to_limit < 1e-10);
        }
    }

    #[test]
    fn half_is_stationary_for_the_limit_system() {
        let c = config("kind = \"uniform\"\nvalue = 0.5");
        let t = run_limit_system(&c).unwrap();
        let last = t.phi.last().unwrap();
        assert!(last.max_diff(&t.phi[0]) < 1e-14);
    }

    #[test]
    fn rejects_bad_sweeps() {
        let c = config("kind = \"uniform\"\nvalue = 0.5");
        assert!(run_limit_study(&[0.1, 0.2], &c).is_err());
        assert!(run_limit_study(&[], &c).is_err());
        let mut c2 = c.clone();
        c2.params.theta = 2.5;
        assert!(matches!(
            run_limit_study(&[0.1], &c2),
            Err(Error::ConvexityViolation { .. })
        ));
    }

    #[test]
    fn limit_energy_decreases() {
        let c = config("kind = \"cosine\"\nmean = 0.5\namp = 0.3");
        let t = run_limit_system(&c).unwrap();
        for w in t.bulk_energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
        assert!(t.bulk_energy.last().unwrap() < &t.bulk_energy[0]);
    }
}
