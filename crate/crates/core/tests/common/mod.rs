//! Dense brute-force reference implementations. Everything here is assembled
//! from scalar loops over `(i, j)` with nalgebra matrices, without calling
//! the library's operators, so agreement is an independent check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use tumorsim::fields::{FaceVectorField, GridSpec, ScalarField};
use tumorsim::physics::ModelParams;

/// Closure of the ghost layer: `ghost = sign * interior + offset`.
#[derive(Clone, Copy, Debug)]
pub enum Bc {
    /// ghost = -interior (zero Dirichlet)
    Dirichlet,
    /// ghost = interior (zero Neumann)
    Neumann,
}

pub struct Dense {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Dense {
    pub fn new(g: &GridSpec) -> Self {
        Self {
            nx: g.nx(),
            ny: g.ny(),
            hx: g.hx(),
            hy: g.hy(),
        }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    pub fn nxf(&self) -> usize {
        (self.nx + 1) * self.ny
    }
    pub fn faces(&self) -> usize {
        self.nxf() + self.nx * (self.ny + 1)
    }
    pub fn xf(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
    pub fn yf(&self, i: usize, j: usize) -> usize {
        self.nxf() + j * self.nx + i
    }

    /// Five-point Laplacian as an explicit stencil matrix.
    pub fn laplacian(&self, bc: Bc) -> DMatrix<f64> {
        let n = self.cells();
        let mut a = DMatrix::zeros(n, n);
        let (ax, ay) = (1.0 / (self.hx * self.hx), 1.0 / (self.hy * self.hy));
        let wall = match bc {
            Bc::Dirichlet => -1.0,
            Bc::Neumann => 1.0,
        };
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell(i, j);
                let mut nb = |ii: isize, jj: isize, w: f64| {
                    if ii < 0 || jj < 0 || ii >= self.nx as isize || jj >= self.ny as isize {
                        a[(c, c)] += wall * w;
                    } else {
                        a[(c, self.cell(ii as usize, jj as usize))] += w;
                    }
                    a[(c, c)] -= w;
                };
                let (ii, jj) = (i as isize, j as isize);
                nb(ii - 1, jj, ax);
                nb(ii + 1, jj, ax);
                nb(ii, jj - 1, ay);
                nb(ii, jj + 1, ay);
            }
        }
        a
    }

    /// Face gradient matrix (faces x cells), x faces first.
    pub fn gradient(&self, bc: Bc) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.faces(), self.cells());
        let wall = match bc {
            Bc::Dirichlet => -1.0,
            Bc::Neumann => 1.0,
        };
        for j in 0..self.ny {
            for i in 0..=self.nx {
                let f = self.xf(i, j);
                let e = if i < self.nx { Some(self.cell(i, j)) } else { None };
                let w = if i > 0 { Some(self.cell(i - 1, j)) } else { None };
                match (w, e) {
                    (Some(w), Some(e)) => {
                        g[(f, e)] += 1.0 / self.hx;
                        g[(f, w)] -= 1.0 / self.hx;
                    }
                    (None, Some(e)) => {
                        g[(f, e)] += (1.0 - wall) / self.hx;
                    }
                    (Some(w), None) => {
                        g[(f, w)] += (wall - 1.0) / self.hx;
                    }
                    _ => unreachable!(),
                }
            }
        }
        for j in 0..=self.ny {
            for i in 0..self.nx {
                let f = self.yf(i, j);
                let nn = if j < self.ny { Some(self.cell(i, j)) } else { None };
                let s = if j > 0 { Some(self.cell(i, j - 1)) } else { None };
                match (s, nn) {
                    (Some(s), Some(nn)) => {
                        g[(f, nn)] += 1.0 / self.hy;
                        g[(f, s)] -= 1.0 / self.hy;
                    }
                    (None, Some(nn)) => g[(f, nn)] += (1.0 - wall) / self.hy,
                    (Some(s), None) => g[(f, s)] += (wall - 1.0) / self.hy,
                    _ => unreachable!(),
                }
            }
        }
        g
    }

    /// Face average matrix (faces x cells).
    pub fn average(&self, bc: Bc) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.faces(), self.cells());
        let wall = match bc {
            Bc::Dirichlet => -1.0,
            Bc::Neumann => 1.0,
        };
        for j in 0..self.ny {
            for i in 0..=self.nx {
                let f = self.xf(i, j);
                if i > 0 {
                    m[(f, self.cell(i - 1, j))] += 0.5;
                }
                if i < self.nx {
                    m[(f, self.cell(i, j))] += 0.5;
                }
                if i == 0 {
                    m[(f, self.cell(0, j))] += 0.5 * wall;
                }
                if i == self.nx {
                    m[(f, self.cell(self.nx - 1, j))] += 0.5 * wall;
                }
            }
        }
        for j in 0..=self.ny {
            for i in 0..self.nx {
                let f = self.yf(i, j);
                if j > 0 {
                    m[(f, self.cell(i, j - 1))] += 0.5;
                }
                if j < self.ny {
                    m[(f, self.cell(i, j))] += 0.5;
                }
                if j == 0 {
                    m[(f, self.cell(i, 0))] += 0.5 * wall;
                }
                if j == self.ny {
                    m[(f, self.cell(i, self.ny - 1))] += 0.5 * wall;
                }
            }
        }
        m
    }

    /// Divergence matrix (cells x faces).
    pub fn divergence(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.cells(), self.faces());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let c = self.cell(i, j);
                d[(c, self.xf(i + 1, j))] += 1.0 / self.hx;
                d[(c, self.xf(i, j))] -= 1.0 / self.hx;
                d[(c, self.yf(i, j + 1))] += 1.0 / self.hy;
                d[(c, self.yf(i, j))] -= 1.0 / self.hy;
            }
        }
        d
    }
}

pub fn vec_of(f: &ScalarField) -> DVector<f64> {
    DVector::from_column_slice(f.data())
}

pub fn faces_of(v: &FaceVectorField) -> DVector<f64> {
    DVector::from_iterator(
        v.x_faces().len() + v.y_faces().len(),
        v.x_faces().iter().chain(v.y_faces()).copied(),
    )
}

pub fn field_of(g: &GridSpec, v: &DVector<f64>) -> ScalarField {
    ScalarField::from_vec(*g, v.iter().copied().collect()).unwrap()
}

pub fn face_field_of(g: &GridSpec, v: &DVector<f64>) -> FaceVectorField {
    let nxf = (g.nx() + 1) * g.ny();
    FaceVectorField::from_vecs(*g, v.rows(0, nxf).iter().copied().collect(), v.rows(nxf, v.len() - nxf).iter().copied().collect()).unwrap()
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Dense solve of `(-L + diag(c)) x = b` under `bc`; with pure Neumann and
/// `c = 0` the zero-mean solution is returned.
pub fn dense_elliptic(g: &GridSpec, coeff: &[f64], rhs: &[f64], bc: Bc) -> DVector<f64> {
    let d = Dense::new(g);
    let n = d.cells();
    let mut a = -d.laplacian(bc);
    for k in 0..n {
        a[(k, k)] += coeff[k];
    }
    let b = DVector::from_column_slice(rhs);
    let singular = matches!(bc, Bc::Neumann) && coeff.iter().all(|&c| c == 0.0);
    if singular {
        // bordered system with the mean constraint
        let mut big = DMatrix::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n)).copy_from(&a);
        for k in 0..n {
            big[(n, k)] = 1.0;
            big[(k, n)] = 1.0;
        }
        let mut bb = DVector::zeros(n + 1);
        bb.rows_mut(0, n).copy_from(&b);
        let x = big.lu().solve(&bb).expect("bordered system solvable");
        x.rows(0, n).into_owned()
    } else {
        a.lu().solve(&b).expect("elliptic operator invertible")
    }
}

// ---------------------------------------------------------------- physics

pub fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

pub fn h_smooth(s: f64, sigma: f64) -> f64 {
    1.0 / (1.0 + (-s / sigma).exp())
}

pub fn kappa(phi: f64, p: &ModelParams) -> f64 {
    let c = phi.clamp(0.0, 1.0);
    let q = c * c * (3.0 - 2.0 * c);
    p.nu1 * (1.0 - q) + p.nu2 * q
}

pub fn s_t(n: f64, pv: f64, phi: f64, p: &ModelParams) -> f64 {
    n * pv - p.lambda3 * (phi - pv)
}

// ---------------------------------------------------------------- nutrient

/// Nutrient with `n = 1` on the boundary imposed through the ghost value
/// `2 - n`, i.e. directly for `n` rather than a shifted unknown.
pub fn dense_nutrient(g: &GridSpec, pf: &ScalarField, phi: &ScalarField, p: &ModelParams) -> DVector<f64> {
    let d = Dense::new(g);
    let n = d.cells();
    let mut a = -d.laplacian(Bc::Dirichlet);
    let mut b = DVector::zeros(n);
    let (ax, ay) = (1.0 / (d.hx * d.hx), 1.0 / (d.hy * d.hy));
    for j in 0..d.ny {
        for i in 0..d.nx {
            let c = d.cell(i, j);
            let k = kappa(phi.data()[c], p);
            a[(c, c)] += pf.data()[c] + k;
            b[c] = k * p.n_c;
            // boundary value 1 enters through ghost = 2 - interior
            if i == 0 {
                b[c] += 2.0 * ax;
            }
            if i == d.nx - 1 {
                b[c] += 2.0 * ax;
            }
            if j == 0 {
                b[c] += 2.0 * ay;
            }
            if j == d.ny - 1 {
                b[c] += 2.0 * ay;
            }
        }
    }
    a.lu().solve(&b).unwrap()
}

// ---------------------------------------------------------------- transport

/// Explicit upwind step written cell by cell.
pub fn brute_transport(
    g: &GridSpec,
    p_old: &ScalarField,
    u: &FaceVectorField,
    phi: &ScalarField,
    n: &ScalarField,
    dt: f64,
    par: &ModelParams,
) -> Vec<f64> {
    let (nx, ny, hx, hy) = (g.nx(), g.ny(), g.hx(), g.hy());
    let pv = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
            0.0
        } else {
            p_old.at(i as usize, j as usize)
        }
    };
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let (ii, jj) = (i as isize, j as isize);
            let here = p_old.at(i, j);
            let (uw, ue) = (u.xf(i, j), u.xf(i + 1, j));
            let (us, un) = (u.yf(i, j), u.yf(i, j + 1));
            let fe = ue * if ue > 0.0 { here } else { pv(ii + 1, jj) };
            let fw = uw * if uw > 0.0 { pv(ii - 1, jj) } else { here };
            let fnn = un * if un > 0.0 { here } else { pv(ii, jj + 1) };
            let fs = us * if us > 0.0 { pv(ii, jj - 1) } else { here };
            let div_f = (fe - fw) / hx + (fnn - fs) / hy;
            let div_u = (ue - uw) / hx + (un - us) / hy;
            let nn = n.at(i, j);
            let f = phi.at(i, j);
            let react = -s_t(nn, here, f, par)
                + f * (nn.clamp(0.0, 1.0) - par.lambda1 - par.lambda2 * h_smooth(par.n_n - nn, par.sigma_h));
            let lap = if par.delta > 0.0 {
                (pv(ii + 1, jj) - 2.0 * here + pv(ii - 1, jj)
                    + if i == 0 { -here } else { 0.0 }
                    + if i == nx - 1 { -here } else { 0.0 })
                    / (hx * hx)
                    + (pv(ii, jj + 1) - 2.0 * here + pv(ii, jj - 1)
                        + if j == 0 { -here } else { 0.0 }
                        + if j == ny - 1 { -here } else { 0.0 })
                        / (hy * hy)
            } else {
                0.0
            };
            out[g.idx(i, j)] = here + dt * (-(div_f - here * div_u) + here * react + par.delta * lap);
        }
    }
    out
}

// ---------------------------------------------------------------- Cahn-Hilliard

/// Full Newton on the dense `2N` system with an analytic Jacobian.
#[allow(clippy::too_many_arguments)]
pub fn dense_ch_step(
    g: &GridSpec,
    phi_old: &DVector<f64>,
    mu_old: &DVector<f64>,
    u: &DVector<f64>,
    st: &DVector<f64>,
    dt: f64,
    eps: f64,
    delta: f64,
    theta: f64,
) -> (DVector<f64>, DVector<f64>) {
    let d = Dense::new(g);
    let n = d.cells();
    let ld = d.laplacian(Bc::Dirichlet);
    let ln = d.laplacian(Bc::Neumann);
    let div = d.divergence();
    let avg = d.average(Bc::Neumann);
    let flux = u.component_mul(&(&avg * phi_old));
    let adv = &div * flux - phi_old.component_mul(st);
    let fixed = phi_old - delta * (&ld * mu_old) - dt * adv;
    let expl = phi_old.map(|p| theta * (1.0 - 2.0 * p));

    let mut phi = phi_old.clone();
    let mut mu = mu_old.clone();
    for _ in 0..100 {
        let r1 = &phi - (delta + dt) * (&ld * &mu) - &fixed;
        let r2 = &mu + eps * eps * (&ln * &phi) - phi.map(logit) - &expl;
        let mut r = DVector::zeros(2 * n);
        r.rows_mut(0, n).copy_from(&r1);
        r.rows_mut(n, n).copy_from(&r2);
        if r.amax() < 1e-14 {
            break;
        }
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..n {
            j[(k, k)] = 1.0;
            j[(n + k, n + k)] = 1.0;
        }
        j.view_mut((0, n), (n, n)).copy_from(&(-(delta + dt) * &ld));
        let mut j21 = eps * eps * &ln;
        for k in 0..n {
            j21[(k, k)] -= 1.0 / (phi[k] * (1.0 - phi[k]));
        }
        j.view_mut((n, 0), (n, n)).copy_from(&j21);
        let step = j.lu().solve(&(-r)).unwrap();
        let mut t = 1.0;
        while (0..n).any(|k| {
            let v = phi[k] + t * step[k];
            !(v > 0.0 && v < 1.0)
        }) {
            t *= 0.5;
        }
        phi += t * step.rows(0, n);
        mu += t * step.rows(n, n);
    }
    (phi, mu)
}

// ---------------------------------------------------------------- coupled step

pub struct CoupledOut {
    pub phi: DVector<f64>,
    pub mu: DVector<f64>,
    pub pi: DVector<f64>,
    pub u: DVector<f64>,
    pub p: Vec<f64>,
    pub n: DVector<f64>,
}

/// One full step as a single monolithic nonlinear system in `(phi, mu, pi)`
/// solved by Newton with a finite-difference Jacobian, followed by transport.
/// Default boundary closure: zero-Dirichlet `mu` and `pi`, zero-Neumann `phi`.
pub fn monolithic_step(
    g: &GridSpec,
    phi_old: &ScalarField,
    mu_old: &ScalarField,
    p_old: &ScalarField,
    dt: f64,
    par: &ModelParams,
) -> CoupledOut {
    let d = Dense::new(g);
    let n = d.cells();
    let nut = dense_nutrient(g, p_old, phi_old, par);
    let st = DVector::from_iterator(
        n,
        (0..n).map(|k| s_t(nut[k], p_old.data()[k], phi_old.data()[k], par)),
    );
    let ld = d.laplacian(Bc::Dirichlet);
    let ln = d.laplacian(Bc::Neumann);
    let div = d.divergence();
    let avg_n = d.average(Bc::Neumann);
    let avg_d = d.average(Bc::Dirichlet);
    let grad_n = d.gradient(Bc::Neumann);
    let grad_d = d.gradient(Bc::Dirichlet);
    let po = vec_of(phi_old);
    let mo = vec_of(mu_old);
    let po_f = &avg_n * &po;
    let expl = po.map(|p| par.theta * (1.0 - 2.0 * p));
    let eps2 = par.eps * par.eps;

    let velocity = |phi: &DVector<f64>, mu: &DVector<f64>, pi: &DVector<f64>| -> DVector<f64> {
        (&avg_d * mu).component_mul(&(&grad_n * phi)) - &grad_d * pi
    };
    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let phi = x.rows(0, n).into_owned();
        let mu = x.rows(n, n).into_owned();
        let pi = x.rows(2 * n, n).into_owned();
        let u = velocity(&phi, &mu, &pi);
        let adv = &div * u.component_mul(&po_f) - po.component_mul(&st);
        let r1 = (&phi - (par.delta + dt) * (&ld * &mu) - (&po - par.delta * (&ld * &mo) - dt * adv)) / dt;
        let r2 = &mu + eps2 * (&ln * &phi) - phi.map(logit) - &expl;
        let r3 = &div * &u - &st;
        let mut r = DVector::zeros(3 * n);
        r.rows_mut(0, n).copy_from(&r1);
        r.rows_mut(n, n).copy_from(&r2);
        r.rows_mut(2 * n, n).copy_from(&r3);
        r
    };

    let mut x = DVector::zeros(3 * n);
    x.rows_mut(0, n).copy_from(&po);
    x.rows_mut(n, n).copy_from(&mo);
    for _ in 0..60 {
        let r = residual(&x);
        if r.amax() < 1e-12 {
            break;
        }
        let mut jac = DMatrix::zeros(3 * n, 3 * n);
        for c in 0..3 * n {
            let h = 1e-7 * x[c].abs().max(1.0);
            let mut xp = x.clone();
            xp[c] += h;
            let mut xm = x.clone();
            xm[c] -= h;
            let col = (residual(&xp) - residual(&xm)) / (2.0 * h);
            jac.set_column(c, &col);
        }
        let step = jac.lu().solve(&(-&r)).unwrap();
        let mut t = 1.0;
        while (0..n).any(|k| {
            let v = x[k] + t * step[k];
            !(v > 0.0 && v < 1.0)
        }) {
            t *= 0.5;
        }
        x += t * step;
    }
    let phi = x.rows(0, n).into_owned();
    let mu = x.rows(n, n).into_owned();
    let pi = x.rows(2 * n, n).into_owned();
    let u = velocity(&phi, &mu, &pi);
    let p = brute_transport(
        g,
        p_old,
        &face_field_of(g, &u),
        &field_of(g, &phi),
        &field_of(g, &nut),
        dt,
        par,
    );
    CoupledOut {
        phi,
        mu,
        pi,
        u,
        p,
        n: nut,
    }
}
