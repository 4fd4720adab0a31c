//! Self-similar variables and the rescaled equation
//!
//! ```text
//! v(y, tau) = (t + t0)^alpha u(x, t),  y_i = x_i (t + t0)^{-a_i},  tau = ln(t + t0)
//! v_tau = sum_i [ (v^{m_i})_{y_i y_i} + alpha sigma_i (y_i v)_{y_i} ]
//! ```
//!
//! Both terms are written in flux form on cell faces, so the discrete mass
//! changes only through the outer faces. The confinement term is either
//! upwinded against the inward velocity `-alpha sigma_i y_i` or, with
//! [`DriftScheme::Hybrid`], centred wherever the cell Peclet number allows it
//! without losing the M-matrix sign pattern. The explicit integrator
//! ([`rescaled_step`] with [`TimeScheme::Explicit`]) and the linearly implicit
//! one share that operator; the implicit step freezes the diffusivity
//! `phi(v)/v`, solves the resulting nonsymmetric system with ILU(0)-BiCGSTAB,
//! and stays positive and mass conserving at any step size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{Field, Grid, MAX_DIM};
use crate::linsolve::{bicgstab, StencilMatrix};
use crate::quadrature::{fit_line, LineFit};
use crate::solver::{Nonlinearity, Regularization, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledState {
    /// Profile on the `y`-grid; `v.time` mirrors `tau`.
    pub v: Field,
    pub tau: f64,
    pub t0: f64,
}

impl RescaledState {
    pub fn new(mut v: Field, tau: f64, t0: f64) -> Self {
        v.time = tau;
        Self { v, tau, t0 }
    }

    /// Original time `t = e^tau - t0`.
    pub fn physical_time(&self) -> f64 {
        self.tau.exp() - self.t0
    }
}

/// Rescale `u` (at time `u.time`) with shift `t0`. Without a target grid the
/// nodes map one to one onto the stretched grid, so no interpolation happens.
pub fn to_selfsimilar(u: &Field, t0: f64, e: &ExponentSet, target: Option<&Grid>) -> Result<RescaledState> {
    let s = u.time + t0;
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("t + t0 = {s} must be positive")));
    }
    check_dim(e, &u.grid)?;
    let amp = s.powf(e.alpha);
    let stretch: Vec<f64> = e.a.iter().map(|ai| s.powf(*ai)).collect();
    let v = match target {
        None => {
            let inv: Vec<f64> = stretch.iter().map(|f| 1.0 / f).collect();
            let grid = u.grid.stretched(&inv)?;
            Field { grid, values: u.values.iter().map(|x| x * amp).collect(), time: 0.0 }
        }
        Some(g) => {
            check_dim(e, g)?;
            let mut f = u.resample(g, |y| {
                for (yi, st) in y.iter_mut().zip(&stretch) {
                    *yi *= st;
                }
            });
            f.scale(amp);
            f
        }
    };
    Ok(RescaledState::new(v, s.ln(), t0))
}

/// Inverse of [`to_selfsimilar`].
pub fn from_selfsimilar(s: &RescaledState, e: &ExponentSet, target: Option<&Grid>) -> Result<Field> {
    check_dim(e, &s.v.grid)?;
    let st = s.tau.exp();
    let t = st - s.t0;
    let amp = st.powf(-e.alpha);
    let stretch: Vec<f64> = e.a.iter().map(|ai| st.powf(*ai)).collect();
    let mut u = match target {
        None => {
            let grid = s.v.grid.stretched(&stretch)?;
            Field { grid, values: s.v.values.iter().map(|x| x * amp).collect(), time: 0.0 }
        }
        Some(g) => {
            check_dim(e, g)?;
            let mut f = s.v.resample(g, |x| {
                for (xi, f) in x.iter_mut().zip(&stretch) {
                    *xi /= f;
                }
            });
            f.scale(amp);
            f
        }
    };
    u.time = t;
    Ok(u)
}

fn check_dim(e: &ExponentSet, g: &Grid) -> Result<()> {
    if e.n == g.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: e.n, got: g.dim() })
    }
}

// ---------------------------------------------------------------------------
// Spatial operator

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RescaledBoundary {
    /// Boundary nodes held at the given value.
    Dirichlet(f64),
    /// Closed box: no flux through the faces, mass is conserved exactly.
    NoFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftScheme {
    /// First-order upwinding against the inward velocity everywhere.
    Upwind,
    /// Central weights where the couplings stay nonnegative, upwind elsewhere.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeScheme {
    /// Explicit Euler with `dt = safety * dt_cfl`.
    Explicit { safety: f64 },
    /// Linearly implicit Euler starting at `dt`, multiplied by `growth` after
    /// every step up to `dt_max`. Steady states do not depend on the steps.
    Implicit { dt: f64, growth: f64, dt_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledConfig {
    pub eps: Regularization,
    pub boundary: RescaledBoundary,
    pub drift: DriftScheme,
    pub scheme: TimeScheme,
    /// Snapshot interval in `tau`; `0` keeps only the first and last states.
    pub record_every: f64,
    /// Krylov iteration budget per implicit step.
    pub max_iter: usize,
    /// Linear solves stop once `||b - A v||_1 <= solve_tol ||b||_1`.
    pub solve_tol: f64,
    /// Relaxation stops once `||v(tau + dtau) - v(tau)||_1 / dtau < tol_rel * mass`.
    pub tol_rel: f64,
    /// Relaxation budget in `tau`.
    pub tau_max: f64,
    pub max_steps: usize,
}

impl Default for RescaledConfig {
    fn default() -> Self {
        Self {
            eps: Regularization::Relative(1e-12),
            boundary: RescaledBoundary::NoFlux,
            drift: DriftScheme::Hybrid,
            scheme: TimeScheme::Implicit { dt: 0.05, growth: 1.1, dt_max: 1.0 },
            record_every: 0.0,
            max_iter: 2000,
            solve_tol: 1e-12,
            tol_rel: 1e-5,
            tau_max: 40.0,
            max_steps: 10_000_000,
        }
    }
}

impl RescaledConfig {
    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            TimeScheme::Explicit { safety } if !(safety > 0.0 && safety <= 1.0) => {
                return Err(Error::InvalidParameter(format!("CFL safety {safety} outside (0,1]")));
            }
            TimeScheme::Implicit { dt, growth, dt_max } if !(dt > 0.0 && growth >= 1.0 && dt_max >= dt) => {
                return Err(Error::InvalidParameter(format!(
                    "implicit steps need dt > 0, growth >= 1, dt_max >= dt (got {dt}, {growth}, {dt_max})"
                )));
            }
            _ => {}
        }
        if !(self.record_every >= 0.0 && self.tol_rel > 0.0 && self.tau_max >= 0.0 && self.solve_tol > 0.0) {
            return Err(Error::InvalidParameter("record_every, tol_rel, tau_max, solve_tol".into()));
        }
        Ok(())
    }
}

/// Geometry of the discrete operator on one grid.
struct Operator {
    dim: usize,
    points: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    inv_h2: [f64; MAX_DIM],
    /// `alpha sigma_i / h_i`.
    drift: [f64; MAX_DIM],
    /// Face coordinates per axis, `face[i][j]` between nodes `j` and `j + 1`.
    face: Vec<Vec<f64>>,
    boundary: RescaledBoundary,
    scheme: DriftScheme,
}

impl Operator {
    fn new(grid: &Grid, e: &ExponentSet, boundary: RescaledBoundary, scheme: DriftScheme) -> Self {
        let dim = grid.dim();
        let mut points = [1; MAX_DIM];
        let mut strides = [0; MAX_DIM];
        let mut inv_h2 = [0.0; MAX_DIM];
        let mut drift = [0.0; MAX_DIM];
        let mut face = Vec::with_capacity(dim);
        for i in 0..dim {
            points[i] = grid.points()[i];
            strides[i] = grid.stride(i);
            let h = grid.spacing(i);
            inv_h2[i] = 1.0 / (h * h);
            drift[i] = e.alpha * e.sigma[i] / h;
            let c = grid.axis_coords(i);
            face.push(c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect());
        }
        Self { dim, points, strides, inv_h2, drift, face, boundary, scheme }
    }

    fn index(&self, mut k: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for i in (0..self.dim).rev() {
            idx[i] = k % self.points[i];
            k /= self.points[i];
        }
        idx
    }

    fn is_fixed(&self, idx: &[usize; MAX_DIM]) -> Option<f64> {
        match self.boundary {
            RescaledBoundary::NoFlux => None,
            RescaledBoundary::Dirichlet(bv) => {
                if (0..self.dim).any(|i| idx[i] == 0 || idx[i] + 1 == self.points[i]) {
                    Some(bv)
                } else {
                    None
                }
            }
        }
    }

    /// Drift weights `(w_p, w_q)` of the face between `p` and `q = p + s_i`.
    /// Central weights are used only where they keep the off-diagonal
    /// couplings nonnegative, i.e. where the cell Peclet number at the node
    /// nearer the origin is at most 2.
    fn weights(&self, i: usize, yf: f64, k_inner: f64) -> (f64, f64) {
        if self.scheme == DriftScheme::Hybrid && 0.5 * self.drift[i] * yf.abs() <= k_inner * self.inv_h2[i] {
            (0.5, 0.5)
        } else if yf > 0.0 {
            (0.0, 1.0)
        } else {
            (1.0, 0.0)
        }
    }

    /// Row `k` of `L(K)`: coefficient on `v_k` and on each neighbour.
    /// Neighbour entries are `(axis, offset sign, coefficient)`.
    fn row(&self, k: usize, idx: &[usize; MAX_DIM], kd: &[Vec<f64>], out: &mut Vec<(usize, bool, f64)>) -> f64 {
        out.clear();
        let mut own = 0.0;
        for i in 0..self.dim {
            let s = self.strides[i];
            let j = idx[i];
            let kk = &kd[i];
            let c = self.drift[i];
            if j + 1 < self.points[i] {
                let yf = self.face[i][j];
                let (wp, wq) = self.weights(i, yf, if yf > 0.0 { kk[k] } else { kk[k + s] });
                own += -kk[k] * self.inv_h2[i] + c * yf * wp;
                out.push((i, true, kk[k + s] * self.inv_h2[i] + c * yf * wq));
            }
            if j > 0 {
                let yf = self.face[i][j - 1];
                let (wp, wq) = self.weights(i, yf, if yf > 0.0 { kk[k - s] } else { kk[k] });
                own += -kk[k] * self.inv_h2[i] - c * yf * wq;
                out.push((i, false, kk[k - s] * self.inv_h2[i] - c * yf * wp));
            }
        }
        own
    }

    /// `(L(K) v)_k`.
    fn rate(&self, k: usize, idx: &[usize; MAX_DIM], v: &[f64], kd: &[Vec<f64>], buf: &mut Vec<(usize, bool, f64)>) -> f64 {
        let mut acc = self.row(k, idx, kd, buf) * v[k];
        for &(i, plus, c) in buf.iter() {
            acc += c * v[if plus { k + self.strides[i] } else { k - self.strides[i] }];
        }
        acc
    }
}

fn resolve_eps(eps: Regularization, v: &Field, e: &ExponentSet) -> Result<f64> {
    let value = match eps {
        Regularization::Relative(r) => r * v.max().max(0.0),
        Regularization::Absolute(a) => a,
    };
    if !(value >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {value} must be >= 0")));
    }
    if value == 0.0 && e.m.iter().any(|&m| m < 1.0) {
        return Err(Error::InvalidParameter("the rescaled schemes need eps > 0".into()));
    }
    Ok(value)
}

/// Working state of a rescaled integration with a frozen regularisation.
pub struct RescaledIntegrator {
    nl: Nonlinearity,
    op: Operator,
    grid: Grid,
    work: Vec<Vec<f64>>,
    next: Vec<f64>,
    /// Krylov iterations used by the last implicit step.
    pub last_iterations: usize,
    /// Relative residual reached by the last implicit step.
    pub last_residual: f64,
}

impl RescaledIntegrator {
    pub fn new(grid: &Grid, e: &ExponentSet, eps: f64, boundary: RescaledBoundary, scheme: DriftScheme) -> Self {
        let n = grid.len();
        Self {
            nl: Nonlinearity::new(&e.m, eps),
            op: Operator::new(grid, e, boundary, scheme),
            grid: grid.clone(),
            work: vec![vec![0.0; n]; grid.dim()],
            next: vec![0.0; n],
            last_iterations: 0,
            last_residual: 0.0,
        }
    }

    pub fn eps(&self) -> f64 {
        self.nl.eps
    }

    /// Largest explicit step keeping every diagonal coefficient of
    /// `I + dt L` nonnegative, times `safety`.
    pub fn cfl_dt(&mut self, v: &Field, safety: f64) -> f64 {
        self.fill_diffusivity(&v.values);
        let op = &self.op;
        let kd = &self.work;
        let worst = (0..v.values.len())
            .into_par_iter()
            .with_min_len(1024)
            .map_init(Vec::new, |buf, k| {
                let idx = op.index(k);
                if op.is_fixed(&idx).is_some() {
                    0.0
                } else {
                    -op.row(k, &idx, kd, buf)
                }
            })
            .reduce(|| 0.0, f64::max);
        if worst > 0.0 {
            safety / worst
        } else {
            f64::INFINITY
        }
    }

    fn check(&self, v: &Field) -> Result<()> {
        if v.grid.same_shape(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("state grid differs from the integrator grid".into()))
        }
    }

    /// Explicit Euler step of size `dt`.
    pub fn explicit(&mut self, v: &mut Field, dt: f64) -> Result<()> {
        self.check(v)?;
        self.fill_diffusivity(&v.values);
        let op = &self.op;
        let kd = &self.work;
        let old = &v.values;
        self.next.par_iter_mut().enumerate().with_min_len(1024).for_each_init(Vec::new, |buf, (k, out)| {
            let idx = op.index(k);
            *out = match op.is_fixed(&idx) {
                Some(bv) => bv,
                None => old[k] + dt * op.rate(k, &idx, old, kd, buf),
            };
        });
        finish(&mut self.next, v, dt)?;
        Ok(())
    }

    fn fill_diffusivity(&mut self, v: &[f64]) {
        let nl = &self.nl;
        for (i, kd) in self.work.iter_mut().enumerate() {
            let base = nl.phi(i, 0.0);
            let slope0 = nl.dphi(i, 0.0);
            kd.par_iter_mut().zip(v.par_iter()).for_each(|(kk, &z)| {
                *kk = if z > nl.eps && z > 0.0 { (nl.phi(i, z) - base) / z } else { slope0 };
            });
        }
    }

    /// Linearly implicit step `(I - dt L(v^n)) v^{n+1} = v^n`. The matrix is
    /// an M-matrix with unit column sums, so the exact solution is
    /// nonnegative and conserves mass up to the boundary flux.
    pub fn implicit(&mut self, v: &mut Field, dt: f64, max_iter: usize, tol: f64) -> Result<()> {
        self.check(v)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        self.fill_diffusivity(&v.values);
        let a = self.assemble(dt);
        let b: Vec<f64> = (0..v.values.len())
            .map(|k| self.op.is_fixed(&self.op.index(k)).unwrap_or(v.values[k]))
            .collect();
        let mut x = b.clone();
        let rep = bicgstab(&a, &b, &mut x, tol, max_iter);
        self.last_iterations = rep.iterations;
        self.last_residual = rep.relative_residual;
        let scale = x.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        for z in x.iter_mut() {
            if !z.is_finite() || *z < -1e-9 * scale {
                return Err(Error::Unstable { time: v.time, detail: format!("implicit solution value {z}") });
            }
            if *z < 0.0 {
                *z = 0.0;
            }
        }
        v.values = x;
        v.time += dt;
        Ok(())
    }

    fn assemble(&self, dt: f64) -> StencilMatrix {
        let op = &self.op;
        let kd = &self.work;
        let n = self.grid.len();
        let mut a = StencilMatrix::new(op.dim, op.strides[..op.dim].to_vec(), n);
        let mut buf = Vec::new();
        for k in 0..n {
            let idx = op.index(k);
            if op.is_fixed(&idx).is_some() {
                a.diag[k] = 1.0;
                continue;
            }
            let own = op.row(k, &idx, kd, &mut buf);
            a.diag[k] = 1.0 - dt * own;
            for &(i, plus, c) in buf.iter() {
                a.off[k][2 * i + usize::from(plus)] = -dt * c;
            }
        }
        a
    }
}

fn finish(next: &mut Vec<f64>, v: &mut Field, dt: f64) -> Result<()> {
    let floor = -1e-13 * next.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    for z in next.iter_mut() {
        if !z.is_finite() || *z < floor {
            return Err(Error::Unstable { time: v.time, detail: format!("value {z} after step dt = {dt:e}") });
        }
        if *z < 0.0 {
            *z = 0.0;
        }
    }
    std::mem::swap(next, &mut v.values);
    v.time += dt;
    Ok(())
}

/// One explicit step of the rescaled equation with the CFL step of `cfg`
/// (or the implicit step when `cfg.scheme` says so).
pub fn rescaled_step(s: &RescaledState, cfg: &RescaledConfig, e: &ExponentSet) -> Result<RescaledState> {
    cfg.validate()?;
    let eps = resolve_eps(cfg.eps, &s.v, e)?;
    let mut it = RescaledIntegrator::new(&s.v.grid, e, eps, cfg.boundary, cfg.drift);
    let mut v = s.v.clone();
    match cfg.scheme {
        TimeScheme::Explicit { safety } => {
            let dt = it.cfl_dt(&v, safety);
            it.explicit(&mut v, dt)?;
        }
        TimeScheme::Implicit { dt, .. } => it.implicit(&mut v, dt, cfg.max_iter, cfg.solve_tol)?,
    }
    let tau = v.time;
    Ok(RescaledState::new(v, tau, s.t0))
}

// ---------------------------------------------------------------------------
// Runs and relaxation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledRecord {
    pub tau: f64,
    pub mass: f64,
    pub linf: f64,
    pub min: f64,
    /// `||v(tau) - v(tau - dtau)||_1 / dtau` over the last step.
    pub increment_rate: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledRun {
    pub states: Vec<RescaledState>,
    pub records: Vec<RescaledRecord>,
    pub eps: f64,
    /// Largest relative linear-solve residual over all implicit steps.
    pub max_solve_residual: f64,
}

impl RescaledRun {
    pub fn last(&self) -> &RescaledState {
        self.states.last().expect("run holds the initial state")
    }
}

fn make_record(v: &Field, rate: f64, steps: usize) -> RescaledRecord {
    RescaledRecord { tau: v.time, mass: v.mass(), linf: v.max(), min: v.min(), increment_rate: rate, steps }
}

/// Integrate for `duration` in `tau`, recording every `cfg.record_every`.
pub fn evolve_rescaled(s: &RescaledState, cfg: &RescaledConfig, e: &ExponentSet, duration: f64) -> Result<RescaledRun> {
    drive(s, cfg, e, duration, false)
}

fn drive(s: &RescaledState, cfg: &RescaledConfig, e: &ExponentSet, duration: f64, stop_when_steady: bool) -> Result<RescaledRun> {
    cfg.validate()?;
    check_dim(e, &s.v.grid)?;
    if !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration {duration} must be >= 0")));
    }
    let eps = resolve_eps(cfg.eps, &s.v, e)?;
    let mut it = RescaledIntegrator::new(&s.v.grid, e, eps, cfg.boundary, cfg.drift);
    let mut v = s.v.clone();
    v.time = s.tau;
    let tau_end = s.tau + duration;
    let tol = 1e-12 * tau_end.abs().max(1.0);
    let mut states = vec![RescaledState::new(v.clone(), s.tau, s.t0)];
    let mut records = vec![make_record(&v, f64::NAN, 0)];
    let mut next_record = if cfg.record_every > 0.0 { s.tau + cfg.record_every } else { tau_end };
    let mut steps = 0;
    let mut max_res: f64 = 0.0;
    let mut rate = f64::NAN;
    let mut implicit_dt = match cfg.scheme {
        TimeScheme::Implicit { dt, .. } => dt,
        TimeScheme::Explicit { .. } => 0.0,
    };
    while v.time < tau_end - tol {
        if steps >= cfg.max_steps {
            return Err(Error::Unstable { time: v.time, detail: "step budget exhausted".into() });
        }
        let target = next_record.min(tau_end);
        let mut dt = match cfg.scheme {
            TimeScheme::Explicit { safety } => it.cfl_dt(&v, safety),
            TimeScheme::Implicit { growth, dt_max, .. } => {
                let dt = implicit_dt;
                implicit_dt = (implicit_dt * growth).min(dt_max);
                dt
            }
        };
        let mut hit = false;
        if v.time + dt >= target - tol {
            dt = target - v.time;
            hit = true;
        }
        let before = v.values.clone();
        match cfg.scheme {
            TimeScheme::Explicit { .. } => it.explicit(&mut v, dt)?,
            TimeScheme::Implicit { .. } => {
                it.implicit(&mut v, dt, cfg.max_iter, cfg.solve_tol)?;
                max_res = max_res.max(it.last_residual);
            }
        }
        if hit {
            v.time = target;
        }
        steps += 1;
        let diff: f64 = before.iter().zip(&v.values).map(|(a, b)| (a - b).abs()).sum();
        rate = diff * v.grid.cell_volume() / dt;
        let steady = stop_when_steady && rate < cfg.tol_rel * v.mass();
        if hit || steady {
            states.push(RescaledState::new(v.clone(), v.time, s.t0));
            records.push(make_record(&v, rate, steps));
            next_record = if cfg.record_every > 0.0 { target + cfg.record_every } else { tau_end };
        }
        if steady {
            break;
        }
    }
    if let Some(r) = records.last_mut() {
        r.increment_rate = rate;
    }
    Ok(RescaledRun { states, records, eps, max_solve_residual: max_res })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEstimate {
    pub profile: Field,
    /// Last `L^1` increment per unit `tau`.
    pub residual_l1: f64,
    pub tail_slopes: Vec<Option<LineFit>>,
    pub mass: f64,
    pub converged: bool,
    pub tau: f64,
    pub steps: usize,
}

/// Default fit window as fractions of the half-width.
pub const DEFAULT_TAIL_WINDOW: (f64, f64) = (0.5, 0.9);

/// Run the rescaled flow until the `L^1` increment rate drops below
/// `tol_rel * mass` or `tau_max` is used up.
pub fn relax_to_profile(v0: &RescaledState, cfg: &RescaledConfig, e: &ExponentSet) -> Result<ProfileEstimate> {
    relax_with_run(v0, cfg, e).map(|(p, _)| p)
}

/// [`relax_to_profile`] that also returns the states and records along the way.
pub fn relax_with_run(v0: &RescaledState, cfg: &RescaledConfig, e: &ExponentSet) -> Result<(ProfileEstimate, RescaledRun)> {
    if v0.v.values.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::InvalidParameter("initial profile must be finite and nonnegative".into()));
    }
    let run = drive(v0, cfg, e, cfg.tau_max, true)?;
    let last = run.last();
    let rec = run.records.last().expect("at least one record");
    let profile = last.v.clone();
    let mass = profile.mass();
    let tail_slopes = (0..e.n).map(|i| tail_exponent_fit(&profile, i, DEFAULT_TAIL_WINDOW).ok()).collect();
    let est = ProfileEstimate {
        residual_l1: rec.increment_rate,
        converged: rec.increment_rate < cfg.tol_rel * mass,
        tau: last.tau,
        steps: rec.steps,
        profile,
        mass,
        tail_slopes,
    };
    Ok((est, run))
}

// ---------------------------------------------------------------------------
// Measurements

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub fit: LineFit,
    /// Fitted window `[lo, hi]` in `|y_i|` after shrinking.
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of `ln f` against `ln |y_i|` along the positive half of
/// the axis line through the centre, restricted to `window` (fractions of the
/// half-width). The window is cut at the first nonpositive value.
pub fn tail_exponent_fit(f: &Field, axis: usize, window: (f64, f64)) -> Result<LineFit> {
    tail_fit_detailed(f, axis, window).map(|t| t.fit)
}

pub fn tail_fit_detailed(f: &Field, axis: usize, window: (f64, f64)) -> Result<TailFit> {
    let g = &f.grid;
    if axis >= g.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    if !(0.0 < window.0 && window.0 < window.1 && window.1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("bad window {window:?}")));
    }
    if g.points().iter().enumerate().any(|(i, p)| i != axis && p % 2 == 0) {
        return Err(Error::InvalidParameter("axis line needs odd node counts on the other axes".into()));
    }
    let line = f.axis_line(axis);
    let coords = g.axis_coords(axis);
    let l = g.extent()[axis];
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (y, val) in coords.iter().zip(&line) {
        if *y < window.0 * l - 1e-12 * l || *y > window.1 * l + 1e-12 * l {
            continue;
        }
        if !(*val > 0.0) {
            break;
        }
        xs.push(y.ln());
        ys.push(val.ln());
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "fewer than 3 positive samples in the tail window on axis {axis}"
        )));
    }
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::InvalidParameter("degenerate fit".into()))?;
    Ok(TailFit { fit, window: (xs[0].exp(), xs[xs.len() - 1].exp()), points: xs.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeShiftReport {
    pub k: f64,
    /// `(tau of the shifted run, L^1 discrepancy)` per overlapping snapshot.
    pub discrepancies: Vec<(f64, f64)>,
    pub max_discrepancy: f64,
}

/// Compare the run started from `T_k u_1` with the run `u_1` itself: in
/// self-similar variables (`t0 = 0`) the first must equal the second shifted
/// by `ln k` in `tau`. Snapshots of `shifted` at time `t` are paired with
/// snapshots of `base` at time `k t`.
pub fn time_shift_check(base: &Trajectory, shifted: &Trajectory, k: f64, e: &ExponentSet) -> Result<TimeShiftReport> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("k = {k} must be positive")));
    }
    let mut discrepancies = Vec::new();
    for us in &shifted.snapshots {
        let t = us.time;
        if !(t > 0.0) {
            continue;
        }
        let Some(ub) = base.snapshots.iter().find(|b| (b.time - k * t).abs() <= 1e-9 * (k * t).abs().max(1.0)) else {
            continue;
        };
        let vs = to_selfsimilar(us, 0.0, e, None)?;
        let vb = to_selfsimilar(ub, 0.0, e, Some(&vs.v.grid))?;
        discrepancies.push((vs.tau, vs.v.l1_distance(&vb.v)?));
    }
    if discrepancies.is_empty() {
        return Err(Error::InvalidParameter("no overlapping snapshots for the time shift".into()));
    }
    let max_discrepancy = discrepancies.iter().fold(0.0f64, |m, d| m.max(d.1));
    Ok(TimeShiftReport { k, discrepancies, max_discrepancy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionReport {
    /// Original times `t = e^tau - t0`.
    pub times: Vec<f64>,
    /// `||v - F||_inf`, equal to `t^alpha ||u - U_M||_inf` when `t0 = 0`.
    pub weighted_linf: Vec<f64>,
    /// `||v - F||_1 = ||u - U_M||_1`.
    pub l1: Vec<f64>,
    /// Largest increase between consecutive `L^1` entries, relative to the mass.
    pub max_l1_increase: f64,
}

impl AttractionReport {
    pub fn l1_nonincreasing(&self, tol: f64) -> bool {
        self.max_l1_increase <= tol
    }

    /// `weighted_linf` interpolated (log-linearly in `t`) at time `t`.
    pub fn weighted_linf_at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().position(|s| *s >= t * (1.0 - 1e-12))?;
        if i == 0 || (self.times[i] - t).abs() <= 1e-12 * t.abs() {
            return Some(self.weighted_linf[i]);
        }
        let (t0, t1) = (self.times[i - 1].ln(), self.times[i].ln());
        let w = (t.ln() - t0) / (t1 - t0);
        Some(self.weighted_linf[i - 1] * (1.0 - w) + self.weighted_linf[i] * w)
    }
}

/// Distance of a rescaled trajectory from the profile `reference` sampled on
/// the same `y`-grid.
pub fn attraction_check(states: &[RescaledState], reference: &Field) -> Result<AttractionReport> {
    let m_ref = reference.mass();
    let mut out = AttractionReport { times: vec![], weighted_linf: vec![], l1: vec![], max_l1_increase: 0.0 };
    for s in states {
        s.v.check_same_grid(reference)?;
        let m = s.v.mass();
        if (m - m_ref).abs() > 0.01 * m_ref {
            return Err(Error::InvalidParameter(format!("mass {m} differs from the reference mass {m_ref} by > 1%")));
        }
        out.times.push(s.physical_time());
        out.weighted_linf.push(s.v.linf_distance(reference)?);
        out.l1.push(s.v.l1_distance(reference)?);
    }
    out.max_l1_increase = out.l1.windows(2).map(|w| (w[1] - w[0]) / m_ref).fold(0.0, f64::max);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{Barenblatt, BarenblattForm};
    use approx::assert_relative_eq;

    fn iso() -> ExponentSet {
        ExponentSet::from_params(2, &[0.75, 0.75]).unwrap()
    }

    #[test]
    fn anchor_time_is_identity() {
        let e = ExponentSet::from_params(2, &[0.6, 0.8]).unwrap();
        let g = Grid::new(vec![3.0, 2.0], vec![13, 9]).unwrap();
        let u = Field::from_fn(g, |x| (-x[0] * x[0] - 2.0 * x[1] * x[1]).exp());
        let s = to_selfsimilar(&u, 1.0, &e, None).unwrap();
        assert_eq!(s.tau, 0.0);
        assert_eq!(s.v.values, u.values);
        assert!(s.v.grid.same_shape(&u.grid));
        let back = from_selfsimilar(&s, &e, None).unwrap();
        assert_eq!(back.values, u.values);
        assert_eq!(back.time, 0.0);
    }

    #[test]
    fn round_trip_keeps_mass() {
        let e = ExponentSet::from_params(2, &[0.6, 0.8]).unwrap();
        let g = Grid::cube(2, 6.0, 61).unwrap();
        let u = Field::from_fn(g, |x| (-x[0] * x[0] - x[1] * x[1]).exp()).with_time(3.0);
        let s = to_selfsimilar(&u, 1.0, &e, None).unwrap();
        assert_relative_eq!(s.v.mass(), u.mass(), max_relative = 1e-12);
        let back = from_selfsimilar(&s, &e, Some(&u.grid)).unwrap();
        assert!(back.l1_distance(&u).unwrap() < 1e-3 * u.mass());
        assert_relative_eq!(back.time, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid::cube(2, 3.0, 11).unwrap();
        let s = RescaledState::new(Field::zeros(g), 0.0, 1.0);
        let cfg = RescaledConfig { eps: Regularization::Absolute(1e-8), ..Default::default() };
        let out = rescaled_step(&s, &cfg, &iso()).unwrap();
        assert!(out.v.values.iter().all(|z| *z == 0.0));
        let cfg = RescaledConfig { scheme: TimeScheme::Explicit { safety: 0.9 }, ..cfg };
        let out = rescaled_step(&s, &cfg, &iso()).unwrap();
        assert!(out.v.values.iter().all(|z| *z == 0.0));
    }

    #[test]
    fn implicit_conserves_mass_and_matches_explicit_steady_state() {
        let e = iso();
        let g = Grid::cube(2, 6.0, 31).unwrap();
        let b = Barenblatt::with_mass(2, 0.75, 1.0, BarenblattForm::Classical).unwrap();
        let v0 = Field::from_fn(g, |y| b.eval(y));
        let eps = 1e-10;
        let mut it = RescaledIntegrator::new(&v0.grid, &e, eps, RescaledBoundary::NoFlux, DriftScheme::Upwind);
        let mut v = v0.clone();
        for _ in 0..10 {
            it.implicit(&mut v, 0.2, 2000, 1e-13).unwrap();
        }
        assert_relative_eq!(v.mass(), v0.mass(), max_relative = 1e-10);
        // explicit and implicit share the spatial operator: the explicit rate at
        // the implicit iterate is the implicit increment per unit time
        let mut w = v.clone();
        let before = v.clone();
        it.implicit(&mut v, 1e-3, 2000, 1e-14).unwrap();
        let dt = it.cfl_dt(&w, 0.5).min(1e-3);
        it.explicit(&mut w, dt).unwrap();
        let ri: f64 = v.values.iter().zip(&before.values).map(|(a, b)| (a - b).abs()).sum::<f64>() / 1e-3;
        let re: f64 = w.values.iter().zip(&before.values).map(|(a, b)| (a - b).abs()).sum::<f64>() / dt;
        assert_relative_eq!(ri, re, max_relative = 0.05);
    }

    #[test]
    fn exact_power_tail_slope() {
        let g = Grid::new(vec![40.0, 4.0], vec![401, 9]).unwrap();
        let f = Field::from_fn(g, |y| (1.0 + y[0] * y[0]).powf(-2.5) * (1.0 + y[1] * y[1]));
        let fit = tail_exponent_fit(&f, 0, (0.5, 1.0)).unwrap();
        assert!((fit.slope + 5.0).abs() < 0.01);
        let pure = Field::from_fn(Grid::new(vec![40.0, 4.0], vec![401, 9]).unwrap(), |y| y[0].abs().max(1e-3).powi(-5));
        let fit = tail_exponent_fit(&pure, 0, (0.25, 1.0)).unwrap();
        assert_relative_eq!(fit.slope, -5.0, epsilon = 1e-10);
    }

    #[test]
    fn tail_window_is_cut_at_zero() {
        let g = Grid::new(vec![10.0, 1.0], vec![101, 3]).unwrap();
        let f = Field::from_fn(g, |y| if y[0].abs() < 8.0 { y[0].abs().max(0.1).powi(-3) } else { 0.0 });
        let t = tail_fit_detailed(&f, 0, (0.5, 1.0)).unwrap();
        assert!(t.window.1 < 8.0);
        assert_relative_eq!(t.fit.slope, -3.0, epsilon = 1e-10);
        let g = Grid::new(vec![10.0, 1.0], vec![101, 3]).unwrap();
        assert!(tail_exponent_fit(&Field::zeros(g), 0, (0.5, 1.0)).is_err());
    }
}
