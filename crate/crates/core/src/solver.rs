//! Explicit conservative time stepping for `u_t = sum_i (phi_i(u))_{x_i x_i}`
//! on a box with Dirichlet data.
//!
//! `phi_i(z) = z^{m_i}` above the floor `eps` and the tangent line at `eps`
//! below it, so every diffusion coefficient stays bounded. With `eps > 0` and
//! boundary value `eps` this is the regularised problem whose solutions
//! decrease monotonically to the Cauchy solution as `eps -> 0`; with boundary
//! value `0` it is the truncated problem on the box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::Barenblatt;
use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{Field, Grid};

/// Regularised constitutive functions `phi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub m: Vec<f64>,
    pub eps: f64,
    eps_pow: Vec<f64>,
    eps_slope: Vec<f64>,
}

impl Nonlinearity {
    pub fn new(m: &[f64], eps: f64) -> Self {
        let eps_pow = m.iter().map(|mi| if eps > 0.0 { eps.powf(*mi) } else { 0.0 }).collect();
        let eps_slope = m
            .iter()
            .map(|mi| if *mi == 1.0 { 1.0 } else if eps > 0.0 { mi * eps.powf(mi - 1.0) } else { f64::INFINITY })
            .collect();
        Self { m: m.to_vec(), eps, eps_pow, eps_slope }
    }

    pub fn phi(&self, axis: usize, z: f64) -> f64 {
        let mi = self.m[axis];
        if mi == 1.0 {
            z
        } else if z >= self.eps && z > 0.0 {
            z.powf(mi)
        } else if self.eps > 0.0 {
            self.eps_pow[axis] + self.eps_slope[axis] * (z - self.eps)
        } else {
            0.0
        }
    }

    /// `phi_i'(z)`, constant below the floor.
    pub fn dphi(&self, axis: usize, z: f64) -> f64 {
        let mi = self.m[axis];
        if mi == 1.0 {
            1.0
        } else if z >= self.eps && z > 0.0 {
            mi * z.powf(mi - 1.0)
        } else {
            self.eps_slope[axis]
        }
    }

    /// Fill `out[i]` with `phi_i(u)` for every node, sharing one logarithm per node.
    pub fn fill(&self, u: &[f64], out: &mut [Vec<f64>]) {
        let dim = self.m.len();
        for (k, &z) in u.iter().enumerate() {
            if z >= self.eps && z > 0.0 {
                let l = z.ln();
                for i in 0..dim {
                    out[i][k] = if self.m[i] == 1.0 { z } else { (self.m[i] * l).exp() };
                }
            } else {
                for i in 0..dim {
                    out[i][k] = self.phi(i, z);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DtPolicy {
    Fixed(f64),
    /// `dt = safety * min_i h_i^2 / (2 sum_j max phi_j')`, the maximum taken over
    /// the current interior values.
    Cfl { safety: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularization {
    /// Floor as a fraction of `max u_0`.
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Truncated Cauchy problem, `u = 0` on the faces.
    Zero,
    /// Regularised problem, `u = eps` on the faces.
    Epsilon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eps: Regularization,
    pub dt_policy: DtPolicy,
    pub boundary: Boundary,
    pub t_end: f64,
    /// Snapshot interval; `0` keeps only the initial and final states.
    pub record_every: f64,
    /// Finite exponents of the recorded `L^p` norms (`L^1`, `L^inf` are always recorded).
    pub lp: Vec<f64>,
    pub max_steps: usize,
}

/// Default floor relative to `max u_0`.
pub const DEFAULT_EPS_REL: f64 = 1e-6;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: Regularization::Relative(DEFAULT_EPS_REL),
            dt_policy: DtPolicy::Cfl { safety: 0.9 },
            boundary: Boundary::Zero,
            t_end: 1.0,
            record_every: 0.0,
            lp: vec![2.0],
            max_steps: 50_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        match self.eps {
            Regularization::Relative(v) | Regularization::Absolute(v) if !(v >= 0.0) => {
                return Err(Error::InvalidParameter(format!("eps = {v} must be >= 0")));
            }
            _ => {}
        }
        match self.dt_policy {
            DtPolicy::Cfl { safety } if !(safety > 0.0 && safety <= 1.0) => {
                return Err(Error::InvalidParameter(format!("CFL safety {safety} outside (0,1]")));
            }
            DtPolicy::Fixed(dt) if !(dt > 0.0) => {
                return Err(Error::InvalidParameter(format!("fixed dt {dt} must be positive")));
            }
            _ => {}
        }
        if !(self.record_every >= 0.0) {
            return Err(Error::InvalidParameter("record_every must be >= 0".into()));
        }
        Ok(())
    }

    pub fn resolve_eps(&self, u0: &Field) -> f64 {
        match self.eps {
            Regularization::Relative(r) => r * u0.max().max(0.0),
            Regularization::Absolute(a) => a,
        }
    }

    pub fn boundary_value(&self, eps: f64) -> f64 {
        match self.boundary {
            Boundary::Zero => 0.0,
            Boundary::Epsilon => eps,
        }
    }
}

// ---------------------------------------------------------------------------
// Initial data

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitKind {
    /// `(1 - |(x - c)/R|^2)_+^3` with per-axis radii; SSNI when centred.
    Bump { center: Vec<f64>, radii: Vec<f64> },
    /// Product of smoothed indicators of `[-w_i, w_i]` with transition width `width`.
    SmoothBox { half_widths: Vec<f64>, width: f64 },
    /// Isotropic closed-form self-similar solution at time `t`.
    Barenblatt { m: f64, t: f64 },
    /// Sum of two bumps of equal amplitude.
    TwoBumps { first: Vec<f64>, second: Vec<f64>, radius: f64 },
    /// `count` bumps of radius `radius`, centres uniform in `[-spread, spread]^N`
    /// and amplitudes uniform in `[0.5, 1.5]`, drawn from a seeded generator.
    RandomBumps { count: usize, radius: f64, spread: f64, seed: u64 },
}

/// Build initial data with mass `mass`. Generated shapes are rescaled to the
/// exact discrete mass; the Barenblatt snapshot is sampled from its closed form.
pub fn init_data(kind: &InitKind, mass: f64, grid: &Grid) -> Result<Field> {
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("mass {mass} must be positive")));
    }
    let dim = grid.dim();
    let check_len = |v: &[f64]| {
        if v.len() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: dim, got: v.len() })
        }
    };
    let inside = |lo: f64, hi: f64, axis: usize| -> Result<()> {
        let l = grid.extent()[axis] - grid.spacing(axis);
        if lo < -l || hi > l {
            Err(Error::InvalidParameter(format!(
                "support [{lo}, {hi}] exceeds the box on axis {axis}"
            )))
        } else {
            Ok(())
        }
    };
    let mut field = match kind {
        InitKind::Bump { center, radii } => {
            check_len(center)?;
            check_len(radii)?;
            for a in 0..dim {
                inside(center[a] - radii[a], center[a] + radii[a], a)?;
            }
            Field::from_fn(grid.clone(), |x| bump(x, center, radii))
        }
        InitKind::TwoBumps { first, second, radius } => {
            check_len(first)?;
            check_len(second)?;
            let radii = vec![*radius; dim];
            for a in 0..dim {
                inside(first[a].min(second[a]) - radius, first[a].max(second[a]) + radius, a)?;
            }
            Field::from_fn(grid.clone(), |x| bump(x, first, &radii) + bump(x, second, &radii))
        }
        InitKind::RandomBumps { count, radius, spread, seed } => {
            if *count == 0 || !(*radius > 0.0) || !(*spread >= 0.0) {
                return Err(Error::InvalidParameter("random bumps need count > 0, radius > 0, spread >= 0".into()));
            }
            for a in 0..dim {
                inside(-spread - radius, spread + radius, a)?;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let bumps: Vec<(Vec<f64>, f64)> = (0..*count)
                .map(|_| {
                    let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-*spread..=*spread)).collect();
                    (c, rng.gen_range(0.5..=1.5))
                })
                .collect();
            let radii = vec![*radius; dim];
            Field::from_fn(grid.clone(), |x| bumps.iter().map(|(c, w)| w * bump(x, c, &radii)).sum())
        }
        InitKind::SmoothBox { half_widths, width } => {
            check_len(half_widths)?;
            for a in 0..dim {
                inside(-half_widths[a] - 4.0 * width, half_widths[a] + 4.0 * width, a)?;
            }
            Field::from_fn(grid.clone(), |x| {
                x.iter()
                    .zip(half_widths)
                    .map(|(xi, w)| 0.5 * (1.0 - ((xi.abs() - w) / width).tanh()))
                    .product()
            })
        }
        InitKind::Barenblatt { m, t } => {
            let b = Barenblatt::with_mass(dim, *m, mass, crate::barriers::BarenblattForm::Classical)?;
            return Ok(b.snapshot(grid, *t));
        }
    };
    // boundary nodes carry the Dirichlet value
    for k in 0..grid.len() {
        if grid.is_boundary(k) {
            field.values[k] = 0.0;
        }
    }
    let m0 = field.mass();
    if !(m0 > 0.0) {
        return Err(Error::InvalidParameter("generated data has no mass on this grid".into()));
    }
    field.scale(mass / m0);
    Ok(field)
}

fn bump(x: &[f64], center: &[f64], radii: &[f64]) -> f64 {
    let r2: f64 = x.iter().zip(center).zip(radii).map(|((xi, ci), ri)| ((xi - ci) / ri).powi(2)).sum();
    if r2 < 1.0 {
        (1.0 - r2).powi(3)
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Stepping

/// Largest explicit step allowed by the CFL rule for `u`.
pub fn cfl_dt(u: &Field, nl: &Nonlinearity, safety: f64) -> f64 {
    let grid = &u.grid;
    let mut zmin = f64::INFINITY;
    for (k, &z) in u.values.iter().enumerate() {
        if z < zmin && !grid.is_boundary(k) {
            zmin = z;
        }
    }
    if !zmin.is_finite() {
        zmin = 0.0;
    }
    let hmin2 = grid.spacings().iter().map(|h| h * h).fold(f64::INFINITY, f64::min);
    let total: f64 = (0..grid.dim()).map(|i| nl.dphi(i, zmin.max(nl.eps))).sum();
    safety * hmin2 / (2.0 * total)
}

/// Reusable buffers for the explicit update.
pub struct Stepper {
    pub nl: Nonlinearity,
    pub boundary_value: f64,
    phi: Vec<Vec<f64>>,
    next: Vec<f64>,
}

/// Bookkeeping returned by one explicit step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    /// Mass gained through the faces (negative for outflow).
    pub boundary_flux: f64,
    pub min_value: f64,
}

impl Stepper {
    pub fn new(nl: Nonlinearity, boundary_value: f64, grid: &Grid) -> Self {
        let n = grid.len();
        Self { phi: vec![vec![0.0; n]; grid.dim()], next: vec![0.0; n], nl, boundary_value }
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// Advance `u` by `dt`; `extra` adds a drift contribution per interior node
    /// (used by the rescaled equation).
    pub fn advance(&mut self, u: &mut Field, dt: f64) -> Result<StepReport> {
        self.nl.fill(&u.values, &mut self.phi);
        let grid = &u.grid;
        let dim = grid.dim();
        let [n0, n1, n2] = grid.shape3();
        let strides: Vec<usize> = (0..dim).map(|i| grid.stride(i)).collect();
        let inv_h2: Vec<f64> = grid.spacings().iter().map(|h| 1.0 / (h * h)).collect();
        let phi = &self.phi;
        let old = &u.values;
        let bv = self.boundary_value;
        let slab = n1 * n2;
        self.next.par_chunks_mut(slab).enumerate().for_each(|(k0, out)| {
            let edge0 = k0 == 0 || k0 + 1 == n0;
            for k1 in 0..n1 {
                let edge1 = dim > 1 && (k1 == 0 || k1 + 1 == n1);
                for k2 in 0..n2 {
                    let edge2 = dim > 2 && (k2 == 0 || k2 + 1 == n2);
                    let local = k1 * n2 + k2;
                    if edge0 || edge1 || edge2 {
                        out[local] = bv;
                        continue;
                    }
                    let k = k0 * slab + local;
                    let mut acc = 0.0;
                    for i in 0..dim {
                        let p = &phi[i];
                        let s = strides[i];
                        acc += (p[k + s] - 2.0 * p[k] + p[k - s]) * inv_h2[i];
                    }
                    out[local] = old[k] + dt * acc;
                }
            }
        });
        let boundary_flux = dt * self.face_flux(grid);
        let mut min_value = f64::INFINITY;
        let floor = -1e-13 * self.next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in self.next.iter_mut() {
            if !v.is_finite() || *v < floor {
                return Err(Error::Unstable {
                    time: u.time,
                    detail: format!("value {v} after explicit update (dt = {dt:e})"),
                });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
            min_value = min_value.min(*v);
        }
        std::mem::swap(&mut u.values, &mut self.next);
        u.time += dt;
        Ok(StepReport { boundary_flux, min_value })
    }

    // sum over interior lines of (phi_{n-1} - phi_{n-2}) - (phi_1 - phi_0), times vol / h^2
    fn face_flux(&self, grid: &Grid) -> f64 {
        let dim = grid.dim();
        let vol = grid.cell_volume();
        let mut total = 0.0;
        for i in 0..dim {
            let n = grid.points()[i];
            let s = grid.stride(i);
            let h2 = grid.spacing(i).powi(2);
            let p = &self.phi[i];
            let mut acc = 0.0;
            for k in 0..grid.len() {
                let idx = grid.multi_index(k);
                if idx[i] != 0 {
                    continue;
                }
                if (0..dim).any(|a| a != i && (idx[a] == 0 || idx[a] + 1 == grid.points()[a])) {
                    continue;
                }
                let last = k + (n - 1) * s;
                acc += (p[last] - p[last - s]) - (p[k + s] - p[k]);
            }
            total += acc * vol / h2;
        }
        total
    }
}

/// One explicit step of size `dt` with the regularisation resolved from `cfg` and `u`.
pub fn step(u: &Field, cfg: &SolverConfig, e: &ExponentSet, dt: f64) -> Result<Field> {
    let eps = cfg.resolve_eps(u);
    let mut stepper = Stepper::new(Nonlinearity::new(&e.m, eps), cfg.boundary_value(eps), &u.grid);
    let mut out = u.clone();
    stepper.advance(&mut out, dt)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Runs and diagnostics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub steps: usize,
    pub mass: f64,
    pub linf: f64,
    pub lp: Vec<f64>,
    pub min: f64,
    /// Cumulative `int_0^t int |d_i phi_i(u)|^2` per axis.
    pub energy: Vec<f64>,
    /// `int u^{m_i + 1}` per axis.
    pub power_integrals: Vec<f64>,
    /// Cumulative mass gained through the faces.
    pub boundary_flux: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub m: Vec<f64>,
    pub eps: f64,
    pub lp_exponents: Vec<f64>,
    pub records: Vec<DiagnosticsRecord>,
    /// Largest per-step `|delta mass - boundary flux|`.
    pub max_conservation_error: f64,
}

impl RunDiagnostics {
    pub fn mass_drift(&self) -> f64 {
        let first = self.records.first().map_or(0.0, |r| r.mass);
        let last = self.records.last().map_or(0.0, |r| r.mass);
        if first > 0.0 {
            (last - first) / first
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<Field>,
    pub diagnostics: RunDiagnostics,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds at least the initial state")
    }
}

fn power_integrals(u: &Field, m: &[f64]) -> Vec<f64> {
    let vol = u.grid.cell_volume();
    m.iter().map(|mi| u.values.iter().map(|v| v.powf(mi + 1.0)).sum::<f64>() * vol).collect()
}

fn gradient_energy(grid: &Grid, phi: &[Vec<f64>]) -> Vec<f64> {
    let vol = grid.cell_volume();
    (0..grid.dim())
        .map(|i| {
            let s = grid.stride(i);
            let n = grid.points()[i];
            let h2 = grid.spacing(i).powi(2);
            let p = &phi[i];
            let mut acc = 0.0;
            for k in 0..grid.len() {
                let j = (k / s) % n;
                if j + 1 < n {
                    let d = p[k + s] - p[k];
                    acc += d * d;
                }
            }
            acc * vol / h2
        })
        .collect()
}

fn record(u: &Field, steps: usize, lp: &[f64], m: &[f64], energy: &[f64], flux: f64) -> DiagnosticsRecord {
    DiagnosticsRecord {
        time: u.time,
        steps,
        mass: u.mass(),
        linf: u.lp_norm(f64::INFINITY),
        lp: lp.iter().map(|p| u.lp_norm(*p)).collect(),
        min: u.min(),
        energy: energy.to_vec(),
        power_integrals: power_integrals(u, m),
        boundary_flux: flux,
    }
}

/// Integrate from `u0` to `cfg.t_end`, recording snapshots and diagnostics.
pub fn run(u0: &Field, cfg: &SolverConfig, e: &ExponentSet) -> Result<Trajectory> {
    cfg.validate()?;
    if e.n != u0.grid.dim() {
        return Err(Error::DimensionMismatch { expected: e.n, got: u0.grid.dim() });
    }
    if !(cfg.t_end >= u0.time) {
        return Err(Error::InvalidParameter(format!("t_end {} before start {}", cfg.t_end, u0.time)));
    }
    let eps = cfg.resolve_eps(u0);
    let nl = Nonlinearity::new(&e.m, eps);
    if matches!(cfg.dt_policy, DtPolicy::Cfl { .. }) && eps == 0.0 && e.m.iter().any(|&mi| mi < 1.0) {
        return Err(Error::InvalidParameter("CFL policy needs eps > 0 for fast diffusion".into()));
    }
    let mut stepper = Stepper::new(nl.clone(), cfg.boundary_value(eps), &u0.grid);
    let mut u = u0.clone();
    let mut energy = vec![0.0; e.n];
    let mut flux = 0.0;
    let mut steps = 0;
    let mut max_cons_err: f64 = 0.0;
    let mut snapshots = vec![u.clone()];
    let mut records = vec![record(&u, 0, &cfg.lp, &e.m, &energy, flux)];
    let mut next_record = if cfg.record_every > 0.0 { u.time + cfg.record_every } else { cfg.t_end };
    let time_tol = 1e-12 * cfg.t_end.abs().max(1.0);
    while u.time < cfg.t_end - time_tol {
        if steps >= cfg.max_steps {
            return Err(Error::Unstable { time: u.time, detail: "step budget exhausted".into() });
        }
        let mut dt = match cfg.dt_policy {
            DtPolicy::Fixed(dt) => dt,
            DtPolicy::Cfl { safety } => cfl_dt(&u, &nl, safety),
        };
        let target = next_record.min(cfg.t_end);
        let mut hits_record = false;
        if u.time + dt >= target - time_tol {
            dt = target - u.time;
            hits_record = true;
        }
        let mass_before = u.mass();
        let rep = stepper.advance(&mut u, dt)?;
        if hits_record {
            u.time = target;
        }
        steps += 1;
        let de = gradient_energy(&u.grid, stepper.phi());
        for (acc, d) in energy.iter_mut().zip(de) {
            *acc += dt * d;
        }
        flux += rep.boundary_flux;
        let cons = (u.mass() - mass_before - rep.boundary_flux).abs();
        max_cons_err = max_cons_err.max(cons);
        if hits_record {
            snapshots.push(u.clone());
            records.push(record(&u, steps, &cfg.lp, &e.m, &energy, flux));
            next_record = if cfg.record_every > 0.0 { target + cfg.record_every } else { cfg.t_end };
        }
    }
    Ok(Trajectory {
        snapshots,
        diagnostics: RunDiagnostics {
            m: e.m.clone(),
            eps,
            lp_exponents: cfg.lp.clone(),
            records,
            max_conservation_error: max_cons_err,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyAxisReport {
    pub axis: usize,
    /// `int_0^T int |d_i u^{m_i}|^2`.
    pub dissipation: f64,
    /// `(int u_0^{m_i+1} - int u(T)^{m_i+1}) / (m_i + 1)`.
    pub budget: f64,
    /// `max(0, dissipation - budget)`.
    pub violation: f64,
    pub relative_violation: f64,
}

impl EnergyAxisReport {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.relative_violation <= rel_tol
    }
}

/// Per-axis energy inequality over the whole recorded run.
pub fn energy_check(diag: &RunDiagnostics) -> Vec<EnergyAxisReport> {
    let (Some(first), Some(last)) = (diag.records.first(), diag.records.last()) else {
        return Vec::new();
    };
    diag.m
        .iter()
        .enumerate()
        .map(|(axis, mi)| {
            let dissipation = last.energy[axis] - first.energy[axis];
            let budget = (first.power_integrals[axis] - last.power_integrals[axis]) / (mi + 1.0);
            let violation = (dissipation - budget).max(0.0);
            let scale = budget.abs().max(dissipation.abs());
            let relative_violation = if scale > 0.0 { violation / scale } else { 0.0 };
            EnergyAxisReport { axis, dissipation, budget, violation, relative_violation }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn iso() -> ExponentSet {
        ExponentSet::from_params(2, &[0.75, 0.75]).unwrap()
    }

    #[test]
    fn tangent_extension_is_continuous() {
        let nl = Nonlinearity::new(&[0.6, 1.0], 1e-4);
        let below = nl.phi(0, 1e-4 * (1.0 - 1e-12));
        let above = nl.phi(0, 1e-4);
        assert_relative_eq!(below, above, max_relative = 1e-9);
        assert_relative_eq!(nl.dphi(0, 0.0), 0.6 * 1e-4f64.powf(-0.4));
        assert_eq!(nl.phi(1, 0.3), 0.3);
        let mut out = vec![vec![0.0; 3]; 2];
        nl.fill(&[0.0, 1e-5, 0.5], &mut out);
        for (k, z) in [0.0, 1e-5, 0.5].iter().enumerate() {
            assert_relative_eq!(out[0][k], nl.phi(0, *z), max_relative = 1e-14);
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let g = Grid::cube(2, 2.0, 9).unwrap();
        let u = Field::from_fn(g, |_| 0.3);
        let cfg = SolverConfig { eps: Regularization::Absolute(0.3), boundary: Boundary::Epsilon, ..Default::default() };
        let next = step(&u, &cfg, &iso(), 1e-3).unwrap();
        for v in &next.values {
            assert_relative_eq!(*v, 0.3, max_relative = 1e-15);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::cube(2, 2.0, 9).unwrap();
        let u = Field::zeros(g);
        let cfg = SolverConfig {
            eps: Regularization::Absolute(1e-6),
            t_end: 0.1,
            ..Default::default()
        };
        let tr = run(&u, &cfg, &iso()).unwrap();
        assert!(tr.last().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bump_mass_and_symmetry() {
        let g = Grid::cube(2, 8.0, 161).unwrap();
        let u = init_data(&InitKind::Bump { center: vec![0.0, 0.0], radii: vec![1.0, 1.0] }, 1.0, &g).unwrap();
        assert_relative_eq!(u.mass(), 1.0, max_relative = 1e-12);
        // quadrature of the unnormalised bump: int (1-r^2)^3 = pi/4
        let raw = Field::from_fn(g.clone(), |x| bump(x, &[0.0, 0.0], &[1.0, 1.0]));
        assert_relative_eq!(raw.mass(), std::f64::consts::PI / 4.0, max_relative = 1e-3);
        assert!(init_data(&InitKind::Bump { center: vec![7.5, 0.0], radii: vec![1.0, 1.0] }, 1.0, &g).is_err());
        assert!(init_data(&InitKind::Bump { center: vec![0.0], radii: vec![1.0] }, 1.0, &g).is_err());
        assert!(init_data(&InitKind::Bump { center: vec![0.0, 0.0], radii: vec![1.0, 1.0] }, 0.0, &g).is_err());
    }

    #[test]
    fn barenblatt_snapshot_matches_closed_form() {
        let g = Grid::cube(2, 10.0, 41).unwrap();
        let u = init_data(&InitKind::Barenblatt { m: 0.75, t: 1.0 }, 1.0, &g).unwrap();
        let b = Barenblatt::with_mass(2, 0.75, 1.0, crate::barriers::BarenblattForm::Classical).unwrap();
        let mut x = [0.0; 3];
        for k in 0..g.len() {
            g.node_coords(k, &mut x);
            assert_eq!(u.values[k], b.eval_spacetime(&x[..2], 1.0));
        }
        assert_eq!(u.time, 1.0);
    }

    #[test]
    fn conservation_bookkeeping() {
        let g = Grid::cube(2, 4.0, 41).unwrap();
        let u = init_data(&InitKind::Bump { center: vec![0.0, 0.0], radii: vec![1.5, 1.0] }, 1.0, &g).unwrap();
        let cfg = SolverConfig { t_end: 0.5, record_every: 0.1, ..Default::default() };
        let tr = run(&u, &cfg, &iso()).unwrap();
        assert!(tr.diagnostics.max_conservation_error < 1e-10);
        assert_eq!(tr.snapshots.len(), 6);
        let last = tr.diagnostics.records.last().unwrap();
        assert_relative_eq!(last.mass - 1.0, last.boundary_flux, epsilon = 1e-9);
        for w in tr.diagnostics.records.windows(2) {
            assert!(w[1].time > w[0].time);
            assert!(w[1].linf <= w[0].linf * (1.0 + 1e-10));
        }
    }

    #[test]
    fn rejects_unstable_steps() {
        let g = Grid::cube(2, 2.0, 21).unwrap();
        let u = init_data(&InitKind::Bump { center: vec![0.0, 0.0], radii: vec![1.0, 1.0] }, 1.0, &g).unwrap();
        let cfg = SolverConfig::default();
        assert!(matches!(step(&u, &cfg, &iso(), 10.0), Err(Error::Unstable { .. })));
    }

    #[test]
    fn energy_zero_data() {
        let g = Grid::cube(2, 2.0, 9).unwrap();
        let cfg = SolverConfig { eps: Regularization::Absolute(1e-6), t_end: 0.01, ..Default::default() };
        let tr = run(&Field::zeros(g), &cfg, &iso()).unwrap();
        for r in energy_check(&tr.diagnostics) {
            assert_eq!(r.dissipation, 0.0);
            assert_eq!(r.budget, 0.0);
            assert!(r.holds(0.0));
        }
    }
}
