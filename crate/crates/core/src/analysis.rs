//! Executable checks of qualitative properties on recorded runs: positive-part
//! contraction, the `L^1 -> L^inf` smoothing rate, separate symmetry and
//! monotonicity, the quantitative positivity floor, barrier domination and the
//! heat-equation marginal along a linear axis.

use serde::{Deserialize, Serialize};

use crate::barriers::{eval_capped, Profile, UpperBarrierSpec};
use crate::error::{Error, Result};
use crate::exponents::ExponentSet;
use crate::grid::{Field, Grid, MAX_DIM};
use crate::quadrature::{fit_line, HalfLineRule};
use crate::rescaled::{RescaledRun, RescaledState};
use crate::solver::Trajectory;

// ---------------------------------------------------------------------------
// Contraction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `int (u_1 - u_2)_+` per recorded time.
    pub functional: Vec<f64>,
    /// Largest increase between consecutive entries.
    pub max_increase: f64,
    /// `1 - J(T) / J(0)`, zero when `J(0) = 0`.
    pub relative_decrease: f64,
    /// Whether `u_1 <= u_2` initially.
    pub ordered: bool,
    /// Largest `u_1 - u_2` after the start when the data were ordered.
    pub order_violation: f64,
}

impl ContractionReport {
    /// Nonincrease within `rel_tol` times the initial value.
    pub fn nonincreasing(&self, rel_tol: f64) -> bool {
        let j0 = self.functional.first().copied().unwrap_or(0.0);
        self.max_increase <= rel_tol * j0.max(f64::MIN_POSITIVE)
    }
}

/// `t -> int (u_1 - u_2)_+` on two runs with the same grid and time stamps.
pub fn l1_contraction_check(a: &Trajectory, b: &Trajectory) -> Result<ContractionReport> {
    if a.snapshots.len() != b.snapshots.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} snapshots",
            a.snapshots.len(),
            b.snapshots.len()
        )));
    }
    let mut times = Vec::new();
    let mut functional = Vec::new();
    for (u1, u2) in a.snapshots.iter().zip(&b.snapshots) {
        u1.check_same_grid(u2)?;
        if (u1.time - u2.time).abs() > 1e-9 * u1.time.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("time stamps {} vs {}", u1.time, u2.time)));
        }
        times.push(u1.time);
        functional.push(u1.positive_part_integral(u2)?);
    }
    let first = &a.snapshots[0];
    let ordered = first.values.iter().zip(&b.snapshots[0].values).all(|(x, y)| x <= y);
    let order_violation = if ordered {
        a.snapshots
            .iter()
            .zip(&b.snapshots)
            .flat_map(|(u1, u2)| u1.values.iter().zip(&u2.values).map(|(x, y)| x - y))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let max_increase = functional.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let j0 = functional[0];
    let relative_decrease = if j0 > 0.0 { 1.0 - functional[functional.len() - 1] / j0 } else { 0.0 };
    Ok(ContractionReport { times, functional, max_increase, relative_decrease, ordered, order_violation })
}

/// Largest `L^1` distance between snapshots of a run and of its refinement
/// at matching times, the fine field read at the coarse nodes.
pub fn refinement_gap(coarse: &Trajectory, fine: &Trajectory) -> Result<f64> {
    let mut gap: f64 = 0.0;
    let mut paired = 0;
    for c in &coarse.snapshots {
        let Some(f) = fine.snapshots.iter().find(|f| (f.time - c.time).abs() <= 1e-9 * c.time.abs().max(1.0)) else {
            continue;
        };
        let fr = f.resample(&c.grid, |_| {});
        gap = gap.max(c.l1_distance(&fr)?);
        paired += 1;
    }
    if paired == 0 {
        return Err(Error::GridMismatch("no snapshots at matching times".into()));
    }
    Ok(gap)
}

// ---------------------------------------------------------------------------
// Smoothing

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub linf: f64,
    pub mass: f64,
}

pub fn samples_from_trajectory(traj: &Trajectory) -> Vec<NormSample> {
    traj.diagnostics.records.iter().map(|r| NormSample { t: r.time, linf: r.linf, mass: r.mass }).collect()
}

/// Samples of the original solution read off a rescaled run:
/// `||u(t)||_inf = (t + t0)^{-alpha} ||v(tau)||_inf`.
pub fn samples_from_rescaled(run: &RescaledRun, e: &ExponentSet) -> Vec<NormSample> {
    run.states
        .iter()
        .map(|s| NormSample { t: s.physical_time(), linf: (-e.alpha * s.tau).exp() * s.v.max(), mass: s.v.mass() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingFit {
    pub slope: f64,
    pub slope_stderr: f64,
    /// `max_t ||u(t)||_inf t^alpha M^{-2 alpha / N}`.
    pub c1_estimate: f64,
    pub samples: usize,
    pub decades: f64,
}

/// Least-squares slope of `ln ||u||_inf` against `ln t` over `t_min <= t <= t_max`.
pub fn smoothing_fit(samples: &[NormSample], t_min: f64, t_max: f64, e: &ExponentSet) -> Result<SmoothingFit> {
    let used: Vec<&NormSample> =
        samples.iter().filter(|s| s.t >= t_min * (1.0 - 1e-12) && s.t <= t_max * (1.0 + 1e-12) && s.t > 0.0).collect();
    if used.len() < 3 {
        return Err(Error::InvalidParameter(format!("only {} samples in [{t_min}, {t_max}]", used.len())));
    }
    let lo = used.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|s| s.t).fold(0.0, f64::max);
    let decades = (hi / lo).log10();
    if decades < 1.5 {
        return Err(Error::InvalidParameter(format!("span of {decades:.2} decades is below 1.5")));
    }
    let x: Vec<f64> = used.iter().map(|s| s.t.ln()).collect();
    let y: Vec<f64> = used.iter().map(|s| s.linf.ln()).collect();
    let fit = fit_line(&x, &y).ok_or_else(|| Error::InvalidParameter("degenerate fit".into()))?;
    let expo = 2.0 * e.alpha / e.n as f64;
    let c1_estimate = used.iter().map(|s| s.linf * s.t.powf(e.alpha) * s.mass.powf(-expo)).fold(0.0, f64::max);
    Ok(SmoothingFit { slope: fit.slope, slope_stderr: fit.slope_stderr, c1_estimate, samples: used.len(), decades })
}

// ---------------------------------------------------------------------------
// Symmetry and monotonicity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsniReport {
    /// `max |f(x) - f(R_i x)|` over all axis reflections.
    pub symmetry_error: f64,
    /// Pairs of neighbours on a half-axis ray where the outer value exceeds
    /// the inner one by more than the threshold.
    pub violations: usize,
    pub max_increase: f64,
}

pub fn ssni_check(f: &Field, threshold: f64) -> Result<SsniReport> {
    let g = &f.grid;
    let dim = g.dim();
    let mut symmetry_error: f64 = 0.0;
    let mut violations = 0;
    let mut max_increase: f64 = 0.0;
    for k in 0..g.len() {
        let idx = g.multi_index(k);
        for i in 0..dim {
            let n = g.points()[i];
            let mut mirror = idx;
            mirror[i] = n - 1 - idx[i];
            let km = g.flat_index(&mirror[..dim]);
            symmetry_error = symmetry_error.max((f.values[k] - f.values[km]).abs());
            // step away from the centre along axis i
            let j = idx[i];
            let outward = if 2 * j + 1 >= n { j + 1 < n } else { j > 0 };
            if outward {
                let mut next: [usize; MAX_DIM] = idx;
                next[i] = if 2 * j + 1 >= n { j + 1 } else { j - 1 };
                let inc = f.values[g.flat_index(&next[..dim])] - f.values[k];
                max_increase = max_increase.max(inc);
                if inc > threshold {
                    violations += 1;
                }
            }
        }
    }
    Ok(SsniReport { symmetry_error, violations, max_increase })
}

// ---------------------------------------------------------------------------
// Positivity floor

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityCertificate {
    pub n: usize,
    pub mass: f64,
    pub r0: f64,
    pub r_eps: f64,
    /// Bound on the mass outside the box `|y_i| < r_eps`.
    pub eps_mass: f64,
    /// Bound on `sup v`.
    pub sup_bound: f64,
    /// `M 2^{-(N+1)} (r_eps - r0)^{-N}`.
    pub c1: f64,
}

pub fn positivity_floor(n: usize, mass: f64, r0: f64, r_eps: f64) -> f64 {
    mass * 2f64.powi(-(n as i32 + 1)) * (r_eps - r0).powi(-(n as i32))
}

impl PositivityCertificate {
    pub fn new(n: usize, mass: f64, r0: f64, r_eps: f64, eps_mass: f64, sup_bound: f64) -> Result<Self> {
        if !(mass > 0.0 && r0 > 0.0 && r_eps > r0) {
            return Err(Error::InvalidParameter(format!("need M > 0 and 0 < r0 < R_eps (got {mass}, {r0}, {r_eps})")));
        }
        if !(eps_mass < mass / 4.0) {
            return Err(Error::Inapplicable(format!("outer mass bound {eps_mass} is not below M/4")));
        }
        let slab = sup_bound * r_eps.powi(n as i32 - 1) * r0;
        if !(slab < mass / (4.0 * n as f64)) {
            return Err(Error::Inapplicable(format!("slab mass bound {slab} is not below M/(4N)")));
        }
        Ok(Self { n, mass, r0, r_eps, eps_mass, sup_bound, c1: positivity_floor(n, mass, r0, r_eps) })
    }

    /// Certificate from the upper barrier `T_k G`: `sup = k F_*`, the outer mass
    /// is the barrier mass outside the box, and `r0` is taken at `0.9` of its
    /// admissible bound. `r_eps` is doubled from `r_start` until the outer
    /// mass drops below `M/4`.
    pub fn from_barrier(
        e: &ExponentSet,
        spec: &UpperBarrierSpec,
        k: f64,
        mass: f64,
        r_start: f64,
        rule: &HalfLineRule,
    ) -> Result<Self> {
        let beta_k = k.powf(e.beta);
        let sup_bound = k * spec.f_star;
        let mut r_eps = r_start;
        for _ in 0..200 {
            let hw: Vec<f64> = e.gamma_stat.iter().map(|g| r_eps * k.powf(*g)).collect();
            let eps_mass = beta_k * spec.capped_mass_outside_box(&hw, rule);
            if eps_mass < mass / 4.0 {
                let r0 = 0.9 * mass / (4.0 * e.n as f64 * sup_bound * r_eps.powi(e.n as i32 - 1));
                return Self::new(e.n, mass, r0.min(0.5 * r_eps), r_eps, eps_mass, sup_bound);
            }
            r_eps *= 2.0;
        }
        Err(Error::Inapplicable("barrier mass outside every box exceeds M/4".into()))
    }
}

/// Mass of `f` on nodes with some `|y_i| >= r`.
pub fn mass_outside_box(f: &Field, r: f64) -> f64 {
    let g = &f.grid;
    let mut x = [0.0; MAX_DIM];
    let mut acc = 0.0;
    for k in 0..g.len() {
        g.node_coords(k, &mut x);
        if x[..g.dim()].iter().any(|c| c.abs() >= r) {
            acc += f.values[k];
        }
    }
    acc * g.cell_volume()
}

impl PositivityCertificate {
    /// Certificate with the sup and outer-mass bounds measured on the run
    /// itself. `r_eps` is the smallest multiple of `r_step` whose outer mass
    /// stays below `M/4` on every state; `r0` is `0.9` of its admissible bound.
    pub fn from_run(states: &[RescaledState], mass: f64, r_step: f64) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::InvalidParameter("no states".into()))?;
        let dim = first.v.grid.dim();
        let sup_bound = states.iter().map(|s| s.v.max()).fold(0.0, f64::max);
        let reach = first.v.grid.extent().iter().cloned().fold(f64::INFINITY, f64::min);
        let mut r_eps = r_step;
        while r_eps < reach {
            let eps_mass = states.iter().map(|s| mass_outside_box(&s.v, r_eps)).fold(0.0, f64::max);
            if eps_mass < mass / 4.0 {
                let r0 = 0.9 * mass / (4.0 * dim as f64 * sup_bound * r_eps.powi(dim as i32 - 1));
                return Self::new(dim, mass, r0.min(0.5 * r_eps), r_eps, eps_mass, sup_bound);
            }
            r_eps += r_step;
        }
        Err(Error::Inapplicable("outer mass stays above M/4 inside the box".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    /// `(tau, min over |y_i| <= r0)` per state.
    pub minima: Vec<(f64, f64)>,
    pub floor: f64,
    pub holds: bool,
}

/// Checks `min_{|y_i| <= r0} v >= (1 - slack) c1` on every state.
pub fn positivity_check(states: &[RescaledState], cert: &PositivityCertificate, slack: f64) -> Result<PositivityReport> {
    let floor = (1.0 - slack) * cert.c1;
    let mut minima = Vec::with_capacity(states.len());
    for s in states {
        let g = &s.v.grid;
        if g.dim() != cert.n {
            return Err(Error::DimensionMismatch { expected: cert.n, got: g.dim() });
        }
        let mut x = [0.0; MAX_DIM];
        let mut lo = f64::INFINITY;
        for k in 0..g.len() {
            g.node_coords(k, &mut x);
            if x[..g.dim()].iter().all(|c| c.abs() <= cert.r0) {
                lo = lo.min(s.v.values[k]);
            }
        }
        if !lo.is_finite() {
            // no node inside: use the interpolated corner value, the SSNI minimum
            let corner = vec![cert.r0; g.dim()];
            lo = s.v.value_at(&corner);
        }
        minima.push((s.tau, lo));
    }
    let holds = minima.iter().all(|(_, m)| *m >= floor);
    Ok(PositivityReport { minima, floor, holds })
}

// ---------------------------------------------------------------------------
// Barrier domination

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityConditions {
    pub mass: f64,
    /// Bound on `sup v_0`.
    pub l1: f64,
    pub tau0: f64,
    /// Smoothing constant estimate.
    pub c1: f64,
    pub f_star: f64,
}

impl AdmissibilityConditions {
    /// `C_1 M^{2 alpha / N} <= F_* (1 - e^{-tau0})^alpha`.
    pub fn smoothing_under_cap(&self, e: &ExponentSet) -> bool {
        self.c1 * self.mass.powf(2.0 * e.alpha / e.n as f64) <= self.f_star * (1.0 - (-self.tau0).exp()).powf(e.alpha)
    }

    /// `C_1 M^{2 alpha / N} <= L_1 (1 - e^{-tau0})^alpha`.
    pub fn smoothing_under_bound(&self, e: &ExponentSet) -> bool {
        self.c1 * self.mass.powf(2.0 * e.alpha / e.n as f64) <= self.l1 * (1.0 - (-self.tau0).exp()).powf(e.alpha)
    }

    /// `L_1 e^{alpha tau0} <= F_*`.
    pub fn early_bound_under_cap(&self, e: &ExponentSet) -> bool {
        self.l1 * (e.alpha * self.tau0).exp() <= self.f_star
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub conditions_hold: bool,
    /// `max v / G` per state.
    pub max_ratio: Vec<(f64, f64)>,
    pub holds: bool,
}

/// Check `v(y, tau) <= (1 + slack) G(y)` on every node of every state.
/// The data must satisfy `v_0 <= G` and the admissibility conditions.
pub fn barrier_domination_check(
    states: &[RescaledState],
    barrier: &dyn Profile,
    conds: &AdmissibilityConditions,
    e: &ExponentSet,
    slack: f64,
) -> Result<DominationReport> {
    let first = states.first().ok_or_else(|| Error::InvalidParameter("no states".into()))?;
    if !(conds.c1 > 0.0) || !conds.c1.is_finite() {
        return Err(Error::Inapplicable("smoothing constant estimate missing".into()));
    }
    let conditions_hold = conds.smoothing_under_cap(e) && conds.early_bound_under_cap(e);
    if !conditions_hold {
        return Err(Error::Inapplicable("admissibility conditions fail".into()));
    }
    let ratio = |f: &Field| -> Result<f64> {
        let mut x = [0.0; MAX_DIM];
        let dim = f.grid.dim();
        let mut worst: f64 = 0.0;
        for k in 0..f.grid.len() {
            if f.values[k] == 0.0 {
                continue;
            }
            f.grid.node_coords(k, &mut x);
            let gv = barrier.eval(&x[..dim])?;
            worst = worst.max(f.values[k] / gv);
        }
        Ok(worst)
    };
    if ratio(&first.v)? > 1.0 {
        return Err(Error::Inapplicable("initial data exceed the barrier".into()));
    }
    let mut max_ratio = Vec::with_capacity(states.len());
    for s in states {
        max_ratio.push((s.tau, ratio(&s.v)?));
    }
    let holds = max_ratio.iter().all(|(_, r)| *r <= 1.0 + slack);
    Ok(DominationReport { conditions_hold, max_ratio, holds })
}

/// The capped barrier scaled by `T_k`, `k G(k^{gamma_i} y_i)`.
pub fn scaled_cap(spec: &UpperBarrierSpec, k: f64, e: &ExponentSet, y: &[f64]) -> f64 {
    let z: Vec<f64> = y.iter().zip(&e.gamma_stat).map(|(yi, g)| yi * k.powf(*g)).collect();
    k * eval_capped(spec, &z)
}

// ---------------------------------------------------------------------------
// Heat marginal

/// `(4 pi t)^{-1/2} exp(-x^2 / (4 t))`.
pub fn heat_kernel(x: f64, t: f64) -> f64 {
    (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp()
}

/// `w(x_axis) = int f dx'` over the other axes.
pub fn marginal(f: &Field, axis: usize) -> Result<Vec<f64>> {
    let g = &f.grid;
    if axis >= g.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
    }
    let dv: f64 = (0..g.dim()).filter(|i| *i != axis).map(|i| g.spacing(i)).product();
    let mut w = vec![0.0; g.points()[axis]];
    for k in 0..g.len() {
        w[g.multi_index(k)[axis]] += f.values[k];
    }
    w.iter_mut().for_each(|x| *x *= dv);
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalReport {
    pub axis: usize,
    pub marginal_mass: f64,
    pub total_mass: f64,
    /// `||w - M G||_1 / M` against the Gaussian `G`.
    pub relative_l1_error: f64,
}

/// Compare the marginal along the linear axis of a rescaled profile with the
/// stationary Gaussian `M (4 pi)^{-1/2} e^{-y^2/4}`.
pub fn marginal_heat_check(profile: &Field, e: &ExponentSet) -> Result<MarginalReport> {
    let axis = (0..e.n)
        .find(|&i| e.m[i] == 1.0)
        .ok_or_else(|| Error::Inapplicable("no linear axis".into()))?;
    if profile.grid.dim() != e.n {
        return Err(Error::DimensionMismatch { expected: e.n, got: profile.grid.dim() });
    }
    let w = marginal(profile, axis)?;
    let h = profile.grid.spacing(axis);
    let coords = profile.grid.axis_coords(axis);
    let total_mass = profile.mass();
    let marginal_mass = w.iter().sum::<f64>() * h;
    let err: f64 = w.iter().zip(&coords).map(|(wi, y)| (wi - total_mass * heat_kernel(*y, 1.0)).abs()).sum::<f64>() * h;
    Ok(MarginalReport { axis, marginal_mass, total_mass, relative_l1_error: err / total_mass })
}

// ---------------------------------------------------------------------------
// Misc

/// Smallest value over nodes at least `cells` cells away from every face.
pub fn interior_minimum(f: &Field, cells: usize) -> f64 {
    (0..f.grid.len())
        .filter(|&k| f.grid.cells_from_boundary(k) >= cells)
        .map(|k| f.values[k])
        .fold(f64::INFINITY, f64::min)
}

/// Largest relative increase of `||u||_p` between consecutive records, for
/// `p = 1`, each configured `p`, and `p = inf` (in that order).
pub fn lp_monotonicity(traj: &Trajectory) -> Vec<(f64, f64)> {
    let recs = &traj.diagnostics.records;
    let mut out = Vec::new();
    let series = |get: &dyn Fn(usize) -> f64| -> f64 {
        (1..recs.len()).map(|i| (get(i) - get(i - 1)) / get(i - 1).max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    };
    out.push((1.0, series(&|i| recs[i].mass)));
    for (j, p) in traj.diagnostics.lp_exponents.iter().enumerate() {
        out.push((*p, series(&|i| recs[i].lp[j])));
    }
    out.push((f64::INFINITY, series(&|i| recs[i].linf)));
    out
}

/// A symmetric grid check helper: whether every axis is centred (always true
/// for [`Grid`]) and has an odd node count.
pub fn has_centre_node(g: &Grid) -> bool {
    g.points().iter().all(|n| n % 2 == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{init_data, InitKind};
    use approx::assert_relative_eq;

    #[test]
    fn positivity_floor_reference_values() {
        assert_relative_eq!(positivity_floor(2, 1.0, 0.5, 4.0), 0.125 / 12.25, max_relative = 1e-14);
        assert_relative_eq!(positivity_floor(2, 2.0, 0.5, 4.0), 2.0 * positivity_floor(2, 1.0, 0.5, 4.0));
        let c = PositivityCertificate::new(2, 1.0, 0.02, 4.0, 0.1, 1.0).unwrap();
        assert!(c.c1 > 0.0);
        assert!(PositivityCertificate::new(2, 1.0, 0.5, 4.0, 0.1, 1.0).is_err());
        assert!(PositivityCertificate::new(2, 1.0, 0.02, 4.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn ssni_generator_and_negative_control() {
        let g = Grid::cube(2, 4.0, 41).unwrap();
        let f = init_data(&InitKind::Bump { center: vec![0.0, 0.0], radii: vec![1.5, 1.0] }, 1.0, &g).unwrap();
        let r = ssni_check(&f, 1e-12).unwrap();
        assert_eq!(r.symmetry_error, 0.0);
        assert_eq!(r.violations, 0);
        let s = init_data(&InitKind::Bump { center: vec![0.5, 0.0], radii: vec![1.0, 1.0] }, 1.0, &g).unwrap();
        let r = ssni_check(&s, 1e-12).unwrap();
        assert!(r.symmetry_error > 0.01);
        assert!(r.violations > 0);
    }

    #[test]
    fn heat_kernel_normalisation() {
        let t = 1.0 / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(heat_kernel(0.0, t), 1.0, epsilon = 1e-15);
        assert_relative_eq!(heat_kernel(0.0, 1.0), (4.0 * std::f64::consts::PI).powf(-0.5));
    }

    #[test]
    fn marginal_keeps_mass() {
        let g = Grid::new(vec![8.0, 3.0], vec![81, 31]).unwrap();
        let f = Field::from_fn(g, |y| heat_kernel(y[0], 1.0) * (1.0 - (y[1] / 3.0).powi(2)));
        let w = marginal(&f, 0).unwrap();
        assert_relative_eq!(w.iter().sum::<f64>() * f.grid.spacing(0), f.mass(), max_relative = 1e-12);
        let e = ExponentSet::from_params(2, &[0.6, 0.8]).unwrap();
        assert!(matches!(marginal_heat_check(&f, &e), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn admissibility_conditions() {
        let e = ExponentSet::from_params(2, &[0.75, 0.75]).unwrap();
        let c = AdmissibilityConditions { mass: 1.0, l1: 0.1, tau0: 1.0, c1: 0.1, f_star: 1.0 };
        assert!(c.smoothing_under_cap(&e));
        assert!(c.early_bound_under_cap(&e));
        let bad = AdmissibilityConditions { f_star: 0.01, ..c };
        assert!(!bad.smoothing_under_cap(&e));
    }
}
