//! Explicit barrier profiles for the stationary equation
//!
//! ```text
//! I[F] = sum_i [ (F^{m_i})_{y_i y_i} + alpha sigma_i (y_i F)_{y_i} ] = 0
//! ```
//!
//! * upper barrier `(sum |y_i|^{theta_i})^{-delta}`, a super-solution (`I <= 0`)
//!   outside the anisotropic ball `sum |y_i|^{theta_i} < r`;
//! * its cap `G = min(upper, r^{-delta})`;
//! * lower barrier `(A + sum |y_i|^{vartheta_i})^{-gamma}`, a sub-solution
//!   (`I >= 0`) away from the origin once `A >= A_0`;
//! * the isotropic Barenblatt profile, which solves `I[F] = 0` exactly.
//!
//! [`stationary_residual`] evaluates `I` by central differences so the sign
//! claims can be checked pointwise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{critical_exponent, ExponentSet};
use crate::grid::Field;
use crate::quadrature::{bisect, even_outer_domain, even_whole_space, unit_sphere_area, HalfLineRule};

/// Default relative position inside the admissibility windows.
pub const DEFAULT_SLACK: f64 = 0.1;

// ---------------------------------------------------------------------------
// Upper barrier

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBarrierSpec {
    pub delta: f64,
    pub theta: Vec<f64>,
    /// Radius of the outer domain, `sum |y_i|^{theta_i} >= r`.
    pub r: f64,
    pub ln_r: f64,
    /// Boundary value `r^{-delta}`.
    pub f_star: f64,
    /// Per-axis candidates whose maximum is `ln r`.
    pub ln_r_candidates: Vec<f64>,
}

/// `1/sigma_i < delta theta_i < 2/(1 - m_i)`; linear axes only need the lower bound.
pub fn upper_window(e: &ExponentSet, axis: usize) -> (f64, f64) {
    let lower = 1.0 / e.sigma[axis];
    let upper = if e.is_linear_axis(axis) { f64::INFINITY } else { 2.0 / (1.0 - e.m[axis]) };
    (lower, upper)
}

impl UpperBarrierSpec {
    pub fn new(e: &ExponentSet, delta: f64, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != e.n {
            return Err(Error::DimensionMismatch { expected: e.n, got: theta.len() });
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
        }
        for (i, &th) in theta.iter().enumerate() {
            if th < 1.0 {
                return Err(Error::InvalidParameter(format!("theta[{i}] = {th} < 1")));
            }
            let (lo, hi) = upper_window(e, i);
            let dt = delta * th;
            if !(lo < dt && dt < hi) {
                return Err(Error::EmptyWindow { axis: i, lower: lo, upper: hi });
            }
        }
        let min_st = e.sigma.iter().zip(&theta).map(|(s, t)| s * t).fold(f64::INFINITY, f64::min);
        let gap = delta * min_st - 1.0;
        let nf = e.n as f64;
        let ln_r_candidates: Vec<f64> = (0..e.n)
            .map(|i| {
                let dm = delta * e.m[i];
                let base = nf * dm * (dm + 1.0) * theta[i] * theta[i] / (gap * e.alpha);
                let expo = 1.0 / (2.0 / theta[i] - delta * (1.0 - e.m[i]));
                expo * base.ln()
            })
            .collect();
        let ln_r = ln_r_candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            delta,
            theta,
            r: ln_r.exp(),
            ln_r,
            f_star: (-delta * ln_r).exp(),
            ln_r_candidates,
        })
    }

    /// `X(y) = sum |y_i|^{theta_i}`.
    pub fn anisotropic_radius(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.theta).map(|(yi, t)| yi.abs().powf(*t)).sum()
    }

    pub fn in_outer_domain(&self, y: &[f64]) -> bool {
        self.anisotropic_radius(y) >= self.r
    }

    /// `int_{X >= r} X^{-delta}`, computed in coordinates scaled by `r^{1/theta_i}`.
    pub fn outer_mass(&self, rule: &HalfLineRule) -> f64 {
        let delta = self.delta;
        let theta = self.theta.clone();
        let inner = even_outer_domain(&self.theta, rule, &|z| {
            let x: f64 = z.iter().zip(&theta).map(|(zi, t)| zi.powf(*t)).sum();
            x.powf(-delta)
        });
        let ln_factor = self.ln_r * (self.theta.iter().map(|t| 1.0 / t).sum::<f64>() - self.delta);
        inner * ln_factor.exp()
    }

    /// Mass of the capped barrier outside the box `|y_i| < half_width[i]`.
    pub fn capped_mass_outside_box(&self, half_width: &[f64], rule: &HalfLineRule) -> f64 {
        let spec = self.clone();
        let total = even_whole_space(self.theta.len(), rule, &|y| eval_capped(&spec, y));
        let inside = box_integral(half_width, rule, &|y| eval_capped(&spec, y));
        (total - inside).max(0.0)
    }
}

fn box_integral(half_width: &[f64], rule: &HalfLineRule, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    fn rec(axis: usize, hw: &[f64], rule: &HalfLineRule, y: &mut Vec<f64>, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let panels = ((hw[axis] * rule.panels_per_unit as f64).ceil() as usize).max(4);
        rule.rule.composite(0.0, hw[axis], panels, |x| {
            y[axis] = x;
            if axis + 1 == hw.len() {
                f(y)
            } else {
                rec(axis + 1, hw, rule, y, f)
            }
        })
    }
    let mut y = vec![0.0; half_width.len()];
    (1u64 << half_width.len()) as f64 * rec(0, half_width, rule, &mut y, f)
}

/// `delta = 1`, `theta_i` a convex combination of the window ends, weighted
/// `1 - slack` towards the sharp decay `2/(1 - m_i)`.
pub fn select_upper_params(e: &ExponentSet, slack: f64) -> Result<UpperBarrierSpec> {
    if !(slack > 0.0 && slack < 1.0) {
        return Err(Error::InvalidParameter(format!("slack = {slack} must lie in (0,1)")));
    }
    let delta = 1.0;
    let mut theta = Vec::with_capacity(e.n);
    for i in 0..e.n {
        let (lo, hi) = upper_window(e, i);
        if !(lo < hi) {
            return Err(Error::EmptyWindow { axis: i, lower: lo, upper: hi });
        }
        let t = if e.is_linear_axis(i) { lo + 1.0 } else { (1.0 - slack) * hi + slack * lo };
        theta.push((t / delta).max(1.0));
    }
    UpperBarrierSpec::new(e, delta, theta)
}

pub fn eval_upper(s: &UpperBarrierSpec, y: &[f64]) -> Result<f64> {
    let x = s.anisotropic_radius(y);
    if x > 0.0 {
        Ok(x.powf(-s.delta))
    } else {
        Err(Error::Singular(y.to_vec()))
    }
}

/// `G = min(upper, F_*)`, finite everywhere.
pub fn eval_capped(s: &UpperBarrierSpec, y: &[f64]) -> f64 {
    let x = s.anisotropic_radius(y);
    if x <= s.r {
        s.f_star
    } else {
        x.powf(-s.delta).min(s.f_star)
    }
}

// ---------------------------------------------------------------------------
// Lower barrier

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBarrierSpec {
    pub gamma: f64,
    pub vartheta: Vec<f64>,
    pub a: f64,
    pub a0: f64,
}

/// Smallest admissible offset, from requiring every axis term of the
/// sub-solution estimate to dominate the negative drift remainder:
///
/// ```text
/// A_0 = max_i [ alpha (gamma max_j sigma_j vartheta_j - 1)
///               / (N gamma m_i (gamma m_i + 1) vartheta_i^2) ]^{1 / (gamma - gamma m_i - 2/vartheta_i)}
/// ```
pub fn lower_offset_threshold(e: &ExponentSet, gamma: f64, vartheta: &[f64]) -> f64 {
    let max_sv = e.sigma.iter().zip(vartheta).map(|(s, v)| s * v).fold(f64::NEG_INFINITY, f64::max);
    let num = e.alpha * (gamma * max_sv - 1.0);
    let nf = e.n as f64;
    (0..e.n)
        .map(|i| {
            let gm = gamma * e.m[i];
            let base = num / (nf * gm * (gm + 1.0) * vartheta[i] * vartheta[i]);
            base.powf(1.0 / (gamma - gm - 2.0 / vartheta[i]))
        })
        .fold(0.0, f64::max)
}

impl LowerBarrierSpec {
    pub fn new(e: &ExponentSet, gamma: f64, vartheta: Vec<f64>, a: f64) -> Result<Self> {
        if vartheta.len() != e.n {
            return Err(Error::DimensionMismatch { expected: e.n, got: vartheta.len() });
        }
        if let Some(i) = (0..e.n).find(|&i| e.is_linear_axis(i)) {
            return Err(Error::Inapplicable(format!(
                "lower barrier needs m_i < 1 on every axis (axis {i} is linear)"
            )));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")));
        }
        for (i, &v) in vartheta.iter().enumerate() {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("vartheta[{i}] = {v} outside (0,1]")));
            }
            let lhs = 1.0 / (gamma * v);
            let rhs = (1.0 - e.m[i]) / 2.0;
            if !(lhs < rhs) {
                return Err(Error::EmptyWindow { axis: i, lower: lhs, upper: rhs });
            }
        }
        let a0 = lower_offset_threshold(e, gamma, &vartheta);
        if !(a >= a0) {
            return Err(Error::InvalidParameter(format!("A = {a} below threshold A_0 = {a0}")));
        }
        Ok(Self { gamma, vartheta, a, a0 })
    }

    pub fn with_offset(&self, e: &ExponentSet, a: f64) -> Result<Self> {
        Self::new(e, self.gamma, self.vartheta.clone(), a)
    }

    /// Offset below the threshold; for negative controls only.
    pub fn with_offset_unchecked(&self, a: f64) -> Self {
        Self { a, ..self.clone() }
    }

    pub fn inner_sum(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.vartheta).map(|(yi, v)| yi.abs().powf(*v)).sum()
    }

    pub fn mass(&self, rule: &HalfLineRule) -> f64 {
        let s = self.clone();
        even_whole_space(self.vartheta.len(), rule, &|y| eval_lower(&s, y))
    }
}

/// `vartheta_i` proportional to the sharp decay `2/(1-m_i)` (largest equal to one)
/// and `gamma = (1 + slack) max_j 2/(1-m_j)`, so `gamma vartheta_i = (1 + slack) 2/(1-m_i)`.
/// The offset is set to twice the threshold.
pub fn select_lower_params(e: &ExponentSet, slack: f64) -> Result<LowerBarrierSpec> {
    if !(slack > 0.0) {
        return Err(Error::InvalidParameter(format!("slack = {slack} must be positive")));
    }
    if let Some(i) = (0..e.n).find(|&i| e.is_linear_axis(i)) {
        return Err(Error::Inapplicable(format!(
            "lower barrier needs m_i < 1 on every axis (axis {i} is linear)"
        )));
    }
    let sharp: Vec<f64> = e.m.iter().map(|mi| 2.0 / (1.0 - mi)).collect();
    let top = sharp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vartheta: Vec<f64> = sharp.iter().map(|d| d / top).collect();
    let gamma = (1.0 + slack) * top;
    let a0 = lower_offset_threshold(e, gamma, &vartheta);
    LowerBarrierSpec::new(e, gamma, vartheta, 2.0 * a0)
}

pub fn eval_lower(s: &LowerBarrierSpec, y: &[f64]) -> f64 {
    (s.a + s.inner_sum(y)).powf(-s.gamma)
}

/// `t^{-alpha} (A + sum t^{-alpha sigma_i vartheta_i} |x_i|^{vartheta_i})^{-gamma}`.
pub fn eval_lower_spacetime(s: &LowerBarrierSpec, e: &ExponentSet, x: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("time t = {t} must be positive")));
    }
    let sum: f64 = x
        .iter()
        .zip(&s.vartheta)
        .zip(&e.a)
        .map(|((xi, v), ai)| t.powf(-ai * v) * xi.abs().powf(*v))
        .sum();
    Ok(t.powf(-e.alpha) * (s.a + sum).powf(-s.gamma))
}

// ---------------------------------------------------------------------------
// Isotropic explicit profile

/// Which closed form to use for the isotropic profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BarenblattForm {
    /// `(C + k |y|^2)^{-1/(1-m)}`, the classical fast-diffusion Barenblatt profile.
    Classical,
    /// `(C + k |y|)^{-2/(1-m)}`, linear in `|y|` inside the bracket.
    LinearRadius,
}

/// Isotropic self-similar profile with `k = alpha (1-m) / (2 m N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barenblatt {
    pub n: usize,
    pub m: f64,
    pub c: f64,
    pub form: BarenblattForm,
    pub alpha: f64,
    pub k: f64,
}

impl Barenblatt {
    pub fn new(n: usize, m: f64, c: f64, form: BarenblattForm) -> Result<Self> {
        if !(m > critical_exponent(n) && m < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "isotropic profile needs m_c = {} < m = {m} < 1",
                critical_exponent(n)
            )));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
        }
        let nf = n as f64;
        let alpha = nf / (nf * (m - 1.0) + 2.0);
        let k = alpha * (1.0 - m) / (2.0 * m * nf);
        Ok(Self { n, m, c, form, alpha, k })
    }

    /// Profile with total mass `mass`.
    pub fn with_mass(n: usize, m: f64, mass: f64, form: BarenblattForm) -> Result<Self> {
        let c = barenblatt_mass_to_c(m, n, mass, form)?;
        Self::new(n, m, c, form)
    }

    pub fn radial(&self, r: f64) -> f64 {
        match self.form {
            BarenblattForm::Classical => (self.c + self.k * r * r).powf(-1.0 / (1.0 - self.m)),
            BarenblattForm::LinearRadius => (self.c + self.k * r).powf(-2.0 / (1.0 - self.m)),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        self.radial(r2.sqrt())
    }

    /// `U(x,t) = t^{-alpha} F(x t^{-alpha/N})`.
    pub fn eval_spacetime(&self, x: &[f64], t: f64) -> f64 {
        let s = t.powf(-self.alpha / self.n as f64);
        let r2: f64 = x.iter().map(|v| (v * s) * (v * s)).sum();
        t.powf(-self.alpha) * self.radial(r2.sqrt())
    }

    pub fn mass(&self) -> f64 {
        barenblatt_mass(self.n, self.m, self.c, self.form)
    }

    pub fn snapshot(&self, grid: &crate::grid::Grid, t: f64) -> Field {
        Field::from_fn(grid.clone(), |x| self.eval_spacetime(x, t)).with_time(t)
    }
}

fn barenblatt_mass(n: usize, m: f64, c: f64, form: BarenblattForm) -> f64 {
    let b = match Barenblatt::new(n, m, c, form) {
        Ok(b) => b,
        Err(_) => return f64::NAN,
    };
    // scale the radial variable to the core width so the split at 1 is natural
    let width = match form {
        BarenblattForm::Classical => (c / b.k).sqrt(),
        BarenblattForm::LinearRadius => c / b.k,
    };
    let rule = HalfLineRule::new(12, 4, 80.0);
    let nf = n as i32;
    unit_sphere_area(n) * width.powi(nf) * rule.from(0.0, |s| s.powi(nf - 1) * b.radial(s * width))
}

/// The constant `C` whose profile carries mass `mass`, by bisection on the
/// (strictly decreasing) quadrature mass.
pub fn barenblatt_mass_to_c(m: f64, n: usize, mass: f64, form: BarenblattForm) -> Result<f64> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::InvalidParameter(format!("mass {mass} must be positive")));
    }
    Barenblatt::new(n, m, 1.0, form)?;
    let target = mass.ln();
    let g = |ln_c: f64| barenblatt_mass(n, m, ln_c.exp(), form).ln() - target;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) < 0.0 {
        lo -= 2.0;
        if lo < -700.0 {
            return Err(Error::InvalidParameter("mass too large".into()));
        }
    }
    while g(hi) > 0.0 {
        hi += 2.0;
        if hi > 700.0 {
            return Err(Error::InvalidParameter("mass too small".into()));
        }
    }
    let ln_c = bisect(lo, hi, 1e-13, g).ok_or_else(|| Error::InvalidParameter("bisection failed".into()))?;
    Ok(ln_c.exp())
}

// ---------------------------------------------------------------------------
// Profiles and the stationary residual

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    UpperBarrier,
    CappedUpperBarrier,
    LowerBarrier,
    Barenblatt,
    Grid,
    Scaled,
}

/// A nonnegative function on `R^N`.
pub trait Profile {
    fn eval(&self, y: &[f64]) -> Result<f64>;
    fn kind(&self) -> ProfileKind;
}

pub struct UpperProfile<'a>(pub &'a UpperBarrierSpec);
pub struct CappedProfile<'a>(pub &'a UpperBarrierSpec);
pub struct LowerProfile<'a>(pub &'a LowerBarrierSpec);
pub struct GridProfile<'a>(pub &'a Field);

impl Profile for UpperProfile<'_> {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        eval_upper(self.0, y)
    }
    fn kind(&self) -> ProfileKind {
        ProfileKind::UpperBarrier
    }
}

impl Profile for CappedProfile<'_> {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(eval_capped(self.0, y))
    }
    fn kind(&self) -> ProfileKind {
        ProfileKind::CappedUpperBarrier
    }
}

impl Profile for LowerProfile<'_> {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(eval_lower(self.0, y))
    }
    fn kind(&self) -> ProfileKind {
        ProfileKind::LowerBarrier
    }
}

impl Profile for Barenblatt {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(Barenblatt::eval(self, y))
    }
    fn kind(&self) -> ProfileKind {
        ProfileKind::Barenblatt
    }
}

impl Profile for GridProfile<'_> {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(self.0.value_at(y))
    }
    fn kind(&self) -> ProfileKind {
        ProfileKind::Grid
    }
}

/// Stationary scaling `T_k F(y) = k F(k^{gamma_i} y_i)` with `gamma_i = (1-m_i)/2`;
/// maps (super/sub-)solutions of the stationary equation to (super/sub-)solutions
/// and multiplies mass by `k^beta`.
pub struct StationaryScaled<P> {
    pub inner: P,
    pub k: f64,
    pub stretch: Vec<f64>,
}

impl<P: Profile> StationaryScaled<P> {
    pub fn new(inner: P, k: f64, e: &ExponentSet) -> Self {
        let stretch = e.gamma_stat.iter().map(|g| k.powf(*g)).collect();
        Self { inner, k, stretch }
    }
}

impl<P: Profile> Profile for StationaryScaled<P> {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        let z: Vec<f64> = y.iter().zip(&self.stretch).map(|(a, b)| a * b).collect();
        Ok(self.k * self.inner.eval(&z)?)
    }
    fn kind(&self) -> ProfileKind {
        ProfileKind::Scaled
    }
}

/// Finite-difference step for [`stationary_residual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdStep {
    Absolute(f64),
    /// `h_i = h max(|y_i|, 1)`.
    Relative(f64),
}

impl FdStep {
    fn for_axis(self, yi: f64) -> f64 {
        match self {
            FdStep::Absolute(h) => h,
            FdStep::Relative(h) => h * yi.abs().max(1.0),
        }
    }

    pub fn size(self) -> f64 {
        match self {
            FdStep::Absolute(h) | FdStep::Relative(h) => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub value: f64,
    /// Largest magnitude among the individual diffusion and drift terms.
    pub scale: f64,
}

impl Residual {
    /// `max(10 h^2, 1e-8)` relative to the term scale.
    pub fn tolerance(&self, h: f64) -> f64 {
        (10.0 * h * h).max(1e-8) * self.scale
    }
}

/// Central-difference approximation of `I[f](y)`.
pub fn stationary_residual(f: &dyn Profile, e: &ExponentSet, y: &[f64], step: FdStep) -> Result<Residual> {
    if y.len() != e.n {
        return Err(Error::DimensionMismatch { expected: e.n, got: y.len() });
    }
    let f0 = f.eval(y)?;
    let mut p = y.to_vec();
    let mut value = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..e.n {
        let h = step.for_axis(y[i]);
        p[i] = y[i] + h;
        let fp = f.eval(&p)?;
        p[i] = y[i] - h;
        let fm = f.eval(&p)?;
        p[i] = y[i];
        let mi = e.m[i];
        let diff = (fp.powf(mi) - 2.0 * f0.powf(mi) + fm.powf(mi)) / (h * h);
        let coef = e.alpha * e.sigma[i];
        let drift = coef * ((y[i] + h) * fp - (y[i] - h) * fm) / (2.0 * h);
        let flux_part = coef * y[i] * (fp - fm) / (2.0 * h);
        value += diff + drift;
        scale = scale.max(diff.abs()).max(drift.abs()).max((coef * f0).abs()).max(flux_part.abs());
    }
    Ok(Residual { value, scale })
}

// ---------------------------------------------------------------------------
// Sampling for the sign checks

/// Points with `r <= sum |y_i|^{theta_i} <= r * 10^decades`, log-uniform in the
/// anisotropic radius and uniform in direction on the anisotropic sphere.
pub fn sample_outer_domain(s: &UpperBarrierSpec, count: usize, decades: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = s.theta.len();
    (0..count)
        .map(|_| {
            let rho = s.ln_r + rng.gen::<f64>() * decades * std::f64::consts::LN_10;
            // random point of the positive simplex, mapped to the theta-sphere
            let mut w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            w.iter()
                .zip(&s.theta)
                .map(|(wi, t)| {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    sign * ((wi.ln() + rho) / t).exp()
                })
                .collect()
        })
        .collect()
}

/// Uniform points of `[-half_width, half_width]^N` with `|y| >= min_norm`.
pub fn sample_box(dim: usize, half_width: f64, min_norm: f64, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-half_width..half_width)).collect();
        if y.iter().map(|v| v * v).sum::<f64>().sqrt() >= min_norm {
            out.push(y);
        }
    }
    out
}
