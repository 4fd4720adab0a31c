//! Self-similar exponents of the anisotropic fast diffusion equation
//! `u_t = sum_i (u^{m_i})_{x_i x_i}` and the scaling groups acting on it.
//!
//! A self-similar solution has the form `t^{-alpha} F(x_i t^{-a_i})` with
//! `a_i = alpha * sigma_i`. Requiring time to drop out of the equation and
//! mass to be conserved fixes every exponent in terms of the `m_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

const IDENTITY_TOL: f64 = 1e-12;

/// Dimension and per-axis diffusion exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub m: Vec<f64>,
    /// Permit `m_i = 1` (partial linear diffusion).
    pub allow_linear: bool,
}

impl ModelParams {
    pub fn new(n: usize, m: Vec<f64>) -> Self {
        Self { n, m, allow_linear: false }
    }

    pub fn with_linear(n: usize, m: Vec<f64>) -> Self {
        Self { n, m, allow_linear: true }
    }

    pub fn isotropic(n: usize, m: f64) -> Self {
        Self::new(n, vec![m; n])
    }

    pub fn mbar(&self) -> f64 {
        self.m.iter().sum::<f64>() / self.m.len() as f64
    }

    pub fn mc(&self) -> f64 {
        critical_exponent(self.n)
    }
}

pub fn critical_exponent(n: usize) -> f64 {
    1.0 - 2.0 / n as f64
}

/// Which hypothesis on the exponents failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// `m_i <= 1` for every axis.
    AtMostLinear,
    /// Not every axis may be linear.
    NotAllLinear,
    /// `m_i < 1` strictly unless linear axes are allowed.
    StrictlyFast,
    /// `mbar > m_c = 1 - 2/N`.
    Supercritical,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::AtMostLinear => "H1: 0 < m_i <= 1",
            Hypothesis::NotAllLinear => "not all m_i equal to 1",
            Hypothesis::StrictlyFast => "H1 (strict): m_i < 1 when linear axes are not allowed",
            Hypothesis::Supercritical => "H2: mbar > m_c = 1 - 2/N",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mbar: f64,
    pub mc: f64,
    pub violated: Option<Hypothesis>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violated.is_none()
    }
}

pub fn validate_params(p: &ModelParams) -> Result<ValidationReport> {
    if p.n < 2 {
        return Err(Error::UnsupportedDimension(p.n));
    }
    if p.m.len() != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: p.m.len() });
    }
    for (index, &value) in p.m.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveExponent { index, value });
        }
    }
    let mbar = p.mbar();
    let mc = p.mc();
    let violated = if p.m.iter().any(|&mi| mi > 1.0) {
        Some(Hypothesis::AtMostLinear)
    } else if p.m.iter().all(|&mi| mi == 1.0) {
        Some(Hypothesis::NotAllLinear)
    } else if !p.allow_linear && p.m.iter().any(|&mi| mi == 1.0) {
        Some(Hypothesis::StrictlyFast)
    } else if !(mbar > mc) {
        Some(Hypothesis::Supercritical)
    } else {
        None
    };
    Ok(ValidationReport { mbar, mc, violated })
}

/// Every exponent derived from a valid [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub n: usize,
    pub m: Vec<f64>,
    pub alpha: f64,
    pub sigma: Vec<f64>,
    pub a: Vec<f64>,
    pub mbar: f64,
    pub mc: f64,
    /// Stationary scaling exponents `(1 - m_i)/2`.
    pub gamma_stat: Vec<f64>,
    /// Mass exponent of the stationary scaling, `1 - sum gamma_i`.
    pub beta: f64,
}

fn family_alpha(n: usize, mbar: f64, c: f64) -> f64 {
    let nf = n as f64;
    nf / (nf * (mbar - 1.0) + 2.0 * c)
}

fn family_sigma(n: usize, mbar: f64, mi: f64, c: f64) -> f64 {
    c / n as f64 + (mbar - mi) / 2.0
}

pub fn compute_exponents(p: &ModelParams) -> Result<ExponentSet> {
    let report = validate_params(p)?;
    if let Some(h) = report.violated {
        return Err(Error::Hypothesis(h.to_string()));
    }
    let n = p.n;
    let mbar = report.mbar;
    let alpha = family_alpha(n, mbar, 1.0);
    let sigma: Vec<f64> = p.m.iter().map(|&mi| family_sigma(n, mbar, mi, 1.0)).collect();
    let a: Vec<f64> = sigma.iter().map(|s| alpha * s).collect();
    let gamma_stat: Vec<f64> = p.m.iter().map(|mi| (1.0 - mi) / 2.0).collect();
    let beta = 1.0 - gamma_stat.iter().sum::<f64>();
    let e = ExponentSet {
        n,
        m: p.m.clone(),
        alpha,
        sigma,
        a,
        mbar,
        mc: report.mc,
        gamma_stat,
        beta,
    };
    e.assert_invariants();
    Ok(e)
}

impl ExponentSet {
    pub fn from_params(n: usize, m: &[f64]) -> Result<Self> {
        compute_exponents(&ModelParams::new(n, m.to_vec()))
    }

    /// Largest deviation from `sum sigma_i = 1` and `alpha(m_i - 1) + 2 a_i = 1`.
    pub fn identity_error(&self) -> f64 {
        let sum_err = (self.sigma.iter().sum::<f64>() - 1.0).abs();
        self.m
            .iter()
            .zip(&self.a)
            .map(|(mi, ai)| (self.alpha * (mi - 1.0) + 2.0 * ai - 1.0).abs())
            .fold(sum_err, f64::max)
    }

    fn assert_invariants(&self) {
        let err = self.identity_error();
        assert!(err <= IDENTITY_TOL, "exponent identities violated by {err:e}");
        assert!(self.alpha > 0.0, "alpha must be positive");
        assert!(self.sigma.iter().all(|&s| s > 0.0), "sigma_i must be positive");
        assert!(self.beta > 0.0 && self.beta < 1.0, "beta must lie in (0,1)");
    }

    pub fn is_linear_axis(&self, i: usize) -> bool {
        self.m[i] == 1.0
    }
}

/// The one-parameter family of scalings `u -> k^{alpha(c)} u(k^{alpha(c) sigma_i(c)} x, k t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFamily {
    pub c: f64,
    pub alpha_c: f64,
    pub sigma_c: Vec<f64>,
    /// Mass is multiplied by `k^{mass_factor_exponent}`.
    pub mass_factor_exponent: f64,
}

impl ScalingFamily {
    pub fn a_c(&self) -> Vec<f64> {
        self.sigma_c.iter().map(|s| self.alpha_c * s).collect()
    }
}

pub fn scaling_family(e: &ExponentSet, c: f64) -> Result<ScalingFamily> {
    let denom = e.n as f64 * (e.mbar - 1.0) + 2.0 * c;
    if !(c > 0.0) || !(denom > 0.0) {
        return Err(Error::OutsideFamily(c));
    }
    let alpha_c = family_alpha(e.n, e.mbar, c);
    let sigma_c = e.m.iter().map(|&mi| family_sigma(e.n, e.mbar, mi, c)).collect();
    Ok(ScalingFamily { c, alpha_c, sigma_c, mass_factor_exponent: alpha_c * (1.0 - c) })
}

/// `T_k u (x) = k^alpha u(k^{a_i} x)`, resampled on the grid of `u`.
///
/// The result represents the solution at time `t / k`. Points mapped outside
/// the source box read zero.
pub fn transform_scaling(u: &Field, k: f64, e: &ExponentSet) -> Result<Field> {
    transform_with(u, k, e.alpha, &e.a)
}

/// Same as [`transform_scaling`] for a member of the `c`-family.
pub fn transform_scaling_family(u: &Field, k: f64, fam: &ScalingFamily) -> Result<Field> {
    transform_with(u, k, fam.alpha_c, &fam.a_c())
}

fn transform_with(u: &Field, k: f64, alpha: f64, a: &[f64]) -> Result<Field> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("scaling factor k = {k} must be positive")));
    }
    if a.len() != u.grid.dim() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: u.grid.dim() });
    }
    if k == 1.0 {
        return Ok(u.clone());
    }
    let amp = k.powf(alpha);
    let stretch: Vec<f64> = a.iter().map(|ai| k.powf(*ai)).collect();
    let mut out = u.resample(&u.grid, |x| {
        for (xi, s) in x.iter_mut().zip(&stretch) {
            *xi *= s;
        }
    });
    for v in out.values.iter_mut() {
        *v *= amp;
    }
    out.time = u.time / k;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validation_examples() {
        let r = validate_params(&ModelParams::new(2, vec![0.6, 0.8])).unwrap();
        assert!(r.passed());
        assert_relative_eq!(r.mbar, 0.7, epsilon = 1e-15);
        assert_eq!(r.mc, 0.0);

        let r = validate_params(&ModelParams::new(3, vec![0.2; 3])).unwrap();
        assert_eq!(r.violated, Some(Hypothesis::Supercritical));

        let r = validate_params(&ModelParams::new(2, vec![1.0, 1.0])).unwrap();
        assert_eq!(r.violated, Some(Hypothesis::NotAllLinear));
        let r = validate_params(&ModelParams::with_linear(2, vec![1.0, 1.0])).unwrap();
        assert_eq!(r.violated, Some(Hypothesis::NotAllLinear));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            validate_params(&ModelParams::new(2, vec![0.5])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            validate_params(&ModelParams::new(2, vec![0.5, 0.0])),
            Err(Error::NonPositiveExponent { index: 1, .. })
        ));
        assert!(matches!(
            validate_params(&ModelParams::new(2, vec![0.5, 1.2])).unwrap().violated,
            Some(Hypothesis::AtMostLinear)
        ));
        assert_eq!(
            validate_params(&ModelParams::new(2, vec![1.0, 0.8])).unwrap().violated,
            Some(Hypothesis::StrictlyFast)
        );
        assert!(validate_params(&ModelParams::with_linear(2, vec![1.0, 0.8])).unwrap().passed());
    }

    #[test]
    fn isotropic_half() {
        let e = ExponentSet::from_params(2, &[0.5, 0.5]).unwrap();
        assert_relative_eq!(e.alpha, 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.sigma[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.a[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn anisotropic_reference_values() {
        let e = ExponentSet::from_params(2, &[0.6, 0.8]).unwrap();
        assert_relative_eq!(e.alpha, 10.0 / 7.0, epsilon = 1e-14);
        assert_relative_eq!(e.sigma[0], 0.55, epsilon = 1e-14);
        assert_relative_eq!(e.sigma[1], 0.45, epsilon = 1e-14);
        assert_relative_eq!(e.gamma_stat[0], 0.2, epsilon = 1e-15);
        assert_relative_eq!(e.gamma_stat[1], 0.1, epsilon = 1e-15);
        assert_relative_eq!(e.beta, 0.7, epsilon = 1e-14);
        assert!(e.identity_error() <= 1e-12);
    }

    #[test]
    fn family_examples() {
        let e = ExponentSet::from_params(2, &[0.6, 0.8]).unwrap();
        let f1 = scaling_family(&e, 1.0).unwrap();
        assert_eq!(f1.mass_factor_exponent, 0.0);
        assert_eq!(f1.alpha_c.to_bits(), e.alpha.to_bits());
        for (s, t) in f1.sigma_c.iter().zip(&e.sigma) {
            assert_eq!(s.to_bits(), t.to_bits());
        }
        let f2 = scaling_family(&e, 2.0).unwrap();
        assert_relative_eq!(f2.alpha_c, 10.0 / 17.0, epsilon = 1e-14);
        assert_relative_eq!(f2.sigma_c.iter().sum::<f64>(), 2.0, epsilon = 1e-14);

        let iso = ExponentSet::from_params(2, &[0.5, 0.5]).unwrap();
        assert_eq!(scaling_family(&iso, 0.5), Err(Error::OutsideFamily(0.5)));
        assert!(scaling_family(&iso, -1.0).is_err());
    }

    #[test]
    fn linear_axis_gets_heat_scaling() {
        let e = compute_exponents(&ModelParams::with_linear(2, vec![1.0, 0.8])).unwrap();
        assert_relative_eq!(e.a[0], 0.5, epsilon = 1e-14);
    }
}
