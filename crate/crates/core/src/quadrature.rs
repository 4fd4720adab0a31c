//! Quadrature, root bracketing and least-squares helpers shared by the
//! barrier and analysis modules. Reductions run in a fixed order.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(m + c * x);
        }
        acc * c
    }

    /// Composite rule with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels).map(|p| self.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for integrals over unbounded ranges. Each half-line `[b, inf)`
/// is mapped by `z = b e^s` and integrated over `s in [0, log_span]`.
#[derive(Debug, Clone)]
pub struct HalfLineRule {
    pub rule: GaussLegendre,
    pub panels_per_unit: usize,
    pub log_span: f64,
}

impl HalfLineRule {
    pub fn new(order: usize, panels_per_unit: usize, log_span: f64) -> Self {
        Self { rule: GaussLegendre::new(order), panels_per_unit, log_span }
    }

    /// Twice as many panels.
    pub fn refined(&self) -> Self {
        Self {
            rule: self.rule.clone(),
            panels_per_unit: self.panels_per_unit * 2,
            log_span: self.log_span,
        }
    }

    fn panels(&self, width: f64) -> usize {
        ((width * self.panels_per_unit as f64).ceil() as usize).max(1)
    }

    /// `int_a^b f` for finite `0 <= a < b`.
    pub fn finite(&self, a: f64, b: f64, f: impl FnMut(f64) -> f64) -> f64 {
        self.rule.composite(a, b, self.panels(1.0), f)
    }

    /// `int_b^inf f` for `b > 0`.
    pub fn tail(&self, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let panels = self.panels(self.log_span);
        self.rule.composite(0.0, self.log_span, panels, |s| {
            let z = b * s.exp();
            z * f(z)
        })
    }

    /// `int_a^inf f` for `a >= 0`, splitting at `max(a, 1)`.
    pub fn from(&self, a: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if a > 0.0 {
            self.tail(a, f)
        } else {
            self.finite(0.0, 1.0, &mut f) + self.tail(1.0, f)
        }
    }
}

/// `int_{R^N} f` for `f` even in every coordinate.
pub fn even_whole_space(dim: usize, rule: &HalfLineRule, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut z = vec![0.0; dim];
    (1u64 << dim) as f64 * nested(dim, 0, rule, &mut z, None, 0.0, f)
}

/// `int_{sum |z_i|^{theta_i} >= 1} f` for `f` even in every coordinate.
pub fn even_outer_domain(theta: &[f64], rule: &HalfLineRule, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let dim = theta.len();
    let mut z = vec![0.0; dim];
    (1u64 << dim) as f64 * nested(dim, 0, rule, &mut z, Some(theta), 0.0, f)
}

// Integrates over axes `axis..dim` of the positive quadrant. `partial` is
// `sum_{j<axis} z_j^{theta_j}`; the outer-domain constraint turns into a lower
// limit on the last axis and a kink that the middle axes split at.
fn nested(
    dim: usize,
    axis: usize,
    rule: &HalfLineRule,
    z: &mut Vec<f64>,
    theta: Option<&[f64]>,
    partial: f64,
    f: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    let last = axis + 1 == dim;
    let kink = theta.and_then(|t| {
        if partial < 1.0 {
            Some((1.0 - partial).powf(1.0 / t[axis]))
        } else {
            None
        }
    });
    let eval = |x: f64, z: &mut Vec<f64>| -> f64 {
        z[axis] = x;
        if last {
            f(z)
        } else {
            let p = theta.map_or(0.0, |t| partial + x.powf(t[axis]));
            nested(dim, axis + 1, rule, z, theta, p, f)
        }
    };
    match kink {
        Some(k) if last => rule.tail(k, |x| eval(x, z)),
        Some(k) => {
            // the inner limit has a square-root kink at x = k; x = k (1 - w^2) smooths it
            let head = rule.finite(0.0, 1.0, |w| 2.0 * k * w * eval(k * (1.0 - w * w), z));
            head + rule.tail(k, |x| eval(x, z))
        }
        None => rule.from(0.0, |x| eval(x, z)),
    }
}

/// Surface area of the unit sphere in `R^N`, `N <= 3`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Root of a monotone function on `[lo, hi]` by bisection.
pub fn bisect(mut lo: f64, mut hi: f64, rel_tol: f64, mut f: impl FnMut(f64) -> f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= rel_tol * mid.abs() {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Ordinary least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit { slope, intercept, slope_stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let g = GaussLegendre::new(5);
        assert_relative_eq!(g.integrate(0.0, 2.0, |x| x.powi(9)), 102.4, epsilon = 1e-11);
        assert_relative_eq!(g.integrate(-1.0, 1.0, |_| 1.0), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn half_line_power_tail() {
        let r = HalfLineRule::new(8, 2, 60.0);
        assert_relative_eq!(r.tail(2.0, |x| x.powi(-3)), 0.125, epsilon = 1e-10);
        assert_relative_eq!(r.from(0.0, |x| (-x).exp()), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn gaussian_over_plane() {
        let r = HalfLineRule::new(8, 2, 5.0);
        let v = even_whole_space(2, &r, &|z| (-(z[0] * z[0] + z[1] * z[1])).exp());
        assert_relative_eq!(v, PI, epsilon = 1e-9);
    }

    #[test]
    fn outer_domain_of_unit_disc() {
        // int_{|z| >= 1} |z|^{-4} dz = 2 pi int_1^inf r^{-3} dr = pi
        let r = HalfLineRule::new(10, 4, 40.0);
        let v = even_outer_domain(&[2.0, 2.0], &r, &|z| (z[0] * z[0] + z[1] * z[1]).powi(-2));
        assert_relative_eq!(v, PI, epsilon = 1e-6);
    }

    #[test]
    fn bisection_and_fit() {
        let root = bisect(0.0, 4.0, 1e-12, |x| x * x - 2.0).unwrap();
        assert_relative_eq!(root, 2f64.sqrt(), epsilon = 1e-10);
        assert!(bisect(3.0, 4.0, 1e-12, |x| x * x - 2.0).is_none());
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let fit = fit_line(&x, &y).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-14);
        assert!(fit.slope_stderr < 1e-12);
    }
}
