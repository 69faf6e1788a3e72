//! One-dimensional quadrature helpers shared by the kernel, anisotropy and
//! energy modules.

use std::num::{NonZeroU32, NonZeroUsize};

use gauss_quad::legendre::GaussLegendre;
use gauss_quad::simpson::Simpson;

/// Gauss-Legendre rule of the given order on `[-1, 1]`.
pub fn legendre(order: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap())
}

/// Composite Gauss-Legendre over `panels` equal subintervals of `[a, b]`.
pub fn composite(rule: &GaussLegendre, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * w;
        total += rule.integrate(lo, lo + w, &mut f);
    }
    total
}

/// Composite Simpson rule with `intervals` subintervals.
pub fn simpson(a: f64, b: f64, intervals: u32, f: impl FnMut(f64) -> f64) -> f64 {
    Simpson::new(NonZeroU32::new(intervals.max(1)).unwrap()).integrate(a, b, f)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_rules_integrate_smooth_functions() {
        let rule = legendre(8);
        let v = composite(&rule, 0.0, std::f64::consts::PI, 4, f64::sin);
        assert!((v - 2.0).abs() < 1e-13);
        let s = adaptive_simpson(&|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-12);
        assert!((s - std::f64::consts::PI.sqrt()).abs() < 1e-10);
        let c = simpson(0.0, 1.0, 64, |x| x.powi(3));
        assert!((c - 0.25).abs() < 1e-14);
    }
}
