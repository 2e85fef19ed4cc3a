//! The p-value against a quadrature of the Student-t density.
//!
//! Substituting `t = sqrt(df) * tan(theta)` turns the t density into a
//! multiple of `cos(theta)^(df - 1)`, and `|t|` for a coefficient `r` maps to
//! `theta = asin(|r|)`. The two-sided tail is then a ratio of two smooth
//! integrals, evaluated here with composite Simpson's rule.

use ted_core::analytics::pcc_p_value;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Integral over [a, b] split at geometrically growing offsets from `a`, so
/// a density that decays quickly away from `a` is still resolved.
fn graded(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64, first: f64) -> f64 {
    let mut total = 0.0;
    let (mut lo, mut width) = (a, first);
    while lo < b {
        let hi = (lo + width).min(b);
        total += simpson(f, lo, hi, 400);
        lo = hi;
        width *= 2.0;
    }
    total
}

fn quadrature_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let density = |theta: f64| theta.cos().max(0.0).powf(df - 1.0);
    let theta0 = r.abs().asin();
    let half_pi = std::f64::consts::FRAC_PI_2;
    // decay length of the density near zero and near theta0
    let near_zero = 0.05 / df.sqrt();
    let near_theta0 = near_zero.min(0.05 / (df * theta0.tan()));
    graded(density, theta0, half_pi, near_theta0) / graded(density, 0.0, half_pi, near_zero)
}

#[test]
fn matches_quadrature_across_sizes() {
    let mut worst: f64 = 0.0;
    for n in [3, 4, 5, 8, 12, 30, 100, 300, 1000, 3000, 10_000] {
        for r in [0.001, 0.01, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 0.9, 0.99] {
            let want = quadrature_p(r, n);
            if want < 1e-250 {
                continue;
            }
            let got = pcc_p_value(r, n).unwrap();
            let rel = (got - want).abs() / want;
            worst = worst.max(rel);
            assert!(rel < 1e-6, "r = {r}, n = {n}: {got:e} vs quadrature {want:e}");
            assert_eq!(pcc_p_value(-r, n).unwrap(), got);
        }
    }
    assert!(worst.is_finite());
}

#[test]
fn domain_edges() {
    assert_eq!(pcc_p_value(1.0, 10).unwrap(), 0.0);
    assert_eq!(pcc_p_value(-1.0, 10).unwrap(), 0.0);
    assert_eq!(pcc_p_value(0.0, 3).unwrap(), 1.0);
    assert!(pcc_p_value(0.5, 2).is_err());
    assert!(pcc_p_value(1.5, 10).is_err());
    assert!(pcc_p_value(f64::NAN, 10).is_err());
}
