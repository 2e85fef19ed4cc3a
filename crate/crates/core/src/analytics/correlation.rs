use statrs::function::beta::checked_beta_reg;

use super::AnalyticsError;

/// Sample Pearson correlation coefficient, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(AnalyticsError::TooFewPoints { n: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Pearson coefficient `r` over `n` pairs, from
/// Student's t with `n - 2` degrees of freedom.
///
/// With `t^2 = r^2 (n-2) / (1-r^2)`, the two-sided tail `P(|T| >= |t|)` is
/// the regularized incomplete beta `I_x(df/2, 1/2)` at `x = df / (df + t^2)`,
/// which simplifies to `x = 1 - r^2`.
pub fn pcc_p_value(r: f64, n: usize) -> Result<f64, AnalyticsError> {
    if n < 3 {
        return Err(AnalyticsError::DegreesOfFreedom { n });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(AnalyticsError::CoefficientRange { r });
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let df = (n - 2) as f64;
    let x = (1.0 - r) * (1.0 + r);
    let p = checked_beta_reg(df / 2.0, 0.5, x).map_err(|_| AnalyticsError::CoefficientRange { r })?;
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(AnalyticsError::UndefinedCorrelation)
        ));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(AnalyticsError::TooFewPoints { n: 2 })));
        assert!(matches!(pearson(&[1.0; 3], &[1.0; 4]), Err(AnalyticsError::LengthMismatch { .. })));
    }

    #[test]
    fn p_value_examples() {
        assert_eq!(pcc_p_value(0.0, 3).unwrap(), 1.0);
        assert_eq!(pcc_p_value(1.0, 10).unwrap(), 0.0);
        assert_eq!(pcc_p_value(-1.0, 10).unwrap(), 0.0);
        assert!(pcc_p_value(0.75, 100).unwrap() < 0.005);
        assert!(matches!(pcc_p_value(0.5, 2), Err(AnalyticsError::DegreesOfFreedom { n: 2 })));
    }

    #[test]
    fn p_value_df1_closed_form() {
        // one degree of freedom is Cauchy: p = 1 - (2/pi) atan(|t|)
        for r in [0.1f64, 0.5, 0.9, -0.3] {
            let t = r / (1.0f64 - r * r).sqrt();
            let expected = 1.0 - 2.0 / std::f64::consts::PI * t.abs().atan();
            assert!((pcc_p_value(r, 3).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn p_value_df2_closed_form() {
        // two degrees of freedom: p = 1 - |t| / sqrt(2 + t^2)
        for r in [0.05f64, 0.4, 0.8, -0.95] {
            let t = r * (2.0 / (1.0 - r * r)).sqrt();
            let expected = 1.0 - t.abs() / (2.0 + t * t).sqrt();
            assert!((pcc_p_value(r, 4).unwrap() - expected).abs() < 1e-12);
        }
    }
}
