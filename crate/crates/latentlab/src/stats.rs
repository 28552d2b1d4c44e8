//! Gaussian tail helpers for the sampling-bias machinery.
//!
//! Rejection factors need the probabilities of label cells under the latent
//! prior. For unit oracle directions those reduce to bivariate normal orthant
//! probabilities, computed here by quadrature over the conditional CDF.

/// Standard normal CDF, via the Zelen-Severo polynomial approximation.
/// Absolute error below 8e-8, which is orders of magnitude tighter than any
/// tolerance built on top of it.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    let t = 1.0 / (1.0 + 0.2316419 * x);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (1.0 - pdf * poly).clamp(0.0, 1.0)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(U > a, V > b) for standard bivariate normal (U, V) with correlation rho.
///
/// Integrates phi(u) * P(V > b | U = u) over u > a by Simpson's rule. The
/// integrand is smooth and compactly supported in practice, so a fixed panel
/// count reaches far beyond the accuracy the bias targets need.
pub fn bivariate_upper_orthant(a: f64, b: f64, rho: f64) -> f64 {
    const LIMIT: f64 = 9.0;
    if rho >= 1.0 - 1e-12 {
        // V = U: a single tail.
        return 1.0 - normal_cdf(a.max(b));
    }
    if rho <= -1.0 + 1e-12 {
        // V = -U: an interval, possibly empty.
        return (normal_cdf(-b) - normal_cdf(a)).max(0.0);
    }
    let lo = a.max(-LIMIT);
    let hi = LIMIT;
    if lo >= hi {
        return 0.0;
    }
    let s = (1.0 - rho * rho).sqrt();
    let f = |u: f64| normal_pdf(u) * (1.0 - normal_cdf((b - rho * u) / s));
    let panels = 4000;
    let h = (hi - lo) / panels as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..panels {
        let u = lo + h * i as f64;
        sum += f(u) * if i % 2 == 0 { 2.0 } else { 4.0 };
    }
    (sum * h / 3.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_matches_tabulated_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.15865525).abs() < 1e-6);
        assert!(normal_cdf(9.0) > 1.0 - 1e-12);
    }

    #[test]
    fn independent_orthant_is_product_of_tails() {
        let p = bivariate_upper_orthant(0.0, 0.0, 0.0);
        assert!((p - 0.25).abs() < 1e-9, "got {p}");
        let p = bivariate_upper_orthant(1.0, -0.5, 0.0);
        let expected = (1.0 - normal_cdf(1.0)) * (1.0 - normal_cdf(-0.5));
        assert!((p - expected).abs() < 1e-7, "got {p}, expected {expected}");
    }

    #[test]
    fn correlated_centered_orthant_matches_arcsine_formula() {
        // P(U>0, V>0) = 1/4 + asin(rho) / (2 pi).
        for rho in [-0.9f64, -0.5, 0.3, 0.7071067811865476, 0.95] {
            let expected = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
            let got = bivariate_upper_orthant(0.0, 0.0, rho);
            assert!(
                (got - expected).abs() < 1e-6,
                "rho={rho}: got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn degenerate_correlations_reduce_to_single_tails() {
        assert!((bivariate_upper_orthant(-0.3, 0.4, 1.0) - (1.0 - normal_cdf(0.4))).abs() < 1e-12);
        let interval = bivariate_upper_orthant(-0.5, -0.5, -1.0);
        let expected = normal_cdf(0.5) - normal_cdf(-0.5);
        assert!((interval - expected).abs() < 1e-12);
        // U > 1 and U < 0 cannot hold together.
        assert_eq!(bivariate_upper_orthant(1.0, 0.0, -1.0), 0.0);
    }
}
