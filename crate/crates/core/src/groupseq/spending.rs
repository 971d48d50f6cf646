//! Hwang–Shih–DeCani alpha-spending family.

/// Cumulative type-I error spent at information fraction `r`:
/// α(1 − e^{−βr})/(1 − e^{−β}), or αr when β = 0.
pub fn hsd_spending(r: f64, beta_e: f64, alpha: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    if beta_e == 0.0 {
        return alpha * r;
    }
    // expm1 keeps the ratio accurate as β → 0
    alpha * (-beta_e * r).exp_m1() / (-beta_e).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        for b in [-4.0, -1.0, 0.0, 1e-9, 2.0, 7.5] {
            assert_abs_diff_eq!(hsd_spending(1.0, b, 0.05), 0.05, epsilon = 1e-15);
            assert_eq!(hsd_spending(0.0, b, 0.05), 0.0);
        }
        // 30-digit reference for 0.05(1 − e^{−1})/(1 − e^{−2})
        assert_abs_diff_eq!(hsd_spending(0.5, 2.0, 0.05), 0.036552928931500246, epsilon = 1e-15);
        assert_eq!(hsd_spending(0.5, 0.0, 0.05), 0.025);
    }

    #[test]
    fn continuity_and_monotonicity() {
        for b in [-1e-6, 1e-6] {
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                assert!((hsd_spending(r, b, 0.05) - 0.05 * r).abs() < 1e-8);
            }
        }
        for b in [-5.0, -0.3, 0.0, 0.3, 5.0] {
            let mut last = -1.0;
            for i in 0..=1000 {
                let v = hsd_spending(i as f64 / 1000.0, b, 0.05);
                assert!(v > last);
                last = v;
            }
        }
    }
}
