//! Log-domain helpers. `f64::NEG_INFINITY` stands for a zero weight.

/// `ln(e^a + e^b)` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln Σ e^{x_i}`; the empty sum and all-`-∞` input give `-∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(1 - e^x)` for `x <= 0`, accurate at both ends.
#[inline]
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Normalizes log-weights in place and returns the log normalizer.
pub fn log_normalize(xs: &mut [f64]) -> f64 {
    let z = log_sum_exp(xs);
    if z.is_finite() {
        for x in xs.iter_mut() {
            *x -= z;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_large_arguments() {
        // ln(e^1234 + e^1232) = 1232 + ln(e^2 + 1)
        let expected = 1232.0 + (2f64.exp() + 1.0).ln();
        assert!((log_add_exp(1234.0, 1232.0) - expected).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn log_sum_exp_handles_neg_infinity() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[0.0, f64::NEG_INFINITY, 0.0]);
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log1m_exp_tiny_and_moderate() {
        let x = -1e-20;
        assert!((log1m_exp(x) - (1e-20f64).ln()).abs() < 1e-12);
        let x = -50.0;
        assert!((log1m_exp(x) + (-50f64).exp()).abs() < 1e-30);
        assert!((log1m_exp(-1.0) - (1.0 - (-1f64).exp()).ln()).abs() < 1e-15);
    }
}
