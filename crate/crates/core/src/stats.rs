//! Population moments with fixed degenerate values (never NaN).

/// Second central moment below this counts as zero spread.
pub(crate) const DEGENERATE_VAR: f64 = 1e-24;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

fn central_moment(x: &[f64], mu: f64, p: i32) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| (v - mu).powi(p)).sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    central_moment(x, mean(x), 2)
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

/// Moment skewness `m3 / m2^1.5`; 0 when `m2` is degenerate.
pub fn skew(x: &[f64]) -> f64 {
    let mu = mean(x);
    let m2 = central_moment(x, mu, 2);
    if m2 < DEGENERATE_VAR {
        return 0.0;
    }
    central_moment(x, mu, 3) / m2.powf(1.5)
}

/// Excess kurtosis `m4 / m2² - 3`; 0 when `m2` is degenerate.
pub fn kurtosis(x: &[f64]) -> f64 {
    let mu = mean(x);
    let m2 = central_moment(x, mu, 2);
    if m2 < DEGENERATE_VAR {
        return 0.0;
    }
    central_moment(x, mu, 4) / (m2 * m2) - 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_sample() {
        let x = [1.0, 2.0, 3.0, 10.0];
        assert_eq!(mean(&x), 4.0);
        assert_eq!(variance(&x), (9.0 + 4.0 + 1.0 + 36.0) / 4.0);
        let m2: f64 = 12.5;
        let m3 = (-27.0 - 8.0 - 1.0 + 216.0) / 4.0;
        assert!((skew(&x) - m3 / m2.powf(1.5)).abs() < 1e-12);
        let m4 = (81.0 + 16.0 + 1.0 + 1296.0) / 4.0;
        assert!((kurtosis(&x) - (m4 / (m2 * m2) - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_moments_are_zero() {
        assert_eq!(skew(&[2.0; 5]), 0.0);
        assert_eq!(kurtosis(&[2.0; 5]), 0.0);
        assert_eq!(mean(&[]), 0.0);
        assert_eq!(skew(&[]), 0.0);
    }

    #[test]
    fn skew_is_odd_kurtosis_even() {
        let x = [0.3, -1.2, 4.0, 2.2, 0.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((skew(&x) + skew(&neg)).abs() < 1e-12);
        assert!((kurtosis(&x) - kurtosis(&neg)).abs() < 1e-12);
    }
}
