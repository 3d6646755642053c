//! Autocorrelation and time-domain features.

use rustfft::num_complex::Complex;

use super::spectral::{fft_plan, periodogram, shannon_bits};
use crate::stats::{self, DEGENERATE_VAR};

/// Default number of ACF lags (half a 500-sample window).
pub const ACF_MAX_LAG: usize = 250;

const SPACING_FLOOR: f64 = 1e-12;

/// Normalised autocorrelation at lags `1..=max_lag` (clamped to `n - 1`).
/// A constant signal gives all zeros.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let lags = max_lag.min(n.saturating_sub(1));
    if n == 0 || stats::variance(x) < DEGENERATE_VAR {
        return vec![0.0; lags];
    }
    let mu = stats::mean(x);
    // Zero padding to >= 2n - 1 turns the circular correlation into a linear one.
    let size = (2 * n - 1).next_power_of_two();
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for (b, v) in buf.iter_mut().zip(x) {
        b.re = v - mu;
    }
    fft_plan(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    // Inverse via the forward transform of the (real, even) power spectrum.
    fft_plan(size).process(&mut buf);
    let r0 = buf[0].re;
    (1..=lags).map(|k| buf[k].re / r0).collect()
}

/// Vasicek spacing estimate of differential entropy (nats) with window
/// `m = floor(sqrt(n))`, order statistics clamped at both ends and spacings
/// floored at 1e-12. Constant input gives 0.
pub fn differential_entropy(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[n - 1] - sorted[0] == 0.0 {
        return 0.0;
    }
    let m = (n as f64).sqrt().floor() as usize;
    let c = n as f64 / (2 * m) as f64;
    let total: f64 = (0..n)
        .map(|i| {
            let hi = sorted[(i + m).min(n - 1)];
            let lo = sorted[i.saturating_sub(m)];
            (c * (hi - lo).max(SPACING_FLOOR)).ln()
        })
        .sum();
    total / n as f64
}

/// Fraction of consecutive pairs whose signs strictly differ.
fn sign_change_rate(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let changes = x.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    changes as f64 / (x.len() - 1) as f64
}

/// Fraction of interior points that are strict local extrema.
fn slope_sign_change_rate(x: &[f64]) -> f64 {
    if x.len() < 3 {
        return 0.0;
    }
    let changes = x
        .windows(3)
        .filter(|w| (w[1] - w[0]) * (w[1] - w[2]) > 0.0)
        .count();
    changes as f64 / (x.len() - 2) as f64
}

/// `fs / lag` of the largest ACF value after the first non-positive lag
/// (global maximum when the ACF never reaches zero). 0 for an all-zero ACF.
pub fn prominent_acf_frequency(r: &[f64], fs: f64) -> f64 {
    if r.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let start = r.iter().position(|&v| v <= 0.0).unwrap_or(0);
    let best = (start..r.len())
        .max_by(|&i, &j| r[i].total_cmp(&r[j]).then(j.cmp(&i)))
        .unwrap_or(0);
    fs / (best + 1) as f64
}

/// Eight ACF descriptors: mean |r|, skew, std, prominent frequency, zero
/// crossing rate, slope sign change rate, differential entropy and spectral
/// entropy of `r`.
pub fn acf_features(r: &[f64], fs: f64) -> [f64; 8] {
    let abs_mean = stats::mean(&r.iter().map(|v| v.abs()).collect::<Vec<_>>());
    [
        abs_mean,
        stats::skew(r),
        stats::std_dev(r),
        prominent_acf_frequency(r, fs),
        sign_change_rate(r),
        slope_sign_change_rate(r),
        differential_entropy(r),
        shannon_bits(&periodogram(r)),
    ]
}

fn first_difference(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn mobility(x: &[f64], dx: &[f64]) -> f64 {
    let vx = stats::variance(x);
    if vx < DEGENERATE_VAR {
        return 0.0;
    }
    (stats::variance(dx) / vx).sqrt()
}

/// Hjorth `(mobility, complexity)` using first differences.
pub fn hjorth(x: &[f64]) -> (f64, f64) {
    let dx = first_difference(x);
    let ddx = first_difference(&dx);
    let mob = mobility(x, &dx);
    if mob == 0.0 {
        return (0.0, 0.0);
    }
    (mob, mobility(&dx, &ddx) / mob)
}

/// Katz fractal dimension; 1 when the path length or the excursion is zero.
pub fn katz_fd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 1.0;
    }
    let length: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let extent = x.iter().map(|v| (v - x[0]).abs()).fold(0.0, f64::max);
    if length == 0.0 || extent == 0.0 {
        return 1.0;
    }
    let steps = ((x.len() - 1) as f64).log10();
    steps / (steps + (extent / length).log10())
}

/// Seven descriptors of the signal as-is: differential entropy, mean
/// crossing rate, skew, excess kurtosis, Hjorth mobility and complexity,
/// Katz fractal dimension.
pub fn time_features(x: &[f64]) -> [f64; 7] {
    let mu = stats::mean(x);
    let centred: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let (mob, comp) = hjorth(x);
    [
        differential_entropy(x),
        sign_change_rate(&centred),
        stats::skew(x),
        stats::kurtosis(x),
        mob,
        comp,
        katz_fd(x),
    ]
}
