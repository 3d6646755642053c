//! Brute-force reference implementations used as oracles. Everything here is
//! written from the textbook definitions with plain loops and direct DFTs,
//! sharing no code with the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// |a - b| <= tol * max(1, |a|, |b|).
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / 1f64.max(x.abs()).max(y.abs()))
        .fold(0.0, f64::max)
}

/// Length-500 test signals: sums of random sines, a random walk and noise.
pub fn random_signals(count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let f1: f64 = rng.random_range(0.2..20.0);
            let f2: f64 = rng.random_range(0.2..45.0);
            let a2: f64 = rng.random_range(0.0..2.0);
            let offset: f64 = rng.random_range(-5.0..5.0);
            let mut walk = 0.0;
            (0..500)
                .map(|t| {
                    let t = t as f64 / 100.0;
                    walk += rng.random_range(-0.1..0.1);
                    offset
                        + (2.0 * PI * f1 * t).sin()
                        + a2 * (2.0 * PI * f2 * t + 1.0).cos()
                        + walk
                        + rng.random_range(-0.3..0.3)
                })
                .collect()
        })
        .collect()
}

pub fn gradient1(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    out[0] = x[1] - x[0];
    out[n - 1] = x[n - 1] - x[n - 2];
    for i in 1..n - 1 {
        out[i] = (x[i + 1] - x[i - 1]) / 2.0;
    }
    out
}

pub fn gradient2(x: &[f64]) -> Vec<f64> {
    gradient1(&gradient1(x))
}

pub fn integral(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 1..x.len() {
        out[i] = out[i - 1] + (x[i - 1] + x[i]) / 2.0;
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// r_k = sum_t (x_t - mu)(x_{t+k} - mu) / sum_t (x_t - mu)^2, k = 1..=lags.
pub fn acf(x: &[f64], lags: usize) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    let denom: f64 = x.iter().map(|v| (v - mu) * (v - mu)).sum();
    (1..=lags)
        .map(|k| {
            let mut s = 0.0;
            for t in 0..n - k {
                s += (x[t] - mu) * (x[t + k] - mu);
            }
            s / denom
        })
        .collect()
}

/// Vasicek m-spacing entropy with m = floor(sqrt(n)).
pub fn vasicek(x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut m = 0;
    while (m + 1) * (m + 1) <= n {
        m += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        let hi = if i + m > n - 1 { n - 1 } else { i + m };
        let lo = i.saturating_sub(m);
        total += (n as f64 / (2.0 * m as f64) * (s[hi] - s[lo])).ln();
    }
    total / n as f64
}

pub fn shannon_bits(w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mut h = 0.0;
    for &v in w {
        if v > 0.0 {
            let p = v / total;
            h -= p * p.log2();
        }
    }
    h
}

/// |DFT_k|^2 of the mean-removed input, k = 0..=n/2, interior bins doubled.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                re += (v - mu) * ang.cos();
                im += (v - mu) * ang.sin();
            }
            let p = re * re + im * im;
            if k == 0 || 2 * k == n {
                p
            } else {
                2.0 * p
            }
        })
        .collect()
}

/// Welch density: periodic Hann, 256-sample segments, 50 % overlap,
/// per-segment mean removal, one-sided. Returns (freqs, psd).
pub fn welch(x: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
    let nseg = 256;
    let w: Vec<f64> = (0..nseg)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / nseg as f64).cos()))
        .collect();
    let u: f64 = w.iter().map(|v| v * v).sum();
    let mut psd = vec![0.0; nseg / 2 + 1];
    let mut count = 0;
    let mut start = 0;
    while start + nseg <= x.len() {
        let seg = &x[start..start + nseg];
        let mu = mean(seg);
        for (k, p) in psd.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for t in 0..nseg {
                let ang = -2.0 * PI * (k * t) as f64 / nseg as f64;
                let v = (seg[t] - mu) * w[t];
                re += v * ang.cos();
                im += v * ang.sin();
            }
            *p += re * re + im * im;
        }
        count += 1;
        start += nseg / 2;
    }
    for (k, p) in psd.iter_mut().enumerate() {
        *p /= fs * u * count as f64;
        if k != 0 && k != nseg / 2 {
            *p *= 2.0;
        }
    }
    (
        (0..=nseg / 2)
            .map(|k| k as f64 * fs / nseg as f64)
            .collect(),
        psd,
    )
}

pub fn znorm(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let sd = var(x).sqrt();
    x.iter().map(|v| (v - m) / sd).collect()
}

/// Hjorth mobility and complexity from first differences.
pub fn hjorth(x: &[f64]) -> (f64, f64) {
    let dx: Vec<f64> = (1..x.len()).map(|i| x[i] - x[i - 1]).collect();
    let ddx: Vec<f64> = (1..dx.len()).map(|i| dx[i] - dx[i - 1]).collect();
    let mob = (var(&dx) / var(x)).sqrt();
    let mob_d = (var(&ddx) / var(&dx)).sqrt();
    (mob, mob_d / mob)
}

pub fn katz(x: &[f64]) -> f64 {
    let mut length = 0.0;
    for i in 1..x.len() {
        length += (x[i] - x[i - 1]).abs();
    }
    let mut extent: f64 = 0.0;
    for v in x {
        extent = extent.max((v - x[0]).abs());
    }
    let n = (x.len() - 1) as f64;
    n.log10() / (n.log10() + (extent / length).log10())
}

/// Random proper rotation from a normalised Gaussian quaternion.
pub fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    use rand_distr::{Distribution, StandardNormal};
    let q: Vec<f64> = (0..4).map(|_| StandardNormal.sample(rng)).collect();
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

pub fn rotate(axes: &[Vec<f64>; 3], r: &[[f64; 3]; 3]) -> [Vec<f64>; 3] {
    std::array::from_fn(|i| {
        (0..axes[0].len())
            .map(|t| r[i][0] * axes[0][t] + r[i][1] * axes[1][t] + r[i][2] * axes[2][t])
            .collect()
    })
}
