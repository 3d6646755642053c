//! Spectral representations (Welch PSD, DCT-II magnitudes) and the features
//! computed on them.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::stats::{self, DEGENERATE_VAR};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn fft_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

/// Welch segment length.
pub const WELCH_SEGMENT: usize = 256;

/// Band edges in Hz. Bands are `[lo, hi)` except the last, which is closed.
pub const BANDS: [(f64, f64); 17] = [
    (0.1, 0.5),
    (0.5, 1.0),
    (1.0, 1.5),
    (1.5, 2.0),
    (2.0, 2.5),
    (2.5, 3.0),
    (3.0, 4.0),
    (4.0, 5.0),
    (5.0, 6.0),
    (6.0, 8.0),
    (8.0, 12.0),
    (12.0, 18.0),
    (18.0, 24.0),
    (24.0, 28.0),
    (28.0, 32.0),
    (32.0, 40.0),
    (40.0, 50.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Psd,
    Dct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub amps: Vec<f64>,
    pub kind: SpectrumKind,
}

/// `(x - mean) / std` with population std; all zeros when std < 1e-12.
pub fn znorm(x: &[f64]) -> Vec<f64> {
    let mu = stats::mean(x);
    let sd = stats::std_dev(x);
    if sd < 1e-12 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mu) / sd).collect()
}

/// Welch PSD: periodic Hann window, 256-sample segments (or the whole
/// signal if shorter), 50 % overlap, per-segment mean removal, one-sided
/// density scaling. Frequencies are `k * fs / segment`.
pub fn welch_psd(x: &[f64], fs: f64) -> Spectrum {
    let nseg = WELCH_SEGMENT.min(x.len()).max(1);
    let step = (nseg / 2).max(1);
    let window: Vec<f64> = (0..nseg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / nseg as f64).cos())
        .collect();
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let n_bins = nseg / 2 + 1;
    let fft = fft_plan(nseg);

    let mut psd = vec![0.0; n_bins];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); nseg];
    let mut start = 0;
    while start + nseg <= x.len() {
        let seg = &x[start..start + nseg];
        let mu = stats::mean(seg);
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - mu) * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += step;
    }

    let scale = if count == 0 || win_energy == 0.0 {
        0.0
    } else {
        1.0 / (fs * win_energy * count as f64)
    };
    let last = if nseg.is_multiple_of(2) {
        n_bins - 1
    } else {
        n_bins
    };
    for (k, p) in psd.iter_mut().enumerate() {
        *p *= scale;
        if k > 0 && k < last {
            *p *= 2.0;
        }
    }
    Spectrum {
        freqs: (0..n_bins).map(|k| k as f64 * fs / nseg as f64).collect(),
        amps: psd,
        kind: SpectrumKind::Psd,
    }
}

/// Orthonormal DCT-II coefficients, computed from a length-2N FFT of the
/// even extension of `x`.
pub fn dct2_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let fft = fft_plan(2 * n);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .chain(x.iter().rev())
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fft.process(&mut buf);
    (0..n)
        .map(|k| {
            let tw = Complex::from_polar(1.0, -PI * k as f64 / (2 * n) as f64);
            let c = (tw * buf[k]).re;
            let f = if k == 0 {
                (1.0 / (4.0 * n as f64)).sqrt()
            } else {
                (1.0 / (2.0 * n as f64)).sqrt()
            };
            c * f
        })
        .collect()
}

/// `|DCT-II|` for `k = 1..N`, at frequencies `k * fs / (2N)`. The DC term is
/// dropped.
pub fn dct_magnitudes(x: &[f64], fs: f64) -> Spectrum {
    let n = x.len();
    let coeffs = dct2_ortho(x);
    Spectrum {
        freqs: (1..n).map(|k| k as f64 * fs / (2 * n) as f64).collect(),
        amps: coeffs.iter().skip(1).map(|c| c.abs()).collect(),
        kind: SpectrumKind::Dct,
    }
}

pub fn band_energies(s: &Spectrum) -> [f64; 17] {
    let mut out = [0.0; 17];
    let last = BANDS.len() - 1;
    for (&f, &a) in s.freqs.iter().zip(&s.amps) {
        if let Some(b) = BANDS
            .iter()
            .enumerate()
            .position(|(i, &(lo, hi))| f >= lo && (f < hi || (i == last && f <= hi)))
        {
            out[b] += a;
        }
    }
    out
}

/// Ten shape descriptors, in order: centroid, bandwidth, ratio of the two
/// largest amplitudes (2nd / 1st), amplitude max, std and skew, peak
/// frequency, then mean, std and skew of the five frequencies with the
/// largest amplitudes. All zeros for an all-zero spectrum.
pub fn spectral_shape(s: &Spectrum) -> [f64; 10] {
    let total: f64 = s.amps.iter().sum();
    if s.amps.is_empty() || total <= 0.0 {
        return [0.0; 10];
    }
    let centroid = s.freqs.iter().zip(&s.amps).map(|(f, a)| f * a).sum::<f64>() / total;
    let bandwidth = (s
        .freqs
        .iter()
        .zip(&s.amps)
        .map(|(f, a)| a * (f - centroid).powi(2))
        .sum::<f64>()
        / total)
        .sqrt();

    // Descending amplitude, ties to the lower index.
    let mut order: Vec<usize> = (0..s.amps.len()).collect();
    order.sort_by(|&i, &j| s.amps[j].total_cmp(&s.amps[i]).then(i.cmp(&j)));
    let top = s.amps[order[0]];
    let ratio = order.get(1).map_or(0.0, |&i| s.amps[i] / top);
    let top5: Vec<f64> = order.iter().take(5).map(|&i| s.freqs[i]).collect();

    [
        centroid,
        bandwidth,
        ratio,
        top,
        stats::std_dev(&s.amps),
        stats::skew(&s.amps),
        s.freqs[order[0]],
        stats::mean(&top5),
        stats::std_dev(&top5),
        stats::skew(&top5),
    ]
}

/// Shannon entropy (bits) of the amplitudes normalised to probabilities.
pub fn spectral_entropy(s: &Spectrum) -> f64 {
    shannon_bits(&s.amps)
}

pub(crate) fn shannon_bits(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|w| {
            let p = w / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// One-sided periodogram (boxcar window, mean removed). Normalisation is
/// irrelevant for entropy, so only the one-sided doubling is applied.
pub(crate) fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mu = stats::mean(x);
    if stats::variance(x) < DEGENERATE_VAR {
        return vec![0.0; n / 2 + 1];
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mu, 0.0)).collect();
    fft_plan(n).process(&mut buf);
    let n_bins = n / 2 + 1;
    let last = if n.is_multiple_of(2) {
        n_bins - 1
    } else {
        n_bins
    };
    (0..n_bins)
        .map(|k| {
            let p = buf[k].norm_sqr();
            if k > 0 && k < last {
                2.0 * p
            } else {
                p
            }
        })
        .collect()
}
