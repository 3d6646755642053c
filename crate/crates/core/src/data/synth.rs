//! Deterministic synthetic windows for desk-scale runs.
//!
//! Every class gets its own dominant oscillation frequency per modality. The
//! oscillation modulates the magnitude of a fixed field vector (gravity for
//! the accelerometer, a constant turn rate for the gyroscope, the earth
//! field for the magnetometer), so the magnitude signal of each modality
//! peaks at the class frequency whatever the random phone orientation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{Label, Location, ModalityKind, RawWindow, SAMPLING_HZ, WINDOW_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub n_windows: usize,
    pub n_classes: usize,
    pub seed: u64,
    /// Zero-mask one uniformly chosen modality per window.
    pub mask_one_modality: bool,
}

impl SynthOptions {
    pub fn new(n_windows: usize, n_classes: usize, seed: u64) -> Self {
        Self {
            n_windows,
            n_classes,
            seed,
            mask_one_modality: false,
        }
    }

    pub fn masked(mut self, yes: bool) -> Self {
        self.mask_one_modality = yes;
        self
    }
}

struct ModalityModel {
    offset: f64,
    amplitude: (f64, f64),
    noise: f64,
    base_hz: f64,
    step_hz: f64,
    direction: [f64; 3],
}

fn model(m: ModalityKind) -> ModalityModel {
    match m {
        // m/s²
        ModalityKind::Acc => ModalityModel {
            offset: 9.81,
            amplitude: (1.5, 4.0),
            noise: 0.1,
            base_hz: 1.5,
            step_hz: 2.0,
            direction: [0.0, 0.0, 1.0],
        },
        // rad/s
        ModalityKind::Gyr => ModalityModel {
            offset: 2.0,
            amplitude: (0.3, 1.0),
            noise: 0.02,
            base_hz: 2.0,
            step_hz: 2.5,
            direction: [0.0, 1.0, 0.0],
        },
        // µT
        ModalityKind::Mag => ModalityModel {
            offset: 40.0,
            amplitude: (3.0, 8.0),
            noise: 0.5,
            base_hz: 0.8,
            step_hz: 1.3,
            direction: [0.5, 0.0, 0.75f64.sqrt()],
        },
    }
}

/// Dominant magnitude frequency (Hz) of `class_index` (0-based) for `m`.
pub fn synth_class_frequency(m: ModalityKind, class_index: usize) -> f64 {
    let p = model(m);
    p.base_hz + p.step_hz * class_index as f64
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    // Uniform unit quaternion.
    let mut q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= n);
    let [w, x, y, z] = q;
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

/// Generate `n_windows` windows cycling through classes `1..=n_classes`, so
/// class counts differ by at most one. Window ids are `0..n_windows`.
pub fn synth_dataset(opts: &SynthOptions) -> Result<Vec<RawWindow>> {
    if opts.n_classes == 0 || opts.n_classes > Label::ALL.len() {
        return Err(Error::Validation(format!(
            "n_classes must be in 1..=8, got {}",
            opts.n_classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut windows = Vec::with_capacity(opts.n_windows);
    for i in 0..opts.n_windows {
        let class = i % opts.n_classes;
        let mut w = RawWindow::zeros(i as u64);
        w.label = Some(Label::ALL[class]);
        w.location = Location::KNOWN[(i / opts.n_classes) % Location::KNOWN.len()];

        let rot = random_rotation(&mut rng);
        for m in ModalityKind::ALL {
            let p = model(m);
            let dir: [f64; 3] =
                std::array::from_fn(|r| (0..3).map(|c| rot[r][c] * p.direction[c]).sum());
            let amp = rng.random_range(p.amplitude.0..p.amplitude.1);
            let freq = synth_class_frequency(m, class) + rng.random_range(-0.15..0.15);
            let phase = rng.random_range(0.0..2.0 * PI);
            let noise = Normal::new(0.0, p.noise).unwrap();
            for t in 0..WINDOW_LEN {
                let mag = p.offset + amp * (2.0 * PI * freq * t as f64 / SAMPLING_HZ + phase).sin();
                for (a, d) in dir.iter().enumerate() {
                    w.channels[m.index()][a][t] = d * mag + noise.sample(&mut rng);
                }
            }
        }
        if opts.mask_one_modality {
            let m = ModalityKind::ALL[rng.random_range(0..3)];
            w.mask(m);
        }
        windows.push(w);
    }
    Ok(windows)
}
