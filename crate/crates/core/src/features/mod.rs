//! The 70 per-signal features.
//!
//! Layout of one feature vector:
//!
//! | range   | block                                                   | n  |
//! |---------|---------------------------------------------------------|----|
//! | 0..27   | PSD of the z-normalised signal: 17 band energies + 10 shape | 27 |
//! | 27..54  | DCT magnitudes of the z-normalised signal, same 27       | 27 |
//! | 54      | PSD spectral entropy                                     | 1  |
//! | 55..63  | autocorrelation descriptors                              | 8  |
//! | 63..70  | time-domain descriptors of the raw signal                | 7  |
//!
//! `2·(17+2+1+3+1+3) + 1 + (3+1+2+2) + (1+1+2+2+1) = 70`.
//!
//! No feature depends on the signal's scale except through the spectral
//! block, and that block is computed after z-normalisation, so the 55
//! spectral features are invariant to `a·x + b` for `a > 0`. Every feature
//! except the time-domain skew is also invariant to `x -> -x`.

pub mod spectral;
pub mod temporal;

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::data::SAMPLING_HZ;
pub use spectral::{
    band_energies, dct_magnitudes, spectral_entropy, spectral_shape, welch_psd, znorm, Spectrum,
    SpectrumKind, BANDS,
};
pub use temporal::{acf, acf_features, time_features, ACF_MAX_LAG};

/// Features per signal.
pub const N_FEATURES: usize = 70;
/// Number of leading spectral features.
pub const N_SPECTRAL: usize = 55;
/// Index of the time-domain skew, the only sign-sensitive feature.
pub const SIGNAL_SKEW_INDEX: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureDomain {
    Spectral,
    Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub domain: FeatureDomain,
    pub sign_invariant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCatalog {
    entries: Vec<FeatureDescriptor>,
}

const SHAPE_NAMES: [&str; 10] = [
    "centroid",
    "bandwidth",
    "peak_ratio",
    "amp_max",
    "amp_std",
    "amp_skew",
    "top_freq",
    "top5_freq_mean",
    "top5_freq_std",
    "top5_freq_skew",
];

const ACF_NAMES: [&str; 8] = [
    "acf_abs_mean",
    "acf_skew",
    "acf_std",
    "acf_prominent_freq",
    "acf_zero_cross_rate",
    "acf_slope_sign_change",
    "acf_diff_entropy",
    "acf_spectral_entropy",
];

const TIME_NAMES: [&str; 7] = [
    "diff_entropy",
    "mean_cross_rate",
    "skew",
    "kurtosis",
    "hjorth_mobility",
    "hjorth_complexity",
    "katz_fd",
];

impl FeatureCatalog {
    fn build() -> Self {
        let mut entries = Vec::with_capacity(N_FEATURES);
        let mut push = |name: String, domain, sign_invariant| {
            entries.push(FeatureDescriptor {
                name,
                domain,
                sign_invariant,
            })
        };
        for prefix in ["psd", "dct"] {
            for (lo, hi) in BANDS {
                push(
                    format!("{prefix}_band_{lo}_{hi}"),
                    FeatureDomain::Spectral,
                    true,
                );
            }
            for s in SHAPE_NAMES {
                push(format!("{prefix}_{s}"), FeatureDomain::Spectral, true);
            }
        }
        push("psd_entropy".into(), FeatureDomain::Spectral, true);
        for s in ACF_NAMES {
            push(s.into(), FeatureDomain::Time, true);
        }
        for s in TIME_NAMES {
            push(s.into(), FeatureDomain::Time, s != "skew");
        }

        assert_eq!(
            entries.len(),
            2 * (17 + 2 + 1 + 3 + 1 + 3) + 1 + (3 + 1 + 2 + 2) + (1 + 1 + 2 + 2 + 1)
        );
        assert_eq!(entries.len(), N_FEATURES);
        assert_eq!(entries[SIGNAL_SKEW_INDEX].name, "skew");
        assert_eq!(entries.iter().filter(|e| !e.sign_invariant).count(), 1);
        assert_eq!(
            entries
                .iter()
                .filter(|e| e.domain == FeatureDomain::Spectral)
                .count(),
            N_SPECTRAL
        );
        Self { entries }
    }

    pub fn entries(&self) -> &[FeatureDescriptor] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

static CATALOG: LazyLock<FeatureCatalog> = LazyLock::new(FeatureCatalog::build);

pub fn catalog() -> &'static FeatureCatalog {
    &CATALOG
}

/// Switches for feature-extraction ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// z-normalise before the PSD and DCT. Turning this off removes the
    /// amplitude invariance of the spectral block.
    pub znorm: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { znorm: true }
    }
}

pub fn extract_signal_features(x: &[f64]) -> [f64; N_FEATURES] {
    extract_signal_features_with(x, FeatureOptions::default())
}

pub fn extract_signal_features_with(x: &[f64], opts: FeatureOptions) -> [f64; N_FEATURES] {
    let fs = SAMPLING_HZ;
    let spec_input = if opts.znorm { znorm(x) } else { x.to_vec() };
    let psd = welch_psd(&spec_input, fs);
    let dct = dct_magnitudes(&spec_input, fs);
    let r = acf(x, ACF_MAX_LAG);

    let mut out = [0.0; N_FEATURES];
    let mut i = 0;
    let mut put = |vals: &[f64]| {
        out[i..i + vals.len()].copy_from_slice(vals);
        i += vals.len();
    };
    for s in [&psd, &dct] {
        put(&band_energies(s));
        put(&spectral_shape(s));
    }
    put(&[spectral_entropy(&psd)]);
    put(&acf_features(&r, fs));
    put(&time_features(x));
    debug_assert_eq!(i, N_FEATURES);
    out
}
