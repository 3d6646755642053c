//! Rotation-invariant aggregation of raw-axis features and assembly of
//! configuration-specific feature vectors.
//!
//! Orientation changes permute axes and flip their signs. Summarising each
//! feature over `{x, y, z}` with a symmetric statistic removes the
//! permutation; the sign flip only matters for features that are odd in the
//! signal. Of the 70 per-signal features only the time-domain skew is odd
//! (the spectral block uses magnitudes, the ACF is even, the remaining time
//! features are even or built on `|·|`), so aggregation drops that single
//! feature and works on 69. This is what makes the published vector lengths
//! come out: `rot_inv_stat2` gives `2 modalities × 2 stats × 69 = 276`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{detect_missing_modality, ModalityKind, ModalityMask, RawWindow};
use crate::error::{Error, Result};
use crate::features::{
    catalog, extract_signal_features_with, FeatureOptions, N_FEATURES, SIGNAL_SKEW_INDEX,
};
use crate::processing::{derive_signals, scale_units, DerivedSignalSet, SignalKind};
use crate::stats;

/// Features that survive aggregation.
pub const N_AGGREGATED: usize = N_FEATURES - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregationKind {
    Stat2,
    Stat3,
    Sort,
}

impl AggregationKind {
    pub fn stat_names(self) -> &'static [&'static str] {
        match self {
            AggregationKind::Stat2 => &["mean", "std"],
            AggregationKind::Stat3 => &["mean", "std", "skew"],
            AggregationKind::Sort => &["min", "mid", "max"],
        }
    }

    pub fn outputs_per_feature(self) -> usize {
        self.stat_names().len()
    }

    fn token(self) -> &'static str {
        match self {
            AggregationKind::Stat2 => "stat2",
            AggregationKind::Stat3 => "stat3",
            AggregationKind::Sort => "sort",
        }
    }

    fn summarise(self, v: [f64; 3], out: &mut Vec<f64>) {
        match self {
            AggregationKind::Stat2 => {
                out.extend([stats::mean(&v), stats::std_dev(&v)]);
            }
            AggregationKind::Stat3 => {
                out.extend([stats::mean(&v), stats::std_dev(&v), stats::skew(&v)]);
            }
            AggregationKind::Sort => {
                let mut s = v;
                s.sort_by(f64::total_cmp);
                out.extend(s);
            }
        }
    }
}

/// Magnitude signal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SmvBlock {
    Smv,
    Dt1,
    Dt2,
    Integral,
}

impl SmvBlock {
    pub const ALL: [SmvBlock; 4] = [
        SmvBlock::Smv,
        SmvBlock::Dt1,
        SmvBlock::Dt2,
        SmvBlock::Integral,
    ];

    pub fn signal(self) -> SignalKind {
        match self {
            SmvBlock::Smv => SignalKind::Smv,
            SmvBlock::Dt1 => SignalKind::SmvDt1,
            SmvBlock::Dt2 => SignalKind::SmvDt2,
            SmvBlock::Integral => SignalKind::SmvIntegral,
        }
    }

    fn token(self) -> &'static str {
        self.signal().name()
    }
}

/// A feature subset. Grammar: `raw | rot_inv_{stat2|stat3|sort}` and/or
/// `smv`, `smv_dt1`, `smv_dt2`, `smv_integral`, joined by `+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AblationConfig {
    pub use_raw: bool,
    pub rot_inv: Option<AggregationKind>,
    smv_blocks: Vec<SmvBlock>,
}

impl AblationConfig {
    pub fn new(
        use_raw: bool,
        rot_inv: Option<AggregationKind>,
        smv_blocks: impl IntoIterator<Item = SmvBlock>,
    ) -> Result<Self> {
        let mut blocks: Vec<SmvBlock> = smv_blocks.into_iter().collect();
        blocks.sort();
        blocks.dedup();
        let cfg = Self {
            use_raw,
            rot_inv,
            smv_blocks: blocks,
        };
        if use_raw && rot_inv.is_some() {
            return Err(Error::Config {
                input: cfg.to_string(),
                reason: "raw and rot_inv are mutually exclusive".into(),
            });
        }
        if !use_raw && rot_inv.is_none() && cfg.smv_blocks.is_empty() {
            return Err(Error::Config {
                input: String::new(),
                reason: "no feature block selected".into(),
            });
        }
        Ok(cfg)
    }

    /// The configuration used for the final model.
    pub fn final_default() -> Self {
        Self::new(
            false,
            Some(AggregationKind::Stat2),
            [SmvBlock::Smv, SmvBlock::Dt2],
        )
        .expect("valid")
    }

    pub fn smv_blocks(&self) -> &[SmvBlock] {
        &self.smv_blocks
    }

    /// Vector length for one mask (two modalities).
    pub fn length(&self) -> usize {
        let per_modality = if self.use_raw { 3 * N_FEATURES } else { 0 }
            + self
                .rot_inv
                .map_or(0, |k| k.outputs_per_feature() * N_AGGREGATED)
            + N_FEATURES * self.smv_blocks.len();
        2 * per_modality
    }
}

pub fn config_length(config: &AblationConfig) -> usize {
    config.length()
}

impl fmt::Display for AblationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.use_raw {
            parts.push("raw".into());
        }
        if let Some(k) = self.rot_inv {
            parts.push(format!("rot_inv_{}", k.token()));
        }
        parts.extend(self.smv_blocks.iter().map(|b| b.token().to_string()));
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for AblationConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: String| Error::Config {
            input: s.to_string(),
            reason,
        };
        let mut use_raw = false;
        let mut rot_inv = None;
        let mut blocks = Vec::new();
        for tok in s.split('+').map(|t| t.trim().to_ascii_lowercase()) {
            match tok.as_str() {
                "" => return Err(err("empty token".into())),
                "raw" if !use_raw => use_raw = true,
                "rot_inv_stat2" | "rot_inv_stat3" | "rot_inv_sort" if rot_inv.is_none() => {
                    rot_inv = Some(match &tok[8..] {
                        "stat2" => AggregationKind::Stat2,
                        "stat3" => AggregationKind::Stat3,
                        _ => AggregationKind::Sort,
                    });
                }
                other => {
                    let block = SmvBlock::ALL
                        .into_iter()
                        .find(|b| b.token() == other)
                        .ok_or_else(|| err(format!("unknown or repeated token `{other}`")))?;
                    if blocks.contains(&block) {
                        return Err(err(format!("repeated token `{other}`")));
                    }
                    blocks.push(block);
                }
            }
        }
        Self::new(use_raw, rot_inv, blocks).map_err(|e| match e {
            Error::Config { reason, .. } => err(reason),
            other => other,
        })
    }
}

impl TryFrom<String> for AblationConfig {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AblationConfig> for String {
    fn from(c: AblationConfig) -> String {
        c.to_string()
    }
}

/// The 18 published configurations with their vector lengths.
pub const ABLATION_GRID: [(&str, usize); 18] = [
    ("rot_inv_sort+smv+smv_dt2", 694),
    ("rot_inv_stat2+smv+smv_dt2", 556),
    ("rot_inv_sort+smv+smv_dt1", 694),
    ("rot_inv_stat2+smv+smv_dt1", 556),
    ("rot_inv_sort+smv", 554),
    ("rot_inv_stat2+smv", 416),
    ("smv+smv_dt1+smv_dt2+smv_integral", 560),
    ("smv+smv_dt2+smv_integral", 420),
    ("smv+smv_dt1+smv_integral", 420),
    ("smv+smv_dt1+smv_dt2", 420),
    ("smv+smv_dt2", 280),
    ("smv+smv_dt1", 280),
    ("rot_inv_sort", 414),
    ("rot_inv_stat3", 414),
    ("rot_inv_stat2", 276),
    ("raw", 420),
    ("smv+smv_integral", 280),
    ("smv", 140),
];

pub fn ablation_grid() -> Vec<AblationConfig> {
    ABLATION_GRID
        .iter()
        .map(|(s, _)| s.parse().expect("valid table config"))
        .collect()
}

/// Summarise three per-axis feature vectors (70 each) over the axes, after
/// dropping the sign-sensitive skew. Output is feature-major:
/// `[f0_stat0, f0_stat1, ..., f1_stat0, ...]`.
pub fn aggregate(fx: &[f64], fy: &[f64], fz: &[f64], kind: AggregationKind) -> Result<Vec<f64>> {
    for (name, v) in [("x", fx), ("y", fy), ("z", fz)] {
        if v.len() != N_FEATURES {
            return Err(Error::Schema(format!(
                "{name} feature vector has {} entries, expected {N_FEATURES}",
                v.len()
            )));
        }
    }
    let mut out = Vec::with_capacity(N_AGGREGATED * kind.outputs_per_feature());
    for i in (0..N_FEATURES).filter(|&i| i != SIGNAL_SKEW_INDEX) {
        kind.summarise([fx[i], fy[i], fz[i]], &mut out);
    }
    Ok(out)
}

/// Ordered column names for one configuration under one mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>) -> Self {
        Self { names }
    }

    pub fn for_config(config: &AblationConfig, mask: ModalityMask) -> Self {
        let feats: Vec<&str> = catalog().names().collect();
        let mut names = Vec::with_capacity(config.length());
        for m in mask.available() {
            let p = m.prefix();
            if config.use_raw {
                for s in SignalKind::AXES {
                    names.extend(feats.iter().map(|f| format!("{p}_{}_{f}", s.name())));
                }
            }
            if let Some(k) = config.rot_inv {
                for (i, f) in feats.iter().enumerate() {
                    if i == SIGNAL_SKEW_INDEX {
                        continue;
                    }
                    names.extend(
                        k.stat_names()
                            .iter()
                            .map(|st| format!("{p}_rotinv_{f}_{st}")),
                    );
                }
            }
            for b in config.smv_blocks() {
                names.extend(feats.iter().map(|f| format!("{p}_{}_{f}", b.token())));
            }
        }
        Self { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// First 8 bytes of SHA-256 over the newline-joined names.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for n in &self.names {
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub schema: Arc<FeatureSchema>,
    pub values: Vec<f64>,
}

/// The 70 features of every derived signal of one window. Computed once per
/// window and reassembled for any configuration and mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub window_id: u64,
    pub label: Option<crate::data::Label>,
    pub location: crate::data::Location,
    /// The zero-masked modality, `None` for complete windows.
    pub missing: Option<ModalityKind>,
    /// `per_signal[modality][signal]`; `None` for the masked modality.
    per_signal: [Option<Vec<[f64; N_FEATURES]>>; 3],
}

impl WindowFeatures {
    pub fn from_signals(
        dss: &DerivedSignalSet,
        opts: FeatureOptions,
    ) -> [Option<Vec<[f64; N_FEATURES]>>; 3] {
        std::array::from_fn(|m| {
            dss.modalities[m].as_ref().map(|sig| {
                sig.signals
                    .iter()
                    .map(|s| extract_signal_features_with(s, opts))
                    .collect()
            })
        })
    }

    /// Scale, detect the mask, derive signals and extract all features.
    pub fn from_window(w: &RawWindow, opts: FeatureOptions) -> Result<Self> {
        w.validate()?;
        let mask = detect_missing_modality(w)?;
        let scaled = scale_units(w.clone());
        let dss = derive_signals(&scaled, mask)?;
        Ok(Self {
            window_id: w.window_id,
            label: w.label,
            location: w.location,
            missing: mask.map(|m| m.missing),
            per_signal: Self::from_signals(&dss, opts),
        })
    }

    /// True when every modality a model for `mask` needs is present.
    pub fn supports(&self, mask: ModalityMask) -> bool {
        mask.available()
            .iter()
            .all(|m| self.per_signal[m.index()].is_some())
    }

    pub fn signal(&self, m: ModalityKind, s: SignalKind) -> Option<&[f64; N_FEATURES]> {
        self.per_signal[m.index()].as_ref().map(|v| &v[s.index()])
    }

    /// Assemble the vector for `(config, mask)`; order matches
    /// [`FeatureSchema::for_config`].
    pub fn assemble(&self, config: &AblationConfig, mask: ModalityMask) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(config.length());
        for m in mask.available() {
            let sig = self.per_signal[m.index()].as_ref().ok_or_else(|| {
                Error::Validation(format!(
                    "window {}: modality {m} is missing but required for mask {mask}",
                    self.window_id
                ))
            })?;
            if config.use_raw {
                for s in SignalKind::AXES {
                    out.extend_from_slice(&sig[s.index()]);
                }
            }
            if let Some(k) = config.rot_inv {
                out.extend(aggregate(
                    &sig[SignalKind::X.index()],
                    &sig[SignalKind::Y.index()],
                    &sig[SignalKind::Z.index()],
                    k,
                )?);
            }
            for b in config.smv_blocks() {
                out.extend_from_slice(&sig[b.signal().index()]);
            }
        }
        Ok(out)
    }
}

/// Extract features for many windows in parallel; output order matches input.
pub fn extract_all(windows: &[RawWindow], opts: FeatureOptions) -> Result<Vec<WindowFeatures>> {
    windows
        .par_iter()
        .map(|w| WindowFeatures::from_window(w, opts))
        .collect()
}

/// Feature vector of one window's derived signals for `(config, mask)`.
pub fn build_feature_vector(
    dss: &DerivedSignalSet,
    config: &AblationConfig,
    mask: ModalityMask,
) -> Result<FeatureVector> {
    build_feature_vector_with(dss, config, mask, FeatureOptions::default())
}

pub fn build_feature_vector_with(
    dss: &DerivedSignalSet,
    config: &AblationConfig,
    mask: ModalityMask,
    opts: FeatureOptions,
) -> Result<FeatureVector> {
    let wf = WindowFeatures {
        window_id: 0,
        label: None,
        location: crate::data::Location::Unknown,
        missing: Some(mask.missing),
        per_signal: WindowFeatures::from_signals(dss, opts),
    };
    let values = wf.assemble(config, mask)?;
    let schema = FeatureSchema::for_config(config, mask);
    debug_assert_eq!(schema.len(), values.len());
    Ok(FeatureVector {
        schema: Arc::new(schema),
        values,
    })
}
