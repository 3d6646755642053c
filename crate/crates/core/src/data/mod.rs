//! Window data model, SHL-style channel file ingestion and missing-modality
//! detection.
//!
//! A window is 5 s of phone motion data at 100 Hz: 500 samples for each of
//! the three axes of the accelerometer, gyroscope and magnetometer. In the
//! validation and test releases exactly one modality per window is replaced
//! by zeros; the training release has all three present.

mod cache;
mod synth;
mod text;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_cache, read_cache_file, write_cache, write_cache_file};
pub use synth::{synth_class_frequency, synth_dataset, SynthOptions};
pub(crate) use text::write_atomic;
pub use text::{
    assemble_windows, load_channel_file, load_dataset, parse_channel_text, write_dataset,
    ChannelMatrix, CHANNEL_FILES, LABEL_FILE, LOCATION_FILE,
};

/// Samples per channel in one window.
pub const WINDOW_LEN: usize = 500;
/// Sampling rate of every channel, in Hz.
pub const SAMPLING_HZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModalityKind {
    Acc = 0,
    Gyr = 1,
    Mag = 2,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 3] = [ModalityKind::Acc, ModalityKind::Gyr, ModalityKind::Mag];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Capitalised name used in SHL channel file names (`Acc_x.txt`).
    pub fn name(self) -> &'static str {
        match self {
            ModalityKind::Acc => "Acc",
            ModalityKind::Gyr => "Gyr",
            ModalityKind::Mag => "Mag",
        }
    }

    /// Lower-case prefix used in feature column names.
    pub fn prefix(self) -> &'static str {
        match self {
            ModalityKind::Acc => "acc",
            ModalityKind::Gyr => "gyr",
            ModalityKind::Mag => "mag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Transportation mode. Ids follow the SHL challenge convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Still = 1,
    Walk = 2,
    Run = 3,
    Bike = 4,
    Car = 5,
    Bus = 6,
    Train = 7,
    Subway = 8,
}

impl Label {
    pub const ALL: [Label; 8] = [
        Label::Still,
        Label::Walk,
        Label::Run,
        Label::Bike,
        Label::Car,
        Label::Bus,
        Label::Train,
        Label::Subway,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        id.checked_sub(1)
            .and_then(|i| Self::ALL.get(i as usize).copied())
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Still => "Still",
            Label::Walk => "Walk",
            Label::Run => "Run",
            Label::Bike => "Bike",
            Label::Car => "Car",
            Label::Bus => "Bus",
            Label::Train => "Train",
            Label::Subway => "Subway",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(name))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Phone carrying position. `Unknown` is used when no location file is given
/// (the test release withholds it) and is never filtered out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    Unknown = 0,
    Bag = 1,
    Hips = 2,
    Torso = 3,
    Hand = 4,
}

impl Location {
    pub const KNOWN: [Location; 4] = [
        Location::Bag,
        Location::Hips,
        Location::Torso,
        Location::Hand,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Location::Unknown),
            1..=4 => Some(Self::KNOWN[id as usize - 1]),
            _ => None,
        }
    }
}

/// The modality that is zero-masked in a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModalityMask {
    pub missing: ModalityKind,
}

impl ModalityMask {
    pub const ALL: [ModalityMask; 3] = [
        ModalityMask::new(ModalityKind::Acc),
        ModalityMask::new(ModalityKind::Gyr),
        ModalityMask::new(ModalityKind::Mag),
    ];

    pub const fn new(missing: ModalityKind) -> Self {
        Self { missing }
    }

    /// The two modalities a model for this mask consumes, in canonical order.
    pub fn available(self) -> [ModalityKind; 2] {
        match self.missing {
            ModalityKind::Acc => [ModalityKind::Gyr, ModalityKind::Mag],
            ModalityKind::Gyr => [ModalityKind::Acc, ModalityKind::Mag],
            ModalityKind::Mag => [ModalityKind::Acc, ModalityKind::Gyr],
        }
    }
}

impl fmt::Display for ModalityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = 0", self.missing)
    }
}

/// One 5-second window. `channels[modality][axis]` holds `WINDOW_LEN` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub window_id: u64,
    pub label: Option<Label>,
    pub location: Location,
    pub channels: [[Vec<f64>; 3]; 3],
}

impl RawWindow {
    pub fn zeros(window_id: u64) -> Self {
        Self {
            window_id,
            label: None,
            location: Location::Unknown,
            channels: std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; WINDOW_LEN])),
        }
    }

    pub fn modality(&self, m: ModalityKind) -> &[Vec<f64>; 3] {
        &self.channels[m.index()]
    }

    pub fn modality_mut(&mut self, m: ModalityKind) -> &mut [Vec<f64>; 3] {
        &mut self.channels[m.index()]
    }

    pub fn is_zero(&self, m: ModalityKind) -> bool {
        self.modality(m).iter().flatten().all(|&v| v == 0.0)
    }

    /// Replace every sample of `m` by exactly 0.0.
    pub fn mask(&mut self, m: ModalityKind) {
        for axis in self.modality_mut(m) {
            axis.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in ModalityKind::ALL {
            for (a, axis) in Axis::ALL.iter().zip(self.modality(m)) {
                if axis.len() != WINDOW_LEN {
                    return Err(Error::Shape(format!(
                        "window {}: {}_{} has {} samples, expected {WINDOW_LEN}",
                        self.window_id,
                        m,
                        a.name(),
                        axis.len()
                    )));
                }
                if axis.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "window {}: {}_{} contains non-finite samples",
                        self.window_id,
                        m,
                        a.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Returns the zero-masked modality, `Ok(None)` when all three are present
/// (training data), or an ambiguity error when two or more are all-zero.
pub fn detect_missing_modality(w: &RawWindow) -> Result<Option<ModalityMask>> {
    let zero: Vec<ModalityKind> = ModalityKind::ALL
        .into_iter()
        .filter(|&m| w.is_zero(m))
        .collect();
    match zero.as_slice() {
        [] => Ok(None),
        [m] => Ok(Some(ModalityMask::new(*m))),
        _ => Err(Error::AmbiguousMask(format!(
            "window {}: modalities {:?} are all zero",
            w.window_id, zero
        ))),
    }
}

/// Windows whose location is not in `excluded`, order preserved.
pub fn filter_locations(windows: Vec<RawWindow>, excluded: &[Location]) -> Vec<RawWindow> {
    windows
        .into_iter()
        .filter(|w| !excluded.contains(&w.location))
        .collect()
}

/// Per-window label from per-sample labels: most frequent id, ties to the
/// lowest id. Ids outside 1..=8 (the SHL null label 0) do not vote.
pub fn majority_label(sample_labels: &[u8]) -> Option<Label> {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for &id in sample_labels {
        if Label::from_id(id).is_some() {
            *counts.entry(id).or_default() += 1;
        }
    }
    // BTreeMap iterates ascending, so the first maximum is the lowest id.
    let mut best: Option<(u8, usize)> = None;
    for (id, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((id, n));
        }
    }
    best.and_then(|(id, _)| Label::from_id(id))
}
