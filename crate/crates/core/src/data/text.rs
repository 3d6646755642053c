//! SHL challenge text layout: one whitespace-separated file per channel, one
//! window per line, plus `Label.txt` (500 sample labels per line) and an
//! optional `Location.txt` (one location id per line).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{majority_label, Axis, Location, ModalityKind, RawWindow, WINDOW_LEN};
use crate::error::{Error, Result};

/// Row-per-window matrix as read from one channel file.
pub type ChannelMatrix = Vec<Vec<f64>>;

pub const LABEL_FILE: &str = "Label.txt";
pub const LOCATION_FILE: &str = "Location.txt";

/// `(modality, axis, file name)` for all nine channels.
pub const CHANNEL_FILES: [(ModalityKind, Axis, &str); 9] = [
    (ModalityKind::Acc, Axis::X, "Acc_x.txt"),
    (ModalityKind::Acc, Axis::Y, "Acc_y.txt"),
    (ModalityKind::Acc, Axis::Z, "Acc_z.txt"),
    (ModalityKind::Gyr, Axis::X, "Gyr_x.txt"),
    (ModalityKind::Gyr, Axis::Y, "Gyr_y.txt"),
    (ModalityKind::Gyr, Axis::Z, "Gyr_z.txt"),
    (ModalityKind::Mag, Axis::X, "Mag_x.txt"),
    (ModalityKind::Mag, Axis::Y, "Mag_y.txt"),
    (ModalityKind::Mag, Axis::Z, "Mag_z.txt"),
];

/// Parse channel text. Blank lines are skipped; line numbers in errors are
/// 1-based and refer to the physical line.
pub fn parse_channel_text(text: &str, n_samples: usize, path: &Path) -> Result<ChannelMatrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(n_samples);
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("cannot parse `{tok}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("non-finite value `{tok}`"),
                });
            }
            row.push(v);
        }
        if row.len() != n_samples {
            return Err(Error::Shape(format!(
                "{}: line {} has {} values, expected {n_samples}",
                path.display(),
                i + 1,
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_channel_file(path: impl AsRef<Path>, n_samples: usize) -> Result<ChannelMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel_text(&text, n_samples, path)
}

/// Build windows from per-channel matrices. Channels absent from `channels`
/// are zero-filled. Window ids are the row indices.
pub fn assemble_windows(
    channels: &HashMap<(ModalityKind, Axis), ChannelMatrix>,
    labels: Option<&[Vec<f64>]>,
    locations: Option<&[Location]>,
) -> Result<Vec<RawWindow>> {
    let counts: Vec<(String, usize)> = channels
        .iter()
        .map(|((m, a), rows)| (format!("{}_{}", m, a.name()), rows.len()))
        .chain(labels.map(|l| (LABEL_FILE.to_string(), l.len())))
        .chain(locations.map(|l| (LOCATION_FILE.to_string(), l.len())))
        .collect();
    let n = counts
        .first()
        .map(|(_, n)| *n)
        .ok_or_else(|| Error::Shape("no channels or labels given".into()))?;
    if let Some((name, k)) = counts.iter().find(|(_, k)| *k != n) {
        return Err(Error::Shape(format!(
            "{name} has {k} windows but {} has {n}",
            counts[0].0
        )));
    }

    (0..n)
        .map(|i| {
            let mut w = RawWindow::zeros(i as u64);
            for ((m, a), rows) in channels {
                let row = &rows[i];
                if row.len() != WINDOW_LEN {
                    return Err(Error::Shape(format!(
                        "{}_{} window {i} has {} samples, expected {WINDOW_LEN}",
                        m,
                        a.name(),
                        row.len()
                    )));
                }
                w.channels[m.index()][*a as usize].copy_from_slice(row);
            }
            if let Some(labels) = labels {
                let ids: Vec<u8> = labels[i]
                    .iter()
                    .map(|&v| {
                        if (0.0..=255.0).contains(&v) {
                            v.round() as u8
                        } else {
                            0
                        }
                    })
                    .collect();
                w.label = majority_label(&ids);
            }
            if let Some(locs) = locations {
                w.location = locs[i];
            }
            Ok(w)
        })
        .collect()
}

fn load_locations(path: &Path) -> Result<Vec<Location>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0 && (0.0..=255.0).contains(v))
                .and_then(|v| Location::from_id(v as u8))
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("invalid location id `{}`", l.trim()),
                })
        })
        .collect()
}

/// Load a dataset directory in the SHL layout. Missing channel files are
/// zero-filled; `Label.txt` is mandatory when `require_labels` is set.
pub fn load_dataset(dir: impl AsRef<Path>, require_labels: bool) -> Result<Vec<RawWindow>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "data directory not found"),
        ));
    }
    let loaded: Vec<((ModalityKind, Axis), ChannelMatrix)> = CHANNEL_FILES
        .par_iter()
        .filter_map(|&(m, a, name)| {
            let path = dir.join(name);
            path.exists()
                .then(|| load_channel_file(&path, WINDOW_LEN).map(|rows| ((m, a), rows)))
        })
        .collect::<Result<_>>()?;
    let channels: HashMap<_, _> = loaded.into_iter().collect();

    let label_path = dir.join(LABEL_FILE);
    let labels = if label_path.exists() {
        Some(load_channel_file(&label_path, WINDOW_LEN)?)
    } else if require_labels {
        return Err(Error::io(
            label_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "label file not found"),
        ));
    } else {
        None
    };
    let loc_path = dir.join(LOCATION_FILE);
    let locations = if loc_path.exists() {
        Some(load_locations(&loc_path)?)
    } else {
        None
    };
    assemble_windows(&channels, labels.as_deref(), locations.as_deref())
}

/// Write windows in the SHL layout. Labels are expanded to 500 per-sample
/// ids (0 when unlabeled).
pub fn write_dataset(dir: impl AsRef<Path>, windows: &[RawWindow]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (m, a, name) in CHANNEL_FILES {
        let mut out = String::new();
        for w in windows {
            push_row(&mut out, w.channels[m.index()][a as usize].iter());
        }
        written.push(write_atomic(&dir.join(name), out.as_bytes())?);
    }
    let mut labels = String::new();
    let mut locations = String::new();
    for w in windows {
        let id = w.label.map_or(0, |l| l.id());
        push_row(&mut labels, std::iter::repeat_n(&id, WINDOW_LEN));
        writeln!(locations, "{}", w.location.id()).unwrap();
    }
    written.push(write_atomic(&dir.join(LABEL_FILE), labels.as_bytes())?);
    written.push(write_atomic(
        &dir.join(LOCATION_FILE),
        locations.as_bytes(),
    )?);
    Ok(written)
}

fn push_row<T: std::fmt::Display>(out: &mut String, values: impl Iterator<Item = T>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

/// Write through a temporary file in the target directory and rename, so a
/// failed write never leaves a partial file behind.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    use std::io::Write;
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(path.to_path_buf())
}
