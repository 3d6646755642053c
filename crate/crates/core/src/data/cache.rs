//! Binary window cache.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      8 bytes  "LMWCACHE"
//! version    u32      1
//! windows    u64
//! samples    u32      samples per channel (500)
//! channels   u32 count, then per channel: u32 length + utf-8 name ("Acc_x", ...)
//! per window:
//!   window_id u64, label u8 (0 = none), location u8,
//!   channels × samples f32
//! ```

use std::fs;
use std::path::Path;

use super::text::{write_atomic, CHANNEL_FILES};
use super::{Label, Location, RawWindow, WINDOW_LEN};
use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LMWCACHE";
const VERSION: u32 = 1;

fn channel_names() -> impl Iterator<Item = String> {
    CHANNEL_FILES
        .iter()
        .map(|(m, a, _)| format!("{}_{}", m.name(), a.name()))
}

pub fn write_cache(windows: &[RawWindow]) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u64(windows.len() as u64);
    w.u32(WINDOW_LEN as u32);
    w.len_prefixed(CHANNEL_FILES.len());
    for name in channel_names() {
        w.str(&name);
    }
    for win in windows {
        w.u64(win.window_id);
        w.u8(win.label.map_or(0, |l| l.id()));
        w.u8(win.location.id());
        for (m, a, _) in CHANNEL_FILES {
            for &v in &win.channels[m.index()][a as usize] {
                w.f32(v as f32);
            }
        }
    }
    w.finish()
}

pub fn read_cache(bytes: &[u8]) -> Result<Vec<RawWindow>> {
    let mut r = Reader::new(bytes, "window cache");
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(
            "window cache",
            format!("unsupported version {version}"),
        ));
    }
    let n = r.u64()? as usize;
    let samples = r.u32()? as usize;
    if samples != WINDOW_LEN {
        return Err(Error::format(
            "window cache",
            format!("{samples} samples per channel, expected {WINDOW_LEN}"),
        ));
    }
    let n_channels = r.len_prefixed(4)?;
    let names: Vec<String> = (0..n_channels).map(|_| r.str()).collect::<Result<_>>()?;
    if !names.iter().cloned().eq(channel_names()) {
        return Err(Error::format(
            "window cache",
            format!("unexpected channel list {names:?}"),
        ));
    }
    let per_window = 10 + n_channels * samples * 4;
    if n.saturating_mul(per_window) > bytes.len() {
        return Err(Error::format(
            "window cache",
            "window count exceeds file size",
        ));
    }

    let mut windows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut win = RawWindow::zeros(r.u64()?);
        let label = r.u8()?;
        win.label =
            match label {
                0 => None,
                id => Some(Label::from_id(id).ok_or_else(|| {
                    Error::format("window cache", format!("invalid label id {id}"))
                })?),
            };
        let loc = r.u8()?;
        win.location = Location::from_id(loc)
            .ok_or_else(|| Error::format("window cache", format!("invalid location id {loc}")))?;
        for (m, a, _) in CHANNEL_FILES {
            for v in win.channels[m.index()][a as usize].iter_mut() {
                *v = r.f32()? as f64;
            }
        }
        windows.push(win);
    }
    r.finish()?;
    Ok(windows)
}

pub fn write_cache_file(path: impl AsRef<Path>, windows: &[RawWindow]) -> Result<()> {
    write_atomic(path.as_ref(), &write_cache(windows)).map(|_| ())
}

pub fn read_cache_file(path: impl AsRef<Path>) -> Result<Vec<RawWindow>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_cache(&bytes)
}
