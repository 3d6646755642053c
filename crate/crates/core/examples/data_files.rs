//! Write a dataset in the SHL text layout, read it back, and round-trip it
//! through the binary window cache.
//!
//! ```text
//! cargo run --example data_files
//! cargo run --example data_files -- /path/to/shl/validation
//! ```

use std::collections::BTreeMap;

use locomode::data::{
    detect_missing_modality, load_dataset, read_cache_file, synth_dataset, write_cache_file,
    write_dataset, SynthOptions,
};

fn main() -> locomode::Result<()> {
    let tmp = tempfile::tempdir().map_err(|e| locomode::Error::Validation(e.to_string()))?;
    let dir = match std::env::args().nth(1) {
        Some(d) => d.into(),
        None => {
            let d = tmp.path().join("shl");
            let files = write_dataset(
                &d,
                &synth_dataset(&SynthOptions::new(40, 4, 5).masked(true))?,
            )?;
            println!("wrote {} files to {}", files.len(), d.display());
            d
        }
    };

    let windows = load_dataset(&dir, false)?;
    let mut masks: BTreeMap<String, usize> = BTreeMap::new();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    for w in &windows {
        let m = detect_missing_modality(w)?.map_or("complete".to_string(), |m| m.to_string());
        *masks.entry(m).or_default() += 1;
        *labels
            .entry(
                w.label
                    .map_or("unlabelled".into(), |l| l.name().to_string()),
            )
            .or_default() += 1;
    }
    println!("{} windows", windows.len());
    println!("masks:  {masks:?}");
    println!("labels: {labels:?}");

    let cache = tmp.path().join("windows.lmw");
    write_cache_file(&cache, &windows)?;
    let back = read_cache_file(&cache)?;
    let bytes = std::fs::metadata(&cache).map(|m| m.len()).unwrap_or(0);
    println!("cache: {} windows, {bytes} bytes", back.len());
    Ok(())
}
