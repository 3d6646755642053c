//! Unit scaling and the seven derived signals of one window.
//!
//! ```text
//! cargo run --example signal_processing
//! ```

use locomode::data::{detect_missing_modality, synth_dataset, ModalityKind, SynthOptions};
use locomode::processing::{derive_signals, scale_units, unit_divisor, SignalKind};
use locomode::stats;

fn main() -> locomode::Result<()> {
    let mut window = synth_dataset(&SynthOptions::new(1, 3, 42))?.remove(0);
    window.mask(ModalityKind::Gyr);

    let mask = detect_missing_modality(&window)?;
    println!(
        "window {} label {:?}, mask {:?}",
        window.window_id,
        window.label,
        mask.map(|m| m.to_string())
    );

    let scaled = scale_units(window);
    let signals = derive_signals(&scaled, mask)?;
    println!("{} derived signals\n", signals.signal_count());

    println!("{:<5} {:<14} {:>10} {:>10}", "mod", "signal", "mean", "std");
    for m in ModalityKind::ALL {
        let Some(set) = signals.get(m) else {
            println!("{:<5} (masked, divisor {})", m.name(), unit_divisor(m));
            continue;
        };
        for s in SignalKind::ALL {
            let x = set.get(s);
            println!(
                "{:<5} {:<14} {:>10.4} {:>10.4}",
                m.name(),
                s.name(),
                stats::mean(x),
                stats::std_dev(x)
            );
        }
    }
    Ok(())
}
