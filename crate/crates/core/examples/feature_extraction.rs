//! The 70 features of a single signal, grouped by block.
//!
//! ```text
//! cargo run --example feature_extraction
//! ```

use std::f64::consts::PI;

use locomode::features::{catalog, extract_signal_features, FeatureDomain};

fn main() {
    // 2 Hz walking-like carrier with a weak 7 Hz component.
    let x: Vec<f64> = (0..500)
        .map(|t| {
            let t = t as f64 / 100.0;
            1.0 + 0.8 * (2.0 * PI * 2.0 * t).sin() + 0.2 * (2.0 * PI * 7.0 * t).sin()
        })
        .collect();
    let f = extract_signal_features(&x);

    for (i, (d, v)) in catalog().entries().iter().zip(f).enumerate() {
        let domain = match d.domain {
            FeatureDomain::Spectral => "spec",
            FeatureDomain::Time => "time",
        };
        println!("{i:>2} {domain} {:<24} {v:>12.5}", d.name);
    }
}
