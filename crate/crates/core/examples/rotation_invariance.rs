//! Rotate every sensor frame at random and compare features before and after.
//!
//! SMV-based features only move by rounding error. Raw-axis features change,
//! but their symmetric aggregates are unaffected by axis permutations and
//! sign flips.
//!
//! ```text
//! cargo run --example rotation_invariance
//! ```

use locomode::aggregation::{AblationConfig, WindowFeatures};
use locomode::data::{synth_dataset, ModalityKind, ModalityMask, SynthOptions};
use locomode::features::FeatureOptions;
use locomode::processing::SignalKind;

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (sc, cc) = c.sin_cos();
    [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ]
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

fn main() -> locomode::Result<()> {
    let base = synth_dataset(&SynthOptions::new(1, 3, 7))?.remove(0);
    let opts = FeatureOptions::default();
    let before = WindowFeatures::from_window(&base, opts)?;

    let mut rotated = base.clone();
    for (m, angles) in
        ModalityKind::ALL
            .iter()
            .zip([(0.3, 1.1, -0.7), (2.0, -0.4, 0.9), (-1.3, 0.2, 2.5)])
    {
        let r = rotation(angles.0, angles.1, angles.2);
        let src = &base.channels[m.index()];
        rotated.channels[m.index()] = std::array::from_fn(|i| {
            (0..src[0].len())
                .map(|t| r[i][0] * src[0][t] + r[i][1] * src[1][t] + r[i][2] * src[2][t])
                .collect()
        });
    }
    let after = WindowFeatures::from_window(&rotated, opts)?;

    for m in ModalityKind::ALL {
        for s in SignalKind::ALL {
            let d = max_diff(before.signal(m, s).unwrap(), after.signal(m, s).unwrap());
            println!(
                "{:<4} {:<14} max relative change {d:.2e}",
                m.name(),
                s.name()
            );
        }
    }

    // Swap x and z and negate y.
    let mut shuffled = base.clone();
    for m in ModalityKind::ALL {
        let [x, y, z] = base.channels[m.index()].clone();
        shuffled.channels[m.index()] = [z, y.iter().map(|v| -v).collect(), x];
    }
    let permuted = WindowFeatures::from_window(&shuffled, opts)?;
    let mask = ModalityMask::new(ModalityKind::Mag);
    for name in ["raw", "rot_inv_stat2", "rot_inv_stat3", "rot_inv_sort"] {
        let config: AblationConfig = name.parse()?;
        let d = max_diff(
            &before.assemble(&config, mask)?,
            &permuted.assemble(&config, mask)?,
        );
        println!("{name:<14} after axis permutation: max relative change {d:.2e}");
    }
    Ok(())
}
