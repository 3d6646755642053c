//! Fit the gradient-boosted tree classifier directly on a feature matrix,
//! watch the training loss and round-trip the model through bytes.
//!
//! ```text
//! cargo run --release --example gbt_classifier
//! ```

use locomode::aggregation::{extract_all, AblationConfig, FeatureSchema};
use locomode::data::{synth_dataset, ModalityKind, ModalityMask, SynthOptions};
use locomode::features::FeatureOptions;
use locomode::model::{
    balanced_weights, confusion_matrix, fit_traced, macro_f1, FeatureMatrix, GbtModel, GbtParams,
};

fn matrix(seed: u64, n: usize) -> locomode::Result<(FeatureMatrix, Vec<u8>)> {
    let raw = synth_dataset(&SynthOptions::new(n, 4, seed))?;
    let feats = extract_all(&raw, FeatureOptions::default())?;
    let config: AblationConfig = "smv+smv_dt1".parse()?;
    let mask = ModalityMask::new(ModalityKind::Mag);
    let rows = feats
        .iter()
        .map(|w| w.assemble(&config, mask))
        .collect::<locomode::Result<Vec<_>>>()?;
    let y = feats.iter().map(|w| w.label.unwrap().id()).collect();
    Ok((
        FeatureMatrix::new(&FeatureSchema::for_config(&config, mask), &rows)?,
        y,
    ))
}

fn main() -> locomode::Result<()> {
    let (x, y) = matrix(1, 200)?;
    let (xt, yt) = matrix(2, 100)?;
    let params = GbtParams {
        n_iterations: 40,
        ..GbtParams::default()
    };
    let (model, loss) = fit_traced(&x, &y, &balanced_weights(&y)?, &params)?;
    for (i, l) in loss.iter().enumerate().step_by(10) {
        println!("iteration {i:>3}  train log-loss {l:.5}");
    }

    let restored = GbtModel::from_bytes(&model.to_bytes())?;
    let pred = restored.predict(&xt)?;
    let classes = restored.classes().to_vec();
    println!("\nheld-out macro F1 {:.4}", macro_f1(&yt, &pred, &classes)?);
    let cm = confusion_matrix(&yt, &pred, &classes)?;
    for (c, row) in cm.classes.iter().zip(&cm.counts) {
        println!("  true {c}: {row:?}");
    }
    Ok(())
}
