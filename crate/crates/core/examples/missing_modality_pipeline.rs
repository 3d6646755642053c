//! Train one model family per missing modality with 3-fold CV, then classify
//! masked windows by fold majority vote.
//!
//! ```text
//! cargo run --release --example missing_modality_pipeline
//! ```

use locomode::aggregation::{extract_all, AblationConfig};
use locomode::data::{synth_dataset, SynthOptions};
use locomode::model::GbtParams;
use locomode::pipeline::{oof_score, train_bundle, PipelineOptions};

fn main() -> locomode::Result<()> {
    let opts = PipelineOptions {
        params: GbtParams {
            n_iterations: 50,
            ..GbtParams::default()
        },
        ..PipelineOptions::default()
    };
    let train = extract_all(
        &synth_dataset(&SynthOptions::new(600, 3, 7).masked(true))?,
        opts.features,
    )?;
    let test = extract_all(
        &synth_dataset(&SynthOptions::new(300, 3, 70).masked(true))?,
        opts.features,
    )?;

    let bundle = train_bundle(&train, &AblationConfig::final_default(), &opts)?;
    println!("{} models, config {}", bundle.model_count(), bundle.config);
    for mm in &bundle.masks {
        println!(
            "  {}: {} training windows, {} features",
            mm.mask,
            mm.n_train,
            mm.schema.len()
        );
    }

    let oof = oof_score(&bundle, &train)?;
    println!("OOF macro F1 per mask: {:?}", oof.per_mask);

    bundle.reset_usage();
    let eval = bundle.evaluate(&test)?;
    println!("MV macro F1 on held-out windows: {:?}", eval.macro_f1);
    for m in &eval.per_mask {
        println!("  {} ({} windows): {:.4}", m.mask, m.n_windows, m.macro_f1);
        for row in &m.confusion.counts {
            println!("    {row:?}");
        }
    }
    println!("rows scored per model: {:?}", bundle.usage());
    Ok(())
}
