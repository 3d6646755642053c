//! Score a handful of feature configurations and print the ablation table.
//!
//! ```text
//! cargo run --release --example ablation
//! cargo run --release --example ablation -- all
//! ```

use locomode::aggregation::{ablation_grid, extract_all, AblationConfig};
use locomode::data::{synth_dataset, SynthOptions};
use locomode::model::GbtParams;
use locomode::pipeline::{run_ablation, PipelineOptions};

fn main() -> locomode::Result<()> {
    let configs: Vec<AblationConfig> = if std::env::args().nth(1).as_deref() == Some("all") {
        ablation_grid()
    } else {
        ["rot_inv_stat2+smv+smv_dt2", "raw", "smv", "rot_inv_sort"]
            .iter()
            .map(|s| s.parse())
            .collect::<locomode::Result<_>>()?
    };
    let opts = PipelineOptions {
        params: GbtParams {
            n_iterations: 20,
            ..GbtParams::default()
        },
        ..PipelineOptions::default()
    };
    // Complete training windows, masked validation windows.
    let train = extract_all(
        &synth_dataset(&SynthOptions::new(240, 5, 3))?,
        opts.features,
    )?;
    let val = extract_all(
        &synth_dataset(&SynthOptions::new(150, 5, 30).masked(true))?,
        opts.features,
    )?;

    let report = run_ablation(&train, &val, &configs, &opts)?;
    print!("{}", report.to_tsv());
    Ok(())
}
