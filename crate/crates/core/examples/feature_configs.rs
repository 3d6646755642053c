//! The 18 ablation configurations, their vector lengths and schema hashes.
//!
//! ```text
//! cargo run --example feature_configs
//! cargo run --example feature_configs -- "rot_inv_sort+smv_integral"
//! ```

use locomode::aggregation::{ablation_grid, AblationConfig, FeatureSchema};
use locomode::data::{ModalityKind, ModalityMask};

fn main() -> locomode::Result<()> {
    let configs: Vec<AblationConfig> = match std::env::args().nth(1) {
        Some(s) => vec![s.parse()?],
        None => ablation_grid(),
    };
    let mask = ModalityMask::new(ModalityKind::Acc);
    println!(
        "{:<32} {:>7} {:>18}",
        "config", "length", "schema (Acc = 0)"
    );
    for c in &configs {
        let schema = FeatureSchema::for_config(c, mask);
        println!(
            "{:<32} {:>7} {:>18x}",
            c.to_string(),
            c.length(),
            schema.hash()
        );
    }
    if let [only] = configs.as_slice() {
        let schema = FeatureSchema::for_config(only, mask);
        println!("\nfirst columns:");
        for n in schema.names().iter().take(5) {
            println!("  {n}");
        }
    }
    Ok(())
}
