//! Build step-imbalanced training splits at several imbalance ratios and
//! print their label distributions.
//!
//! ```bash
//! cargo run --release -p unreal --example prepare_split -- data/synth
//! ```

use unreal::graph::load_graph;
use unreal::split::{make_step_imbalance, split_stats, write_split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::PathBuf::from(
        std::env::args().nth(1).unwrap_or_else(|| "data/synth".into()),
    );
    let g = load_graph(
        &dir.join("edges.tsv"),
        &dir.join("features.bin"),
        &dir.join("labels.txt"),
    )?;

    for rho in [1.0, 10.0, 20.0] {
        let split = make_step_imbalance(&g, rho, 20, None, 30, 1)?;
        let dist = split_stats(&split, &g);
        println!(
            "rho {rho:>4}: per-class train counts {:?} (achieved {:.2})",
            dist.counts, dist.rho
        );
    }

    let split = make_step_imbalance(&g, 10.0, 20, None, 30, 1)?;
    let path = dir.join("split_rho10.txt");
    write_split(&split, &path)?;
    println!(
        "rho 10 split written to {} (train {} / val {} / test {})",
        path.display(),
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len()
    );
    Ok(())
}
