//! Train the GCN backbone directly: vanilla cross-entropy vs
//! inverse-frequency re-weighting on an imbalanced split.
//!
//! ```bash
//! cargo run --release -p unreal --example train_baseline -- data/synth
//! ```

use unreal::gcn::{train, ClassWeightMode, FeatureOps, Inputs, ModelConfig};
use unreal::graph::{load_graph, normalize_adjacency, row_normalize_features};
use unreal::metrics::evaluate;
use unreal::split::make_step_imbalance;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::PathBuf::from(
        std::env::args().nth(1).unwrap_or_else(|| "data/synth".into()),
    );
    let mut g = load_graph(
        &dir.join("edges.tsv"),
        &dir.join("features.bin"),
        &dir.join("labels.txt"),
    )?;
    row_normalize_features(&mut g);
    let adj = normalize_adjacency(&g);
    let split = make_step_imbalance(&g, 10.0, 20, None, 30, 1)?;
    println!("train counts: {:?}", split.per_class_train_counts);

    for mode in [ClassWeightMode::None, ClassWeightMode::InverseFrequency] {
        let cfg = ModelConfig {
            hidden: 64,
            max_epochs: 500,
            patience: 150,
            class_weight_mode: mode,
            seed: 1,
            ..ModelConfig::default()
        };
        let (model, trace) = train(&g, &adj, &split, &cfg)?;
        let features = FeatureOps::new(&g);
        let inputs = Inputs {
            graph: &g,
            adj: &adj,
            features: &features,
        };
        let snapshot = model.predict(&inputs)?;
        let result = evaluate(&snapshot.predicted, &g.labels, &split.test_ids, g.k)?;
        println!(
            "{mode:?}: {} epochs (best {}), test bAcc {:.2}% macro-F1 {:.2}%",
            trace.epochs.len(),
            trace.best_epoch,
            100.0 * result.balanced_accuracy,
            100.0 * result.macro_f1
        );
        println!("  per-class recall: {:?}", result.per_class_recall);
    }
    Ok(())
}
