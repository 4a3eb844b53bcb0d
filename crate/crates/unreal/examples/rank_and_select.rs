//! Anatomy of one selection round: dual pseudo-tag alignment, geometric
//! and confidence rankings, RBO fusion, the geometric-imbalance screen,
//! and the per-class cap.
//!
//! ```bash
//! cargo run --release -p unreal --example rank_and_select -- data/synth
//! ```

use unreal::cluster::{assign_cluster_labels, class_centers, kmeans};
use unreal::gcn::{train, FeatureOps, Inputs, ModelConfig};
use unreal::graph::{load_graph, normalize_adjacency, row_normalize_features};
use unreal::linalg::Mat;
use unreal::select::{build_pool, dpam, select_round, SelectionConfig};
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

    let cfg = ModelConfig {
        hidden: 64,
        max_epochs: 200,
        seed: 1,
        ..ModelConfig::default()
    };
    let (model, _) = train(&g, &adj, &split, &cfg)?;
    let features = FeatureOps::new(&g);
    let inputs = Inputs {
        graph: &g,
        adj: &adj,
        features: &features,
    };
    let snapshot = model.predict(&inputs)?;

    let mut in_train = vec![false; g.n];
    for &id in &split.train_ids {
        in_train[id] = true;
    }
    let unlabeled: Vec<usize> = (0..g.n).filter(|&v| !in_train[v]).collect();
    let h_u = Mat::from_rows(
        unlabeled
            .iter()
            .map(|&v| snapshot.embeddings.row(v).to_vec())
            .collect(),
    );
    let clustering = kmeans(&h_u, 60, 42, 100, 1e-4)?;
    let h_l = Mat::from_rows(
        split
            .train_ids
            .iter()
            .map(|&v| snapshot.embeddings.row(v).to_vec())
            .collect(),
    );
    let train_labels: Vec<usize> = split.train_ids.iter().map(|&v| g.labels[v]).collect();
    let centers = class_centers(&h_l, &train_labels, g.k)?;
    let cluster_class = assign_cluster_labels(&clustering, &centers);

    let node_cluster_label: Vec<usize> = clustering
        .assignment
        .iter()
        .map(|&c| cluster_class[c])
        .collect();
    let node_predicted: Vec<usize> = unlabeled.iter().map(|&v| snapshot.predicted[v]).collect();
    let aligned = dpam(&unlabeled, &node_cluster_label, &node_predicted, g.k);
    println!(
        "dual-agreement survivors per class: {:?} (of {} unlabeled)",
        aligned.iter().map(|c| c.len()).collect::<Vec<_>>(),
        unlabeled.len()
    );

    let selection = SelectionConfig {
        alpha: 4,
        gamma: 0.5,
        rbo_p: 0.75,
        ..SelectionConfig::default()
    };
    let pool = build_pool(
        &aligned,
        &snapshot.embeddings,
        &snapshot.confidence,
        &centers,
        selection.rbo_p,
    )?;
    for (class, cp) in pool.classes.iter().enumerate() {
        let head = |xs: &[usize]| xs.iter().take(5).copied().collect::<Vec<_>>();
        println!("class {class}: rbo {:.4}", cp.rbo);
        println!("  geometric head:  {:?}", head(&cp.geometric));
        println!("  confidence head: {:?}", head(&cp.confidence));
        println!("  fused head:      {:?}", head(&cp.fused));
    }

    let counts = split.per_class_train_counts.clone();
    let selections = select_round(&pool, &selection, &counts, &vec![false; g.n]);
    for sel in &selections {
        let correct = sel
            .selected
            .iter()
            .filter(|&&id| g.labels[id] == sel.class)
            .count();
        println!(
            "class {}: {} candidates, {} after the GI screen, selected {:?} ({}/{} true)",
            sel.class,
            sel.n_candidates,
            sel.n_after_dgin,
            sel.selected,
            correct,
            sel.selected.len()
        );
    }
    Ok(())
}
