//! Cluster unlabeled-node embeddings with k-means, label each cluster by
//! its nearest class center, and compare those cluster-derived labels
//! against the classifier's own predictions — the agreement signal the
//! dual-filter selection is built on.
//!
//! ```bash
//! cargo run --release -p unreal --example cluster_embeddings -- data/synth
//! ```

use unreal::cluster::{assign_cluster_labels, class_centers, kmeans};
use unreal::gcn::{train, FeatureOps, Inputs, ModelConfig};
use unreal::graph::{load_graph, normalize_adjacency, row_normalize_features};
use unreal::linalg::Mat;
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
        max_epochs: 300,
        patience: 150,
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
    println!(
        "k-means: {} clusters over {} points, {} iterations, inertia {:.2}, {} empty",
        clustering.k_prime,
        h_u.rows,
        clustering.iterations_run,
        clustering.inertia,
        clustering.empty_clusters.len()
    );

    let h_l = Mat::from_rows(
        split
            .train_ids
            .iter()
            .map(|&v| snapshot.embeddings.row(v).to_vec())
            .collect(),
    );
    let train_labels: Vec<usize> = split.train_ids.iter().map(|&v| g.labels[v]).collect();
    let centers = class_centers(&h_l, &train_labels, g.k)?;
    let cluster_label = assign_cluster_labels(&clustering, &centers);

    // Accuracy of the two pseudo-label sources over unlabeled nodes.
    let mut cluster_ok = 0usize;
    let mut classifier_ok = 0usize;
    let mut agree = 0usize;
    for (i, &v) in unlabeled.iter().enumerate() {
        let from_cluster = cluster_label[clustering.assignment[i]];
        cluster_ok += (from_cluster == g.labels[v]) as usize;
        classifier_ok += (snapshot.predicted[v] == g.labels[v]) as usize;
        agree += (from_cluster == snapshot.predicted[v]) as usize;
    }
    let pct = |x: usize| 100.0 * x as f64 / unlabeled.len() as f64;
    println!("pseudo-label accuracy, clustering route:  {:.2}%", pct(cluster_ok));
    println!("pseudo-label accuracy, classifier route:  {:.2}%", pct(classifier_ok));
    println!("routes agree on {:.2}% of unlabeled nodes", pct(agree));
    Ok(())
}
