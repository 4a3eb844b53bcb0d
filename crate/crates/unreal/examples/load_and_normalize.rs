//! Load a dataset from disk and inspect the normalized propagation
//! operator used by every GCN layer.
//!
//! ```bash
//! cargo run --release -p unreal --example make_dataset -- data/synth
//! cargo run --release -p unreal --example load_and_normalize -- data/synth
//! ```

use unreal::graph::{load_graph, normalize_adjacency, spmm};
use unreal::linalg::Mat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::PathBuf::from(
        std::env::args().nth(1).unwrap_or_else(|| "data/synth".into()),
    );
    let g = load_graph(
        &dir.join("edges.tsv"),
        &dir.join("features.bin"),
        &dir.join("labels.txt"),
    )?;
    println!(
        "loaded {}: n={} f={} k={} undirected edges={}",
        dir.display(),
        g.n,
        g.f,
        g.k,
        g.directed_edge_count() / 2
    );
    println!("class counts: {:?}", g.class_counts());

    let adj = normalize_adjacency(&g);
    let max_row_sum = (0..g.n)
        .map(|v| {
            (adj.row_ptr[v]..adj.row_ptr[v + 1])
                .map(|i| adj.values[i] as f64)
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "normalized operator: {} entries, max row sum {:.6} (always <= 1)",
        adj.values.len(),
        max_row_sum
    );

    // One propagation step mixes each node with its neighborhood.
    let ones = Mat::from_rows(vec![vec![1.0]; g.n]);
    let mixed = spmm(&adj, &ones)?;
    let min = mixed.data.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("spmm(A_hat, 1) range: [{min:.4}, {max_row_sum:.4}]");
    Ok(())
}
