//! Generate a synthetic benchmark dataset on disk in the three-file
//! layout the loader reads (`edges.tsv`, `features.bin`, `labels.txt`).
//!
//! ```bash
//! cargo run --release -p unreal --example make_dataset -- data/synth [seed]
//! ```

use unreal::graph::save_graph;
use unreal::synth::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| "data/synth".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);

    let cfg = SynthConfig {
        class_sizes: vec![300, 300, 300, 300],
        f: 48,
        active_dims: 8,
        noise: 0.9,
        p_in: 0.015,
        p_out: 0.002,
        seed,
    };
    let g = generate(&cfg)?;
    std::fs::create_dir_all(&dir)?;
    save_graph(
        &g,
        &dir.join("edges.tsv"),
        &dir.join("features.bin"),
        &dir.join("labels.txt"),
    )?;
    println!(
        "wrote {} nodes, {} undirected edges, {} classes to {}",
        g.n,
        g.directed_edge_count() / 2,
        g.k,
        dir.display()
    );
    Ok(())
}
