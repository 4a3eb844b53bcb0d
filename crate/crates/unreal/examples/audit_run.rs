//! Pseudo-label audit of a finished run journal: accuracy of the first
//! additions to minority vs majority classes, and the per-round accuracy
//! of classifier labels inside vs outside the aligned (dual-agreement)
//! node set.
//!
//! ```bash
//! cargo run --release -p unreal --example run_pipeline -- data/synth out/
//! cargo run --release -p unreal --example audit_run -- data/synth out/unreal.jsonl
//! ```

use unreal::graph::load_graph;
use unreal::pipeline::{audit_pseudo_labels, read_run_record};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| "data/synth".into()));
    let journal = std::path::PathBuf::from(args.next().unwrap_or_else(|| "out/unreal.jsonl".into()));

    let g = load_graph(
        &dir.join("edges.tsv"),
        &dir.join("features.bin"),
        &dir.join("labels.txt"),
    )?;
    let record = read_run_record(&journal)?;
    println!(
        "{} on {} (rho {:.2}), {} rounds",
        record.summary.config.method,
        record.summary.dataset,
        record.summary.rho,
        record.summary.rounds_executed
    );

    let table = audit_pseudo_labels(&record, &g, 100)?;
    println!(
        "first minority additions: {}/{} correct ({:.1}%)",
        table.minority.correct,
        table.minority.examined,
        100.0 * table.minority.accuracy
    );
    println!(
        "first majority additions: {}/{} correct ({:.1}%)",
        table.majority.correct,
        table.majority.examined,
        100.0 * table.majority.accuracy
    );
    println!("round  aligned-set acc  discarded-set acc  per-class rbo");
    for round in &record.rounds {
        let fmt = |v: Option<f64>| {
            v.map(|a| format!("{:.1}%", 100.0 * a))
                .unwrap_or_else(|| "-".into())
        };
        let rbos: Vec<String> = round
            .per_class
            .iter()
            .map(|c| c.rbo.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into()))
            .collect();
        println!(
            "{:>5}  {:>15}  {:>17}  [{}]",
            round.round,
            fmt(round.dpam_in_accuracy),
            fmt(round.dpam_out_accuracy),
            rbos.join(", ")
        );
    }
    Ok(())
}
