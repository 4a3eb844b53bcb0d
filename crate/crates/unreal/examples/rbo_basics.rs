//! Rank-biased overlap on small rankings: how the persistence parameter
//! weighs top-of-list agreement, and how two rankings fuse.

use unreal::select::{rbo, reorder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let by_distance = vec![0, 1, 2, 3, 4, 5, 6, 7];
    let mut by_confidence = by_distance.clone();
    by_confidence.swap(0, 1); // top-2 swapped
    by_confidence.swap(5, 7); // tail shuffled

    for p in [0.5, 0.75, 0.98] {
        println!(
            "p = {p}: rbo(identical) = {}, rbo(swapped) = {:.6}",
            rbo(&by_distance, &by_distance, p)?,
            rbo(&by_distance, &by_confidence, p)?
        );
    }

    // Fuse with the RBO-derived weight; the distance side dominates.
    let r = rbo(&by_distance, &by_confidence, 0.75)?;
    let fused = reorder(&by_distance, &by_confidence, r)?;
    println!("rbo weight r = {r:.4}");
    println!("distance order:   {by_distance:?}");
    println!("confidence order: {by_confidence:?}");
    println!("fused order:      {fused:?}");
    Ok(())
}
