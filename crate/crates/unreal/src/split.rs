//! Step-imbalanced training splits.
//!
//! A step split keeps a full quota of `majority_count` labeled nodes for
//! the first ⌈k/2⌉ classes and `round(majority_count / rho)` (at least 1)
//! for the remaining ⌊k/2⌋ highest-indexed classes. Removed nodes return
//! to the unlabeled pool, the validation set takes a fixed per-class
//! budget from the remainder, and everything else becomes test.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Split {
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub per_class_train_counts: Vec<usize>,
    /// Achieved imbalance ratio over classes with nonzero train count.
    pub rho: f64,
    pub seed: u64,
}

/// Per-class label counts plus the achieved imbalance ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDistribution {
    pub counts: Vec<usize>,
    pub rho: f64,
}

fn achieved_rho(counts: &[usize]) -> f64 {
    let nonzero: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if nonzero.is_empty() {
        return 1.0;
    }
    let max = *nonzero.iter().max().unwrap() as f64;
    let min = *nonzero.iter().min().unwrap() as f64;
    max / min
}

/// Per-class training quota for a step split: first ⌈k/2⌉ classes carry the
/// full quota, the highest-indexed ⌊k/2⌋ carry `round(majority/rho)`,
/// floored at one node.
pub fn step_quotas(k: usize, rho: f64, majority_count: usize) -> Vec<usize> {
    let n_major = k.div_ceil(2);
    let minority = ((majority_count as f64 / rho).round() as usize).max(1);
    (0..k)
        .map(|c| if c < n_major { majority_count } else { minority })
        .collect()
}

/// Build a step-imbalanced split by sampling from the whole graph.
///
/// When `proportional_fraction` is set, every class instead receives
/// `max(1, round(fraction · |class|))` training nodes, reproducing
/// label-proportional training sets.
pub fn make_step_imbalance(
    g: &Graph,
    rho: f64,
    majority_count: usize,
    proportional_fraction: Option<f64>,
    val_per_class: usize,
    seed: u64,
) -> Result<Split> {
    if rho < 1.0 {
        return Err(Error::Config(format!("rho must be >= 1, got {rho}")));
    }
    let quotas = match proportional_fraction {
        Some(f) => {
            if !(0.0..=1.0).contains(&f) || f <= 0.0 {
                return Err(Error::Config(format!(
                    "proportional fraction must lie in (0, 1], got {f}"
                )));
            }
            g.class_counts()
                .iter()
                .map(|&c| ((f * c as f64).round() as usize).max(1))
                .collect()
        }
        None => step_quotas(g.k, rho, majority_count),
    };

    // Per-class id pools in ascending order, shuffled by the split stream.
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); g.k];
    for (id, &label) in g.labels.iter().enumerate() {
        pools[label].push(id);
    }
    let mut rng = Rng::new(seed);
    for pool in pools.iter_mut() {
        rng.shuffle(pool);
    }

    sample_from_pools(pools, &quotas, val_per_class, seed)
}

/// Subsample an existing split's train section down to step-imbalance
/// quotas; validation and test sections pass through untouched.
pub fn subsample_split(
    g: &Graph,
    base: &Split,
    rho: f64,
    majority_count: usize,
    seed: u64,
) -> Result<Split> {
    let quotas = step_quotas(g.k, rho, majority_count);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); g.k];
    for &id in &base.train_ids {
        if id >= g.n {
            return Err(Error::Bounds { id, n: g.n });
        }
        pools[g.labels[id]].push(id);
    }
    let mut rng = Rng::new(seed);
    for pool in pools.iter_mut() {
        rng.shuffle(pool);
    }

    let mut train_ids = Vec::new();
    let mut counts = vec![0usize; g.k];
    for (class, pool) in pools.iter().enumerate() {
        let need = quotas[class];
        if pool.len() < need {
            return Err(Error::Capacity {
                class,
                message: format!(
                    "base split provides {} train nodes, quota needs {need}",
                    pool.len()
                ),
            });
        }
        train_ids.extend_from_slice(&pool[..need]);
        counts[class] = need;
    }
    train_ids.sort_unstable();
    Ok(Split {
        train_ids,
        val_ids: base.val_ids.clone(),
        test_ids: base.test_ids.clone(),
        rho: achieved_rho(&counts),
        per_class_train_counts: counts,
        seed,
    })
}

fn sample_from_pools(
    pools: Vec<Vec<usize>>,
    quotas: &[usize],
    val_per_class: usize,
    seed: u64,
) -> Result<Split> {
    let k = pools.len();
    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    let mut test_ids = Vec::new();
    let mut counts = vec![0usize; k];

    for (class, pool) in pools.into_iter().enumerate() {
        let need = quotas[class] + val_per_class;
        if pool.len() < need {
            return Err(Error::Capacity {
                class,
                message: format!(
                    "class has {} nodes, split needs {} (train {} + val {val_per_class})",
                    pool.len(),
                    need,
                    quotas[class]
                ),
            });
        }
        train_ids.extend_from_slice(&pool[..quotas[class]]);
        val_ids.extend_from_slice(&pool[quotas[class]..need]);
        test_ids.extend_from_slice(&pool[need..]);
        counts[class] = quotas[class];
    }
    train_ids.sort_unstable();
    val_ids.sort_unstable();
    test_ids.sort_unstable();

    Ok(Split {
        train_ids,
        val_ids,
        test_ids,
        rho: achieved_rho(&counts),
        per_class_train_counts: counts,
        seed,
    })
}

/// Recompute the per-class distribution of a split's training section.
pub fn split_stats(s: &Split, g: &Graph) -> LabelDistribution {
    let mut counts = vec![0usize; g.k];
    for &id in &s.train_ids {
        counts[g.labels[id]] += 1;
    }
    LabelDistribution {
        rho: achieved_rho(&counts),
        counts,
    }
}

// --- split file -----------------------------------------------------------

pub fn write_split(s: &Split, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let sections: [(&str, &[usize]); 3] = [
        ("[train]", &s.train_ids),
        ("[val]", &s.val_ids),
        ("[test]", &s.test_ids),
    ];
    for (header, ids) in sections {
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for id in ids {
            writeln!(w, "{id}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_split(path: &Path, g: &Graph) -> Result<Split> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut train_ids = Vec::new();
    let mut val_ids = Vec::new();
    let mut test_ids = Vec::new();
    let mut current: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        match t {
            "[train]" => current = Some(0),
            "[val]" => current = Some(1),
            "[test]" => current = Some(2),
            _ => {
                let id: usize = t.parse().map_err(|_| {
                    Error::parse(path, lineno + 1, format!("bad node id `{t}`"))
                })?;
                if id >= g.n {
                    return Err(Error::Bounds { id, n: g.n });
                }
                match current {
                    Some(0) => train_ids.push(id),
                    Some(1) => val_ids.push(id),
                    Some(2) => test_ids.push(id),
                    _ => {
                        return Err(Error::parse(
                            path,
                            lineno + 1,
                            "node id before any [section] header",
                        ))
                    }
                }
            }
        }
    }
    let mut counts = vec![0usize; g.k];
    for &id in &train_ids {
        counts[g.labels[id]] += 1;
    }
    Ok(Split {
        rho: achieved_rho(&counts),
        per_class_train_counts: counts,
        train_ids,
        val_ids,
        test_ids,
        seed: 0,
    })
}
