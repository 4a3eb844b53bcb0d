//! Deterministic synthetic benchmark graphs.
//!
//! Planted-partition instances with class-indicative features: nodes of a
//! class share a sparse feature prototype plus noise, and same-class edges
//! are denser than cross-class ones. Useful for examples, smoke tests, and
//! exercising the full pipeline without any dataset on disk.

use crate::error::Result;
use crate::graph::Graph;
use crate::rng::{seeds, Rng};

#[derive(Clone, Debug)]
pub struct SynthConfig {
    /// Nodes per class; class sizes may differ to mimic natural imbalance.
    pub class_sizes: Vec<usize>,
    /// Feature dimension.
    pub f: usize,
    /// Active prototype dimensions per class.
    pub active_dims: usize,
    /// Feature noise standard deviation.
    pub noise: f64,
    /// Same-class edge probability.
    pub p_in: f64,
    /// Cross-class edge probability.
    pub p_out: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            class_sizes: vec![200; 4],
            f: 32,
            active_dims: 6,
            noise: 0.6,
            p_in: 0.02,
            p_out: 0.002,
            seed: 0,
        }
    }
}

/// Generate a planted-partition graph. Same config and seed → same graph.
pub fn generate(cfg: &SynthConfig) -> Result<Graph> {
    let k = cfg.class_sizes.len();
    let n: usize = cfg.class_sizes.iter().sum();
    let mut rng = Rng::new(cfg.seed ^ seeds::SYNTH);

    // Interleave class labels so node id carries no class information.
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    for (class, &size) in cfg.class_sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(class).take(size));
    }
    rng.shuffle(&mut labels);

    // Sparse prototypes: each class activates `active_dims` random dims.
    let mut prototypes = vec![vec![0.0f64; cfg.f]; k];
    for proto in prototypes.iter_mut() {
        for _ in 0..cfg.active_dims {
            let dim = rng.below(cfg.f);
            proto[dim] = 1.0;
        }
    }

    let mut features = Vec::with_capacity(n * cfg.f);
    for &label in &labels {
        for j in 0..cfg.f {
            let v = prototypes[label][j] + cfg.noise * rng.next_gaussian();
            features.push(v as f32);
        }
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if labels[u] == labels[v] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.next_f64() < p {
                edges.push((u, v));
            }
        }
    }

    Graph::from_parts(n, cfg.f, &edges, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let cfg = SynthConfig {
            class_sizes: vec![30, 30, 20],
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.n, 80);
        assert_eq!(a.k, 3);
        assert_eq!(a.features, b.features);
        assert_eq!(a.adj_cols, b.adj_cols);
        assert_eq!(a.labels, b.labels);
        let counts = a.class_counts();
        let mut sorted = counts.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![20, 30, 30]);
    }

    #[test]
    fn homophily_holds() {
        let cfg = SynthConfig {
            class_sizes: vec![100, 100],
            p_in: 0.05,
            p_out: 0.005,
            seed: 3,
            ..SynthConfig::default()
        };
        let g = generate(&cfg).unwrap();
        let mut within = 0usize;
        let mut across = 0usize;
        for (u, v) in g.undirected_edges() {
            if g.labels[u] == g.labels[v] {
                within += 1;
            } else {
                across += 1;
            }
        }
        assert!(within > across * 2, "within {within} across {across}");
    }
}
