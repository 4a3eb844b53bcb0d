//! Candidate selection: dual pseudo-tag alignment, geometric and
//! confidence rankings, rank-biased overlap, rank fusion, and the
//! geometric-imbalance screen.
//!
//! Per class m the pool holds the same node set twice: once sorted by
//! ascending distance to the class center (geometric) and once by
//! descending classifier confidence. The two orders are fused with
//! RBO-derived weights, with the geometric side always dominant, then
//! filtered by the GI index before the per-round cap applies.

use serde::{Deserialize, Serialize};

use crate::cluster::ClassCenters;
use crate::error::{Error, Result};
use crate::linalg::{euclidean, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    Confidence,
    Geometric,
    Fused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Per-class cap on nodes added per round; 0 disables a class.
    pub alpha: usize,
    /// GI threshold for the geometric-imbalance screen.
    pub gamma: f64,
    /// RBO persistence, in (0, 1).
    pub rbo_p: f64,
    /// Restrict selection to classes below the current per-class maximum.
    pub minority_only: bool,
    pub ranking_mode: RankingMode,
    pub dgin_enabled: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            alpha: 6,
            gamma: 0.5,
            rbo_p: 0.75,
            minority_only: false,
            ranking_mode: RankingMode::Fused,
            dgin_enabled: true,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.rbo_p && self.rbo_p < 1.0) {
            return Err(Error::Config(format!(
                "rbo persistence must lie in (0,1), got {}",
                self.rbo_p
            )));
        }
        Ok(())
    }
}

/// One candidate surviving the dual-agreement filter.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub node: usize,
    /// Distance to the assigned class center.
    pub delta: f64,
    /// Smallest distance to any other class center.
    pub beta: f64,
    pub confidence: f64,
    /// `(β−δ)/δ`; plus infinity when the node sits exactly on its center.
    pub gi: f64,
}

/// Per-class candidate lists with both orderings and the fused result.
#[derive(Clone, Debug, Default)]
pub struct ClassPool {
    /// Geometric order: ascending δ, ties toward the lower node id.
    pub geometric: Vec<usize>,
    /// Confidence order: descending confidence, ties toward the lower id.
    pub confidence: Vec<usize>,
    /// RBO between the two orderings.
    pub rbo: f64,
    /// Fusion of the two orderings (geometric side dominant).
    pub fused: Vec<usize>,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, Default)]
pub struct CandidatePool {
    pub classes: Vec<ClassPool>,
}

/// Dual pseudo-tag alignment: keep unlabeled nodes whose cluster-derived
/// label and classifier prediction agree.
///
/// `cluster_label[i]` and `predicted[i]` run over the unlabeled nodes
/// `nodes[i]`; the result maps each class to its aligned node ids.
pub fn dpam(nodes: &[usize], cluster_label: &[usize], predicted: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut per_class = vec![Vec::new(); k];
    for (i, &node) in nodes.iter().enumerate() {
        if cluster_label[i] == predicted[i] {
            per_class[cluster_label[i]].push(node);
        }
    }
    per_class
}

/// Distances of one embedding against every class center: returns
/// `(δ = d(assigned), β = min over other classes)`.
fn center_distances(embedding: &[f64], class: usize, centers: &ClassCenters) -> (f64, f64) {
    let k = centers.centers.rows;
    let delta = euclidean(embedding, centers.centers.row(class));
    let mut beta = f64::INFINITY;
    for j in 0..k {
        if j == class {
            continue;
        }
        let d = euclidean(embedding, centers.centers.row(j));
        if d < beta {
            beta = d;
        }
    }
    (delta, beta)
}

/// Build the per-class pool from DPAM survivors: distances, GI indices,
/// both orderings, the per-class RBO value, and the fused order.
///
/// `embeddings` is indexed by global node id (same geometry the class
/// centers were computed in); `confidence` likewise.
pub fn build_pool(
    aligned: &[Vec<usize>],
    embeddings: &Mat,
    confidence: &[f64],
    centers: &ClassCenters,
    rbo_p: f64,
) -> Result<CandidatePool> {
    let mut classes = Vec::with_capacity(aligned.len());
    for (class, nodes) in aligned.iter().enumerate() {
        let mut candidates: Vec<Candidate> = nodes
            .iter()
            .map(|&node| {
                let (delta, beta) = center_distances(embeddings.row(node), class, centers);
                let gi = if delta == 0.0 {
                    f64::INFINITY
                } else {
                    (beta - delta) / delta
                };
                Candidate {
                    node,
                    delta,
                    beta,
                    confidence: confidence[node],
                    gi,
                }
            })
            .collect();
        candidates.sort_by(|a, b| a.node.cmp(&b.node));

        let mut geometric: Vec<usize> = candidates.iter().map(|c| c.node).collect();
        let delta_of = |pool: &[Candidate], node: usize| -> f64 {
            pool[pool.binary_search_by(|c| c.node.cmp(&node)).unwrap()].delta
        };
        let conf_of = |pool: &[Candidate], node: usize| -> f64 {
            pool[pool.binary_search_by(|c| c.node.cmp(&node)).unwrap()].confidence
        };
        geometric.sort_by(|&a, &b| {
            delta_of(&candidates, a)
                .partial_cmp(&delta_of(&candidates, b))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut confidence: Vec<usize> = candidates.iter().map(|c| c.node).collect();
        confidence.sort_by(|&a, &b| {
            conf_of(&candidates, b)
                .partial_cmp(&conf_of(&candidates, a))
                .unwrap()
                .then(a.cmp(&b))
        });

        let rbo_value = rbo(&geometric, &confidence, rbo_p)?;
        let fused = reorder(&geometric, &confidence, rbo_value)?;

        classes.push(ClassPool {
            geometric,
            confidence,
            rbo: rbo_value,
            fused,
            candidates,
        });
    }
    Ok(CandidatePool { classes })
}

/// Extrapolated rank-biased overlap of two conjoint rankings.
///
/// `RBO = (1−p)·Σ_{d=1..L} p^{d−1}·A_d + p^L·A_L` with `A_d` the overlap
/// fraction of the depth-d prefixes. Computed through the complement
/// `1 − Σ (1−A_d)·…`, so identical rankings return exactly 1.0.
pub fn rbo(s: &[usize], t: &[usize], p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::Contract(format!("rbo persistence {p} outside (0,1)")));
    }
    {
        let mut a = s.to_vec();
        let mut b = t.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::Contract(
                "rbo requires conjoint rankings over the same element set".into(),
            ));
        }
        let dup = a.windows(2).any(|w| w[0] == w[1]);
        if dup {
            return Err(Error::Contract("rbo rankings must not repeat elements".into()));
        }
    }
    let len = s.len();
    if len == 0 {
        return Ok(1.0);
    }
    let max_node = s.iter().copied().max().unwrap();
    let mut seen_s = vec![false; max_node + 1];
    let mut seen_t = vec![false; max_node + 1];
    let mut overlap = 0usize;
    let mut deficit = 0.0; // Σ p^{d-1}·(1 − A_d)
    let mut p_pow = 1.0;
    let mut last_miss = 0.0;
    for d in 1..=len {
        let a = s[d - 1];
        let b = t[d - 1];
        if a == b {
            overlap += 1;
        } else {
            if seen_t[a] {
                overlap += 1;
            } else {
                seen_s[a] = true;
            }
            if seen_s[b] {
                overlap += 1;
            } else {
                seen_t[b] = true;
            }
        }
        last_miss = 1.0 - overlap as f64 / d as f64;
        deficit += p_pow * last_miss;
        p_pow *= p;
    }
    // p_pow is now p^L; the tail term reuses the final agreement A_L.
    Ok(1.0 - (1.0 - p) * deficit - p_pow * last_miss)
}

/// Fuse the two rankings: per-node score
/// `max(r, 1−r)·rank_S(u) + min(r, 1−r)·rank_T(u)` over 1-based ranks,
/// sorted ascending. Ties break by geometric rank, then node id.
pub fn reorder(geometric: &[usize], confidence: &[usize], rbo_value: f64) -> Result<Vec<usize>> {
    if geometric.len() != confidence.len() {
        return Err(Error::Contract(
            "reorder requires conjoint rankings of equal length".into(),
        ));
    }
    if !(0.0..=1.0).contains(&rbo_value) {
        return Err(Error::Contract(format!("rbo value {rbo_value} outside [0,1]")));
    }
    let w_geo = rbo_value.max(1.0 - rbo_value);
    let w_conf = rbo_value.min(1.0 - rbo_value);
    let max_node = geometric.iter().copied().max().unwrap_or(0);
    let mut conf_rank = vec![usize::MAX; max_node + 1];
    for (pos, &node) in confidence.iter().enumerate() {
        conf_rank[node] = pos + 1;
    }
    let mut scored: Vec<(f64, usize, usize)> = geometric
        .iter()
        .enumerate()
        .map(|(pos, &node)| {
            let geo_rank = pos + 1;
            let cr = conf_rank[node];
            if cr == usize::MAX {
                return Err(Error::Contract(format!(
                    "node {node} missing from the confidence ranking"
                )));
            }
            Ok((w_geo * geo_rank as f64 + w_conf * cr as f64, geo_rank, node))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    Ok(scored.into_iter().map(|(_, _, node)| node).collect())
}

/// Geometric-imbalance screen: keep nodes with `GI ≥ γ`, preserving order.
/// Disabled mode is the identity.
pub fn gi_filter(list: &[usize], gi_of: impl Fn(usize) -> f64, gamma: f64, enabled: bool) -> Vec<usize> {
    if !enabled {
        return list.to_vec();
    }
    list.iter().copied().filter(|&n| gi_of(n) >= gamma).collect()
}

/// Outcome of one selection round for one class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassSelection {
    pub class: usize,
    pub rbo: f64,
    pub n_candidates: usize,
    pub n_after_dgin: usize,
    pub selected: Vec<usize>,
}

/// Apply ranking mode, the GI screen, eligibility, and the per-class cap.
///
/// `class_counts` is the current training distribution; under
/// `minority_only` only classes strictly below the maximum count are
/// eligible. Nodes listed in `already_selected` are never re-emitted.
pub fn select_round(
    pool: &CandidatePool,
    cfg: &SelectionConfig,
    class_counts: &[usize],
    already_selected: &[bool],
) -> Vec<ClassSelection> {
    let max_count = class_counts.iter().copied().max().unwrap_or(0);
    pool.classes
        .iter()
        .enumerate()
        .map(|(class, cp)| {
            let ranked: &[usize] = match cfg.ranking_mode {
                RankingMode::Confidence => &cp.confidence,
                RankingMode::Geometric => &cp.geometric,
                RankingMode::Fused => &cp.fused,
            };
            let gi_of = |node: usize| {
                cp.candidates[cp
                    .candidates
                    .binary_search_by(|c| c.node.cmp(&node))
                    .expect("ranked node is in the pool")]
                .gi
            };
            let filtered = gi_filter(ranked, gi_of, cfg.gamma, cfg.dgin_enabled);
            let eligible = !cfg.minority_only || class_counts[class] < max_count;
            let cap = if eligible { cfg.alpha } else { 0 };
            let selected: Vec<usize> = filtered
                .iter()
                .copied()
                .filter(|&n| !already_selected[n])
                .take(cap)
                .collect();
            ClassSelection {
                class,
                rbo: cp.rbo,
                n_candidates: cp.candidates.len(),
                n_after_dgin: filtered.len(),
                selected,
            }
        })
        .collect()
}
