//! Vanilla k-means over unlabeled-node embeddings, labeled-class centers,
//! and cluster→class pseudo-labeling.
//!
//! Lloyd iterations with k-means++ seeding. Everything is Euclidean: the
//! same metric drives clustering, cluster labeling, candidate ranking,
//! and the geometric-imbalance screen downstream.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{euclidean, sq_dist, Mat};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct Clustering {
    pub k_prime: usize,
    /// Cluster id per input row.
    pub assignment: Vec<usize>,
    /// `k' × d` centers; stale centers of empty clusters are retained.
    pub centers: Mat,
    /// Total within-cluster squared distance.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Clusters that ended with no members.
    pub empty_clusters: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ClassCenters {
    /// `k × d` per-class means of labeled embeddings.
    pub centers: Mat,
    pub counts: Vec<usize>,
}

/// Seeded k-means++ initialization followed by Lloyd iterations.
///
/// Stops when the largest center shift drops below `tol` or after
/// `max_iters`. Empty clusters are re-seeded to the point farthest from
/// its assigned center.
pub fn kmeans(points: &Mat, k_prime: usize, seed: u64, max_iters: usize, tol: f64) -> Result<Clustering> {
    if k_prime == 0 || k_prime > points.rows {
        return Err(Error::Capacity {
            class: k_prime,
            message: format!(
                "k' = {k_prime} clusters requested over {} points",
                points.rows
            ),
        });
    }
    let centers = kmeans_pp_init(points, k_prime, seed);
    lloyd(points, centers, max_iters, tol)
}

fn kmeans_pp_init(points: &Mat, k_prime: usize, seed: u64) -> Mat {
    let mut rng = Rng::new(seed);
    let n = points.rows;
    let d = points.cols;
    let mut centers = Mat::zeros(k_prime, d);
    let first = rng.below(n);
    centers.row_mut(0).copy_from_slice(points.row(first));

    let mut best_sq = vec![f64::INFINITY; n];
    for c in 1..k_prime {
        let prev = centers.row(c - 1).to_vec();
        for i in 0..n {
            let d2 = sq_dist(points.row(i), &prev);
            if d2 < best_sq[i] {
                best_sq[i] = d2;
            }
        }
        let chosen = rng.choose_weighted(&best_sq);
        centers.row_mut(c).copy_from_slice(points.row(chosen));
    }
    centers
}

/// Nearest-center assignment (ties toward the lowest cluster id) with
/// empty clusters re-seeded to the current worst-fit point. Mutates the
/// re-seeded centers so the returned assignment always matches `centers`.
fn assign_and_fix(
    points: &Mat,
    centers: &mut Mat,
    assignment: &mut [usize],
) -> (Vec<usize>, Vec<f64>) {
    let n = points.rows;
    let k_prime = centers.rows;
    let dists: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = points.row(i);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for c in 0..k_prime {
                let d2 = sq_dist(p, centers.row(c));
                if d2 < best_d {
                    best_d = d2;
                    best = c;
                }
            }
            (best, best_d)
        })
        .collect();
    let mut counts = vec![0usize; k_prime];
    for (i, &(c, _)) in dists.iter().enumerate() {
        assignment[i] = c;
        counts[c] += 1;
    }
    let mut point_sq: Vec<f64> = dists.iter().map(|&(_, d2)| d2).collect();

    for c in 0..k_prime {
        if counts[c] > 0 {
            continue;
        }
        let mut worst = None;
        let mut worst_d = f64::NEG_INFINITY;
        for i in 0..n {
            if counts[assignment[i]] > 1 && point_sq[i] > worst_d {
                worst_d = point_sq[i];
                worst = Some(i);
            }
        }
        // No donor cluster with more than one member: leave it empty.
        let Some(worst) = worst else { continue };
        counts[assignment[worst]] -= 1;
        counts[c] += 1;
        assignment[worst] = c;
        centers.row_mut(c).copy_from_slice(points.row(worst));
        point_sq[worst] = 0.0;
    }
    (counts, point_sq)
}

/// Lloyd iterations from explicit starting centers. Exposed so callers
/// (and the invariance tests) can pin the initialization.
pub fn lloyd(points: &Mat, mut centers: Mat, max_iters: usize, tol: f64) -> Result<Clustering> {
    let n = points.rows;
    let d = points.cols;
    let k_prime = centers.rows;
    let mut assignment = vec![0usize; n];
    let mut inertia;
    let mut counts;
    let mut iterations_run = 0;

    loop {
        iterations_run += 1;
        let (c, point_sq) = assign_and_fix(points, &mut centers, &mut assignment);
        counts = c;
        inertia = point_sq.iter().sum();
        if iterations_run >= max_iters.max(1) {
            break;
        }

        // Update step: move centers to their members' means, keeping
        // stale centers for clusters the fix-up could not fill.
        let mut new_centers = Mat::zeros(k_prime, d);
        for i in 0..n {
            let crow = new_centers.row_mut(assignment[i]);
            for (s, &v) in crow.iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k_prime {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let crow = new_centers.row_mut(c);
            for v in crow.iter_mut() {
                *v *= inv;
            }
            shift = shift.max(euclidean(crow, centers.row(c)));
        }
        if shift < tol {
            // Converged: the current assignment already matches `centers`.
            break;
        }
        for c in 0..k_prime {
            if counts[c] > 0 {
                centers
                    .row_mut(c)
                    .copy_from_slice(&new_centers.data[c * d..(c + 1) * d]);
            }
        }
    }

    let empty_clusters: Vec<usize> = (0..k_prime).filter(|&c| counts[c] == 0).collect();
    Ok(Clustering {
        k_prime,
        assignment,
        centers,
        inertia,
        iterations_run,
        empty_clusters,
    })
}

/// Exact per-class means of labeled embeddings.
///
/// `rows` and `labels` run in parallel: `rows[i]` is the embedding of a
/// labeled node with class `labels[i]`.
pub fn class_centers(embeddings: &Mat, labels: &[usize], k: usize) -> Result<ClassCenters> {
    if embeddings.rows != labels.len() {
        return Err(Error::Shape(format!(
            "{} embeddings but {} labels",
            embeddings.rows,
            labels.len()
        )));
    }
    let d = embeddings.cols;
    let mut centers = Mat::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &class) in labels.iter().enumerate() {
        counts[class] += 1;
        let crow = centers.row_mut(class);
        for (s, &v) in crow.iter_mut().zip(embeddings.row(i)) {
            *s += v;
        }
    }
    for class in 0..k {
        if counts[class] == 0 {
            return Err(Error::Capacity {
                class,
                message: "no labeled node; cannot form a class center".into(),
            });
        }
        let inv = 1.0 / counts[class] as f64;
        for v in centers.row_mut(class) {
            *v *= inv;
        }
    }
    Ok(ClassCenters { centers, counts })
}

/// Label each cluster with the class whose training-set center is nearest
/// to the cluster center (ties → lowest class index).
pub fn assign_cluster_labels(clustering: &Clustering, class_centers: &ClassCenters) -> Vec<usize> {
    let k = class_centers.centers.rows;
    (0..clustering.k_prime)
        .map(|c| {
            let crow = clustering.centers.row(c);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for class in 0..k {
                let d2 = sq_dist(crow, class_centers.centers.row(class));
                if d2 < best_d {
                    best_d = d2;
                    best = class;
                }
            }
            best
        })
        .collect()
}

/// Recompute inertia from scratch; test support for the invariant that the
/// recorded value matches the assignment.
pub fn recompute_inertia(points: &Mat, clustering: &Clustering) -> f64 {
    let mut total = 0.0;
    for i in 0..points.rows {
        total += sq_dist(points.row(i), clustering.centers.row(clustering.assignment[i]));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_points() -> Mat {
        // Two well-separated 2-D blobs of four points each.
        Mat::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![10.0, 10.0],
            vec![10.0, 11.0],
            vec![11.0, 10.0],
            vec![11.0, 11.0],
        ])
    }

    #[test]
    fn two_blob_recovery() {
        let points = blob_points();
        let cl = kmeans(&points, 2, 1, 100, 1e-6).unwrap();
        // Blob membership: first four together, last four together.
        let a = cl.assignment[0];
        let b = cl.assignment[4];
        assert_ne!(a, b);
        assert!(cl.assignment[..4].iter().all(|&x| x == a));
        assert!(cl.assignment[4..].iter().all(|&x| x == b));
        // Centers land on the blob means.
        let mean_a = [0.5, 0.5];
        let mean_b = [10.5, 10.5];
        let ca = cl.centers.row(a);
        let cb = cl.centers.row(b);
        assert!(euclidean(ca, &mean_a) < 1e-6);
        assert!(euclidean(cb, &mean_b) < 1e-6);
    }

    #[test]
    fn one_point_per_cluster_has_zero_inertia() {
        let points = blob_points();
        let cl = kmeans(&points, points.rows, 3, 50, 1e-6).unwrap();
        assert_eq!(cl.inertia, 0.0);
        let mut seen = cl.assignment.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), points.rows);
    }

    #[test]
    fn single_cluster_center_is_global_mean() {
        let points = Mat::from_rows(vec![vec![1.0], vec![2.0], vec![3.0], vec![6.0]]);
        let cl = kmeans(&points, 1, 9, 50, 1e-9).unwrap();
        assert!((cl.centers.get(0, 0) - 3.0).abs() < 1e-12);
        // Inertia equals the total squared deviation from the mean.
        let want: f64 = [1.0f64, 2.0, 3.0, 6.0]
            .iter()
            .map(|v| (v - 3.0) * (v - 3.0))
            .sum();
        assert!((cl.inertia - want).abs() < 1e-9);
    }

    #[test]
    fn k_prime_larger_than_points_is_capacity_error() {
        let points = Mat::from_rows(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            kmeans(&points, 3, 0, 10, 1e-4),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn recorded_inertia_matches_recomputation() {
        let mut rng = Rng::new(11);
        let points = {
            let mut m = Mat::zeros(60, 3);
            for v in m.data.iter_mut() {
                *v = rng.range_f64(-5.0, 5.0);
            }
            m
        };
        let cl = kmeans(&points, 7, 2, 100, 1e-6).unwrap();
        assert!((cl.inertia - recompute_inertia(&points, &cl)).abs() < 1e-9);
        assert!(cl.assignment.iter().all(|&c| c < cl.k_prime));
    }

    #[test]
    fn permuting_points_with_fixed_centers_permutes_assignment() {
        // Integer coordinates keep the f64 center sums exact, so the
        // comparison is equality, not approximation.
        let points = Mat::from_rows(vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![8.0, 8.0],
            vec![10.0, 8.0],
            vec![8.0, 10.0],
        ]);
        let init = Mat::from_rows(vec![vec![1.0, 1.0], vec![9.0, 9.0]]);
        let a = lloyd(&points, init.clone(), 50, 1e-9).unwrap();

        let perm = [5usize, 3, 4, 1, 0, 2];
        let permuted = Mat::from_rows(perm.iter().map(|&i| points.row(i).to_vec()).collect());
        let b = lloyd(&permuted, init, 50, 1e-9).unwrap();
        for (new_pos, &old_pos) in perm.iter().enumerate() {
            assert_eq!(a.assignment[old_pos], b.assignment[new_pos]);
        }
        assert_eq!(a.centers.data, b.centers.data);
        assert_eq!(a.inertia, b.inertia);
    }

    #[test]
    fn empty_cluster_reseeds_to_worst_fit_point() {
        // Three identical points at the origin and one far away; two of the
        // three initial centers coincide, so one cluster starves.
        let points = Mat::from_rows(vec![
            vec![0.0],
            vec![0.0],
            vec![0.0],
            vec![100.0],
        ]);
        let init = Mat::from_rows(vec![vec![0.0], vec![0.0], vec![50.0]]);
        let cl = lloyd(&points, init, 20, 1e-9).unwrap();
        // All three clusters end non-empty and the far point sits alone.
        assert!(cl.empty_clusters.is_empty());
        let far = cl.assignment[3];
        assert_eq!(cl.assignment.iter().filter(|&&c| c == far).count(), 1);
    }

    #[test]
    fn class_centers_exact_means() {
        let emb = Mat::from_rows(vec![
            vec![0.0, 0.0],
            vec![2.0, 2.0],
            vec![5.0, 7.0],
        ]);
        let cc = class_centers(&emb, &[0, 0, 1], 2).unwrap();
        assert_eq!(cc.centers.row(0), &[1.0, 1.0]);
        assert_eq!(cc.centers.row(1), &[5.0, 7.0]);
        assert_eq!(cc.counts, vec![2, 1]);
    }

    #[test]
    fn class_centers_match_brute_force_on_random_input() {
        let mut rng = Rng::new(31);
        let n = 40;
        let d = 5;
        let k = 4;
        let mut emb = Mat::zeros(n, d);
        for v in emb.data.iter_mut() {
            *v = rng.range_f64(-3.0, 3.0);
        }
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let cc = class_centers(&emb, &labels, k).unwrap();
        for class in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            for j in 0..d {
                let mean: f64 =
                    members.iter().map(|&i| emb.get(i, j)).sum::<f64>() / members.len() as f64;
                assert!((cc.centers.get(class, j) - mean).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn empty_class_is_an_error() {
        let emb = Mat::from_rows(vec![vec![0.0]]);
        let err = class_centers(&emb, &[0], 2).unwrap_err();
        assert!(matches!(err, Error::Capacity { class: 1, .. }));
    }

    #[test]
    fn cluster_labels_nearest_class_and_tie_rule() {
        let class_c = ClassCenters {
            centers: Mat::from_rows(vec![vec![0.0], vec![4.0], vec![10.0], vec![6.0]]),
            counts: vec![1; 4],
        };
        let clustering = Clustering {
            k_prime: 3,
            assignment: vec![],
            // Center 0 coincides with class 2's center; center 1 is
            // equidistant to classes 1 and 3 (at 5.0); center 2 is near 0.
            centers: Mat::from_rows(vec![vec![10.0], vec![5.0], vec![1.0]]),
            inertia: 0.0,
            iterations_run: 0,
            empty_clusters: vec![],
        };
        let labels = assign_cluster_labels(&clustering, &class_c);
        assert_eq!(labels, vec![2, 1, 0]);
    }

    #[test]
    fn cluster_labels_match_exhaustive_distance_table() {
        let mut rng = Rng::new(77);
        let d = 4;
        let k = 3;
        let k_prime = 5;
        let mut class_centers_m = Mat::zeros(k, d);
        for v in class_centers_m.data.iter_mut() {
            *v = rng.range_f64(-2.0, 2.0);
        }
        let mut cluster_centers = Mat::zeros(k_prime, d);
        for v in cluster_centers.data.iter_mut() {
            *v = rng.range_f64(-2.0, 2.0);
        }
        let cc = ClassCenters {
            centers: class_centers_m,
            counts: vec![1; k],
        };
        let clustering = Clustering {
            k_prime,
            assignment: vec![],
            centers: cluster_centers,
            inertia: 0.0,
            iterations_run: 0,
            empty_clusters: vec![],
        };
        let got = assign_cluster_labels(&clustering, &cc);
        for c in 0..k_prime {
            let mut table: Vec<(f64, usize)> = (0..k)
                .map(|class| {
                    (
                        euclidean(clustering.centers.row(c), cc.centers.row(class)),
                        class,
                    )
                })
                .collect();
            table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            assert_eq!(got[c], table[0].1);
        }
    }

    #[test]
    fn lloyd_inertia_is_monotone() {
        // Step through iterations manually by capping max_iters.
        let mut rng = Rng::new(5);
        let mut points = Mat::zeros(80, 2);
        for v in points.data.iter_mut() {
            *v = rng.range_f64(-4.0, 4.0);
        }
        let mut last = f64::INFINITY;
        for iters in 1..12 {
            let cl = kmeans(&points, 6, 17, iters, 0.0).unwrap();
            assert!(cl.inertia <= last + 1e-9, "inertia rose at iter {iters}");
            last = cl.inertia;
        }
    }
}
