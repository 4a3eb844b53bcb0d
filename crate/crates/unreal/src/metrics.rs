//! Confusion-matrix metrics: balanced accuracy and macro-F1, plus
//! seed-aggregation into mean ± standard error.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalResult {
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    /// Row = true class, column = predicted class.
    pub confusion: Vec<Vec<usize>>,
    /// Classes with no true instance in the mask; their recall counts as 0.
    pub absent_classes: Vec<usize>,
}

/// Metrics over `mask`, derived entirely from the k×k confusion matrix.
pub fn evaluate(predicted: &[usize], truth: &[usize], mask: &[usize], k: usize) -> Result<EvalResult> {
    if mask.is_empty() {
        return Err(Error::Contract("evaluate: empty mask".into()));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for &id in mask {
        let t = truth[id];
        let p = predicted[id];
        if t >= k || p >= k {
            return Err(Error::Bounds { id: t.max(p), n: k });
        }
        confusion[t][p] += 1;
    }

    let mut per_class_recall = vec![0.0; k];
    let mut per_class_f1 = vec![0.0; k];
    let mut absent_classes = Vec::new();
    for c in 0..k {
        let tp = confusion[c][c] as f64;
        let truths: usize = confusion[c].iter().sum();
        let preds: usize = (0..k).map(|t| confusion[t][c]).sum();
        if truths == 0 {
            absent_classes.push(c);
        } else {
            per_class_recall[c] = tp / truths as f64;
        }
        let precision = if preds > 0 { tp / preds as f64 } else { 0.0 };
        let recall = per_class_recall[c];
        per_class_f1[c] = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }

    Ok(EvalResult {
        balanced_accuracy: per_class_recall.iter().sum::<f64>() / k as f64,
        macro_f1: per_class_f1.iter().sum::<f64>() / k as f64,
        per_class_recall,
        per_class_f1,
        confusion,
        absent_classes,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub balanced_accuracy_mean: f64,
    pub balanced_accuracy_stderr: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_stderr: f64,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

/// Mean ± standard error (sample standard deviation over √n) per metric.
pub fn aggregate(results: &[EvalResult]) -> Result<Aggregate> {
    if results.is_empty() {
        return Err(Error::Contract("aggregate: no results".into()));
    }
    let bacc: Vec<f64> = results.iter().map(|r| r.balanced_accuracy).collect();
    let f1: Vec<f64> = results.iter().map(|r| r.macro_f1).collect();
    let (bm, bs) = mean_stderr(&bacc);
    let (fm, fs) = mean_stderr(&f1);
    Ok(Aggregate {
        n: results.len(),
        balanced_accuracy_mean: bm,
        balanced_accuracy_stderr: bs,
        macro_f1_mean: fm,
        macro_f1_stderr: fs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn perfect_predictions() {
        let truth = vec![0, 1, 2, 0];
        let mask = vec![0, 1, 2, 3];
        let r = evaluate(&truth, &truth, &mask, 3).unwrap();
        assert_eq!(r.balanced_accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn hand_counted_two_class_case() {
        // truth (0,0,1), pred (0,1,1) → recalls (0.5, 1.0), bAcc 0.75.
        let r = evaluate(&[0, 1, 1], &[0, 0, 1], &[0, 1, 2], 2).unwrap();
        assert_eq!(r.per_class_recall, vec![0.5, 1.0]);
        assert!((r.balanced_accuracy - 0.75).abs() < 1e-12);
        // Confusion row sums equal true counts.
        assert_eq!(r.confusion[0].iter().sum::<usize>(), 2);
        assert_eq!(r.confusion[1].iter().sum::<usize>(), 1);
    }

    #[test]
    fn absent_class_recall_zero_and_flagged() {
        let r = evaluate(&[0, 0], &[0, 0], &[0, 1], 2).unwrap();
        assert_eq!(r.absent_classes, vec![1]);
        assert_eq!(r.per_class_recall[1], 0.0);
    }

    #[test]
    fn matches_brute_force_tally_on_random_case() {
        let mut rng = Rng::new(21);
        let n = 100;
        let k = 5;
        let truth: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let predicted: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let mask: Vec<usize> = (0..n).collect();
        let r = evaluate(&predicted, &truth, &mask, k).unwrap();

        // Independent per-class tally.
        for c in 0..k {
            let tp = mask
                .iter()
                .filter(|&&i| truth[i] == c && predicted[i] == c)
                .count() as f64;
            let fn_ = mask
                .iter()
                .filter(|&&i| truth[i] == c && predicted[i] != c)
                .count() as f64;
            let fp = mask
                .iter()
                .filter(|&&i| truth[i] != c && predicted[i] == c)
                .count() as f64;
            let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            assert!((r.per_class_recall[c] - recall).abs() < 1e-12);
            assert!((r.per_class_f1[c] - f1).abs() < 1e-12);
        }
        let total: usize = r.confusion.iter().flatten().sum();
        assert_eq!(total, mask.len());
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = Rng::new(4);
        let n = 40;
        let truth: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let predicted: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let mut mask: Vec<usize> = (0..n).collect();
        let a = evaluate(&predicted, &truth, &mask, 3).unwrap();
        rng.shuffle(&mut mask);
        let b = evaluate(&predicted, &truth, &mask, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bacc_equals_accuracy_on_uniform_truth() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let predicted = vec![0, 1, 1, 1, 0, 2];
        let mask: Vec<usize> = (0..6).collect();
        let r = evaluate(&predicted, &truth, &mask, 3).unwrap();
        let plain_acc = mask
            .iter()
            .filter(|&&i| predicted[i] == truth[i])
            .count() as f64
            / mask.len() as f64;
        assert!((r.balanced_accuracy - plain_acc).abs() < 1e-12);
    }

    #[test]
    fn aggregate_mean_and_stderr() {
        let mk = |v: f64| EvalResult {
            balanced_accuracy: v,
            macro_f1: v,
            per_class_recall: vec![],
            per_class_f1: vec![],
            confusion: vec![],
            absent_classes: vec![],
        };
        let single = aggregate(&[mk(0.5)]).unwrap();
        assert_eq!(single.balanced_accuracy_stderr, 0.0);

        // (0.6, 0.8): mean 0.7, sample std 0.1414…, stderr 0.1.
        let two = aggregate(&[mk(0.6), mk(0.8)]).unwrap();
        assert!((two.macro_f1_mean - 0.7).abs() < 1e-12);
        assert!((two.macro_f1_stderr - 0.1).abs() < 1e-12);

        let same = aggregate(&vec![mk(0.4); 5]).unwrap();
        assert_eq!(same.macro_f1_stderr, 0.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert!(evaluate(&[0], &[0], &[], 1).is_err());
    }
}
