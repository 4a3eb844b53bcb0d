//! Full runs: the iterative retrieval loop, plain self-training, and the
//! single-shot baselines, with a JSON-lines journal per run.
//!
//! A run owns its round loop. Every round retrains the backbone on the
//! current (partly pseudo-labeled) training set, snapshots embeddings and
//! predictions, builds the candidate pool, and admits the survivors. The
//! journal records per-round split sizes, additions, per-class ranking
//! agreement, metrics, and audit fields; the summary line carries the
//! final test metrics and the fully-resolved configuration.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cluster::{assign_cluster_labels, class_centers, kmeans};
use crate::error::{Error, Result};
use crate::gcn::{train_with_labels, FeatureOps, Inputs, Model, ModelConfig};
use crate::graph::{normalize_adjacency, Graph};
use crate::linalg::Mat;
use crate::metrics::{evaluate, EvalResult};
use crate::rng::seeds;
use crate::select::{build_pool, dpam, select_round, ClassSelection, SelectionConfig};
use crate::split::Split;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    Reweight,
    SelfTraining,
    Unreal,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Vanilla => "vanilla",
            Method::Reweight => "reweight",
            Method::SelfTraining => "self_training",
            Method::Unreal => "unreal",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainPolicy {
    FreshInit,
    WarmStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalModel {
    /// Report the round whose model scored best on validation.
    BestValRound,
    LastRound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    /// Rounds of node selection for the iterative methods.
    pub rounds: usize,
    pub model: ModelConfig,
    pub selection: SelectionConfig,
    /// Cluster count for the embedding k-means.
    pub k_prime: usize,
    pub retrain_policy: RetrainPolicy,
    /// Epoch budget for the first round and the later rounds.
    pub first_round_epochs: usize,
    pub later_round_epochs: usize,
    pub final_model: FinalModel,
    /// L2-normalize embeddings before the clustering/ranking geometry.
    pub normalize_embeddings: bool,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    /// Dataset preprocessing applied by the loader; echoed here so the
    /// journal captures the full recipe.
    pub row_normalize_features: bool,
    /// Master seed; component streams derive from it by fixed tags.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Unreal,
            rounds: 40,
            model: ModelConfig::default(),
            selection: SelectionConfig::default(),
            k_prime: 300,
            retrain_policy: RetrainPolicy::FreshInit,
            first_round_epochs: 200,
            later_round_epochs: 2000,
            final_model: FinalModel::BestValRound,
            normalize_embeddings: false,
            kmeans_max_iters: 100,
            kmeans_tol: 1e-4,
            row_normalize_features: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Reduced budget for CI-scale runs; the full-budget default
    /// reproduces the reference protocol.
    pub fn ci_budget(mut self) -> Self {
        self.rounds = 10;
        self.later_round_epochs = 500;
        self.model.patience = 100;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
}

impl From<&EvalResult> for MetricPair {
    fn from(r: &EvalResult) -> Self {
        MetricPair {
            balanced_accuracy: r.balanced_accuracy,
            macro_f1: r.macro_f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddedNode {
    pub id: usize,
    pub class: usize,
}

/// Per-round, per-class audit line (also emitted to the audit stream).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAudit {
    pub round: usize,
    pub class: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rbo: Option<f64>,
    pub n_candidates: usize,
    pub n_after_dgin: usize,
    pub n_selected: usize,
    pub selected_ids: Vec<usize>,
    /// Present only when ground truth is available for auditing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_label_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub train_counts: Vec<usize>,
    pub epochs_run: usize,
    pub best_val_acc: f64,
    pub lr_final: f64,
    pub val: MetricPair,
    pub test: MetricPair,
    pub added: Vec<AddedNode>,
    pub per_class: Vec<ClassAudit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dpam_in_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dpam_out_accuracy: Option<f64>,
    pub early_exit: bool,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub dataset: String,
    pub rho: f64,
    pub config: RunConfig,
    pub rounds_executed: usize,
    pub final_round: usize,
    pub final_val_acc: f64,
    pub test: EvalResult,
    pub train_size_final: usize,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rounds: Vec<RoundRecord>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn final_test(&self) -> &EvalResult {
        &self.summary.test
    }
}

/// Execute a run according to `cfg.method`.
pub fn run(g: &Graph, split: &Split, cfg: &RunConfig, dataset: &str) -> Result<RunRecord> {
    run_with_sink(g, split, cfg, dataset, &mut |_| Ok(()))
}

/// Like [`run`], but streams the journal to `path` as rounds complete, so
/// an aborted run leaves every finished round flushed on disk. The
/// summary line lands after the last round; the file is byte-identical
/// to [`write_run_record`] output.
pub fn run_journaled(
    g: &Graph,
    split: &Split,
    cfg: &RunConfig,
    dataset: &str,
    path: &Path,
) -> Result<RunRecord> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let record = run_with_sink(g, split, cfg, dataset, &mut |round| {
        let line = serde_json::to_string(&JournalLine::Round(round.clone()))
            .map_err(|e| Error::Schema(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))
    })?;
    let line = serde_json::to_string(&JournalLine::Summary(record.summary.clone()))
        .map_err(|e| Error::Schema(e.to_string()))?;
    writeln!(writer, "{line}").map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(record)
}

fn run_with_sink(
    g: &Graph,
    split: &Split,
    cfg: &RunConfig,
    dataset: &str,
    sink: &mut dyn FnMut(&RoundRecord) -> Result<()>,
) -> Result<RunRecord> {
    cfg.selection.validate()?;
    cfg.model.validate()?;
    match cfg.method {
        Method::Vanilla | Method::Reweight => run_baseline_impl(g, split, cfg, dataset, sink),
        Method::SelfTraining | Method::Unreal => run_iterative(g, split, cfg, dataset, sink),
    }
}

fn evaluate_snapshot(
    predicted: &[usize],
    g: &Graph,
    mask: &[usize],
) -> Result<EvalResult> {
    evaluate(predicted, &g.labels, mask, g.k)
}

/// Single training run: vanilla cross-entropy or inverse-frequency
/// re-weighting.
pub fn run_baseline(g: &Graph, split: &Split, cfg: &RunConfig, dataset: &str) -> Result<RunRecord> {
    run_baseline_impl(g, split, cfg, dataset, &mut |_| Ok(()))
}

fn run_baseline_impl(
    g: &Graph,
    split: &Split,
    cfg: &RunConfig,
    dataset: &str,
    sink: &mut dyn FnMut(&RoundRecord) -> Result<()>,
) -> Result<RunRecord> {
    let started = Instant::now();
    let adj = normalize_adjacency(g);
    let features = FeatureOps::new(g);
    let mut model_cfg = cfg.model.clone();
    model_cfg.seed = cfg.seed ^ seeds::MODEL_INIT;
    model_cfg.class_weight_mode = match cfg.method {
        Method::Reweight => crate::gcn::ClassWeightMode::InverseFrequency,
        _ => crate::gcn::ClassWeightMode::None,
    };
    let (model, trace) = train_with_labels(g, &adj, &features, split, &g.labels, &model_cfg)?;
    let inputs = Inputs {
        graph: g,
        adj: &adj,
        features: &features,
    };
    let snapshot = model.predict(&inputs)?;
    let val = evaluate_snapshot(&snapshot.predicted, g, &split.val_ids)?;
    let test = evaluate_snapshot(&snapshot.predicted, g, &split.test_ids)?;

    let round = RoundRecord {
        round: 0,
        train_counts: split.per_class_train_counts.clone(),
        epochs_run: trace.epochs.len(),
        best_val_acc: trace.best_val_acc,
        lr_final: trace.lr_final,
        val: MetricPair::from(&val),
        test: MetricPair::from(&test),
        added: Vec::new(),
        per_class: Vec::new(),
        dpam_in_accuracy: None,
        dpam_out_accuracy: None,
        early_exit: false,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    sink(&round)?;
    Ok(RunRecord {
        summary: RunSummary {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.to_string(),
            rho: split.rho,
            config: cfg.clone(),
            rounds_executed: 1,
            final_round: 0,
            final_val_acc: trace.best_val_acc,
            test,
            train_size_final: split.train_ids.len(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
        rounds: vec![round],
    })
}

/// L2-normalize matrix rows (zero rows untouched).
fn l2_normalize_rows(m: &Mat) -> Mat {
    let mut out = m.clone();
    for i in 0..out.rows {
        let row = out.row_mut(i);
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    out
}

struct RoundOutcome {
    selections: Vec<ClassSelection>,
    dpam_in_accuracy: Option<f64>,
    dpam_out_accuracy: Option<f64>,
    has_rbo: bool,
}

/// Iterative methods: the full retrieval loop or plain self-training.
fn run_iterative(
    g: &Graph,
    split: &Split,
    cfg: &RunConfig,
    dataset: &str,
    sink: &mut dyn FnMut(&RoundRecord) -> Result<()>,
) -> Result<RunRecord> {
    if cfg.rounds == 0 {
        return Err(Error::Config("iterative methods need rounds >= 1".into()));
    }
    let run_started = Instant::now();
    let adj = normalize_adjacency(g);
    let features = FeatureOps::new(g);
    let inputs = Inputs {
        graph: g,
        adj: &adj,
        features: &features,
    };

    // Labels seen by the trainer: ground truth on the original split,
    // pseudo-labels on admitted nodes.
    let mut train_labels = g.labels.clone();
    let mut current = split.clone();
    let mut in_train = vec![false; g.n];
    for &id in &current.train_ids {
        in_train[id] = true;
    }
    // Validation nodes stay out of the selectable pool: a node must not
    // drive early stopping and carry a pseudo-label at the same time.
    let mut excluded = in_train.clone();
    for &id in &current.val_ids {
        excluded[id] = true;
    }
    let mut ever_selected = vec![false; g.n];

    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut warm_model: Option<Model> = None;
    let mut best: Option<(usize, f64, EvalResult, usize)> = None; // round, val acc, test, train size

    for round in 0..cfg.rounds {
        let round_started = Instant::now();
        let mut model_cfg = cfg.model.clone();
        model_cfg.max_epochs = if round == 0 {
            cfg.first_round_epochs
        } else {
            cfg.later_round_epochs
        };
        model_cfg.seed = seeds::per_round(cfg.seed, seeds::MODEL_INIT, round);

        let (model, trace) = match (cfg.retrain_policy, warm_model.take()) {
            (RetrainPolicy::WarmStart, Some(mut m)) => {
                m.cfg.max_epochs = model_cfg.max_epochs;
                let trace = crate::gcn::fit(&mut m, g, &adj, &features, &current, &train_labels)?;
                (m, trace)
            }
            _ => train_with_labels(g, &adj, &features, &current, &train_labels, &model_cfg)?,
        };

        let snapshot = model.predict(&inputs)?;
        let val_metrics = evaluate_snapshot(&snapshot.predicted, g, &current.val_ids)?;
        let test_metrics = evaluate_snapshot(&snapshot.predicted, g, &current.test_ids)?;
        let train_counts = current_train_counts(&current, &train_labels, g.k);

        let unlabeled: Vec<usize> = (0..g.n).filter(|&v| !excluded[v]).collect();
        let outcome = match cfg.method {
            Method::Unreal => unreal_select(
                g,
                cfg,
                round,
                &snapshot.embeddings,
                &snapshot.confidence,
                &snapshot.predicted,
                &current,
                &train_labels,
                &unlabeled,
                &train_counts,
                &ever_selected,
            )?,
            Method::SelfTraining => self_training_select(
                g,
                cfg,
                &snapshot.confidence,
                &snapshot.predicted,
                &unlabeled,
                &train_counts,
                &ever_selected,
            ),
            _ => unreachable!(),
        };

        // Admit the survivors.
        let mut added = Vec::new();
        for sel in &outcome.selections {
            for &node in &sel.selected {
                added.push(AddedNode {
                    id: node,
                    class: sel.class,
                });
                train_labels[node] = sel.class;
                in_train[node] = true;
                excluded[node] = true;
                ever_selected[node] = true;
                current.train_ids.push(node);
            }
        }
        current.train_ids.sort_unstable();

        let per_class: Vec<ClassAudit> = outcome
            .selections
            .iter()
            .map(|sel| ClassAudit {
                round,
                class: sel.class,
                rbo: if outcome.has_rbo { Some(sel.rbo) } else { None },
                n_candidates: sel.n_candidates,
                n_after_dgin: sel.n_after_dgin,
                n_selected: sel.selected.len(),
                selected_ids: sel.selected.clone(),
                pseudo_label_accuracy: pseudo_accuracy(&sel.selected, sel.class, g),
            })
            .collect();

        let early_exit = added.is_empty() && round + 1 < cfg.rounds;
        let record = RoundRecord {
            round,
            train_counts,
            epochs_run: trace.epochs.len(),
            best_val_acc: trace.best_val_acc,
            lr_final: trace.lr_final,
            val: MetricPair::from(&val_metrics),
            test: MetricPair::from(&test_metrics),
            added,
            per_class,
            dpam_in_accuracy: outcome.dpam_in_accuracy,
            dpam_out_accuracy: outcome.dpam_out_accuracy,
            early_exit,
            wall_clock_secs: round_started.elapsed().as_secs_f64(),
        };
        sink(&record)?;
        rounds.push(record);

        let train_size_at_round = current.train_ids.len();
        let is_better = match (&best, cfg.final_model) {
            (None, _) => true,
            (Some((_, best_acc, _, _)), FinalModel::BestValRound) => {
                trace.best_val_acc >= *best_acc
            }
            (_, FinalModel::LastRound) => true,
        };
        if is_better {
            best = Some((
                round,
                trace.best_val_acc,
                test_metrics.clone(),
                train_size_at_round,
            ));
        }

        if cfg.retrain_policy == RetrainPolicy::WarmStart {
            warm_model = Some(model);
        }
        if early_exit {
            break;
        }
    }

    let (final_round, final_val_acc, test, train_size_final) = best.expect("rounds >= 1");
    Ok(RunRecord {
        summary: RunSummary {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.to_string(),
            rho: split.rho,
            config: cfg.clone(),
            rounds_executed: rounds.len(),
            final_round,
            final_val_acc,
            test,
            train_size_final,
            wall_clock_secs: run_started.elapsed().as_secs_f64(),
        },
        rounds,
    })
}

fn current_train_counts(split: &Split, labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0usize; k];
    for &id in &split.train_ids {
        counts[labels[id]] += 1;
    }
    counts
}

fn pseudo_accuracy(selected: &[usize], class: usize, g: &Graph) -> Option<f64> {
    if selected.is_empty() {
        return None;
    }
    let correct = selected.iter().filter(|&&id| g.labels[id] == class).count();
    Some(correct as f64 / selected.len() as f64)
}

#[allow(clippy::too_many_arguments)]
fn unreal_select(
    g: &Graph,
    cfg: &RunConfig,
    round: usize,
    embeddings: &Mat,
    confidence: &[f64],
    predicted: &[usize],
    current: &Split,
    train_labels: &[usize],
    unlabeled: &[usize],
    train_counts: &[usize],
    ever_selected: &[bool],
) -> Result<RoundOutcome> {
    let geometry = if cfg.normalize_embeddings {
        l2_normalize_rows(embeddings)
    } else {
        embeddings.clone()
    };

    // Cluster the unlabeled embeddings.
    let h_u = Mat::from_rows(unlabeled.iter().map(|&v| geometry.row(v).to_vec()).collect());
    let k_prime = cfg.k_prime.min(h_u.rows);
    if k_prime == 0 {
        return Ok(RoundOutcome {
            selections: Vec::new(),
            dpam_in_accuracy: None,
            dpam_out_accuracy: None,
            has_rbo: true,
        });
    }
    let clustering = kmeans(
        &h_u,
        k_prime,
        seeds::per_round(cfg.seed, seeds::KMEANS, round),
        cfg.kmeans_max_iters,
        cfg.kmeans_tol,
    )?;

    // Class centers over the current training set.
    let h_l = Mat::from_rows(
        current
            .train_ids
            .iter()
            .map(|&v| geometry.row(v).to_vec())
            .collect(),
    );
    let l_labels: Vec<usize> = current.train_ids.iter().map(|&v| train_labels[v]).collect();
    let centers = class_centers(&h_l, &l_labels, g.k)?;

    let cluster_class = assign_cluster_labels(&clustering, &centers);
    let node_cluster_label: Vec<usize> = clustering
        .assignment
        .iter()
        .map(|&c| cluster_class[c])
        .collect();
    let node_predicted: Vec<usize> = unlabeled.iter().map(|&v| predicted[v]).collect();

    let aligned = dpam(unlabeled, &node_cluster_label, &node_predicted, g.k);

    // Audit: classifier pseudo-label accuracy inside and outside the
    // aligned set (ground truth is available in this artifact's datasets).
    let mut aligned_mark = vec![false; g.n];
    for nodes in &aligned {
        for &v in nodes {
            aligned_mark[v] = true;
        }
    }
    let (mut in_total, mut in_ok, mut out_total, mut out_ok) = (0usize, 0usize, 0usize, 0usize);
    for (i, &v) in unlabeled.iter().enumerate() {
        let correct = node_predicted[i] == g.labels[v];
        if aligned_mark[v] {
            in_total += 1;
            in_ok += correct as usize;
        } else {
            out_total += 1;
            out_ok += correct as usize;
        }
    }

    let pool = build_pool(&aligned, &geometry, confidence, &centers, cfg.selection.rbo_p)?;
    let selections = select_round(&pool, &cfg.selection, train_counts, ever_selected);
    Ok(RoundOutcome {
        selections,
        dpam_in_accuracy: (in_total > 0).then(|| in_ok as f64 / in_total as f64),
        dpam_out_accuracy: (out_total > 0).then(|| out_ok as f64 / out_total as f64),
        has_rbo: true,
    })
}

/// Plain self-training: per class, the top-confidence unlabeled nodes the
/// classifier assigns to that class. No clustering, no alignment, no
/// geometric screen.
fn self_training_select(
    g: &Graph,
    cfg: &RunConfig,
    confidence: &[f64],
    predicted: &[usize],
    unlabeled: &[usize],
    train_counts: &[usize],
    ever_selected: &[bool],
) -> RoundOutcome {
    let max_count = train_counts.iter().copied().max().unwrap_or(0);
    let mut selections = Vec::with_capacity(g.k);
    for class in 0..g.k {
        let mut candidates: Vec<usize> = unlabeled
            .iter()
            .copied()
            .filter(|&v| predicted[v] == class && !ever_selected[v])
            .collect();
        candidates.sort_by(|&a, &b| {
            confidence[b]
                .partial_cmp(&confidence[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let eligible = !cfg.selection.minority_only || train_counts[class] < max_count;
        let cap = if eligible { cfg.selection.alpha } else { 0 };
        let selected: Vec<usize> = candidates.into_iter().take(cap).collect();
        selections.push(ClassSelection {
            class,
            rbo: 0.0,
            n_candidates: selected.len().max(
                unlabeled
                    .iter()
                    .filter(|&&v| predicted[v] == class)
                    .count(),
            ),
            n_after_dgin: 0,
            selected,
        });
    }
    RoundOutcome {
        selections,
        dpam_in_accuracy: None,
        dpam_out_accuracy: None,
        has_rbo: false,
    }
}

// --- audits -----------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditGroup {
    pub examined: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditTable {
    /// Accuracy over the first `top_n` nodes added to minority classes.
    pub minority: AuditGroup,
    /// Same for majority classes.
    pub majority: AuditGroup,
    /// True when fewer than `top_n` additions were available.
    pub truncated: bool,
    /// Per-round classifier accuracy inside/outside the aligned set.
    pub dpam_rounds: Vec<(usize, Option<f64>, Option<f64>)>,
}

/// Pseudo-label accuracy of the first `top_n` nodes added to minority and
/// majority classes (chronological order of addition). Minority status is
/// taken from the round-0 training distribution.
pub fn audit_pseudo_labels(record: &RunRecord, g: &Graph, top_n: usize) -> Result<AuditTable> {
    let first = record
        .rounds
        .first()
        .ok_or_else(|| Error::Contract("record has no rounds".into()))?;
    let max_count = first.train_counts.iter().copied().max().unwrap_or(0);
    let minority_class: Vec<bool> = first
        .train_counts
        .iter()
        .map(|&c| c < max_count)
        .collect();

    let mut minority = Vec::new();
    let mut majority = Vec::new();
    for round in &record.rounds {
        for add in &round.added {
            if minority_class[add.class] {
                minority.push(add);
            } else {
                majority.push(add);
            }
        }
    }
    let truncated = minority.len() < top_n || majority.len() < top_n;
    let grade = |nodes: &[&AddedNode]| {
        let take = nodes.len().min(top_n);
        let correct = nodes[..take]
            .iter()
            .filter(|a| g.labels[a.id] == a.class)
            .count();
        AuditGroup {
            examined: take,
            correct,
            accuracy: if take > 0 {
                correct as f64 / take as f64
            } else {
                0.0
            },
        }
    };
    Ok(AuditTable {
        minority: grade(&minority.iter().copied().collect::<Vec<_>>()),
        majority: grade(&majority.iter().copied().collect::<Vec<_>>()),
        truncated,
        dpam_rounds: record
            .rounds
            .iter()
            .map(|r| (r.round, r.dpam_in_accuracy, r.dpam_out_accuracy))
            .collect(),
    })
}

// --- journal I/O -------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum JournalLine {
    Round(RoundRecord),
    Summary(RunSummary),
}

/// Write the run journal: one JSON object per round, then the summary.
pub fn write_run_record(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for round in &record.rounds {
        let line = serde_json::to_string(&JournalLine::Round(round.clone()))
            .map_err(|e| Error::Schema(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    let line = serde_json::to_string(&JournalLine::Summary(record.summary.clone()))
        .map_err(|e| Error::Schema(e.to_string()))?;
    writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_run_record(path: &Path) -> Result<RunRecord> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rounds = Vec::new();
    let mut summary = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JournalLine = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        match parsed {
            JournalLine::Round(r) => rounds.push(r),
            JournalLine::Summary(s) => summary = Some(s),
        }
    }
    let summary = summary
        .ok_or_else(|| Error::Schema(format!("{}: journal has no summary line", path.display())))?;
    if summary.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "{}: schema_version {} (this build reads {})",
            path.display(),
            summary.schema_version,
            SCHEMA_VERSION
        )));
    }
    Ok(RunRecord { rounds, summary })
}

/// Write the per-round per-class audit stream.
pub fn write_audit_stream(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for round in &record.rounds {
        for audit in &round.per_class {
            let line = serde_json::to_string(audit).map_err(|e| Error::Schema(e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Normalize away wall-clock fields so two journals can be compared
/// byte-for-byte on everything else.
pub fn journal_without_wall_clock(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("wall_clock_secs");
        }
        out.push(value.to_string());
    }
    Ok(out)
}
