//! Command-line front end: split preparation, runs, sweeps, audits, and
//! reports over the library. Exit codes: 0 success, 2 usage/config,
//! 3 runtime/numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use unreal::config::{apply_config_file, apply_key, parse_method, ConfigFile, DatasetPaths};
use unreal::error::Error;
use unreal::graph::{load_graph, row_normalize_features, Graph};
use unreal::pipeline::{
    audit_pseudo_labels, read_run_record, run, run_journaled, write_audit_stream,
    write_run_record, RunConfig, RunRecord,
};
use unreal::report::{emit_report, ReportFormat};
use unreal::rng::seeds;
use unreal::split::{
    make_step_imbalance, read_split, split_stats, subsample_split, write_split, Split,
};

#[derive(Parser)]
#[command(name = "unreal", version, about = "Imbalanced node classification by unlabeled-node retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a step-imbalanced split and print its label distribution.
    PrepareSplit(PrepareSplitArgs),
    /// Execute one run (vanilla, reweight, self-training, or the full
    /// retrieval pipeline) and write its journal.
    Run(RunArgs),
    /// Cartesian-product sweep over a grid in the config file.
    Sweep(SweepArgs),
    /// Pseudo-label audit of a finished run journal.
    Audit(AuditArgs),
    /// Aggregate run journals into a report.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory (edges.tsv, features.bin|csv, labels.txt).
    /// Defaults to $UNREAL_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Skip L1 row normalization of features.
    #[arg(long)]
    no_row_normalize: bool,
}

impl DataArgs {
    fn load(&self) -> Result<(Graph, String), Error> {
        let dir = match &self.data_dir {
            Some(d) => d.clone(),
            None => std::env::var_os("UNREAL_DATA_DIR")
                .map(PathBuf::from)
                .ok_or_else(|| {
                    Error::Config("no --data-dir and UNREAL_DATA_DIR is unset".into())
                })?,
        };
        let paths = DatasetPaths::from_dir(&dir)?;
        let mut g = load_graph(&paths.edges, &paths.features, &paths.labels)?;
        if !self.no_row_normalize {
            row_normalize_features(&mut g);
        }
        Ok((g, paths.name))
    }
}

#[derive(Args)]
struct PrepareSplitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Target imbalance ratio.
    #[arg(long)]
    rho: f64,
    /// Labeled nodes per majority class.
    #[arg(long, default_value_t = 20)]
    majority: usize,
    /// Validation nodes per class.
    #[arg(long, default_value_t = 30)]
    val_per_class: usize,
    /// Proportional sampling fraction instead of step quotas.
    #[arg(long)]
    proportional_fraction: Option<f64>,
    /// Subsample the train section of an existing split file instead of
    /// sampling from the whole graph.
    #[arg(long)]
    from_split_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output split file.
    #[arg(long, default_value = "split.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Config file ([run]/[model]/[selection] sections).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    /// Use an existing split file.
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// Or build a split: target imbalance ratio.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 20)]
    majority: usize,
    #[arg(long, default_value_t = 30)]
    val_per_class: usize,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    kprime: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rbo_p: Option<f64>,
    #[arg(long, value_enum)]
    ranking_mode: Option<RankingModeArg>,
    /// Disable the geometric-imbalance screen.
    #[arg(long)]
    no_dgin: bool,
    /// Add nodes only to classes below the current maximum count.
    #[arg(long)]
    minority_only: bool,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reduced budget (rounds 10, later epochs 500, patience 100).
    #[arg(long)]
    ci_budget: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankingModeArg {
    Confidence,
    Geometric,
    Fused,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Config file; the [sweep] section lists comma-separated grids.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "sweep-out")]
    out_dir: PathBuf,
    /// Worker pool size (defaults to the logical core count).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 20)]
    majority: usize,
    #[arg(long, default_value_t = 30)]
    val_per_class: usize,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Run journal to audit.
    #[arg(long)]
    record: PathBuf,
    /// Examine the first N additions per group.
    #[arg(long, default_value_t = 100)]
    top_n: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Run journals to aggregate.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    #[arg(long, default_value = "report.md")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormatArg::MarkdownTable)]
    format: ReportFormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormatArg {
    Json,
    MarkdownTable,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PrepareSplit(args) => cmd_prepare_split(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numeric { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn print_distribution(split: &Split, g: &Graph) {
    let dist = split_stats(split, g);
    let total: usize = dist.counts.iter().sum();
    println!("class  train  share");
    for (class, &count) in dist.counts.iter().enumerate() {
        println!(
            "{class:>5}  {count:>5}  {:>5.2}%",
            100.0 * count as f64 / total.max(1) as f64
        );
    }
    println!(
        "train {} / val {} / test {}  achieved rho {:.2}",
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len(),
        dist.rho
    );
}

fn cmd_prepare_split(args: PrepareSplitArgs) -> Result<ExitCode, Error> {
    let (g, _) = args.data.load()?;
    let split = match &args.from_split_file {
        Some(path) => {
            let base = read_split(path, &g)?;
            subsample_split(&g, &base, args.rho, args.majority, args.seed ^ seeds::SPLIT)?
        }
        None => make_step_imbalance(
            &g,
            args.rho,
            args.majority,
            args.proportional_fraction,
            args.val_per_class,
            args.seed ^ seeds::SPLIT,
        )?,
    };
    write_split(&split, &args.out)?;
    print_distribution(&split, &g);
    println!("split written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn build_run_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let file = ConfigFile::parse(path)?;
        apply_config_file(&file, &mut cfg)?;
    }
    if args.ci_budget {
        cfg = cfg.ci_budget();
    }
    if let Some(m) = &args.method {
        cfg.method = parse_method(m)?;
    }
    if let Some(v) = args.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = args.alpha {
        cfg.selection.alpha = v;
    }
    if let Some(v) = args.kprime {
        cfg.k_prime = v;
    }
    if let Some(v) = args.gamma {
        cfg.selection.gamma = v;
    }
    if let Some(v) = args.rbo_p {
        apply_key(&mut cfg, "selection.rbo_p", &v.to_string())?;
    }
    if let Some(mode) = args.ranking_mode {
        cfg.selection.ranking_mode = match mode {
            RankingModeArg::Confidence => unreal::select::RankingMode::Confidence,
            RankingModeArg::Geometric => unreal::select::RankingMode::Geometric,
            RankingModeArg::Fused => unreal::select::RankingMode::Fused,
        };
    }
    if args.no_dgin {
        cfg.selection.dgin_enabled = false;
    }
    if args.minority_only {
        cfg.selection.minority_only = true;
    }
    if let Some(v) = args.hidden {
        cfg.model.hidden = v;
    }
    if let Some(v) = args.layers {
        cfg.model.layers = v;
    }
    if let Some(v) = args.lr {
        cfg.model.lr = v;
    }
    if let Some(v) = args.epochs {
        cfg.model.max_epochs = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.row_normalize_features = !args.data.no_row_normalize;
    Ok(cfg)
}

fn resolve_split(args: &RunArgs, g: &Graph, seed: u64) -> Result<Split, Error> {
    match (&args.split_file, args.rho) {
        (Some(path), _) => read_split(path, g),
        (None, Some(rho)) => make_step_imbalance(
            g,
            rho,
            args.majority,
            None,
            args.val_per_class,
            seed ^ seeds::SPLIT,
        ),
        (None, None) => Err(Error::Config(
            "provide --split-file or --rho to define the training split".into(),
        )),
    }
}

fn write_manifest(out_dir: &Path, artifacts: &[String]) -> Result<(), Error> {
    let manifest = serde_json::json!({ "artifacts": artifacts });
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| Error::io(path, e))
}

fn run_outputs(record: &RunRecord, out_dir: &Path, stem: &str) -> Result<Vec<String>, Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let run_path = out_dir.join(format!("{stem}.jsonl"));
    write_run_record(record, &run_path)?;
    let audit_path = out_dir.join(format!("{stem}.audit.jsonl"));
    write_audit_stream(record, &audit_path)?;
    Ok(vec![
        run_path.file_name().unwrap().to_string_lossy().into_owned(),
        audit_path.file_name().unwrap().to_string_lossy().into_owned(),
    ])
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Error> {
    let (g, dataset) = args.data.load()?;
    let cfg = build_run_config(&args)?;
    let split = resolve_split(&args, &g, cfg.seed)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    // Rounds stream to the journal as they finish; an aborted run leaves
    // them flushed on disk.
    let run_path = args.out_dir.join("run.jsonl");
    let record = run_journaled(&g, &split, &cfg, &dataset, &run_path)?;
    let audit_path = args.out_dir.join("run.audit.jsonl");
    write_audit_stream(&record, &audit_path)?;
    let artifacts = vec!["run.jsonl".to_string(), "run.audit.jsonl".to_string()];
    write_manifest(&args.out_dir, &artifacts)?;
    let t = record.final_test();
    println!(
        "{} on {} (rho {:.2}): bAcc {:.2}% F1 {:.2}%  [{} rounds, journal {}]",
        cfg.method,
        dataset,
        split.rho,
        100.0 * t.balanced_accuracy,
        100.0 * t.macro_f1,
        record.summary.rounds_executed,
        args.out_dir.join("run.jsonl").display(),
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_grid(file: &ConfigFile) -> Vec<(String, Vec<String>)> {
    file.keys()
        .filter(|k| k.starts_with("sweep."))
        .map(|k| {
            let values = file
                .get(k)
                .unwrap()
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            (k.trim_start_matches("sweep.").to_string(), values)
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, Error> {
    let (g, dataset) = args.data.load()?;
    let file = ConfigFile::parse(&args.config)?;
    let mut base = RunConfig::default();
    for key in file.keys().filter(|k| !k.starts_with("sweep.")) {
        apply_key(&mut base, key, file.get(key).unwrap())?;
    }
    base.row_normalize_features = !args.data.no_row_normalize;

    let grid = parse_grid(&file);
    if grid.is_empty() || grid.iter().any(|(_, vs)| vs.is_empty()) {
        return Err(Error::Config(
            "sweep config has an empty grid ([sweep] section)".into(),
        ));
    }

    // Cartesian product, deterministic order.
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in &grid {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for value in values {
                let mut c = combo.clone();
                c.push((key.clone(), value.clone()));
                next.push(c);
            }
        }
        combos = next;
    }

    struct Job {
        index: usize,
        cfg: RunConfig,
        rho: Option<f64>,
        label: String,
    }
    let mut jobs = Vec::with_capacity(combos.len());
    for (index, combo) in combos.iter().enumerate() {
        let mut cfg = base.clone();
        let mut rho = None;
        let mut label_parts = Vec::new();
        for (key, value) in combo {
            label_parts.push(format!("{key}={value}"));
            match key.as_str() {
                "rho" => {
                    rho = Some(value.parse::<f64>().map_err(|_| {
                        Error::Config(format!("sweep.rho: bad real `{value}`"))
                    })?)
                }
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| Error::Config(format!("sweep.seed: bad integer `{value}`")))?
                }
                "method" => cfg.method = parse_method(value)?,
                "alpha" => apply_key(&mut cfg, "selection.alpha", value)?,
                "gamma" => apply_key(&mut cfg, "selection.gamma", value)?,
                "rbo_p" => apply_key(&mut cfg, "selection.rbo_p", value)?,
                "k_prime" => apply_key(&mut cfg, "run.k_prime", value)?,
                "rounds" => apply_key(&mut cfg, "run.rounds", value)?,
                other => {
                    return Err(Error::Config(format!(
                        "sweep key `{other}` is not sweepable (use seed, rho, method, alpha, gamma, rbo_p, k_prime, rounds)"
                    )))
                }
            }
        }
        jobs.push(Job {
            index,
            cfg,
            rho,
            label: label_parts.join(","),
        });
    }

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let jobs_n = args.jobs.unwrap_or_else(num_cpus);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs_n.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;

    use rayon::prelude::*;
    let results: Vec<(usize, String, Result<RunRecord, Error>)> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let split = match job.rho {
                    Some(rho) => make_step_imbalance(
                        &g,
                        rho,
                        args.majority,
                        None,
                        args.val_per_class,
                        job.cfg.seed ^ seeds::SPLIT,
                    ),
                    None => Err(Error::Config(
                        "sweep grid must include rho (split definition)".into(),
                    )),
                };
                let record = split.and_then(|s| run(&g, &s, &job.cfg, &dataset));
                (job.index, job.label.clone(), record)
            })
            .collect()
    });

    let mut artifacts = Vec::new();
    let mut journals = Vec::new();
    let mut failures = Vec::new();
    for (index, label, result) in results {
        match result {
            Ok(record) => {
                let stem = format!("run_{index:04}");
                let files = run_outputs(&record, &args.out_dir, &stem)?;
                artifacts.extend(files);
                journals.push(args.out_dir.join(format!("{stem}.jsonl")));
                let t = record.final_test();
                println!(
                    "[{index:04}] {label}: bAcc {:.2}% F1 {:.2}%",
                    100.0 * t.balanced_accuracy,
                    100.0 * t.macro_f1
                );
            }
            Err(err) => {
                println!("[{index:04}] {label}: FAILED: {err}");
                failures.push((index, label, err.to_string()));
            }
        }
    }
    if !failures.is_empty() {
        let path = args.out_dir.join("failures.json");
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&serde_json::json!(failures
                .iter()
                .map(|(i, l, e)| serde_json::json!({"index": i, "label": l, "error": e}))
                .collect::<Vec<_>>()))
            .unwrap(),
        )
        .map_err(|e| Error::io(path, e))?;
        artifacts.push("failures.json".into());
    }
    if journals.is_empty() {
        eprintln!("error: every sweep run failed");
        return Ok(ExitCode::from(3));
    }
    let report_path = args.out_dir.join("summary.md");
    emit_report(&journals, ReportFormat::MarkdownTable, &report_path)?;
    artifacts.push("summary.md".into());
    write_manifest(&args.out_dir, &artifacts)?;
    println!(
        "{} runs ok, {} failed; summary at {}",
        journals.len(),
        failures.len(),
        report_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn num_cpus() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn cmd_audit(args: AuditArgs) -> Result<ExitCode, Error> {
    let (g, _) = args.data.load()?;
    let record = read_run_record(&args.record)?;
    let table = audit_pseudo_labels(&record, &g, args.top_n)?;
    println!(
        "minority additions: {}/{} correct ({:.2}%)",
        table.minority.correct,
        table.minority.examined,
        100.0 * table.minority.accuracy
    );
    println!(
        "majority additions: {}/{} correct ({:.2}%)",
        table.majority.correct,
        table.majority.examined,
        100.0 * table.majority.accuracy
    );
    if table.truncated {
        println!("(fewer than {} additions available in a group)", args.top_n);
    }
    println!("round  dpam_in_acc  dpam_out_acc");
    for (round, inside, outside) in &table.dpam_rounds {
        let fmt = |v: &Option<f64>| match v {
            Some(a) => format!("{:.2}%", 100.0 * a),
            None => "-".to_string(),
        };
        println!("{round:>5}  {:>11}  {:>12}", fmt(inside), fmt(outside));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, Error> {
    let format = match args.format {
        ReportFormatArg::Json => ReportFormat::Json,
        ReportFormatArg::MarkdownTable => ReportFormat::MarkdownTable,
    };
    let rows = emit_report(&args.records, format, &args.out)?;
    println!("{} rows written to {}", rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
