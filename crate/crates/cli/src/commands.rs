use std::path::Path;

use altupdate::harness::{default_scan_ranges, robustness_trials, run_trial, surface_scan, ScoreStats};
use altupdate::nn::{self, make_dataset, sample_training_config, summarize, train_many, TrainingConfig};
use altupdate::optim::{OptimizerSpec, UpdateRule};
use altupdate::tuner::{grid_search_with_gamma, TuneResult};
use altupdate::{RuleKind, TaskConfig};
use serde_json::json;

use crate::config::{
    self, ResolvedSource, RobustnessConfig, ScanConfig, ToyConfig, TrialConfig, TuneConfig, Tuning, SCHEMA_VERSION,
};
use crate::output::{json, sci, Bundle, Csv};
use crate::{CliError, Command, CommonArgs};

/// Files to write plus a one-line human summary.
pub struct Report {
    pub bundle: Bundle,
    pub summary: String,
    /// Set when every grid point diverged; carries the grid size.
    pub all_diverged: Option<usize>,
}

impl Report {
    fn new(bundle: Bundle, summary: String) -> Self {
        Self {
            bundle,
            summary,
            all_diverged: None,
        }
    }
}

pub fn dispatch(command: &Command) -> Result<Report, CliError> {
    match command {
        Command::Tune(args) => tune(args),
        Command::Trial(args) => trial(args),
        Command::Robustness(args) => robustness(args),
        Command::Scan(args) => scan(&args.common, args.x1_range, args.x2_range),
        Command::TrainToy(args) => train_toy(args),
    }
}

fn config_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

fn field_error(field: &str) -> impl Fn(altupdate::Error) -> CliError + '_ {
    move |e| CliError::config(format!("field `{field}`: {e}"))
}

fn check_task(task: &TaskConfig, field: &str) -> Result<(), CliError> {
    task.validate().map_err(field_error(field))
}

fn search(tuning: &Tuning, field: &str) -> Result<TuneResult, CliError> {
    check_task(&tuning.task, &format!("{field}task"))?;
    if !(0.0..=1.0).contains(&tuning.search.gamma) {
        return Err(CliError::config(format!(
            "field `{field}search.gamma`: must lie in [0, 1], got {}",
            tuning.search.gamma
        )));
    }
    for (name, grid) in [
        ("eta", tuning.grids.eta),
        ("eta_in", tuning.grids.eta_in),
        ("eta_out", tuning.grids.eta_out),
    ] {
        grid.values().map_err(field_error(&format!("{field}grids.{name}")))?;
    }
    let s = tuning.search;
    Ok(grid_search_with_gamma(&tuning.task, s.family, s.rule, &tuning.grids, s.gamma)?)
}

/// Spec to evaluate, tuning first when asked to. A search where everything diverged has no
/// usable winner.
fn resolve(source: ResolvedSource) -> Result<(OptimizerSpec, Option<(Tuning, TuneResult)>), CliError> {
    match source {
        ResolvedSource::Explicit(spec) => Ok((spec, None)),
        ResolvedSource::Tuning(tuning) => {
            let result = search(&tuning, "tuning.")?;
            if result.all_diverged() {
                return Err(CliError::AllDiverged(result.leaderboard.len()));
            }
            Ok((result.best_spec, Some((tuning, result))))
        }
    }
}

fn tuning_json(tuned: &Option<(Tuning, TuneResult)>) -> serde_json::Value {
    match tuned {
        None => serde_json::Value::Null,
        Some((tuning, result)) => json!({
            "task": tuning.task,
            "search": tuning.search,
            "grids": tuning.grids,
            "best_final_distance": result.best_final_distance,
            "grid_points": result.leaderboard.len(),
            "diverged_points": result.diverged_count(),
        }),
    }
}

fn rate_columns(rule: RuleKind) -> &'static [&'static str] {
    match rule {
        RuleKind::Additive => &["eta"],
        RuleKind::Multiplicative => &["eta_in", "eta_out"],
        RuleKind::Hybrid => &["eta", "eta_in", "eta_out", "gamma"],
    }
}

fn rate_cells(update: &UpdateRule) -> Vec<String> {
    match *update {
        UpdateRule::Additive { eta } => vec![sci(eta)],
        UpdateRule::Multiplicative { eta_in, eta_out } => vec![sci(eta_in), sci(eta_out)],
        UpdateRule::Hybrid {
            eta,
            eta_in,
            eta_out,
            gamma,
        } => vec![sci(eta), sci(eta_in), sci(eta_out), sci(gamma)],
    }
}

fn tune(args: &CommonArgs) -> Result<Report, CliError> {
    let cfg: TuneConfig = config::load(&args.config)?;
    let tuning = cfg.tuning();
    let result = search(&tuning, "")?;

    let rule = tuning.search.rule;
    let mut header = vec!["rank"];
    header.extend_from_slice(rate_columns(rule));
    header.extend_from_slice(&["final_distance", "diverged"]);
    let mut csv = Csv::new(&header);
    for (i, e) in result.leaderboard.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(rate_cells(&e.spec.update));
        row.push(sci(e.final_distance));
        row.push(e.diverged.to_string());
        csv.row(row);
    }

    let best = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "tune",
        "task": tuning.task,
        "search": tuning.search,
        "grids": tuning.grids,
        "best_spec": result.best_spec,
        "best_final_distance": result.best_final_distance,
        "grid_points": result.leaderboard.len(),
        "diverged_points": result.diverged_count(),
    });
    let mut bundle = Bundle::default();
    bundle.add("leaderboard.csv", csv.into_string());
    bundle.add("best.json", json(&best));

    let summary = format!(
        "{}: best final distance {} over {} grid points ({} diverged)",
        result.best_spec.label(),
        sci(result.best_final_distance),
        result.leaderboard.len(),
        result.diverged_count()
    );
    let mut report = Report::new(bundle, summary);
    if result.all_diverged() {
        report.all_diverged = Some(result.leaderboard.len());
    }
    Ok(report)
}

fn trial(args: &CommonArgs) -> Result<Report, CliError> {
    let cfg: TrialConfig = config::load(&args.config)?;
    let source = cfg.source().resolve(config_dir(&args.config))?;
    let task = match (&cfg.task, &source) {
        (Some(t), _) => *t,
        (None, ResolvedSource::Tuning(t)) => t.task,
        (None, _) => return Err(CliError::config("missing field `task`")),
    };
    check_task(&task, "task")?;
    let (spec, tuned) = resolve(source)?;
    let record = run_trial(&task, &spec)?;

    let mut csv = Csv::new(&["iteration", "distance", "x1", "x2"]);
    for (i, (d, p)) in record.distances.iter().zip(&record.points).enumerate() {
        csv.row([i.to_string(), sci(*d), sci(p[0]), sci(p[1])]);
    }
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "trial",
        "task": task,
        "spec": spec,
        "initial_distance": record.initial_distance,
        "final_distance": record.final_distance,
        "score": record.score,
        "diverged": record.diverged,
        "iterations_run": record.iterations_run,
        "tuning": tuning_json(&tuned),
    });
    let mut bundle = Bundle::default();
    bundle.add("trajectory.csv", csv.into_string());
    bundle.add("trial.json", json(&meta));
    let summary = format!(
        "{}: final distance {} after {} iterations{}",
        spec.label(),
        sci(record.final_distance),
        record.iterations_run,
        if record.diverged { " (diverged)" } else { "" }
    );
    Ok(Report::new(bundle, summary))
}

fn robustness(args: &CommonArgs) -> Result<Report, CliError> {
    let cfg: RobustnessConfig = config::load(&args.config)?;
    if cfg.n == 0 {
        return Err(CliError::config("field `n`: must be at least 1"));
    }
    cfg.distribution.validate().map_err(field_error("distribution"))?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let (spec, tuned) = resolve(cfg.source().resolve(config_dir(&args.config))?)?;
    let trials = robustness_trials(&cfg.distribution, &spec, cfg.n, seed)?;
    let stats = ScoreStats::from_scores(trials.iter().map(|t| t.record.score).collect());

    let mut csv = Csv::new(&[
        "index",
        "alpha",
        "beta",
        "x1_start",
        "x2_start",
        "iterations",
        "initial_distance",
        "final_distance",
        "score",
        "diverged",
    ]);
    for (i, t) in trials.iter().enumerate() {
        csv.row([
            i.to_string(),
            sci(t.task.alpha),
            sci(t.task.beta),
            sci(t.task.x0[0]),
            sci(t.task.x0[1]),
            t.task.iterations.to_string(),
            sci(t.record.initial_distance),
            sci(t.record.final_distance),
            sci(t.record.score),
            t.record.diverged.to_string(),
        ]);
    }
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "robustness",
        "seed": seed,
        "distribution": cfg.distribution,
        "spec": spec,
        "mean": stats.mean,
        "std": stats.std,
        "std_kind": stats.std_kind,
        "n": stats.n,
        "n_finite": stats.n_finite,
        "diverged": stats.diverged,
        "tuning": tuning_json(&tuned),
    });
    let mut bundle = Bundle::default();
    bundle.add("scores.csv", csv.into_string());
    bundle.add("stats.json", json(&meta));
    let summary = format!(
        "{}: mean score {} ± {} over {} trials ({} diverged)",
        spec.label(),
        sci(stats.mean),
        sci(stats.std),
        stats.n,
        stats.diverged
    );
    Ok(Report::new(bundle, summary))
}

fn scan(args: &CommonArgs, x1_flag: Option<(f64, f64)>, x2_flag: Option<(f64, f64)>) -> Result<Report, CliError> {
    let cfg: ScanConfig = config::load(&args.config)?;
    let source = cfg.source().resolve(config_dir(&args.config))?;
    let task = match (&cfg.task, &source) {
        (Some(t), _) => *t,
        (None, ResolvedSource::Tuning(t)) => t.task,
        (None, _) => return Err(CliError::config("missing field `task`")),
    };
    check_task(&task, "task")?;
    let [d1, d2] = default_scan_ranges(&task);
    let r1 = x1_flag.or(cfg.x1_range.map(|[a, b]| (a, b))).unwrap_or(d1);
    let r2 = x2_flag.or(cfg.x2_range.map(|[a, b]| (a, b))).unwrap_or(d2);
    for (name, (lo, hi)) in [("x1_range", r1), ("x2_range", r2)] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(CliError::config(format!("field `{name}`: need finite lo <= hi, got [{lo}, {hi}]")));
        }
    }
    let (spec, tuned) = resolve(source)?;
    let grid = surface_scan(&task, &spec, r1, r2)?;

    let mut header = vec!["x1\\x2".to_owned()];
    header.extend(grid.x1_axis.iter().map(|v| sci(*v)));
    let mut matrix = Csv::default();
    matrix.row(header);
    let mut long = Csv::new(&["x1_start", "x2_start", "score"]);
    for (i, row) in grid.scores.iter().enumerate() {
        let a = grid.x0_axis[i];
        matrix.row(std::iter::once(sci(a)).chain(row.iter().map(|s| sci(*s))));
        for (j, s) in row.iter().enumerate() {
            long.row([sci(a), sci(grid.x1_axis[j]), sci(*s)]);
        }
    }
    let scores: Vec<f64> = grid.scores.iter().flatten().copied().collect();
    let stats = ScoreStats::from_scores(scores);
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "scan",
        "task": task,
        "spec": spec,
        "x1_range": [r1.0, r1.1],
        "x2_range": [r2.0, r2.1],
        "points": stats.n,
        "max_score": grid.max_score(),
        "mean_score": stats.mean,
        "std_score": stats.std,
        "diverged": stats.diverged,
        "tuning": tuning_json(&tuned),
    });
    let mut bundle = Bundle::default();
    bundle.add("surface.csv", matrix.into_string());
    bundle.add("surface_long.csv", long.into_string());
    bundle.add("scan.json", json(&meta));
    let summary = format!(
        "{}: max score {} over {} starting points ({} diverged)",
        spec.label(),
        sci(grid.max_score()),
        stats.n,
        stats.diverged
    );
    Ok(Report::new(bundle, summary))
}

fn train_toy(args: &CommonArgs) -> Result<Report, CliError> {
    let cfg: ToyConfig = config::load(&args.config)?;
    cfg.validate()?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let data = make_dataset(cfg.dataset.n, cfg.dataset.noise, cfg.dataset.seed).map_err(field_error("dataset"))?;

    let mut bundle = Bundle::default();
    let mut runs_csv = Csv::new(&[
        "label",
        "run",
        "gain",
        "epochs",
        "seed",
        "epochs_completed",
        "steps",
        "diverged",
        "sign_flips",
        "val_acc_epoch5",
        "val_acc_final",
        "train_acc_final",
    ]);
    let mut summary_csv = Csv::new(&[
        "label",
        "runs",
        "diverged",
        "report_epoch",
        "val_acc_epoch5_mean",
        "val_acc_epoch5_std",
        "val_acc_final_mean",
        "val_acc_final_std",
        "train_acc_epoch5_mean",
        "train_acc_epoch5_std",
        "train_acc_final_mean",
        "train_acc_final_std",
        "sign_flips",
    ]);
    let mut summaries = Vec::new();
    let mut lines = Vec::new();

    for entry in &cfg.optimizers {
        let configs: Vec<TrainingConfig> = (0..cfg.runs as u64)
            .map(|i| TrainingConfig {
                init: cfg.init,
                ..sample_training_config(seed, i, entry.optimizer, cfg.batch_size)
            })
            .collect();
        let reports = train_many(&cfg.architecture, &data, &configs)?;

        for (i, r) in reports.iter().enumerate() {
            let mut metrics = Csv::new(&["epoch", "train_acc", "val_acc", "loss"]);
            for m in &r.metrics {
                metrics.row([m.epoch.to_string(), sci(m.train_acc), sci(m.val_acc), sci(m.loss)]);
            }
            bundle.add(format!("metrics/{}/run-{i:02}.csv", entry.label), metrics.into_string());
            let at = |m: Option<&nn::EpochMetrics>, f: fn(&nn::EpochMetrics) -> f64| m.map_or(f64::NAN, f);
            runs_csv.row([
                entry.label.clone(),
                i.to_string(),
                sci(r.config.gain),
                r.config.epochs.to_string(),
                r.config.seed.to_string(),
                r.metrics.len().to_string(),
                r.steps.to_string(),
                r.diverged.to_string(),
                r.sign_flips.to_string(),
                sci(at(r.at_epoch(nn::REPORT_EPOCH), |m| m.val_acc)),
                sci(at(r.last(), |m| m.val_acc)),
                sci(at(r.last(), |m| m.train_acc)),
            ]);
        }

        let s = summarize(&reports);
        summary_csv.row([
            entry.label.clone(),
            s.runs.to_string(),
            s.diverged.to_string(),
            s.report_epoch.to_string(),
            sci(s.val_acc_at_report_epoch.mean),
            sci(s.val_acc_at_report_epoch.std),
            sci(s.val_acc_final.mean),
            sci(s.val_acc_final.std),
            sci(s.train_acc_at_report_epoch.mean),
            sci(s.train_acc_at_report_epoch.std),
            sci(s.train_acc_final.mean),
            sci(s.train_acc_final.std),
            s.sign_flips.to_string(),
        ]);
        lines.push(format!(
            "{}: val acc epoch {} {:.4}, final {:.4}, sign flips {}",
            entry.label, s.report_epoch, s.val_acc_at_report_epoch.mean, s.val_acc_final.mean, s.sign_flips
        ));
        summaries.push(json!({
            "label": entry.label,
            "optimizer": entry.optimizer,
            "summary": s,
        }));
    }

    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "train-toy",
        "seed": seed,
        "runs": cfg.runs,
        "batch_size": cfg.batch_size,
        "dataset": cfg.dataset,
        "architecture": cfg.architecture,
        "init": cfg.init,
        "optimizers": summaries,
    });
    bundle.add("runs.csv", runs_csv.into_string());
    bundle.add("summary.csv", summary_csv.into_string());
    bundle.add("summary.json", json(&meta));
    Ok(Report::new(bundle, lines.join("\n")))
}
