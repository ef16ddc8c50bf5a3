//! Benchmark harness: run tuners on datasets or analytic functions, sweep
//! parameters, and compute cross-method average rankings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use orthomads::baselines::{
    grid_search, random_search, simulated_annealing, BaselineConfig,
};
use orthomads::data::{make_synthetic, parse_libsvm, SyntheticKind};
use orthomads::driver::{optimize, RunTrace, TunerConfig};
use orthomads::functions;
use orthomads::geometry::Bounds;
use orthomads::nm::NmConfig;
use orthomads::ranking::{average_ranks, ordinal_positions, Criterion, TieRule};
use orthomads::svm::{objective_factory, Protocol, TuningObjective};
use orthomads::vns::VnsConfig;

#[derive(Parser)]
#[command(name = "bench_cli", about = "Hyperparameter tuning bench harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one tuner, R seeded repeats, emitting traces and a summary.
    Run(RunArgs),
    /// Repeat `run` across values of one axis (xi, min-mesh, x0).
    Sweep(SweepArgs),
    /// Average-rank methods across datasets from summary files.
    Rank(RankArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// LIBSVM-format training file.
    #[arg(long, conflicts_with_all = ["synthetic", "function"])]
    dataset: Option<PathBuf>,
    /// Synthetic dataset spec `kind,per_class,noise` (kinds: blobs,
    /// two-moons, double-ring).
    #[arg(long, conflicts_with = "function")]
    synthetic: Option<String>,
    /// Analytic test function (sphere, rosenbrock, double-well, rastrigin).
    #[arg(long)]
    function: Option<String>,
    /// Held-out validation file: switches tuning to the holdout protocol.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Held-out test file for reported accuracy (never used in tuning).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Cross-validation folds when no validation file is given.
    #[arg(long, default_value_t = 3)]
    folds: usize,
    /// mads | mads-nm | mads-nm-vns | grid | random | sa
    #[arg(long, default_value = "mads-nm-vns")]
    method: String,
    /// Lower bounds, comma-separated.
    #[arg(long)]
    lower: Option<String>,
    /// Upper bounds, comma-separated.
    #[arg(long)]
    upper: Option<String>,
    /// Starting point, comma-separated.
    #[arg(long)]
    x0: Option<String>,
    /// Minimum mesh size(s): one value or one per dimension.
    #[arg(long = "min-mesh")]
    min_mesh: Option<String>,
    /// VNS evaluation-budget fraction.
    #[arg(long)]
    xi: Option<f64>,
    /// Frame shrink factor.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long = "max-evals")]
    max_evals: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Min-max feature scaling fitted on training folds.
    #[arg(long)]
    scale: bool,
    /// Use the preset grid axes {1, 10, 20, ..., 90} (grid method only).
    #[arg(long = "preset-grid")]
    preset_grid: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// xi | min-mesh | x0
    #[arg(long)]
    axis: String,
    /// Semicolon-separated axis values; x0 values are comma pairs.
    #[arg(long)]
    values: String,
}

#[derive(Args)]
struct RankArgs {
    /// summary.json files, one per (method, dataset) cell.
    #[arg(long, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// average | competition | dense
    #[arg(long = "tie-rule", default_value = "average")]
    tie_rule: String,
    /// accuracy | loss (loss ranks lower-is-better)
    #[arg(long, default_value = "accuracy")]
    metric: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(&args).map(|_| ()),
        Cmd::Sweep(args) => cmd_sweep(&args),
        Cmd::Rank(args) => cmd_rank(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliError = Box<dyn std::error::Error>;

fn parse_reals(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}").into()))
        .collect()
}

fn worker_count() -> usize {
    std::env::var("ORTHOMADS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Everything a tuner needs: the callable, its box, and an optional test
/// accuracy hook.
struct BuiltObjective {
    label: String,
    bounds: Bounds,
    objective: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// Maps a tuned (C, γ) to held-out test accuracy.
    test_accuracy: Option<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

fn svm_box(args: &RunArgs) -> Result<Bounds, CliError> {
    let lower = match &args.lower {
        Some(s) => parse_reals(s)?,
        None => vec![0.01, 0.01],
    };
    let upper = match &args.upper {
        Some(s) => parse_reals(s)?,
        None => vec![100.01, 100.01],
    };
    Ok(Bounds::new(lower, upper)?)
}

fn tuning_pair(
    args: &RunArgs,
    train: orthomads::data::Dataset,
    test: Option<orthomads::data::Dataset>,
) -> Result<(TuningObjective, Option<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>>), CliError> {
    let protocol = match &args.validation {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Protocol::Holdout(parse_libsvm(&text)?)
        }
        None => Protocol::StratifiedCv {
            k: args.folds,
            seed: args.seed,
        },
    };
    let mut obj = objective_factory(train.clone(), protocol)?;
    obj.scale = args.scale;
    let test_hook: Option<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>> = match test {
        Some(test_set) => {
            let scale = args.scale;
            let mut eval = objective_factory(train, Protocol::Holdout(test_set))?;
            eval.scale = scale;
            Some(Box::new(move |x: &[f64]| eval.accuracy(x[0], x[1])))
        }
        None => None,
    };
    Ok((obj, test_hook))
}

fn build_objective(args: &RunArgs) -> Result<BuiltObjective, CliError> {
    if let Some(name) = &args.function {
        let (f, natural) = functions::by_name(name)
            .ok_or_else(|| format!("unknown function '{name}'"))?;
        let bounds = if args.lower.is_some() || args.upper.is_some() {
            let lower = match &args.lower {
                Some(s) => parse_reals(s)?,
                None => natural.lower().to_vec(),
            };
            let upper = match &args.upper {
                Some(s) => parse_reals(s)?,
                None => natural.upper().to_vec(),
            };
            Bounds::new(lower, upper)?
        } else {
            natural
        };
        return Ok(BuiltObjective {
            label: name.clone(),
            bounds,
            objective: f,
            test_accuracy: None,
        });
    }
    if let Some(spec) = &args.synthetic {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("--synthetic wants kind,per_class,noise, got '{spec}'").into());
        }
        let kind = SyntheticKind::from_name(parts[0])
            .ok_or_else(|| format!("unknown synthetic kind '{}'", parts[0]))?;
        let per_class: usize = parts[1].trim().parse()?;
        let noise: f64 = parts[2].trim().parse()?;
        let train = make_synthetic(kind, per_class, noise, args.seed);
        // disjoint test draw from a shifted stream
        let test = make_synthetic(kind, per_class, noise, args.seed.wrapping_add(1000));
        let (obj, test_hook) = tuning_pair(args, train, Some(test))?;
        return Ok(BuiltObjective {
            label: format!("synthetic-{}", parts[0]),
            bounds: svm_box(args)?,
            objective: Box::new(move |x: &[f64]| obj.loss(x[0], x[1])),
            test_accuracy: test_hook,
        });
    }
    if let Some(path) = &args.dataset {
        let text = fs::read_to_string(path)?;
        let train = parse_libsvm(&text)?;
        let test = match &args.test {
            Some(p) => Some(parse_libsvm(&fs::read_to_string(p)?)?),
            None => None,
        };
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let (obj, test_hook) = tuning_pair(args, train, test)?;
        return Ok(BuiltObjective {
            label,
            bounds: svm_box(args)?,
            objective: Box::new(move |x: &[f64]| obj.loss(x[0], x[1])),
            test_accuracy: test_hook,
        });
    }
    Err("one of --dataset, --synthetic, --function is required".into())
}

#[derive(Debug, Serialize, Deserialize)]
struct RepeatRow {
    repeat: usize,
    seed: u64,
    best_point: Vec<f64>,
    best_value: f64,
    evals: usize,
    reason: String,
    wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Stats {
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
    median: f64,
}

fn stats(values: &[f64]) -> Stats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    Stats {
        mean,
        std: var.sqrt(),
        min: sorted[0],
        max: *sorted.last().unwrap(),
        median,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Summary {
    method: String,
    dataset: String,
    repeats: usize,
    base_seed: u64,
    rows: Vec<RepeatRow>,
    loss: Stats,
    evals: Stats,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<Stats>,
}

fn real17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn trace_csv(trace: &RunTrace, n: usize) -> String {
    let mut out = String::new();
    if n == 2 {
        out.push_str("eval_index,stage,C,gamma,loss,best_so_far\n");
    } else {
        out.push_str("eval_index,stage,");
        for j in 1..=n {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("loss,best_so_far\n");
    }
    for r in &trace.records {
        out.push_str(&format!("{},{}", r.eval_index, r.stage.as_str()));
        for c in &r.point {
            out.push_str(&format!(",{}", real17(*c)));
        }
        out.push_str(&format!(",{},{}\n", real17(r.value), real17(r.best_so_far)));
    }
    out
}

fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct RepeatResult {
    row: RepeatRow,
    trace: RunTrace,
}

fn run_single(
    args: &RunArgs,
    built: &BuiltObjective,
    repeat: usize,
) -> Result<RepeatResult, CliError> {
    let seed = args.seed + repeat as u64;
    let n = built.bounds.dim();
    let start = Instant::now();
    let (incumbent, trace) = match args.method.as_str() {
        m @ ("mads" | "mads-nm" | "mads-nm-vns") => {
            let x0 = match &args.x0 {
                Some(s) => parse_reals(s)?,
                None => built
                    .bounds
                    .lower()
                    .iter()
                    .zip(built.bounds.upper())
                    .map(|(l, u)| (l + u) / 2.0)
                    .collect(),
            };
            let mut cfg = TunerConfig::new(built.bounds.clone(), x0);
            cfg.seed = seed;
            if let Some(mm) = &args.min_mesh {
                let v = parse_reals(mm)?;
                cfg.min_mesh = if v.len() == 1 { vec![v[0]; n] } else { v };
            }
            if let Some(t) = args.tau {
                cfg.tau = t;
            }
            if let Some(me) = args.max_evals {
                cfg.max_evals = me;
            }
            if m != "mads" {
                cfg.nm = Some(NmConfig::default());
            }
            if m == "mads-nm-vns" {
                let mut vns = VnsConfig::default();
                if let Some(xi) = args.xi {
                    vns.xi_budget = xi;
                }
                cfg.vns = Some(vns);
            }
            optimize(&cfg, &*built.objective)?
        }
        m @ ("grid" | "random" | "sa") => {
            let mut cfg = BaselineConfig::new(built.bounds.clone());
            cfg.seed = seed;
            cfg.budget = args.max_evals.unwrap_or(100);
            cfg.preset_grid = args.preset_grid;
            match m {
                "grid" => grid_search(&*built.objective, &cfg),
                "random" => random_search(&*built.objective, &cfg),
                _ => simulated_annealing(&*built.objective, &cfg),
            }
        }
        other => return Err(format!("unknown method '{other}'").into()),
    };
    let wall = start.elapsed().as_secs_f64();
    let accuracy = built.test_accuracy.as_ref().map(|f| f(&incumbent.point));
    Ok(RepeatResult {
        row: RepeatRow {
            repeat,
            seed,
            best_point: incumbent.point,
            best_value: incumbent.value,
            evals: trace.records.len(),
            reason: trace.reason.as_str().to_string(),
            wall_time_s: wall,
            accuracy,
        },
        trace,
    })
}

fn cmd_run(args: &RunArgs) -> Result<Summary, CliError> {
    if args.repeats < 1 {
        return Err("--repeats must be at least 1".into());
    }
    let built = build_objective(args)?;
    fs::create_dir_all(&args.out)?;

    let results: Mutex<Vec<Option<Result<RepeatResult, String>>>> =
        Mutex::new((0..args.repeats).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = worker_count().min(args.repeats);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let r = next.fetch_add(1, Ordering::SeqCst);
                if r >= args.repeats {
                    break;
                }
                let outcome = run_single(args, &built, r).map_err(|e| e.to_string());
                results.lock().unwrap()[r] = Some(outcome);
            });
        }
    });

    let mut written: Vec<PathBuf> = Vec::new();
    let cleanup = |written: &[PathBuf]| {
        for p in written {
            let _ = fs::remove_file(p);
        }
    };
    let mut rows = Vec::new();
    let n = built.bounds.dim();
    for (r, slot) in results.into_inner().unwrap().into_iter().enumerate() {
        match slot.expect("every repeat executed") {
            Ok(result) => {
                let path = args.out.join(format!("trace_{r}.csv"));
                if let Err(e) = write_atomic(&path, &trace_csv(&result.trace, n)) {
                    cleanup(&written);
                    return Err(e);
                }
                written.push(path);
                rows.push(result.row);
            }
            Err(e) => {
                cleanup(&written);
                return Err(format!("repeat {r}: {e}").into());
            }
        }
    }

    let losses: Vec<f64> = rows.iter().map(|r| r.best_value).collect();
    let evals: Vec<f64> = rows.iter().map(|r| r.evals as f64).collect();
    let accs: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
    let summary = Summary {
        method: args.method.clone(),
        dataset: built.label.clone(),
        repeats: args.repeats,
        base_seed: args.seed,
        loss: stats(&losses),
        evals: stats(&evals),
        accuracy: if accs.len() == rows.len() {
            Some(stats(&accs))
        } else {
            None
        },
        rows,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    if let Err(e) = write_atomic(&args.out.join("summary.json"), &json) {
        cleanup(&written);
        return Err(e);
    }
    Ok(summary)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let values: Vec<&str> = args
        .values
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if values.is_empty() {
        return Err("--values must contain at least one entry".into());
    }
    fs::create_dir_all(&args.run.out)?;
    let mut combined: Vec<serde_json::Value> = Vec::new();
    for value in values {
        let mut run = args.run.clone();
        match args.axis.as_str() {
            "xi" => run.xi = Some(value.parse()?),
            "min-mesh" | "min_mesh" => run.min_mesh = Some(value.to_string()),
            "x0" => run.x0 = Some(value.to_string()),
            other => return Err(format!("unknown sweep axis '{other}'").into()),
        }
        let dir_tag: String = value
            .chars()
            .map(|c| if c == ',' || c == ';' { '_' } else { c })
            .collect();
        run.out = args.run.out.join(format!("{}_{}", args.axis, dir_tag));
        match cmd_run(&run) {
            Ok(summary) => combined.push(serde_json::json!({
                "axis": args.axis,
                "value": value,
                "summary": summary,
            })),
            Err(e) => {
                // per-value failures are isolated so the sweep continues
                log::warn!("sweep value '{value}' failed: {e}");
                combined.push(serde_json::json!({
                    "axis": args.axis,
                    "value": value,
                    "error": e.to_string(),
                }));
            }
        }
    }
    let json = serde_json::to_string_pretty(&combined)?;
    write_atomic(&args.run.out.join("sweep_summary.json"), &json)?;
    Ok(())
}

fn cmd_rank(args: &RankArgs) -> Result<(), CliError> {
    let tie = match args.tie_rule.as_str() {
        "average" => TieRule::Average,
        "competition" => TieRule::Competition,
        "dense" => TieRule::Dense,
        other => return Err(format!("unknown tie rule '{other}'").into()),
    };
    if args.inputs.is_empty() {
        return Err("--inputs must name at least one summary file".into());
    }
    // cells[(method, dataset)] = (mean, max) of the chosen metric
    let mut cells: BTreeMap<(String, String), (f64, f64)> = BTreeMap::new();
    for path in &args.inputs {
        let summary: Summary = serde_json::from_str(&fs::read_to_string(path)?)?;
        let (mean, max) = match args.metric.as_str() {
            "accuracy" => {
                let acc = summary.accuracy.as_ref().ok_or_else(|| {
                    format!("{}: no accuracy recorded; use --metric loss", path.display())
                })?;
                (acc.mean, acc.max)
            }
            // losses rank lower-is-better; negate so the criteria read the same
            "loss" => (-summary.loss.mean, -summary.loss.min),
            other => return Err(format!("unknown metric '{other}'").into()),
        };
        cells.insert((summary.method.clone(), summary.dataset.clone()), (mean, max));
    }
    let mut methods: Vec<String> = cells.keys().map(|(m, _)| m.clone()).collect();
    methods.sort();
    methods.dedup();
    let mut datasets: Vec<String> = cells.keys().map(|(_, d)| d.clone()).collect();
    datasets.sort();
    datasets.dedup();
    for m in &methods {
        for d in &datasets {
            if !cells.contains_key(&(m.clone(), d.clone())) {
                return Err(format!("missing cell: method '{m}' has no summary for dataset '{d}'").into());
            }
        }
    }
    let table_of = |use_max: bool| -> Vec<Vec<f64>> {
        methods
            .iter()
            .map(|m| {
                datasets
                    .iter()
                    .map(|d| {
                        let &(mean, max) = &cells[&(m.clone(), d.clone())];
                        if use_max {
                            max
                        } else {
                            mean
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let mut csv = String::from("criterion,method,average_rank,position\n");
    for criterion in [Criterion::BestMean, Criterion::WorstMean, Criterion::BestMax] {
        let table = table_of(matches!(criterion, Criterion::BestMax));
        let avg = average_ranks(&table, criterion, tie)?;
        let pos = ordinal_positions(&avg);
        for (i, m) in methods.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{:.2},{}\n",
                criterion.as_str(),
                m,
                avg[i],
                pos[i]
            ));
        }
    }
    fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("ranking.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}
