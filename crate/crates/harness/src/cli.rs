//! The `tsplab` command line.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when some
//! instances failed, 1 for anything else.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tsplab::candidates::{candidate_quality, mean_quality};
use tsplab::instance::parse_tsplib;
use tsplab::sgn::{finetune_node_decoder, init_model, load_model, save_model, train, FinetuneConfig, LabeledGraph, Mode, TrainConfig};
use tsplab::subgrad::{subgradient_ascent, AscentSchedule};
use tsplab::{Metric, SgnModel32, TspInstance};

use crate::compare::compare;
use crate::config::expand_config;
use crate::dataset::{make_dataset, parse_sizes, Dataset, DatasetSpec, LabelSource, Law};
use crate::error::{Error, Result};
use crate::report::{evaluate, EvalOptions, EvalReport};
use crate::solver::{prepare, solve_instance, CandidateSource, PiSource, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INSTANCE_FAILURES: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tsplab", version, about = "Candidate-guided lambda-opt TSP search with learned or classical candidates")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset directory.
    Gen(GenArgs),
    /// Attach optimal or best-found tours to a dataset.
    Label(LabelArgs),
    /// Train a network on a labelled dataset.
    Train(TrainArgs),
    /// Refit the node-penalty decoder on larger random instances.
    Finetune(FinetuneArgs),
    /// Solve one instance file, or every instance of a dataset.
    Solve(SolveArgs),
    /// Evaluate a solver configuration on a dataset.
    Eval(EvalArgs),
    /// Compare evaluation reports over the same dataset.
    Compare(CompareArgs),
    /// Candidate-set quality against the dataset labels.
    InspectCandidates(InspectArgs),
    /// Print the subgradient ascent trace of one instance.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Size groups such as `10x100,16x50`.
    #[arg(long)]
    pub sizes: String,
    /// Comma-separated laws, cycled over instances.
    #[arg(long, default_value = "uniform")]
    pub laws: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "continuous-euclidean")]
    pub metric: String,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// `oracle` or `search:trials=T:seed=S`.
    #[arg(long, default_value = "oracle")]
    pub source: String,
    /// Sparse-graph width for the stored edge indicators.
    #[arg(long, default_value_t = 8)]
    pub gamma: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = tsplab::sgn::DEFAULT_WIDTH)]
    pub width: usize,
    #[arg(long, default_value_t = tsplab::sgn::DEFAULT_LAYERS)]
    pub layers: usize,
    #[arg(long, default_value_t = 8)]
    pub gamma: usize,
    #[arg(long, default_value_t = 16)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    /// Weight of the node-penalty loss.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    /// Normalise with running statistics instead of batch statistics.
    #[arg(long)]
    pub frozen_norm: bool,
    /// Writes the per-epoch losses here.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Size of the random fine-tuning instances.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub iterations: usize,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// Preset: alpha, sgn or nearest. The flags below override its parts.
    #[arg(long, default_value = "alpha")]
    pub solver: String,
    #[arg(long)]
    pub candidates: Option<String>,
    #[arg(long)]
    pub pi: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = tsplab::search::DEFAULT_LAMBDA_MAX)]
    pub lambda_max: usize,
    /// Seconds per instance.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

impl SolverArgs {
    pub fn config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::preset(&self.solver)?;
        if let Some(c) = &self.candidates {
            cfg.candidates = c.parse::<CandidateSource>()?;
        }
        if let Some(p) = &self.pi {
            cfg.pi = p.parse::<PiSource>()?;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        cfg.trials = self.trials;
        cfg.lambda_max = self.lambda_max;
        cfg.seed = self.seed;
        cfg.time_limit = match self.time_limit {
            Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
            Some(t) => return Err(Error::Config(format!("time limit must be positive, got {t}"))),
            None => None,
        };
        Ok(cfg)
    }

    /// Loads the model when the configuration needs one.
    pub fn model(&self, cfg: &SolverConfig) -> Result<Option<SgnModel32>> {
        match (&self.model, cfg.needs_model()) {
            (Some(path), _) => read_model(path).map(Some),
            (None, true) => Err(Error::Config("the sgn sources need --model".into())),
            (None, false) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Adds wall-clock columns.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads a native instance file or a TSPLIB document.
pub fn read_instance(path: &Path) -> Result<TspInstance> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if text.trim_start().starts_with("tsp ") {
        Ok(TspInstance::from_native(&text)?)
    } else {
        Ok(parse_tsplib(&text)?)
    }
}

pub fn read_model(path: &Path) -> Result<SgnModel32> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read model {}: {e}", path.display())))?;
    Ok(load_model(&bytes)?)
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report_exit(report: &EvalReport) -> i32 {
    if report.failures() > 0 {
        EXIT_INSTANCE_FAILURES
    } else {
        EXIT_OK
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run(args: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Gen(a) => {
            let laws = a.laws.split(',').map(|l| l.trim().parse::<Law>()).collect::<Result<Vec<_>>>()?;
            let metric: Metric = a.metric.parse().map_err(|e: tsplab::Error| Error::Config(e.to_string()))?;
            let spec = DatasetSpec { sizes: parse_sizes(&a.sizes)?, laws, seed: a.seed, metric, scale: a.scale };
            let ds = make_dataset(&a.out, &spec)?;
            writeln!(stdout, "{} instances in {}", ds.len(), a.out.display())?;
            Ok(EXIT_OK)
        }
        Command::Label(a) => {
            let source: LabelSource = a.source.parse()?;
            let mut ds = Dataset::open(&a.dataset)?;
            let summary = ds.label(&source, a.gamma)?;
            writeln!(stdout, "labeled {} of {}", summary.labeled, ds.len())?;
            for (id, why) in &summary.failed {
                writeln!(stderr, "label failed for {id}: {why}")?;
            }
            Ok(if summary.failed.is_empty() { EXIT_OK } else { EXIT_INSTANCE_FAILURES })
        }
        Command::Train(a) => {
            let ds = Dataset::open(&a.dataset)?;
            let mut data = Vec::new();
            for e in &ds.manifest.entries {
                if let Some(label) = ds.load_label(e)? {
                    data.push(LabeledGraph::new(&ds.load_instance(e)?, a.gamma, &label.tour)?);
                }
            }
            if data.is_empty() {
                return Err(Error::Config(format!("{} has no labels; run `tsplab label` first", a.dataset.display())));
            }
            let model = init_model::<f32>(a.width, a.layers, a.gamma, a.init_seed)?;
            let cfg = TrainConfig {
                lr: a.lr,
                epochs: a.epochs,
                batch_graphs: a.batch,
                eta_pi: a.eta,
                seed: a.seed,
                mode: if a.frozen_norm { Mode::Infer } else { Mode::Train },
            };
            let (model, log) = train(model, &data, &cfg)?;
            fs::write(&a.out, save_model(&model))?;
            match &a.log {
                Some(p) => fs::write(p, log.text())?,
                None => stdout.write_all(log.text().as_bytes())?,
            }
            Ok(EXIT_OK)
        }
        Command::Finetune(a) => {
            let model = read_model(&a.model)?;
            let mut cfg = FinetuneConfig::new(a.n, a.seed);
            cfg.iterations = a.iterations;
            cfg.lr = a.lr;
            if let Some(b) = a.batch {
                cfg.batch_graphs = b;
            }
            let model = finetune_node_decoder(model, &cfg)?;
            fs::write(&a.out, save_model(&model))?;
            writeln!(stdout, "fine-tuned on n = {} for {} iterations", a.n, cfg.iterations)?;
            Ok(EXIT_OK)
        }
        Command::Solve(a) => {
            let cfg = a.solver.config()?;
            let model = a.solver.model(&cfg)?;
            if let Some(ds) = &a.dataset {
                let report = evaluate(&Dataset::open(ds)?, &cfg, model.as_ref(), EvalOptions { timing: a.timing })?;
                emit(a.out.as_deref(), &report.to_text(), stdout)?;
                return Ok(report_exit(&report));
            }
            let path = a.instance.as_deref().expect("clap requires one input");
            let inst = read_instance(path)?;
            let out = solve_instance(&inst, &cfg, model.as_ref(), cfg.seed)?;
            let mut text = String::new();
            writeln!(text, "length {}", out.length).unwrap();
            writeln!(text, "trials {}", out.trials_run).unwrap();
            if let Some(b) = out.bound {
                writeln!(text, "bound {b}").unwrap();
            }
            if a.timing {
                writeln!(text, "elapsed_ms {}", out.elapsed.as_secs_f64() * 1e3).unwrap();
            }
            let order: Vec<String> = out.tour.order().iter().map(|v| v.to_string()).collect();
            writeln!(text, "tour {}", order.join(" ")).unwrap();
            emit(a.out.as_deref(), &text, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Eval(a) => {
            let cfg = a.solver.config()?;
            let model = a.solver.model(&cfg)?;
            let report = evaluate(&Dataset::open(&a.dataset)?, &cfg, model.as_ref(), EvalOptions { timing: a.timing })?;
            emit(a.out.as_deref(), &report.to_text(), stdout)?;
            Ok(report_exit(&report))
        }
        Command::Compare(a) => {
            let reports = a
                .reports
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                    EvalReport::parse(&text)
                })
                .collect::<Result<Vec<_>>>()?;
            emit(a.out.as_deref(), &compare(&reports)?, stdout)?;
            Ok(EXIT_OK)
        }
        Command::InspectCandidates(a) => {
            let cfg = a.solver.config()?;
            let model = a.solver.model(&cfg)?;
            let ds = Dataset::open(&a.dataset)?;
            let mut text = format!("# config {}\nid\tn\tmissed\tavg_rank\n", cfg.id());
            let mut all = Vec::new();
            let mut failures = 0;
            for e in &ds.manifest.entries {
                let Some(label) = ds.load_label(e)? else {
                    failures += 1;
                    writeln!(text, "{}\t{}\t-\t-", e.id, e.n).unwrap();
                    continue;
                };
                let prepared = prepare(&ds.load_instance(e)?, &cfg, model.as_ref())?;
                let q = candidate_quality(&prepared.candidates, &label.tour);
                let rank = q.avg_rank.map_or("-".to_string(), |r| r.to_string());
                writeln!(text, "{}\t{}\t{}\t{}", e.id, e.n, q.missed_fraction, rank).unwrap();
                all.push(q);
            }
            if all.is_empty() {
                return Err(Error::Config(format!("{} has no labels", a.dataset.display())));
            }
            let m = mean_quality(&all);
            writeln!(text, "# mean missed {}", m.missed_fraction).unwrap();
            writeln!(text, "# mean avg_rank {}", m.avg_rank.map_or("-".to_string(), |r| r.to_string())).unwrap();
            emit(a.out.as_deref(), &text, stdout)?;
            Ok(if failures > 0 { EXIT_INSTANCE_FAILURES } else { EXIT_OK })
        }
        Command::Bound(a) => {
            let inst = read_instance(&a.instance)?;
            let mut schedule = AscentSchedule::for_instance(&inst);
            if let Some(m) = a.max_steps {
                schedule = AscentSchedule::new(schedule.initial_step, schedule.initial_period, m)?;
            }
            let res = subgradient_ascent(&inst, &schedule);
            let text = format!("# w_best {}\n# stop {:?}\n# step w step_size\n{}", res.w_best, res.stop, res.trace_text());
            emit(a.out.as_deref(), &text, stdout)?;
            Ok(EXIT_OK)
        }
    }
}
