//! Command-line front end: `train`, `eval`, `check-theory`, `sweep` and
//! `synth-data`.
//!
//! Every option takes a value and has a config-file key of the same name
//! (`--n-bar 8` or `n-bar = 8`); flags override the `--config` file, which
//! overrides built-in defaults. Exit codes: 0 success, 1 bound violation,
//! 2 configuration error, 3 data error, 4 numerical abort.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Arg, ArgMatches, Command};

use crate::data_io::{
    self, parse_conll, parse_docs, parse_nbest, synth, write_checkpoint, write_conll, write_docs, write_nbest,
    write_runlog, ConfigFile, ConllMode,
};
use crate::error::Error;
use crate::estimators::UpdateRule;
use crate::objectives::{CandidateLoss, StochasticObjective, SupportMode, SyntheticFunction, SyntheticKind, DEFAULT_OFFSET_NOISE};
use crate::optimizer::{run, PerturbationMode, RunConfig, RunOutput, DEFAULT_EVAL_EVERY};
use crate::perturbation::{exact_moment, exact_moment_variance};
use crate::rng::{streams, RngStream};
use crate::sparse::{ActiveSet, SparseVector};
use crate::stats::RunningStats;
use crate::structpred::{CompiledSentence, FeatureIndex, LabelScope};
use crate::tasks::{chunking_f1, mean_map_score, rerank_bleu, CandidateProblem, ChunkingProblem, DevScore, SyntheticProblem, DEFAULT_KBEST};
use crate::theory::{
    complexity_sweep, default_thinning, estimator_bias_check, moment_bound_check, second_moment_check, theorem1_tracker,
    trace_run, BoundParams, BoundReport, Epsilon, SweepConfig, SweepResult, SweepStep,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Largest componentwise |z| accepted by the `lemma1` check.
pub const LEMMA1_Z_LIMIT: f64 = 4.0;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument { .. } | Error::Unsupported(_) | Error::RegistryNotFrozen => EXIT_CONFIG,
            Error::NonFinite { .. } => EXIT_NUMERICAL,
            Error::Parse { .. }
            | Error::Io { .. }
            | Error::EmptyCandidates
            | Error::DimensionMismatch { .. }
            | Error::IndexOutOfRange { .. } => EXIT_DATA,
        };
        let message = match &e {
            Error::InvalidArgument { name, reason } => format!("--{}: {reason}", name.replace('_', "-")),
            _ => e.to_string(),
        };
        CliError { code, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(format!("write failed: {e}"))
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

const TRAIN_OPTS: &[(&str, &str)] = &[
    ("task", "chunking | rerank | multiclass | synth"),
    ("rule", "two-point | func-cmp | baseline | sfo [two-point]"),
    ("mode", "sparse | all [sparse]"),
    ("h", "constant step size [0.01]"),
    ("mu", "perturbation scale [0.01]"),
    ("iters", "number of steps [10000]"),
    ("seed", "run seed [0]"),
    ("eval-every", "dev evaluation interval [1000]"),
    ("objective", "map | annealed:<gamma> [map]"),
    ("train", "training data file"),
    ("dev", "development data file"),
    ("out", "output directory [szo-out]"),
    ("k", "k-best list size for chunking [20]"),
    ("label-scope", "chunking feature registration: gold | all [gold]"),
    ("conll-mode", "strict | lenient [strict]"),
    ("function", "synthetic function: l1_well | smooth_bowl | nonconvex_ripple [l1_well]"),
    ("n", "synthetic dimension [128]"),
    ("n-bar", "synthetic support size [8]"),
    ("support", "synthetic support: fixed | per-sample [fixed]"),
    ("function-seed", "seed of the synthetic function [0]"),
];

const EVAL_OPTS: &[(&str, &str)] = &[
    ("task", "chunking | rerank | multiclass | synth"),
    ("model", "checkpoint file"),
    ("test", "test data file"),
    ("features", "feature list for chunking [features.txt next to the model]"),
    ("conll-mode", "strict | lenient [strict]"),
    ("function", "synthetic function [l1_well]"),
    ("n", "synthetic dimension [128]"),
    ("n-bar", "synthetic support size [8]"),
    ("support", "synthetic support: fixed | per-sample [fixed]"),
    ("function-seed", "seed of the synthetic function [0]"),
    ("samples", "samples for the synthetic loss [10000]"),
    ("seed", "sampling seed for the synthetic loss [0]"),
];

const CHECK_OPTS: &[(&str, &str)] = &[
    ("check", "lemma1 | lemma2 | theorem1 | second-moment | sweep"),
    ("dims", "lemma2 dimensions [1,5,10,50,200]"),
    ("p", "lemma2 moment orders [2,4]"),
    ("samples", "Monte Carlo samples [100000; 200000 for lemma1]"),
    ("function", "zoo members, comma separated, or `all`"),
    ("n", "dimension"),
    ("n-bar", "support size"),
    ("h", "step size"),
    ("mu", "perturbation scale"),
    ("iters", "steps for theorem1 [10000]; iteration cap for sweep"),
    ("grad-samples", "samples per gradient-norm estimate"),
    ("seed", "seed [0]"),
    ("out", "also write the JSON lines to this file"),
    ("n-bars", "sweep support sizes [8,32,128,512]"),
    ("epsilon", "sweep target, a number or `auto` [auto]"),
    ("seeds", "sweep seeds [0,1,2]"),
    ("h-scale", "sweep step h = c / n_bar [0.0015]"),
    ("check-every", "sweep check interval of the largest cell"),
    ("function-seed", "seed of the zoo function [7 for sweep, 0 otherwise]"),
];

const SWEEP_OPTS: &[(&str, &str)] = &[
    ("n", "dimension [512]"),
    ("n-bars", "support sizes [8,32,128,512]"),
    ("epsilon", "target, a number or `auto` [auto]"),
    ("seeds", "seeds [0,1,2]"),
    ("h", "constant step size (instead of --h-scale)"),
    ("h-scale", "step h = c / n_bar [0.0015]"),
    ("mu", "perturbation scale [0.01]"),
    ("iters", "iteration cap [800000]"),
    ("check-every", "check interval of the largest cell [40000]"),
    ("grad-samples", "samples per gradient-norm estimate [50000]"),
    ("function-seed", "seed of the zoo function [7]"),
    ("out", "also write the JSON result to this file"),
];

const SYNTH_OPTS: &[(&str, &str)] = &[
    ("task", "chunking | rerank | multiclass"),
    ("size", "number of sentences, lists or documents"),
    ("seed", "generator seed [0]"),
    ("out", "output file"),
];

fn subcommand(name: &'static str, about: &'static str, opts: &'static [(&'static str, &'static str)]) -> Command {
    let mut cmd = Command::new(name).about(about).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key = value file with defaults for any option"),
    );
    for (key, help) in opts {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .help(*help),
        );
    }
    cmd
}

pub fn command() -> Command {
    Command::new("szo")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Sparse stochastic zeroth-order optimization")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(subcommand("train", "Run an optimizer on a task", TRAIN_OPTS))
        .subcommand(subcommand("eval", "Score a checkpoint on test data", EVAL_OPTS))
        .subcommand(subcommand("check-theory", "Empirical bound checks as JSON lines", CHECK_OPTS))
        .subcommand(subcommand("sweep", "Iterations-to-epsilon over support sizes", SWEEP_OPTS))
        .subcommand(subcommand("synth-data", "Write a synthetic dataset", SYNTH_OPTS))
}

/// Option values after merging defaults, config file and flags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    fn from_matches(m: &ArgMatches, opts: &[(&str, &str)]) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = m.get_one::<String>("config") {
            let cfg = ConfigFile::load(Path::new(path)).map_err(|e| CliError::config(e.to_string()))?;
            for (k, v) in cfg.entries {
                if !opts.iter().any(|(o, _)| *o == k) {
                    return Err(CliError::config(format!("{path}: unknown key `{k}`")));
                }
                values.insert(k, v);
            }
        }
        for (key, _) in opts {
            if let Some(v) = m.get_one::<String>(key) {
                values.insert(key.to_string(), v.clone());
            }
        }
        Ok(Settings { values })
    }

    /// Builds settings directly, as if every pair were passed as a flag.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Settings {
            values: pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::config(format!("--{key} {v:?}: {e}"))))
            .transpose()
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| CliError::config(format!("missing --{key}")))
    }

    fn list<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> CliResult<Vec<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|e| CliError::config(format!("--{key} {v:?}: {e}")))
                })
                .collect(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out`. Returns the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let opts = match name {
        "train" => TRAIN_OPTS,
        "eval" => EVAL_OPTS,
        "check-theory" => CHECK_OPTS,
        "sweep" => SWEEP_OPTS,
        "synth-data" => SYNTH_OPTS,
        _ => unreachable!("clap rejects unknown subcommands"),
    };
    let result = Settings::from_matches(sub, opts).and_then(|s| match name {
        "train" => cmd_train(&s, out),
        "eval" => cmd_eval(&s, out),
        "check-theory" => cmd_check_theory(&s, out),
        "sweep" => cmd_sweep(&s, out),
        _ => cmd_synth_data(&s, out),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn parse_kinds(spec: &str) -> CliResult<Vec<SyntheticKind>> {
    if spec == "all" {
        return Ok(vec![SyntheticKind::L1Well, SyntheticKind::SmoothBowl, SyntheticKind::NonconvexRipple]);
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|e| CliError::config(format!("--function: {e}"))))
        .collect()
}

fn parse_support(s: &Settings) -> CliResult<SupportMode> {
    match s.raw("support").unwrap_or("fixed") {
        "fixed" => Ok(SupportMode::Fixed),
        "per-sample" => Ok(SupportMode::PerSample),
        other => Err(CliError::config(format!("--support: expected fixed or per-sample, got {other:?}"))),
    }
}

fn synthetic_from(s: &Settings, kind: SyntheticKind, n: usize, n_bar: usize, seed: u64) -> CliResult<SyntheticFunction> {
    Ok(SyntheticFunction::new(kind, n, n_bar, seed, parse_support(s)?, DEFAULT_OFFSET_NOISE)?)
}

fn conll_mode(s: &Settings) -> CliResult<ConllMode> {
    match s.raw("conll-mode").unwrap_or("strict") {
        "strict" => Ok(ConllMode::Strict),
        "lenient" => Ok(ConllMode::Lenient),
        other => Err(CliError::config(format!("--conll-mode: expected strict or lenient, got {other:?}"))),
    }
}

fn load_conll(path: &Path, mode: ConllMode) -> CliResult<Vec<crate::structpred::SequenceInstance>> {
    let parsed = parse_conll(path, mode)?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(parsed.items)
}

fn write_out(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_train(s: &Settings, out: &mut dyn Write) -> CliResult<i32> {
    let task: String = s.require("task")?;
    let mut config = RunConfig::new(
        s.get_or("rule", UpdateRule::TwoPoint)?,
        s.get_or("mode", PerturbationMode::Sparse)?,
        s.get_or("h", 0.01)?,
        s.get_or("mu", 0.01)?,
        s.get_or("iters", 10_000)?,
        s.get_or("seed", 0)?,
    );
    config.eval_every = s.get_or("eval-every", DEFAULT_EVAL_EVERY)?;
    config.objective = s.get_or("objective", CandidateLoss::Map)?;
    config.validate()?;
    let out_dir: PathBuf = s.get_or("out", PathBuf::from("szo-out"))?;
    let dev_path: Option<PathBuf> = s.get("dev")?;

    let (output, features) = match task.as_str() {
        "synth" => {
            let kind = s.get_or("function", SyntheticKind::L1Well)?;
            let func = synthetic_from(s, kind, s.get_or("n", 128)?, s.get_or("n-bar", 8)?, s.get_or("function-seed", 0)?)?;
            (run(&SyntheticProblem { func }, &config)?, None)
        }
        "chunking" => {
            let train_path: PathBuf = s.require("train")?;
            let mode = conll_mode(s)?;
            let scope = match s.raw("label-scope").unwrap_or("gold") {
                "gold" => LabelScope::Gold,
                "all" => LabelScope::AllStates,
                other => return Err(CliError::config(format!("--label-scope: expected gold or all, got {other:?}"))),
            };
            let train = load_conll(&train_path, mode)?;
            let dev = match &dev_path {
                Some(p) => load_conll(p, mode)?,
                None => Vec::new(),
            };
            if train.is_empty() {
                return Err(CliError::data(format!("{}: no sentences", train_path.display())));
            }
            let (problem, registry) = ChunkingProblem::from_corpus(&train, &dev, s.get_or("k", DEFAULT_KBEST)?, scope)?;
            (run(&problem, &config)?, Some(registry))
        }
        "rerank" => {
            let train = parse_nbest(&s.require::<PathBuf>("train")?)?;
            let (dev, references) = match &dev_path {
                Some(p) => {
                    let set = parse_nbest(p)?;
                    if set.arity != train.arity && !set.records.is_empty() {
                        return Err(CliError::data(format!(
                            "{}: feature arity {} differs from training arity {}",
                            p.display(),
                            set.arity,
                            train.arity
                        )));
                    }
                    (set.to_instances()?, set.references())
                }
                None => (Vec::new(), Vec::new()),
            };
            let problem = CandidateProblem::new(train.to_instances()?, dev, DevScore::CorpusBleu { references })?;
            (run(&problem, &config)?, None)
        }
        "multiclass" => {
            let train = parse_docs(&s.require::<PathBuf>("train")?)?;
            let dev = match &dev_path {
                Some(p) => parse_docs(p)?.to_instances()?,
                None => Vec::new(),
            };
            let problem = CandidateProblem::new(train.to_instances()?, dev, DevScore::OneMinusLoss)?;
            (run(&problem, &config)?, None)
        }
        other => return Err(CliError::config(format!("--task: unknown task {other:?}"))),
    };
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::data(format!("{}: {e}", out_dir.display())))?;
    write_train_outputs(&out_dir, &output, features.as_ref())?;
    let mut summary = format!(
        "final_avg_loss={:.4}\n",
        output.log.final_avg_loss().unwrap_or(f64::NAN)
    );
    if let Some(best) = &output.best {
        summary.push_str(&format!("best_dev={:.4} at iter {}\n", best.metric.value, best.iter));
    }
    write_out(out, &summary)?;
    Ok(EXIT_OK)
}

fn write_train_outputs(dir: &Path, output: &RunOutput, features: Option<&FeatureIndex>) -> CliResult {
    write_runlog(&output.log, &dir.join("runlog.csv"))?;
    write_checkpoint(&dir.join("model.txt"), output.model())?;
    if let Some(f) = features {
        let path = dir.join("features.txt");
        std::fs::write(&path, f.to_text()).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn check_dim(model: &SparseVector, dim: usize) -> CliResult {
    if model.dim() != dim {
        return Err(CliError::data(format!(
            "model dimension {} does not match data dimension {dim}",
            model.dim()
        )));
    }
    Ok(())
}

fn cmd_eval(s: &Settings, out: &mut dyn Write) -> CliResult<i32> {
    let task: String = s.require("task")?;
    let model_path: PathBuf = s.require("model")?;
    let model = data_io::read_checkpoint(&model_path)?;
    let line = match task.as_str() {
        "chunking" => {
            let features_path: PathBuf = match s.get("features")? {
                Some(p) => p,
                None => model_path.with_file_name("features.txt"),
            };
            let text = std::fs::read_to_string(&features_path)
                .map_err(|e| CliError::data(format!("{}: {e}", features_path.display())))?;
            let registry = FeatureIndex::from_text(&text);
            check_dim(&model, registry.len())?;
            let test_path: PathBuf = s.require("test")?;
            let test = load_conll(&test_path, conll_mode(s)?)?;
            if test.is_empty() {
                return Err(CliError::data(format!("{}: no sentences", test_path.display())));
            }
            let compiled = test
                .iter()
                .map(|seq| CompiledSentence::compile(seq, &registry))
                .collect::<Result<Vec<_>, _>>()?;
            format!("f1={:.4}", chunking_f1(&model, &compiled)?)
        }
        "rerank" => {
            let test_path: PathBuf = s.require("test")?;
            let set = parse_nbest(&test_path)?;
            if set.records.is_empty() {
                return Err(CliError::data(format!("{}: no n-best lists", test_path.display())));
            }
            check_dim(&model, set.arity)?;
            format!("bleu={:.4}", rerank_bleu(&model, &set.to_instances()?, &set.references())?)
        }
        "multiclass" => {
            let test_path: PathBuf = s.require("test")?;
            let set = parse_docs(&test_path)?;
            if set.docs.is_empty() {
                return Err(CliError::data(format!("{}: no documents", test_path.display())));
            }
            let instances = set.to_instances()?;
            check_dim(&model, instances[0].dim())?;
            format!("accuracy={:.4}", mean_map_score(&model, &instances)?)
        }
        "synth" => {
            let kind = s.get_or("function", SyntheticKind::L1Well)?;
            let func = synthetic_from(s, kind, s.get_or("n", 128)?, s.get_or("n-bar", 8)?, s.get_or("function-seed", 0)?)?;
            check_dim(&model, func.n())?;
            let samples: u64 = s.get_or("samples", 10_000)?;
            if samples == 0 {
                return Err(CliError::config("--samples: must be >= 1"));
            }
            let mut rng = RngStream::new(s.get_or("seed", 0)?, streams::EVAL);
            let mut stats = RunningStats::new();
            for _ in 0..samples {
                let x = func.sample(rng.next_u64());
                stats.push(func.value(&model, &x)?);
            }
            format!("loss={:.4}", stats.mean())
        }
        other => return Err(CliError::config(format!("--task: unknown task {other:?}"))),
    };
    write_out(out, &(line + "\n"))?;
    Ok(EXIT_OK)
}

fn emit_reports(s: &Settings, out: &mut dyn Write, reports: &[BoundReport]) -> CliResult<i32> {
    let text = crate::theory::reports_to_jsonl(reports);
    write_out(out, &text)?;
    if let Some(path) = s.get::<PathBuf>("out")? {
        std::fs::write(&path, &text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(if reports.iter().all(|r| r.pass) {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

fn cmd_check_theory(s: &Settings, out: &mut dyn Write) -> CliResult<i32> {
    let check: String = s.require("check")?;
    let seed: u64 = s.get_or("seed", 0)?;
    let mut rng = RngStream::new(seed, streams::GRADIENT_MC);
    let mut reports = Vec::new();
    match check.as_str() {
        "lemma2" => {
            let samples = s.get_or("samples", 100_000)?;
            for d in s.list("dims", &[1usize, 5, 10, 50, 200])? {
                for p in s.list("p", &[2u32, 4])? {
                    reports.push(moment_bound_check(d, p, samples, &mut rng.substream(d as u64 * 8 + p as u64))?);
                    // The exact moment must also sit inside the 3-sigma band.
                    let exact = exact_moment(d, p);
                    let sd = (exact_moment_variance(d, p) / samples as f64).sqrt();
                    let est = reports.last().expect("just pushed").lhs;
                    reports.push(BoundReport::new(
                        format!("moment_p{p}_exact"),
                        crate::stats::McEstimate {
                            mean: (est - exact).abs(),
                            stderr: 0.0,
                            samples,
                        },
                        3.0 * sd,
                        BoundParams {
                            n_bar: Some(d),
                            ..Default::default()
                        },
                    ));
                }
            }
        }
        "lemma1" => {
            let n = s.get_or("n", 16)?;
            let func = synthetic_from(
                s,
                s.get_or("function", SyntheticKind::SmoothBowl)?,
                n,
                s.get_or("n-bar", n)?,
                s.get_or("function-seed", 0)?,
            )?;
            let mu = s.get_or("mu", 0.05)?;
            let samples = s.get_or("samples", 200_000)?;
            let coords = ActiveSet::full(func.n());
            let bias = estimator_bias_check(&func, &SparseVector::zeros(func.n()), mu, &coords, samples, &mut rng)?;
            reports.push(BoundReport::new(
                format!("lemma1/{}", func.kind().name()),
                crate::stats::McEstimate {
                    mean: bias.max_abs_z,
                    stderr: 0.0,
                    samples,
                },
                LEMMA1_Z_LIMIT,
                BoundParams {
                    n: Some(func.n()),
                    n_bar: Some(func.n_bar()),
                    mu: Some(mu),
                    ..Default::default()
                },
            ));
        }
        "theorem1" | "second-moment" => {
            let kinds = parse_kinds(s.raw("function").unwrap_or("all"))?;
            let n = s.get_or("n", 32)?;
            let n_bar = s.get_or("n-bar", 8)?;
            let mu = s.get_or("mu", 0.05)?;
            for (i, kind) in kinds.into_iter().enumerate() {
                let func = synthetic_from(s, kind, n, n_bar, s.get_or("function-seed", 0)?)?;
                let mut krng = rng.substream(i as u64);
                if check == "theorem1" {
                    let iters = s.get_or("iters", 10_000)?;
                    let config = RunConfig::new(UpdateRule::TwoPoint, PerturbationMode::Sparse, s.get_or("h", 0.01)?, mu, iters, seed);
                    let trace = trace_run(&func, &config, default_thinning(iters))?;
                    reports.push(theorem1_tracker(&trace, &func, s.get_or("grad-samples", 10_000)?, &mut krng)?);
                } else {
                    let samples = s.get_or("samples", 100_000)?;
                    reports.push(second_moment_check(&func, &SparseVector::zeros(n), mu, samples, &mut krng)?);
                }
            }
        }
        "sweep" => {
            let result = complexity_sweep(&sweep_config(s)?)?;
            write_sweep(s, out, &result)?;
            return Ok(if result.is_monotone() { EXIT_OK } else { EXIT_VIOLATION });
        }
        other => return Err(CliError::config(format!("--check: unknown check {other:?}"))),
    }
    emit_reports(s, out, &reports)
}

/// Sweep defaults: l1_well with n = 512, h = 0.0015 / n_bar, mu = 0.01.
fn sweep_config(s: &Settings) -> CliResult<SweepConfig> {
    let step = match (s.get::<f64>("h")?, s.get::<f64>("h-scale")?) {
        (Some(_), Some(_)) => return Err(CliError::config("--h and --h-scale are mutually exclusive")),
        (Some(h), None) => SweepStep::Constant(h),
        (None, c) => SweepStep::InverseNbar(c.unwrap_or(0.0015)),
    };
    let epsilon = match s.raw("epsilon").unwrap_or("auto") {
        "auto" => Epsilon::FromLargestCell,
        v => Epsilon::Fixed(v.parse().map_err(|e| CliError::config(format!("--epsilon {v:?}: {e}")))?),
    };
    Ok(SweepConfig {
        n: s.get_or("n", 512)?,
        n_bars: s.list("n-bars", &[8usize, 32, 128, 512])?,
        epsilon,
        seeds: s.list("seeds", &[0u64, 1, 2])?,
        step,
        mu: s.get_or("mu", 0.01)?,
        max_iters: s.get_or("iters", 800_000)?,
        check_every: s.get_or("check-every", 40_000)?,
        grad_mc_samples: s.get_or("grad-samples", 50_000)?,
        function_seed: s.get_or("function-seed", 7)?,
    })
}

fn write_sweep(s: &Settings, out: &mut dyn Write, result: &SweepResult) -> CliResult {
    let json = serde_json::to_string(result).expect("sweep result serializes") + "\n";
    let mut text = json.clone();
    text.push_str("n_bar,h,median_iters,min_iters,max_iters,censored\n");
    let show = |v: Option<u64>| v.map_or("censored".to_string(), |x| x.to_string());
    for c in &result.cells {
        let (lo, hi) = c.range().map_or((None, None), |(a, b)| (Some(a), Some(b)));
        text.push_str(&format!(
            "{},{:e},{},{},{},{}\n",
            c.n_bar,
            c.h,
            show(c.median_iterations()),
            show(lo),
            show(hi),
            c.censored()
        ));
    }
    write_out(out, &text)?;
    if let Some(path) = s.get::<PathBuf>("out")? {
        std::fs::write(&path, json).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_sweep(s: &Settings, out: &mut dyn Write) -> CliResult<i32> {
    let result = complexity_sweep(&sweep_config(s)?)?;
    write_sweep(s, out, &result)?;
    Ok(EXIT_OK)
}

fn cmd_synth_data(s: &Settings, out: &mut dyn Write) -> CliResult<i32> {
    let task: String = s.require("task")?;
    let size: usize = s.require("size")?;
    let seed: u64 = s.get_or("seed", 0)?;
    let path: PathBuf = s.require("out")?;
    let text = match task.as_str() {
        "chunking" => write_conll(&synth::chunking_corpus(size, seed)),
        "rerank" => write_nbest(&synth::nbest_corpus(size, seed)?),
        "multiclass" => write_docs(&synth::doc_corpus(size, seed)?),
        other => return Err(CliError::config(format!("--task: unknown task {other:?}"))),
    };
    std::fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    write_out(out, &format!("wrote {size} {task} items to {}\n", path.display()))?;
    Ok(EXIT_OK)
}
