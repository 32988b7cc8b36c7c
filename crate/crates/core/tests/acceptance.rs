//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs for roughly a quarter of an hour on one core.

use std::cmp::Ordering;
use std::ops::ControlFlow;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use szo::data_io::synth::chunking_corpus;
use szo::estimators::UpdateRule;
use szo::metrics::{chunk_f1, corpus_bleu, sentence_bleu_smoothed};
use szo::objectives::{feedback, make_synthetic, SupportMode, SyntheticFunction, SyntheticKind};
use szo::optimizer::{run, run_with_observer, PerturbationMode, RunConfig};
use szo::perturbation::{exact_moment, exact_moment_variance};
use szo::rng::{streams, RngStream};
use szo::sparse::{ActiveSet, SparseVector};
use szo::structpred::{
    is_valid_bio, kbest_decode, register_features, viterbi_decode, Candidate, CompiledSentence, FeatureIndex,
    Instance, LabelScope, Output, SequenceInstance, Tag, Token,
};
use szo::tasks::{ChunkingProblem, SyntheticProblem};
use szo::theory::{
    complexity_sweep, default_thinning, estimator_bias_check, moment_bound_check, second_moment_check, theorem1_tracker,
    trace_run, Epsilon, SweepConfig, SweepStep,
};
use szo::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs_f64() < limit_secs as f64
}

fn lemma2() -> Result<Outcome> {
    let samples = 100_000;
    let rng = RngStream::new(0, streams::GRADIENT_MC);
    let mut worst = Vec::new();
    let mut pass = true;
    for d in [1usize, 5, 10, 50, 200] {
        for p in [2u32, 4] {
            let r = moment_bound_check(d, p, samples, &mut rng.substream(d as u64 * 8 + p as u64))?;
            let sd = (exact_moment_variance(d, p) / samples as f64).sqrt();
            let z = (r.lhs - exact_moment(d, p)) / sd;
            pass &= r.pass && z.abs() <= 3.0;
            worst.push(z.abs());
        }
    }
    let max_z = worst.iter().copied().fold(0.0, f64::max);
    Ok(outcome(pass, format!("10 (d, p) cells, max |z| vs exact moment {max_z:.2}")))
}

fn lemma1() -> Result<Outcome> {
    let func = make_synthetic(SyntheticKind::SmoothBowl, 16, 16, 0)?;
    let mut rng = RngStream::new(0, streams::GRADIENT_MC);
    let report = estimator_bias_check(&func, &SparseVector::zeros(16), 0.05, &ActiveSet::full(16), 200_000, &mut rng)?;
    Ok(outcome(report.max_abs_z < 4.0, format!("max |z| = {:.2} over 16 coordinates", report.max_abs_z)))
}

fn theorem1() -> Result<Outcome> {
    let rng = RngStream::new(0, streams::GRADIENT_MC);
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, kind) in SyntheticKind::ALL.into_iter().enumerate() {
        let func = make_synthetic(kind, 32, 8, 0)?;
        let config = RunConfig::new(UpdateRule::TwoPoint, PerturbationMode::Sparse, 0.01, 0.05, 10_000, 0);
        let trace = trace_run(&func, &config, default_thinning(10_000))?;
        let r = theorem1_tracker(&trace, &func, 10_000, &mut rng.substream(i as u64))?;
        pass &= r.pass;
        parts.push(format!("{kind} {:.3}+-{:.3} <= {:.1}", r.lhs, r.lhs_stderr, r.rhs));
    }
    Ok(outcome(pass, parts.join("; ")))
}

/// First iteration after 100 at which the running mean of observed losses
/// falls to half its value at iteration 100; `None` if the cap is reached or
/// the run diverges.
fn iterations_to_half(problem: &SyntheticProblem, config: &RunConfig) -> Result<Option<u64>> {
    let mut sum = 0.0;
    let mut reference = f64::NAN;
    let mut hit = None;
    let result = run_with_observer(problem, config, |info| {
        sum += info.observed;
        let k = info.k + 1;
        let avg = sum / k as f64;
        if k == 100 {
            reference = avg;
        } else if k > 100 && avg <= 0.5 * reference {
            hit = Some(k);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    match result {
        Ok(_) => Ok(hit),
        Err(szo::Error::NonFinite { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn sparse_vs_all() -> Result<Outcome> {
    const CAP: u64 = 50_000;
    let func = SyntheticFunction::new(SyntheticKind::L1Well, 512, 8, 1, SupportMode::PerSample, 0.1)?;
    let problem = SyntheticProblem { func };
    let mut pass = true;
    let mut parts = Vec::new();
    for (rule, h, mu) in [
        (UpdateRule::TwoPoint, 0.01, 0.05),
        (UpdateRule::FunctionComparison, 0.01, 0.05),
        (UpdateRule::BaselineComparison, 0.005, 0.5),
    ] {
        let mut medians = Vec::new();
        for mode in [PerturbationMode::Sparse, PerturbationMode::All] {
            let mut iters = Vec::new();
            for seed in 1..=3 {
                let config = RunConfig::new(rule, mode, h, mu, CAP, seed);
                iters.push(iterations_to_half(&problem, &config)?.unwrap_or(CAP + 1));
            }
            iters.sort_unstable();
            medians.push(iters[1]);
        }
        pass &= medians[0] < medians[1];
        let show = |m: u64| if m > CAP { "censored".to_string() } else { m.to_string() };
        parts.push(format!("{rule} sparse {} vs all {}", show(medians[0]), show(medians[1])));
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn rule_ordering() -> Result<Outcome> {
    const ITERS: u64 = 50_000;
    const TOL: f64 = 0.01;
    let train = chunking_corpus(500, 11);
    let dev = chunking_corpus(100, 12);
    let (problem, registry) = ChunkingProblem::from_corpus(&train, &dev, 20, LabelScope::Gold)?;
    let rules = [
        UpdateRule::Sfo,
        UpdateRule::TwoPoint,
        UpdateRule::BaselineComparison,
        UpdateRule::FunctionComparison,
    ];
    let mut means = Vec::new();
    for rule in rules {
        let mut total = 0.0;
        for seed in 0..3 {
            let mut config = RunConfig::new(rule, PerturbationMode::Sparse, 0.01, 0.01, ITERS, seed);
            config.eval_every = ITERS;
            total += run(&problem, &config)?.log.final_avg_loss().expect("nonempty run");
        }
        means.push(total / 3.0);
    }
    let gaps: Vec<bool> = means.windows(2).map(|w| w[0] <= w[1] + TOL).collect();
    let shown: Vec<String> = rules.iter().zip(&means).map(|(r, m)| format!("{r} {m:.4}")).collect();
    let broken: Vec<String> = gaps
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| format!("{} > {}", rules[i], rules[i + 1]))
        .collect();
    let mut detail = format!("dim {}; final avg loss {}", registry.len(), shown.join(", "));
    if !broken.is_empty() {
        detail.push_str(&format!("; violated: {}", broken.join(", ")));
    }
    Ok(outcome(broken.is_empty(), detail))
}

fn sweep() -> Result<Outcome> {
    let cfg = SweepConfig {
        n: 512,
        n_bars: vec![8, 32, 128, 512],
        epsilon: Epsilon::FromLargestCell,
        seeds: vec![0, 1, 2],
        step: SweepStep::InverseNbar(0.0015),
        mu: 0.01,
        max_iters: 800_000,
        check_every: 40_000,
        grad_mc_samples: 50_000,
        function_seed: 7,
    };
    let result = complexity_sweep(&cfg)?;
    let medians: Vec<u64> = result
        .cells
        .iter()
        .map(|c| c.median_iterations().unwrap_or(cfg.max_iters + 1))
        .collect();
    let half = 2 * medians[0] <= medians[medians.len() - 1];
    Ok(outcome(
        result.is_monotone() && half,
        format!("epsilon {:.4}, medians {:?} for n_bar {:?}", result.epsilon, medians, cfg.n_bars),
    ))
}

/// Valid taggings sorted by score (explicit feature vectors), then tag order.
fn enumerate(weights: &SparseVector, sent: &CompiledSentence) -> Result<Vec<(Vec<Tag>, f64)>> {
    let mut all: Vec<Vec<Tag>> = vec![vec![]];
    for _ in 0..sent.len() {
        all = all
            .into_iter()
            .flat_map(|p| Tag::ALL.iter().map(move |&t| [p.clone(), vec![t]].concat()))
            .collect();
    }
    let mut out = Vec::new();
    for tags in all.into_iter().filter(|t| is_valid_bio(t)) {
        let score = sent.features_of(&tags)?.dot(weights)?;
        out.push((tags, score));
    }
    out.sort_by(|a, b| match b.1.partial_cmp(&a.1).expect("finite scores") {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    Ok(out)
}

fn decoder_oracle() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for _ in 0..200 {
        let len = 1 + (rng.next_u32() % 6) as usize;
        let tokens: Vec<Token> = (0..len)
            .map(|_| Token::new(["a", "b", "c"][rng.next_u32() as usize % 3], ["N", "V"][rng.next_u32() as usize % 2]))
            .collect();
        let seq = SequenceInstance::new(tokens, vec![Tag::O; len])?;
        let mut registry = FeatureIndex::new();
        register_features(&seq, &mut registry, LabelScope::AllStates)?;
        registry.freeze();
        let sent = CompiledSentence::compile(&seq, &registry)?;
        let dense: Vec<f64> = (0..registry.len()).map(|_| (rng.next_u32() % 7) as f64 - 3.0).collect();
        let w = SparseVector::from_dense(&dense);
        let want = enumerate(&w, &sent)?;
        let got = kbest_decode(&w, &sent, want.len())?;
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(g, (t, s))| &g.tags == t && (g.score - s).abs() < 1e-9)
            && viterbi_decode(&w, &sent)? == want[0].0;
        if !same {
            mismatches += 1;
        }
    }
    Ok(outcome(mismatches == 0, format!("{mismatches} mismatches over 200 models")))
}

fn metric_goldens() -> Result<Outcome> {
    let t = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    let mut checks: Vec<(&str, f64, f64)> = Vec::new();
    use Tag::{B, I, O};
    checks.push(("f1", chunk_f1(&[B, I, O, O], &[B, I, O, B])?, 2.0 / 3.0));
    checks.push((
        "bleu disjoint",
        sentence_bleu_smoothed(&t("a b c d e"), &t("v w x y z"))?,
        (0.01f64 / 5.0 * 0.01 / 4.0 * 0.01 / 3.0 * 0.01 / 2.0).powf(0.25),
    ));
    checks.push((
        "bleu brevity",
        sentence_bleu_smoothed(&t("a"), &t("a b c d"))?,
        (-3.0f64).exp() * 0.01f64.powf(0.75),
    ));
    checks.push((
        "corpus bleu",
        corpus_bleu(&[(t("a b c d e"), t("a b c d e")), (t("a b x d"), t("a b c d"))])?,
        (8.0f64 / 9.0 * 5.0 / 7.0 * 3.0 / 5.0 * 2.0 / 3.0).powf(0.25),
    ));
    let same = t("the cat sat on the mat");
    let bleu = sentence_bleu_smoothed(&same, &same)?;
    checks.push(("bleu identity", bleu, 1.0));
    let inst = Instance::new(
        "x",
        vec![Candidate::new(Output::Tokens(same.clone()), SparseVector::from_dense(&[1.0]), 1.0 - bleu)],
    )?;
    checks.push(("loss identity", feedback(&inst, 0)?, 0.0));
    let bad: Vec<&str> = checks.iter().filter(|(_, g, w)| (g - w).abs() >= 5e-11).map(|c| c.0).collect();
    Ok(outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} golden values match to 1e-10", checks.len())
        } else {
            format!("mismatched: {}", bad.join(", "))
        },
    ))
}

fn szo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_szo"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().map_err(|source| szo::Error::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let d = dir.path();
    let p = |name: &str| d.join(name).to_str().expect("utf-8 temp path").to_string();
    for (task, size, file) in [("chunking", "40", "c.conll"), ("rerank", "30", "r.nbest"), ("multiclass", "60", "m.docs")] {
        szo(&["synth-data", "--task", task, "--size", size, "--seed", "3", "--out", &p(file)]);
    }
    let runs: Vec<Vec<String>> = vec![
        vec!["--task", "synth", "--rule", "baseline", "--h", "0.005", "--mu", "0.5", "--iters", "3000", "--seed", "2"],
        vec!["--task", "synth", "--mode", "all", "--support", "per-sample", "--iters", "2000"],
        vec!["--task", "chunking", "--train", &p("c.conll"), "--dev", &p("c.conll"), "--iters", "500", "--eval-every", "100"],
        vec!["--task", "rerank", "--train", &p("r.nbest"), "--dev", &p("r.nbest"), "--rule", "func-cmp", "--iters", "2000"],
        vec!["--task", "multiclass", "--train", &p("m.docs"), "--rule", "sfo", "--iters", "2000"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut identical = 0;
    let mut differing = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = p(&format!("run{i}_{rep}"));
            let mut full: Vec<&str> = vec!["train"];
            full.extend(args.iter().map(String::as_str));
            full.extend(["--out", out.as_str()]);
            let o = szo(&full);
            let read = |f: &str| std::fs::read(Path::new(&out).join(f)).unwrap_or_default();
            outputs.push((o.status.code(), o.stdout, read("runlog.csv"), read("model.txt")));
        }
        let ok = outputs[0].0 == Some(0) && !outputs[0].2.is_empty() && outputs[0] == outputs[1];
        if ok {
            identical += 1;
        } else {
            differing.push(args[1].clone());
        }
    }
    let mut detail = format!("{identical}/{} train commands byte-identical", runs.len());
    if !differing.is_empty() {
        detail.push_str(&format!("; differing: {}", differing.join(", ")));
    }
    Ok(outcome(identical == runs.len(), detail))
}

fn second_moment() -> Result<Outcome> {
    let rng = RngStream::new(0, streams::GRADIENT_MC);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, kind) in SyntheticKind::ALL.into_iter().enumerate() {
        let func = make_synthetic(kind, 32, 8, 0)?;
        let r = second_moment_check(&func, &SparseVector::zeros(32), 0.05, 100_000, &mut rng.substream(i as u64))?;
        // A sample mean above the bound fails regardless of its standard error.
        let ok = r.lhs <= r.rhs;
        pass &= ok;
        parts.push(format!("{kind} {:.1} <= {:.0}", r.lhs, r.rhs));
    }
    Ok(outcome(pass, parts.join("; ")))
}

type Criterion = (&'static str, Option<u64>, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        ("moment bounds", Some(30), lemma2),
        ("estimator bias", Some(120), lemma1),
        ("convergence bound", Some(300), theorem1),
        ("sparse vs all perturbations", Some(300), sparse_vs_all),
        ("rule ordering on chunking", Some(600), rule_ordering),
        ("complexity sweep", Some(900), sweep),
        ("decoder oracle", None, decoder_oracle),
        ("metric golden values", None, metric_goldens),
        ("determinism", None, determinism),
        ("second-moment bound", None, second_moment),
    ];
    let only: Option<usize> = std::env::var("SZO_ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => {
                let in_time = limit.is_none_or(|l| within(elapsed, l));
                let mut detail = o.detail;
                if !in_time {
                    detail.push_str(&format!("; over the {}s limit", limit.expect("checked")));
                }
                (o.pass && in_time, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        println!(
            "{} criterion {number} ({name}): {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
