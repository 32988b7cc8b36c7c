//! Empirical checks of the smoothing, moment and convergence bounds, and
//! the sweep of iterations-to-accuracy over the effective dimension.
//!
//! Every check returns a [`BoundReport`] whose pass flag is the one-sided
//! test `lhs <= rhs + 3 * stderr`.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::UpdateRule;
use crate::objectives::{make_synthetic, StochasticObjective, SyntheticFunction, SyntheticKind};
use crate::optimizer::{run_with_observer, PerturbationMode, RunConfig};
use crate::perturbation::{moment_bound, moment_estimate, sample_sparse_gaussian};
use crate::rng::{streams, RngStream};
use crate::sparse::{ActiveSet, SparseVector};
use crate::stats::{McEstimate, RunningStats};
use crate::tasks::SyntheticProblem;

/// Number of standard errors allowed above the bound.
pub const SIGMA_SLACK: f64 = 3.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: Option<usize>,
    pub n_bar: Option<usize>,
    pub mu: Option<f64>,
    pub h: Option<f64>,
    pub iters: Option<u64>,
    pub l0: Option<f64>,
    pub l1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub check: String,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub pass: bool,
    pub params: BoundParams,
}

impl BoundReport {
    pub fn new(check: impl Into<String>, lhs: McEstimate, rhs: f64, params: BoundParams) -> Self {
        BoundReport {
            check: check.into(),
            lhs: lhs.mean,
            lhs_stderr: lhs.stderr,
            rhs,
            pass: lhs.mean <= rhs + SIGMA_SLACK * lhs.stderr,
            params,
        }
    }

    /// True when `pass` agrees with the stored numbers.
    pub fn is_consistent(&self) -> bool {
        self.pass == (self.lhs <= self.rhs + SIGMA_SLACK * self.lhs_stderr)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report fields serialize")
    }
}

/// Reports as JSON lines, one per line.
pub fn reports_to_jsonl(reports: &[BoundReport]) -> String {
    reports.iter().map(|r| r.to_json_line() + "\n").collect()
}

fn require_samples(samples: u64, min: u64) -> Result<()> {
    if samples < min {
        return Err(Error::invalid(
            "samples",
            format!("need at least {min}, got {samples}"),
        ));
    }
    Ok(())
}

fn require_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

/// Minimum sample count for the moment and bias checks.
pub const MIN_CHECK_SAMPLES: u64 = 100_000;

/// `E ||u||^p` against `(p + d)^(p/2)` for a `d`-dimensional standard normal.
pub fn moment_bound_check(d: usize, p: u32, samples: u64, rng: &mut RngStream) -> Result<BoundReport> {
    require_samples(samples, MIN_CHECK_SAMPLES)?;
    let active = ActiveSet::full(d);
    let est = moment_estimate(&active, p, samples, rng)?;
    Ok(BoundReport::new(
        format!("moment_p{p}"),
        est,
        moment_bound(d, p),
        BoundParams {
            n_bar: Some(d),
            ..Default::default()
        },
    ))
}

/// One draw of the two-point estimator `s_mu(w)` at a fresh sample.
fn two_point_draw<O: StochasticObjective>(
    obj: &O,
    w: &SparseVector,
    mu: f64,
    rng: &mut RngStream,
) -> Result<SparseVector> {
    let sample = obj.sample(rng.next_u64());
    let u = sample_sparse_gaussian(&obj.active_set(&sample), rng);
    let base = obj.value(w, &sample)?;
    let moved = obj.value(&w.add_scaled(mu, &u.vector)?, &sample)?;
    Ok(u.vector.scale((moved - base) / mu))
}

/// Per-coordinate comparison from [`estimator_bias_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateBias {
    pub index: usize,
    pub estimator: McEstimate,
    pub finite_difference: McEstimate,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub mu: f64,
    pub samples: u64,
    pub coordinates: Vec<CoordinateBias>,
    pub max_abs_z: f64,
}

/// Step of the central differences in [`estimator_bias_check`].
pub const FD_STEP: f64 = 1e-3;

/// Compares the mean of `s_mu(w)` with central finite differences of a
/// Monte Carlo `f_mu` on each coordinate in `coords`. The differences use
/// common random numbers, so each draw is `(F(w + d e_i + mu u, x) -
/// F(w - d e_i + mu u, x)) / 2d`; estimator and differences use independent
/// streams.
pub fn estimator_bias_check<O: StochasticObjective>(
    obj: &O,
    w: &SparseVector,
    mu: f64,
    coords: &ActiveSet,
    samples: u64,
    rng: &mut RngStream,
) -> Result<BiasReport> {
    require_positive("mu", mu)?;
    require_samples(samples, 2)?;
    let idx = coords.indices();
    let mut est: Vec<RunningStats> = vec![RunningStats::new(); idx.len()];
    let mut fd: Vec<RunningStats> = vec![RunningStats::new(); idx.len()];
    let mut est_rng = rng.substream(0);
    let mut fd_rng = rng.substream(1);
    let basis: Vec<SparseVector> = idx
        .iter()
        .map(|&i| SparseVector::from_pairs(obj.dim(), [(i, FD_STEP)]))
        .collect::<Result<_>>()?;
    for _ in 0..samples {
        let s = two_point_draw(obj, w, mu, &mut est_rng)?;
        for (stat, &i) in est.iter_mut().zip(idx) {
            stat.push(s.get(i));
        }
        let sample = obj.sample(fd_rng.next_u64());
        let u = sample_sparse_gaussian(&obj.active_set(&sample), &mut fd_rng);
        let center = w.add_scaled(mu, &u.vector)?;
        for (stat, e) in fd.iter_mut().zip(&basis) {
            let plus = obj.value(&center.add_scaled(1.0, e)?, &sample)?;
            let minus = obj.value(&center.add_scaled(-1.0, e)?, &sample)?;
            stat.push((plus - minus) / (2.0 * FD_STEP));
        }
    }
    let coordinates: Vec<CoordinateBias> = idx
        .iter()
        .zip(est.iter().zip(&fd))
        .map(|(&index, (e, f))| {
            let (e, f) = (e.estimate(), f.estimate());
            let se = e.stderr.hypot(f.stderr);
            let diff = e.mean - f.mean;
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            CoordinateBias {
                index,
                estimator: e,
                finite_difference: f,
                z,
            }
        })
        .collect();
    let max_abs_z = coordinates.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    Ok(BiasReport {
        mu,
        samples,
        coordinates,
        max_abs_z,
    })
}

/// Mean of `||s_mu(w)||^2` against `L0^2 (n_bar + 4)^2`.
pub fn second_moment_check(
    func: &SyntheticFunction,
    w: &SparseVector,
    mu: f64,
    samples: u64,
    rng: &mut RngStream,
) -> Result<BoundReport> {
    require_positive("mu", mu)?;
    require_samples(samples, MIN_CHECK_SAMPLES)?;
    let mut stats = RunningStats::new();
    for _ in 0..samples {
        stats.push(two_point_draw(func, w, mu, rng)?.l2_norm_sq());
    }
    let l0 = func.lipschitz();
    let nb = func.n_bar() as f64;
    Ok(BoundReport::new(
        format!("second_moment/{}", func.kind().name()),
        stats.estimate(),
        l0 * l0 * (nb + 4.0).powi(2),
        BoundParams {
            n: Some(func.n()),
            n_bar: Some(func.n_bar()),
            mu: Some(mu),
            l0: Some(l0),
            ..Default::default()
        },
    ))
}

/// Batches per gradient-norm estimate; batches are paired, so the estimate
/// is a mean of `GRAD_BATCHES / 2` independent terms.
const GRAD_BATCHES: usize = 32;

/// Unbiased Monte Carlo estimate of `||grad f_mu(w)||^2`.
///
/// Draws of `s_mu(w)` are split into batches; for each disjoint pair of
/// batch means `(a, b)` the product `a . b` is unbiased for the squared
/// norm, and the pairs are independent.
pub fn gradient_norm_sq<O: StochasticObjective>(
    obj: &O,
    w: &SparseVector,
    mu: f64,
    samples: u64,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    require_positive("mu", mu)?;
    require_samples(samples, GRAD_BATCHES as u64)?;
    let per_batch = samples / GRAD_BATCHES as u64;
    let mut pairs = RunningStats::new();
    let mut a = vec![0.0; obj.dim()];
    let mut b = vec![0.0; obj.dim()];
    for _ in 0..GRAD_BATCHES / 2 {
        for acc in [&mut a, &mut b] {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..per_batch {
                for (i, v) in two_point_draw(obj, w, mu, rng)?.iter() {
                    acc[i] += v;
                }
            }
        }
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        pairs.push(dot / (per_batch * per_batch) as f64);
    }
    let e = pairs.estimate();
    Ok(McEstimate {
        samples: per_batch * GRAD_BATCHES as u64,
        ..e
    })
}

/// Iterates kept from a run for bound tracking.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateTrace {
    pub config: RunConfig,
    /// `(k, h_k, w_k)` for every `thin`-th iterate.
    pub iterates: Vec<(u64, f64, SparseVector)>,
    pub steps: u64,
    /// Sums of `h_k` and `h_k^2` over every step taken.
    pub sum_h: f64,
    pub sum_h_sq: f64,
}

/// Default thinning: about 50 checked iterates per run.
pub fn default_thinning(iters: u64) -> u64 {
    (iters / 50).max(1)
}

/// Runs `config` on `func`, keeping every `thin`-th iterate.
pub fn trace_run(func: &SyntheticFunction, config: &RunConfig, thin: u64) -> Result<IterateTrace> {
    if thin == 0 {
        return Err(Error::invalid("thin", "must be at least 1"));
    }
    if !config.rule.is_zeroth_order() {
        return Err(Error::invalid("rule", "bound tracking needs a zeroth-order rule"));
    }
    let problem = SyntheticProblem { func: func.clone() };
    let mut iterates = Vec::new();
    let (mut sum_h, mut sum_h_sq, mut steps) = (0.0, 0.0, 0);
    run_with_observer(&problem, config, |info| {
        if info.k % thin == 0 {
            iterates.push((info.k, info.h, info.w_before.clone()));
        }
        sum_h += info.h;
        sum_h_sq += info.h * info.h;
        steps += 1;
        ControlFlow::Continue(())
    })?;
    Ok(IterateTrace {
        config: config.clone(),
        iterates,
        steps,
        sum_h,
        sum_h_sq,
    })
}

/// Monte Carlo `f_mu(w) = E_x E_u F(w + mu u, x)` with `u` on the support of `x`.
pub fn smoothed_objective<O: StochasticObjective>(
    obj: &O,
    w: &SparseVector,
    mu: f64,
    samples: u64,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    require_positive("mu", mu)?;
    let mut stats = RunningStats::new();
    for _ in 0..samples {
        let sample = obj.sample(rng.next_u64());
        let u = sample_sparse_gaussian(&obj.active_set(&sample), rng);
        stats.push(obj.value(&w.add_scaled(mu, &u.vector)?, &sample)?);
    }
    Ok(stats.estimate())
}

/// The smoothness proxy `L1 = (n_bar^(1/2) / mu) L0`.
pub fn l1_proxy(n_bar: usize, mu: f64, l0: f64) -> f64 {
    (n_bar as f64).sqrt() / mu * l0
}

/// Compares the `h`-weighted average of `||grad f_mu(w_k)||^2` over the
/// traced iterates with
/// `(1/S_N) ((f_mu(w_0) - f*) + L1 (n_bar + 4)^2 L0^2 sum h_k^2 / 2)`.
/// `S_N` and `sum h_k^2` run over the steps actually taken.
pub fn theorem1_tracker(
    trace: &IterateTrace,
    func: &SyntheticFunction,
    grad_mc_samples: u64,
    rng: &mut RngStream,
) -> Result<BoundReport> {
    let mu = trace.config.mu;
    require_positive("h", trace.config.h)?;
    if trace.iterates.is_empty() || trace.steps == 0 {
        return Err(Error::invalid("trace", "no iterates recorded"));
    }
    let mut weighted = 0.0;
    let mut var = 0.0;
    let mut weight = 0.0;
    for (k, h, w) in &trace.iterates {
        let g = gradient_norm_sq(func, w, mu, grad_mc_samples, &mut rng.substream(*k))?;
        weighted += h * g.mean;
        var += (h * g.stderr).powi(2);
        weight += h;
    }
    let lhs = McEstimate {
        mean: weighted / weight,
        stderr: var.sqrt() / weight,
        samples: grad_mc_samples * trace.iterates.len() as u64,
    };
    let f0 = smoothed_objective(func, &trace.iterates[0].2, mu, grad_mc_samples, &mut rng.substream(u64::MAX))?;
    let l0 = func.lipschitz();
    let l1 = l1_proxy(func.n_bar(), mu, l0);
    let nb = func.n_bar() as f64;
    let rhs = ((f0.mean - func.f_star()) + 0.5 * l1 * (nb + 4.0).powi(2) * l0 * l0 * trace.sum_h_sq) / trace.sum_h;
    Ok(BoundReport::new(
        format!("theorem1/{}", func.kind().name()),
        lhs,
        rhs,
        BoundParams {
            n: Some(func.n()),
            n_bar: Some(func.n_bar()),
            mu: Some(mu),
            h: Some(trace.config.h),
            iters: Some(trace.steps),
            l0: Some(l0),
            l1: Some(l1),
        },
    ))
}

/// `h* = (alpha R / (n_bar (n_bar + 4)^2 L0^3 (N + 1)))^(1/2)`.
pub fn optimal_step_size(alpha: f64, r: f64, n_bar: usize, l0: f64, n_iters: u64) -> Result<f64> {
    require_positive("alpha", alpha)?;
    require_positive("R", r)?;
    require_positive("L0", l0)?;
    if n_bar == 0 {
        return Err(Error::invalid("n_bar", "must be > 0"));
    }
    let nb = n_bar as f64;
    Ok((alpha * r / (nb * (nb + 4.0).powi(2) * l0.powi(3) * (n_iters as f64 + 1.0))).sqrt())
}

/// The upper bound `L0 R / ((N+1) h) + (h / alpha) n_bar (n_bar+4)^2 L0^4`
/// minimized by [`optimal_step_size`].
pub fn corollary_bound(h: f64, alpha: f64, r: f64, n_bar: usize, l0: f64, n_iters: u64) -> Result<f64> {
    require_positive("h", h)?;
    require_positive("alpha", alpha)?;
    let nb = n_bar as f64;
    Ok(l0 * r / ((n_iters as f64 + 1.0) * h) + h / alpha * nb * (nb + 4.0).powi(2) * l0.powi(4))
}

/// Step size of each sweep cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SweepStep {
    /// The same `h` in every cell.
    Constant(f64),
    /// `h = c / n_bar`, which keeps the expected squared step length
    /// `h^2 E||s_mu||^2 ~ h^2 n_bar^2` equal across cells.
    InverseNbar(f64),
}

impl SweepStep {
    pub fn step_for(self, n_bar: usize) -> f64 {
        match self {
            SweepStep::Constant(h) => h,
            SweepStep::InverseNbar(c) => c / n_bar as f64,
        }
    }
}

/// How the target accuracy is set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Epsilon {
    Fixed(f64),
    /// The largest estimate of `||grad f_mu||^2` that the largest-`n_bar`
    /// cell reaches at its cap, over seeds.
    FromLargestCell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n: usize,
    pub n_bars: Vec<usize>,
    pub epsilon: Epsilon,
    pub seeds: Vec<u64>,
    pub step: SweepStep,
    pub mu: f64,
    pub max_iters: u64,
    /// Check interval of the largest cell; a cell with `n_bar` checks every
    /// `check_every * n_bar / max n_bar` steps (at least 1).
    pub check_every: u64,
    pub grad_mc_samples: u64,
    /// Seed of the zoo function, shared by all cells.
    pub function_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// `None` when the cap was reached first.
    pub iterations: Option<u64>,
    pub last_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n_bar: usize,
    pub h: f64,
    pub outcomes: Vec<SeedOutcome>,
}

impl SweepCell {
    /// Median iterations-to-epsilon with censored runs ordered last; `None`
    /// when the median run is censored. Even counts take the upper middle.
    pub fn median_iterations(&self) -> Option<u64> {
        let mut its: Vec<Option<u64>> = self.outcomes.iter().map(|o| o.iterations).collect();
        its.sort_by_key(|v| v.unwrap_or(u64::MAX));
        its.get(its.len() / 2).copied().flatten()
    }

    /// Smallest and largest finished iteration counts.
    pub fn range(&self) -> Option<(u64, u64)> {
        let done = self.outcomes.iter().filter_map(|o| o.iterations);
        let lo = done.clone().min()?;
        Some((lo, done.max()?))
    }

    pub fn censored(&self) -> usize {
        self.outcomes.iter().filter(|o| o.iterations.is_none()).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub n: usize,
    pub epsilon: f64,
    pub max_iters: u64,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// Whether median iterations are non-decreasing in `n_bar`, with a
    /// censored median counting as larger than any finished one.
    pub fn is_monotone(&self) -> bool {
        let mut cells: Vec<&SweepCell> = self.cells.iter().collect();
        cells.sort_by_key(|c| c.n_bar);
        cells
            .windows(2)
            .all(|p| p[0].median_iterations().unwrap_or(u64::MAX) <= p[1].median_iterations().unwrap_or(u64::MAX))
    }
}

/// Per-run trajectory of gradient-norm estimates at checked iterates.
struct Trajectory {
    checks: Vec<(u64, f64)>,
}

impl Trajectory {
    fn first_below(&self, eps: f64) -> Option<u64> {
        self.checks.iter().find(|(_, g)| *g <= eps).map(|(k, _)| *k)
    }
}

impl SweepConfig {
    pub fn check_interval(&self, n_bar: usize) -> u64 {
        let largest = self.n_bars.iter().copied().max().unwrap_or(n_bar).max(1);
        (self.check_every * n_bar as u64 / largest as u64).max(1)
    }
}

fn run_cell(cfg: &SweepConfig, func: &SyntheticFunction, h: f64, seed: u64, stop_at: Option<f64>) -> Result<Trajectory> {
    let interval = cfg.check_interval(func.n_bar());
    let problem = SyntheticProblem { func: func.clone() };
    let mut config = RunConfig::new(UpdateRule::TwoPoint, PerturbationMode::Sparse, h, cfg.mu, cfg.max_iters, seed);
    config.eval_every = cfg.max_iters.max(1);
    let mc = RngStream::new(seed, streams::GRADIENT_MC);
    let mut checks = Vec::new();
    let mut failure = None;
    let check = |k: u64, w: &SparseVector| gradient_norm_sq(func, w, cfg.mu, cfg.grad_mc_samples, &mut mc.substream(k));
    let out = run_with_observer(&problem, &config, |info| {
        if info.k % interval != 0 {
            return ControlFlow::Continue(());
        }
        match check(info.k, info.w_before) {
            Ok(g) => {
                checks.push((info.k, g.mean));
                if stop_at.is_some_and(|eps| g.mean <= eps) {
                    return ControlFlow::Break(());
                }
                ControlFlow::Continue(())
            }
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let stopped = stop_at.is_some_and(|eps| checks.last().is_some_and(|&(_, g)| g <= eps));
    if !stopped && out.final_state.k == cfg.max_iters {
        let g = check(cfg.max_iters, &out.final_state.w)?;
        checks.push((cfg.max_iters, g.mean));
    }
    Ok(Trajectory { checks })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SZO_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::invalid("SZO_THREADS", format!("not a thread count: {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))
}

/// Runs two-point SZO with sparse perturbations on `l1_well` for every
/// `(n_bar, seed)` cell and records the first checked iterate whose
/// estimated `||grad f_mu||^2` is at most epsilon. Cells run in parallel,
/// capped by the `SZO_THREADS` environment variable.
pub fn complexity_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.seeds.len() < 3 {
        return Err(Error::invalid("seeds", "need at least 3 seeds per cell"));
    }
    if cfg.n_bars.is_empty() || cfg.n_bars.iter().any(|&nb| nb == 0 || nb > cfg.n) {
        return Err(Error::invalid("n_bars", format!("need 1 <= n_bar <= n = {}", cfg.n)));
    }
    if cfg.check_every == 0 {
        return Err(Error::invalid("check_every", "must be at least 1"));
    }
    require_positive("mu", cfg.mu)?;
    for &nb in &cfg.n_bars {
        require_positive("h", cfg.step.step_for(nb))?;
    }
    let funcs: Vec<SyntheticFunction> = cfg
        .n_bars
        .iter()
        .map(|&nb| make_synthetic(SyntheticKind::L1Well, cfg.n, nb, cfg.function_seed))
        .collect::<Result<_>>()?;
    let pool = thread_pool()?;
    let cell_runs = |idx: usize, stop_at: Option<f64>| -> Result<Vec<Trajectory>> {
        let h = cfg.step.step_for(cfg.n_bars[idx]);
        cfg.seeds
            .par_iter()
            .map(|&s| run_cell(cfg, &funcs[idx], h, s, stop_at))
            .collect()
    };
    let (epsilon, largest) = match cfg.epsilon {
        Epsilon::Fixed(eps) => {
            require_positive("epsilon", eps)?;
            (eps, None)
        }
        Epsilon::FromLargestCell => {
            let idx = (0..cfg.n_bars.len()).max_by_key(|&i| cfg.n_bars[i]).expect("n_bars is non-empty");
            let runs = pool.install(|| cell_runs(idx, None))?;
            let eps = runs
                .iter()
                .filter_map(|t| t.checks.last().map(|&(_, g)| g))
                .fold(f64::NEG_INFINITY, f64::max);
            log::info!("sweep epsilon from n_bar = {}: {eps}", cfg.n_bars[idx]);
            (eps, Some((idx, runs)))
        }
    };
    let mut cells = Vec::with_capacity(cfg.n_bars.len());
    let mut largest = largest;
    for (idx, &nb) in cfg.n_bars.iter().enumerate() {
        let runs = match largest.take() {
            Some((j, runs)) if j == idx => runs,
            other => {
                largest = other;
                pool.install(|| cell_runs(idx, Some(epsilon)))?
            }
        };
        let outcomes = cfg
            .seeds
            .iter()
            .zip(&runs)
            .map(|(&seed, t)| SeedOutcome {
                seed,
                iterations: t.first_below(epsilon),
                last_estimate: t.checks.last().map_or(f64::NAN, |c| c.1),
            })
            .collect();
        cells.push(SweepCell {
            n_bar: nb,
            h: cfg.step.step_for(nb),
            outcomes,
        });
    }
    Ok(SweepResult {
        n: cfg.n,
        epsilon,
        max_iters: cfg.max_iters,
        cells,
    })
}
