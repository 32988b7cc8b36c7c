//! The training loop: sample an input, perturb the weights on its active
//! set, apply one update rule, log the observed loss.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    baseline_comparison_delta, function_comparison_delta, two_point_delta, BaselineState,
    Estimate, UpdateRule,
};
use crate::objectives::CandidateLoss;
use crate::perturbation::sample_sparse_gaussian;
use crate::rng::{streams, RngStream};
use crate::sparse::{ActiveSet, SparseVector};

/// Which coordinates get perturbed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PerturbationMode {
    /// Every coordinate of `w`.
    All,
    /// Only the active features of the current input.
    Sparse,
}

impl fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbationMode::All => "all",
            PerturbationMode::Sparse => "sparse",
        })
    }
}

impl FromStr for PerturbationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PerturbationMode::All),
            "sparse" => Ok(PerturbationMode::Sparse),
            _ => Err(Error::invalid("mode", format!("expected `all` or `sparse`, got {s:?}"))),
        }
    }
}

pub const DEFAULT_EVAL_EVERY: u64 = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub rule: UpdateRule,
    pub mu: f64,
    /// Constant step size.
    pub h: f64,
    pub max_iters: u64,
    pub eval_every: u64,
    pub seed: u64,
    pub mode: PerturbationMode,
    /// Loss over candidate sets; synthetic problems ignore it.
    pub objective: CandidateLoss,
}

impl RunConfig {
    pub fn new(rule: UpdateRule, mode: PerturbationMode, h: f64, mu: f64, max_iters: u64, seed: u64) -> Self {
        RunConfig {
            rule,
            mu,
            h,
            max_iters,
            eval_every: DEFAULT_EVAL_EVERY,
            seed,
            mode,
            objective: CandidateLoss::Map,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid("h", format!("must be > 0, got {}", self.h)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("mu", format!("must be > 0, got {}", self.mu)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("iters", "must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every", "must be >= 1"));
        }
        self.objective.validate()
    }
}

/// A dev-set score and its direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metric {
    pub value: f64,
    pub higher_is_better: bool,
}

impl Metric {
    fn better_than(&self, other: &Metric) -> bool {
        if self.higher_is_better {
            self.value > other.value
        } else {
            self.value < other.value
        }
    }
}

/// A learning problem seen through bandit feedback.
pub trait Problem {
    type Sample;

    fn dim(&self) -> usize;

    /// Draws the input for step `k`. `w` is the current iterate, for problems
    /// whose candidate sets depend on it.
    fn sample(&self, k: u64, w: &SparseVector, rng: &mut RngStream) -> Result<Self::Sample>;

    /// Active features of a sample.
    fn active_set(&self, sample: &Self::Sample) -> ActiveSet;

    /// `F(w, x)` under the configured objective.
    fn loss(&self, sample: &Self::Sample, w: &SparseVector, objective: CandidateLoss) -> Result<f64>;

    /// The first-order update, for problems that support it.
    fn policy_gradient(&self, _sample: &Self::Sample, _w: &SparseVector, _rng: &mut RngStream) -> Result<Estimate> {
        Err(Error::Unsupported("first-order updates need a candidate-set task".into()))
    }

    /// Dev-set metric at unperturbed weights; `None` without dev data.
    fn dev_metric(&self, _w: &SparseVector) -> Result<Option<Metric>> {
        Ok(None)
    }
}

/// One logged iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    /// 1-based step count.
    pub iter: u64,
    /// Observed perturbed loss at this step.
    pub loss: f64,
    /// Average cumulative loss over steps `1..=iter`.
    pub avg_cum_loss: f64,
    /// Number of perturbed coordinates.
    pub nbar: usize,
    pub dev_metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn final_avg_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.avg_cum_loss)
    }
}

/// Mean of the first `t` observed losses.
pub fn avg_cumulative_loss(log: &RunLog, t: u64) -> Result<f64> {
    if t == 0 || t as usize > log.rows.len() {
        return Err(Error::invalid(
            "t",
            format!("must be in 1..={}, got {t}", log.rows.len()),
        ));
    }
    let sum: f64 = log.rows[..t as usize].iter().map(|r| r.loss).sum();
    Ok(sum / t as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub iter: u64,
    pub weights: SparseVector,
    pub metric: Metric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub w: SparseVector,
    /// Steps taken so far.
    pub k: u64,
    pub baseline: BaselineState,
    pub cumulative_loss: f64,
}

impl OptimizerState {
    pub fn new(dim: usize) -> Self {
        OptimizerState {
            w: SparseVector::zeros(dim),
            k: 0,
            baseline: BaselineState::default(),
            cumulative_loss: 0.0,
        }
    }
}

/// What a step did, for bound tracking.
#[derive(Clone, Debug)]
pub struct StepInfo<'a> {
    /// Index of the iterate the step started from (`w_k`).
    pub k: u64,
    pub w_before: &'a SparseVector,
    pub h: f64,
    pub delta_norm_sq: f64,
    pub observed: f64,
    pub nbar: usize,
}

/// Per-run random streams; step `k` uses substream `k` of each.
#[derive(Clone, Debug)]
struct Streams {
    data: RngStream,
    perturb: RngStream,
    sfo: RngStream,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Streams {
            data: RngStream::new(seed, streams::DATA),
            perturb: RngStream::new(seed, streams::PERTURB),
            sfo: RngStream::new(seed, streams::SFO),
        }
    }
}

fn step_impl<P: Problem>(
    problem: &P,
    config: &RunConfig,
    state: &mut OptimizerState,
    streams: &Streams,
) -> Result<(Estimate, usize, SparseVector)> {
    let k = state.k;
    let sample = problem.sample(k, &state.w, &mut streams.data.substream(k))?;
    let loss = |v: &SparseVector| problem.loss(&sample, v, config.objective);
    let (est, nbar) = if config.rule == UpdateRule::Sfo {
        let est = problem.policy_gradient(&sample, &state.w, &mut streams.sfo.substream(k))?;
        (est, problem.active_set(&sample).len())
    } else {
        let active = match config.mode {
            PerturbationMode::Sparse => problem.active_set(&sample),
            PerturbationMode::All => ActiveSet::full(problem.dim()),
        };
        let pert = sample_sparse_gaussian(&active, &mut streams.perturb.substream(k));
        let est = match config.rule {
            UpdateRule::TwoPoint => two_point_delta(loss, &state.w, &pert, config.mu)?,
            UpdateRule::FunctionComparison => {
                function_comparison_delta(loss, &state.w, &pert, config.mu)?
            }
            UpdateRule::BaselineComparison => {
                let (est, next) =
                    baseline_comparison_delta(loss, &state.w, &pert, config.mu, state.baseline)?;
                state.baseline = next;
                est
            }
            UpdateRule::Sfo => unreachable!("handled above"),
        };
        (est, pert.effective_dim)
    };
    if !est.observed.is_finite() {
        return Err(Error::NonFinite {
            iter: k + 1,
            what: "observed loss".into(),
        });
    }
    if !est.delta.is_finite() {
        return Err(Error::NonFinite {
            iter: k + 1,
            what: "update delta".into(),
        });
    }
    let next = state.w.add_scaled(-config.h, &est.delta)?;
    if !next.is_finite() {
        return Err(Error::NonFinite {
            iter: k + 1,
            what: "weights".into(),
        });
    }
    let before = std::mem::replace(&mut state.w, next);
    state.k += 1;
    state.cumulative_loss += est.observed;
    Ok((est, nbar, before))
}

/// One step of the loop from `state`, returning the observed loss.
pub fn step<P: Problem>(problem: &P, config: &RunConfig, state: &mut OptimizerState) -> Result<f64> {
    config.validate()?;
    let streams = Streams::new(config.seed);
    let (est, _, _) = step_impl(problem, config, state, &streams)?;
    Ok(est.observed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub log: RunLog,
    pub best: Option<Checkpoint>,
    pub final_state: OptimizerState,
}

impl RunOutput {
    /// The best dev checkpoint, or the final iterate without dev data.
    pub fn model(&self) -> &SparseVector {
        self.best
            .as_ref()
            .map(|c| &c.weights)
            .unwrap_or(&self.final_state.w)
    }
}

pub fn run<P: Problem>(problem: &P, config: &RunConfig) -> Result<RunOutput> {
    run_with_observer(problem, config, |_| ControlFlow::Continue(()))
}

/// Runs up to `max_iters` steps, evaluating the dev metric at unperturbed
/// weights every `eval_every` steps and after the last step. The observer
/// sees every step and may stop the run early.
pub fn run_with_observer<P, O>(problem: &P, config: &RunConfig, mut observer: O) -> Result<RunOutput>
where
    P: Problem,
    O: FnMut(&StepInfo<'_>) -> ControlFlow<()>,
{
    config.validate()?;
    let streams = Streams::new(config.seed);
    let mut state = OptimizerState::new(problem.dim());
    let mut log = RunLog::default();
    let mut best: Option<Checkpoint> = None;
    let mut has_dev = true;
    while state.k < config.max_iters {
        let (est, nbar, before) = step_impl(problem, config, &mut state, &streams)?;
        let flow = observer(&StepInfo {
            k: state.k - 1,
            w_before: &before,
            h: config.h,
            delta_norm_sq: est.delta.l2_norm_sq(),
            observed: est.observed,
            nbar,
        });
        let last = state.k == config.max_iters || flow.is_break();
        let mut dev_metric = None;
        if has_dev && (state.k.is_multiple_of(config.eval_every) || last) {
            match problem.dev_metric(&state.w)? {
                Some(m) => {
                    dev_metric = Some(m.value);
                    if best.as_ref().is_none_or(|b| m.better_than(&b.metric)) {
                        best = Some(Checkpoint {
                            iter: state.k,
                            weights: state.w.clone(),
                            metric: m,
                        });
                    }
                }
                None => {
                    log::warn!("no dev data; keeping the final iterate instead of a dev-selected checkpoint");
                    has_dev = false;
                }
            }
        }
        log.rows.push(LogRow {
            iter: state.k,
            loss: est.observed,
            avg_cum_loss: state.cumulative_loss / state.k as f64,
            nbar,
            dev_metric,
        });
        if flow.is_break() {
            break;
        }
    }
    Ok(RunOutput {
        log,
        best,
        final_state: state,
    })
}
