//! Stochastic objectives `F(w, x)`: task losses over candidate sets and a
//! zoo of synthetic Lipschitz functions with known constants.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::perturbation::sample_sparse_gaussian;
use crate::rng::{streams, RngStream};
use crate::sparse::{ActiveSet, SparseVector};
use crate::stats::{McEstimate, RunningStats};
use crate::structpred::{argmax_first, Instance};

/// How a candidate set turns a weight vector into a loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CandidateLoss {
    /// Loss of the highest-scoring candidate.
    Map,
    /// Expected loss under a softmax of `gamma`-scaled scores. An infinite
    /// `gamma` is the same as `Map`.
    Annealed { gamma: f64 },
}

impl CandidateLoss {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CandidateLoss::Annealed { gamma } if gamma.is_nan() || gamma < 0.0 => {
                Err(Error::invalid("gamma", format!("must be >= 0, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, weights: &SparseVector, instance: &Instance) -> Result<f64> {
        match *self {
            CandidateLoss::Map => map_loss(weights, instance),
            CandidateLoss::Annealed { gamma } => annealed_loss(weights, instance, gamma),
        }
    }
}

impl fmt::Display for CandidateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateLoss::Map => write!(f, "map"),
            CandidateLoss::Annealed { gamma } => write!(f, "annealed:{gamma}"),
        }
    }
}

impl FromStr for CandidateLoss {
    type Err = Error;

    /// `map`, `annealed:<gamma>` or `annealed:inf`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "map" {
            return Ok(CandidateLoss::Map);
        }
        if let Some(g) = s.strip_prefix("annealed:") {
            let gamma: f64 = g
                .parse()
                .map_err(|_| Error::invalid("objective", format!("bad temperature {g:?}")))?;
            let obj = CandidateLoss::Annealed { gamma };
            obj.validate()?;
            return Ok(obj);
        }
        Err(Error::invalid(
            "objective",
            format!("expected `map` or `annealed:<gamma>`, got {s:?}"),
        ))
    }
}

/// Bandit feedback: the task loss of one chosen candidate. This is the only
/// way a learner observes losses.
pub fn feedback(instance: &Instance, candidate: usize) -> Result<f64> {
    instance
        .candidates()
        .get(candidate)
        .map(|c| c.hidden_loss())
        .ok_or(Error::IndexOutOfRange {
            index: candidate,
            dim: instance.candidates().len(),
        })
}

/// Loss of the MAP candidate; ties go to the lowest candidate index.
pub fn map_loss(weights: &SparseVector, instance: &Instance) -> Result<f64> {
    let best = instance.argmax(weights)?;
    feedback(instance, best)
}

/// Softmax of `gamma * scores`, computed after subtracting the maximum.
pub fn softmax(scores: &[f64], gamma: f64) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    if gamma.is_infinite() {
        let mut p = vec![0.0; scores.len()];
        p[argmax_first(scores)] = 1.0;
        return p;
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = scores.iter().map(|s| (gamma * (s - max)).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Expected loss under `softmax(gamma * scores)`; `gamma = inf` is the MAP loss.
pub fn annealed_loss(weights: &SparseVector, instance: &Instance, gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::invalid("gamma", format!("must be >= 0, got {gamma}")));
    }
    if gamma.is_infinite() {
        return map_loss(weights, instance);
    }
    let p = softmax(&instance.scores(weights)?, gamma);
    let losses = instance.candidates().iter().map(|c| c.hidden_loss());
    let value: f64 = p.iter().zip(losses).map(|(p, l)| p * l).sum();
    // Keep rounding from leaving the range of the candidate losses.
    let (lo, hi) = instance
        .candidates()
        .iter()
        .map(|c| c.hidden_loss())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l), hi.max(l)));
    Ok(value.clamp(lo, hi))
}

/// Monte Carlo estimate of `f_mu(w) = E_u F(w + mu u)` with `u` restricted
/// to `active`.
pub fn smoothed_value<F>(
    mut f: F,
    w: &SparseVector,
    mu: f64,
    active: &ActiveSet,
    num_samples: u64,
    rng: &mut RngStream,
) -> Result<McEstimate>
where
    F: FnMut(&SparseVector) -> Result<f64>,
{
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::invalid("mu", format!("must be > 0, got {mu}")));
    }
    let mut stats = RunningStats::new();
    for _ in 0..num_samples {
        let u = sample_sparse_gaussian(active, rng);
        stats.push(f(&w.add_scaled(mu, &u.vector)?)?);
    }
    Ok(stats.estimate())
}

/// A stochastic objective indexed by a sample number `x`, as needed by the
/// theory checks.
pub trait StochasticObjective: Sync {
    type Sample: Send;

    fn dim(&self) -> usize;
    /// The `x`-th sample; a pure function of `x`.
    fn sample(&self, x: u64) -> Self::Sample;
    /// Coordinates that can influence `F(., x)`.
    fn active_set(&self, sample: &Self::Sample) -> ActiveSet;
    fn value(&self, w: &SparseVector, sample: &Self::Sample) -> Result<f64>;
}

/// Members of the synthetic zoo.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// `||w_A - c_x||_1`, nonsmooth.
    L1Well,
    /// `sqrt(1 + ||w_A - c_x||^2) - 1`, smooth.
    SmoothBowl,
    /// `||w_A - c_x||_1 + 0.1 sum_{i in A} sin(w_i)`, nonconvex.
    NonconvexRipple,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 3] = [
        SyntheticKind::L1Well,
        SyntheticKind::SmoothBowl,
        SyntheticKind::NonconvexRipple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::L1Well => "l1_well",
            SyntheticKind::SmoothBowl => "smooth_bowl",
            SyntheticKind::NonconvexRipple => "nonconvex_ripple",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid("synthetic", format!("unknown function {s:?}")))
    }
}

/// Which coordinates a sample depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportMode {
    /// Every sample uses coordinates `0..n_bar`; the rest are inert.
    Fixed,
    /// Each sample draws its own `n_bar` coordinates uniformly from `0..n`,
    /// like the per-input active features of a sparse task.
    PerSample,
}

/// Default spread of the per-sample offsets `c_x` around the center.
pub const DEFAULT_OFFSET_NOISE: f64 = 0.1;

/// Amplitude of the sine term of [`SyntheticKind::NonconvexRipple`].
const RIPPLE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticFunction {
    kind: SyntheticKind,
    n: usize,
    n_bar: usize,
    seed: u64,
    support: SupportMode,
    offset_noise: f64,
    /// Center of the per-sample offsets, one entry per coordinate.
    center: Vec<f64>,
}

/// One sample `x`: its support and the offsets `c_x` on that support.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub active: ActiveSet,
    pub offsets: Vec<f64>,
}

/// Builds a zoo member with a fixed support and the default offset noise.
pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    n_bar: usize,
    seed: u64,
) -> Result<SyntheticFunction> {
    SyntheticFunction::new(kind, n, n_bar, seed, SupportMode::Fixed, DEFAULT_OFFSET_NOISE)
}

impl SyntheticFunction {
    pub fn new(
        kind: SyntheticKind,
        n: usize,
        n_bar: usize,
        seed: u64,
        support: SupportMode,
        offset_noise: f64,
    ) -> Result<Self> {
        if n_bar == 0 || n_bar > n {
            return Err(Error::invalid(
                "n_bar",
                format!("need 1 <= n_bar <= n, got n_bar={n_bar}, n={n}"),
            ));
        }
        if !offset_noise.is_finite() || offset_noise < 0.0 {
            return Err(Error::invalid("offset_noise", "must be finite and >= 0"));
        }
        // Center entries have magnitude in [1, 2] with random sign, so w = 0
        // starts well away from the optimum.
        let mut rng = RngStream::new(seed, streams::SYNTH).substream(u64::MAX);
        let center = (0..n)
            .map(|_| {
                let mag = 1.0 + rng.next_f64();
                if rng.below(2) == 0 {
                    -mag
                } else {
                    mag
                }
            })
            .collect();
        Ok(SyntheticFunction {
            kind,
            n,
            n_bar,
            seed,
            support,
            offset_noise,
            center,
        })
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_bar(&self) -> usize {
        self.n_bar
    }

    pub fn support(&self) -> SupportMode {
        self.support
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Lipschitz constant of every `F(., x)`.
    pub fn lipschitz(&self) -> f64 {
        let s = (self.n_bar as f64).sqrt();
        match self.kind {
            SyntheticKind::L1Well => s,
            SyntheticKind::SmoothBowl => 1.0,
            SyntheticKind::NonconvexRipple => (1.0 + RIPPLE) * s,
        }
    }

    /// A lower bound on every `F(w, x)`.
    pub fn f_star(&self) -> f64 {
        match self.kind {
            SyntheticKind::L1Well | SyntheticKind::SmoothBowl => 0.0,
            SyntheticKind::NonconvexRipple => -RIPPLE * self.n_bar as f64,
        }
    }

    fn sample_support(&self, rng: &mut RngStream) -> Vec<usize> {
        match self.support {
            SupportMode::Fixed => (0..self.n_bar).collect(),
            SupportMode::PerSample => {
                // Floyd's algorithm: a uniform n_bar-subset in O(n_bar) draws.
                let mut chosen = HashSet::with_capacity(self.n_bar);
                let mut out = Vec::with_capacity(self.n_bar);
                for j in (self.n - self.n_bar)..self.n {
                    let t = rng.below(j as u64 + 1) as usize;
                    let pick = if chosen.contains(&t) { j } else { t };
                    chosen.insert(pick);
                    out.push(pick);
                }
                out.sort_unstable();
                out
            }
        }
    }

    /// Evaluates `F(w, x)` given the coordinates of `w` on the support.
    pub fn value_at(&self, w_active: &[f64], sample: &SyntheticSample) -> f64 {
        let diffs = w_active.iter().zip(&sample.offsets).map(|(w, c)| w - c);
        match self.kind {
            SyntheticKind::L1Well => diffs.map(f64::abs).sum(),
            SyntheticKind::SmoothBowl => {
                let sq: f64 = diffs.map(|d| d * d).sum();
                // sqrt(1 + s) - 1 without cancellation for small s.
                sq / ((1.0 + sq).sqrt() + 1.0)
            }
            SyntheticKind::NonconvexRipple => {
                let l1: f64 = diffs.map(f64::abs).sum();
                l1 + RIPPLE * w_active.iter().map(|w| w.sin()).sum::<f64>()
            }
        }
    }
}

/// Coordinates of `w` at the sorted `indices`.
pub(crate) fn gather(w: &SparseVector, indices: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(indices.len());
    let (wi, wv) = (w.indices(), w.values());
    let mut p = 0;
    for &i in indices {
        while p < wi.len() && wi[p] < i {
            p += 1;
        }
        out.push(if p < wi.len() && wi[p] == i { wv[p] } else { 0.0 });
    }
    out
}

impl StochasticObjective for SyntheticFunction {
    type Sample = SyntheticSample;

    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, x: u64) -> SyntheticSample {
        let mut rng = RngStream::new(self.seed, streams::SYNTH).substream(x);
        let support = self.sample_support(&mut rng);
        let offsets = support
            .iter()
            .map(|&i| self.center[i] + self.offset_noise * rng.next_normal())
            .collect();
        SyntheticSample {
            active: ActiveSet::new(self.n, support).expect("support indices are < n"),
            offsets,
        }
    }

    fn active_set(&self, sample: &SyntheticSample) -> ActiveSet {
        sample.active.clone()
    }

    fn value(&self, w: &SparseVector, sample: &SyntheticSample) -> Result<f64> {
        if w.dim() != self.n {
            return Err(Error::DimensionMismatch {
                left: w.dim(),
                right: self.n,
            });
        }
        Ok(self.value_at(&gather(w, sample.active.indices()), sample))
    }
}
