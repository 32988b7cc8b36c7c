//! Update rules. Each returns a `delta` that the optimizer applies as
//! `w <- w - h * delta`, together with the perturbed loss it observed.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objectives::{feedback, softmax};
use crate::perturbation::Perturbation;
use crate::rng::RngStream;
use crate::sparse::SparseVector;
use crate::structpred::Instance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdateRule {
    TwoPoint,
    FunctionComparison,
    BaselineComparison,
    Sfo,
}

impl UpdateRule {
    pub const ALL: [UpdateRule; 4] = [
        UpdateRule::TwoPoint,
        UpdateRule::FunctionComparison,
        UpdateRule::BaselineComparison,
        UpdateRule::Sfo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UpdateRule::TwoPoint => "two-point",
            UpdateRule::FunctionComparison => "func-cmp",
            UpdateRule::BaselineComparison => "baseline",
            UpdateRule::Sfo => "sfo",
        }
    }

    pub fn is_zeroth_order(self) -> bool {
        self != UpdateRule::Sfo
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UpdateRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid("rule", format!("unknown update rule {s:?}")))
    }
}

/// Output of one update rule application.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub delta: SparseVector,
    /// The loss observed at the perturbed point (for SFO: at the sampled output).
    pub observed: f64,
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("mu", format!("must be > 0, got {mu}")))
    }
}

/// `((F(w + mu u) - F(w)) / mu) u`.
pub fn two_point_delta<F>(mut f: F, w: &SparseVector, pert: &Perturbation, mu: f64) -> Result<Estimate>
where
    F: FnMut(&SparseVector) -> Result<f64>,
{
    check_mu(mu)?;
    let base = f(w)?;
    let perturbed = f(&w.add_scaled(mu, &pert.vector)?)?;
    Ok(Estimate {
        delta: pert.vector.scale((perturbed - base) / mu),
        observed: perturbed,
    })
}

/// `-u / mu` when the perturbed point is strictly better, zero otherwise.
pub fn function_comparison_delta<F>(
    mut f: F,
    w: &SparseVector,
    pert: &Perturbation,
    mu: f64,
) -> Result<Estimate>
where
    F: FnMut(&SparseVector) -> Result<f64>,
{
    check_mu(mu)?;
    let base = f(w)?;
    let perturbed = f(&w.add_scaled(mu, &pert.vector)?)?;
    let delta = if perturbed < base {
        pert.vector.scale(-1.0 / mu)
    } else {
        SparseVector::zeros(w.dim())
    };
    Ok(Estimate {
        delta,
        observed: perturbed,
    })
}

/// Running mean of every perturbed loss observed so far.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BaselineState {
    pub count: u64,
    pub mean: f64,
}

impl BaselineState {
    pub fn push(self, v: f64) -> BaselineState {
        let count = self.count + 1;
        BaselineState {
            count,
            mean: self.mean + (v - self.mean) / count as f64,
        }
    }
}

/// `((v - Y) / mu) u` with `v = F(w + mu u)` and `Y` the running mean
/// including `v`.
pub fn baseline_comparison_delta<F>(
    mut f: F,
    w: &SparseVector,
    pert: &Perturbation,
    mu: f64,
    state: BaselineState,
) -> Result<(Estimate, BaselineState)>
where
    F: FnMut(&SparseVector) -> Result<f64>,
{
    check_mu(mu)?;
    let v = f(&w.add_scaled(mu, &pert.vector)?)?;
    let next = state.push(v);
    Ok((
        Estimate {
            delta: pert.vector.scale((v - next.mean) / mu),
            observed: v,
        },
        next,
    ))
}

/// Index drawn from the discrete distribution `p`.
pub(crate) fn sample_index(p: &[f64], rng: &mut RngStream) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // Rounding left the total slightly below 1; take the last positive entry.
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

/// `E_p[phi]` over the candidate list.
pub(crate) fn expected_features(instance: &Instance, p: &[f64]) -> Result<SparseVector> {
    let mut acc = vec![0.0; instance.dim()];
    let mut touched = Vec::new();
    for (c, &pc) in instance.candidates().iter().zip(p) {
        if pc == 0.0 {
            continue;
        }
        for (i, v) in c.features.iter() {
            if acc[i] == 0.0 {
                touched.push(i);
            }
            acc[i] += pc * v;
        }
    }
    touched.sort_unstable();
    touched.dedup();
    SparseVector::from_pairs(instance.dim(), touched.into_iter().map(|i| (i, acc[i])))
}

/// Score-function gradient: samples `y ~ softmax(w . phi)` and returns
/// `Delta(y) (phi(y) - E_p[phi])`.
pub fn sfo_delta(weights: &SparseVector, instance: &Instance, rng: &mut RngStream) -> Result<Estimate> {
    let p = softmax(&instance.scores(weights)?, 1.0);
    let y = sample_index(&p, rng);
    let loss = feedback(instance, y)?;
    if loss == 0.0 || instance.candidates().len() == 1 {
        return Ok(Estimate {
            delta: SparseVector::zeros(instance.dim()),
            observed: loss,
        });
    }
    let mean = expected_features(instance, &p)?;
    let centered = mean.add_scaled(-1.0, &instance.candidates()[y].features)?;
    Ok(Estimate {
        delta: centered.scale(-loss),
        observed: loss,
    })
}

/// Exact gradient of `E_{softmax(w . phi)}[Delta]`, by enumeration.
pub fn exact_policy_gradient(weights: &SparseVector, instance: &Instance) -> Result<SparseVector> {
    let p = softmax(&instance.scores(weights)?, 1.0);
    let mean = expected_features(instance, &p)?;
    let mut grad = SparseVector::zeros(instance.dim());
    for (y, c) in instance.candidates().iter().enumerate() {
        let coef = p[y] * feedback(instance, y)?;
        if coef == 0.0 {
            continue;
        }
        grad = grad.add_scaled(coef, &c.features)?.add_scaled(-coef, &mean)?;
    }
    Ok(grad)
}
