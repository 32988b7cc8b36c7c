//! Concrete [`Problem`]s: synthetic functions, static candidate sets
//! (reranking, multiclass) and chunking with per-step k-best decoding.

use crate::error::{Error, Result};
use crate::estimators::{sfo_delta, Estimate};
use crate::metrics::{corpus_bleu, ChunkCounts};
use crate::objectives::{map_loss, CandidateLoss, StochasticObjective, SyntheticFunction, SyntheticSample};
use crate::optimizer::{Metric, Problem};
use crate::rng::RngStream;
use crate::sparse::{ActiveSet, SparseVector};
use crate::structpred::{
    as_candidate_instance, register_features, viterbi_decode, CompiledSentence, FeatureIndex, Instance, LabelScope, Output,
    SequenceInstance,
};

/// Default k-best list size for sequence tasks.
pub const DEFAULT_KBEST: usize = 20;

/// A synthetic zoo function; every step draws a fresh sample.
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub func: SyntheticFunction,
}

impl Problem for SyntheticProblem {
    type Sample = SyntheticSample;

    fn dim(&self) -> usize {
        self.func.n()
    }

    fn sample(&self, _k: u64, _w: &SparseVector, rng: &mut RngStream) -> Result<SyntheticSample> {
        Ok(self.func.sample(rng.next_u64()))
    }

    fn active_set(&self, sample: &SyntheticSample) -> ActiveSet {
        sample.active.clone()
    }

    fn loss(&self, sample: &SyntheticSample, w: &SparseVector, _: CandidateLoss) -> Result<f64> {
        self.func.value(w, sample)
    }
}

/// How dev predictions are scored for static candidate sets.
#[derive(Clone, Debug, PartialEq)]
pub enum DevScore {
    /// `1 - mean MAP loss`; accuracy for 0/1 losses.
    OneMinusLoss,
    /// Corpus BLEU of the selected hypotheses (candidates must be token
    /// outputs), one reference per dev instance.
    CorpusBleu { references: Vec<Vec<String>> },
}

/// Fixed candidate sets, as in n-best reranking or multiclass classification.
#[derive(Clone, Debug)]
pub struct CandidateProblem {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub dev_score: DevScore,
}

impl CandidateProblem {
    pub fn new(train: Vec<Instance>, dev: Vec<Instance>, dev_score: DevScore) -> Result<Self> {
        let dim = train
            .first()
            .ok_or_else(|| Error::invalid("train", "no training instances"))?
            .dim();
        if let Some(bad) = train.iter().chain(&dev).find(|i| i.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: bad.dim(),
                right: dim,
            });
        }
        if let DevScore::CorpusBleu { references } = &dev_score {
            if references.len() != dev.len() {
                return Err(Error::DimensionMismatch {
                    left: references.len(),
                    right: dev.len(),
                });
            }
        }
        Ok(CandidateProblem {
            train,
            dev,
            dev_score,
        })
    }
}

/// `1 - mean MAP loss` over instances.
pub fn mean_map_score(weights: &SparseVector, instances: &[Instance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(Error::invalid("instances", "empty evaluation set"));
    }
    let mut total = 0.0;
    for inst in instances {
        total += map_loss(weights, inst)?;
    }
    Ok(1.0 - total / instances.len() as f64)
}

/// Corpus BLEU of the MAP hypotheses against one reference per instance.
pub fn rerank_bleu(weights: &SparseVector, instances: &[Instance], references: &[Vec<String>]) -> Result<f64> {
    let mut pairs = Vec::with_capacity(instances.len());
    for (inst, reference) in instances.iter().zip(references) {
        let best = inst.argmax(weights)?;
        match &inst.candidates()[best].output {
            Output::Tokens(t) => pairs.push((t.clone(), reference.clone())),
            other => {
                return Err(Error::invalid(
                    "output",
                    format!("reranking needs token outputs, got {other:?}"),
                ))
            }
        }
    }
    corpus_bleu(&pairs)
}

impl Problem for CandidateProblem {
    type Sample = usize;

    fn dim(&self) -> usize {
        self.train[0].dim()
    }

    fn sample(&self, _k: u64, _w: &SparseVector, rng: &mut RngStream) -> Result<usize> {
        Ok(rng.below(self.train.len() as u64) as usize)
    }

    fn active_set(&self, sample: &usize) -> ActiveSet {
        self.train[*sample].active_set().clone()
    }

    fn loss(&self, sample: &usize, w: &SparseVector, objective: CandidateLoss) -> Result<f64> {
        objective.evaluate(w, &self.train[*sample])
    }

    fn policy_gradient(&self, sample: &usize, w: &SparseVector, rng: &mut RngStream) -> Result<Estimate> {
        sfo_delta(w, &self.train[*sample], rng)
    }

    fn dev_metric(&self, w: &SparseVector) -> Result<Option<Metric>> {
        if self.dev.is_empty() {
            return Ok(None);
        }
        let value = match &self.dev_score {
            DevScore::OneMinusLoss => mean_map_score(w, &self.dev)?,
            DevScore::CorpusBleu { references } => rerank_bleu(w, &self.dev, references)?,
        };
        Ok(Some(Metric {
            value,
            higher_is_better: true,
        }))
    }
}

/// Corpus chunk F1 of Viterbi taggings.
pub fn chunking_f1(weights: &SparseVector, sentences: &[CompiledSentence]) -> Result<f64> {
    if sentences.is_empty() {
        return Err(Error::invalid("sentences", "empty evaluation set"));
    }
    let mut counts = ChunkCounts::default();
    for s in sentences {
        let pred = viterbi_decode(weights, s)?;
        counts.add(ChunkCounts::from_tags(&pred, s.sequence().gold())?);
    }
    Ok(counts.f1())
}

/// Chunking with bandit feedback: each step re-decodes the sampled sentence
/// under the current weights and learns from its k-best list.
#[derive(Clone, Debug)]
pub struct ChunkingProblem {
    pub train: Vec<CompiledSentence>,
    pub dev: Vec<CompiledSentence>,
    pub k: usize,
}

impl ChunkingProblem {
    pub fn new(train: Vec<CompiledSentence>, dev: Vec<CompiledSentence>, k: usize) -> Result<Self> {
        let dim = train
            .first()
            .ok_or_else(|| Error::invalid("train", "no training sentences"))?
            .dim();
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        if let Some(bad) = train.iter().chain(&dev).find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: bad.dim(),
                right: dim,
            });
        }
        Ok(ChunkingProblem { train, dev, k })
    }

    /// Registers features from `train` only, freezes the registry and
    /// compiles both splits against it.
    pub fn from_corpus(
        train: &[SequenceInstance],
        dev: &[SequenceInstance],
        k: usize,
        scope: LabelScope,
    ) -> Result<(Self, FeatureIndex)> {
        let mut registry = FeatureIndex::new();
        for seq in train {
            register_features(seq, &mut registry, scope)?;
        }
        registry.freeze();
        let problem = Self::with_registry(train, dev, k, &registry)?;
        Ok((problem, registry))
    }

    /// Compiles both splits against an existing frozen registry.
    pub fn with_registry(
        train: &[SequenceInstance],
        dev: &[SequenceInstance],
        k: usize,
        registry: &FeatureIndex,
    ) -> Result<Self> {
        let compile = |set: &[SequenceInstance]| -> Result<Vec<CompiledSentence>> {
            set.iter().map(|s| CompiledSentence::compile(s, registry)).collect()
        };
        Self::new(compile(train)?, compile(dev)?, k)
    }
}

impl Problem for ChunkingProblem {
    type Sample = Instance;

    fn dim(&self) -> usize {
        self.train[0].dim()
    }

    fn sample(&self, k: u64, w: &SparseVector, rng: &mut RngStream) -> Result<Instance> {
        let i = rng.below(self.train.len() as u64) as usize;
        as_candidate_instance(format!("{k}:{i}"), &self.train[i], w, self.k)
    }

    fn active_set(&self, sample: &Instance) -> ActiveSet {
        sample.active_set().clone()
    }

    fn loss(&self, sample: &Instance, w: &SparseVector, objective: CandidateLoss) -> Result<f64> {
        objective.evaluate(w, sample)
    }

    fn policy_gradient(&self, sample: &Instance, w: &SparseVector, rng: &mut RngStream) -> Result<Estimate> {
        sfo_delta(w, sample, rng)
    }

    fn dev_metric(&self, w: &SparseVector) -> Result<Option<Metric>> {
        if self.dev.is_empty() {
            return Ok(None);
        }
        Ok(Some(Metric {
            value: chunking_f1(w, &self.dev)?,
            higher_is_better: true,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::UpdateRule;
    use crate::objectives::{make_synthetic, SyntheticKind};
    use crate::optimizer::{run, PerturbationMode, RunConfig};
    use crate::structpred::multiclass_instance;

    #[test]
    fn synthetic_two_point_converges() {
        let func = make_synthetic(SyntheticKind::L1Well, 32, 8, 1).unwrap();
        let p = SyntheticProblem { func };
        let c = RunConfig::new(UpdateRule::TwoPoint, PerturbationMode::Sparse, 0.01, 0.05, 20_000, 3);
        let out = run(&p, &c).unwrap();
        let first = out.log.rows[0].avg_cum_loss;
        let last = out.log.final_avg_loss().unwrap();
        assert!(last < 0.5 * first, "{first} -> {last}");
        assert!(out.final_state.w.indices().iter().all(|&i| i < 8));
    }

    #[test]
    fn multiclass_sfo_learns() {
        let mut rng = RngStream::new(2, 9);
        let mut make = |n: usize| -> Vec<Instance> {
            (0..n)
                .map(|d| {
                    let gold = rng.below(3) as usize;
                    let doc = SparseVector::from_pairs(
                        6,
                        [(gold, 1.0), (3 + rng.below(3) as usize, 0.5)],
                    )
                    .unwrap();
                    multiclass_instance(format!("d{d}"), &doc, 3, gold).unwrap()
                })
                .collect()
        };
        let train = make(60);
        let dev = make(30);
        let p = CandidateProblem::new(train, dev, DevScore::OneMinusLoss).unwrap();
        let mut c = RunConfig::new(UpdateRule::Sfo, PerturbationMode::Sparse, 0.5, 0.05, 2000, 1);
        c.eval_every = 200;
        let out = run(&p, &c).unwrap();
        assert!(out.best.unwrap().metric.value > 0.9);
    }
}
