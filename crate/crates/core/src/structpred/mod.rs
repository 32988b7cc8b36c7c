//! Linear structured prediction over explicit candidate sets.
//!
//! Every task reaches the learner as an [`Instance`]: a list of candidate
//! outputs, each with a sparse joint feature vector and a hidden task loss.
//! Sequence labeling is reduced to this form through k-best decoding
//! ([`as_candidate_instance`]); multiclass classification places the
//! document vector into one feature block per class ([`multiclass_instance`]).
//!
//! The hidden loss of a candidate is not part of the public surface. It is
//! only observable through the bandit feedback functions in
//! [`crate::objectives`]:
//!
//! ```compile_fail
//! # use szo::structpred::{Candidate, Output};
//! # use szo::sparse::SparseVector;
//! let c = Candidate::new(Output::Class(0), SparseVector::zeros(2), 0.5);
//! let peek = c.loss;
//! ```
//!
//! ```compile_fail
//! # use szo::structpred::{Candidate, Output};
//! # use szo::sparse::SparseVector;
//! let c = Candidate::new(Output::Class(0), SparseVector::zeros(2), 0.5);
//! let peek = c.loss();
//! ```

mod decode;
mod features;

use std::fmt;

pub use decode::{
    as_candidate_instance, brute_force_paths, kbest_decode, viterbi_decode, ScoredPath,
};
pub use features::{
    feature_names, observation_contexts, register_features, CompiledSentence, FeatureIndex,
    LabelScope,
};

use crate::error::{Error, Result};
use crate::sparse::{ActiveSet, SparseVector};

/// Noun-phrase chunk tag. The declaration order `O < B < I` fixes state
/// indices and tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    O = 0,
    B = 1,
    I = 2,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::O, Tag::B, Tag::I];

    pub fn from_index(i: usize) -> Tag {
        Tag::ALL[i]
    }

    pub fn as_char(self) -> char {
        match self {
            Tag::O => 'O',
            Tag::B => 'B',
            Tag::I => 'I',
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Number of label-bigram states `(previous tag, current tag)`.
pub const NUM_STATES: usize = 9;

/// Index of the label-bigram state; lexicographic with `O < B < I`.
pub fn state_index(prev: Tag, cur: Tag) -> usize {
    prev as usize * 3 + cur as usize
}

pub fn state_tags(state: usize) -> (Tag, Tag) {
    (Tag::from_index(state / 3), Tag::from_index(state % 3))
}

/// `I` may not follow `O`; the position before the sentence counts as `O`.
pub fn is_valid_state(state: usize) -> bool {
    state != state_index(Tag::O, Tag::I)
}

pub fn is_valid_bio(tags: &[Tag]) -> bool {
    let mut prev = Tag::O;
    for &t in tags {
        if prev == Tag::O && t == Tag::I {
            return false;
        }
        prev = t;
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    pub pos: String,
}

impl Token {
    pub fn new(word: impl Into<String>, pos: impl Into<String>) -> Self {
        Token {
            word: word.into(),
            pos: pos.into(),
        }
    }
}

/// A sentence with its (hidden) gold chunk tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceInstance {
    tokens: Vec<Token>,
    gold: Vec<Tag>,
}

impl SequenceInstance {
    pub fn new(tokens: Vec<Token>, gold: Vec<Tag>) -> Result<Self> {
        if tokens.len() != gold.len() {
            return Err(Error::DimensionMismatch {
                left: tokens.len(),
                right: gold.len(),
            });
        }
        if !is_valid_bio(&gold) {
            return Err(Error::invalid("gold", "tags are not a valid BIO sequence"));
        }
        Ok(SequenceInstance { tokens, gold })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub(crate) fn gold(&self) -> &[Tag] {
        &self.gold
    }
}

/// A structured output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Tags(Vec<Tag>),
    Tokens(Vec<String>),
    Class(usize),
}

/// One candidate output with its joint features `phi(x, y)`.
#[derive(Clone, PartialEq)]
pub struct Candidate {
    pub output: Output,
    pub features: SparseVector,
    loss: f64,
}

impl Candidate {
    /// Losses outside [0, 1] are clamped with a warning.
    pub fn new(output: Output, features: SparseVector, loss: f64) -> Self {
        let clamped = if loss.is_nan() { 1.0 } else { loss.clamp(0.0, 1.0) };
        if clamped != loss {
            log::warn!("task loss {loss} outside [0, 1]; clamped to {clamped}");
        }
        Candidate {
            output,
            features,
            loss: clamped,
        }
    }

    pub(crate) fn hidden_loss(&self) -> f64 {
        self.loss
    }
}

impl fmt::Debug for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Candidate")
            .field("output", &self.output)
            .field("features", &self.features)
            .finish_non_exhaustive()
    }
}

/// One bandit example: an input with its candidate set `Y(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    candidates: Vec<Candidate>,
    active: ActiveSet,
}

impl Instance {
    pub fn new(id: impl Into<String>, candidates: Vec<Candidate>) -> Result<Self> {
        let dim = candidates
            .first()
            .ok_or(Error::EmptyCandidates)?
            .features
            .dim();
        let active = ActiveSet::union_of(dim, candidates.iter().map(|c| &c.features))?;
        Ok(Instance {
            id: id.into(),
            candidates,
            active,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn dim(&self) -> usize {
        self.active.dim()
    }

    /// Union of candidate feature supports.
    pub fn active_set(&self) -> &ActiveSet {
        &self.active
    }

    pub fn scores(&self, weights: &SparseVector) -> Result<Vec<f64>> {
        self.candidates
            .iter()
            .map(|c| weights.dot(&c.features))
            .collect()
    }

    /// Highest-scoring candidate; ties go to the lowest index.
    pub fn argmax(&self, weights: &SparseVector) -> Result<usize> {
        let scores = self.scores(weights)?;
        Ok(argmax_first(&scores))
    }
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// A linear scoring model `w . phi(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: SparseVector,
}

impl LinearModel {
    pub fn new(weights: SparseVector) -> Self {
        LinearModel { weights }
    }

    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: SparseVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn predict(&self, instance: &Instance) -> Result<usize> {
        instance.argmax(&self.weights)
    }
}

/// Builds the multiclass instance for one document: class `c` places the
/// document vector at block offset `c * doc.dim()`, and its loss is 0 for
/// the gold class and 1 otherwise.
pub fn multiclass_instance(
    id: impl Into<String>,
    doc: &SparseVector,
    num_classes: usize,
    gold: usize,
) -> Result<Instance> {
    if num_classes < 2 {
        return Err(Error::invalid("num_classes", "need at least two classes"));
    }
    if gold >= num_classes {
        return Err(Error::invalid("gold", format!("class {gold} >= {num_classes}")));
    }
    let block = doc.dim();
    let dim = block * num_classes;
    let candidates = (0..num_classes)
        .map(|c| {
            let features = SparseVector::from_sorted(
                dim,
                doc.indices().iter().map(|i| c * block + i).collect(),
                doc.values().to_vec(),
            );
            Candidate::new(
                Output::Class(c),
                features,
                crate::metrics::zero_one_loss(c, gold),
            )
        })
        .collect();
    Instance::new(id, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_order_is_lexicographic() {
        assert_eq!(state_index(Tag::O, Tag::O), 0);
        assert_eq!(state_index(Tag::O, Tag::B), 1);
        assert_eq!(state_index(Tag::I, Tag::I), 8);
        for s in 0..NUM_STATES {
            let (a, b) = state_tags(s);
            assert_eq!(state_index(a, b), s);
        }
        assert!(!is_valid_state(2));
    }

    #[test]
    fn bio_validity() {
        use Tag::*;
        assert!(is_valid_bio(&[B, I, O, B]));
        assert!(!is_valid_bio(&[I, O]));
        assert!(!is_valid_bio(&[B, O, I]));
        assert!(SequenceInstance::new(vec![Token::new("a", "DT")], vec![I]).is_err());
    }

    #[test]
    fn argmax_tie_goes_to_lowest_index() {
        assert_eq!(argmax_first(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax_first(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn empty_instance_is_error() {
        assert!(matches!(Instance::new("x", vec![]), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn losses_are_clamped() {
        let c = Candidate::new(Output::Class(0), SparseVector::zeros(1), 1.7);
        assert_eq!(c.hidden_loss(), 1.0);
        let c = Candidate::new(Output::Class(0), SparseVector::zeros(1), -0.2);
        assert_eq!(c.hidden_loss(), 0.0);
    }

    #[test]
    fn multiclass_blocks() {
        let doc = SparseVector::from_pairs(
            100,
            (0..10).map(|i| (i * 7, 0.1 * (i + 1) as f64)),
        )
        .unwrap();
        let inst = multiclass_instance("d", &doc, 4, 2).unwrap();
        assert_eq!(inst.dim(), 400);
        assert_eq!(inst.active_set().len(), 40);
        assert_eq!(inst.candidates()[2].hidden_loss(), 0.0);
        assert_eq!(inst.candidates()[1].hidden_loss(), 1.0);
        assert_eq!(inst.candidates()[3].features.get(3 * 100 + 14), doc.get(14));
        assert!(multiclass_instance("d", &doc, 1, 0).is_err());
    }
}
