//! Chunking feature templates and the feature-name registry.
//!
//! At position `i` with label bigram `(prev, cur)`, each observation context
//! below is conjoined with the labels, giving names `tmpl|context|labels`
//! such as `w0|dog|OB`:
//!
//! | template | context |
//! |----------|---------|
//! | `w-2` .. `w+2` | word at offset -2..=2 |
//! | `p-2` .. `p+2` | POS tag at offset -2..=2 |
//! | `ww`  | words at `i-1, i` |
//! | `pp`  | POS tags at `i-1, i` |
//! | `ppp` | POS tags at `i-2, i-1, i` |
//!
//! Contexts that reach outside the sentence do not fire.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::{is_valid_state, state_index, state_tags, SequenceInstance, Tag, Token, NUM_STATES};

/// Maps feature names to dense indices. New names are accepted only while
/// building; a frozen registry is read-only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureIndex {
    names: Vec<String>,
    map: HashMap<String, usize>,
    frozen: bool,
}

impl FeatureIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// A frozen registry with the given names at indices `0..`.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut idx = FeatureIndex::new();
        for n in names {
            idx.intern(n.into());
        }
        idx.freeze();
        idx
    }

    /// Index of `name`, inserting it when building. Frozen registries return
    /// `None` for unknown names.
    pub fn intern(&mut self, name: String) -> Option<usize> {
        if let Some(&i) = self.map.get(&name) {
            return Some(i);
        }
        if self.frozen {
            return None;
        }
        let i = self.names.len();
        self.names.push(name.clone());
        self.map.insert(name, i);
        Some(i)
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.map.get(name).copied()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// One name per line; line `k` holds feature `k`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Self {
        FeatureIndex::from_names(text.lines())
    }
}

fn offset_label(off: isize) -> String {
    if off > 0 {
        format!("+{off}")
    } else {
        off.to_string()
    }
}

/// Label-free observation contexts at position `i`.
pub fn observation_contexts(tokens: &[Token], i: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(13);
    let at = |off: isize| -> Option<&Token> {
        let j = i as isize + off;
        (j >= 0).then(|| tokens.get(j as usize)).flatten()
    };
    for off in -2..=2isize {
        if let Some(t) = at(off) {
            out.push(format!("w{}|{}", offset_label(off), t.word));
        }
    }
    for off in -2..=2isize {
        if let Some(t) = at(off) {
            out.push(format!("p{}|{}", offset_label(off), t.pos));
        }
    }
    if i >= 1 {
        out.push(format!("ww|{}_{}", tokens[i - 1].word, tokens[i].word));
        out.push(format!("pp|{}_{}", tokens[i - 1].pos, tokens[i].pos));
    }
    if i >= 2 {
        out.push(format!(
            "ppp|{}_{}_{}",
            tokens[i - 2].pos,
            tokens[i - 1].pos,
            tokens[i].pos
        ));
    }
    out
}

/// Full feature names firing at position `i` under labels `(prev, cur)`.
pub fn feature_names(tokens: &[Token], i: usize, prev: Tag, cur: Tag) -> Vec<String> {
    observation_contexts(tokens, i)
        .into_iter()
        .map(|ctx| format!("{ctx}|{prev}{cur}"))
        .collect()
}

/// Which label states to register features for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelScope {
    /// Only the gold label bigram at each position (supported features).
    Gold,
    /// Every valid label bigram.
    AllStates,
}

/// Adds the features of `seq` to a registry in building mode.
pub fn register_features(
    seq: &SequenceInstance,
    registry: &mut FeatureIndex,
    scope: LabelScope,
) -> Result<()> {
    if registry.is_frozen() {
        return Err(Error::invalid("registry", "registry is frozen"));
    }
    let gold = seq.gold();
    for i in 0..seq.len() {
        let contexts = observation_contexts(seq.tokens(), i);
        let states: Vec<usize> = match scope {
            LabelScope::Gold => {
                let prev = if i == 0 { Tag::O } else { gold[i - 1] };
                vec![state_index(prev, gold[i])]
            }
            LabelScope::AllStates => (0..NUM_STATES)
                .filter(|&s| is_valid_state(s) && (i > 0 || state_tags(s).0 == Tag::O))
                .collect(),
        };
        for s in states {
            let (prev, cur) = state_tags(s);
            for ctx in &contexts {
                registry.intern(format!("{ctx}|{prev}{cur}"));
            }
        }
    }
    Ok(())
}

/// A sentence with feature indices resolved for every position and label
/// state, ready for repeated decoding.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledSentence {
    pub(crate) seq: SequenceInstance,
    /// `emissions[i][s]`: registered feature indices at position `i`, state `s`.
    pub(crate) emissions: Vec<[Vec<usize>; NUM_STATES]>,
    pub(crate) dim: usize,
}

impl CompiledSentence {
    /// Requires a frozen registry; unknown feature names are skipped.
    pub fn compile(seq: &SequenceInstance, registry: &FeatureIndex) -> Result<Self> {
        if !registry.is_frozen() {
            return Err(Error::RegistryNotFrozen);
        }
        let mut emissions = Vec::with_capacity(seq.len());
        for i in 0..seq.len() {
            let contexts = observation_contexts(seq.tokens(), i);
            let mut row: [Vec<usize>; NUM_STATES] = Default::default();
            for (s, slot) in row.iter_mut().enumerate() {
                if !is_valid_state(s) {
                    continue;
                }
                let (prev, cur) = state_tags(s);
                let labels = format!("|{prev}{cur}");
                let mut name = String::new();
                for ctx in &contexts {
                    name.clear();
                    name.push_str(ctx);
                    name.push_str(&labels);
                    if let Some(f) = registry.get(&name) {
                        slot.push(f);
                    }
                }
            }
            emissions.push(row);
        }
        Ok(CompiledSentence {
            seq: seq.clone(),
            emissions,
            dim: registry.len(),
        })
    }

    pub fn sequence(&self) -> &SequenceInstance {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.emissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Feature indices firing at position `i` in state `s`.
    pub fn emission_features(&self, i: usize, state: usize) -> &[usize] {
        &self.emissions[i][state]
    }

    /// Joint feature vector `phi(x, y)` of a tagging, as indicator counts.
    pub fn features_of(&self, tags: &[Tag]) -> Result<crate::sparse::SparseVector> {
        if tags.len() != self.len() {
            return Err(Error::DimensionMismatch {
                left: tags.len(),
                right: self.len(),
            });
        }
        let mut idx = Vec::new();
        let mut prev = Tag::O;
        for (i, &t) in tags.iter().enumerate() {
            idx.extend_from_slice(&self.emissions[i][state_index(prev, t)]);
            prev = t;
        }
        crate::sparse::SparseVector::from_indicator_counts(self.dim, &idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SequenceInstance {
        SequenceInstance::new(
            vec![
                Token::new("the", "DT"),
                Token::new("dog", "NN"),
                Token::new("barks", "VBZ"),
            ],
            vec![Tag::B, Tag::I, Tag::O],
        )
        .unwrap()
    }

    #[test]
    fn single_token_fires_only_unigrams() {
        let names = feature_names(&[Token::new("dog", "NN")], 0, Tag::O, Tag::B);
        assert_eq!(names, vec!["w0|dog|OB", "p0|NN|OB"]);
    }

    #[test]
    fn contexts_at_last_position() {
        let seq = toy();
        let ctx = observation_contexts(seq.tokens(), 2);
        assert_eq!(
            ctx,
            vec![
                "w-2|the", "w-1|dog", "w0|barks", "p-2|DT", "p-1|NN", "p0|VBZ",
                "ww|dog_barks", "pp|NN_VBZ", "ppp|DT_NN_VBZ"
            ]
        );
    }

    #[test]
    fn frozen_registry_rejects_new_names() {
        let mut r = FeatureIndex::new();
        assert_eq!(r.intern("a".into()), Some(0));
        r.freeze();
        assert_eq!(r.intern("b".into()), None);
        assert_eq!(r.intern("a".into()), Some(0));
        assert!(register_features(&toy(), &mut r, LabelScope::Gold).is_err());
    }

    #[test]
    fn compile_requires_frozen_registry() {
        let mut r = FeatureIndex::new();
        register_features(&toy(), &mut r, LabelScope::Gold).unwrap();
        assert!(matches!(
            CompiledSentence::compile(&toy(), &r),
            Err(Error::RegistryNotFrozen)
        ));
        r.freeze();
        let c = CompiledSentence::compile(&toy(), &r).unwrap();
        let phi = c.features_of(&[Tag::B, Tag::I, Tag::O]).unwrap();
        assert_eq!(phi.l0_norm(), r.len());
        assert!(c.emission_features(0, state_index(Tag::O, Tag::O)).is_empty());
    }

    #[test]
    fn registry_text_round_trip() {
        let mut r = FeatureIndex::new();
        register_features(&toy(), &mut r, LabelScope::AllStates).unwrap();
        r.freeze();
        assert_eq!(FeatureIndex::from_text(&r.to_text()), r);
    }

    #[test]
    fn deterministic_indices() {
        let mut a = FeatureIndex::new();
        let mut b = FeatureIndex::new();
        for _ in 0..2 {
            register_features(&toy(), &mut a, LabelScope::Gold).unwrap();
        }
        register_features(&toy(), &mut b, LabelScope::Gold).unwrap();
        assert_eq!(a, b);
    }
}
