//! Exact MAP and k-best decoding over label-bigram states.
//!
//! Paths are totally ordered by score (descending) and then by the tag
//! sequence read left to right with `O < B < I`. That order is preserved when
//! two prefixes ending in the same state are extended by the same suffix,
//! which is what makes per-state truncation to `k` entries exact. With equal
//! scores everywhere (for example `w = 0`) the first path is all `O`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::metrics::chunk_f1;
use crate::sparse::SparseVector;

use super::features::CompiledSentence;
use super::{is_valid_bio, state_index, state_tags, Candidate, Instance, Output, Tag, NUM_STATES};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPath {
    pub tags: Vec<Tag>,
    pub score: f64,
}

/// Descending by score; `0.0` and `-0.0` tie.
fn score_desc(a: f64, b: f64) -> Ordering {
    if a == b {
        Ordering::Equal
    } else {
        b.total_cmp(&a)
    }
}

fn path_order(a: &ScoredPath, b: &ScoredPath) -> Ordering {
    score_desc(a.score, b.score).then_with(|| a.tags.cmp(&b.tags))
}

fn emission_scores(weights: &SparseVector, sent: &CompiledSentence) -> Vec<[f64; NUM_STATES]> {
    (0..sent.len())
        .map(|i| {
            let mut row = [0.0; NUM_STATES];
            for (s, slot) in row.iter_mut().enumerate() {
                *slot = sent
                    .emission_features(i, s)
                    .iter()
                    .map(|&f| weights.get(f))
                    .sum();
            }
            row
        })
        .collect()
}

fn check_dim(weights: &SparseVector, sent: &CompiledSentence) -> Result<()> {
    if weights.dim() != sent.dim() {
        return Err(Error::DimensionMismatch {
            left: weights.dim(),
            right: sent.dim(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    score: f64,
    /// Predecessor `(state, rank)` at the previous position.
    back: (usize, usize),
    /// Rank of this prefix among all kept prefixes at its position, in
    /// left-to-right tag order.
    lex: usize,
}

/// The `k` best valid BIO taggings, best first. Returns fewer than `k` paths
/// only when fewer valid taggings exist.
pub fn kbest_decode(
    weights: &SparseVector,
    sent: &CompiledSentence,
    k: usize,
) -> Result<Vec<ScoredPath>> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    check_dim(weights, sent)?;
    if sent.is_empty() {
        return Ok(vec![ScoredPath {
            tags: Vec::new(),
            score: 0.0,
        }]);
    }
    let emit = emission_scores(weights, sent);
    let len = emit.len();

    // lattice[i][s]: best prefixes ending at position i in state s, best first.
    let mut lattice: Vec<Vec<Vec<Entry>>> = Vec::with_capacity(len);
    let mut first = vec![Vec::new(); NUM_STATES];
    for (lex, cur) in [Tag::O, Tag::B].into_iter().enumerate() {
        let s = state_index(Tag::O, cur);
        first[s].push(Entry {
            score: emit[0][s],
            back: (usize::MAX, 0),
            lex,
        });
    }
    lattice.push(first);

    let mut pool: Vec<Entry> = Vec::new();
    for (i, row) in emit.iter().enumerate().skip(1) {
        let prev_col = &lattice[i - 1];
        let mut col: Vec<Vec<Entry>> = vec![Vec::new(); NUM_STATES];
        for (s, slot) in col.iter_mut().enumerate() {
            let (prev, cur) = state_tags(s);
            if prev == Tag::O && cur == Tag::I {
                continue;
            }
            pool.clear();
            for pp in Tag::ALL {
                let ps = state_index(pp, prev);
                for (r, e) in prev_col[ps].iter().enumerate() {
                    pool.push(Entry {
                        score: e.score + row[s],
                        back: (ps, r),
                        lex: e.lex,
                    });
                }
            }
            pool.sort_by(|a, b| score_desc(a.score, b.score).then(a.lex.cmp(&b.lex)));
            pool.truncate(k);
            slot.extend_from_slice(&pool);
        }
        // Re-rank prefixes: order by predecessor rank, then by the new tag.
        let mut keys: Vec<(usize, usize, usize, usize)> = Vec::new();
        for (s, entries) in col.iter().enumerate() {
            for (r, e) in entries.iter().enumerate() {
                keys.push((e.lex, s % 3, s, r));
            }
        }
        keys.sort_unstable();
        for (lex, &(_, _, s, r)) in keys.iter().enumerate() {
            col[s][r].lex = lex;
        }
        lattice.push(col);
    }

    let mut finals: Vec<(usize, usize, Entry)> = lattice[len - 1]
        .iter()
        .enumerate()
        .flat_map(|(s, entries)| entries.iter().enumerate().map(move |(r, e)| (s, r, *e)))
        .collect();
    finals.sort_by(|a, b| score_desc(a.2.score, b.2.score).then(a.2.lex.cmp(&b.2.lex)));
    finals.truncate(k);
    Ok(finals
        .into_iter()
        .map(|(s, r, e)| {
            let mut tags = vec![Tag::O; len];
            let (mut s, mut r) = (s, r);
            for i in (0..len).rev() {
                tags[i] = state_tags(s).1;
                let back = lattice[i][s][r].back;
                s = back.0;
                r = back.1;
            }
            ScoredPath {
                tags,
                score: e.score,
            }
        })
        .collect())
}

/// Highest-scoring valid BIO tagging.
pub fn viterbi_decode(weights: &SparseVector, sent: &CompiledSentence) -> Result<Vec<Tag>> {
    let mut best = kbest_decode(weights, sent, 1)?;
    Ok(best.swap_remove(0).tags)
}

/// Every valid BIO tagging with its score, in decoding order. Exponential in
/// the sentence length; meant for checking the decoders on short inputs.
pub fn brute_force_paths(weights: &SparseVector, sent: &CompiledSentence) -> Result<Vec<ScoredPath>> {
    check_dim(weights, sent)?;
    let emit = emission_scores(weights, sent);
    let len = sent.len();
    let total = 3usize.pow(len as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut tags = vec![Tag::O; len];
        for t in tags.iter_mut().rev() {
            *t = Tag::from_index(c % 3);
            c /= 3;
        }
        if !is_valid_bio(&tags) {
            continue;
        }
        let mut score = 0.0;
        let mut prev = Tag::O;
        for (i, &t) in tags.iter().enumerate() {
            score += emit[i][state_index(prev, t)];
            prev = t;
        }
        out.push(ScoredPath { tags, score });
    }
    out.sort_by(path_order);
    Ok(out)
}

/// Decodes the `k` best taggings under `weights` and turns them into a
/// candidate set with loss `1 - F1` against the gold chunks.
pub fn as_candidate_instance(
    id: impl Into<String>,
    sent: &CompiledSentence,
    weights: &SparseVector,
    k: usize,
) -> Result<Instance> {
    let paths = kbest_decode(weights, sent, k)?;
    let gold = sent.sequence().gold();
    let candidates = paths
        .into_iter()
        .map(|p| {
            let features = sent.features_of(&p.tags)?;
            let loss = 1.0 - chunk_f1(&p.tags, gold)?;
            Ok(Candidate::new(Output::Tags(p.tags), features, loss))
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(id, candidates)
}

#[cfg(test)]
mod tests {
    use super::super::{register_features, FeatureIndex, LabelScope, SequenceInstance, Token};
    use super::*;
    use crate::rng::RngStream;

    fn sentence(words: &[(&str, &str)], gold: Vec<Tag>) -> SequenceInstance {
        SequenceInstance::new(
            words.iter().map(|(w, p)| Token::new(*w, *p)).collect(),
            gold,
        )
        .unwrap()
    }

    fn compiled(scope: LabelScope) -> (CompiledSentence, FeatureIndex) {
        use Tag::*;
        let s = sentence(
            &[("the", "DT"), ("dog", "NN"), ("saw", "VBD"), ("a", "DT"), ("cat", "NN")],
            vec![B, I, O, B, I],
        );
        let mut r = FeatureIndex::new();
        register_features(&s, &mut r, scope).unwrap();
        r.freeze();
        (CompiledSentence::compile(&s, &r).unwrap(), r)
    }

    #[test]
    fn zero_weights_decode_all_o() {
        let (c, r) = compiled(LabelScope::AllStates);
        let tags = viterbi_decode(&SparseVector::zeros(r.len()), &c).unwrap();
        assert_eq!(tags, vec![Tag::O; 5]);
    }

    #[test]
    fn single_heavy_feature() {
        let (c, r) = compiled(LabelScope::AllStates);
        let f = r.get("w0|dog|OB").unwrap();
        let w = SparseVector::from_pairs(r.len(), [(f, 10.0)]).unwrap();
        let tags = viterbi_decode(&w, &c).unwrap();
        assert_eq!(tags[1], Tag::B);
        assert!(is_valid_bio(&tags));
    }

    #[test]
    fn kbest_matches_brute_force() {
        let (c, r) = compiled(LabelScope::AllStates);
        let mut rng = RngStream::new(3, 9);
        for _ in 0..20 {
            let w = SparseVector::from_pairs(
                r.len(),
                (0..r.len()).map(|i| (i, rng.next_normal())),
            )
            .unwrap();
            let brute = brute_force_paths(&w, &c).unwrap();
            let kb = kbest_decode(&w, &c, 7).unwrap();
            assert_eq!(kb, brute[..7].to_vec());
            let all = kbest_decode(&w, &c, 1000).unwrap();
            assert_eq!(all, brute);
        }
    }

    #[test]
    fn ties_follow_tag_order() {
        let (c, r) = compiled(LabelScope::Gold);
        let mut rng = RngStream::new(4, 9);
        for _ in 0..20 {
            // Few nonzero weights leave many paths tied.
            let mut pairs = Vec::new();
            for i in 0..r.len() {
                if rng.below(4) == 0 {
                    pairs.push((i, rng.below(3) as f64 - 1.0));
                }
            }
            let w = SparseVector::from_pairs(r.len(), pairs).unwrap();
            let brute = brute_force_paths(&w, &c).unwrap();
            for k in [1, 3, 10, 50] {
                assert_eq!(kbest_decode(&w, &c, k).unwrap(), brute[..k].to_vec());
            }
        }
    }

    #[test]
    fn candidate_instance_contains_gold_with_zero_loss() {
        let (c, r) = compiled(LabelScope::Gold);
        let gold_tags = c.sequence().gold().to_vec();
        let phi = c.features_of(&gold_tags).unwrap();
        let inst = as_candidate_instance("s", &c, &phi, 20).unwrap();
        assert_eq!(inst.candidates()[0].output, Output::Tags(gold_tags));
        assert_eq!(inst.candidates()[0].hidden_loss(), 0.0);
        assert_eq!(inst.dim(), r.len());
        let union =
            crate::sparse::ActiveSet::union_of(r.len(), inst.candidates().iter().map(|c| &c.features))
                .unwrap();
        assert_eq!(&union, inst.active_set());
    }

    #[test]
    fn k_zero_is_error() {
        let (c, r) = compiled(LabelScope::Gold);
        assert!(kbest_decode(&SparseVector::zeros(r.len()), &c, 0).is_err());
    }
}
