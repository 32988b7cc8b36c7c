//! Task losses and corpus-level evaluation metrics.
//!
//! Every per-example loss produced here lies in [0, 1]:
//! `1 - chunk_f1` for chunking, `1 - sentence_bleu_smoothed` for reranking,
//! and the 0/1 loss for classification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structpred::Tag;

/// Maximum n-gram order used by BLEU.
pub const BLEU_ORDER: usize = 4;

/// Replacement for zero n-gram match counts in the smoothed sentence BLEU.
pub const ZERO_MATCH_REPLACEMENT: f64 = 0.01;

/// A noun-phrase chunk covering tokens `start..end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
}

/// Extracts chunk spans from a BIO tagging. An `I` that does not continue a
/// chunk opens a new one, as conlleval does.
pub fn chunk_spans(tags: &[Tag]) -> Vec<ChunkSpan> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::B => {
                if let Some(start) = open.take() {
                    spans.push(ChunkSpan { start, end: i });
                }
                open = Some(i);
            }
            Tag::I => {
                if open.is_none() {
                    open = Some(i);
                }
            }
            Tag::O => {
                if let Some(start) = open.take() {
                    spans.push(ChunkSpan { start, end: i });
                }
            }
        }
    }
    if let Some(start) = open {
        spans.push(ChunkSpan {
            start,
            end: tags.len(),
        });
    }
    spans
}

/// Span counts accumulated over a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChunkCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl ChunkCounts {
    pub fn from_tags(pred: &[Tag], gold: &[Tag]) -> Result<Self> {
        if pred.len() != gold.len() {
            return Err(Error::DimensionMismatch {
                left: pred.len(),
                right: gold.len(),
            });
        }
        let p = chunk_spans(pred);
        let g = chunk_spans(gold);
        let correct = p.iter().filter(|s| g.binary_search(s).is_ok()).count();
        Ok(ChunkCounts {
            correct,
            predicted: p.len(),
            gold: g.len(),
        })
    }

    pub fn add(&mut self, other: ChunkCounts) {
        self.correct += other.correct;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    /// `2PR / (P + R)`; 1 when neither side has chunks, 0 when P = R = 0.
    pub fn f1(&self) -> f64 {
        if self.predicted == 0 && self.gold == 0 {
            return 1.0;
        }
        if self.correct == 0 {
            return 0.0;
        }
        let p = self.correct as f64 / self.predicted as f64;
        let r = self.correct as f64 / self.gold as f64;
        2.0 * p * r / (p + r)
    }
}

/// Span-level F1 between a predicted and a gold tagging.
pub fn chunk_f1(pred: &[Tag], gold: &[Tag]) -> Result<f64> {
    Ok(ChunkCounts::from_tags(pred, gold)?.f1())
}

/// Clipped n-gram statistics of one hypothesis (or a corpus of them).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramStats {
    /// Clipped matches per order 1..=4.
    pub matches: [u64; BLEU_ORDER],
    /// Hypothesis n-gram counts per order 1..=4.
    pub totals: [u64; BLEU_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(|t| t.as_ref()).collect::<Vec<_>>())
                .or_insert(0) += 1;
        }
    }
    counts
}

impl NGramStats {
    pub fn from_pair<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        let mut stats = NGramStats {
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Default::default()
        };
        for n in 1..=BLEU_ORDER {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            stats.matches[n - 1] = h
                .iter()
                .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &NGramStats) {
        for n in 0..BLEU_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// `exp(min(0, 1 - ref/hyp))`; zero for an empty hypothesis.
    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        (1.0 - self.ref_len as f64 / self.hyp_len as f64).min(0.0).exp()
    }

    /// Unsmoothed BLEU from these counts; zero if any order has no matches.
    pub fn bleu(&self) -> f64 {
        if self.hyp_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let log_p: f64 = (0..BLEU_ORDER)
            .map(|n| (self.matches[n] as f64 / self.totals[n] as f64).ln())
            .sum::<f64>()
            / BLEU_ORDER as f64;
        self.brevity_penalty() * log_p.exp()
    }

    /// BLEU with zero match counts replaced by [`ZERO_MATCH_REPLACEMENT`].
    ///
    /// Orders longer than the hypothesis have no n-grams at all; they are
    /// scored as `0.01 / 1`.
    pub fn smoothed_bleu(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let log_p: f64 = (0..BLEU_ORDER)
            .map(|n| {
                let m = if self.matches[n] == 0 {
                    ZERO_MATCH_REPLACEMENT
                } else {
                    self.matches[n] as f64
                };
                (m / self.totals[n].max(1) as f64).ln()
            })
            .sum::<f64>()
            / BLEU_ORDER as f64;
        self.brevity_penalty() * log_p.exp()
    }
}

/// Smoothed sentence-level BLEU in [0, 1].
pub fn sentence_bleu_smoothed<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("reference", "empty reference"));
    }
    Ok(NGramStats::from_pair(hyp, reference).smoothed_bleu())
}

/// Unsmoothed sentence BLEU; equals `corpus_bleu` on a one-pair corpus.
pub fn sentence_bleu<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("reference", "empty reference"));
    }
    Ok(NGramStats::from_pair(hyp, reference).bleu())
}

/// Corpus BLEU over aggregated n-gram counts, without smoothing.
pub fn corpus_bleu<S: AsRef<str>>(pairs: &[(Vec<S>, Vec<S>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("corpus", "empty corpus"));
    }
    let mut total = NGramStats::default();
    for (hyp, reference) in pairs {
        if reference.is_empty() {
            return Err(Error::invalid("reference", "empty reference"));
        }
        total.add(&NGramStats::from_pair(hyp, reference));
    }
    Ok(total.bleu())
}

pub fn zero_one_loss(pred: usize, gold: usize) -> f64 {
    if pred == gold {
        0.0
    } else {
        1.0
    }
}

/// Fraction of equal pairs; `NaN` for an empty list.
pub fn accuracy(pairs: &[(usize, usize)]) -> f64 {
    let correct = pairs.iter().filter(|(p, g)| p == g).count();
    correct as f64 / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use Tag::{B, I, O};

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn spans_from_tags() {
        assert_eq!(
            chunk_spans(&[B, I, O, B, B, I]),
            vec![
                ChunkSpan { start: 0, end: 2 },
                ChunkSpan { start: 3, end: 4 },
                ChunkSpan { start: 4, end: 6 }
            ]
        );
        assert!(chunk_spans(&[O, O]).is_empty());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(chunk_f1(&[B, I, O, B], &[B, I, O, B]).unwrap(), 1.0);
        assert_eq!(chunk_f1(&[O, O, O, O], &[B, I, O, B]).unwrap(), 0.0);
        // pred {[0,2)}, gold {[0,2), [3,4)}: P = 1, R = 1/2.
        let f = chunk_f1(&[B, I, O, O], &[B, I, O, B]).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-10);
        assert_eq!(chunk_f1(&[O, O], &[O, O]).unwrap(), 1.0);
        assert!(chunk_f1(&[O], &[O, O]).is_err());
    }

    #[test]
    fn f1_is_symmetric() {
        let a = [B, I, O, B, I, I, O, B];
        let b = [B, O, O, B, I, I, B, I];
        assert_eq!(chunk_f1(&a, &b).unwrap(), chunk_f1(&b, &a).unwrap());
    }

    #[test]
    fn bleu_identity_is_one() {
        let r = toks("the cat sat on the mat");
        assert_eq!(sentence_bleu_smoothed(&r, &r).unwrap(), 1.0);
        assert_eq!(corpus_bleu(&[(r.clone(), r.clone())]).unwrap(), 1.0);
    }

    #[test]
    fn bleu_disjoint_uses_replacement() {
        let got = sentence_bleu_smoothed(&toks("a b c d e"), &toks("v w x y z")).unwrap();
        let want = (0.01f64 / 5.0 * 0.01 / 4.0 * 0.01 / 3.0 * 0.01 / 2.0).powf(0.25);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn bleu_short_hypothesis_brevity() {
        let got = sentence_bleu_smoothed(&toks("a"), &toks("a b c d")).unwrap();
        // p1 = 1, p2..p4 = 0.01 / 1; BP = exp(1 - 4).
        let want = (1.0f64 * 0.01 * 0.01 * 0.01).powf(0.25) * (-3.0f64).exp();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn bleu_errors_and_empty() {
        assert!(sentence_bleu_smoothed(&toks("a"), &[] as &[&str]).is_err());
        assert_eq!(sentence_bleu_smoothed(&[] as &[&str], &toks("a b")).unwrap(), 0.0);
        assert!(corpus_bleu::<&str>(&[]).is_err());
    }

    #[test]
    fn transposition_does_not_help() {
        let r = toks("one two three four five six");
        let t = toks("two one three four six five");
        assert!(sentence_bleu_smoothed(&t, &r).unwrap() <= sentence_bleu_smoothed(&r, &r).unwrap());
    }

    #[test]
    fn clipping() {
        let s = NGramStats::from_pair(&toks("the the the"), &toks("the cat"));
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals, [3, 2, 1, 0]);
    }

    #[test]
    fn zero_one_and_accuracy() {
        assert_eq!(zero_one_loss(2, 2), 0.0);
        assert_eq!(zero_one_loss(1, 3), 1.0);
        let pairs = [(1, 1), (2, 0), (3, 3), (0, 0)];
        let mean_loss = pairs.iter().map(|&(p, g)| zero_one_loss(p, g)).sum::<f64>() / 4.0;
        assert_eq!(accuracy(&pairs), 1.0 - mean_loss);
    }
}
