//! Deterministic miniature corpora: NP chunking from a small clause
//! grammar, n-best lists made by corrupting references, and topical
//! sparse documents. The vocabulary is fixed; the seed only changes which
//! sentences, lists or documents are drawn.

use super::{DocRecord, DocSet, NBestHypothesis, NBestRecord, NBestSet};
use crate::error::Result;
use crate::metrics::sentence_bleu_smoothed;
use crate::rng::{streams, RngStream};
use crate::sparse::SparseVector;
use crate::structpred::{SequenceInstance, Tag, Token};

const VOCAB_SEED: u64 = 0x005E_ED0F_C0DE;
const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
const CODAS: [&str; 6] = ["", "n", "r", "l", "s", "k"];

/// Pseudo-words with `syllables` syllables, distinct within the list.
fn make_words(rng: &mut RngStream, count: usize, syllables: usize, suffix: &str) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.below(ONSETS.len() as u64) as usize]);
            w.push_str(NUCLEI[rng.below(NUCLEI.len() as u64) as usize]);
            w.push_str(CODAS[rng.below(CODAS.len() as u64) as usize]);
        }
        w.push_str(suffix);
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Lexicon {
    nouns: Vec<String>,
    plurals: Vec<String>,
    proper: Vec<String>,
    adjectives: Vec<String>,
    verbs_past: Vec<String>,
    verbs_pres: Vec<String>,
    adverbs: Vec<String>,
    /// Words that occur both as plural nouns and as present-tense verbs.
    ambiguous: Vec<String>,
}

impl Lexicon {
    fn new() -> Self {
        let mut rng = RngStream::new(VOCAB_SEED, streams::SYNTH);
        let nouns = make_words(&mut rng, 400, 2, "");
        let plurals = nouns.iter().take(200).map(|n| format!("{n}s")).collect();
        let ambiguous = make_words(&mut rng, 40, 1, "es");
        Lexicon {
            nouns,
            plurals,
            proper: make_words(&mut rng, 120, 2, "o")
                .into_iter()
                .map(|w| {
                    let mut c = w.chars();
                    c.next()
                        .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                        .unwrap_or_default()
                })
                .collect(),
            adjectives: make_words(&mut rng, 100, 2, "y"),
            verbs_past: make_words(&mut rng, 120, 2, "ed"),
            verbs_pres: make_words(&mut rng, 80, 2, "ts"),
            adverbs: make_words(&mut rng, 30, 2, "ly"),
            ambiguous,
        }
    }
}

/// Skewed draw from `0..n`: small indices are frequent.
fn zipfish(rng: &mut RngStream, n: usize) -> usize {
    let u = rng.next_f64();
    ((u * u * n as f64) as usize).min(n - 1)
}

fn pick<'a>(rng: &mut RngStream, words: &'a [String]) -> &'a str {
    &words[zipfish(rng, words.len())]
}

const DETERMINERS: [&str; 6] = ["the", "a", "this", "every", "some", "that"];
const PRONOUNS: [&str; 5] = ["he", "she", "it", "they", "we"];
const PREPOSITIONS: [&str; 8] = ["in", "on", "at", "with", "for", "from", "by", "of"];

struct SentenceBuilder<'a> {
    lex: &'a Lexicon,
    tokens: Vec<Token>,
    tags: Vec<Tag>,
}

impl SentenceBuilder<'_> {
    fn push(&mut self, word: &str, pos: &str, tag: Tag) {
        self.tokens.push(Token::new(word, pos));
        self.tags.push(tag);
    }

    fn push_chunk(&mut self, words: &[(String, &str)]) {
        for (i, (w, p)) in words.iter().enumerate() {
            self.push(w, p, if i == 0 { Tag::B } else { Tag::I });
        }
    }

    fn noun_phrase(&mut self, rng: &mut RngStream) {
        let lex = self.lex;
        let mut np: Vec<(String, &str)> = Vec::new();
        match rng.below(10) {
            0 | 1 => np.push((PRONOUNS[rng.below(5) as usize].to_string(), "PRP")),
            2 => {
                np.push((pick(rng, &lex.proper).to_string(), "NNP"));
                if rng.below(3) == 0 {
                    np.push((pick(rng, &lex.proper).to_string(), "NNP"));
                }
            }
            3 => {
                np.push(((2 + rng.below(98)).to_string(), "CD"));
                np.push((pick(rng, &lex.plurals).to_string(), "NNS"));
            }
            4 => {
                if rng.below(2) == 0 {
                    np.push((pick(rng, &lex.adjectives).to_string(), "JJ"));
                }
                let plural = if rng.below(3) == 0 { pick(rng, &lex.ambiguous) } else { pick(rng, &lex.plurals) };
                np.push((plural.to_string(), "NNS"));
            }
            _ => {
                np.push((DETERMINERS[rng.below(6) as usize].to_string(), "DT"));
                for _ in 0..rng.below(3) {
                    np.push((pick(rng, &lex.adjectives).to_string(), "JJ"));
                }
                np.push((pick(rng, &lex.nouns).to_string(), "NN"));
                if rng.below(4) == 0 {
                    np.push((pick(rng, &lex.nouns).to_string(), "NN"));
                }
            }
        }
        self.push_chunk(&np);
    }

    fn clause(&mut self, rng: &mut RngStream) {
        let lex = self.lex;
        self.noun_phrase(rng);
        if rng.below(5) == 0 {
            self.push(pick(rng, &lex.adverbs), "RB", Tag::O);
        }
        match rng.below(3) {
            0 => self.push(pick(rng, &lex.verbs_past), "VBD", Tag::O),
            1 => self.push(pick(rng, &lex.verbs_pres), "VBZ", Tag::O),
            _ => self.push(pick(rng, &lex.ambiguous), "VBZ", Tag::O),
        }
        if rng.below(4) != 0 {
            self.noun_phrase(rng);
        }
        for _ in 0..rng.below(3) {
            self.push(PREPOSITIONS[rng.below(8) as usize], "IN", Tag::O);
            self.noun_phrase(rng);
        }
    }
}

/// `size` chunking sentences.
pub fn chunking_corpus(size: usize, seed: u64) -> Vec<SequenceInstance> {
    let lex = Lexicon::new();
    let base = RngStream::new(seed, streams::SYNTH);
    (0..size)
        .map(|i| {
            let mut rng = base.substream(i as u64);
            let mut b = SentenceBuilder {
                lex: &lex,
                tokens: Vec::new(),
                tags: Vec::new(),
            };
            b.clause(&mut rng);
            if rng.below(4) == 0 {
                b.push(",", ",", Tag::O);
                b.push("and", "CC", Tag::O);
                b.clause(&mut rng);
            }
            b.push(".", ".", Tag::O);
            SequenceInstance::new(b.tokens, b.tags).expect("grammar emits valid BIO")
        })
        .collect()
}

/// Number of dense features per hypothesis in generated n-best lists.
pub const NBEST_ARITY: usize = 14;

/// `size` n-best lists of 12 hypotheses each.
pub fn nbest_corpus(size: usize, seed: u64) -> Result<NBestSet> {
    let lex = Lexicon::new();
    let base = RngStream::new(seed, streams::SYNTH);
    let words: Vec<&String> = lex.nouns.iter().chain(&lex.verbs_past).chain(&lex.adjectives).collect();
    let mut records = Vec::with_capacity(size);
    for id in 0..size {
        let mut rng = base.substream(id as u64);
        let len = 6 + rng.below(10) as usize;
        let reference: Vec<String> = (0..len).map(|_| words[zipfish(&mut rng, words.len())].clone()).collect();
        let mut hypotheses = Vec::new();
        for _ in 0..12 {
            let noise = rng.next_f64() * 0.8;
            let mut hyp = Vec::with_capacity(len + 2);
            let mut edits = 0usize;
            for tok in &reference {
                let r = rng.next_f64();
                if r < noise * 0.2 {
                    edits += 1;
                    continue;
                }
                if r < noise * 0.7 {
                    edits += 1;
                    hyp.push(words[zipfish(&mut rng, words.len())].clone());
                } else {
                    hyp.push(tok.clone());
                }
                if rng.next_f64() < noise * 0.1 {
                    edits += 1;
                    hyp.push(words[zipfish(&mut rng, words.len())].clone());
                }
            }
            if hyp.len() > 2 && rng.next_f64() < noise {
                let j = rng.below(hyp.len() as u64 - 1) as usize;
                hyp.swap(j, j + 1);
                edits += 1;
            }
            let quality = sentence_bleu_smoothed(&hyp, &reference)?;
            // A few informative features (noisy views of quality and length),
            // the rest weakly informative or pure noise.
            let mut f = vec![0.0; NBEST_ARITY];
            f[0] = quality + 0.3 * rng.next_normal();
            f[1] = -(edits as f64) / len as f64 + 0.2 * rng.next_normal();
            f[2] = (hyp.len() as f64 / len as f64).ln();
            f[3] = hyp.len() as f64;
            f[4] = -noise + 0.4 * rng.next_normal();
            for v in f.iter_mut().skip(5) {
                *v = rng.next_normal();
            }
            for v in f.iter_mut() {
                // Short decimals keep generated files readable.
                *v = (*v * 1e4).round() / 1e4;
            }
            hypotheses.push(NBestHypothesis { tokens: hyp, features: f });
        }
        records.push(NBestRecord {
            id: format!("s{id}"),
            hypotheses,
            reference,
        });
    }
    Ok(NBestSet {
        records,
        arity: NBEST_ARITY,
    })
}

pub const DOC_CLASSES: usize = 4;
pub const DOC_VOCAB: usize = 2000;

/// `size` documents over four topics, with unit-length tf-idf-like vectors.
pub fn doc_corpus(size: usize, seed: u64) -> Result<DocSet> {
    let base = RngStream::new(seed, streams::SYNTH);
    let topic_words = DOC_VOCAB / 2 / DOC_CLASSES;
    let mut docs = Vec::with_capacity(size);
    for d in 0..size {
        let mut rng = base.substream(d as u64);
        let gold = rng.below(DOC_CLASSES as u64) as usize;
        let mut counts: Vec<(usize, f64)> = Vec::new();
        let n_terms = 10 + rng.below(20);
        for _ in 0..n_terms {
            // Topic words come from the class block in the first half of
            // the vocabulary; the second half is shared background.
            let term = if rng.below(10) < 4 {
                gold * topic_words + zipfish(&mut rng, topic_words)
            } else {
                DOC_VOCAB / 2 + zipfish(&mut rng, DOC_VOCAB / 2)
            };
            match counts.iter_mut().find(|(t, _)| *t == term) {
                Some(slot) => slot.1 += 1.0,
                None => counts.push((term, 1.0)),
            }
        }
        let idf = |t: usize| if t < DOC_VOCAB / 2 { 2.0 } else { 1.0 };
        let mut pairs: Vec<(usize, f64)> = counts.into_iter().map(|(t, c)| (t, (1.0 + f64::ln(c)) * idf(t))).collect();
        let norm = pairs.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        pairs.iter_mut().for_each(|(_, v)| *v = (*v / norm * 1e4).round() / 1e4);
        docs.push(DocRecord {
            id: format!("doc{d}"),
            gold,
            vector: SparseVector::from_pairs(DOC_VOCAB, pairs)?,
        });
    }
    Ok(DocSet {
        classes: DOC_CLASSES,
        vocab: DOC_VOCAB,
        docs,
        warnings: Vec::new(),
    })
}
