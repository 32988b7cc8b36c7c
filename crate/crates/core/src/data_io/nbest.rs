//! n-best reranking lists, one hypothesis per line:
//!
//! ```text
//! id ||| hypothesis tokens ||| f1 f2 ... fK ||| reference tokens
//! ```
//!
//! The reference is required on the first line of each id and may be
//! omitted afterwards. Every hypothesis carries the same number `K` of
//! dense features, stored as a sparse vector over indices `0..K`.

use std::collections::HashMap;
use std::path::Path;

use super::{parse_error, read_text};
use crate::error::{Error, Result};
use crate::metrics::sentence_bleu_smoothed;
use crate::sparse::SparseVector;
use crate::structpred::{Candidate, Instance, Output};

#[derive(Clone, Debug, PartialEq)]
pub struct NBestHypothesis {
    pub tokens: Vec<String>,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NBestRecord {
    pub id: String,
    pub hypotheses: Vec<NBestHypothesis>,
    pub reference: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NBestSet {
    pub records: Vec<NBestRecord>,
    /// Feature count shared by every hypothesis.
    pub arity: usize,
}

impl NBestSet {
    /// One instance per id; candidate loss is `1 - smoothed sentence BLEU`.
    pub fn to_instances(&self) -> Result<Vec<Instance>> {
        self.records
            .iter()
            .map(|r| {
                let candidates = r
                    .hypotheses
                    .iter()
                    .map(|h| {
                        let loss = 1.0 - sentence_bleu_smoothed(&h.tokens, &r.reference)?;
                        Ok(Candidate::new(
                            Output::Tokens(h.tokens.clone()),
                            SparseVector::from_dense(&h.features),
                            loss,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Instance::new(r.id.clone(), candidates)
            })
            .collect()
    }

    pub fn references(&self) -> Vec<Vec<String>> {
        self.records.iter().map(|r| r.reference.clone()).collect()
    }
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn parse_nbest(path: &Path) -> Result<NBestSet> {
    let text = read_text(path)?;
    parse_nbest_str(&text, &path.display().to_string())
}

pub fn parse_nbest_str(text: &str, origin: &str) -> Result<NBestSet> {
    let mut records: Vec<NBestRecord> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut arity: Option<usize> = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(parse_error(
                origin,
                line_no,
                format!("expected 3 or 4 `|||`-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(parse_error(origin, line_no, "empty id"));
        }
        let features = fields[2]
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(origin, line_no, format!("bad feature value `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let reference = fields.get(3).map(|r| tokens(r)).filter(|r| !r.is_empty());

        let record = match by_id.get(id).copied() {
            Some(p) => {
                let rec = &mut records[p];
                if let Some(r) = &reference {
                    if *r != rec.reference {
                        return Err(parse_error(origin, line_no, format!("conflicting reference for id `{id}`")));
                    }
                }
                rec
            }
            None => {
                let reference = reference.ok_or_else(|| {
                    parse_error(origin, line_no, format!("missing reference on the first line of id `{id}`"))
                })?;
                by_id.insert(id.to_string(), records.len());
                records.push(NBestRecord {
                    id: id.to_string(),
                    hypotheses: Vec::new(),
                    reference,
                });
                records.last_mut().expect("just pushed")
            }
        };
        if let Some(first) = record.hypotheses.first() {
            if first.features.len() != features.len() {
                return Err(parse_error(
                    origin,
                    line_no,
                    format!(
                        "feature arity {} differs from {} earlier in id `{id}`",
                        features.len(),
                        first.features.len()
                    ),
                ));
            }
        }
        match arity {
            None => arity = Some(features.len()),
            Some(a) if a != features.len() => {
                return Err(parse_error(
                    origin,
                    line_no,
                    format!("feature arity {} differs from {a} used by earlier ids", features.len()),
                ))
            }
            _ => {}
        }
        record.hypotheses.push(NBestHypothesis {
            tokens: tokens(fields[1]),
            features,
        });
    }
    let arity = arity.unwrap_or(0);
    if !records.is_empty() && arity == 0 {
        return Err(Error::invalid("nbest", "hypotheses carry no features"));
    }
    Ok(NBestSet { records, arity })
}

pub fn write_nbest(set: &NBestSet) -> String {
    let mut out = String::new();
    for r in &set.records {
        for (i, h) in r.hypotheses.iter().enumerate() {
            let feats: Vec<String> = h.features.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&format!("{} ||| {} ||| {}", r.id, h.tokens.join(" "), feats.join(" ")));
            if i == 0 {
                out.push_str(&format!(" ||| {}", r.reference.join(" ")));
            }
            out.push('\n');
        }
    }
    out
}
