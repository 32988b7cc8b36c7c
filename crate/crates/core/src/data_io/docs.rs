//! Sparse document files for multiclass classification:
//!
//! ```text
//! classes=<C> vocab=<V>
//! <class>\t<index>:<weight> <index>:<weight> ...
//! ```

use std::path::Path;

use super::{parse_error, read_text};
use crate::error::Result;
use crate::sparse::SparseVector;
use crate::structpred::{multiclass_instance, Instance};

#[derive(Clone, Debug, PartialEq)]
pub struct DocRecord {
    pub id: String,
    pub gold: usize,
    pub vector: SparseVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocSet {
    pub classes: usize,
    pub vocab: usize,
    pub docs: Vec<DocRecord>,
    pub warnings: Vec<String>,
}

impl DocSet {
    pub fn to_instances(&self) -> Result<Vec<Instance>> {
        self.docs
            .iter()
            .map(|d| multiclass_instance(d.id.clone(), &d.vector, self.classes, d.gold))
            .collect()
    }
}

pub fn parse_docs(path: &Path) -> Result<DocSet> {
    let text = read_text(path)?;
    parse_docs_str(&text, &path.display().to_string())
}

fn header_value(field: &str, key: &str) -> Option<usize> {
    field.strip_prefix(key)?.strip_prefix('=')?.parse().ok()
}

pub fn parse_docs_str(text: &str, origin: &str) -> Result<DocSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(origin, 1, "missing `classes=<C> vocab=<V>` header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (classes, vocab) = match fields.as_slice() {
        [c, v] => (header_value(c, "classes"), header_value(v, "vocab")),
        _ => (None, None),
    };
    let (classes, vocab) = match (classes, vocab) {
        (Some(c), Some(v)) if c >= 2 && v >= 1 => (c, v),
        _ => return Err(parse_error(origin, 1, format!("bad header `{header}`"))),
    };
    let mut docs = Vec::new();
    let mut warnings = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        let (class, body) = line.split_once('\t').unwrap_or((line.trim(), ""));
        let gold: usize = class
            .trim()
            .parse()
            .map_err(|_| parse_error(origin, line_no, format!("bad class `{class}`")))?;
        if gold >= classes {
            return Err(parse_error(origin, line_no, format!("class {gold} >= {classes}")));
        }
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for tok in body.split_whitespace() {
            let parsed = tok
                .split_once(':')
                .and_then(|(i, v)| Some((i.parse::<usize>().ok()?, v.parse::<f64>().ok()?)));
            let (i, v) = parsed
                .ok_or_else(|| parse_error(origin, line_no, format!("expected index:weight, got `{tok}`")))?;
            if i >= vocab {
                return Err(parse_error(origin, line_no, format!("index {i} >= vocab {vocab}")));
            }
            if !v.is_finite() {
                return Err(parse_error(origin, line_no, format!("non-finite weight `{tok}`")));
            }
            if let Some(slot) = pairs.iter_mut().find(|(j, _)| *j == i) {
                warnings.push(format!("{origin}:{line_no}: duplicate index {i}; keeping the last value"));
                slot.1 = v;
            } else {
                pairs.push((i, v));
            }
        }
        docs.push(DocRecord {
            id: format!("doc{}", docs.len()),
            gold,
            vector: SparseVector::from_pairs(vocab, pairs)?,
        });
    }
    Ok(DocSet {
        classes,
        vocab,
        docs,
        warnings,
    })
}

pub fn write_docs(set: &DocSet) -> String {
    let mut out = format!("classes={} vocab={}\n", set.classes, set.vocab);
    for d in &set.docs {
        out.push_str(&format!("{}\t{}\n", d.gold, crate::sparse::format_pairs(&d.vector)));
    }
    out
}
