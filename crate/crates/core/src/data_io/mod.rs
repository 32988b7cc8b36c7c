//! Line-oriented text formats: CoNLL chunking files, n-best reranking lists,
//! sparse document files, run logs, checkpoints and config files, plus
//! generators for miniature synthetic corpora in those formats.

mod config;
mod conll;
mod docs;
mod nbest;
mod runlog;
pub mod synth;

use std::path::Path;

pub use config::{parse_config, ConfigFile};
pub use conll::{parse_conll, parse_conll_str, write_conll, ConllMode};
pub use docs::{parse_docs, parse_docs_str, write_docs, DocRecord, DocSet};
pub use nbest::{parse_nbest, parse_nbest_str, write_nbest, NBestHypothesis, NBestRecord, NBestSet};
pub use runlog::{read_runlog, read_runlog_str, runlog_to_csv, write_runlog, RUNLOG_HEADER};

use crate::error::{Error, Result};
use crate::sparse::{read_vectors, write_vectors, SparseVector};

/// Parsed items plus the non-fatal problems found along the way.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub warnings: Vec<String>,
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_error(origin: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        reason: reason.into(),
    }
}

/// Writes a weight vector in the sparse text format.
pub fn write_checkpoint(path: &Path, weights: &SparseVector) -> Result<()> {
    write_text(path, &write_vectors(weights.dim(), std::slice::from_ref(weights))?)
}

pub fn read_checkpoint(path: &Path) -> Result<SparseVector> {
    let text = read_text(path)?;
    let origin = path.display().to_string();
    let (dim, mut vectors) = read_vectors(&text, &origin)?;
    match vectors.len() {
        0 => Ok(SparseVector::zeros(dim)),
        1 => Ok(vectors.remove(0)),
        n => Err(parse_error(&origin, n + 1, "checkpoint holds more than one vector")),
    }
}
