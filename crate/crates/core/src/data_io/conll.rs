//! CoNLL-2000 style chunking files: `word POS chunk` per line, sentences
//! separated by blank lines. Chunk tags reduce to the NP task: `B-NP` to
//! `B`, `I-NP` to `I`, anything else to `O`.

use std::path::Path;

use super::{parse_error, read_text, Parsed};
use crate::error::Result;
use crate::structpred::{SequenceInstance, Tag, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConllMode {
    /// The first malformed line is an error.
    Strict,
    /// Malformed sentences are skipped with a warning.
    Lenient,
}

fn np_tag(chunk: &str) -> Tag {
    match chunk {
        "B-NP" => Tag::B,
        "I-NP" => Tag::I,
        _ => Tag::O,
    }
}

pub fn parse_conll(path: &Path, mode: ConllMode) -> Result<Parsed<SequenceInstance>> {
    let text = read_text(path)?;
    parse_conll_str(&text, &path.display().to_string(), mode)
}

pub fn parse_conll_str(text: &str, origin: &str, mode: ConllMode) -> Result<Parsed<SequenceInstance>> {
    let mut out = Parsed {
        items: Vec::new(),
        warnings: Vec::new(),
    };
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    // First problem in the current sentence, as (line, reason).
    let mut problem: Option<(usize, String)> = None;
    let mut start_line = 1;

    let finish = |tokens: &mut Vec<Token>,
                      tags: &mut Vec<Tag>,
                      problem: &mut Option<(usize, String)>,
                      start_line: usize,
                      out: &mut Parsed<SequenceInstance>|
     -> Result<()> {
        let toks = std::mem::take(tokens);
        let tg = std::mem::take(tags);
        if let Some((line, reason)) = problem.take() {
            out.warnings.push(format!("{origin}:{line}: {reason}; sentence skipped"));
            return Ok(());
        }
        if toks.is_empty() {
            return Ok(());
        }
        match SequenceInstance::new(toks, tg) {
            Ok(s) => out.items.push(s),
            Err(e) => {
                if mode == ConllMode::Strict {
                    return Err(parse_error(origin, start_line, e.to_string()));
                }
                out.warnings
                    .push(format!("{origin}:{start_line}: {e}; sentence skipped"));
            }
        }
        Ok(())
    };

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            finish(&mut tokens, &mut tags, &mut problem, start_line, &mut out)?;
            start_line = line_no + 1;
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 3 {
            let reason = format!("expected 3 columns (word POS chunk), found {}", cols.len());
            if mode == ConllMode::Strict {
                return Err(parse_error(origin, line_no, reason));
            }
            problem.get_or_insert((line_no, reason));
            continue;
        }
        tokens.push(Token::new(cols[0], cols[1]));
        tags.push(np_tag(cols[2]));
    }
    finish(&mut tokens, &mut tags, &mut problem, start_line, &mut out)?;
    Ok(out)
}

/// Writes sentences back out with NP chunk labels (`B-NP`, `I-NP`, `O`).
pub fn write_conll(sentences: &[SequenceInstance]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (t, tag) in s.tokens().iter().zip(s.gold()) {
            let chunk = match tag {
                Tag::B => "B-NP",
                Tag::I => "I-NP",
                Tag::O => "O",
            };
            out.push_str(&format!("{} {} {}\n", t.word, t.pos, chunk));
        }
        out.push('\n');
    }
    out
}
