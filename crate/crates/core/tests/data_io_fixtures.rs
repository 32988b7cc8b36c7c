use std::path::PathBuf;

use szo::data_io::{parse_conll, parse_docs, parse_nbest, write_conll, ConllMode};
use szo::objectives::feedback;
use szo::sparse::SparseVector;
use szo::structpred::Output;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn conll_two_sentences() {
    let parsed = parse_conll(&fixture("two_sentences.conll"), ConllMode::Strict).unwrap();
    assert!(parsed.warnings.is_empty());
    let s = &parsed.items;
    assert_eq!(s.len(), 2);
    let words: Vec<&str> = s[0].tokens().iter().map(|t| t.word.as_str()).collect();
    assert_eq!(words, ["Confidence", "in", "the", "pound", "."]);
    let pos: Vec<&str> = s[1].tokens().iter().map(|t| t.pos.as_str()).collect();
    assert_eq!(pos, ["PRP", "VBZ", "DT", "JJ", "NN"]);
    let written = write_conll(s);
    let tags: Vec<&str> = written
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.rsplit(' ').next().unwrap())
        .collect();
    assert_eq!(tags, ["B-NP", "O", "B-NP", "I-NP", "O", "B-NP", "O", "B-NP", "I-NP", "I-NP"]);
}

#[test]
fn conll_strict_error_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.conll");
    std::fs::write(&p, "a DT B-NP\nb NN\n").unwrap();
    let err = parse_conll(&p, ConllMode::Strict).unwrap_err();
    assert!(err.to_string().contains(":2:"), "{err}");
    std::fs::write(&p, "").unwrap();
    assert!(parse_conll(&p, ConllMode::Strict).unwrap().items.is_empty());
}

#[test]
fn nbest_two_ids() {
    let set = parse_nbest(&fixture("two_ids.nbest")).unwrap();
    assert_eq!(set.arity, 3);
    let inst = set.to_instances().unwrap();
    assert_eq!(inst.len(), 2);
    assert_eq!(inst[0].id, "a");
    assert_eq!(inst[0].candidates().len(), 2);
    assert_eq!(inst[0].candidates()[0].features, SparseVector::from_dense(&[0.5, -1.0, 2.0]));
    assert_eq!(inst[0].candidates()[1].features, SparseVector::from_dense(&[0.25, 0.0, 1.0]));
    assert_eq!(
        inst[1].candidates()[0].output,
        Output::Tokens(vec!["x".into(), "y".into()])
    );
    assert_eq!(feedback(&inst[0], 0).unwrap(), 0.0);
    // No shared tokens, four tokens each: precisions 0.01/4, 0.01/3, 0.01/2, 0.01/1.
    let disjoint = 1.0 - (0.01f64 / 4.0 * 0.01 / 3.0 * 0.01 / 2.0 * 0.01).powf(0.25);
    assert!((feedback(&inst[0], 1).unwrap() - disjoint).abs() < 1e-12);
    // "x y" against "x y z w": precisions 1, 1, 0.01, 0.01 and BP = e^-1.
    let short = 1.0 - 0.1 * (-1.0f64).exp();
    assert!((feedback(&inst[1], 0).unwrap() - short).abs() < 1e-12);
}

#[test]
fn nbest_missing_reference() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.nbest");
    std::fs::write(&p, "a ||| t ||| 1\n").unwrap();
    assert!(parse_nbest(&p).is_err());
}

#[test]
fn docs_three() {
    let set = parse_docs(&fixture("three_docs.docs")).unwrap();
    assert_eq!((set.classes, set.vocab), (3, 5));
    assert_eq!(set.warnings.len(), 1, "duplicate index warns");
    assert_eq!(set.docs[1].vector, SparseVector::from_pairs(5, [(1, 0.75), (4, 2.0)]).unwrap());
    let inst = set.to_instances().unwrap();
    assert_eq!(inst.len(), 3);
    assert_eq!(inst[0].dim(), 15);
    assert_eq!(inst[0].candidates()[2].features, SparseVector::from_pairs(15, [(10, 1.0), (13, 0.5)]).unwrap());
    assert_eq!(inst[2].candidates()[1].output, Output::Class(1));
    assert_eq!(feedback(&inst[2], 1).unwrap(), 0.0);
    assert_eq!(feedback(&inst[2], 0).unwrap(), 1.0);
}

#[test]
fn docs_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.docs");
    std::fs::write(&p, "classes=2 vocab=3\n2\t0:1\n").unwrap();
    assert!(parse_docs(&p).is_err());
    std::fs::write(&p, "classes=2 vocab=3\n1\t3:1\n").unwrap();
    assert!(parse_docs(&p).is_err());
}
