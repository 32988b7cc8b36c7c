use proptest::prelude::*;

use szo::data_io::synth::chunking_corpus;
use szo::estimators::UpdateRule;
use szo::objectives::{make_synthetic, StochasticObjective, SyntheticKind};
use szo::optimizer::{PerturbationMode, RunConfig};
use szo::sparse::SparseVector;
use szo::structpred::{as_candidate_instance, feature_names, LabelScope, Tag, Token};
use szo::tasks::{ChunkingProblem, DEFAULT_KBEST};
use szo::theory::trace_run;

#[test]
fn three_token_feature_multiset() {
    let tokens = [Token::new("the", "DT"), Token::new("big", "JJ"), Token::new("dog", "NN")];
    let tags = [Tag::B, Tag::I, Tag::I];
    let mut got: Vec<String> = (0..3)
        .flat_map(|i| {
            let prev = if i == 0 { Tag::O } else { tags[i - 1] };
            feature_names(&tokens, i, prev, tags[i])
        })
        .collect();
    let golden = include_str!("fixtures/three_token_features.txt");
    let mut want: Vec<String> = golden.lines().map(String::from).collect();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn chunking_active_sets_are_sparse() {
    let train = chunking_corpus(500, 11);
    let dev = chunking_corpus(10, 12);
    let (problem, registry) = ChunkingProblem::from_corpus(&train, &dev, DEFAULT_KBEST, LabelScope::Gold).unwrap();
    assert!(registry.len() >= 10_000, "feature space {}", registry.len());
    let w = SparseVector::zeros(registry.len());
    let ratios: Vec<f64> = problem.train[..100]
        .iter()
        .map(|s| {
            let inst = as_candidate_instance("s", s, &w, DEFAULT_KBEST).unwrap();
            inst.active_set().len() as f64 / registry.len() as f64
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean < 0.05, "mean active fraction {mean}");
}

#[test]
fn fixed_support_ignores_inert_coordinates() {
    // With a fixed support on 0..8, an n = 512 problem and an n = 8 problem
    // draw the same samples and perturbations, so the iterates agree.
    let config = RunConfig::new(UpdateRule::TwoPoint, PerturbationMode::Sparse, 0.01, 0.05, 2000, 3);
    let small = make_synthetic(SyntheticKind::L1Well, 8, 8, 7).unwrap();
    let large = make_synthetic(SyntheticKind::L1Well, 512, 8, 7).unwrap();
    let a = trace_run(&small, &config, 100).unwrap();
    let b = trace_run(&large, &config, 100).unwrap();
    assert_eq!(a.iterates.len(), b.iterates.len());
    for ((ka, _, wa), (kb, _, wb)) in a.iterates.iter().zip(&b.iterates) {
        assert_eq!(ka, kb);
        assert_eq!(wa.to_dense(), wb.to_dense()[..8]);
    }
}

proptest! {
    #[test]
    fn zoo_is_lipschitz(
        kind in prop::sample::select(SyntheticKind::ALL.to_vec()),
        a in prop::collection::vec(-5.0..5.0f64, 16),
        b in prop::collection::vec(-5.0..5.0f64, 16),
        x in any::<u64>(),
    ) {
        let f = make_synthetic(kind, 16, 6, 1).unwrap();
        let s = f.sample(x);
        let (wa, wb) = (SparseVector::from_dense(&a), SparseVector::from_dense(&b));
        let gap = (f.value(&wa, &s).unwrap() - f.value(&wb, &s).unwrap()).abs();
        let dist: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(gap <= f.lipschitz() * dist + 1e-9);
        prop_assert!(f.value(&wa, &s).unwrap() >= f.f_star() - 1e-12);
    }
}
