mod common;

use std::ops::Range;

use common::*;
use dnc_core::tree::{HamiltonianTree, NodeLabel};
use dnc_core::{OperatorSum, Pauli, PauliTerm};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random contiguous partition of `n` qubits into `2^p` nonempty spans.
fn random_spans(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Range<usize>> {
    let leaves = 1 << p;
    let mut cuts: Vec<usize> = (1..n).collect();
    while cuts.len() > leaves - 1 {
        let k = rng.gen_range(0..cuts.len());
        cuts.remove(k);
    }
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    bounds.windows(2).map(|w| w[0]..w[1]).collect()
}

/// Random local operator: terms on short windows, plus an occasional constant.
fn random_local_op(rng: &mut ChaCha8Rng, n: usize) -> OperatorSum {
    let n_terms = rng.gen_range(1..12);
    let mut terms: Vec<PauliTerm> = (0..n_terms)
        .map(|_| {
            let lo = rng.gen_range(0..n);
            let hi = (lo + rng.gen_range(0..3)).min(n - 1);
            let factors: Vec<(usize, Pauli)> =
                (lo..=hi).map(|q| (q, [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)])).collect();
            PauliTerm::new(rng.gen_range(-1.0..1.0), factors)
        })
        .collect();
    if rng.gen_bool(0.3) {
        terms.push(PauliTerm::identity(rng.gen_range(-1.0..1.0)));
    }
    OperatorSum::new(n, terms).unwrap()
}

fn random_tree(seed: u64) -> HamiltonianTree {
    let mut rng = rng(seed);
    let p = rng.gen_range(0..=3);
    let n = rng.gen_range((1usize << p).max(1)..=8);
    let spans = random_spans(&mut rng, n, p);
    HamiltonianTree::decompose(random_local_op(&mut rng, n), spans, p).unwrap()
}

#[test]
fn random_decompositions_validate_and_round_trip() {
    for seed in 0..200 {
        let tree = random_tree(seed);
        let report = tree.validate();
        assert!(report.passed(), "seed {seed}: {report:?}");

        let op_text = tree.full().to_json().unwrap();
        let text = tree.to_json().unwrap();
        let back = HamiltonianTree::from_json(&text, OperatorSum::from_json(&op_text).unwrap()).unwrap();
        assert_eq!(back.to_json().unwrap(), text, "seed {seed}");
        for label in tree.labels() {
            assert_eq!(back.node_term_indices(label).unwrap(), tree.node_term_indices(label).unwrap());
        }
    }
}

#[test]
fn subsystem_minus_interaction_is_sum_of_children() {
    for seed in 0..100 {
        let tree = random_tree(seed);
        for label in tree.labels().filter(|l| !tree.is_leaf(l)) {
            let h_s = dense_oracle(&tree.subsystem_hamiltonian(label).unwrap());
            let a_s = dense_oracle(&tree.local_interaction(label).unwrap());
            let [c0, c1] = label.children();
            let h0 = dense_oracle(&tree.subsystem_hamiltonian(&c0).unwrap());
            let h1 = dense_oracle(&tree.subsystem_hamiltonian(&c1).unwrap());
            let (d0, d1) = (h0.nrows(), h1.nrows());
            let sum = h0.kronecker(&nalgebra::DMatrix::identity(d1, d1)) + nalgebra::DMatrix::identity(d0, d0).kronecker(&h1);
            assert!((h_s - a_s - sum).norm() < 1e-12, "seed {seed} node {label}");
        }
    }
}

#[test]
fn root_hamiltonian_is_the_full_operator() {
    for seed in 0..50 {
        let tree = random_tree(seed);
        let root = dense_oracle(&tree.subsystem_hamiltonian(&NodeLabel::root()).unwrap());
        assert!((root - dense_oracle(tree.full())).norm() < 1e-12);
    }
}

#[test]
fn interactions_straddle_the_child_cut() {
    for seed in 0..100 {
        let tree = random_tree(seed);
        for label in tree.labels().filter(|l| !tree.is_leaf(l)) {
            let cut = tree.node_span(&label.children()[1]).start;
            for t in tree.interaction(label).unwrap().terms() {
                if let Some((lo, hi)) = t.string.support() {
                    assert!(lo < cut && hi >= cut, "seed {seed} node {label} term {}", t.string);
                }
            }
        }
    }
}

#[test]
fn constants_land_on_the_leftmost_leaf() {
    let op = OperatorSum::new(2, vec![PauliTerm::identity(2.5), PauliTerm::new(1.0, [(1, Pauli::Z)])]).unwrap();
    let tree = HamiltonianTree::decompose(op, vec![0..1, 1..2], 1).unwrap();
    assert_eq!(tree.node_term_indices(&"0".parse().unwrap()).unwrap(), &[0]);
    assert!(tree.validate().passed());
}

#[test]
fn bad_spans_rejected() {
    let op = OperatorSum::new(3, vec![PauliTerm::new(1.0, [(0, Pauli::Z)])]).unwrap();
    assert!(HamiltonianTree::decompose(op.clone(), vec![0..1, 1..2], 1).is_err());
    assert!(HamiltonianTree::decompose(op.clone(), vec![0..2, 1..3], 1).is_err());
    assert!(HamiltonianTree::decompose(op, vec![0..3], 1).is_err());
}
