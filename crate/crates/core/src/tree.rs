//! Perfect-binary-tree decomposition `H = Σ_s A_s` of a Hamiltonian.
//!
//! Leaves are contiguous qubit ranges. Node `s` covers the leaves whose label
//! starts with `s`; every term lives at the deepest node whose covered range
//! contains its support. Identity terms (empty support) go to leaf `0...0`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{OperatorSum, PauliTerm};

/// Node label: a bit string of length `0..=p`, the empty string being the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeLabel(Vec<bool>);

impl NodeLabel {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().collect())
    }

    /// Label of the node at `depth` whose leaves start at `index << (p - depth)`.
    pub fn at(depth: usize, index: usize) -> Self {
        Self((0..depth).map(|k| (index >> (depth - 1 - k)) & 1 == 1).collect())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Position of the node within its level, reading the bits as binary.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn child(&self, bit: bool) -> Self {
        let mut bits = self.0.clone();
        bits.push(bit);
        Self(bits)
    }

    pub fn children(&self) -> [NodeLabel; 2] {
        [self.child(false), self.child(true)]
    }

    pub fn is_prefix_of(&self, other: &NodeLabel) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("*");
        }
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for NodeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "*" || s.is_empty() {
            return Ok(Self::root());
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("invalid node label {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// The decomposition. Node term lists hold indices into `full.terms()`.
#[derive(Debug, Clone)]
pub struct HamiltonianTree {
    p: usize,
    leaf_spans: Vec<Range<usize>>,
    full: OperatorSum,
    nodes: BTreeMap<NodeLabel, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Offending items, e.g. `"node 01 term 3"`.
    pub offending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check_spans(p: usize, n_qubits: usize, spans: &[Range<usize>]) -> std::result::Result<(), String> {
    if p >= usize::BITS as usize - 1 || spans.len() != 1usize << p {
        return Err(format!("expected 2^{p} leaf spans, got {}", spans.len()));
    }
    let mut next = 0;
    for (k, s) in spans.iter().enumerate() {
        if s.start != next {
            return Err(format!("leaf span {k} starts at {} but previous span ended at {next}", s.start));
        }
        if s.end <= s.start {
            return Err(format!("leaf span {k} is empty"));
        }
        next = s.end;
    }
    if next != n_qubits {
        return Err(format!("leaf spans cover [0, {next}) but the operator has {n_qubits} qubits"));
    }
    Ok(())
}

fn all_labels(p: usize) -> impl Iterator<Item = NodeLabel> {
    (0..=p).flat_map(|d| (0..1usize << d).map(move |i| NodeLabel::at(d, i)))
}

fn contains(span: &Range<usize>, term: &PauliTerm) -> bool {
    match term.string.support() {
        Some((lo, hi)) => span.start <= lo && hi < span.end,
        None => true,
    }
}

impl HamiltonianTree {
    /// Assigns every term of `full` to the deepest node covering its support.
    pub fn decompose(full: OperatorSum, leaf_spans: Vec<Range<usize>>, p: usize) -> Result<Self> {
        check_spans(p, full.n_qubits(), &leaf_spans).map_err(Error::InvalidTree)?;
        let mut nodes: BTreeMap<NodeLabel, Vec<usize>> = all_labels(p).map(|l| (l, Vec::new())).collect();
        let mut tree = Self { p, leaf_spans, full, nodes: BTreeMap::new() };
        for (idx, term) in tree.full.terms().iter().enumerate() {
            let mut label = NodeLabel::root();
            while label.depth() < p {
                match label.children().into_iter().find(|c| contains(&tree.node_span(c), term)) {
                    Some(c) => label = c,
                    None => break,
                }
            }
            nodes.get_mut(&label).expect("label enumerated above").push(idx);
        }
        tree.nodes = nodes;
        Ok(tree)
    }

    /// Builds a tree from explicit node assignments without checking them;
    /// use [`validate`](Self::validate) to audit the result.
    pub fn from_parts(
        p: usize,
        full: OperatorSum,
        leaf_spans: Vec<Range<usize>>,
        assignments: BTreeMap<NodeLabel, Vec<usize>>,
    ) -> Result<Self> {
        if p > 40 || leaf_spans.len() != 1usize << p {
            return Err(Error::InvalidTree(format!("expected 2^{p} leaf spans, got {}", leaf_spans.len())));
        }
        let mut nodes: BTreeMap<NodeLabel, Vec<usize>> = all_labels(p).map(|l| (l, Vec::new())).collect();
        for (label, idx) in assignments {
            match nodes.get_mut(&label) {
                Some(slot) => *slot = idx,
                None => return Err(Error::InvalidTree(format!("label {label} is not in a tree of height {p}"))),
            }
        }
        Ok(Self { p, leaf_spans, full, nodes })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_qubits(&self) -> usize {
        self.full.n_qubits()
    }

    pub fn leaf_spans(&self) -> &[Range<usize>] {
        &self.leaf_spans
    }

    pub fn full(&self) -> &OperatorSum {
        &self.full
    }

    /// Labels in preorder (root, 0, 00, ..., 1, ...).
    pub fn labels(&self) -> impl Iterator<Item = &NodeLabel> {
        self.nodes.keys()
    }

    pub fn labels_at_depth(&self, depth: usize) -> Vec<NodeLabel> {
        (0..1usize << depth).map(|i| NodeLabel::at(depth, i)).collect()
    }

    pub fn is_leaf(&self, label: &NodeLabel) -> bool {
        label.depth() == self.p
    }

    fn check_label(&self, label: &NodeLabel) -> Result<()> {
        if self.nodes.contains_key(label) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("label {label} is not in a tree of height {}", self.p)))
        }
    }

    /// Qubit range covered by the leaves under `label`.
    pub fn node_span(&self, label: &NodeLabel) -> Range<usize> {
        let width = 1usize << (self.p - label.depth());
        let first = label.index() * width;
        self.leaf_spans[first].start..self.leaf_spans[first + width - 1].end
    }

    /// Term indices assigned to `label`.
    pub fn node_term_indices(&self, label: &NodeLabel) -> Result<&[usize]> {
        self.check_label(label)?;
        Ok(&self.nodes[label])
    }

    /// `A_s` on the full register.
    pub fn interaction(&self, label: &NodeLabel) -> Result<OperatorSum> {
        let terms = self
            .node_term_indices(label)?
            .iter()
            .map(|&i| self.full.terms()[i].clone())
            .collect();
        OperatorSum::new(self.n_qubits(), terms)
    }

    /// `A_s` restricted to the node's own qubit range.
    pub fn local_interaction(&self, label: &NodeLabel) -> Result<OperatorSum> {
        let span = self.node_span(label);
        self.interaction(label)?.restrict(span.start, span.end)
    }

    /// `H_s`: all `A_t` with `t` in the subtree of `s`, on the subtree's qubits.
    pub fn subsystem_hamiltonian(&self, label: &NodeLabel) -> Result<OperatorSum> {
        self.check_label(label)?;
        check_spans(self.p, self.n_qubits(), &self.leaf_spans).map_err(Error::InvalidTree)?;
        let span = self.node_span(label);
        let terms = self
            .nodes
            .iter()
            .filter(|(t, _)| label.is_prefix_of(t))
            .flat_map(|(_, idx)| idx.iter().map(|&i| self.full.terms()[i].clone()))
            .collect();
        OperatorSum::new(self.n_qubits(), terms)?.restrict(span.start, span.end)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        let spans = check_spans(self.p, self.n_qubits(), &self.leaf_spans);
        let spans_ok = spans.is_ok();
        checks.push(CheckResult {
            name: "spans_partition",
            passed: spans_ok,
            offending: spans.err().into_iter().collect(),
        });

        let n_terms = self.full.terms().len();
        let mut support_bad = Vec::new();
        let mut deepest_bad = Vec::new();
        let mut seen = vec![0usize; n_terms];
        let mut range_bad = Vec::new();
        for (label, idx) in &self.nodes {
            for &i in idx {
                let Some(term) = self.full.terms().get(i) else {
                    range_bad.push(format!("node {label} references missing term {i}"));
                    continue;
                };
                seen[i] += 1;
                if !spans_ok {
                    continue;
                }
                if !contains(&self.node_span(label), term) {
                    support_bad.push(format!("node {label} term {i}"));
                }
                if !self.is_leaf(label) && label.children().iter().any(|c| contains(&self.node_span(c), term)) {
                    deepest_bad.push(format!("node {label} term {i}"));
                }
            }
        }
        checks.push(CheckResult { name: "support_within_node", passed: spans_ok && support_bad.is_empty(), offending: support_bad });
        checks.push(CheckResult { name: "deepest_node", passed: spans_ok && deepest_bad.is_empty(), offending: deepest_bad });

        let mut recon_bad = range_bad;
        for (i, &count) in seen.iter().enumerate() {
            match count {
                0 => recon_bad.push(format!("term {i} missing")),
                1 => {}
                c => recon_bad.push(format!("term {i} assigned {c} times")),
            }
        }
        if recon_bad.is_empty() && !self.reconstructs() {
            recon_bad.push("sum of node terms differs from the operator".into());
        }
        checks.push(CheckResult { name: "reconstruction", passed: recon_bad.is_empty(), offending: recon_bad });
        ValidationReport { checks }
    }

    fn reconstructs(&self) -> bool {
        let terms: Vec<PauliTerm> = self
            .nodes
            .values()
            .flat_map(|idx| idx.iter().filter_map(|&i| self.full.terms().get(i).cloned()))
            .collect();
        let Ok(sum) = OperatorSum::new(self.n_qubits(), terms) else { return false };
        let (a, b) = (sum.canonical(), self.full.canonical());
        a.terms().len() == b.terms().len()
            && a.terms().iter().zip(b.terms()).all(|(x, y)| {
                x.string == y.string && (x.coeff - y.coeff).norm() <= 1e-12 * y.coeff.norm().max(1.0)
            })
    }

    /// Tree file contents; term indices refer to the sibling operator file.
    pub fn to_json(&self) -> Result<String> {
        let file = TreeFile {
            p: self.p,
            n_qubits: self.n_qubits(),
            leaf_spans: self.leaf_spans.iter().map(|r| [r.start, r.end]).collect(),
            nodes: self.nodes.iter().map(|(l, idx)| (l.to_string(), idx.clone())).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str, full: OperatorSum) -> Result<Self> {
        let file: TreeFile = serde_json::from_str(text)?;
        if file.n_qubits != full.n_qubits() {
            return Err(Error::DimensionMismatch { expected: full.n_qubits(), found: file.n_qubits });
        }
        let assignments = file
            .nodes
            .into_iter()
            .map(|(k, v)| Ok((k.parse::<NodeLabel>()?, v)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let spans = file.leaf_spans.into_iter().map(|[a, b]| a..b).collect();
        Self::from_parts(file.p, full, spans, assignments)
    }
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    p: usize,
    n_qubits: usize,
    leaf_spans: Vec<[usize; 2]>,
    nodes: BTreeMap<String, Vec<usize>>,
}

/// One leaf per qubit: `[0,1), [1,2), ...`.
pub fn unit_spans(n: usize) -> Vec<Range<usize>> {
    (0..n).map(|i| i..i + 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Pauli;

    /// `Σ Z_i + Σ X_i X_{i+1}` on `n` qubits.
    fn chain(n: usize) -> OperatorSum {
        let mut terms: Vec<PauliTerm> = (0..n).map(|i| PauliTerm::new(1.0, [(i, Pauli::Z)])).collect();
        terms.extend((0..n - 1).map(|i| PauliTerm::new(1.0, [(i, Pauli::X), (i + 1, Pauli::X)])));
        OperatorSum::new(n, terms).unwrap()
    }

    fn label(s: &str) -> NodeLabel {
        s.parse().unwrap()
    }

    #[test]
    fn labels_round_trip() {
        assert_eq!(label("*"), NodeLabel::root());
        assert_eq!(label("0110").to_string(), "0110");
        assert_eq!(NodeLabel::at(3, 5).to_string(), "101");
        assert!("012".parse::<NodeLabel>().is_err());
    }

    #[test]
    fn pair_assignment() {
        let t = HamiltonianTree::decompose(chain(2), unit_spans(2), 1).unwrap();
        // terms: Z0, Z1, X0X1
        assert_eq!(t.node_term_indices(&label("0")).unwrap(), &[0]);
        assert_eq!(t.node_term_indices(&label("1")).unwrap(), &[1]);
        assert_eq!(t.node_term_indices(&label("*")).unwrap(), &[2]);
    }

    #[test]
    fn four_spin_assignment() {
        let t = HamiltonianTree::decompose(chain(4), unit_spans(4), 2).unwrap();
        // terms 0..4 are Z_i, 4 = X0X1, 5 = X1X2, 6 = X2X3
        assert_eq!(t.node_term_indices(&label("*")).unwrap(), &[5]);
        assert_eq!(t.node_term_indices(&label("0")).unwrap(), &[4]);
        assert_eq!(t.node_term_indices(&label("1")).unwrap(), &[6]);
        for i in 0..4 {
            let leaf = NodeLabel::at(2, i);
            assert_eq!(t.node_term_indices(&leaf).unwrap(), &[i]);
        }
        assert!(t.validate().passed());
    }

    #[test]
    fn single_leaf_tree() {
        let t = HamiltonianTree::decompose(chain(3), vec![0..3], 0).unwrap();
        assert_eq!(t.node_term_indices(&NodeLabel::root()).unwrap().len(), 5);
        assert!(t.validate().passed());
    }

    #[test]
    fn subsystem_hamiltonians() {
        let t = HamiltonianTree::decompose(chain(4), unit_spans(4), 2).unwrap();
        assert_eq!(t.subsystem_hamiltonian(&label("0")).unwrap().canonical(), chain(2).canonical());
        assert_eq!(t.subsystem_hamiltonian(&label("*")).unwrap().canonical(), chain(4).canonical());
        let leaf = t.subsystem_hamiltonian(&label("11")).unwrap();
        assert_eq!(leaf.n_qubits(), 1);
        assert_eq!(leaf.terms(), &[PauliTerm::new(1.0, [(0, Pauli::Z)])]);
        assert!(t.subsystem_hamiltonian(&label("111")).is_err());
    }

    #[test]
    fn misplaced_term_fails_deepest_check() {
        let full = chain(4);
        let mut nodes = BTreeMap::new();
        nodes.insert(label("*"), vec![4, 5]);
        nodes.insert(label("1"), vec![6]);
        for i in 0..4 {
            nodes.insert(NodeLabel::at(2, i), vec![i]);
        }
        let t = HamiltonianTree::from_parts(2, full, unit_spans(4), nodes).unwrap();
        let report = t.validate();
        let deep = report.check("deepest_node").unwrap();
        assert!(!deep.passed);
        assert_eq!(deep.offending, vec!["node * term 4".to_string()]);
        assert!(report.check("reconstruction").unwrap().passed);
    }

    #[test]
    fn dropped_term_fails_reconstruction() {
        let full = chain(4);
        let mut nodes = BTreeMap::new();
        nodes.insert(label("*"), vec![5]);
        nodes.insert(label("0"), vec![4]);
        for i in 0..4 {
            nodes.insert(NodeLabel::at(2, i), vec![i]);
        }
        let t = HamiltonianTree::from_parts(2, full, unit_spans(4), nodes).unwrap();
        let recon = t.validate().check("reconstruction").unwrap().clone();
        assert!(!recon.passed);
        assert_eq!(recon.offending, vec!["term 6 missing".to_string()]);
    }

    #[test]
    fn rejects_bad_spans() {
        assert!(HamiltonianTree::decompose(chain(4), vec![0..1, 2..4], 1).is_err());
        assert!(HamiltonianTree::decompose(chain(4), vec![0..2, 2..3], 1).is_err());
        assert!(HamiltonianTree::decompose(chain(4), unit_spans(4), 1).is_err());
    }

    #[test]
    fn identity_goes_to_first_leaf() {
        let mut terms = chain(2).into_terms();
        terms.push(PauliTerm::identity(3.0));
        let t = HamiltonianTree::decompose(OperatorSum::new(2, terms).unwrap(), unit_spans(2), 1).unwrap();
        assert_eq!(t.node_term_indices(&label("0")).unwrap(), &[0, 3]);
        assert!(t.validate().passed());
    }

    #[test]
    fn tree_file_round_trip() {
        let t = HamiltonianTree::decompose(chain(4), vec![0..1, 1..2, 2..3, 3..4], 2).unwrap();
        let text = t.to_json().unwrap();
        assert!(text.contains("\"*\""));
        let back = HamiltonianTree::from_json(&text, chain(4)).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        assert!(back.validate().passed());
    }
}
