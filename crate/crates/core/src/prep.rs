//! Monte Carlo simulation of recursive ground-state preparation.
//!
//! Every node's ground state, gap and norm are solved classically once (a
//! [`ProtocolPlan`]). A merge is then a Bernoulli event whose probability is
//! the squared overlap of the node's ground state with the product of its
//! children's states (times `4/π²` for the pessimistic model). Each attempt
//! costs `ceil(c_qpe * |H_s| / γ_s)` controlled evolutions; each leaf
//! preparation costs one oracle query.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{StateVector, C64};
use crate::spectra::{self, DEFAULT_TOL};
use crate::tree::{HamiltonianTree, NodeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpeModel {
    /// Success with the squared overlap.
    IdealProjective,
    /// Squared overlap times `4/π²`.
    PessimisticCleve,
}

impl QpeModel {
    pub fn success_probability(self, overlap_sq: f64) -> f64 {
        match self {
            QpeModel::IdealProjective => overlap_sq,
            QpeModel::PessimisticCleve => overlap_sq * 4.0 / (PI * PI),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetryPolicy {
    /// At most `repetitions(r_lb, δ/3)` rounds per merge.
    Capped,
    /// Retry until success; a diagnostic for the raw expected cost.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub model: QpeModel,
    pub c_qpe: f64,
    pub retry: RetryPolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { model: QpeModel::IdealProjective, c_qpe: 1.0, retry: RetryPolicy::Capped }
    }
}

/// Rounds needed so that `(1 - ξ)^k ≤ δ'` whenever `ξ ≥ 4 r_lb² / π²`.
pub fn repetitions(r_lb: f64, delta_prime: f64) -> Result<u64> {
    if !(r_lb > 0.0 && r_lb <= 1.0) {
        return Err(Error::InvalidArgument(format!("overlap lower bound must be in (0, 1], got {r_lb}")));
    }
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::InvalidArgument(format!("failure budget must be in (0, 1), got {delta_prime}")));
    }
    let k = (1.0 / delta_prime).ln() * PI * PI / (4.0 * r_lb * r_lb);
    Ok((k.ceil() as u64).max(1))
}

/// Closed-form query bounds `(N_V, N_U)` with base-2 logarithms.
pub fn analytic_bounds(p: usize, r: f64, delta: f64, h_max: f64, gamma_min: f64, c1: f64, c2: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!("r must be in (0, 1], got {r}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(gamma_min > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_min must be positive, got {gamma_min}")));
    }
    if p == 0 {
        return Ok((c1, 0.0));
    }
    if !(h_max >= gamma_min) {
        return Err(Error::InvalidArgument(format!("H_max ({h_max}) must be at least gamma_min ({gamma_min})")));
    }
    let pf = p as f64;
    let exponent = pf
        * (1.0 + (PI * PI / (4.0 * r * r)).log2() + (1.0 / delta).log2().log2() + (2.0 * pf).log2());
    let scale = exponent.exp2();
    Ok((c1 * scale, c2 * h_max / gamma_min * scale))
}

/// Classical data for one tree node.
#[derive(Debug, Clone)]
pub struct NodeData {
    pub ground: Arc<StateVector>,
    pub energy: f64,
    pub gap: f64,
    pub degenerate: bool,
    /// Spectral-norm estimate of `H_s`.
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeOutcome {
    pub success: bool,
    pub probability: f64,
    pub u_applications: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NodeCounts {
    pub attempts: u64,
    pub successes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrepTrace {
    pub nodes: BTreeMap<String, NodeCounts>,
    pub n_v: u64,
    pub n_u: u64,
    pub master_seed: u64,
    pub run_index: u64,
    pub unbounded: bool,
}

#[derive(Debug, Clone)]
pub struct PrepResult {
    pub succeeded: bool,
    pub state: Option<Arc<StateVector>>,
    pub trace: PrepTrace,
    pub delta: f64,
}

/// A tree together with the classical solution of every node.
#[derive(Debug, Clone)]
pub struct ProtocolPlan {
    tree: HamiltonianTree,
    nodes: BTreeMap<NodeLabel, NodeData>,
}

impl ProtocolPlan {
    pub fn build(tree: HamiltonianTree) -> Result<Self> {
        let labels: Vec<NodeLabel> = tree.labels().cloned().collect();
        let solved = labels
            .par_iter()
            .map(|label| {
                let h = tree.subsystem_hamiltonian(label)?;
                let k = if h.dim() >= 2 { 2 } else { 1 };
                let spec = spectra::lowest_eigenpairs(&h, k, DEFAULT_TOL)?;
                let gap = spectra::spectral_gap(&spec)?;
                let norm = h.spectral_norm()?;
                Ok((
                    label.clone(),
                    NodeData {
                        ground: Arc::new(spec.eigenvectors[0].clone()),
                        energy: spec.eigenvalues[0],
                        gap: gap.value,
                        degenerate: gap.degenerate,
                        norm,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tree, nodes: solved.into_iter().collect() })
    }

    pub fn tree(&self) -> &HamiltonianTree {
        &self.tree
    }

    pub fn node(&self, label: &NodeLabel) -> Result<&NodeData> {
        self.nodes
            .get(label)
            .ok_or_else(|| Error::InvalidArgument(format!("label {label} is not in the tree")))
    }

    /// `|<ψ_s|ψ_s0 ⊗ ψ_s1>|` for an internal node.
    pub fn child_overlap(&self, label: &NodeLabel) -> Result<f64> {
        let [c0, c1] = self.internal_children(label)?;
        let (a, b) = (&self.node(&c0)?.ground, &self.node(&c1)?.ground);
        Ok(product_overlap(&self.node(label)?.ground, a, b)?.norm())
    }

    /// Minimum child-product overlap over internal nodes of the subtree at `label`.
    pub fn min_child_overlap(&self, label: &NodeLabel) -> Result<f64> {
        let mut min = 1.0f64;
        for l in self.subtree(label) {
            if !self.tree.is_leaf(&l) {
                min = min.min(self.child_overlap(&l)?);
            }
        }
        Ok(min)
    }

    /// `(H_max, γ_min)` over the subtree at `label`.
    pub fn norm_gap_extremes(&self, label: &NodeLabel) -> Result<(f64, f64)> {
        let mut h_max = 0.0f64;
        let mut gamma_min = f64::INFINITY;
        for l in self.subtree(label) {
            let d = self.node(&l)?;
            h_max = h_max.max(d.norm);
            gamma_min = gamma_min.min(d.gap);
        }
        Ok((h_max, gamma_min))
    }

    fn subtree(&self, label: &NodeLabel) -> Vec<NodeLabel> {
        self.nodes.keys().filter(|l| label.is_prefix_of(l)).cloned().collect()
    }

    fn internal_children(&self, label: &NodeLabel) -> Result<[NodeLabel; 2]> {
        self.node(label)?;
        if self.tree.is_leaf(label) {
            return Err(Error::InvalidArgument(format!("node {label} is a leaf")));
        }
        Ok(label.children())
    }

    fn check_nondegenerate(&self, label: &NodeLabel) -> Result<()> {
        for l in self.subtree(label) {
            let d = self.node(&l)?;
            if d.degenerate {
                return Err(Error::Degenerate { node: l.to_string(), gap: d.gap });
            }
        }
        Ok(())
    }

    /// Cost of one phase-estimation attempt at `label`.
    pub fn u_cost(&self, label: &NodeLabel, c_qpe: f64) -> Result<u64> {
        let d = self.node(label)?;
        Ok((c_qpe * d.norm / d.gap).ceil() as u64)
    }

    /// One phase-estimation attempt projecting `child0 ⊗ child1` onto the
    /// ground state of node `label`.
    pub fn merge<R: Rng + ?Sized>(
        &self,
        label: &NodeLabel,
        child0: &StateVector,
        child1: &StateVector,
        config: &EngineConfig,
        rng: &mut R,
    ) -> Result<MergeOutcome> {
        self.internal_children(label)?;
        let d = self.node(label)?;
        if d.degenerate {
            return Err(Error::Degenerate { node: label.to_string(), gap: d.gap });
        }
        let q = product_overlap(&d.ground, child0, child1)?.norm_sqr().min(1.0);
        let probability = config.model.success_probability(q);
        let u_applications = self.u_cost(label, config.c_qpe)?;
        let success = rng.gen::<f64>() < probability;
        Ok(MergeOutcome { success, probability, u_applications })
    }

    /// Prepares the ground state of `label` with failure budget `delta`,
    /// drawing randomness from the stream `(master_seed, run_index)`.
    pub fn prepare(
        &self,
        label: &NodeLabel,
        delta: f64,
        r_lb: f64,
        config: &EngineConfig,
        master_seed: u64,
        run_index: u64,
    ) -> Result<PrepResult> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
        }
        if !(r_lb > 0.0 && r_lb <= 1.0) {
            return Err(Error::InvalidArgument(format!("r_lb must be in (0, 1], got {r_lb}")));
        }
        if !(config.c_qpe > 0.0) {
            return Err(Error::InvalidArgument(format!("c_qpe must be positive, got {}", config.c_qpe)));
        }
        self.check_nondegenerate(label)?;
        if config.retry == RetryPolicy::Unbounded {
            for l in self.subtree(label) {
                if !self.tree.is_leaf(&l) && config.model.success_probability(self.child_overlap(&l)?.powi(2)) == 0.0 {
                    return Err(Error::InvalidArgument(format!("merge at {l} can never succeed")));
                }
            }
        }
        let mut rng = run_rng(master_seed, run_index);
        let mut trace = PrepTrace {
            nodes: self.subtree(label).into_iter().map(|l| (l.to_string(), NodeCounts::default())).collect(),
            n_v: 0,
            n_u: 0,
            master_seed,
            run_index,
            unbounded: config.retry == RetryPolicy::Unbounded,
        };
        let state = self.prepare_node(label, delta, r_lb, config, &mut rng, &mut trace)?;
        Ok(PrepResult { succeeded: state.is_some(), state, trace, delta })
    }

    fn prepare_node(
        &self,
        label: &NodeLabel,
        delta: f64,
        r_lb: f64,
        config: &EngineConfig,
        rng: &mut ChaCha8Rng,
        trace: &mut PrepTrace,
    ) -> Result<Option<Arc<StateVector>>> {
        let key = label.to_string();
        if self.tree.is_leaf(label) {
            trace.n_v += 1;
            let c = trace.nodes.get_mut(&key).expect("trace covers subtree");
            c.attempts += 1;
            c.successes += 1;
            return Ok(Some(self.node(label)?.ground.clone()));
        }
        let budget = delta / 3.0;
        let rounds = match config.retry {
            RetryPolicy::Capped => repetitions(r_lb, budget)?,
            RetryPolicy::Unbounded => u64::MAX,
        };
        let [l0, l1] = label.children();
        for _ in 0..rounds {
            let Some(c0) = self.prepare_node(&l0, budget, r_lb, config, rng, trace)? else {
                return Ok(None);
            };
            let Some(c1) = self.prepare_node(&l1, budget, r_lb, config, rng, trace)? else {
                return Ok(None);
            };
            let out = self.merge(label, &c0, &c1, config, rng)?;
            trace.n_u += out.u_applications;
            let c = trace.nodes.get_mut(&key).expect("trace covers subtree");
            c.attempts += 1;
            if out.success {
                c.successes += 1;
                return Ok(Some(self.node(label)?.ground.clone()));
            }
        }
        Ok(None)
    }
}

/// Per-run random stream derived from `(master_seed, run_index)`.
pub fn run_rng(master_seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    rng
}

/// `<target| (a ⊗ b)>` without forming the product.
fn product_overlap(target: &StateVector, a: &StateVector, b: &StateVector) -> Result<C64> {
    let n = a.n_qubits() + b.n_qubits();
    if n != target.n_qubits() {
        return Err(Error::DimensionMismatch { expected: target.n_qubits(), found: n });
    }
    let (ta, aa, ba) = (target.amplitudes(), a.amplitudes(), b.amplitudes());
    let db = ba.len();
    let mut acc = C64::new(0.0, 0.0);
    for (i, x) in aa.iter().enumerate() {
        let row = &ta[i * db..(i + 1) * db];
        let partial: C64 = row.iter().zip(ba).map(|(t, y)| t.conj() * y).sum();
        acc += partial * x;
    }
    Ok(acc)
}

/// Aggregate of many independent seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub model: QpeModel,
    pub p: usize,
    pub delta: f64,
    pub r_lb: f64,
    pub c_qpe: f64,
    pub unbounded: bool,
    pub master_seed: u64,
    pub seeds: u64,
    pub failures: u64,
    pub failure_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / seeds)`.
    pub failure_threshold: f64,
    pub mean_n_v: f64,
    pub stderr_n_v: f64,
    pub max_n_v: u64,
    pub mean_n_u: f64,
    pub stderr_n_u: f64,
    pub max_n_u: u64,
    pub bound_n_v: f64,
    pub bound_n_u: f64,
    pub h_max: f64,
    pub gamma_min: f64,
    /// Per node: attempts in one run -> number of runs.
    pub attempt_histograms: BTreeMap<String, BTreeMap<u64, u64>>,
}

impl RunReport {
    /// Failure rate within threshold and every run within both analytic bounds.
    pub fn within_bounds(&self) -> bool {
        self.failure_rate <= self.failure_threshold
            && (self.max_n_v as f64) <= self.bound_n_v
            && (self.max_n_u as f64) <= self.bound_n_u.max(0.0)
    }
}

/// Runs `n_runs` preparations of `label` in parallel. Run `i` uses the
/// random stream `(master_seed, i)`, so the report does not depend on
/// scheduling.
pub fn run_monte_carlo(
    plan: &ProtocolPlan,
    label: &NodeLabel,
    delta: f64,
    r_lb: f64,
    config: &EngineConfig,
    master_seed: u64,
    n_runs: u64,
) -> Result<RunReport> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let traces: Vec<(bool, PrepTrace)> = (0..n_runs)
        .into_par_iter()
        .map(|i| plan.prepare(label, delta, r_lb, config, master_seed, i).map(|r| (r.succeeded, r.trace)))
        .collect::<Result<_>>()?;

    let failures = traces.iter().filter(|(ok, _)| !ok).count() as u64;
    let stats = |f: &dyn Fn(&PrepTrace) -> u64| {
        let (mut s, mut s2, mut max) = (0u128, 0u128, 0u64);
        for (_, t) in &traces {
            let x = f(t);
            s += x as u128;
            s2 += (x as u128) * (x as u128);
            max = max.max(x);
        }
        let n = n_runs as f64;
        let mean = s as f64 / n;
        let var = if n_runs > 1 { ((s2 as f64) - (s as f64) * mean) / (n - 1.0) } else { 0.0 };
        (mean, (var.max(0.0) / n).sqrt(), max)
    };
    let (mean_n_v, stderr_n_v, max_n_v) = stats(&|t| t.n_v);
    let (mean_n_u, stderr_n_u, max_n_u) = stats(&|t| t.n_u);

    let mut attempt_histograms: BTreeMap<String, BTreeMap<u64, u64>> = BTreeMap::new();
    for (_, t) in &traces {
        for (node, c) in &t.nodes {
            *attempt_histograms.entry(node.clone()).or_default().entry(c.attempts).or_default() += 1;
        }
    }

    let depth = plan.tree().p() - label.depth();
    let (h_max, gamma_min) = plan.norm_gap_extremes(label)?;
    let (bound_n_v, bound_n_u) = analytic_bounds(depth, r_lb, delta, h_max, gamma_min, 1.0, config.c_qpe)?;
    let failure_rate = failures as f64 / n_runs as f64;
    Ok(RunReport {
        model: config.model,
        p: depth,
        delta,
        r_lb,
        c_qpe: config.c_qpe,
        unbounded: config.retry == RetryPolicy::Unbounded,
        master_seed,
        seeds: n_runs,
        failures,
        failure_rate,
        failure_threshold: delta + 3.0 * (delta * (1.0 - delta) / n_runs as f64).sqrt(),
        mean_n_v,
        stderr_n_v,
        max_n_v,
        mean_n_u,
        stderr_n_u,
        max_n_u,
        bound_n_v,
        bound_n_u,
        h_max,
        gamma_min,
        attempt_histograms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{OperatorSum, Pauli, PauliTerm};
    use crate::tree::unit_spans;

    fn chain(n: usize, h: f64, j: f64) -> OperatorSum {
        let mut terms: Vec<PauliTerm> = (0..n).map(|i| PauliTerm::new(h, [(i, Pauli::Z)])).collect();
        terms.extend((0..n - 1).map(|i| PauliTerm::new(j, [(i, Pauli::X), (i + 1, Pauli::X)])));
        OperatorSum::new(n, terms).unwrap()
    }

    fn plan(p: usize, h: f64, j: f64) -> ProtocolPlan {
        let n = 1 << p;
        ProtocolPlan::build(HamiltonianTree::decompose(chain(n, h, j), unit_spans(n), p).unwrap()).unwrap()
    }

    #[test]
    fn repetitions_examples() {
        assert_eq!(repetitions(1.0, 1.0 / 3.0).unwrap(), 3);
        assert_eq!(repetitions(1.0, 1.0 - 1e-12).unwrap(), 1);
        assert_eq!(repetitions(0.5, 1.0 / 3.0).unwrap(), 11);
        assert!(repetitions(0.0, 0.5).is_err());
    }

    #[test]
    fn analytic_bound_examples() {
        assert_eq!(analytic_bounds(0, 0.7, 0.2, 3.0, 1.0, 1.0, 1.0).unwrap(), (1.0, 0.0));
        let (nv, _) = analytic_bounds(1, 1.0, 1.0 / 3.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        // 2^(1 + log2(π²/4) + log2 log2 3 + log2 2), evaluated directly
        assert!((nv.log2() - 3.967440966398527).abs() < 1e-12);
        assert!((nv - 15.642952872679118).abs() < 1e-9);
        let (lo, _) = analytic_bounds(2, 1.0, 0.1, 2.0, 1.0, 1.0, 1.0).unwrap();
        let (hi, _) = analytic_bounds(2, 0.5, 0.1, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert!(hi > lo);
        assert!(analytic_bounds(1, 1.0, 1.5, 2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn merge_probabilities() {
        let plan = plan(1, 1.0, 1.0);
        let root = NodeLabel::root();
        let (g0, g1) = (plan.node(&"0".parse().unwrap()).unwrap(), plan.node(&"1".parse().unwrap()).unwrap());
        let mut rng = run_rng(1, 0);
        let out = plan.merge(&root, &g0.ground, &g1.ground, &EngineConfig::default(), &mut rng).unwrap();
        let a = 2.0 + 5f64.sqrt();
        assert!((out.probability - a * a / (1.0 + a * a)).abs() < 1e-12);
        // ‖H‖ = √5, γ = √5 - 1
        assert_eq!(out.u_applications, (5f64.sqrt() / (5f64.sqrt() - 1.0)).ceil() as u64);

        let free = super::tests::plan(1, 1.0, 0.0);
        let (g0, g1) = (free.node(&"0".parse().unwrap()).unwrap(), free.node(&"1".parse().unwrap()).unwrap());
        let out = free.merge(&root, &g0.ground, &g1.ground, &EngineConfig::default(), &mut rng).unwrap();
        assert!((out.probability - 1.0).abs() < 1e-12 && out.success);
        let cfg = EngineConfig { model: QpeModel::PessimisticCleve, ..EngineConfig::default() };
        let out = free.merge(&root, &g0.ground, &g1.ground, &cfg, &mut rng).unwrap();
        assert!((out.probability - 0.4052847345693511).abs() < 1e-12);
    }

    #[test]
    fn merge_rejects_leaf() {
        let plan = plan(1, 1.0, 1.0);
        let leaf: NodeLabel = "0".parse().unwrap();
        let g = plan.node(&leaf).unwrap().ground.clone();
        assert!(plan.merge(&leaf, &g, &g, &EngineConfig::default(), &mut run_rng(0, 0)).is_err());
    }

    #[test]
    fn single_leaf_costs_one_query() {
        let tree = HamiltonianTree::decompose(chain(1, 1.0, 1.0), unit_spans(1), 0).unwrap();
        let plan = ProtocolPlan::build(tree).unwrap();
        let r = plan.prepare(&NodeLabel::root(), 0.1, 1.0, &EngineConfig::default(), 7, 0).unwrap();
        assert!(r.succeeded);
        assert_eq!((r.trace.n_v, r.trace.n_u), (1, 0));
    }

    #[test]
    fn free_chain_never_retries() {
        let plan = plan(2, 0.7, 0.0);
        for i in 0..50 {
            let r = plan.prepare(&NodeLabel::root(), 0.1, 1.0, &EngineConfig::default(), 3, i).unwrap();
            assert!(r.succeeded);
            assert_eq!(r.trace.n_v, 4);
        }
    }

    #[test]
    fn degenerate_node_is_rejected() {
        // X0 X1 has a doubly degenerate ground level
        let op = OperatorSum::new(2, vec![PauliTerm::new(1.0, [(0, Pauli::X), (1, Pauli::X)])]).unwrap();
        let tree = HamiltonianTree::decompose(op, vec![0..1, 1..2], 1);
        let plan = ProtocolPlan::build(tree.unwrap()).unwrap();
        let err = plan.prepare(&NodeLabel::root(), 0.1, 0.5, &EngineConfig::default(), 0, 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
    }

    #[test]
    fn same_seed_same_trace() {
        let plan = plan(2, 1.0, 1.0);
        let cfg = EngineConfig::default();
        let a = plan.prepare(&NodeLabel::root(), 0.1, 0.9, &cfg, 42, 5).unwrap().trace;
        let b = plan.prepare(&NodeLabel::root(), 0.1, 0.9, &cfg, 42, 5).unwrap().trace;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn unbounded_mode_always_succeeds() {
        let plan = plan(1, 1.0, 1.0);
        let cfg = EngineConfig { model: QpeModel::PessimisticCleve, retry: RetryPolicy::Unbounded, ..EngineConfig::default() };
        for i in 0..200 {
            let r = plan.prepare(&NodeLabel::root(), 0.5, 1.0, &cfg, 9, i).unwrap();
            assert!(r.succeeded && r.trace.unbounded);
        }
    }
}
