//! Independent dense oracles shared by the integration tests. Nothing here
//! calls the crate's own dense conversions.
#![allow(dead_code)]

use dnc_core::operator::CMatrix;
use dnc_core::{OperatorSum, Pauli, PauliTerm, StateVector, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_2x2(p: Option<Pauli>) -> CMatrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match p {
        None => CMatrix::from_row_slice(2, 2, &[one, z, z, one]),
        Some(Pauli::X) => CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        Some(Pauli::Y) => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        Some(Pauli::Z) => CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
    }
}

/// Kronecker product with qubit 0 leftmost.
pub fn kron_string(n: usize, factors: &[(usize, Pauli)]) -> CMatrix {
    let mut m = CMatrix::from_element(1, 1, c(1.0, 0.0));
    for q in 0..n {
        let p = factors.iter().find(|f| f.0 == q).map(|f| f.1);
        m = m.kronecker(&pauli_2x2(p));
    }
    m
}

pub fn dense_oracle(op: &OperatorSum) -> CMatrix {
    let n = op.n_qubits();
    let mut m = CMatrix::zeros(1 << n, 1 << n);
    for t in op.terms() {
        m += kron_string(n, t.string.factors()) * t.coeff;
    }
    m
}

pub fn random_hermitian_op(rng: &mut ChaCha8Rng, n: usize, n_terms: usize) -> OperatorSum {
    let terms = (0..n_terms)
        .map(|_| {
            let factors: Vec<(usize, Pauli)> = (0..n)
                .filter_map(|q| match rng.gen_range(0..4) {
                    0 => None,
                    1 => Some((q, Pauli::X)),
                    2 => Some((q, Pauli::Y)),
                    _ => Some((q, Pauli::Z)),
                })
                .collect();
            PauliTerm::new(rng.gen_range(-1.0..1.0), factors)
        })
        .collect();
    // Pauli strings are Hermitian, so real coefficients give a Hermitian sum
    OperatorSum::new(n, terms).unwrap().hermitian().unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let amps = (0..1usize << n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    StateVector::from_unnormalized(n, amps).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense ground state and energies from nalgebra directly.
pub fn dense_spectrum(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(m.nrows(), m.ncols());
    for (col, &k) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Annihilator of mode `p` on `n` modes, built on the occupation basis.
/// Qubit `|0>` is occupied; bit of mode `q` in basis index `b` is
/// `(b >> (n - 1 - q)) & 1`. The sign is `(-1)^(empty modes below p)`.
pub fn ladder_annihilator(n: usize, p: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    let bit = |b: usize, q: usize| (b >> (n - 1 - q)) & 1;
    for b in 0..dim {
        if bit(b, p) == 0 {
            let empty_below = (0..p).filter(|&q| bit(b, q) == 1).count();
            let sign = if empty_below % 2 == 0 { 1.0 } else { -1.0 };
            let target = b | (1 << (n - 1 - p));
            m[(target, b)] = c(sign, 0.0);
        }
    }
    m
}

pub fn ladder(n: usize, p: usize, dagger: bool) -> CMatrix {
    let a = ladder_annihilator(n, p);
    if dagger {
        a.adjoint()
    } else {
        a
    }
}

pub fn ladder_product(n: usize, factors: &[(usize, bool)]) -> CMatrix {
    factors
        .iter()
        .fold(CMatrix::identity(1 << n, 1 << n), |acc, &(p, d)| acc * ladder(n, p, d))
}

/// Partial trace by explicit summation over the density matrix.
pub fn partial_trace_oracle(state: &StateVector, keep: &[usize]) -> CMatrix {
    let n = state.n_qubits();
    let amps = state.amplitudes();
    let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let compose = |a: usize, e: usize| {
        let mut b = 0usize;
        for (k, &q) in keep.iter().enumerate() {
            b |= ((a >> (keep.len() - 1 - k)) & 1) << (n - 1 - q);
        }
        for (k, &q) in rest.iter().enumerate() {
            b |= ((e >> (rest.len() - 1 - k)) & 1) << (n - 1 - q);
        }
        b
    };
    let da = 1usize << keep.len();
    let de = 1usize << rest.len();
    DMatrix::from_fn(da, da, |i, j| (0..de).map(|e| amps[compose(i, e)] * amps[compose(j, e)].conj()).sum())
}

/// Lower real branch `W_{-1}(x)` for `x ∈ [-1/e, 0)`, by Halley iteration.
pub fn lambert_w_m1(x: f64) -> f64 {
    assert!((-1.0 / std::f64::consts::E..0.0).contains(&x));
    let mut w = if x < -0.25 { -1.0 - (2.0 * (1.0 + std::f64::consts::E * x)).sqrt() } else { (-x).ln() - (-(-x).ln()).ln() };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let next = w - f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        if (next - w).abs() < 1e-15 * w.abs() {
            return next;
        }
        w = next;
    }
    w
}

/// `ψ_0 ⊗ ψ_1 ⊗ ...` by plain Kronecker products.
pub fn kron_states(states: &[&StateVector]) -> Vec<C64> {
    states.iter().fold(vec![c(1.0, 0.0)], |acc, s| {
        acc.iter().flat_map(|a| s.amplitudes().iter().map(move |b| a * b)).collect()
    })
}

/// Ground-state column of a dense Hermitian matrix.
pub fn dense_ground(op: &OperatorSum) -> Vec<C64> {
    let (_, vecs) = dense_spectrum(&dense_oracle(op));
    vecs.column(0).iter().copied().collect()
}

/// `|<g| a ⊗ b>|²` on plain amplitude vectors.
pub fn product_overlap_sq(g: &[C64], a: &[C64], b: &[C64]) -> f64 {
    let prod: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
    g.iter().zip(&prod).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// Expected cost and success of a capped repeat-until-success preparation.
#[derive(Debug, Clone, Copy)]
pub struct Expectation {
    pub n_v: f64,
    pub n_u: f64,
    pub success: f64,
}

/// Closed-form expectations for the recursive preparation of `label`.
///
/// A round prepares the left child, then (if that worked) the right child,
/// then merges. With per-round cost `A`, continue probability `c` and at most
/// `K` rounds, the total is `A (1 - c^K) / (1 - c)`.
pub fn truncated_geometric(
    tree: &dnc_core::tree::HamiltonianTree,
    label: &dnc_core::tree::NodeLabel,
    delta: f64,
    rounds: &dyn Fn(f64) -> u64,
    merge_probability: &dyn Fn(&dnc_core::tree::NodeLabel) -> f64,
    u_cost: &dyn Fn(&dnc_core::tree::NodeLabel) -> f64,
) -> Expectation {
    if tree.is_leaf(label) {
        return Expectation { n_v: 1.0, n_u: 0.0, success: 1.0 };
    }
    let [l0, l1] = label.children();
    let e0 = truncated_geometric(tree, &l0, delta / 3.0, rounds, merge_probability, u_cost);
    let e1 = truncated_geometric(tree, &l1, delta / 3.0, rounds, merge_probability, u_cost);
    let q = merge_probability(label);
    let both = e0.success * e1.success;
    let cont = both * (1.0 - q);
    let k = rounds(delta / 3.0) as i32;
    let geo = if cont == 1.0 { k as f64 } else { (1.0 - cont.powi(k)) / (1.0 - cont) };
    Expectation {
        n_v: (e0.n_v + e0.success * e1.n_v) * geo,
        n_u: (e0.n_u + e0.success * e1.n_u + both * u_cost(label)) * geo,
        success: both * q * geo,
    }
}

/// Rounds for overlap lower bound `r` at budget `d`: `ceil(ln(1/d) π² / (4 r²))`.
pub fn rounds_for(r: f64) -> impl Fn(f64) -> u64 {
    move |d: f64| (((1.0 / d).ln() * std::f64::consts::PI.powi(2) / (4.0 * r * r)).ceil() as u64).max(1)
}
