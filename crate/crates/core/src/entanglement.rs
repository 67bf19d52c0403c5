//! Partial traces, von Neumann entropy and the entropy-limited overlap.
//!
//! Entropies are in nats throughout; [`nats_to_bits`] converts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::eigvalsh;
use crate::operator::{CMatrix, StateVector, C64, DENSE_LIMIT};

const VALIDATION_TOL: f64 = 1e-10;
/// Eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity, each to 1e-10.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument("density matrix must be square and nonempty".into()));
        }
        if entries.nrows() > DENSE_LIMIT {
            return Err(Error::TooLarge { dim: entries.nrows(), limit: DENSE_LIMIT });
        }
        let asym = (&entries - entries.adjoint()).iter().fold(0.0f64, |m, x| m.max(x.norm()));
        if asym > VALIDATION_TOL {
            return Err(Error::InvalidArgument(format!("density matrix not Hermitian (deviation {asym})")));
        }
        let trace = entries.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > VALIDATION_TOL {
            return Err(Error::InvalidArgument(format!("density matrix trace is {trace}, expected 1")));
        }
        let min = eigvalsh(&entries)?[0];
        if min < -VALIDATION_TOL {
            return Err(Error::InvalidArgument(format!("density matrix has negative eigenvalue {min}")));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.entries).expect("validated square matrix")
    }
}

fn check_keep(n: usize, keep: &[usize]) -> Result<Vec<usize>> {
    let mut k = keep.to_vec();
    k.sort_unstable();
    k.dedup();
    if k.is_empty() || k.len() >= n {
        return Err(Error::InvalidArgument(format!(
            "keep set must be a nonempty proper subset of {n} qubits"
        )));
    }
    if let Some(&q) = k.iter().find(|&&q| q >= n) {
        return Err(Error::InvalidArgument(format!("qubit {q} out of range for {n} qubits")));
    }
    Ok(k)
}

/// State amplitudes arranged as a `dim_A x dim_B` matrix. Kept qubits index
/// rows in ascending qubit order, the lowest-numbered qubit most significant,
/// and likewise for the traced-out qubits on columns.
fn bipartite_matrix(state: &StateVector, keep: &[usize]) -> Result<CMatrix> {
    let n = state.n_qubits();
    let keep = check_keep(n, keep)?;
    let rest: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    if 1usize << keep.len() > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: 1 << keep.len(), limit: DENSE_LIMIT });
    }
    let gather = |b: usize, qubits: &[usize]| {
        qubits.iter().fold(0usize, |acc, &q| (acc << 1) | ((b >> (n - 1 - q)) & 1))
    };
    let mut m = CMatrix::zeros(1 << keep.len(), 1 << rest.len());
    for (b, &amp) in state.amplitudes().iter().enumerate() {
        m[(gather(b, &keep), gather(b, &rest))] = amp;
    }
    Ok(m)
}

/// `Tr_B |ψ><ψ|` keeping the listed qubits.
pub fn reduced_density(state: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let m = bipartite_matrix(state, keep)?;
    let rho = &m * m.adjoint();
    DensityMatrix::new((&rho + rho.adjoint()).scale(0.5))
}

/// Von Neumann entropy in nats.
pub fn entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .into_iter()
        .filter(|&p| p >= ENTROPY_CUTOFF)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

pub fn nats_to_bits(s: f64) -> f64 {
    s / std::f64::consts::LN_2
}

/// `<ψ_A|ρ_A|ψ_A>`, an upper bound on any product-state overlap
/// `|<full|ψ_A ⊗ ψ_B>|²`.
pub fn success_cap(full: &StateVector, psi_a: &StateVector, keep: &[usize]) -> Result<f64> {
    let rho = reduced_density(full, keep)?;
    if psi_a.amplitudes().len() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: psi_a.amplitudes().len() });
    }
    let v = crate::linalg::to_column(psi_a.amplitudes());
    Ok(v.dotc(&(rho.entries() * &v)).re)
}

/// The normalized partial inner product `<ψ_A|full>` on the traced-out
/// qubits, which maximizes `|<full|ψ_A ⊗ ψ_B>|` over `ψ_B`. `None` if it
/// vanishes.
pub fn optimal_partner(full: &StateVector, psi_a: &StateVector, keep: &[usize]) -> Result<Option<StateVector>> {
    let m = bipartite_matrix(full, keep)?;
    if psi_a.amplitudes().len() != m.nrows() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: psi_a.amplitudes().len() });
    }
    let v = crate::linalg::to_column(psi_a.amplitudes());
    let partial = m.transpose() * v.conjugate();
    if partial.norm() < 1e-14 {
        return Ok(None);
    }
    let n_rest = full.n_qubits() - keep.len();
    StateVector::from_unnormalized(n_rest, partial.iter().copied().collect()).map(Some)
}

/// Entropy of `r²|ψ><ψ| + (1-r²)/(d-1) (1 - |ψ><ψ|)`.
pub fn mixed_entropy(r2: f64, dim_a: u64) -> f64 {
    let xlnx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let rest = 1.0 - r2;
    let d1 = (dim_a - 1) as f64;
    -xlnx(r2) - if rest > 0.0 { rest * (rest / d1).ln() } else { 0.0 }
}

fn check_entropy_args(e: f64, dim_a: u64) -> Result<()> {
    if dim_a < 2 {
        return Err(Error::InvalidArgument(format!("dim_A must be at least 2, got {dim_a}")));
    }
    let max = (dim_a as f64).ln();
    if !(e >= 0.0 && e <= max) {
        return Err(Error::InvalidArgument(format!("entropy {e} outside [0, ln {dim_a}]")));
    }
    Ok(())
}

/// Bisects a decreasing `f` on `[lo, hi]` for `f(x) = target` down to
/// adjacent floats.
fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `r² ∈ [1/dim_A, 1]` whose maximally spread mixture has entropy
/// `e` (nats).
pub fn max_overlap_for_entropy(e: f64, dim_a: u64) -> Result<f64> {
    check_entropy_args(e, dim_a)?;
    if e == 0.0 {
        return Ok(1.0);
    }
    let lo = 1.0 / dim_a as f64;
    Ok(bisect_decreasing(|r2| mixed_entropy(r2, dim_a), e, lo, 1.0))
}

/// Solve of the weaker relation `e = -(1-r²) ln((1-r²)/(dim_A-1))` on the
/// branch `1 - r² <= (dim_A-1)/e`, which drops the `-r² ln r²` term. Never
/// exceeds [`max_overlap_for_entropy`].
pub fn loose_overlap_for_entropy(e: f64, dim_a: u64) -> Result<f64> {
    check_entropy_args(e, dim_a)?;
    let d1 = (dim_a - 1) as f64;
    let x_max = (1.0 - 1.0 / dim_a as f64).min(d1 / std::f64::consts::E);
    let f = |x: f64| if x > 0.0 { -x * (x / d1).ln() } else { 0.0 };
    if e > f(x_max) {
        return Err(Error::InvalidArgument(format!("entropy {e} beyond the range of the weaker relation")));
    }
    if e == 0.0 {
        return Ok(1.0);
    }
    // f is increasing in x = 1 - r² on [0, x_max]
    Ok(bisect_decreasing(|r2| f(1.0 - r2), e, 1.0 - x_max, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub entropy_nats: f64,
    pub dim_a: u64,
    pub max_overlap: f64,
    pub loose_overlap: Option<f64>,
}

pub fn entropy_report(e: f64, dim_a: u64) -> Result<EntropyReport> {
    Ok(EntropyReport {
        entropy_nats: e,
        dim_a,
        max_overlap: max_overlap_for_entropy(e, dim_a)?,
        loose_overlap: loose_overlap_for_entropy(e, dim_a).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(2, vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)]).unwrap()
    }

    #[test]
    fn product_state_reduces_to_pure() {
        // |0>|1> is basis index 1
        let s = StateVector::basis(2, 1).unwrap();
        let rho = reduced_density(&s, &[0]).unwrap();
        assert_eq!(rho.entries()[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(rho.entries()[(1, 1)], C64::new(0.0, 0.0));
        let rho1 = reduced_density(&s, &[1]).unwrap();
        assert_eq!(rho1.entries()[(1, 1)], C64::new(1.0, 0.0));
        assert_eq!(entropy(&rho), 0.0);
    }

    #[test]
    fn bell_state_is_maximally_mixed() {
        let rho = reduced_density(&bell(), &[0]).unwrap();
        assert!((rho.entries() - CMatrix::identity(2, 2).scale(0.5)).norm() < 1e-15);
        assert!((entropy(&rho) - 2f64.ln()).abs() < 1e-12);
        assert!((nats_to_bits(entropy(&rho)) - 1.0).abs() < 1e-12);
        let psi = StateVector::new(1, vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        assert!((success_cap(&bell(), &psi, &[0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn keep_set_validation() {
        assert!(reduced_density(&bell(), &[]).is_err());
        assert!(reduced_density(&bell(), &[0, 1]).is_err());
        assert!(reduced_density(&bell(), &[2]).is_err());
    }

    #[test]
    fn identity_over_d_entropy() {
        for d in [2usize, 3, 8] {
            let rho = DensityMatrix::new(CMatrix::identity(d, d).scale(1.0 / d as f64)).unwrap();
            assert!((entropy(&rho) - (d as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_density_rejected() {
        assert!(DensityMatrix::new(CMatrix::identity(2, 2)).is_err());
        let mut m = CMatrix::identity(2, 2).scale(0.5);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let neg = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]));
        assert!(DensityMatrix::new(neg).is_err());
    }

    #[test]
    fn overlap_for_entropy_examples() {
        assert_eq!(max_overlap_for_entropy(0.0, 2).unwrap(), 1.0);
        assert!((max_overlap_for_entropy(2f64.ln(), 2).unwrap() - 0.5).abs() < 1e-7);
        assert!(max_overlap_for_entropy(-0.1, 2).is_err());
        assert!(max_overlap_for_entropy(1.0, 2).is_err());
        assert!(max_overlap_for_entropy(0.1, 1).is_err());
    }

    #[test]
    fn overlap_for_entropy_roundtrip() {
        for d in [2u64, 5, 1 << 20] {
            for k in 1..20 {
                let e = (d as f64).ln() * k as f64 / 20.0;
                let r2 = max_overlap_for_entropy(e, d).unwrap();
                assert!((mixed_entropy(r2, d) - e).abs() < 1e-9, "d={d} e={e}");
                assert!(r2 >= 1.0 / d as f64);
            }
        }
    }

    #[test]
    fn loose_solve_is_weaker() {
        for d in [3u64, 16, 1 << 20] {
            for k in 1..10 {
                let e = (d as f64).ln() * k as f64 / 40.0;
                if let Ok(loose) = loose_overlap_for_entropy(e, d) {
                    assert!(loose <= max_overlap_for_entropy(e, d).unwrap() + 1e-12);
                }
            }
        }
    }
}
