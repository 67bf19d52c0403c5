//! Pauli-string operators and statevector kernels.
//!
//! An [`OperatorSum`] is a complex-weighted sum of Pauli strings on `n_qubits`
//! qubits. Qubit 0 is the most significant bit of a computational-basis
//! index, so basis state `|q0 q1 ... q_{n-1}>` has index
//! `q0 * 2^(n-1) + ... + q_{n-1}`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig17;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Coefficients below this magnitude are dropped by canonicalization.
pub const DROP_TOLERANCE: f64 = 1e-14;
/// Imaginary parts below this are treated as zero by the Hermiticity check.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Largest dimension `to_dense` will materialize.
pub const DENSE_LIMIT: usize = 4096;
/// Statevectors beyond this many qubits are refused.
pub const MAX_STATE_QUBITS: usize = 30;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Product `self * other` as `(phase, result)`; `None` is the identity.
    pub fn mul(self, other: Pauli) -> (C64, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (X, X) | (Y, Y) | (Z, Z) => (ONE, None),
            (X, Y) => (I, Some(Z)),
            (Y, X) => (-I, Some(Z)),
            (Y, Z) => (I, Some(X)),
            (Z, Y) => (-I, Some(X)),
            (Z, X) => (I, Some(Y)),
            (X, Z) => (-I, Some(Y)),
        }
    }

    pub fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

/// A tensor product of single-qubit Paulis, stored sorted by qubit with
/// identities omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    factors: Vec<(usize, Pauli)>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Multiplies the factors left to right, so repeated qubits are allowed
    /// and contribute a phase.
    pub fn from_factors(factors: impl IntoIterator<Item = (usize, Pauli)>) -> (C64, Self) {
        let mut phase = ONE;
        let mut acc = PauliString::identity();
        for (q, p) in factors {
            let (ph, next) = acc.mul(&PauliString { factors: vec![(q, p)] });
            phase *= ph;
            acc = next;
        }
        (phase, acc)
    }

    pub fn single(qubit: usize, pauli: Pauli) -> Self {
        Self { factors: vec![(qubit, pauli)] }
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// `(min, max)` qubit with a non-identity factor.
    pub fn support(&self) -> Option<(usize, usize)> {
        Some((self.factors.first()?.0, self.factors.last()?.0))
    }

    pub fn max_qubit(&self) -> Option<usize> {
        self.factors.last().map(|f| f.0)
    }

    pub fn shifted(&self, offset: isize) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|&(q, p)| ((q as isize + offset) as usize, p))
                .collect(),
        }
    }

    /// Product `self * other` as `(phase, string)`.
    pub fn mul(&self, other: &PauliString) -> (C64, PauliString) {
        let mut phase = ONE;
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() || j < other.factors.len() {
            match (self.factors.get(i), other.factors.get(j)) {
                (Some(&a), Some(&b)) if a.0 == b.0 => {
                    let (ph, p) = a.1.mul(b.1);
                    phase *= ph;
                    if let Some(p) = p {
                        out.push((a.0, p));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&a), Some(&b)) if a.0 < b.0 => {
                    out.push(a);
                    i += 1;
                }
                (Some(_), Some(&b)) => {
                    out.push(b);
                    j += 1;
                }
                (Some(&a), None) => {
                    out.push(a);
                    i += 1;
                }
                (None, Some(&b)) => {
                    out.push(b);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        (phase, PauliString { factors: out })
    }

    /// Bit masks `(x, z, y_count)` for basis-state action, with qubit `q`
    /// at bit `n_qubits - 1 - q`.
    fn masks(&self, n_qubits: usize) -> (usize, usize, u32) {
        let (mut x, mut z, mut ny) = (0usize, 0usize, 0u32);
        for &(q, p) in &self.factors {
            let bit = 1usize << (n_qubits - 1 - q);
            match p {
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
            }
        }
        (x, z, ny)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("I");
        }
        for (k, (q, p)) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}{q}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: C64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: impl Into<C64>, factors: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        let (phase, string) = PauliString::from_factors(factors);
        Self { coeff: coeff.into() * phase, string }
    }

    pub fn identity(coeff: impl Into<C64>) -> Self {
        Self { coeff: coeff.into(), string: PauliString::identity() }
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{:+}i) {}", self.coeff.re, self.coeff.im, self.string)
    }
}

/// Weighted sum of Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl OperatorSum {
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be positive".into()));
        }
        for t in &terms {
            if let Some(q) = t.string.max_qubit() {
                if q >= n_qubits {
                    return Err(Error::InvalidArgument(format!(
                        "term {} acts on qubit {q} but the operator has {n_qubits} qubits",
                        t.string
                    )));
                }
            }
            if !t.coeff.re.is_finite() || !t.coeff.im.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coefficient on {}", t.string)));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<PauliTerm> {
        self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges duplicate strings and drops negligible coefficients. Terms come
    /// out sorted by Pauli string.
    pub fn canonical(&self) -> OperatorSum {
        let mut merged: BTreeMap<PauliString, C64> = BTreeMap::new();
        for t in &self.terms {
            *merged.entry(t.string.clone()).or_insert(ZERO) += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() >= DROP_TOLERANCE)
            .map(|(string, coeff)| PauliTerm { coeff, string })
            .collect();
        OperatorSum { n_qubits: self.n_qubits, terms }
    }

    /// Canonical form with real coefficients, or the first offending term.
    pub fn hermitian(&self) -> Result<OperatorSum> {
        let mut c = self.canonical();
        for t in &mut c.terms {
            if t.coeff.im.abs() > HERMITIAN_TOLERANCE {
                return Err(Error::NotHermitian { term: t.string.to_string(), imag: t.coeff.im });
            }
            t.coeff.im = 0.0;
        }
        Ok(c)
    }

    pub fn is_hermitian(&self) -> bool {
        self.canonical().terms.iter().all(|t| t.coeff.im.abs() <= HERMITIAN_TOLERANCE)
    }

    pub fn scale(&self, factor: C64) -> OperatorSum {
        let terms = self
            .terms
            .iter()
            .map(|t| PauliTerm { coeff: t.coeff * factor, string: t.string.clone() })
            .collect();
        OperatorSum { n_qubits: self.n_qubits, terms }
    }

    pub fn add(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.check_same(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(OperatorSum { n_qubits: self.n_qubits, terms }.canonical())
    }

    pub fn mul(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.check_same(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let (phase, string) = a.string.mul(&b.string);
                terms.push(PauliTerm { coeff: a.coeff * b.coeff * phase, string });
            }
        }
        Ok(OperatorSum { n_qubits: self.n_qubits, terms }.canonical())
    }

    pub fn adjoint(&self) -> OperatorSum {
        let terms = self
            .terms
            .iter()
            .map(|t| PauliTerm { coeff: t.coeff.conj(), string: t.string.clone() })
            .collect();
        OperatorSum { n_qubits: self.n_qubits, terms }
    }

    fn check_same(&self, other: &OperatorSum) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        Ok(())
    }

    /// `op * v`, term by term, without building a matrix.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if self.n_qubits > MAX_STATE_QUBITS {
            return Err(Error::TooLarge { dim: usize::MAX, limit: 1 << MAX_STATE_QUBITS });
        }
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.len() });
        }
        let mut out = vec![ZERO; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Unchecked kernel: `out += op * v`. Lengths must equal `dim()`.
    pub(crate) fn apply_into(&self, v: &[C64], out: &mut [C64]) {
        for t in &self.terms {
            let (x, z, ny) = t.string.masks(self.n_qubits);
            let c = t.coeff * I.powu(ny);
            for (b, &amp) in v.iter().enumerate() {
                if amp == ZERO {
                    continue;
                }
                let val = if (b & z).count_ones() % 2 == 0 { c * amp } else { -c * amp };
                out[b ^ x] += val;
            }
        }
    }

    pub fn one_norm(&self) -> f64 {
        self.canonical().terms.iter().map(|t| t.coeff.norm()).sum()
    }

    /// `(one_norm_upper, power_estimate)` for a Hermitian operator.
    pub fn norm_bounds(&self) -> Result<(f64, f64)> {
        let h = self.hermitian()?;
        let one: f64 = h.terms.iter().map(|t| t.coeff.norm()).sum();
        match h.terms.as_slice() {
            [] => return Ok((0.0, 0.0)),
            // a lone Pauli string has eigenvalues ±1
            [t] => return Ok((one, one.max(t.coeff.norm()))),
            _ => {}
        }
        let est = h.extreme_norm()?;
        Ok((one, est.min(one)))
    }

    /// Spectral norm from the two ends of the spectrum.
    pub fn spectral_norm(&self) -> Result<f64> {
        Ok(self.norm_bounds()?.1)
    }

    /// `max(|λ_min|, |λ_max|)` from the eigensolver applied to `±op`.
    fn extreme_norm(&self) -> Result<f64> {
        let low = crate::spectra::lowest_eigenpairs(self, 1, crate::spectra::DEFAULT_TOL)?.eigenvalues[0];
        let high = -crate::spectra::lowest_eigenpairs(&self.scale(C64::new(-1.0, 0.0)), 1, crate::spectra::DEFAULT_TOL)?
            .eigenvalues[0];
        Ok(low.abs().max(high.abs()))
    }

    pub fn to_dense(&self) -> Result<CMatrix> {
        let dim = if self.n_qubits >= usize::BITS as usize - 1 { usize::MAX } else { self.dim() };
        if dim > DENSE_LIMIT {
            return Err(Error::TooLarge { dim, limit: DENSE_LIMIT });
        }
        let mut m = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            let (x, z, ny) = t.string.masks(self.n_qubits);
            let c = t.coeff * I.powu(ny);
            for b in 0..dim {
                let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(b ^ x, b)] += c * sign;
            }
        }
        Ok(m)
    }

    /// Operator restricted to qubits `[lo, hi)`; every term must live there.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<OperatorSum> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if let Some((a, b)) = t.string.support() {
                if a < lo || b >= hi {
                    return Err(Error::InvalidArgument(format!(
                        "term {} is not supported on qubits [{lo}, {hi})",
                        t.string
                    )));
                }
            }
            terms.push(PauliTerm { coeff: t.coeff, string: t.string.shifted(-(lo as isize)) });
        }
        OperatorSum::new(hi - lo, terms)
    }

    /// Serializes to the operator file format with 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        let mut s = format!("{{\n  \"n_qubits\": {},\n  \"terms\": [", self.n_qubits);
        for (k, t) in self.terms.iter().enumerate() {
            if !t.coeff.re.is_finite() || !t.coeff.im.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
            s.push_str(if k == 0 { "\n" } else { ",\n" });
            s.push_str(&format!(
                "    {{ \"coeff\": [{}, {}], \"paulis\": [",
                sig17(t.coeff.re),
                sig17(t.coeff.im)
            ));
            for (j, (q, p)) in t.string.factors.iter().enumerate() {
                if j > 0 {
                    s.push_str(", ");
                }
                s.push_str(&format!("[{q}, \"{p}\"]"));
            }
            s.push_str("] }");
        }
        s.push_str(if self.terms.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<OperatorSum> {
        let file: OperatorFile = serde_json::from_str(text)?;
        let terms = file
            .terms
            .into_iter()
            .map(|t| PauliTerm::new(C64::new(t.coeff[0], t.coeff[1]), t.paulis))
            .collect();
        OperatorSum::new(file.n_qubits, terms)
    }
}

impl fmt::Display for OperatorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct OperatorFile {
    n_qubits: usize,
    terms: Vec<TermRecord>,
}

#[derive(Deserialize)]
struct TermRecord {
    coeff: [f64; 2],
    paulis: Vec<(usize, Pauli)>,
}

/// A normalized pure state on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

/// Allowed deviation of a state's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-10;

impl StateVector {
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let n = vec_norm(&amps);
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("state norm {n} is not 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes `amps`; fails on the zero vector.
    pub fn from_unnormalized(n_qubits: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let n = vec_norm(&amps);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Ok(Self { n_qubits, amps })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Self::new(n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        Ok(inner(&self.amps, &other.amps))
    }

    /// `self ⊗ other`; `self` occupies the lower-indexed qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_STATE_QUBITS {
            return Err(Error::TooLarge { dim: usize::MAX, limit: 1 << MAX_STATE_QUBITS });
        }
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude is
    /// real and positive (first index wins among near-ties).
    pub fn fix_phase(&mut self) {
        let max = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return;
        }
        if let Some(a) = self.amps.iter().find(|a| a.norm() >= max * (1.0 - 1e-9)) {
            let phase = a.conj() / a.norm();
            self.amps.iter_mut().for_each(|x| *x *= phase);
        }
    }
}

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_STATE_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "state must have between 1 and {MAX_STATE_QUBITS} qubits, got {n_qubits}"
        )));
    }
    if len != 1usize << n_qubits {
        return Err(Error::DimensionMismatch { expected: 1 << n_qubits, found: len });
    }
    Ok(())
}

/// `<a|b>` for raw amplitude slices of equal length.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn normalize(a: &mut [C64]) -> f64 {
    let n = vec_norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zz_x() -> OperatorSum {
        OperatorSum::new(
            2,
            vec![
                PauliTerm::new(1.0, [(0, Pauli::Z)]),
                PauliTerm::new(1.0, [(1, Pauli::Z)]),
                PauliTerm::new(1.0, [(0, Pauli::X), (1, Pauli::X)]),
            ],
        )
        .unwrap()
    }

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn z_fixes_zero() {
        let op = OperatorSum::new(1, vec![PauliTerm::new(1.0, [(0, Pauli::Z)])]).unwrap();
        let v = StateVector::basis(1, 0).unwrap();
        assert!(close(&op.apply(v.amplitudes()).unwrap(), v.amplitudes(), 0.0));
    }

    #[test]
    fn xx_flips_both() {
        let op = OperatorSum::new(2, vec![PauliTerm::new(1.0, [(0, Pauli::X), (1, Pauli::X)])]).unwrap();
        let out = op.apply(StateVector::basis(2, 0).unwrap().amplitudes()).unwrap();
        assert!(close(&out, StateVector::basis(2, 3).unwrap().amplitudes(), 0.0));
    }

    #[test]
    fn tfim_pair_on_11() {
        let out = zz_x().apply(StateVector::basis(2, 3).unwrap().amplitudes()).unwrap();
        let expected = [ONE, ZERO, ZERO, C64::new(-2.0, 0.0)];
        assert!(close(&out, &expected, 0.0));
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let err = zz_x().apply(&[ONE, ZERO]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, found: 2 }));
    }

    #[test]
    fn y_action() {
        let op = OperatorSum::new(1, vec![PauliTerm::new(1.0, [(0, Pauli::Y)])]).unwrap();
        let out = op.apply(&[ONE, ZERO]).unwrap();
        assert!(close(&out, &[ZERO, I], 0.0));
        let out = op.apply(&[ZERO, ONE]).unwrap();
        assert!(close(&out, &[-I, ZERO], 0.0));
    }

    #[test]
    fn pauli_products() {
        let (ph, s) = PauliString::from_factors([(0, Pauli::X), (0, Pauli::Y)]);
        assert_eq!(ph, I);
        assert_eq!(s, PauliString::single(0, Pauli::Z));
        let (ph, s) = PauliString::single(1, Pauli::Z).mul(&PauliString::single(1, Pauli::Z));
        assert_eq!(ph, ONE);
        assert!(s.is_identity());
    }

    #[test]
    fn canonical_merges_and_drops() {
        let op = OperatorSum::new(
            2,
            vec![
                PauliTerm::new(0.5, [(1, Pauli::Z)]),
                PauliTerm::new(0.5, [(1, Pauli::Z)]),
                PauliTerm::new(1e-15, [(0, Pauli::X)]),
            ],
        )
        .unwrap()
        .canonical();
        assert_eq!(op.terms().len(), 1);
        assert_eq!(op.terms()[0].coeff, ONE);
    }

    #[test]
    fn norm_bounds_examples() {
        let xx = OperatorSum::new(2, vec![PauliTerm::new(1.0, [(0, Pauli::X), (1, Pauli::X)])]).unwrap();
        let (one, est) = xx.norm_bounds().unwrap();
        assert_eq!(one, 1.0);
        assert!((est - 1.0).abs() < 1e-8);

        assert_eq!(OperatorSum::zero(3).unwrap().norm_bounds().unwrap(), (0.0, 0.0));

        // dense 4x4 oracle: spectrum {±√5, ±1}
        let (one, est) = zz_x().norm_bounds().unwrap();
        assert_eq!(one, 3.0);
        assert!((est - 5f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn norm_bounds_rejects_non_hermitian() {
        let op = OperatorSum::new(1, vec![PauliTerm::new(C64::new(0.0, 1.0), [(0, Pauli::Z)])]).unwrap();
        assert!(matches!(op.norm_bounds(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn dense_examples() {
        let id = OperatorSum::new(1, vec![PauliTerm::identity(1.0)]).unwrap().to_dense().unwrap();
        assert_eq!(id, CMatrix::identity(2, 2));
        let z = OperatorSum::new(1, vec![PauliTerm::new(1.0, [(0, Pauli::Z)])]).unwrap().to_dense().unwrap();
        assert_eq!(z, CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, -ONE])));
        let m = zz_x().to_dense().unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 0)] = C64::new(2.0, 0.0);
        expected[(3, 3)] = C64::new(-2.0, 0.0);
        for (a, b) in [(0, 3), (3, 0), (1, 2), (2, 1)] {
            expected[(a, b)] = ONE;
        }
        assert_eq!(m, expected);
    }

    #[test]
    fn dense_rejects_large() {
        let op = OperatorSum::new(13, vec![PauliTerm::new(1.0, [(0, Pauli::Z)])]).unwrap();
        assert!(matches!(op.to_dense(), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn file_round_trip_is_bit_stable() {
        let op = OperatorSum::new(
            3,
            vec![
                PauliTerm::new(C64::new(0.1, -1.0 / 3.0), [(0, Pauli::X), (2, Pauli::Y)]),
                PauliTerm::new(std::f64::consts::PI, [(1, Pauli::Z)]),
                PauliTerm::identity(-2.5e-7),
            ],
        )
        .unwrap();
        let text = op.to_json().unwrap();
        let back = OperatorSum::from_json(&text).unwrap();
        assert_eq!(back, op);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_out_of_range_qubit() {
        assert!(OperatorSum::new(1, vec![PauliTerm::new(1.0, [(1, Pauli::Z)])]).is_err());
    }

    #[test]
    fn phase_fix_makes_largest_positive() {
        let mut v = StateVector::from_unnormalized(1, vec![C64::new(0.0, -2.0), C64::new(1.0, 0.0)]).unwrap();
        v.fix_phase();
        assert!(v.amplitudes()[0].im.abs() < 1e-15 && v.amplitudes()[0].re > 0.0);
    }
}
