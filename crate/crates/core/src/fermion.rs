//! Jordan-Wigner encoding of fermionic ladder operators.
//!
//! Convention: qubit state |0> is an *occupied* mode, so
//! `a†_p = Z_0 ... Z_{p-1} (X_p + iY_p)/2 = Z_0 ... Z_{p-1} |0><1|_p` and
//! `a†_p a_p = (1 + Z_p)/2`. This is the reverse of the common
//! `|1> = occupied` convention. The Z string contributes a sign of
//! `(-1)^(number of empty modes below p)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, OperatorSum, Pauli, PauliString, PauliTerm, C64, DENSE_LIMIT};

/// Upper limit on modes accepted by [`build_molecular`].
pub const MAX_MODES: usize = 14;
/// Imaginary coefficients up to this size are dropped from assembled
/// Hamiltonians.
pub const MOLECULAR_HERMITIAN_TOL: f64 = 1e-10;
const COMMUTATOR_TOL: f64 = 1e-12;

/// `coeff * op_1 op_2 ...` with each factor `(mode, dagger)`, kept in the
/// given order.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionProduct {
    pub factors: Vec<(usize, bool)>,
    pub coeff: C64,
}

impl FermionProduct {
    pub fn new(coeff: impl Into<C64>, factors: impl IntoIterator<Item = (usize, bool)>) -> Self {
        Self { factors: factors.into_iter().collect(), coeff: coeff.into() }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            factors: self.factors.iter().rev().map(|&(p, d)| (p, !d)).collect(),
            coeff: self.coeff.conj(),
        }
    }
}

fn ladder(p: usize, dagger: bool, n_modes: usize) -> Result<OperatorSum> {
    let z_string = (0..p).map(|j| (j, Pauli::Z));
    let y_sign = if dagger { 0.5 } else { -0.5 };
    let x = PauliTerm::new(0.5, z_string.clone().chain([(p, Pauli::X)]));
    let y = PauliTerm::new(C64::new(0.0, y_sign), z_string.chain([(p, Pauli::Y)]));
    OperatorSum::new(n_modes, vec![x, y])
}

/// Pauli expansion of a fermionic product. Coefficients may be complex.
pub fn jw_map(prod: &FermionProduct, n_modes: usize) -> Result<OperatorSum> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be positive".into()));
    }
    if let Some(&(p, _)) = prod.factors.iter().find(|(p, _)| *p >= n_modes) {
        return Err(Error::InvalidArgument(format!("mode {p} out of range for {n_modes} modes")));
    }
    let mut acc = OperatorSum::new(n_modes, vec![PauliTerm::identity(prod.coeff)])?;
    for &(p, dagger) in &prod.factors {
        acc = acc.mul(&ladder(p, dagger, n_modes)?)?;
    }
    Ok(acc.canonical())
}

/// One- and two-body coefficients. `v` is sparse, keyed by `(p, q, r, s)`
/// for `a†_p a†_q a_r a_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyTensors {
    pub n_modes: usize,
    pub t: CMatrix,
    pub v: BTreeMap<(usize, usize, usize, usize), C64>,
}

impl BodyTensors {
    pub fn new(t: CMatrix, v: BTreeMap<(usize, usize, usize, usize), C64>) -> Result<Self> {
        if !t.is_square() {
            return Err(Error::InvalidArgument("T must be square".into()));
        }
        let n = t.nrows();
        if let Some(k) = v.keys().find(|k| k.0.max(k.1).max(k.2).max(k.3) >= n) {
            return Err(Error::InvalidArgument(format!("V index {k:?} out of range for {n} modes")));
        }
        Ok(Self { n_modes: n, t, v })
    }

    pub fn products(&self) -> Vec<FermionProduct> {
        let n = self.n_modes;
        let mut out = Vec::new();
        for p in 0..n {
            for q in 0..n {
                let c = self.t[(p, q)];
                if c != C64::new(0.0, 0.0) {
                    out.push(FermionProduct::new(c, [(p, true), (q, false)]));
                }
            }
        }
        for (&(p, q, r, s), &c) in &self.v {
            if c != C64::new(0.0, 0.0) {
                out.push(FermionProduct::new(c, [(p, true), (q, true), (r, false), (s, false)]));
            }
        }
        out
    }

    /// Reads `{"n_modes", "T", "V"}` where values are numbers or `[re, im]`
    /// and `V` is either a nested `n^4` array or a list of `[p, q, r, s, value]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let n = doc
            .get("n_modes")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing integer n_modes".into()))? as usize;
        if n == 0 {
            return Err(Error::Parse("n_modes must be positive".into()));
        }
        let mut t = CMatrix::zeros(n, n);
        if let Some(rows) = doc.get("T") {
            let rows = rows.as_array().ok_or_else(|| Error::Parse("T must be an array".into()))?;
            if rows.len() != n {
                return Err(Error::Parse(format!("T has {} rows, expected {n}", rows.len())));
            }
            for (p, row) in rows.iter().enumerate() {
                let row = row.as_array().filter(|r| r.len() == n).ok_or_else(|| {
                    Error::Parse(format!("T row {p} must have {n} entries"))
                })?;
                for (q, x) in row.iter().enumerate() {
                    t[(p, q)] = parse_complex(x)?;
                }
            }
        }
        let mut v = BTreeMap::new();
        match doc.get("V") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) if items.first().is_some_and(|x| is_sparse_entry(x)) => {
                for item in items {
                    let e = item.as_array().filter(|e| e.len() == 5).ok_or_else(|| {
                        Error::Parse("sparse V entries are [p, q, r, s, value]".into())
                    })?;
                    let idx = |k: usize| {
                        e[k].as_u64().map(|x| x as usize).ok_or_else(|| Error::Parse("V index must be an integer".into()))
                    };
                    *v.entry((idx(0)?, idx(1)?, idx(2)?, idx(3)?)).or_insert(C64::new(0.0, 0.0)) += parse_complex(&e[4])?;
                }
            }
            Some(nested @ Value::Array(_)) => {
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            for s in 0..n {
                                let x = nested
                                    .get(p)
                                    .and_then(|x| x.get(q))
                                    .and_then(|x| x.get(r))
                                    .and_then(|x| x.get(s))
                                    .ok_or_else(|| Error::Parse(format!("nested V must be {n}^4")))?;
                                let c = parse_complex(x)?;
                                if c != C64::new(0.0, 0.0) {
                                    v.insert((p, q, r, s), c);
                                }
                            }
                        }
                    }
                }
            }
            Some(_) => return Err(Error::Parse("V must be an array".into())),
        }
        Self::new(t, v).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn is_sparse_entry(x: &Value) -> bool {
    x.as_array().is_some_and(|e| e.len() == 5 && e[..4].iter().all(Value::is_u64))
}

fn parse_complex(x: &Value) -> Result<C64> {
    match x {
        Value::Number(n) => n.as_f64().map(|re| C64::new(re, 0.0)),
        Value::Array(pair) if pair.len() == 2 => match (pair[0].as_f64(), pair[1].as_f64()) {
            (Some(re), Some(im)) => Some(C64::new(re, im)),
            _ => None,
        },
        _ => None,
    }
    .ok_or_else(|| Error::Parse(format!("expected a number or [re, im], got {x}")))
}

/// Qubit Hamiltonian `Σ T_pq a†_p a_q + Σ V_pqrs a†_p a†_q a_r a_s` with real
/// canonical coefficients.
pub fn build_molecular(tensors: &BodyTensors) -> Result<OperatorSum> {
    let n = tensors.n_modes;
    if n == 0 || n > MAX_MODES {
        return Err(Error::InvalidArgument(format!("n_modes must be in 1..={MAX_MODES}, got {n}")));
    }
    let mapped = tensors
        .products()
        .par_iter()
        .map(|prod| jw_map(prod, n))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<PauliTerm> = mapped.into_iter().flat_map(OperatorSum::into_terms).collect();
    let sum = OperatorSum::new(n, terms)?.canonical();
    let mut real = Vec::with_capacity(sum.terms().len());
    for t in sum.terms() {
        if t.coeff.im.abs() > MOLECULAR_HERMITIAN_TOL {
            return Err(Error::NotHermitian { term: t.string.to_string(), imag: t.coeff.im });
        }
        real.push(PauliTerm { coeff: C64::new(t.coeff.re, 0.0), string: t.string.clone() });
    }
    Ok(OperatorSum::new(n, real)?.canonical())
}

/// Smallest qubit interval containing every non-identity factor.
pub fn support_interval(op: &OperatorSum) -> Result<(usize, usize)> {
    op.terms()
        .iter()
        .filter_map(|t| t.string.support())
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
        .ok_or_else(|| Error::InvalidArgument("operator has no non-identity terms".into()))
}

/// Checks on dense matrices that `op` commutes with X, Y and Z on every qubit
/// outside `[lo, hi]`. Returns the offending qubits.
pub fn commutes_outside(op: &OperatorSum, lo: usize, hi: usize) -> Result<Vec<usize>> {
    if op.dim() > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: op.dim(), limit: DENSE_LIMIT });
    }
    let m = op.to_dense()?;
    let n = op.n_qubits();
    let mut bad = Vec::new();
    for q in (0..n).filter(|&q| q < lo || q > hi) {
        for pauli in [Pauli::X, Pauli::Y, Pauli::Z] {
            let single = OperatorSum::new(n, vec![PauliTerm { coeff: C64::new(1.0, 0.0), string: PauliString::single(q, pauli) }])?
                .to_dense()?;
            let comm = &m * &single - &single * &m;
            if comm.iter().any(|x| x.norm() > COMMUTATOR_TOL) {
                bad.push(q);
                break;
            }
        }
    }
    Ok(bad)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct JwCheckReport {
    pub n_modes: usize,
    /// Index pairs whose anticommutators differ from the canonical relations.
    pub car_violations: Vec<String>,
    /// One-body hopping pairs whose support is not `[min, max]`.
    pub one_body_violations: Vec<String>,
    /// Two-body tuples whose support leaves `[i_min, i_max]`.
    pub two_body_violations: Vec<String>,
    pub number_operator_exact: bool,
    pub passed: bool,
}

fn anticommutator(a: &OperatorSum, b: &OperatorSum) -> Result<OperatorSum> {
    a.mul(b)?.add(&b.mul(a)?)
}

/// Exhaustive symbolic checks of the mapping on `n_modes` modes: the
/// anticommutation relations, support intervals of one- and two-body terms,
/// and `a†_p a_p = (1 + Z_p)/2`.
pub fn jw_self_check(n_modes: usize) -> Result<JwCheckReport> {
    if n_modes == 0 || n_modes > MAX_MODES {
        return Err(Error::InvalidArgument(format!("n_modes must be in 1..={MAX_MODES}, got {n_modes}")));
    }
    let n = n_modes;
    let op = |p: usize, d: bool| jw_map(&FermionProduct::new(1.0, [(p, d)]), n);
    let identity = OperatorSum::new(n, vec![PauliTerm::identity(1.0)])?;
    let zero = OperatorSum::zero(n)?;
    let mut report = JwCheckReport {
        n_modes,
        car_violations: Vec::new(),
        one_body_violations: Vec::new(),
        two_body_violations: Vec::new(),
        number_operator_exact: true,
        passed: false,
    };
    for p in 0..n {
        for q in 0..n {
            let mixed = anticommutator(&op(p, false)?, &op(q, true)?)?;
            let expected = if p == q { &identity } else { &zero };
            if &mixed != expected {
                report.car_violations.push(format!("{{a_{p}, a+_{q}}}"));
            }
            for d in [false, true] {
                if !anticommutator(&op(p, d)?, &op(q, d)?)?.is_empty() {
                    report.car_violations.push(format!("{{{0}_{p}, {0}_{q}}}", if d { "a+" } else { "a" }));
                }
            }
            let hop = FermionProduct::new(1.0, [(p, true), (q, false)]);
            let pair = jw_map(&hop, n)?.add(&jw_map(&hop.adjoint(), n)?)?;
            if p != q && support_interval(&pair).ok() != Some((p.min(q), p.max(q))) {
                report.one_body_violations.push(format!("({p}, {q})"));
            }
        }
        let number = jw_map(&FermionProduct::new(1.0, [(p, true), (p, false)]), n)?;
        let expected = OperatorSum::new(n, vec![PauliTerm::identity(0.5), PauliTerm::new(0.5, [(p, Pauli::Z)])])?.canonical();
        report.number_operator_exact &= number == expected;
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let prod = FermionProduct::new(1.0, [(p, true), (q, true), (r, false), (s, false)]);
                    let herm = jw_map(&prod, n)?.add(&jw_map(&prod.adjoint(), n)?)?;
                    let (lo, hi) = (p.min(q).min(r).min(s), p.max(q).max(r).max(s));
                    if let Ok((a, b)) = support_interval(&herm) {
                        if a < lo || b > hi {
                            report.two_body_violations.push(format!("({p}, {q}, {r}, {s})"));
                        }
                    }
                }
            }
        }
    }
    report.passed = report.car_violations.is_empty()
        && report.one_body_violations.is_empty()
        && report.two_body_violations.is_empty()
        && report.number_operator_exact;
    Ok(report)
}
