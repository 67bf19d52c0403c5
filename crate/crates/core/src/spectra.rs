//! Lowest eigenpairs, spectral gaps and overlaps.
//!
//! Operators up to [`DENSE_LIMIT`] are diagonalized densely. Larger ones go
//! through a restarted Lanczos iteration with full reorthogonalization,
//! locking converged pairs and deflating against them. Every returned pair
//! carries its residual `|Hv - λv|`, recomputed through `OperatorSum::apply`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::linalg;
use crate::operator::{inner, normalize, vec_norm, OperatorSum, StateVector, C64, DENSE_LIMIT};

/// Relative threshold below which `E1 - E0` counts as a degenerate ground level.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
/// Default residual tolerance (relative to `max(1, |H|)`).
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub solver: Solver,
    /// Residual target, scaled by `max(1, one-norm of H)`.
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { solver: Solver::Auto, tol: DEFAULT_TOL, krylov_dim: 90, max_restarts: 60, seed: 0x1a2c_2005 }
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    pub residual_norms: Vec<f64>,
    /// The `|H|` scale used for residual certification (one-norm bound).
    pub norm_scale: f64,
}

/// `E1 - E0` together with the degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub value: f64,
    pub degenerate: bool,
}

impl Spectrum {
    /// Builds a spectrum from raw values; vectors and residuals may be empty.
    pub fn from_values(eigenvalues: Vec<f64>) -> Self {
        Self { eigenvalues, eigenvectors: Vec::new(), residual_norms: Vec::new(), norm_scale: 0.0 }
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> &StateVector {
        &self.eigenvectors[0]
    }

    pub fn gap(&self) -> Result<Gap> {
        spectral_gap(self)
    }

    pub fn to_json(&self, include_vectors: bool) -> String {
        let list = |xs: &[f64]| xs.iter().map(|&x| sig17(x)).collect::<Vec<_>>().join(", ");
        let mut s = format!(
            "{{\n  \"eigenvalues\": [{}],\n  \"residual_norms\": [{}]",
            list(&self.eigenvalues),
            list(&self.residual_norms)
        );
        if include_vectors {
            s.push_str(",\n  \"eigenvectors\": [");
            for (k, v) in self.eigenvectors.iter().enumerate() {
                let amps: Vec<String> = v
                    .amplitudes()
                    .iter()
                    .map(|a| format!("[{}, {}]", sig17(a.re), sig17(a.im)))
                    .collect();
                s.push_str(if k == 0 { "\n    [" } else { ",\n    [" });
                s.push_str(&amps.join(", "));
                s.push(']');
            }
            s.push_str("\n  ]");
        }
        s.push_str("\n}\n");
        s
    }
}

pub fn lowest_eigenpairs(op: &OperatorSum, k: usize, tol: f64) -> Result<Spectrum> {
    lowest_eigenpairs_with(op, k, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn lowest_eigenpairs_with(op: &OperatorSum, k: usize, opts: &SolverOptions) -> Result<Spectrum> {
    let h = op.hermitian()?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let dim = h.dim();
    if k > dim {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds dimension {dim}")));
    }
    let scale = h.one_norm().max(1.0);
    let dense = match opts.solver {
        Solver::Auto => dim <= DENSE_LIMIT,
        Solver::Dense => true,
        Solver::Lanczos => false,
    };
    let (values, vectors) = if dense { dense_lowest(&h, k)? } else { lanczos_lowest(&h, k, scale, opts)? };

    let mut pairs: Vec<(f64, Vec<C64>)> = values.into_iter().zip(vectors).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut spectrum = Spectrum {
        eigenvalues: Vec::with_capacity(k),
        eigenvectors: Vec::with_capacity(k),
        residual_norms: Vec::with_capacity(k),
        norm_scale: scale,
    };
    for (lambda, v) in pairs {
        let mut state = StateVector::from_unnormalized(h.n_qubits(), v)?;
        state.fix_phase();
        let hv = h.apply(state.amplitudes())?;
        let resid = hv
            .iter()
            .zip(state.amplitudes())
            .map(|(a, b)| (a - b * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid > opts.tol * scale {
            return Err(Error::NoConvergence { iterations: 0, residual: resid });
        }
        spectrum.eigenvalues.push(lambda);
        spectrum.eigenvectors.push(state);
        spectrum.residual_norms.push(resid);
    }
    Ok(spectrum)
}

fn dense_lowest(h: &OperatorSum, k: usize) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let m = h.to_dense()?;
    let (vals, vecs) = linalg::eigh(&m)?;
    let vectors = (0..k).map(|j| vecs.column(j).iter().copied().collect()).collect();
    Ok((vals[..k].to_vec(), vectors))
}

fn lanczos_lowest(h: &OperatorSum, k: usize, scale: f64, opts: &SolverOptions) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let dim = h.dim();
    let target = opts.tol * scale * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for _ in 0..k {
        let mut start: Vec<C64> =
            (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let mut last_resid = f64::INFINITY;
        let mut done = false;
        for _ in 0..opts.max_restarts {
            orthogonalize(&mut start, &locked);
            if normalize(&mut start) == 0.0 {
                return Err(Error::NoConvergence { iterations: 0, residual: f64::INFINITY });
            }
            let (theta, y, resid) = lanczos_pass(h, &start, &locked, opts.krylov_dim, target)?;
            last_resid = resid;
            if resid <= target {
                values.push(theta);
                locked.push(y);
                done = true;
                break;
            }
            start = y;
        }
        if !done {
            return Err(Error::NoConvergence { iterations: opts.max_restarts * opts.krylov_dim, residual: last_resid });
        }
    }
    Ok((values, locked))
}

/// One Lanczos pass from `start` (normalized, orthogonal to `locked`).
/// Returns the lowest Rayleigh-Ritz pair and its true residual.
fn lanczos_pass(
    h: &OperatorSum,
    start: &[C64],
    locked: &[Vec<C64>],
    krylov_dim: usize,
    target: f64,
) -> Result<(f64, Vec<C64>, f64)> {
    let dim = h.dim();
    let m_max = krylov_dim.min(dim - locked.len()).max(1);
    let mut basis: Vec<Vec<C64>> = vec![start.to_vec()];
    let mut alpha: Vec<f64> = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    loop {
        let i = basis.len() - 1;
        w.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        h.apply_into(&basis[i], &mut w);
        let a = inner(&basis[i], &w).re;
        alpha.push(a);
        for (x, v) in w.iter_mut().zip(&basis[i]) {
            *x -= v * a;
        }
        if i > 0 {
            let b = beta[i - 1];
            for (x, v) in w.iter_mut().zip(&basis[i - 1]) {
                *x -= v * b;
            }
        }
        // a second pass only when the first removed most of the vector
        let before = vec_norm(&w);
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let mut b = vec_norm(&w);
        if b < 0.7 * before {
            orthogonalize(&mut w, locked);
            orthogonalize(&mut w, &basis);
            b = vec_norm(&w);
        }
        let m = alpha.len();
        let exhausted = m >= m_max || b <= 1e-12 * (1.0 + a.abs());
        if exhausted || (m >= 8 && m % 4 == 0) {
            let (theta, s) = lowest_ritz(&alpha, &beta);
            if exhausted || b * s[m - 1].abs() <= 0.1 * target {
                return finish(h, &basis, &s, theta, locked);
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let j = (0..m).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    (eig.eigenvalues[j], eig.eigenvectors.column(j).iter().copied().collect())
}

fn finish(h: &OperatorSum, basis: &[Vec<C64>], s: &[f64], _theta: f64, locked: &[Vec<C64>]) -> Result<(f64, Vec<C64>, f64)> {
    let dim = h.dim();
    let mut y = vec![C64::new(0.0, 0.0); dim];
    for (v, &c) in basis.iter().zip(s) {
        for (yy, vv) in y.iter_mut().zip(v) {
            *yy += vv * c;
        }
    }
    orthogonalize(&mut y, locked);
    normalize(&mut y);
    let hy = h.apply(&y)?;
    let rq = inner(&y, &hy).re;
    let resid = hy.iter().zip(&y).map(|(a, b)| (a - b * rq).norm_sqr()).sum::<f64>().sqrt();
    Ok((rq, y, resid))
}

/// Classical Gram-Schmidt of `w` against orthonormal `against`.
fn orthogonalize(w: &mut [C64], against: &[Vec<C64>]) {
    for u in against {
        let c = inner(u, w);
        for (x, uu) in w.iter_mut().zip(u) {
            *x -= uu * c;
        }
    }
}

pub fn spectral_gap(s: &Spectrum) -> Result<Gap> {
    if s.eigenvalues.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spectral gap needs at least 2 eigenvalues, got {}",
            s.eigenvalues.len()
        )));
    }
    let e0 = s.eigenvalues[0];
    let value = (s.eigenvalues[1] - e0).max(0.0);
    Ok(Gap { value, degenerate: value < DEGENERACY_THRESHOLD * e0.abs().max(1.0) })
}

/// `|<a|b>|`.
pub fn overlap_abs(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}
