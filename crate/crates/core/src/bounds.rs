//! Eigenvalue and eigenvector perturbation bounds, checked against dense
//! diagonalization.
//!
//! Every check produces a [`BoundReport`] where `satisfied` means
//! `measured_value <= bound_value + 1e-10`. Negative probability lower
//! bounds are clamped to zero.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigvalsh, expm_hermitian, polar_unitary, spectral_norm};
use crate::operator::{CMatrix, C64, DENSE_LIMIT};
use crate::prep::run_rng;

/// Slack in every `measured <= bound` comparison.
pub const BOUND_SLACK: f64 = 1e-10;
/// Grid points whose gap falls below this are flagged as degenerate.
pub const PATH_DEGENERACY: f64 = 1e-8;
const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_value: f64,
    pub measured_value: f64,
    pub satisfied: bool,
    pub context: BTreeMap<String, String>,
}

impl BoundReport {
    fn new(bound_value: f64, measured_value: f64) -> Self {
        Self {
            bound_value,
            measured_value,
            satisfied: measured_value <= bound_value + BOUND_SLACK,
            context: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.context.insert(key.to_string(), value.to_string());
        self
    }
}

fn same_shape(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    if a.nrows() > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: a.nrows(), limit: DENSE_LIMIT });
    }
    Ok(())
}

/// Spectral norm of a Hermitian matrix: its largest `|eigenvalue|`.
fn hermitian_norm(m: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(m)?.iter().fold(0.0, |acc, x| acc.max(x.abs())))
}

/// Eigenvector rotation for index `j` against `(π/2) |A - A'| / δ_j`.
pub fn davis_kahan(a: &CMatrix, a_prime: &CMatrix, j: usize) -> Result<BoundReport> {
    same_shape(a, a_prime)?;
    let n = a.nrows();
    if j >= n {
        return Err(Error::InvalidArgument(format!("index {j} out of range for dimension {n}")));
    }
    let (vals, vecs) = eigh(a)?;
    let (vals_p, vecs_p) = eigh(a_prime)?;
    let lambda = vals[j];
    let mut delta = f64::INFINITY;
    if j > 0 {
        delta = delta.min((lambda - vals_p[j - 1]).abs());
    }
    if j + 1 < n {
        delta = delta.min((lambda - vals_p[j + 1]).abs());
    }
    if delta == 0.0 {
        return Err(Error::Hypothesis("eigenvalue separation δ_j is zero; the bound is vacuous".into()));
    }
    let diff_norm = hermitian_norm(&(a - a_prime))?;
    let bound = if delta.is_infinite() { 0.0 } else { PI / 2.0 * diff_norm / delta };
    let ov = vecs.column(j).dotc(&vecs_p.column(j)).norm().min(1.0);
    let measured = (1.0 - ov * ov).max(0.0).sqrt();
    Ok(BoundReport::new(bound, measured)
        .with("j", j)
        .with("delta_j", delta)
        .with("perturbation_norm", diff_norm))
}

/// `max_j |λ_j - λ'_j|` against `|A - A'|`.
pub fn weyl_max_shift(a: &CMatrix, a_prime: &CMatrix) -> Result<BoundReport> {
    same_shape(a, a_prime)?;
    let vals = eigvalsh(a)?;
    let vals_p = eigvalsh(a_prime)?;
    let measured = vals.iter().zip(&vals_p).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let bound = hermitian_norm(&(a - a_prime))?;
    Ok(BoundReport::new(bound, measured))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixLog {
    /// `(i/t) log Ũ`, symmetrized.
    pub h_tilde: CMatrix,
    pub series_terms_used: usize,
    /// `|Ũ - 1|`.
    pub distance_from_identity: f64,
    /// `|exp(-i t H̃) - Ũ|`.
    pub roundtrip_error: f64,
}

/// Effective Hamiltonian of `u_tilde` from the Mercator series of `log Ũ`.
pub fn matrix_log(u_tilde: &CMatrix, t: f64) -> Result<MatrixLog> {
    if !u_tilde.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if u_tilde.nrows() > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: u_tilde.nrows(), limit: DENSE_LIMIT });
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let n = u_tilde.nrows();
    let x = u_tilde - CMatrix::identity(n, n);
    let dist = spectral_norm(&x);
    if dist > 2.0 / 3.0 {
        return Err(Error::Hypothesis(format!("|Ũ - 1| = {dist} exceeds the convergence radius 2/3")));
    }
    let mut log = CMatrix::zeros(n, n);
    let mut power = x.clone();
    let mut used = 0;
    for k in 1..=SERIES_MAX_TERMS {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = power.scale(sign / k as f64);
        log += &term;
        used = k;
        power = &power * &x;
        // Frobenius norm bounds the spectral norm of the next term
        if power.norm() / (k + 1) as f64 <= SERIES_TOL {
            break;
        }
    }
    let raw = log * C64::new(0.0, 1.0 / t);
    let h_tilde = (&raw + raw.adjoint()).scale(0.5);
    let back = expm_hermitian(&h_tilde, C64::new(0.0, -t))?;
    let roundtrip_error = spectral_norm(&(back - u_tilde));
    Ok(MatrixLog { h_tilde, series_terms_used: used, distance_from_identity: dist, roundtrip_error })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveHamiltonianReport {
    pub t: f64,
    /// `|Ũ - exp(-iHt)|`.
    pub delta_norm: f64,
    pub epsilon: f64,
    /// `|H̃ - H|`.
    pub error_norm: f64,
    pub series_terms_used: usize,
    /// `0 < t <= 1/(4|H|)`.
    pub t_in_range: bool,
    /// `|Ũ - U| <= tε/9 <= 1/3`.
    pub delta_within: bool,
    /// Both hypotheses hold.
    pub hypotheses_hold: bool,
    /// `error_norm <= epsilon + 1e-10`.
    pub satisfied: bool,
}

/// Error of the effective Hamiltonian of `u_tilde` relative to `h`.
pub fn effective_error(h: &CMatrix, u_tilde: &CMatrix, t: f64, epsilon: f64) -> Result<EffectiveHamiltonianReport> {
    same_shape(h, u_tilde)?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let h_norm = hermitian_norm(h)?;
    let u = expm_hermitian(h, C64::new(0.0, -t))?;
    let delta_norm = spectral_norm(&(u_tilde - &u));
    let t_in_range = t > 0.0 && t * 4.0 * h_norm <= 1.0 + 1e-12;
    let delta_within = delta_norm <= t * epsilon / 9.0 && t * epsilon / 9.0 <= 1.0 / 3.0;
    let log = matrix_log(u_tilde, t)?;
    let error_norm = hermitian_norm(&(&log.h_tilde - h))?;
    Ok(EffectiveHamiltonianReport {
        t,
        delta_norm,
        epsilon,
        error_norm,
        series_terms_used: log.series_terms_used,
        t_in_range,
        delta_within,
        hypotheses_hold: t_in_range && delta_within,
        satisfied: error_norm <= epsilon + BOUND_SLACK,
    })
}

/// Lower bound `1 - π²ε²/γ²` on the eigenstate fidelity under an
/// ε-accurate effective Hamiltonian, clamped at 0.
pub fn qpe_fidelity_bound(gamma_j: f64, epsilon: f64) -> Result<f64> {
    if !(gamma_j > 0.0) {
        return Err(Error::InvalidArgument(format!("gap must be positive, got {gamma_j}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if epsilon > gamma_j / 2.0 {
        return Err(Error::Hypothesis(format!("epsilon {epsilon} exceeds half the gap {gamma_j}")));
    }
    Ok((1.0 - PI * PI * epsilon * epsilon / (gamma_j * gamma_j)).max(0.0))
}

/// Lower bound `1 - π|H_int|/(γ₀ - 2|H_int|)` on the squared overlap between
/// unperturbed and perturbed eigenstates, clamped at 0.
pub fn perturbed_overlap_lb(gamma0: f64, hint_norm: f64) -> Result<f64> {
    if !(hint_norm >= 0.0) {
        return Err(Error::InvalidArgument(format!("interaction norm must be nonnegative, got {hint_norm}")));
    }
    if !(gamma0 > 2.0 * hint_norm) {
        return Err(Error::Hypothesis(format!("gap {gamma0} must exceed twice the interaction norm {hint_norm}")));
    }
    Ok((1.0 - PI * hint_norm / (gamma0 - 2.0 * hint_norm)).max(0.0))
}

/// Chained lower bounds `(gap, r²)` after adding interactions with the
/// given norms. Inputs must be nonnegative.
pub fn gap_overlap_chain(gamma0: f64, hint_norms: &[f64]) -> (f64, f64) {
    let total: f64 = hint_norms.iter().sum();
    let largest = hint_norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let gap = (gamma0 - 2.0 * total).max(0.0);
    if gap == 0.0 {
        return (0.0, 0.0);
    }
    (gap, (1.0 - PI * largest / gap).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCheck {
    pub k: usize,
    pub a_max: f64,
    /// `(γ_p^min - 2 Σ_{j>k} A_j^max) / 2c`.
    pub cond_i_rhs: f64,
    pub cond_i: bool,
    /// `γ_p^min / (4c (p-k)²)`.
    pub cond_ii_rhs: f64,
    pub cond_ii: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficiencyReport {
    pub c: f64,
    pub gamma_leaf_min: f64,
    pub layers: Vec<LayerCheck>,
    pub all_cond_i: bool,
    pub all_cond_ii: bool,
    /// False only if condition (ii) holds everywhere but (i) fails somewhere.
    pub implication_holds: bool,
}

/// Per-layer check of the constant-overlap conditions. `layer_max[k]` is the
/// largest interaction norm on layer `k = 0..p-1`.
pub fn sufficient_conditions(layer_max: &[f64], gamma_leaf_min: f64, c: f64) -> Result<SufficiencyReport> {
    if !(c > 1.0 + PI / 2.0) {
        return Err(Error::InvalidArgument(format!("c must exceed 1 + π/2, got {c}")));
    }
    if !(gamma_leaf_min >= 0.0) || layer_max.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidArgument("gaps and interaction norms must be nonnegative".into()));
    }
    let p = layer_max.len();
    let slack = 1e-12 * gamma_leaf_min.max(1.0);
    let layers: Vec<LayerCheck> = (0..p)
        .map(|k| {
            let tail: f64 = layer_max[k + 1..].iter().sum();
            let cond_i_rhs = (gamma_leaf_min - 2.0 * tail) / (2.0 * c);
            let cond_ii_rhs = gamma_leaf_min / (4.0 * c * ((p - k) as f64).powi(2));
            LayerCheck {
                k,
                a_max: layer_max[k],
                cond_i_rhs,
                cond_i: layer_max[k] <= cond_i_rhs + slack,
                cond_ii_rhs,
                cond_ii: layer_max[k] <= cond_ii_rhs + slack,
            }
        })
        .collect();
    let all_cond_i = layers.iter().all(|l| l.cond_i);
    let all_cond_ii = layers.iter().all(|l| l.cond_ii);
    Ok(SufficiencyReport {
        c,
        gamma_leaf_min,
        layers,
        all_cond_i,
        all_cond_ii,
        implication_holds: !all_cond_ii || all_cond_i,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDiagnostic {
    /// Maximum of `sqrt(<φ_j|H_int²|φ_j>) / min_{k≠j} |E_j - E_k|` over
    /// non-degenerate grid points.
    pub value: f64,
    pub argmax_tau: f64,
    pub degenerate_taus: Vec<f64>,
}

/// Evaluates the mean-value path quotient along `H0 + τ H_int` on a uniform
/// grid of `grid` points in `[0, 1]`.
pub fn path_overlap_diagnostic(h0: &CMatrix, h_int: &CMatrix, j: usize, grid: usize) -> Result<PathDiagnostic> {
    same_shape(h0, h_int)?;
    let n = h0.nrows();
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
    }
    if j >= n || n < 2 {
        return Err(Error::InvalidArgument(format!("index {j} out of range for dimension {n}")));
    }
    let mut out = PathDiagnostic { value: 0.0, argmax_tau: 0.0, degenerate_taus: Vec::new() };
    for g in 0..grid {
        let tau = g as f64 / (grid - 1) as f64;
        let h = h0 + h_int.scale(tau);
        let (vals, vecs) = eigh(&h)?;
        let gap = (0..n).filter(|&k| k != j).map(|k| (vals[j] - vals[k]).abs()).fold(f64::INFINITY, f64::min);
        if gap < PATH_DEGENERACY {
            out.degenerate_taus.push(tau);
            continue;
        }
        let num = (h_int * vecs.column(j)).norm();
        let q = num / gap;
        if q > out.value {
            out.value = q;
            out.argmax_tau = tau;
        }
    }
    Ok(out)
}

/// Random instance generators shared by sweeps and tests.
pub mod random {
    use super::*;

    /// Hermitian matrix with entries uniform in the unit square.
    pub fn hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0));
        (&m + m.adjoint()).scale(0.5)
    }

    /// Random Hermitian matrix with spectral norm exactly `norm`.
    pub fn hermitian_with_norm(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> CMatrix {
        loop {
            let m = hermitian(rng, n);
            let s = super::hermitian_norm(&m).unwrap_or(0.0);
            if s > 1e-6 {
                return m.scale(norm / s);
            }
        }
    }

    pub fn complex(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
    }

    /// A unitary `Ũ` with `|Ũ - u| <= target`, built as the polar factor of
    /// `u + Δ` for a random direction `Δ`, shrunk until the distance fits.
    pub fn perturbed_unitary(rng: &mut ChaCha8Rng, u: &CMatrix, target: f64) -> CMatrix {
        let dir = complex(rng, u.nrows());
        let mut scale = target / spectral_norm(&dir);
        loop {
            let w = polar_unitary(&(u + dir.scale(scale))).expect("polar factor");
            let d = spectral_norm(&(&w - u));
            if d <= target {
                return w;
            }
            scale *= 0.99 * target / d;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    /// Smallest `bound - measured` seen (negative means a violation).
    pub worst_margin: f64,
}

impl SweepSummary {
    pub fn all_passed(&self) -> bool {
        self.passed == self.instances
    }

    fn collect(name: &str, margins: Vec<(bool, f64)>) -> Self {
        Self {
            name: name.to_string(),
            instances: margins.len(),
            passed: margins.iter().filter(|m| m.0).count(),
            worst_margin: margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min),
        }
    }
}

fn sweep<F>(name: &str, instances: usize, seed: u64, f: F) -> Result<SweepSummary>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(bool, f64)> + Sync,
{
    let margins = (0..instances as u64)
        .into_par_iter()
        .map(|i| f(&mut run_rng(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepSummary::collect(name, margins))
}

fn report_margin(r: &BoundReport) -> (bool, f64) {
    (r.satisfied, r.bound_value - r.measured_value)
}

/// Random Hermitian pairs of dimension 2..=64 with perturbations of random
/// relative size.
pub fn davis_kahan_sweep(instances: usize, seed: u64) -> Result<SweepSummary> {
    sweep("davis_kahan", instances, seed, |rng| {
        let n = rng.gen_range(2..=64);
        let a = random::hermitian(rng, n);
        let size = 10f64.powf(rng.gen_range(-3.0..0.0));
        let a_prime = &a + random::hermitian_with_norm(rng, n, size);
        let j = rng.gen_range(0..n);
        Ok(report_margin(&davis_kahan(&a, &a_prime, j)?))
    })
}

pub fn weyl_sweep(instances: usize, seed: u64) -> Result<SweepSummary> {
    sweep("weyl", instances, seed, |rng| {
        let n = rng.gen_range(2..=64);
        let a = random::hermitian(rng, n);
        let size = 10f64.powf(rng.gen_range(-3.0..1.0));
        let a_prime = &a + random::hermitian_with_norm(rng, n, size);
        Ok(report_margin(&weyl_max_shift(&a, &a_prime)?))
    })
}

/// `exp(-i t H̃)` against `Ũ = exp(-iHt)` for random `H`, `t = 1/(4|H|)`.
pub fn matrix_log_sweep(instances: usize, seed: u64) -> Result<SweepSummary> {
    sweep("matrix_log_roundtrip", instances, seed, |rng| {
        let n = rng.gen_range(2..=8);
        let h = random::hermitian(rng, n);
        let t = 1.0 / (4.0 * hermitian_norm(&h)?);
        let u = expm_hermitian(&h, C64::new(0.0, -t))?;
        let log = matrix_log(&u, t)?;
        Ok((log.roundtrip_error <= 1e-10, 1e-10 - log.roundtrip_error))
    })
}

/// Random 4x4 `H` with `|H| = 1`, `t = 1/4`, `ε = 0.5` and `Ũ` at distance
/// at most `tε/9` from `exp(-iHt)`.
pub fn effective_error_sweep(instances: usize, seed: u64) -> Result<SweepSummary> {
    sweep("effective_hamiltonian", instances, seed, |rng| {
        let (t, eps) = (0.25, 0.5);
        let h = random::hermitian_with_norm(rng, 4, 1.0);
        let u = expm_hermitian(&h, C64::new(0.0, -t))?;
        let u_tilde = random::perturbed_unitary(rng, &u, t * eps / 9.0);
        let r = effective_error(&h, &u_tilde, t, eps)?;
        Ok((r.hypotheses_hold && r.satisfied, eps - r.error_norm))
    })
}

/// Ground-state overlap of `H0` and `H0 + H_int` against the perturbed
/// overlap bound, with `γ₀ > 2|H_int| + 0.1`.
pub fn perturbed_overlap_sweep(instances: usize, seed: u64) -> Result<SweepSummary> {
    sweep("perturbed_overlap", instances, seed, |rng| {
        let n = rng.gen_range(2..=64);
        let mut h0 = random::hermitian(rng, n);
        let (vals, _) = eigh(&h0)?;
        let mut gamma0 = vals[1] - vals[0];
        if gamma0 < 0.5 {
            h0 = h0.scale(1.0 / gamma0);
            gamma0 = 1.0;
        }
        let hint_norm = rng.gen_range(0.02..1.0) * (gamma0 - 0.1) / 2.0;
        let hint = random::hermitian_with_norm(rng, n, hint_norm);
        let (_, v0) = eigh(&h0)?;
        let (_, v1) = eigh(&(&h0 + &hint))?;
        let ov = v0.column(0).dotc(&v1.column(0)).norm_sqr();
        let lb = perturbed_overlap_lb(gamma0, hint_norm)?;
        Ok((ov + BOUND_SLACK >= lb, ov - lb))
    })
}

/// Boundary profiles `A_k = γ/(4c(p-k)²)` for random `p <= 6`, `c > 1 + π/2`.
pub fn sufficiency_sweep(instances: usize, seed: u64) -> Result<SweepSummary> {
    sweep("sufficient_conditions", instances, seed, |rng| {
        let p = rng.gen_range(1..=6);
        let c = 1.0 + PI / 2.0 + rng.gen_range(1e-3..5.0);
        let gamma = rng.gen_range(0.1..10.0);
        let profile: Vec<f64> = (0..p).map(|k| gamma / (4.0 * c * ((p - k) as f64).powi(2))).collect();
        let r = sufficient_conditions(&profile, gamma, c)?;
        let margin = r.layers.iter().map(|l| l.cond_i_rhs - l.a_max).fold(f64::INFINITY, f64::min);
        Ok((r.all_cond_ii && r.all_cond_i, margin))
    })
}
