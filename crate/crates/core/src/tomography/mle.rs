//! Maximum-likelihood state reconstruction on the Cholesky-like
//! parameterization ρ(T) = T†T / Tr(T†T), T lower triangular with a real
//! diagonal (16 real parameters for two qubits). Positivity and unit trace
//! hold by construction for every iterate.
//!
//! The multinomial log-likelihood is maximized by gradient ascent with a
//! backtracking line search, so the likelihood is non-decreasing across
//! iterations by construction.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{correlators_from_counts, BasisSetting, CountsTable, ReconstructionMethod,
    TomographyResult};
use crate::state::{DensityOperator, PureState};
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const LIKELIHOOD_TOL: f64 = 1e-9;
const PROB_FLOOR: f64 = 1e-15;

/// Errors unless the settings span the full 16-dimensional space of
/// two-qubit Hermitian operators.
pub fn verify_informationally_complete(settings: &[BasisSetting]) -> Result<()> {
    let mut rows: Vec<[f64; 16]> = Vec::with_capacity(settings.len() * 4);
    for setting in settings {
        for op in setting_projectors(setting) {
            rows.push(hermitian_coords(&op));
        }
    }
    let m = DMatrix::from_fn(rows.len(), 16, |r, c| rows[r][c]);
    let svd = m.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-9 * smax.max(1.0))
        .count();
    if rank < 16 {
        return Err(Error::IncompleteSettings { rank, needed: 16 });
    }
    Ok(())
}

/// The four outcome projectors of a setting, outcome order (00, 01, 10, 11).
fn setting_projectors(setting: &BasisSetting) -> Vec<DMatrix<Complex64>> {
    let fb = setting.first.qubit_basis();
    let sb = setting.second.qubit_basis();
    let mut ops = Vec::with_capacity(4);
    for a in 0..2 {
        for b in 0..2 {
            ops.push(fb.projector(a).kronecker(&sb.projector(b)));
        }
    }
    ops
}

/// Real coordinates of a Hermitian 4×4 matrix: diagonal, then upper-triangle
/// real and imaginary parts.
fn hermitian_coords(m: &DMatrix<Complex64>) -> [f64; 16] {
    let mut out = [0.0; 16];
    for i in 0..4 {
        out[i] = m[(i, i)].re;
    }
    let mut k = 4;
    for i in 0..4 {
        for j in (i + 1)..4 {
            out[k] = m[(i, j)].re;
            out[k + 1] = m[(i, j)].im;
            k += 2;
        }
    }
    out
}

/// Fits ρ_MLE to the counts; when `target` is given the result carries the
/// fidelity to it.
pub fn mle_reconstruction(
    counts: &CountsTable,
    target: Option<&PureState>,
) -> Result<TomographyResult> {
    let (result, _) = mle_reconstruction_with_trace(counts, target)?;
    Ok(result)
}

/// As [`mle_reconstruction`], also returning the accepted log-likelihood
/// value after every iteration (non-decreasing by construction).
pub fn mle_reconstruction_with_trace(
    counts: &CountsTable,
    target: Option<&PureState>,
) -> Result<(TomographyResult, Vec<f64>)> {
    verify_informationally_complete(&counts.settings)?;

    // Flatten the measurement operators and their observed counts.
    let mut ops: Vec<DMatrix<Complex64>> = Vec::new();
    let mut observed: Vec<f64> = Vec::new();
    for (setting, row) in counts.settings.iter().zip(&counts.counts) {
        for (op, &n) in setting_projectors(setting).into_iter().zip(row.iter()) {
            ops.push(op);
            observed.push(n as f64);
        }
    }
    let total: f64 = observed.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("counts table is empty".into()));
    }

    let mut t = warm_start(counts);
    let mut likelihood = log_likelihood(&t, &ops, &observed);
    let mut trace = vec![likelihood];
    let mut step = 1.0 / total;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let grad = gradient(&t, &ops, &observed, total);
        let mut improved = false;
        // Backtracking line search keeps the likelihood monotone.
        for _ in 0..60 {
            let candidate = &t + &grad * Complex64::new(step, 0.0);
            let cand_likelihood = log_likelihood(&candidate, &ops, &observed);
            if cand_likelihood >= likelihood {
                let gain = cand_likelihood - likelihood;
                t = candidate;
                likelihood = cand_likelihood;
                trace.push(likelihood);
                step *= 1.2;
                improved = gain >= LIKELIHOOD_TOL;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if !improved {
            break;
        }
    }

    let s = t.adjoint() * &t;
    let rho = DensityOperator::from_matrix_unchecked(s);
    let min_eigenvalue = rho.min_eigenvalue();
    let fidelity_to_target = match target {
        Some(tgt) => Some(rho.fidelity_pure_target(tgt)?),
        None => None,
    };
    Ok((
        TomographyResult {
            rho,
            method: ReconstructionMethod::Mle,
            fidelity_to_target,
            min_eigenvalue,
            physical: min_eigenvalue >= -crate::state::TOL_PSD,
            log_likelihood: Some(likelihood),
            iterations: Some(iterations),
        },
        trace,
    ))
}

/// Starts from the direct reconstruction with its spectrum clamped positive;
/// falls back to the maximally mixed state if factorization fails.
fn warm_start(counts: &CountsTable) -> DMatrix<Complex64> {
    let r = correlators_from_counts(counts);
    if let Ok(direct) = super::direct_reconstruction(&r, None) {
        let eig = direct.rho.matrix().clone().symmetric_eigen();
        let mut clamped = DMatrix::<Complex64>::zeros(4, 4);
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            let l = lambda.max(1e-4);
            let v = eig.eigenvectors.column(i);
            for r in 0..4 {
                for c in 0..4 {
                    clamped[(r, c)] += v[r] * v[c].conj() * Complex64::new(l, 0.0);
                }
            }
        }
        let tr = clamped.trace().re;
        clamped /= Complex64::new(tr, 0.0);
        if let Some(chol) = nalgebra::Cholesky::new(clamped) {
            // ρ = L L† means T = L† reproduces it as T†T.
            return chol.l().adjoint();
        }
    }
    DMatrix::from_diagonal_element(4, 4, Complex64::new(0.5, 0.0))
}

fn log_likelihood(t: &DMatrix<Complex64>, ops: &[DMatrix<Complex64>], observed: &[f64]) -> f64 {
    let s = t.adjoint() * t;
    let tr = s.trace().re.max(PROB_FLOOR);
    let mut ll = 0.0;
    for (op, &n) in ops.iter().zip(observed) {
        if n == 0.0 {
            continue;
        }
        let p = ((&s * op).trace().re / tr).max(PROB_FLOOR);
        ll += n * p.ln();
    }
    ll
}

/// Ascent direction on the free entries of T: ∇L = T·G restricted to the
/// lower triangle with a real diagonal, where
/// G = Σ n_k Π_k / Tr(SΠ_k) − (N / Tr S)·I.
fn gradient(
    t: &DMatrix<Complex64>,
    ops: &[DMatrix<Complex64>],
    observed: &[f64],
    total: f64,
) -> DMatrix<Complex64> {
    let s = t.adjoint() * t;
    let tr = s.trace().re.max(PROB_FLOOR);
    let mut g = DMatrix::<Complex64>::from_diagonal_element(
        4,
        4,
        Complex64::new(-total / tr, 0.0),
    );
    for (op, &n) in ops.iter().zip(observed) {
        if n == 0.0 {
            continue;
        }
        let overlap = (&s * op).trace().re.max(PROB_FLOOR * tr);
        g += op * Complex64::new(n / overlap, 0.0);
    }
    let mut grad = t * g;
    for r in 0..4 {
        for c in 0..4 {
            if c > r {
                grad[(r, c)] = Complex64::new(0.0, 0.0);
            } else if c == r {
                grad[(r, c)] = Complex64::new(grad[(r, c)].re, 0.0);
            }
        }
    }
    grad
}
