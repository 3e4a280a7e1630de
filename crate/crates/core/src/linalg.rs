//! Dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::linalg::LU;
use nalgebra::Dyn;

use crate::{CMatrix, CVector, C64};

/// Matrices up to this size get an exact SVD-based condition number; larger
/// ones fall back to an LU-based 1-norm estimate.
pub const EXACT_RCOND_LIMIT: usize = 256;

pub fn zero(n: usize, m: usize) -> CMatrix {
    CMatrix::zeros(n, m)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Frobenius-relative test of `M = M*`.
pub fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() <= rel_tol * scale
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().singular_values().iter().copied().collect()
}

/// Spectral norm. Hermitian inputs go through the eigenvalue routine, which is
/// considerably cheaper than a full SVD.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if is_hermitian(m, 1e-13) {
        let h = hermitian_part(m);
        return h.symmetric_eigenvalues().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    }
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix (the anti-Hermitian part is ignored).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Block-diagonal `a ⊕ b`.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = zero(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Outcome of a thresholded rank decision: singular values at or above
/// `threshold` count, the rest are treated as zero.
#[derive(Debug, Clone)]
pub struct RankDecision {
    pub rank: usize,
    pub threshold: f64,
    /// Ratio between the smallest retained and the largest discarded singular
    /// value (the latter floored at `ε·σ_max`). Large values mean the decision
    /// is unambiguous.
    pub gap: f64,
    pub singular_values: Vec<f64>,
}

pub fn rank_decision(sv: &[f64], rel_tol: f64) -> RankDecision {
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let threshold = rel_tol * smax;
    if smax == 0.0 {
        return RankDecision { rank: 0, threshold: 0.0, gap: f64::INFINITY, singular_values: sv.to_vec() };
    }
    let kept_min = sv.iter().copied().filter(|&s| s >= threshold).fold(f64::INFINITY, f64::min);
    let dropped_max = sv.iter().copied().filter(|&s| s < threshold).fold(0.0, f64::max);
    let floor = f64::EPSILON * smax;
    RankDecision {
        rank: sv.iter().filter(|&&s| s >= threshold && s > 0.0).count(),
        threshold,
        gap: kept_min / dropped_max.max(floor),
        singular_values: sv.to_vec(),
    }
}

/// Orthonormal basis of the null space of `a` (columns), with the rank decision.
pub fn null_space(a: &CMatrix, rel_tol: f64) -> (CMatrix, RankDecision) {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return (zero(0, 0), rank_decision(&[], rel_tol));
    }
    // Pad to at least square so the SVD returns a complete right basis.
    let padded = if rows < cols {
        let mut p = zero(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let decision = rank_decision(&sv, rel_tol);
    // Singular values come out sorted in decreasing order.
    let null_cols: Vec<usize> = (decision.rank..sv.len()).collect();
    let mut basis = zero(cols, null_cols.len());
    for (k, &i) in null_cols.iter().enumerate() {
        let row = v_t.row(i).adjoint();
        basis.set_column(k, &row);
    }
    (basis, decision)
}

/// Orthonormal basis of the column space of `a`, with the rank decision.
pub fn range_basis(a: &CMatrix, rel_tol: f64) -> (CMatrix, RankDecision) {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return (zero(rows, 0), rank_decision(&[], rel_tol));
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let decision = rank_decision(&sv, rel_tol);
    let keep: Vec<usize> = (0..decision.rank).collect();
    let mut basis = zero(rows, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        basis.set_column(k, &u.column(i));
    }
    (basis, decision)
}

/// Rank by modified Gram–Schmidt with column pivoting: at every step the
/// remaining column of largest residual norm is eliminated. A column whose
/// residual falls below `rel_tol` times the largest original column norm
/// ends the process.
pub fn pivoted_gram_schmidt_rank(a: &CMatrix, rel_tol: f64) -> usize {
    let mut cols: Vec<CVector> = (0..a.ncols()).map(|j| a.column(j).into_owned()).collect();
    let scale = cols.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    while !cols.is_empty() {
        let (idx, best) = cols
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best < rel_tol * scale {
            break;
        }
        let q = cols.swap_remove(idx) / c(best);
        for v in cols.iter_mut() {
            // Two passes keep the residuals orthogonal to working precision.
            for _ in 0..2 {
                let proj = q.dotc(v);
                *v -= &q * proj;
            }
        }
        rank += 1;
    }
    rank
}

/// LU factorization that refuses exactly singular pivots.
pub fn lu(m: &CMatrix) -> LU<C64, Dyn, Dyn> {
    m.clone().lu()
}

/// Solve `m x = rhs` through LU; `None` when the factorization hits a zero pivot.
pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Option<CMatrix> {
    lu(m).solve(rhs)
}

pub fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Reciprocal condition number of a square matrix: exact `σ_min/σ_max` for
/// small matrices, otherwise `1/(‖A‖₁·est‖A⁻¹‖₁)` with Hager's estimator.
pub fn rcond(m: &CMatrix) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 1.0;
    }
    if n <= EXACT_RCOND_LIMIT {
        let sv = singular_values(m);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        return if smax == 0.0 { 0.0 } else { smin / smax };
    }
    let anorm = one_norm(m);
    if anorm == 0.0 {
        return 0.0;
    }
    match inverse_one_norm_estimate(m) {
        Some(inv) if inv.is_finite() && inv > 0.0 => 1.0 / (anorm * inv),
        _ => 0.0,
    }
}

/// Hager–Higham estimate of `‖A⁻¹‖₁` using solves with `A` and `A*`.
fn inverse_one_norm_estimate(m: &CMatrix) -> Option<f64> {
    let n = m.nrows();
    let fwd = lu(m);
    let adj = lu(&m.adjoint());
    let mut x = CMatrix::from_element(n, 1, c(1.0 / n as f64));
    let mut est = 0.0;
    for iter in 0..5 {
        let y = fwd.solve(&x)?;
        let ynorm: f64 = y.iter().map(|z| z.norm()).sum();
        if iter > 0 && ynorm <= est {
            break;
        }
        est = ynorm;
        let xi = y.map(|z| if z.norm() == 0.0 { c(1.0) } else { z / z.norm() });
        let z = adj.solve(&xi)?;
        let (j, zmax) = z.iter().enumerate().map(|(i, v)| (i, v.norm())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let zx = z.dotc(&x).re;
        if iter > 0 && zmax <= zx {
            break;
        }
        x = CMatrix::zeros(n, 1);
        x[(j, 0)] = c(1.0);
    }
    Some(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, cols, &data.iter().map(|&x| c(x)).collect::<Vec<_>>())
    }

    #[test]
    fn norms() {
        let d = real(2, 2, &[2.0, 0.0, 0.0, -0.5]);
        assert!((operator_norm(&d) - 2.0).abs() < 1e-14);
        let j = real(2, 2, &[0.0, 3.0, 0.0, 0.0]);
        assert!((operator_norm(&j) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = real(1, 3, &[1.0, 1.0, 0.0]);
        let (basis, dec) = null_space(&a, 1e-10);
        assert_eq!(basis.ncols(), 2);
        assert_eq!(dec.rank, 1);
        assert!((&a * &basis).norm() < 1e-14);
        assert!((basis.adjoint() * &basis - identity(2)).norm() < 1e-12);
    }

    #[test]
    fn rank_methods_agree() {
        let a = real(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(range_basis(&a, 1e-10).1.rank, 2);
        assert_eq!(pivoted_gram_schmidt_rank(&a, 1e-10), 2);
    }

    #[test]
    fn hager_estimate_is_close() {
        let n = 300;
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(2.0 + (i as f64) * 0.01)
            } else if j == i + 1 {
                c(-1.0)
            } else {
                c(0.0)
            }
        });
        let est = rcond(&m);
        let inv = m.clone().try_inverse().unwrap();
        let exact = 1.0 / (one_norm(&m) * one_norm(&inv));
        assert!(est >= exact * 0.999 && est <= exact * 10.0, "{est} vs {exact}");
    }
}
