//! Kernels and ranges of row multipliers on `(H²_d)^n`, their wandering
//! subspaces, and the noncommutative variety / Nullstellensatz checks.
//!
//! A row `F = (f_1, …, f_n)` acts by `h ↦ Σ f_i h_i`. Left multiplication
//! commutes with the right shifts `R_j`, so kernel and range are
//! right-invariant and decompose as `⊕_ω R^ω W` with `W = K ⊖ Σ_j R_j K`.
//! Everything here works on the degree-truncated Fock space: for polynomial
//! entries of degree `≤ D` and inputs of degree `≤ N − D` the truncated
//! products are exact, so the computed kernels are exact up to rounding.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{left_mult_matrix, right_creation, FockBasis};
use crate::linalg::{self, c, null_space, range_basis, RankDecision};
use crate::nceval::{eval_poly, MatrixTuple};
use crate::ncseries::FreeSeries;
use crate::randmat::{derive_seed, GaussianStream};
use crate::{CMatrix, CVector};

/// Orthonormal vectors in `(P_L)^n`, stored as columns. Component `i` of a
/// column occupies rows `i·block_dim .. (i+1)·block_dim`, indexed by the
/// Fock basis of degree `≤ max_degree`.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub components: usize,
    pub max_degree: usize,
    pub block_dim: usize,
    pub vectors: CMatrix,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    /// Kernel of `F` on inputs of degree `≤ M`, `M = N − deg F`.
    #[serde(skip)]
    pub kernel: SubspaceBasis,
    /// Degree `M − 1` at which the wandering dimension is reported.
    pub window: usize,
    /// `dim K_L` for `L = M − 2, M − 1, M` (zero for negative `L`).
    pub kernel_dims: [usize; 3],
    pub kernel_dim: usize,
    /// `dim (K_{M−1} ⊖ Σ_j R_j K_{M−2})`.
    pub wandering_dim: usize,
    /// The same quantity one degree higher.
    pub wandering_dim_top: usize,
    /// Wandering dimension unchanged between the two top degrees.
    pub stable: bool,
    /// `dim K_{M−1} − d·dim K_{M−2}`; the right shifts are isometries with
    /// orthogonal ranges, so this must equal `wandering_dim`.
    pub count_formula: i64,
    /// Smallest separation ratio among all rank decisions taken.
    pub sigma_gap: f64,
}

fn check_row(f: &[FreeSeries], b: &FockBasis) -> Result<usize> {
    if f.is_empty() {
        return Err(Error::InvalidArgument("row must have at least one entry".into()));
    }
    let mut deg = 0;
    for g in f {
        if g.alphabet() != b.d() {
            return Err(Error::AlphabetMismatch { left: b.d(), right: g.alphabet() });
        }
        if !g.is_polynomial() {
            return Err(Error::Unsupported("row entries must be polynomials (exact zero tail)".into()));
        }
        deg = deg.max(g.degree().unwrap_or(0));
    }
    Ok(deg)
}

/// Block row `[f_1(rL) … f_n(rL)]` on the truncated space.
pub fn row_multiplier_matrix(f: &[FreeSeries], r: f64, b: &FockBasis) -> Result<CMatrix> {
    check_row(f, b)?;
    let dim = b.dim();
    let mut out = linalg::zero(dim, dim * f.len());
    for (i, g) in f.iter().enumerate() {
        let (m, _) = left_mult_matrix(g, b, r)?;
        out.view_mut((0, i * dim), (dim, dim)).copy_from(&m);
    }
    Ok(out)
}

/// Columns of the block row that belong to inputs of degree `≤ level`.
fn restrict_inputs(full: &CMatrix, n: usize, dim: usize, level_dim: usize) -> CMatrix {
    let mut out = linalg::zero(full.nrows(), n * level_dim);
    for i in 0..n {
        out.view_mut((0, i * level_dim), (full.nrows(), level_dim))
            .copy_from(&full.view((0, i * dim), (full.nrows(), level_dim)));
    }
    out
}

/// Rank decision against an absolute threshold, for singular values of
/// matrices with orthonormal columns (which lie in `[0, 1]`).
fn absolute_rank(sv: &[f64], tol: f64) -> RankDecision {
    let kept_min = sv.iter().copied().filter(|&s| s >= tol).fold(f64::INFINITY, f64::min);
    let dropped_max = sv.iter().copied().filter(|&s| s < tol).fold(0.0, f64::max);
    RankDecision {
        rank: sv.iter().filter(|&&s| s >= tol).count(),
        threshold: tol,
        gap: kept_min / dropped_max.max(f64::EPSILON),
        singular_values: sv.to_vec(),
    }
}

/// Subspace of `basis` (coordinates of degree `≤ level`) whose degree-`level`
/// part vanishes, returned in coordinates of degree `≤ level − 1`.
fn drop_top_degree(basis: &CMatrix, n: usize, b: &FockBasis, level: usize, tol: f64) -> (CMatrix, f64) {
    let hi = b.offset(level + 1);
    let lo = b.offset(level);
    if basis.ncols() == 0 {
        return (linalg::zero(n * lo, 0), f64::INFINITY);
    }
    let mut top = linalg::zero(n * (hi - lo), basis.ncols());
    for i in 0..n {
        top.view_mut((i * (hi - lo), 0), (hi - lo, basis.ncols()))
            .copy_from(&basis.view((i * hi + lo, 0), (hi - lo, basis.ncols())));
    }
    // Vectors of `top` have norm at most one, so an absolute threshold fits.
    let svd = {
        let cols = top.ncols();
        let p = if top.nrows() < cols { top.resize_vertically(cols, c(0.0)) } else { top };
        p.svd(false, true)
    };
    let v_t = svd.v_t.expect("requested V");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let dec = absolute_rank(&sv, tol);
    let mut combo = linalg::zero(basis.ncols(), sv.len() - dec.rank);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    for (k, &i) in order[dec.rank..].iter().enumerate() {
        combo.set_column(k, &v_t.row(i).adjoint());
    }
    let lower = basis * combo;
    let mut out = linalg::zero(n * lo, lower.ncols());
    for i in 0..n {
        out.view_mut((i * lo, 0), (lo, lower.ncols())).copy_from(&lower.view((i * hi, 0), (lo, lower.ncols())));
    }
    (out, dec.gap)
}

/// `Σ_j R_j` applied to vectors of degree `≤ level − 1`, landing in
/// coordinates of degree `≤ level`.
fn shifted(prev: &CMatrix, n: usize, b: &FockBasis, level: usize) -> Result<CMatrix> {
    let lo = b.offset(level);
    let hi = b.offset(level + 1);
    let d = b.d();
    let mut out = linalg::zero(n * hi, prev.ncols() * d);
    for j in 1..=d {
        let shift = right_creation(b, j)?;
        for col in 0..prev.ncols() {
            let dst = (j - 1) * prev.ncols() + col;
            for i in 0..n {
                for k in 0..lo {
                    let t = shift.target(k).expect("degree below the truncation");
                    out[(i * hi + t, dst)] = prev[(i * lo + k, col)];
                }
            }
        }
    }
    Ok(out)
}

/// Dimension of `span(space) ⊖ span(sub)` for orthonormal `space`.
fn complement_rank(space: &CMatrix, sub: &CMatrix, tol: f64) -> RankDecision {
    if space.ncols() == 0 {
        return absolute_rank(&[], tol);
    }
    let projected = if sub.ncols() == 0 {
        space.clone()
    } else {
        let (q, _) = range_basis(sub, tol);
        space - &q * (q.adjoint() * space)
    };
    absolute_rank(&linalg::singular_values(&projected), tol)
}

/// Kernel of `F(rL)` on `(P_M)^n`, `M = N − deg F`, and the dimension of its
/// wandering subspace within degree `M − 1`.
pub fn kernel_wandering_dim(f: &[FreeSeries], r: f64, b: &FockBasis, tol: f64) -> Result<KernelReport> {
    let deg = check_row(f, b)?;
    let n = f.len();
    let big_n = b.max_degree();
    if deg + 1 > big_n {
        return Err(Error::WindowTooSmall(format!("degree {deg} row needs truncation degree ≥ {}, got {big_n}", deg + 1)));
    }
    let m = big_n - deg;
    let dim = b.dim();
    let full = row_multiplier_matrix(f, r, b)?;
    let level_dim = b.offset(m + 1);
    let (k_m, dec) = null_space(&restrict_inputs(&full, n, dim, level_dim), tol);
    let (k_m1, g1) = drop_top_degree(&k_m, n, b, m, tol);
    let (k_m2, g2) = if m >= 2 {
        drop_top_degree(&k_m1, n, b, m - 1, tol)
    } else {
        (linalg::zero(0, 0), f64::INFINITY)
    };

    let w_top = complement_rank(&k_m, &shifted(&k_m1, n, b, m)?, tol);
    let w = if m >= 2 {
        complement_rank(&k_m1, &shifted(&k_m2, n, b, m - 1)?, tol)
    } else {
        complement_rank(&k_m1, &linalg::zero(k_m1.nrows(), 0), tol)
    };
    let kernel_dims = [k_m2.ncols(), k_m1.ncols(), k_m.ncols()];
    let count_formula = kernel_dims[1] as i64 - (b.d() * kernel_dims[0]) as i64;
    if count_formula != w.rank as i64 {
        log::warn!("wandering rank {} disagrees with dimension count {count_formula}", w.rank);
    }
    let sigma_gap = [dec.gap, g1, g2, w.gap, w_top.gap].into_iter().fold(f64::INFINITY, f64::min);
    Ok(KernelReport {
        kernel: SubspaceBasis { components: n, max_degree: m, block_dim: level_dim, vectors: k_m },
        window: m - 1,
        kernel_dims,
        kernel_dim: kernel_dims[2],
        wandering_dim: w.rank,
        wandering_dim_top: w_top.rank,
        stable: w.rank == w_top.rank,
        count_formula,
        sigma_gap,
    })
}

/// Ranks of the multiplier on `(P_M)^n` by SVD and by pivoted Gram–Schmidt.
pub fn multiplier_rank_methods(f: &[FreeSeries], r: f64, b: &FockBasis, tol: f64) -> Result<(usize, usize)> {
    let deg = check_row(f, b)?;
    let m = b.max_degree().saturating_sub(deg);
    let a = restrict_inputs(&row_multiplier_matrix(f, r, b)?, f.len(), b.dim(), b.offset(m + 1));
    let svd_rank = linalg::rank_decision(&linalg::singular_values(&a), tol).rank;
    Ok((svd_rank, linalg::pivoted_gram_schmidt_rank(&a, tol)))
}

/// Wandering dimension of the range `F·(P_M)^n ⊖ Σ_j R_j F·(P_{M−1})^n`.
/// It never exceeds the number of entries of `F`.
pub fn range_wandering_dim(f: &[FreeSeries], r: f64, b: &FockBasis, tol: f64) -> Result<(usize, f64)> {
    let deg = check_row(f, b)?;
    let big_n = b.max_degree();
    if deg + 1 > big_n {
        return Err(Error::WindowTooSmall(format!("degree {deg} row needs truncation degree ≥ {}, got {big_n}", deg + 1)));
    }
    let m = big_n - deg;
    let n = f.len();
    let full = row_multiplier_matrix(f, r, b)?;
    let (ran, d1) = range_basis(&restrict_inputs(&full, n, b.dim(), b.offset(m + 1)), tol);
    // Images of degree ≤ M − 1 inputs have degree ≤ N − 1.
    let lower = restrict_inputs(&full, n, b.dim(), b.offset(m));
    let lower = lower.rows(0, b.offset(big_n)).into_owned();
    let (ran_lower, d2) = range_basis(&lower, tol);
    let shifted_lower = shifted(&ran_lower, 1, b, big_n)?;
    let w = complement_rank(&ran, &shifted_lower, tol);
    Ok((w.rank, d1.gap.min(d2.gap).min(w.gap)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: f64,
    pub kernel_dim: usize,
    pub wandering_dim: usize,
    pub sigma_gap: f64,
}

/// Kernel and wandering dimensions of `F(rL)` over a grid of radii.
pub fn ell_profile(f: &[FreeSeries], radii: &[f64], b: &FockBasis, tol: f64) -> Result<Vec<ProfileRow>> {
    radii
        .par_iter()
        .map(|&r| {
            let rep = kernel_wandering_dim(f, r, b, tol)?;
            Ok(ProfileRow { r, kernel_dim: rep.kernel_dim, wandering_dim: rep.wandering_dim, sigma_gap: rep.sigma_gap })
        })
        .collect()
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("r,kernel_dim,wandering_dim,sigma_gap\n");
    for row in rows {
        out.push_str(&format!("{:.16e},{},{},{:.16e}\n", row.r, row.kernel_dim, row.wandering_dim, row.sigma_gap));
    }
    out
}

/// A point of the variety: `y* f_i(X) = 0` for every generator and every
/// column `y` of `y`.
#[derive(Debug, Clone)]
pub struct VarietyPoint {
    pub x: MatrixTuple,
    /// Orthonormal basis of the common left null space.
    pub y: CMatrix,
    /// Produced by driving a random tuple onto the variety rather than found
    /// by generic sampling.
    pub planted: bool,
    /// `max_i ‖y* f_i(X)‖` over the basis.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct VarietyOptions {
    /// Relative singular-value threshold for the left null space.
    pub null_tol: f64,
    pub newton_steps: usize,
    pub restarts: usize,
}

impl Default for VarietyOptions {
    fn default() -> Self {
        VarietyOptions { null_tol: 1e-10, newton_steps: 60, restarts: 4 }
    }
}

fn stacked(gens: &[FreeSeries], x: &MatrixTuple) -> Result<CMatrix> {
    let n = x.n();
    let mut a = linalg::zero(n, n * gens.len());
    for (i, g) in gens.iter().enumerate() {
        a.view_mut((0, i * n), (n, n)).copy_from(&eval_poly(g, x)?);
    }
    Ok(a)
}

fn random_tuple(g: &mut GaussianStream, n: usize, d: usize) -> Result<MatrixTuple> {
    MatrixTuple::new((0..d).map(|_| g.complex_matrix(n, n, 1.0 / n as f64)).collect())
}

/// Left null space with threshold `tol · max(1, σ_max)`: the tuples have
/// unit scale, so a stacked evaluation that is itself at rounding level
/// (e.g. a commutator at a commuting pair) vanishes rather than having full rank.
fn left_null(a: &CMatrix, tol: f64) -> CMatrix {
    let smax = linalg::singular_values(a).into_iter().fold(0.0, f64::max);
    // null_space compares against tol · σ_max; rescale to the floored threshold
    let rel = if smax > 0.0 { tol * smax.max(1.0) / smax } else { tol };
    null_space(&a.adjoint(), rel).0
}

/// Gauss–Newton on the tuple entries for `y* f_i(X) = 0` with `y` fixed. The
/// residual is holomorphic in the entries, and its derivative in direction
/// `E` is the corner block of `f([[X, E], [0, X]])`.
fn plant(gens: &[FreeSeries], x0: MatrixTuple, y: &CVector, opts: &VarietyOptions) -> Result<Option<MatrixTuple>> {
    let n = x0.n();
    let d = x0.d();
    let m = gens.len();
    let ystar = y.adjoint();
    let residual = |x: &MatrixTuple| -> Result<CVector> {
        let a = stacked(gens, x)?;
        Ok((&ystar * a).transpose())
    };
    let mut x = x0;
    let mut r = residual(&x)?;
    for _ in 0..opts.newton_steps {
        let scale = 1.0 + linalg::operator_norm(&stacked(gens, &x)?);
        if r.norm() <= 1e-14 * scale {
            return Ok(Some(x));
        }
        let mut jac = linalg::zero(m * n, d * n * n);
        let mut col = 0;
        for j in 0..d {
            for a in 0..n {
                for bcol in 0..n {
                    let mut mats = Vec::with_capacity(d);
                    for k in 0..d {
                        let mut big = linalg::direct_sum(x.component(k + 1), x.component(k + 1));
                        if k == j {
                            big[(a, n + bcol)] = c(1.0);
                        }
                        mats.push(big);
                    }
                    let big = MatrixTuple::new(mats)?;
                    for (i, g) in gens.iter().enumerate() {
                        let corner = eval_poly(g, &big)?.view((0, n), (n, n)).into_owned();
                        let row = &ystar * corner;
                        for q in 0..n {
                            jac[(i * n + q, col)] = row[q];
                        }
                    }
                    col += 1;
                }
            }
        }
        let step = jac.svd(true, true).solve(&(-&r), 1e-12).map_err(|e| Error::InvalidArgument(e.into()))?;
        // Backtrack until the residual drops; full steps can overshoot on
        // the quadratic and higher terms.
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..8 {
            let mut mats = x.mats().to_vec();
            for (idx, z) in step.iter().enumerate() {
                let (j, rest) = (idx / (n * n), idx % (n * n));
                mats[j][(rest / n, rest % n)] += *z * alpha;
            }
            let trial = MatrixTuple::new(mats)?;
            let r_trial = residual(&trial)?;
            if r_trial.norm() < (1.0 - 0.25 * alpha) * r.norm() {
                accepted = Some((trial, r_trial));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, r_next)) = accepted else {
            // Stalled: either at the rounding floor or inconsistent at this y.
            return Ok((r.norm() <= 1e-12 * scale).then_some(x));
        };
        x = next;
        r = r_next;
    }
    let scale = 1.0 + linalg::operator_norm(&stacked(gens, &x)?);
    Ok((r.norm() <= 1e-12 * scale).then_some(x))
}

/// Up to `trials` points of the variety cut out by `gens` at size `n`.
///
/// A random tuple (complex Gaussian entries of variance `1/n`) is kept when
/// the stacked `[f_1(X) … f_m(X)]` has a nontrivial left null space.
/// Otherwise a random unit `y` is fixed and the tuple is driven onto
/// `{y* f_i(X) = 0}` by Gauss–Newton; trials where that fails after the
/// allowed restarts produce no point. For a set generating the unit ideal no
/// point is ever returned.
pub fn variety_sample(gens: &[FreeSeries], n: usize, trials: usize, seed: u64, opts: &VarietyOptions) -> Result<Vec<VarietyPoint>> {
    let d = gens.first().ok_or_else(|| Error::InvalidArgument("need at least one generator".into()))?.alphabet();
    if gens.iter().any(|g| g.alphabet() != d) {
        return Err(Error::AlphabetMismatch { left: d, right: gens.iter().find(|g| g.alphabet() != d).unwrap().alphabet() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("matrix size must be positive".into()));
    }
    let mut out = Vec::new();
    for t in 0..trials as u64 {
        let mut g = GaussianStream::new(derive_seed(seed, n as u64, t, 0));
        let x = random_tuple(&mut g, n, d)?;
        let a = stacked(gens, &x)?;
        let y = left_null(&a, opts.null_tol);
        if y.ncols() > 0 {
            let residual = linalg::operator_norm(&(y.adjoint() * &a));
            out.push(VarietyPoint { x, y, planted: false, residual });
            continue;
        }
        for _ in 0..=opts.restarts {
            let x0 = random_tuple(&mut g, n, d)?;
            let mut y = CVector::from_fn(n, |_, _| g.complex(1.0));
            y /= c(y.norm());
            if let Some(x) = plant(gens, x0, &y, opts)? {
                let a = stacked(gens, &x)?;
                let basis = left_null(&a, opts.null_tol);
                if basis.ncols() > 0 {
                    let residual = linalg::operator_norm(&(basis.adjoint() * &a));
                    out.push(VarietyPoint { x, y: basis, planted: true, residual });
                    break;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct NullstellensatzReport {
    /// Largest `|y* h(X) v| / (‖y‖‖v‖)` per point.
    pub per_point: Vec<f64>,
    pub max_violation: f64,
}

/// `h = Σ f_i g_i` must vanish on the variety of the `f_i` in the sense
/// `y* h(X) = 0`. Checks `|y* h(X) v|` against random probe vectors `v`.
pub fn nullstellensatz_check(
    gens: &[FreeSeries],
    multipliers: &[FreeSeries],
    points: &[VarietyPoint],
    seed: u64,
    probes: usize,
) -> Result<NullstellensatzReport> {
    if gens.len() != multipliers.len() || gens.is_empty() {
        return Err(Error::InvalidArgument("need one multiplier per generator".into()));
    }
    let mut h = gens[0].mul(&multipliers[0])?;
    for (f, g) in gens.iter().zip(multipliers).skip(1) {
        h = h.add(&f.mul(g)?)?;
    }
    let mut per_point = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let hx = eval_poly(&h, &p.x)?;
        let mut g = GaussianStream::new(derive_seed(seed, p.x.n() as u64, k as u64, 1));
        let mut worst = 0.0f64;
        for col in 0..p.y.ncols() {
            let y = p.y.column(col).into_owned();
            let yh = y.adjoint() * &hx;
            for _ in 0..probes {
                let v = CVector::from_fn(p.x.n(), |_, _| g.complex(1.0));
                worst = worst.max((&yh * &v)[0].norm() / (y.norm() * v.norm()));
            }
        }
        per_point.push(worst);
    }
    let max_violation = per_point.iter().copied().fold(0.0, f64::max);
    Ok(NullstellensatzReport { per_point, max_violation })
}
