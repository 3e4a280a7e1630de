//! The full Fock space over `C^d`, truncated at degree `N`.
//!
//! Basis vectors are the monomials `z^ω` with `|ω| ≤ N`, ordered by degree
//! and then lexicographically, so the vacuum `z^∅` has index 0. Creation
//! operators past degree `N` are compressed to zero; every norm computed here
//! is therefore a lower bound for the untruncated operator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::freemonoid::Word;
use crate::linalg::{self, c, zero};
use crate::nceval::{eval_poly, MatrixTuple};
use crate::ncseries::FreeSeries;
use crate::randmat::{derive_seed, GaussianStream};
use crate::{CMatrix, CVector, C64};

/// Largest basis accepted by [`FockBasis::new`].
pub const DEFAULT_DIM_CAP: usize = 200_000;

/// Largest basis for which dense matrices are formed.
pub const DENSE_DIM_CAP: usize = 8192;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    d: usize,
    max_degree: usize,
    /// `offsets[ℓ]` is the index of the first word of length `ℓ`; one extra entry holds `dim`.
    offsets: Vec<usize>,
}

impl FockBasis {
    pub fn new(d: usize, max_degree: usize) -> Result<Self> {
        Self::with_cap(d, max_degree, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(d: usize, max_degree: usize, cap: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("alphabet size must be positive".into()));
        }
        let dim = Self::dim_for(d, max_degree);
        if dim > cap {
            return Err(Error::BasisTooLarge { dim, cap });
        }
        let mut offsets = Vec::with_capacity(max_degree + 2);
        let mut acc = 0usize;
        let mut width = 1usize;
        for _ in 0..=max_degree {
            offsets.push(acc);
            acc += width;
            width = width.saturating_mul(d);
        }
        offsets.push(acc);
        Ok(FockBasis { d, max_degree, offsets })
    }

    /// `Σ_{ℓ≤N} d^ℓ`, saturating.
    pub fn dim_for(d: usize, max_degree: usize) -> usize {
        let mut acc = 0usize;
        let mut width = 1usize;
        for _ in 0..=max_degree {
            acc = acc.saturating_add(width);
            width = width.saturating_mul(d);
        }
        acc
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.max_degree + 1]
    }

    pub fn offset(&self, degree: usize) -> usize {
        self.offsets[degree]
    }

    pub fn index(&self, w: &Word) -> Option<usize> {
        if w.alphabet() != self.d || w.len() > self.max_degree {
            return None;
        }
        Some(self.offsets[w.len()] + w.rank())
    }

    pub fn word(&self, index: usize) -> Option<Word> {
        if index >= self.dim() {
            return None;
        }
        let degree = self.offsets.partition_point(|&o| o <= index) - 1;
        Some(Word::from_rank(index - self.offsets[degree], degree, self.d))
    }

    /// Degree of the basis vector at `index`.
    pub fn degree_of(&self, index: usize) -> usize {
        self.offsets.partition_point(|&o| o <= index) - 1
    }

    pub fn vacuum(&self) -> CVector {
        let mut v = CVector::zeros(self.dim());
        v[0] = c(1.0);
        v
    }

    fn check_letter(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.d {
            return Err(Error::LetterOutOfRange { letter: j, d: self.d });
        }
        Ok(())
    }

    fn check_dense(&self) -> Result<()> {
        if self.dim() > DENSE_DIM_CAP {
            return Err(Error::BasisTooLarge { dim: self.dim(), cap: DENSE_DIM_CAP });
        }
        Ok(())
    }
}

/// A 0/1 partial injection on the basis: column `i` goes to row `targets[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftOperator {
    targets: Vec<Option<usize>>,
}

impl ShiftOperator {
    pub fn dim(&self) -> usize {
        self.targets.len()
    }

    pub fn target(&self, i: usize) -> Option<usize> {
        self.targets[i]
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        let mut out = CVector::zeros(x.len());
        for (i, t) in self.targets.iter().enumerate() {
            if let Some(t) = t {
                out[*t] = x[i];
            }
        }
        out
    }

    pub fn apply_adjoint(&self, x: &CVector) -> CVector {
        let mut out = CVector::zeros(x.len());
        for (i, t) in self.targets.iter().enumerate() {
            if let Some(t) = t {
                out[i] = x[*t];
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = zero(self.dim(), self.dim());
        for (i, t) in self.targets.iter().enumerate() {
            if let Some(t) = t {
                m[(*t, i)] = c(1.0);
            }
        }
        m
    }
}

/// `L_j: z^ω ↦ z^{jω}`, zero on the top degree.
pub fn left_creation(b: &FockBasis, j: usize) -> Result<ShiftOperator> {
    b.check_letter(j)?;
    let mut targets = vec![None; b.dim()];
    for degree in 0..b.max_degree {
        let width = b.offset(degree + 1) - b.offset(degree);
        for rank in 0..width {
            targets[b.offset(degree) + rank] = Some(b.offset(degree + 1) + (j - 1) * width + rank);
        }
    }
    Ok(ShiftOperator { targets })
}

/// `R_j: z^ω ↦ z^{ωj}`, zero on the top degree.
pub fn right_creation(b: &FockBasis, j: usize) -> Result<ShiftOperator> {
    b.check_letter(j)?;
    let mut targets = vec![None; b.dim()];
    for degree in 0..b.max_degree {
        let width = b.offset(degree + 1) - b.offset(degree);
        for rank in 0..width {
            targets[b.offset(degree) + rank] = Some(b.offset(degree + 1) + rank * b.d + (j - 1));
        }
    }
    Ok(ShiftOperator { targets })
}

pub fn left_creation_matrix(b: &FockBasis, j: usize) -> Result<CMatrix> {
    b.check_dense()?;
    Ok(left_creation(b, j)?.to_dense())
}

pub fn right_creation_matrix(b: &FockBasis, j: usize) -> Result<CMatrix> {
    b.check_dense()?;
    Ok(right_creation(b, j)?.to_dense())
}

/// `s_j = L_j + L_j*`, whose vacuum moments are the Catalan numbers.
pub fn semicircular_matrix(b: &FockBasis, j: usize) -> Result<CMatrix> {
    let l = left_creation_matrix(b, j)?;
    Ok(&l + l.adjoint())
}

/// The semicircular tuple `(s_1, …, s_d)` on the basis.
pub fn semicircular_tuple(b: &FockBasis) -> Result<MatrixTuple> {
    MatrixTuple::new((1..=b.d()).map(|j| semicircular_matrix(b, j)).collect::<Result<Vec<_>>>()?)
}

/// `⟨Ω, M Ω⟩`.
pub fn vacuum_trace(b: &FockBasis, m: &CMatrix) -> Result<C64> {
    if m.shape() != (b.dim(), b.dim()) {
        return Err(Error::DimensionMismatch(format!("matrix is {}×{}, basis has dimension {}", m.nrows(), m.ncols(), b.dim())));
    }
    Ok(m[(0, 0)])
}

/// `⟨Ω, s_{i1} ⋯ s_{ik} Ω⟩` computed with sparse shifts; no dense matrix is formed.
pub fn vacuum_moment(b: &FockBasis, word: &Word) -> Result<C64> {
    if word.alphabet() != b.d() {
        return Err(Error::AlphabetMismatch { left: b.d(), right: word.alphabet() });
    }
    let shifts: Vec<ShiftOperator> = (1..=b.d()).map(|j| left_creation(b, j)).collect::<Result<_>>()?;
    let mut v = b.vacuum();
    let letters: Vec<usize> = word.letters().collect();
    for &j in letters.iter().rev() {
        let s = &shifts[j - 1];
        v = s.apply(&v) + s.apply_adjoint(&v);
    }
    Ok(v[0])
}

/// `f(rL) = Σ_ω f̂_ω r^{|ω|} L^ω` on the truncated space, plus the norm
/// `(Σ_{N<ℓ≤cutoff} r^{2ℓ}‖f_ℓ‖²)^{1/2}` of the coefficients the truncation drops.
pub fn left_mult_matrix(f: &FreeSeries, b: &FockBasis, r: f64) -> Result<(CMatrix, f64)> {
    if f.alphabet() != b.d() {
        return Err(Error::AlphabetMismatch { left: b.d(), right: f.alphabet() });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("r must be positive, got {r}")));
    }
    b.check_dense()?;
    let top = f.cutoff().min(b.max_degree());
    let coeffs: Vec<(Word, C64)> = if f.cutoff() > top {
        f.partial_sum(top)?.terms()?.into_iter().collect()
    } else {
        f.terms()?.into_iter().collect()
    };
    let norms = f.homogeneous_norms();
    let dropped = (top + 1..=f.cutoff()).map(|l| (r.powi(l as i32) * norms[l]).powi(2)).sum::<f64>().sqrt();
    if dropped > 0.0 {
        log::warn!("truncation at degree {} drops coefficient mass {dropped:e}", b.max_degree());
    }
    let n = b.max_degree();
    let d = b.d();
    let mut m = zero(b.dim(), b.dim());
    let mut pow_d = vec![1usize; n + 1];
    for l in 1..=n {
        pow_d[l] = pow_d[l - 1] * d;
    }
    for (w, x) in &coeffs {
        let lw = w.len();
        let scaled = x * r.powi(lw as i32);
        let rw = w.rank();
        for la in 0..=n - lw {
            let base = b.offset(lw + la) + rw * pow_d[la];
            for ra in 0..pow_d[la] {
                m[(base + ra, b.offset(la) + ra)] += scaled;
            }
        }
    }
    Ok((m, dropped))
}

/// `ρ_r(f) = ‖f(rL)‖` at the basis truncation.
pub fn seminorm_rho(f: &FreeSeries, r: f64, b: &FockBasis) -> Result<f64> {
    let (m, _) = left_mult_matrix(f, b, r)?;
    Ok(linalg::operator_norm(&m))
}

/// Kernel vector with coefficient `conj(y* Z^ω v)` at `z^ω`, `|ω| ≤ N`.
pub fn szego_vector(z: &MatrixTuple, y: &CVector, v: &CVector, b: &FockBasis) -> Result<CVector> {
    if z.d() != b.d() {
        return Err(Error::AlphabetMismatch { left: b.d(), right: z.d() });
    }
    if y.len() != z.n() || v.len() != z.n() {
        return Err(Error::DimensionMismatch(format!("vectors must have length {}", z.n())));
    }
    let mut out = CVector::zeros(b.dim());
    // Level ℓ holds Z^ω v for |ω| = ℓ in rank order; Z^{jω} v = Z_j (Z^ω v).
    let mut level: Vec<CVector> = vec![v.clone()];
    for degree in 0..=b.max_degree() {
        for (rank, x) in level.iter().enumerate() {
            out[b.offset(degree) + rank] = y.dotc(x).conj();
        }
        if degree < b.max_degree() {
            let mut next = Vec::with_capacity(level.len() * b.d());
            for zj in z.mats() {
                for x in &level {
                    next.push(zj * x);
                }
            }
            level = next;
        }
    }
    Ok(out)
}

/// Coefficient vector of a series in the basis (degrees above `N` dropped).
pub fn series_vector(f: &FreeSeries, b: &FockBasis) -> Result<CVector> {
    if f.alphabet() != b.d() {
        return Err(Error::AlphabetMismatch { left: b.d(), right: f.alphabet() });
    }
    let top = f.cutoff().min(b.max_degree());
    let mut out = CVector::zeros(b.dim());
    for (w, x) in f.partial_sum(top)?.terms()? {
        out[b.index(&w).expect("degree within basis")] = x;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SzegoReport {
    pub samples: usize,
    /// Largest `|⟨f, K⟩ − y* f(Z) v|` relative to `max(1, |y* f(Z) v|)`.
    pub max_reproduction_error: f64,
    /// Largest `‖K‖² (1 − ‖Z‖²) / (‖y‖²‖v‖²)`; at most one when the bound holds.
    pub max_bound_ratio: f64,
}

/// Reproducing identity and norm bound of the Szegő kernel at random points:
/// `Z` of row norm `r`, complex Gaussian `y, v`, and polynomials with eight
/// random terms of degree `≤ N`.
pub fn szego_check(b: &FockBasis, n: usize, r: f64, samples: usize, seed: u64) -> Result<SzegoReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("row norm must lie in (0, 1), got {r}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("matrix size must be positive".into()));
    }
    let words = crate::freemonoid::enumerate_words_upto(b.d(), b.max_degree());
    let (mut err, mut ratio) = (0.0f64, 0.0f64);
    for t in 0..samples as u64 {
        let mut g = GaussianStream::new(derive_seed(seed, n as u64, t, 0));
        let z = MatrixTuple::new((0..b.d()).map(|_| g.complex_matrix(n, n, 1.0)).collect())?;
        let z = MatrixTuple::new(z.mats().iter().map(|m| m * c(r / z.row_norm())).collect())?;
        let y = CVector::from_fn(n, |_, _| g.complex(1.0));
        let v = CVector::from_fn(n, |_, _| g.complex(1.0));
        let terms: Vec<(Word, C64)> = (0..8)
            .map(|_| {
                let k = g.below(words.len());
                (words[k].clone(), g.complex(1.0))
            })
            .collect();
        let f = FreeSeries::from_terms(b.d(), b.max_degree(), terms)?;
        let kv = szego_vector(&z, &y, &v, b)?;
        let lhs = kv.dotc(&series_vector(&f, b)?);
        let rhs = y.dotc(&(eval_poly(&f, &z)? * &v));
        err = err.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        let rr = z.row_norm();
        ratio = ratio.max(kv.norm_squared() * (1.0 - rr * rr) / (y.norm_squared() * v.norm_squared()));
    }
    Ok(SzegoReport { samples, max_reproduction_error: err, max_bound_ratio: ratio })
}

/// A truncated quantity at increasing `N`, with the Aitken Δ² extrapolate of
/// the last three values. The extrapolate only indicates the trend; no rate
/// of convergence is assumed.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationTrend {
    pub degrees: Vec<usize>,
    pub values: Vec<f64>,
    pub extrapolated: Option<f64>,
}

pub fn truncation_trend(degrees: &[usize], mut value: impl FnMut(usize) -> Result<f64>) -> Result<TruncationTrend> {
    if degrees.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("truncation degrees must increase".into()));
    }
    let values = degrees.iter().map(|&n| value(n)).collect::<Result<Vec<f64>>>()?;
    let extrapolated = match values[..] {
        [.., a, b, c] => {
            let denom = (c - b) - (b - a);
            (denom.abs() > f64::EPSILON * c.abs().max(1.0)).then(|| c - (c - b).powi(2) / denom)
        }
        _ => None,
    };
    Ok(TruncationTrend { degrees: degrees.to_vec(), values, extrapolated })
}
