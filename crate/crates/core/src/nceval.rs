//! Points of the NC universe and evaluation of free series on them.
//!
//! A [`MatrixTuple`] is a `d`-tuple of `n×n` complex matrices. Monomials are
//! evaluated as `X^ω = X_{i1} ⋯ X_{iℓ}`. Certified series evaluation uses
//!
//! ```text
//! ‖Σ_{|ω|=ℓ} f̂_ω X^ω‖ ≤ √‖Ad^ℓ(I)‖ · (Σ_{|ω|=ℓ} |f̂_ω|²)^{1/2},   Ad(T) = Σ_j X_j T X_j*
//! ```
//!
//! together with submultiplicativity of `ℓ ↦ ‖Ad^ℓ(I)‖` to bound the growth
//! beyond the computed degrees.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::freemonoid::Word;
use crate::linalg::{self, c, identity, zero};
use crate::ncseries::{Coefficients, FreeSeries, LinearRep};
use crate::{CMatrix, CVector, C64};

/// Default cap on the condition number accepted by [`MatrixTuple::similarity`].
pub const DEFAULT_SIMILARITY_COND_CAP: f64 = 1e8;

/// Complex entries the graded evaluator may keep alive at once before it
/// falls back to evaluating monomials one at a time.
pub const DEFAULT_EVAL_MEMORY_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTuple {
    mats: Vec<CMatrix>,
}

impl MatrixTuple {
    pub fn new(mats: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(Error::InvalidArgument("a matrix tuple needs at least one matrix".into()));
        };
        let n = first.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("matrix size must be positive".into()));
        }
        if mats.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("tuple components must be square of one size".into()));
        }
        Ok(MatrixTuple { mats })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        MatrixTuple { mats: vec![zero(n, n); d] }
    }

    /// `1×1` tuple from scalars.
    pub fn scalars(values: &[C64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| CMatrix::from_element(1, 1, x)).collect())
    }

    pub fn n(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn d(&self) -> usize {
        self.mats.len()
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    /// `X_j`, 1-based.
    pub fn component(&self, j: usize) -> &CMatrix {
        &self.mats[j - 1]
    }

    /// `‖(X_1 … X_d)‖ = √‖Σ X_j X_j*‖`.
    pub fn row_norm(&self) -> f64 {
        let mut gram = zero(self.n(), self.n());
        for x in &self.mats {
            gram += x * x.adjoint();
        }
        linalg::operator_norm(&gram).sqrt()
    }

    /// `Ad_{X,X*}(T) = Σ_j X_j T X_j*`.
    pub fn adjunction(&self, t: &CMatrix) -> Result<CMatrix> {
        if t.shape() != (self.n(), self.n()) {
            return Err(Error::DimensionMismatch(format!("T is {}×{}, tuple size is {}", t.nrows(), t.ncols(), self.n())));
        }
        let mut out = zero(self.n(), self.n());
        for x in &self.mats {
            out += x * t * x.adjoint();
        }
        Ok(out)
    }

    pub fn direct_sum(&self, other: &MatrixTuple) -> Result<MatrixTuple> {
        if self.d() != other.d() {
            return Err(Error::DimensionMismatch(format!("tuple lengths {} and {}", self.d(), other.d())));
        }
        Ok(MatrixTuple { mats: self.mats.iter().zip(&other.mats).map(|(a, b)| linalg::direct_sum(a, b)).collect() })
    }

    /// `S⁻¹ X S`, refusing `S` with condition number above `cond_cap`.
    pub fn similarity(&self, s: &CMatrix, cond_cap: f64) -> Result<MatrixTuple> {
        if s.shape() != (self.n(), self.n()) {
            return Err(Error::DimensionMismatch("similarity has the wrong size".into()));
        }
        let cond = condition_number(s);
        if !(cond <= cond_cap) {
            return Err(Error::SingularSimilarity { cond });
        }
        let lu = linalg::lu(s);
        let mats: Option<Vec<CMatrix>> = self.mats.iter().map(|x| lu.solve(&(x * s))).collect();
        mats.map(|mats| MatrixTuple { mats }).ok_or(Error::SingularSimilarity { cond })
    }

    /// Parse the `#nctuple n=<n> d=<d>` format: `d` blocks of `n` rows, each
    /// row `n` comma-separated entries written `re+imi`.
    pub fn parse(text: &str) -> Result<MatrixTuple> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty tuple file".into() })?;
        let rest = header
            .strip_prefix("#nctuple")
            .ok_or(Error::Parse { line: hline, msg: "missing #nctuple header".into() })?;
        let key = |k: &str| -> Result<usize> {
            rest.split_whitespace()
                .find_map(|t| t.strip_prefix(k).and_then(|v| v.strip_prefix('=')))
                .and_then(|v| v.parse().ok())
                .ok_or(Error::Parse { line: hline, msg: format!("header is missing {k}=") })
        };
        let (n, d) = (key("n")?, key("d")?);
        let mut mats = Vec::with_capacity(d);
        for _ in 0..d {
            let mut m = zero(n, n);
            for r in 0..n {
                let (ln, row) = lines.next().ok_or(Error::Parse { line: 0, msg: "tuple file ended early".into() })?;
                let entries: Vec<&str> = row.split(',').collect();
                if entries.len() != n {
                    return Err(Error::Parse { line: ln, msg: format!("expected {n} entries, found {}", entries.len()) });
                }
                for (col, e) in entries.iter().enumerate() {
                    m[(r, col)] = parse_complex(e).ok_or(Error::Parse { line: ln, msg: format!("bad complex entry '{e}'") })?;
                }
            }
            mats.push(m);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse { line: ln, msg: "trailing data after the last block".into() });
        }
        MatrixTuple::new(mats)
    }

    pub fn write(&self) -> String {
        let mut out = format!("#nctuple n={} d={}\n", self.n(), self.d());
        for m in &self.mats {
            for r in 0..self.n() {
                let row: Vec<String> = (0..self.n()).map(|col| format_complex(m[(r, col)])).collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
        out
    }
}

fn condition_number(s: &CMatrix) -> f64 {
    let sv = linalg::singular_values(s);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// `re+imi` / `re-imi` with 17 significant digits.
pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{sign}{:.16e}i", z.re, z.im.abs())
}

/// Accepts `a+bi`, `a-bi`, a bare real `a`, or a bare imaginary `bi`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('i') else {
        return s.parse().ok().map(c);
    };
    let bytes = body.as_bytes();
    // The split is the last sign that is neither leading nor part of an exponent.
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => {
            let re: f64 = body[..k].parse().ok()?;
            let im_text = &body[k..];
            let im: f64 = match im_text {
                "+" => 1.0,
                "-" => -1.0,
                t => t.parse().ok()?,
            };
            Some(C64::new(re, im))
        }
        None => {
            let im: f64 = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                t => t.parse().ok()?,
            };
            Some(C64::new(0.0, im))
        }
    }
}

/// Gelfand-sequence diagnostics for the joint spectral radius.
#[derive(Debug, Clone)]
pub struct JsrReport {
    pub estimate: f64,
    /// Power `m` at which the estimate was taken.
    pub m: u64,
    pub converged: bool,
    /// `(m, ‖Ad^m(I)‖^{1/2m})` in the order computed.
    pub sequence: Vec<(u64, f64)>,
    /// Running minimum of the sequence. Each entry is an upper bound on
    /// `ρ_σ(X)` because `m ↦ ‖Ad^m‖ = ‖Ad^m(I)‖` is submultiplicative.
    pub upper: Vec<f64>,
}

/// Largest `n` for which the `n²×n²` superoperator is formed and squared.
pub const JSR_SQUARING_MAX_N: usize = 24;

/// `ρ_σ(X) = √ρ(Ad_{X,X*}) = lim_m ‖Ad^m(I)‖^{1/2m}`.
///
/// Small tuples square the superoperator `Σ_j conj(X_j) ⊗ X_j`, so `m` runs
/// through powers of two and very large `m` are reachable; larger tuples
/// iterate `Ad` one step at a time. Both renormalize and track scales in
/// logarithms. The iteration stops at the first `m` whose estimate differs
/// from the previous one by less than `tol` relatively, or when `m` would
/// exceed `m_max`.
pub fn joint_spectral_radius(x: &MatrixTuple, m_max: u64, tol: f64) -> JsrReport {
    let m_max = m_max.max(2);
    let mut sequence = Vec::new();
    let mut converged = false;
    let n = x.n();
    if n <= JSR_SQUARING_MAX_N {
        let mut sup = zero(n * n, n * n);
        for xj in x.mats() {
            sup += xj.map(|z| z.conj()).kronecker(xj);
        }
        let id = identity(n);
        let vec_id = CVector::from_column_slice(id.as_slice());
        let mut log_scale = 0.0;
        let mut m: u64 = 1;
        loop {
            let image = &sup * &vec_id;
            let t = CMatrix::from_column_slice(n, n, image.as_slice());
            let norm = linalg::operator_norm(&t);
            if norm == 0.0 {
                sequence.push((m, 0.0));
                converged = true;
                break;
            }
            let est = ((log_scale + norm.ln()) / (2.0 * m as f64)).exp();
            if let Some(&(_, prev)) = sequence.last() {
                if (est - prev).abs() <= tol * prev.max(est) {
                    sequence.push((m, est));
                    converged = true;
                    break;
                }
            }
            sequence.push((m, est));
            if m.checked_mul(2).is_none_or(|next| next > m_max) {
                break;
            }
            let scale = linalg::one_norm(&sup);
            if scale == 0.0 {
                sequence.push((2 * m, 0.0));
                converged = true;
                break;
            }
            let normalized = &sup / c(scale);
            sup = &normalized * &normalized;
            log_scale = 2.0 * (log_scale + scale.ln());
            m *= 2;
        }
    } else {
        let mut t = identity(n);
        let mut log_scale = 0.0;
        for m in 1..=m_max {
            t = x.adjunction(&t).expect("sizes agree");
            let norm = linalg::operator_norm(&t);
            if norm == 0.0 {
                sequence.push((m, 0.0));
                converged = true;
                break;
            }
            log_scale += norm.ln();
            t /= c(norm);
            let est = (log_scale / (2.0 * m as f64)).exp();
            let done = sequence.last().is_some_and(|&(_, prev): &(u64, f64)| (est - prev).abs() <= tol * prev.max(est));
            sequence.push((m, est));
            if done {
                converged = true;
                break;
            }
        }
    }
    let mut upper = Vec::with_capacity(sequence.len());
    let mut best = f64::INFINITY;
    for &(_, v) in &sequence {
        best = best.min(v);
        upper.push(best);
    }
    let &(m, estimate) = sequence.last().expect("at least one step");
    JsrReport { estimate, m, converged, sequence, upper }
}

fn check_alphabet(f: &FreeSeries, x: &MatrixTuple) -> Result<()> {
    if f.alphabet() != x.d() {
        return Err(Error::AlphabetMismatch { left: f.alphabet(), right: x.d() });
    }
    Ok(())
}

/// `Σ_ω f̂_ω X^ω` for an exact polynomial.
pub fn eval_poly(f: &FreeSeries, x: &MatrixTuple) -> Result<CMatrix> {
    eval_poly_with_budget(f, x, DEFAULT_EVAL_MEMORY_BUDGET)
}

pub fn eval_poly_with_budget(f: &FreeSeries, x: &MatrixTuple, budget: usize) -> Result<CMatrix> {
    check_alphabet(f, x)?;
    if !f.is_polynomial() {
        return Err(Error::InvalidArgument("eval_poly needs a series with zero tail; use eval_series".into()));
    }
    let degree = f.degree().unwrap_or(0);
    Ok(partial_eval(f, x, degree, budget))
}

/// Degrees `≤ upto` of `f` evaluated at `X`.
fn partial_eval(f: &FreeSeries, x: &MatrixTuple, upto: usize, budget: usize) -> CMatrix {
    match f.coefficients() {
        Coefficients::Sparse(map) => {
            let terms: BTreeMap<&Word, C64> = map.iter().filter(|(w, _)| w.len() <= upto).map(|(w, v)| (w, *v)).collect();
            eval_terms(&terms, x, budget)
        }
        Coefficients::Linear(rep) => eval_linear(rep, x, upto),
    }
}

/// Graded recursion over the prefix closure of the support: `X^{pj} = X^p X_j`.
/// Each degree only needs the previous one, so at most two levels are alive.
fn eval_terms(terms: &BTreeMap<&Word, C64>, x: &MatrixTuple, budget: usize) -> CMatrix {
    let n = x.n();
    let mut out = zero(n, n);
    let Some(max_len) = terms.keys().map(|w| w.len()).max() else {
        return out;
    };
    // Prefixes needed at every level.
    let mut levels: Vec<Vec<Vec<usize>>> = vec![Vec::new(); max_len + 1];
    for w in terms.keys() {
        let letters: Vec<usize> = w.letters().collect();
        for l in 0..=letters.len() {
            levels[l].push(letters[..l].to_vec());
        }
    }
    for level in levels.iter_mut() {
        level.sort();
        level.dedup();
    }
    let widest = levels.iter().map(Vec::len).max().unwrap_or(0);
    if widest.saturating_mul(2).saturating_mul(n * n) > budget {
        for (w, coef) in terms {
            let mut prod = identity(n);
            for j in w.letters() {
                prod = &prod * x.component(j);
            }
            out += prod * *coef;
        }
        return out;
    }
    let coef_of: BTreeMap<Vec<usize>, C64> = terms.iter().map(|(w, v)| (w.letters().collect(), *v)).collect();
    let mut prev: BTreeMap<Vec<usize>, CMatrix> = BTreeMap::new();
    prev.insert(Vec::new(), identity(n));
    if let Some(v) = coef_of.get(&Vec::new()) {
        out += identity(n) * *v;
    }
    for level in levels.iter().skip(1) {
        let mut cur = BTreeMap::new();
        for p in level {
            let parent = &prev[&p[..p.len() - 1]];
            let val = parent * x.component(p[p.len() - 1]);
            if let Some(v) = coef_of.get(p) {
                out += &val * *v;
            }
            cur.insert(p.clone(), val);
        }
        prev = cur;
    }
    out
}

/// `Σ_{ℓ≤upto} (I ⊗ U_ℓ*) V_ℓ` with `V_0 = I ⊗ v`, `V_ℓ = (Σ_j X_j ⊗ M_j) V_{ℓ-1}`.
fn eval_linear(rep: &LinearRep, x: &MatrixTuple, upto: usize) -> CMatrix {
    let n = x.n();
    let s = rep.dim();
    let mut t = zero(n * s, n * s);
    for (xj, mj) in x.mats().iter().zip(rep.mats()) {
        t += xj.kronecker(mj);
    }
    let v_mat = CMatrix::from_column_slice(s, 1, rep.v().as_slice());
    let mut level = identity(n).kronecker(&v_mat);
    let mut out = zero(n, n);
    for l in 0..=upto {
        let u = rep.u_at(l);
        let u_row = CMatrix::from_row_slice(1, s, &u.iter().map(|z| z.conj()).collect::<Vec<_>>());
        out += identity(n).kronecker(&u_row) * &level;
        if l < upto {
            level = &t * &level;
        }
    }
    out
}

/// Result of [`eval_series`]: the partial sum through `degree` and a bound on
/// its distance to `f(X)`.
#[derive(Debug, Clone)]
pub struct SeriesEval {
    pub value: CMatrix,
    pub bound: f64,
    pub degree: usize,
    /// Part of `bound` allotted to floating-point rounding in the partial sum.
    pub rounding: f64,
    /// Growth envelope `√‖Ad^ℓ(I)‖ ≤ growth_const · growth_rate^ℓ` used past the computed degrees.
    pub growth_rate: f64,
    pub growth_const: f64,
}

/// Growth profile `a_ℓ = √‖Ad^ℓ(I)‖` for `ℓ = 0..=upto` and the envelope
/// `a_ℓ ≤ C ρ^ℓ` valid for all `ℓ`.
///
/// With `P` fixed, `a_{qP+s} ≤ a_P^q a_s`, so `ρ = a_P^{1/P}` and
/// `C = max_{s<P} a_s / ρ^s` work; `P` is the degree minimizing `a_P^{1/P}`.
pub fn adjunction_growth(x: &MatrixTuple, upto: usize) -> (Vec<f64>, f64, f64) {
    let n = x.n();
    let mut t = identity(n);
    let mut logs = vec![0.0f64];
    let mut log_scale = 0.0;
    for _ in 1..=upto.max(1) {
        t = x.adjunction(&t).expect("sizes agree");
        let norm = linalg::operator_norm(&t);
        if norm == 0.0 {
            logs.push(f64::NEG_INFINITY);
            break;
        }
        log_scale += norm.ln();
        t /= c(norm);
        logs.push(log_scale);
    }
    let mut a: Vec<f64> = logs.iter().map(|&lg| (0.5 * lg).exp()).collect();
    if a.len() <= upto {
        a.resize(upto + 1, 0.0);
    }
    let last = logs.len() - 1;
    if logs[last] == f64::NEG_INFINITY {
        // Nilpotent adjunction: a_ℓ = 0 from `last` on.
        return (a, 0.0, 0.0);
    }
    let (p, rho) = (1..=last)
        .map(|p| (p, (0.5 * logs[p] / p as f64).exp()))
        .fold((1, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let cst = (0..p).map(|s| (0.5 * logs[s] - s as f64 * rho.ln()).exp()).fold(1.0f64, f64::max);
    (a, rho, cst)
}

/// Partial sum of `f` at `X` with a certified truncation bound.
///
/// The bound is `Σ_{ℓ>N} √‖Ad^ℓ(I)‖ · ‖f_ℓ‖` (exact norms up to the cutoff,
/// tail bounds after), where `N` is the first degree at which it drops to
/// `tol`, plus a rounding allowance for the partial sum itself.
pub fn eval_series(f: &FreeSeries, x: &MatrixTuple, tol: f64) -> Result<SeriesEval> {
    check_alphabet(f, x)?;
    let cutoff = f.cutoff();
    let tail = f.tail().ok_or(Error::MissingTailBound { degree: cutoff + 1 })?;
    let horizon = tail.horizon(cutoff);
    let (a, rho, cst) = adjunction_growth(x, horizon.max(cutoff));
    let norms = f.homogeneous_norms();

    // Everything past the cutoff: explicit table, then envelope × growth envelope.
    let mut beyond = 0.0;
    for l in cutoff + 1..=horizon {
        beyond += a[l] * tail.at(cutoff, l).unwrap_or(0.0);
    }
    let env_part = match tail.envelope {
        Some(env) => env.weighted_tail_sum(rho, horizon).map(|s| cst * s),
        None => None,
    };
    let beyond = match env_part {
        Some(e) => beyond + e,
        None if a[horizon..].iter().all(|&v| v == 0.0) && rho == 0.0 => beyond,
        None => {
            return Err(Error::TailNotSummable { best_bound: f64::INFINITY });
        }
    };
    if !beyond.is_finite() {
        return Err(Error::TailNotSummable { best_bound: f64::INFINITY });
    }

    // suffix[k] = Σ_{ℓ=k}^{cutoff} a_ℓ ‖f_ℓ‖ + beyond
    let mut suffix = vec![beyond; cutoff + 2];
    for l in (0..=cutoff).rev() {
        suffix[l] = suffix[l + 1] + a[l] * norms[l];
    }
    let degree = match (0..=cutoff).find(|&nd| suffix[nd + 1] <= tol) {
        Some(nd) => nd,
        None => {
            return Err(Error::ToleranceUnreachable { degree: cutoff, bound: suffix[cutoff + 1] });
        }
    };
    let value = partial_eval(f, x, degree, DEFAULT_EVAL_MEMORY_BUDGET);
    // The constant term is exact; rounding enters through the products.
    let mass = suffix[1.min(degree + 1)] - suffix[degree + 1];
    let dims = (x.n() * x.d()).max(1) as f64;
    let rounding = 8.0 * f64::EPSILON * (degree as f64 + dims) * mass;
    Ok(SeriesEval {
        value,
        bound: suffix[degree + 1] + rounding,
        degree,
        rounding,
        growth_rate: rho,
        growth_const: cst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freemonoid::enumerate_words_upto;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(rows: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, rows, &data.iter().map(|&v| c(v)).collect::<Vec<_>>())
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
    }

    /// Word-by-word products, no sharing.
    fn brute_eval(f: &FreeSeries, x: &MatrixTuple) -> CMatrix {
        let mut out = zero(x.n(), x.n());
        for (w, coef) in f.terms().unwrap() {
            let mut p = identity(x.n());
            for j in w.letters() {
                p *= x.component(j);
            }
            out += p * coef;
        }
        out
    }

    #[test]
    fn row_norm_examples() {
        let x = MatrixTuple::scalars(&[c(3.0), c(4.0)]).unwrap();
        assert!((x.row_norm() - 5.0).abs() < 1e-14);
        assert_eq!(MatrixTuple::zeros(3, 2).row_norm(), 0.0);
        let y = MatrixTuple::new(vec![real(2, &[2.0, 0.0, 0.0, 0.5])]).unwrap();
        assert!((y.row_norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adjunction_examples() {
        let t = real(2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(MatrixTuple::zeros(2, 2).adjunction(&t).unwrap(), zero(2, 2));
        let id = MatrixTuple::new(vec![identity(2)]).unwrap();
        assert_eq!(id.adjunction(&t).unwrap(), t);
        let x = MatrixTuple::scalars(&[c(3.0), c(4.0)]).unwrap();
        assert_eq!(x.adjunction(&identity(1)).unwrap()[(0, 0)], c(25.0));
        assert!(x.adjunction(&identity(2)).is_err());
    }

    #[test]
    fn jsr_examples() {
        let jordan = MatrixTuple::new(vec![real(2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        let r = joint_spectral_radius(&jordan, 1 << 20, 1e-12);
        assert!(r.estimate <= 1e-6 && r.converged);
        let lam = MatrixTuple::scalars(&[C64::new(0.3, -0.4)]).unwrap();
        assert!((joint_spectral_radius(&lam, 1 << 20, 1e-12).estimate - 0.5).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u1 = real(2, &[0.0, 1.0, 1.0, 0.0]) * c(s);
        let u2 = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 1.0), c(0.0), c(0.0), C64::new(0.0, -1.0)]) * c(s);
        let unit = MatrixTuple::new(vec![u1, u2]).unwrap();
        assert!((joint_spectral_radius(&unit, 1 << 20, 1e-12).estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsr_matches_spectral_radius_for_single_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 4, 1.0);
            let rho = m.clone().eigenvalues().unwrap().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let rep = joint_spectral_radius(&MatrixTuple::new(vec![m]).unwrap(), 1 << 40, 1e-13);
            assert!((rep.estimate - rho).abs() < 1e-6 * rho.max(1.0), "{} vs {rho}", rep.estimate);
            assert!(rep.upper.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn jsr_sequential_path_agrees() {
        // n above the squaring limit, built as a direct sum so the answer is known.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let small = MatrixTuple::new(vec![random_matrix(&mut rng, 2, 0.5), random_matrix(&mut rng, 2, 0.5)]).unwrap();
        let reference = joint_spectral_radius(&small, 1 << 40, 1e-14).estimate;
        let mut big = small.clone();
        while big.n() <= JSR_SQUARING_MAX_N {
            big = big.direct_sum(&small).unwrap();
        }
        let rep = joint_spectral_radius(&big, 4000, 1e-9);
        assert!(rep.estimate >= reference * (1.0 - 1e-9));
        assert!((rep.estimate - reference).abs() < 1e-2 * reference, "{} vs {reference}", rep.estimate);
    }

    #[test]
    fn eval_poly_examples() {
        let x = MatrixTuple::new(vec![real(2, &[0.0, 1.0, 0.0, 0.0]), real(2, &[0.0, 0.0, 1.0, 0.0])]).unwrap();
        let one = FreeSeries::one(2, 0);
        assert_eq!(eval_poly(&one, &x).unwrap(), identity(2));
        let f = FreeSeries::polynomial(2, &[("12", 1.0)]).unwrap();
        assert_eq!(eval_poly(&f, &x).unwrap(), real(2, &[1.0, 0.0, 0.0, 0.0]));
        let g = FreeSeries::polynomial(2, &[("1", 1.0), ("2", 1.0)]).unwrap();
        let s = MatrixTuple::scalars(&[c(2.0), c(3.0)]).unwrap();
        assert_eq!(eval_poly(&g, &s).unwrap()[(0, 0)], c(5.0));
        assert!(eval_poly(&g, &MatrixTuple::zeros(1, 3)).is_err());
    }

    #[test]
    fn eval_poly_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..200 {
            let d = 1 + trial % 3;
            let n = 1 + trial % 3;
            let words = enumerate_words_upto(d, 4);
            let terms: Vec<(Word, C64)> = (0..rng.random_range(1..=10))
                .map(|_| (words[rng.random_range(0..words.len())].clone(), C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                .collect();
            let f = FreeSeries::from_terms(d, 4, terms).unwrap();
            let x = MatrixTuple::new((0..d).map(|_| random_matrix(&mut rng, n, 1.0)).collect()).unwrap();
            let expected = brute_eval(&f, &x);
            assert!((eval_poly(&f, &x).unwrap() - &expected).norm() < 1e-12);
            // Per-term fallback.
            assert!((eval_poly_with_budget(&f, &x, 0).unwrap() - &expected).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_evaluation_matches_sparse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = FreeSeries::geometric(2, 5).partial_sum(5).unwrap();
        let sparse = FreeSeries::from_terms(2, 5, g.terms().unwrap()).unwrap();
        let x = MatrixTuple::new(vec![random_matrix(&mut rng, 3, 0.4), random_matrix(&mut rng, 3, 0.4)]).unwrap();
        assert!((eval_poly(&g, &x).unwrap() - eval_poly(&sparse, &x).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn eval_series_examples() {
        let f = FreeSeries::inverse_factorial(2, 10);
        let r = eval_series(&f, &MatrixTuple::zeros(1, 2), 1e-12).unwrap();
        assert_eq!(r.value[(0, 0)], c(1.0));
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.degree, 0);

        let g = FreeSeries::geometric(2, 400);
        let x = MatrixTuple::scalars(&[c(0.3), c(0.3)]).unwrap();
        let r = eval_series(&g, &x, 1e-10).unwrap();
        assert!((r.value[(0, 0)] - c(2.5)).norm() <= r.bound);
        assert!(r.bound <= 1e-10);

        let z1 = FreeSeries::variable(2, 3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = MatrixTuple::new(vec![random_matrix(&mut rng, 3, 1.0), random_matrix(&mut rng, 3, 1.0)]).unwrap();
        let r = eval_series(&z1, &y, 1e-12).unwrap();
        assert_eq!(r.value, y.component(1).clone());
        assert!(r.bound < 1e-12);
    }

    #[test]
    fn eval_series_bound_holds_on_grid() {
        let g = FreeSeries::geometric(2, 600);
        for i in 0..=9 {
            for j in 0..=9 {
                let (a, b) = (0.045 * i as f64, 0.045 * j as f64);
                let x = MatrixTuple::scalars(&[c(a), c(b)]).unwrap();
                let r = eval_series(&g, &x, 1e-8).unwrap();
                let exact = 1.0 / (1.0 - a - b);
                assert!((r.value[(0, 0)] - c(exact)).norm() <= r.bound, "({a},{b})");
                assert!(r.bound <= 1e-8);
            }
        }
    }

    #[test]
    fn eval_series_errors() {
        let g = FreeSeries::geometric(2, 30);
        let far = MatrixTuple::scalars(&[c(0.6), c(0.6)]).unwrap();
        assert!(matches!(eval_series(&g, &far, 1e-8), Err(Error::TailNotSummable { .. })));
        let near = MatrixTuple::scalars(&[c(0.45), c(0.45)]).unwrap();
        match eval_series(&g, &near, 1e-8) {
            Err(Error::ToleranceUnreachable { bound, .. }) => assert!(bound > 1e-8 && bound.is_finite()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nc_function_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..200 {
            let d = 1 + trial % 3;
            let words = enumerate_words_upto(d, 4);
            let terms: Vec<(Word, C64)> =
                (0..6).map(|_| (words[rng.random_range(0..words.len())].clone(), C64::new(rng.random_range(-1.0..1.0), 0.0))).collect();
            let f = FreeSeries::from_terms(d, 4, terms).unwrap();
            let (n1, n2) = (1 + trial % 4, 1 + (trial / 4) % 4);
            let x = MatrixTuple::new((0..d).map(|_| random_matrix(&mut rng, n1, 1.0)).collect()).unwrap();
            let y = MatrixTuple::new((0..d).map(|_| random_matrix(&mut rng, n2, 1.0)).collect()).unwrap();
            let lhs = eval_poly(&f, &x.direct_sum(&y).unwrap()).unwrap();
            let rhs = linalg::direct_sum(&eval_poly(&f, &x).unwrap(), &eval_poly(&f, &y).unwrap());
            assert!((lhs - rhs).norm() <= 1e-10);
            let s = random_matrix(&mut rng, n1, 1.0) + identity(n1) * c(2.0);
            let cond = condition_number(&s);
            let fx = eval_poly(&f, &x).unwrap();
            let lhs = eval_poly(&f, &x.similarity(&s, DEFAULT_SIMILARITY_COND_CAP).unwrap()).unwrap();
            let rhs = s.clone().try_inverse().unwrap() * fx * &s;
            assert!((lhs - rhs).norm() <= 1e-8 * cond);
        }
    }

    #[test]
    fn similarity_and_direct_sum_examples() {
        let a = MatrixTuple::scalars(&[c(2.0)]).unwrap();
        let b = MatrixTuple::scalars(&[c(3.0)]).unwrap();
        assert_eq!(a.direct_sum(&b).unwrap().component(1), &real(2, &[2.0, 0.0, 0.0, 3.0]));
        let x = MatrixTuple::new(vec![real(2, &[1.0, 2.0, 3.0, 4.0])]).unwrap();
        assert_eq!(x.similarity(&identity(2), 1e8).unwrap(), x);
        let singular = real(2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(x.similarity(&singular, 1e8), Err(Error::SingularSimilarity { .. })));
        let y = MatrixTuple::new(vec![real(2, &[0.5, 0.0, 0.0, 0.1])]).unwrap();
        assert!((x.direct_sum(&y).unwrap().row_norm() - x.row_norm().max(y.row_norm())).abs() < 1e-12);
    }

    #[test]
    fn tuple_file_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = MatrixTuple::new(vec![random_matrix(&mut rng, 3, 1.0), random_matrix(&mut rng, 3, 1e-5)]).unwrap();
        let text = x.write();
        assert_eq!(MatrixTuple::parse(&text).unwrap(), x);
        assert_eq!(parse_complex("1.5-2i"), Some(C64::new(1.5, -2.0)));
        assert_eq!(parse_complex("-1e-3+4e+2i"), Some(C64::new(-1e-3, 400.0)));
        assert_eq!(parse_complex("2"), Some(c(2.0)));
        assert_eq!(parse_complex("-i"), Some(C64::new(0.0, -1.0)));
        assert!(MatrixTuple::parse("#nctuple n=2 d=1\n1,2\n").is_err());
    }
}
