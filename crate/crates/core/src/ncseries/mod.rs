//! Truncated free formal power series `f = Σ_ω f̂_ω z^ω`.
//!
//! Coefficients up to a cutoff degree are stored either as a sparse map keyed
//! by word or as a [`LinearRep`]. Degrees above the cutoff are summarized by an
//! optional [`TailBound`] on homogeneous norms, which is what certified
//! evaluation and radius bookkeeping consume.

mod io;
pub mod linear;
pub mod tail;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::freemonoid::Word;
use crate::linalg::c;
use crate::C64;

pub use io::{parse_series, write_series};
pub use linear::{LinearRep, RepBlock};
pub use tail::{Envelope, TailBound};

use tail::GlobalEnvelope;

/// Roots `(Σ|f̂_ω|²)^{1/2ℓ}` below this are treated as zero by the radius estimator.
pub const RADIUS_ROOT_FLOOR: f64 = 1e-15;

/// Largest number of words a linear representation may be expanded into when
/// an operation has no structured route.
pub const MATERIALIZE_BUDGET: usize = 1 << 21;

#[derive(Debug, Clone)]
pub enum Coefficients {
    Sparse(BTreeMap<Word, C64>),
    Linear(LinearRep),
}

#[derive(Debug, Clone)]
pub struct FreeSeries {
    d: usize,
    cutoff: usize,
    coeffs: Coefficients,
    tail: Option<TailBound>,
    norms: OnceLock<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusEstimate {
    /// `+∞` for (numerically) entire windows.
    pub radius: f64,
    pub window: (usize, usize),
    /// Degree attaining the maximal root, if any root was above the floor.
    pub argmax: Option<usize>,
}

impl FreeSeries {
    fn build(d: usize, cutoff: usize, coeffs: Coefficients, tail: Option<TailBound>) -> Self {
        FreeSeries { d, cutoff, coeffs, tail, norms: OnceLock::new() }
    }

    /// Sparse series from `(word, coefficient)` pairs. Repeated words add up;
    /// zero coefficients are dropped. The tail defaults to exactly zero.
    pub fn from_terms(d: usize, cutoff: usize, terms: impl IntoIterator<Item = (Word, C64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("alphabet size must be positive".into()));
        }
        let mut map: BTreeMap<Word, C64> = BTreeMap::new();
        for (w, x) in terms {
            if w.alphabet() != d {
                return Err(Error::AlphabetMismatch { left: d, right: w.alphabet() });
            }
            if w.len() > cutoff {
                return Err(Error::DegreeBeyondCutoff { degree: w.len(), cutoff });
            }
            *map.entry(w).or_insert(c(0.0)) += x;
        }
        map.retain(|_, x| *x != c(0.0));
        Ok(Self::build(d, cutoff, Coefficients::Sparse(map), Some(TailBound::zero())))
    }

    /// Convenience for tests and examples: terms given as encoded words with real coefficients.
    pub fn polynomial(d: usize, terms: &[(&str, f64)]) -> Result<Self> {
        let parsed: Result<Vec<(Word, C64)>> =
            terms.iter().map(|(w, x)| Ok((Word::parse(w, d)?, c(*x)))).collect();
        let parsed = parsed?;
        let cutoff = parsed.iter().map(|(w, _)| w.len()).max().unwrap_or(0);
        Self::from_terms(d, cutoff, parsed)
    }

    pub fn zero(d: usize, cutoff: usize) -> Self {
        Self::build(d, cutoff, Coefficients::Sparse(BTreeMap::new()), Some(TailBound::zero()))
    }

    pub fn constant(d: usize, cutoff: usize, value: C64) -> Self {
        Self::from_terms(d, cutoff, [(Word::empty(d), value)]).expect("valid constant")
    }

    pub fn one(d: usize, cutoff: usize) -> Self {
        Self::constant(d, cutoff, c(1.0))
    }

    /// The coordinate `z_j`.
    pub fn variable(d: usize, cutoff: usize, j: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::DegreeBeyondCutoff { degree: 1, cutoff });
        }
        Self::from_terms(d, cutoff, [(Word::letter(j, d)?, c(1.0))])
    }

    pub fn from_linear(d: usize, cutoff: usize, rep: LinearRep, tail: Option<TailBound>) -> Result<Self> {
        if rep.alphabet() != d {
            return Err(Error::AlphabetMismatch { left: d, right: rep.alphabet() });
        }
        if let Some(t) = &tail {
            t.validate()?;
        }
        Ok(Self::build(d, cutoff, Coefficients::Linear(rep), tail))
    }

    /// The free geometric series `Σ_ω z^ω` (every coefficient one), whose
    /// homogeneous norms are exactly `d^{ℓ/2}`.
    pub fn geometric(d: usize, cutoff: usize) -> Self {
        let one = crate::CMatrix::from_element(1, 1, c(1.0));
        let vec1 = crate::CVector::from_element(1, c(1.0));
        let rep = LinearRep::new(vec1.clone(), vec![one; d], vec1).expect("valid representation");
        let tail = TailBound::envelope(Envelope::Geometric { scale: 1.0, ratio: (d as f64).sqrt() });
        Self::build(d, cutoff, Coefficients::Linear(rep), Some(tail))
    }

    /// The entire series with `f̂_ω = 1/|ω|!`; homogeneous norms `d^{ℓ/2}/ℓ!`.
    pub fn inverse_factorial(d: usize, cutoff: usize) -> Self {
        let g = Self::geometric(d, cutoff);
        let Coefficients::Linear(rep) = &g.coeffs else { unreachable!() };
        let mut inv = 1.0;
        let weights: Vec<f64> = (0..=cutoff)
            .map(|l| {
                if l > 0 {
                    inv /= l as f64;
                }
                inv
            })
            .collect();
        let rep = rep.reweight(cutoff, |l| c(weights[l]));
        let tail = TailBound::envelope(Envelope::Factorial { scale: 1.0, base: (d as f64).sqrt() });
        Self::build(d, cutoff, Coefficients::Linear(rep), Some(tail))
    }

    pub fn with_tail(mut self, tail: Option<TailBound>) -> Result<Self> {
        if let Some(t) = &tail {
            t.validate()?;
        }
        self.tail = tail;
        Ok(self)
    }

    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn tail(&self) -> Option<&TailBound> {
        self.tail.as_ref()
    }

    /// Exact free polynomial: the tail is known to vanish.
    pub fn is_polynomial(&self) -> bool {
        self.tail.as_ref().is_some_and(TailBound::is_zero)
    }

    pub fn coeff(&self, word: &Word) -> C64 {
        if word.alphabet() != self.d || word.len() > self.cutoff {
            return c(0.0);
        }
        match &self.coeffs {
            Coefficients::Sparse(map) => map.get(word).copied().unwrap_or(c(0.0)),
            Coefficients::Linear(rep) => rep.coefficient(word),
        }
    }

    /// Nonzero coefficients up to the cutoff. Linear representations are
    /// expanded, subject to [`MATERIALIZE_BUDGET`].
    pub fn terms(&self) -> Result<BTreeMap<Word, C64>> {
        match &self.coeffs {
            Coefficients::Sparse(map) => Ok(map.clone()),
            Coefficients::Linear(rep) => rep.materialize(self.cutoff, MATERIALIZE_BUDGET),
        }
    }

    /// Homogeneous norms for degrees `0..=cutoff`.
    pub fn homogeneous_norms(&self) -> &[f64] {
        self.norms.get_or_init(|| match &self.coeffs {
            Coefficients::Sparse(map) => {
                let mut acc = vec![0.0; self.cutoff + 1];
                for (w, x) in map {
                    acc[w.len()] += x.norm_sqr();
                }
                acc.into_iter().map(f64::sqrt).collect()
            }
            Coefficients::Linear(rep) => rep.homogeneous_norms(self.cutoff),
        })
    }

    /// `√(Σ_{|ω|=ℓ} |f̂_ω|²)`; beyond the cutoff the tail bound is returned.
    pub fn homogeneous_norm(&self, degree: usize) -> Result<f64> {
        if degree <= self.cutoff {
            return Ok(self.homogeneous_norms()[degree]);
        }
        self.tail
            .as_ref()
            .and_then(|t| t.at(self.cutoff, degree))
            .ok_or(Error::MissingTailBound { degree })
    }

    /// Highest degree with a nonzero homogeneous part (within the cutoff).
    pub fn degree(&self) -> Option<usize> {
        self.homogeneous_norms().iter().rposition(|&x| x > 0.0)
    }

    /// Cauchy–Hadamard estimate `1 / max_{ℓ∈window} (Σ_{|ω|=ℓ}|f̂_ω|²)^{1/2ℓ}`.
    ///
    /// The limsup over all degrees is replaced by a maximum over a finite
    /// window, which is a heuristic: it is exact for series whose roots are
    /// eventually monotone and says nothing certified otherwise.
    pub fn radius_estimate(&self, window: (usize, usize)) -> Result<RadiusEstimate> {
        let (lo, hi) = window;
        if lo > hi {
            return Err(Error::EmptyWindow);
        }
        if hi > self.cutoff {
            return Err(Error::DegreeBeyondCutoff { degree: hi, cutoff: self.cutoff });
        }
        // A known-zero tail makes the limsup exactly zero.
        if self.is_polynomial() {
            return Ok(RadiusEstimate { radius: f64::INFINITY, window, argmax: None });
        }
        let norms = self.homogeneous_norms();
        let mut best = 0.0;
        let mut argmax = None;
        for l in lo.max(1)..=hi {
            let root = if norms[l] == 0.0 { 0.0 } else { (norms[l].ln() / l as f64).exp() };
            if root > best {
                best = root;
                argmax = Some(l);
            }
        }
        if best < RADIUS_ROOT_FLOOR {
            return Ok(RadiusEstimate { radius: f64::INFINITY, window, argmax: None });
        }
        Ok(RadiusEstimate { radius: 1.0 / best, window, argmax })
    }

    /// Default window: the top half of the available degrees.
    pub fn default_window(&self) -> (usize, usize) {
        (self.cutoff.div_ceil(2).max(1).min(self.cutoff), self.cutoff)
    }

    fn check_alphabet(&self, other: &FreeSeries) -> Result<()> {
        if self.d != other.d {
            return Err(Error::AlphabetMismatch { left: self.d, right: other.d });
        }
        Ok(())
    }

    fn as_linear(&self) -> LinearRep {
        match &self.coeffs {
            Coefficients::Linear(rep) => rep.clone(),
            Coefficients::Sparse(map) => LinearRep::from_polynomial(self.d, map),
        }
    }

    /// Norm bound at any degree: exact up to the cutoff, tail afterwards.
    fn norm_bound(&self, degree: usize) -> Option<f64> {
        self.homogeneous_norm(degree).ok()
    }

    /// Last degree at which [`Self::norm_bound`] is known without the envelope.
    fn explicit_horizon(&self) -> usize {
        match &self.tail {
            Some(t) => t.horizon(self.cutoff),
            None => self.cutoff,
        }
    }

    fn global_envelope(&self) -> Option<GlobalEnvelope> {
        let tail = self.tail.as_ref()?;
        let env = tail.envelope?;
        let h = self.explicit_horizon();
        let values: Vec<f64> = (0..=h).map(|l| self.norm_bound(l).unwrap_or(0.0)).collect();
        Some(GlobalEnvelope::from_profile(&values, env))
    }

    /// Degree up to which the coefficients are known exactly: unbounded for
    /// polynomials, the cutoff otherwise.
    fn known_through(&self) -> usize {
        if self.is_polynomial() {
            usize::MAX
        } else {
            self.cutoff
        }
    }

    /// Cutoff of a sum or product. Truncated operands impose their cutoff;
    /// two exact polynomials keep every degree they can produce.
    fn combined_cutoff(&self, other: &FreeSeries, exact: usize) -> usize {
        match self.known_through().min(other.known_through()) {
            usize::MAX => exact,
            k => k,
        }
    }

    pub fn add(&self, other: &FreeSeries) -> Result<FreeSeries> {
        self.check_alphabet(other)?;
        let cutoff = self.combined_cutoff(other, self.cutoff.max(other.cutoff));
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coefficients::Sparse(a), Coefficients::Sparse(b)) => {
                let mut map: BTreeMap<Word, C64> = a.iter().filter(|(w, _)| w.len() <= cutoff).map(|(w, x)| (w.clone(), *x)).collect();
                for (w, x) in b.iter().filter(|(w, _)| w.len() <= cutoff) {
                    *map.entry(w.clone()).or_insert(c(0.0)) += x;
                }
                map.retain(|_, x| *x != c(0.0));
                Coefficients::Sparse(map)
            }
            _ => Coefficients::Linear(self.as_linear().direct_sum(&other.as_linear())?),
        };
        let tail = match (&self.tail, &other.tail) {
            (Some(_), Some(_)) => {
                let both = [self, other];
                let horizon = self.explicit_horizon().max(other.explicit_horizon());
                let mut table = Vec::new();
                let mut complete = true;
                for l in cutoff + 1..=horizon {
                    let vals: Option<Vec<f64>> = both.iter().map(|s| s.norm_bound(l)).collect();
                    match vals {
                        Some(v) => table.push(v.iter().sum()),
                        None => {
                            complete = false;
                            break;
                        }
                    }
                }
                let envelope = match (complete, self.tail.as_ref().and_then(|t| t.envelope), other.tail.as_ref().and_then(|t| t.envelope)) {
                    (true, Some(a), Some(b)) => Some(a.add(&b)),
                    _ => None,
                };
                Some(TailBound { table, envelope })
            }
            _ => None,
        };
        Ok(Self::build(self.d, cutoff, coeffs, tail))
    }

    pub fn scale(&self, k: C64) -> FreeSeries {
        let coeffs = match &self.coeffs {
            Coefficients::Sparse(map) => {
                let mut out: BTreeMap<Word, C64> = map.iter().map(|(w, x)| (w.clone(), x * k)).collect();
                out.retain(|_, x| *x != c(0.0));
                Coefficients::Sparse(out)
            }
            Coefficients::Linear(rep) => Coefficients::Linear(rep.scale_output(k)),
        };
        let tail = self.tail.as_ref().map(|t| t.scale(k.norm()));
        Self::build(self.d, self.cutoff, coeffs, tail)
    }

    pub fn neg(&self) -> FreeSeries {
        self.scale(c(-1.0))
    }

    pub fn sub(&self, other: &FreeSeries) -> Result<FreeSeries> {
        self.add(&other.neg())
    }

    /// Cauchy product `(fg)̂_ω = Σ_{αβ=ω} f̂_α ĝ_β`, truncated at the common cutoff.
    pub fn mul(&self, other: &FreeSeries) -> Result<FreeSeries> {
        self.check_alphabet(other)?;
        let cutoff = self.combined_cutoff(other, self.cutoff + other.cutoff);
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coefficients::Sparse(a), Coefficients::Sparse(b)) => Coefficients::Sparse(sparse_product(a, b, cutoff)),
            _ => {
                let (fa, fb) = (self.as_linear(), other.as_linear());
                match fa.product(&fb) {
                    Some(rep) => Coefficients::Linear(rep),
                    None => {
                        let a = self.truncated_terms(cutoff)?;
                        let b = other.truncated_terms(cutoff)?;
                        Coefficients::Sparse(sparse_product(&a, &b, cutoff))
                    }
                }
            }
        };
        let tail = self.product_tail(other, cutoff);
        Ok(Self::build(self.d, cutoff, coeffs, tail))
    }

    fn truncated_terms(&self, cutoff: usize) -> Result<BTreeMap<Word, C64>> {
        match &self.coeffs {
            Coefficients::Sparse(map) => Ok(map.iter().filter(|(w, _)| w.len() <= cutoff).map(|(w, x)| (w.clone(), *x)).collect()),
            Coefficients::Linear(rep) => rep.materialize(cutoff, MATERIALIZE_BUDGET),
        }
    }

    fn product_tail(&self, other: &FreeSeries, cutoff: usize) -> Option<TailBound> {
        let (ta, tb) = (self.tail.as_ref()?, other.tail.as_ref()?);
        let ga = self.global_envelope();
        let gb = other.global_envelope();
        let envelope = match (&ga, &gb) {
            (Some(a), Some(b)) => a.convolve(b),
            _ => None,
        };
        let both_finite = matches!((&ga, &gb), (Some(GlobalEnvelope::Finite(_)), Some(GlobalEnvelope::Finite(_))));
        let horizon = if both_finite {
            self.explicit_horizon() + other.explicit_horizon()
        } else if ta.envelope.is_some() && tb.envelope.is_some() {
            self.explicit_horizon().max(other.explicit_horizon())
        } else {
            self.explicit_horizon().min(other.explicit_horizon())
        };
        let mut table = Vec::new();
        let mut complete = true;
        'outer: for l in cutoff + 1..=horizon {
            let mut total = 0.0;
            for a in 0..=l {
                match (self.norm_bound(a), other.norm_bound(l - a)) {
                    (Some(x), Some(y)) => total += x * y,
                    _ => {
                        complete = false;
                        break 'outer;
                    }
                }
            }
            table.push(total);
        }
        let envelope = if !complete {
            None
        } else if both_finite {
            Some(Envelope::ZERO)
        } else {
            envelope
        };
        Some(TailBound { table, envelope })
    }

    /// `f(r·)`: coefficient at `ω` becomes `r^{|ω|} f̂_ω`.
    pub fn rescale(&self, r: f64) -> Result<FreeSeries> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("rescaling factor must be positive, got {r}")));
        }
        let coeffs = match &self.coeffs {
            Coefficients::Sparse(map) => {
                Coefficients::Sparse(map.iter().map(|(w, x)| (w.clone(), x * r.powi(w.len() as i32))).filter(|(_, x)| *x != c(0.0)).collect())
            }
            Coefficients::Linear(rep) => Coefficients::Linear(rep.scale_matrices(r)),
        };
        let tail = self.tail.as_ref().map(|t| t.rescale(self.cutoff, r));
        Ok(Self::build(self.d, self.cutoff, coeffs, tail))
    }

    /// Degrees `≤ n`, as an exact polynomial.
    pub fn partial_sum(&self, n: usize) -> Result<FreeSeries> {
        self.degree_weighted(n, |_| 1.0)
    }

    /// `(1/(n+1)) Σ_{m=0}^{n} partial_sum(f, m)`: the degree-`ℓ` part is
    /// weighted by `(n+1-ℓ)/(n+1)`.
    pub fn cesaro_sum(&self, n: usize) -> Result<FreeSeries> {
        let denom = (n + 1) as f64;
        self.degree_weighted(n, |l| (n + 1 - l) as f64 / denom)
    }

    fn degree_weighted(&self, n: usize, weight: impl Fn(usize) -> f64) -> Result<FreeSeries> {
        if n > self.cutoff {
            return Err(Error::DegreeBeyondCutoff { degree: n, cutoff: self.cutoff });
        }
        let coeffs = match &self.coeffs {
            Coefficients::Sparse(map) => Coefficients::Sparse(
                map.iter()
                    .filter(|(w, _)| w.len() <= n)
                    .map(|(w, x)| (w.clone(), x * weight(w.len())))
                    .filter(|(_, x)| *x != c(0.0))
                    .collect(),
            ),
            Coefficients::Linear(rep) => Coefficients::Linear(rep.reweight(n, |l| c(weight(l)))),
        };
        Ok(Self::build(self.d, n, coeffs, Some(TailBound::zero())))
    }
}

fn sparse_product(a: &BTreeMap<Word, C64>, b: &BTreeMap<Word, C64>, cutoff: usize) -> BTreeMap<Word, C64> {
    let mut out: BTreeMap<Word, C64> = BTreeMap::new();
    for (wa, xa) in a {
        for (wb, xb) in b {
            if wa.len() + wb.len() > cutoff {
                continue;
            }
            let w = wa.concat(wb).expect("alphabets checked");
            *out.entry(w).or_insert(c(0.0)) += xa * xb;
        }
    }
    out.retain(|_, x| *x != c(0.0));
    out
}
