//! Linear (recognizable) representations of free series.
//!
//! A representation stores matrices `M_1..M_d` of size `s×s`, a vector `v`
//! and a row vector `u` split into blocks, each carrying optional per-degree
//! weights:
//!
//! ```text
//! f̂_ω = Σ_b w_b(|ω|) · u_b* (M_{i1} ⋯ M_{iℓ} v)_b
//! ```
//!
//! Every `M_j` preserves the block decomposition. This is what lets series
//! with `d^ℓ` nonzero coefficients per degree (the geometric series, `1/|ω|!`)
//! be evaluated and normed at degrees far beyond anything a
//! coefficient map can hold.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::freemonoid::{enumerate_words, Word};
use crate::linalg::{c, zero};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct RepBlock {
    pub start: usize,
    pub len: usize,
    /// Weight per degree; `None` means all ones.
    pub weights: Option<Vec<C64>>,
}

impl RepBlock {
    pub fn weight(&self, degree: usize) -> C64 {
        match &self.weights {
            None => c(1.0),
            Some(w) => w.get(degree).copied().unwrap_or(c(0.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRep {
    mats: Vec<CMatrix>,
    u: CVector,
    v: CVector,
    blocks: Vec<RepBlock>,
}

impl LinearRep {
    pub fn new(u: CVector, mats: Vec<CMatrix>, v: CVector) -> Result<Self> {
        let s = u.len();
        if v.len() != s || mats.iter().any(|m| m.shape() != (s, s)) || mats.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "linear representation: u has length {s}, v has length {}, {} matrices",
                v.len(),
                mats.len()
            )));
        }
        Ok(LinearRep { mats, u, v, blocks: vec![RepBlock { start: 0, len: s, weights: None }] })
    }

    /// Representation with an explicit block layout. Each `M_j` must map
    /// every block into itself.
    pub fn with_blocks(u: CVector, mats: Vec<CMatrix>, v: CVector, blocks: Vec<RepBlock>) -> Result<Self> {
        let mut rep = LinearRep::new(u, mats, v)?;
        let mut next = 0;
        for b in &blocks {
            if b.start != next {
                return Err(Error::InvalidArgument("blocks must tile the state space in order".into()));
            }
            next += b.len;
        }
        if next != rep.dim() {
            return Err(Error::InvalidArgument("blocks do not cover the state space".into()));
        }
        for m in &rep.mats {
            for (i, bi) in blocks.iter().enumerate() {
                for (j, bj) in blocks.iter().enumerate() {
                    if i != j && m.view((bi.start, bj.start), (bi.len, bj.len)).iter().any(|z| *z != c(0.0)) {
                        return Err(Error::InvalidArgument("matrices must be block diagonal".into()));
                    }
                }
            }
        }
        rep.blocks = blocks;
        Ok(rep)
    }

    pub fn alphabet(&self) -> usize {
        self.mats.len()
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn u(&self) -> &CVector {
        &self.u
    }

    pub fn v(&self) -> &CVector {
        &self.v
    }

    pub fn blocks(&self) -> &[RepBlock] {
        &self.blocks
    }

    pub fn is_unweighted(&self) -> bool {
        self.blocks.iter().all(|b| b.weights.is_none())
    }

    /// Effective left vector at a degree, `U_ℓ` with `f̂_ω = U_ℓ* M^ω v`.
    pub fn u_at(&self, degree: usize) -> CVector {
        let mut out = self.u.clone();
        for b in &self.blocks {
            let w = b.weight(degree).conj();
            if w != c(1.0) {
                for i in b.start..b.start + b.len {
                    out[i] *= w;
                }
            }
        }
        out
    }

    pub fn coefficient(&self, word: &Word) -> C64 {
        let mut x = self.v.clone();
        let letters: Vec<usize> = word.letters().collect();
        for &j in letters.iter().rev() {
            x = &self.mats[j - 1] * x;
        }
        self.u_at(word.len()).dotc(&x)
    }

    /// `√(Σ_{|ω|=ℓ} |f̂_ω|²)` for `ℓ = 0..=upto`, via the Gram recursion
    /// `G_{ℓ+1} = Σ_j M_j G_ℓ M_j*`, `‖f_ℓ‖² = U_ℓ* G_ℓ U_ℓ`.
    pub fn homogeneous_norms(&self, upto: usize) -> Vec<f64> {
        let mut gram = &self.v * self.v.adjoint();
        let mut out = Vec::with_capacity(upto + 1);
        for degree in 0..=upto {
            let u = self.u_at(degree);
            let val = (u.adjoint() * &gram * &u)[(0, 0)].re;
            out.push(val.max(0.0).sqrt());
            if degree < upto {
                let mut next = zero(self.dim(), self.dim());
                for m in &self.mats {
                    next += m * &gram * m.adjoint();
                }
                gram = next;
            }
        }
        out
    }

    /// Block union: the representation of the sum.
    pub fn direct_sum(&self, other: &LinearRep) -> Result<LinearRep> {
        if self.alphabet() != other.alphabet() {
            return Err(Error::AlphabetMismatch { left: self.alphabet(), right: other.alphabet() });
        }
        let s = self.dim();
        let mats = self.mats.iter().zip(&other.mats).map(|(a, b)| crate::linalg::direct_sum(a, b)).collect();
        let u = stack(&self.u, &other.u);
        let v = stack(&self.v, &other.v);
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().map(|b| RepBlock { start: b.start + s, ..b.clone() }));
        Ok(LinearRep { mats, u, v, blocks })
    }

    /// Cauchy-product representation for unweighted operands:
    /// `M_j = [[F_j, v_f u_g* G_j], [0, G_j]]`, `u = (u_f; 0)`,
    /// `v = ((u_g* v_g) v_f; v_g)`.
    pub fn product(&self, other: &LinearRep) -> Option<LinearRep> {
        if !self.is_unweighted() || !other.is_unweighted() || self.alphabet() != other.alphabet() {
            return None;
        }
        let (sf, sg) = (self.dim(), other.dim());
        let s = sf + sg;
        let coupling = &self.v * other.u.adjoint();
        let mats = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(f, g)| {
                let mut m = zero(s, s);
                m.view_mut((0, 0), (sf, sf)).copy_from(f);
                m.view_mut((sf, sf), (sg, sg)).copy_from(g);
                m.view_mut((0, sf), (sf, sg)).copy_from(&(&coupling * g));
                m
            })
            .collect();
        let g0 = other.u.dotc(&other.v);
        let u = stack(&self.u, &CVector::zeros(sg));
        let v = stack(&(&self.v * g0), &other.v);
        Some(LinearRep { mats, u, v, blocks: vec![RepBlock { start: 0, len: s, weights: None }] })
    }

    pub fn scale_matrices(&self, r: f64) -> LinearRep {
        let mut out = self.clone();
        for m in out.mats.iter_mut() {
            *m *= c(r);
        }
        out
    }

    pub fn scale_output(&self, k: C64) -> LinearRep {
        let mut out = self.clone();
        out.v *= k;
        out
    }

    /// Multiply every block's degree-`ℓ` weight by `factor(ℓ)` for `ℓ ≤ upto`;
    /// weights above `upto` become zero.
    pub fn reweight(&self, upto: usize, factor: impl Fn(usize) -> C64) -> LinearRep {
        let mut out = self.clone();
        for b in out.blocks.iter_mut() {
            let w: Vec<C64> = (0..=upto).map(|l| b.weight(l) * factor(l)).collect();
            b.weights = Some(w);
        }
        out
    }

    /// Prefix-trie representation of a polynomial: states are the prefixes of
    /// the support, `(M_j)_{p, pj} = 1`, `u = e_∅`, `v_p = f̂_p`.
    pub fn from_polynomial(d: usize, terms: &BTreeMap<Word, C64>) -> LinearRep {
        let mut states: BTreeMap<Word, usize> = BTreeMap::new();
        states.insert(Word::empty(d), 0);
        for w in terms.keys() {
            let letters: Vec<usize> = w.letters().collect();
            let mut p = Word::empty(d);
            for &j in &letters {
                p = p.push(j).expect("letters validated");
                let next = states.len();
                states.entry(p.clone()).or_insert(next);
            }
        }
        let s = states.len();
        let mut mats = vec![zero(s, s); d];
        for (w, &idx) in &states {
            if let (Some(parent), Some(j)) = (w.prefix(), w.last()) {
                mats[j - 1][(states[&parent], idx)] = c(1.0);
            }
        }
        let mut u = CVector::zeros(s);
        u[0] = c(1.0);
        let mut v = CVector::zeros(s);
        for (w, coef) in terms {
            v[states[w]] = *coef;
        }
        LinearRep { mats, u, v, blocks: vec![RepBlock { start: 0, len: s, weights: None }] }
    }

    /// All nonzero coefficients up to `cutoff`, refusing when more than
    /// `budget` words would have to be visited.
    pub fn materialize(&self, cutoff: usize, budget: usize) -> Result<BTreeMap<Word, C64>> {
        let d = self.alphabet();
        let mut total = 0usize;
        for l in 0..=cutoff {
            total = total.saturating_add(d.saturating_pow(l as u32));
        }
        if total > budget {
            return Err(Error::Unsupported(format!(
                "materializing {total} coefficients exceeds budget {budget}"
            )));
        }
        let mut out = BTreeMap::new();
        // Level ℓ holds M^ω v for all |ω| = ℓ in lexicographic order; prepending
        // a letter j to the level below gives the block of words starting with j.
        let mut level: Vec<CVector> = vec![self.v.clone()];
        for l in 0..=cutoff {
            let u = self.u_at(l);
            let words = enumerate_words(d, l);
            for (w, x) in words.into_iter().zip(&level) {
                let coef = u.dotc(x);
                if coef != c(0.0) {
                    out.insert(w, coef);
                }
            }
            if l < cutoff {
                let mut next = Vec::with_capacity(level.len() * d);
                for m in &self.mats {
                    for x in &level {
                        next.push(m * x);
                    }
                }
                level = next;
            }
        }
        Ok(out)
    }
}

fn stack(a: &CVector, b: &CVector) -> CVector {
    CVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}
