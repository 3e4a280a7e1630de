//! Upper bounds on homogeneous norms beyond a series' cutoff.
//!
//! A [`TailBound`] is an explicit table for the degrees right after the
//! cutoff followed by a closed-form envelope valid for every later degree.
//! Arithmetic on series only ever propagates bounds through the triangle
//! inequality and `‖(fg)_ℓ‖ ≤ Σ_{a+b=ℓ} ‖f_a‖‖g_b‖`; it never invents decay.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Envelope {
    /// `scale · ratio^ℓ`
    Geometric { scale: f64, ratio: f64 },
    /// `scale · base^ℓ / ℓ!`
    Factorial { scale: f64, base: f64 },
}

/// Ratio inflation used when two geometric envelopes share a ratio and the
/// product picks up a polynomial factor `(ℓ+1)`.
const EQUAL_RATIO_INFLATION: f64 = 1e-3;

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

impl Envelope {
    pub const ZERO: Envelope = Envelope::Geometric { scale: 0.0, ratio: 0.0 };

    pub fn at(&self, degree: usize) -> f64 {
        match *self {
            Envelope::Geometric { scale, ratio } => {
                if scale == 0.0 {
                    0.0
                } else if degree == 0 {
                    scale
                } else {
                    scale * ratio.powi(degree as i32)
                }
            }
            Envelope::Factorial { scale, base } => {
                if scale == 0.0 {
                    0.0
                } else if degree == 0 {
                    scale
                } else if base == 0.0 {
                    0.0
                } else {
                    scale * (degree as f64 * base.ln() - ln_factorial(degree)).exp()
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Envelope::Geometric { scale, ratio } => scale == 0.0 || ratio == 0.0,
            Envelope::Factorial { scale, base } => scale == 0.0 || base == 0.0,
        }
    }

    pub fn rescale(&self, r: f64) -> Envelope {
        match *self {
            Envelope::Geometric { scale, ratio } => Envelope::Geometric { scale, ratio: ratio * r },
            Envelope::Factorial { scale, base } => Envelope::Factorial { scale, base: base * r },
        }
    }

    /// Envelope dominating the sum of two envelopes.
    pub fn add(&self, other: &Envelope) -> Envelope {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        use Envelope::*;
        match (*self, *other) {
            (Geometric { scale: s1, ratio: q1 }, Geometric { scale: s2, ratio: q2 }) => {
                Geometric { scale: s1 + s2, ratio: q1.max(q2) }
            }
            (Factorial { scale: s1, base: b1 }, Factorial { scale: s2, base: b2 }) => {
                Factorial { scale: s1 + s2, base: b1.max(b2) }
            }
            (Geometric { scale: s, ratio: q }, Factorial { scale: t, base: b })
            | (Factorial { scale: t, base: b }, Geometric { scale: s, ratio: q }) => {
                // b^ℓ/ℓ! ≤ e^{b/q} q^ℓ
                Geometric { scale: s + t * (b / q).exp(), ratio: q }
            }
        }
    }

    /// `Σ_{ℓ > after} weight^ℓ · self(ℓ)` where `weight^ℓ` bounds a second
    /// sequence (`C·weight^ℓ` with the constant applied by the caller).
    /// Returns `None` when the series diverges.
    pub fn weighted_tail_sum(&self, weight: f64, after: usize) -> Option<f64> {
        if self.is_zero() || weight == 0.0 {
            return Some(0.0);
        }
        let start = after + 1;
        match *self {
            Envelope::Geometric { scale, ratio } => {
                let x = ratio * weight;
                if x >= 1.0 {
                    return None;
                }
                Some(scale * x.powi(start as i32) / (1.0 - x))
            }
            Envelope::Factorial { scale, base } => {
                let x = base * weight;
                let first = scale * (start as f64 * x.ln() - ln_factorial(start)).exp();
                // Successive term ratios are x/(ℓ+1), decreasing in ℓ.
                let q = x / (start as f64 + 1.0);
                if q < 1.0 {
                    Some(first / (1.0 - q))
                } else {
                    // Sum terms until the ratio drops below 1/2, then close geometrically.
                    let mut total = 0.0;
                    let mut term = first;
                    let mut l = start;
                    loop {
                        total += term;
                        let ratio = x / (l as f64 + 1.0);
                        term *= ratio;
                        l += 1;
                        if ratio < 0.5 {
                            return Some(total + term / (1.0 - ratio));
                        }
                        if !total.is_finite() {
                            return None;
                        }
                    }
                }
            }
        }
    }
}

/// Bound on `‖f_ℓ‖` for degrees `ℓ > cutoff`: `table[k]` covers degree
/// `cutoff + 1 + k`, the envelope every degree after the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub table: Vec<f64>,
    pub envelope: Option<Envelope>,
}

impl TailBound {
    /// The tail of an exact polynomial.
    pub fn zero() -> Self {
        TailBound { table: Vec::new(), envelope: Some(Envelope::ZERO) }
    }

    pub fn envelope(env: Envelope) -> Self {
        TailBound { table: Vec::new(), envelope: Some(env) }
    }

    pub fn table(values: Vec<f64>) -> Self {
        TailBound { table: values, envelope: None }
    }

    pub fn is_zero(&self) -> bool {
        self.table.iter().all(|&x| x == 0.0) && self.envelope.is_some_and(|e| e.is_zero())
    }

    /// Bound at `degree`, given the owning series' cutoff.
    pub fn at(&self, cutoff: usize, degree: usize) -> Option<f64> {
        if degree <= cutoff {
            return None;
        }
        let k = degree - cutoff - 1;
        match self.table.get(k) {
            Some(&v) => Some(v),
            None => self.envelope.map(|e| e.at(degree)),
        }
    }

    /// Last degree covered by the explicit table.
    pub fn horizon(&self, cutoff: usize) -> usize {
        cutoff + self.table.len()
    }

    pub fn rescale(&self, cutoff: usize, r: f64) -> TailBound {
        let table = self
            .table
            .iter()
            .enumerate()
            .map(|(k, &v)| v * r.powi((cutoff + 1 + k) as i32))
            .collect();
        TailBound { table, envelope: self.envelope.map(|e| e.rescale(r)) }
    }

    pub fn scale(&self, k: f64) -> TailBound {
        let scale_env = |e: Envelope| match e {
            Envelope::Geometric { scale, ratio } => Envelope::Geometric { scale: scale * k, ratio },
            Envelope::Factorial { scale, base } => Envelope::Factorial { scale: scale * k, base },
        };
        TailBound { table: self.table.iter().map(|v| v * k).collect(), envelope: self.envelope.map(scale_env) }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad_env = match self.envelope {
            Some(Envelope::Geometric { scale, ratio }) => !(scale >= 0.0 && ratio >= 0.0 && scale.is_finite() && ratio.is_finite()),
            Some(Envelope::Factorial { scale, base }) => !(scale >= 0.0 && base >= 0.0 && scale.is_finite() && base.is_finite()),
            None => false,
        };
        if bad_env || self.table.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(crate::Error::InvalidArgument("tail bounds must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Bound on `‖f_a‖` valid for every degree `a ≥ 0`.
#[derive(Debug, Clone)]
pub(crate) enum GlobalEnvelope {
    /// Explicit values; zero after the last entry.
    Finite(Vec<f64>),
    Geometric { scale: f64, ratio: f64 },
    Factorial { scale: f64, base: f64 },
}

impl GlobalEnvelope {
    /// Build from explicit values on `0..=horizon` and an envelope valid beyond it.
    pub(crate) fn from_profile(values: &[f64], beyond: Envelope) -> GlobalEnvelope {
        if beyond.is_zero() {
            return GlobalEnvelope::Finite(values.to_vec());
        }
        match beyond {
            Envelope::Geometric { scale, ratio } => {
                let s = values
                    .iter()
                    .enumerate()
                    .map(|(a, &v)| if v == 0.0 { 0.0 } else { v / ratio.powi(a as i32) })
                    .fold(scale, f64::max);
                GlobalEnvelope::Geometric { scale: s, ratio }
            }
            Envelope::Factorial { scale, base } => {
                let s = values
                    .iter()
                    .enumerate()
                    .map(|(a, &v)| {
                        if v == 0.0 {
                            0.0
                        } else {
                            v * (ln_factorial(a) - a as f64 * base.ln()).exp()
                        }
                    })
                    .fold(scale, f64::max);
                GlobalEnvelope::Factorial { scale: s, base }
            }
        }
    }

    /// Envelope for `Σ_{a+b=ℓ} A(a) B(b)`, valid for all `ℓ`. `Finite × Finite`
    /// returns `None`: the product is then a polynomial and its table exact.
    pub(crate) fn convolve(&self, other: &GlobalEnvelope) -> Option<Envelope> {
        use GlobalEnvelope::*;
        match (self, other) {
            (Finite(_), Finite(_)) => None,
            (Finite(vals), g) | (g, Finite(vals)) => Some(match *g {
                Geometric { scale, ratio } => {
                    let k: f64 = vals.iter().enumerate().map(|(a, &v)| v / ratio.powi(a as i32)).sum();
                    Envelope::Geometric { scale: scale * k, ratio }
                }
                Factorial { scale, base } => {
                    // b^{ℓ-a}/(ℓ-a)! ≤ b^{-a} ℓ^a b^ℓ/ℓ! and ℓ^a ≤ C_a 2^ℓ with
                    // C_a = (a/(e ln 2))^a, so the product sits under (2b)^ℓ/ℓ!.
                    let k: f64 = vals
                        .iter()
                        .enumerate()
                        .map(|(a, &v)| {
                            if v == 0.0 {
                                return 0.0;
                            }
                            let ca = if a == 0 {
                                1.0
                            } else {
                                (a as f64 / (std::f64::consts::E * std::f64::consts::LN_2)).powi(a as i32).max(1.0)
                            };
                            v * ca / base.powi(a as i32)
                        })
                        .sum();
                    Envelope::Factorial { scale: scale * k, base: 2.0 * base }
                }
                Finite(_) => unreachable!(),
            }),
            (Geometric { scale: s1, ratio: q1 }, Geometric { scale: s2, ratio: q2 }) => {
                let (hi, lo) = if q1 >= q2 { (*q1, *q2) } else { (*q2, *q1) };
                if hi - lo > EQUAL_RATIO_INFLATION * hi {
                    Some(Envelope::Geometric { scale: s1 * s2 / (1.0 - lo / hi), ratio: hi })
                } else {
                    // (ℓ+1) q^ℓ ≤ max(1, t/(e ln t)) (t q)^ℓ
                    let t = 1.0 + 2.0 * EQUAL_RATIO_INFLATION;
                    let c = (t / (std::f64::consts::E * t.ln())).max(1.0);
                    Some(Envelope::Geometric { scale: s1 * s2 * c, ratio: hi * t })
                }
            }
            (Factorial { scale: s1, base: b1 }, Factorial { scale: s2, base: b2 }) => {
                Some(Envelope::Factorial { scale: s1 * s2, base: b1 + b2 })
            }
            (Geometric { scale: s, ratio: q }, Factorial { scale: t, base: b })
            | (Factorial { scale: t, base: b }, Geometric { scale: s, ratio: q }) => {
                Some(Envelope::Geometric { scale: s * t * (b / q).exp(), ratio: *q })
            }
        }
    }
}
