//! Seeded Gaussian ensembles and the strong/trace convergence experiments.
//!
//! Every random matrix is drawn from its own stream, keyed by
//! `(master_seed, n, trial, component)` through a splitmix64 chain, so a
//! trial's data does not depend on which thread runs it or in what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{semicircular_tuple, FockBasis};
use crate::linalg::{self, c, zero};
use crate::nceval::MatrixTuple;
use crate::realization::{realize, EvalOptions, MeroEval, RationalExpr, Realization};
use crate::{CMatrix, C64};

/// Names the seed derivation together with the Gaussian transform.
pub const GENERATOR_TAG: &str = "chacha8-boxmuller-v1";

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one random matrix. Component 0 is reserved for per-trial data
/// that is not a tuple component.
pub fn derive_seed(master: u64, n: u64, trial: u64, component: u64) -> u64 {
    [n, trial, component].iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Standard normal variates by Box–Muller on a ChaCha8 stream.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `(0, 1]` with 53 random bits.
    fn uniform(&mut self) -> f64 {
        1.0 - (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..k`.
    pub fn below(&mut self, k: usize) -> usize {
        (((1.0 - self.uniform()) * k as f64) as usize).min(k.saturating_sub(1))
    }

    pub fn standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.uniform().ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * self.uniform();
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal(&mut self, variance: f64) -> f64 {
        self.standard() * variance.sqrt()
    }

    /// Complex Gaussian with `E|z|² = variance`.
    pub fn complex(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        C64::new(self.standard() * s, self.standard() * s)
    }

    pub fn complex_matrix(&mut self, rows: usize, cols: usize, variance: f64) -> CMatrix {
        let mut m = zero(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.complex(variance);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub d: usize,
    pub variance: f64,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// `SGRM(n, 1/n)`.
    pub fn sgrm(n: usize, d: usize, master_seed: u64) -> Self {
        EnsembleSpec { n, d, variance: 1.0 / n as f64, master_seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("ensemble needs n ≥ 1, d ≥ 1, variance > 0; got {self:?}")));
        }
        Ok(())
    }
}

/// Hermitian matrix with real `N(0, v)` diagonal and complex off-diagonal
/// entries whose real and imaginary parts are independent `N(0, v/2)`.
pub fn sample_sgrm_component(spec: &EnsembleSpec, trial: u64, component: u64) -> CMatrix {
    let n = spec.n;
    let mut g = GaussianStream::new(derive_seed(spec.master_seed, n as u64, trial, component));
    let mut h = zero(n, n);
    for i in 0..n {
        h[(i, i)] = c(g.normal(spec.variance));
        for j in i + 1..n {
            let z = g.complex(spec.variance);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

pub fn sample_sgrm(spec: &EnsembleSpec, trial: u64) -> CMatrix {
    sample_sgrm_component(spec, trial, 1)
}

/// `d` independent draws, components `1..=d`.
pub fn sample_tuple(spec: &EnsembleSpec, trial: u64) -> Result<MatrixTuple> {
    spec.validate()?;
    MatrixTuple::new((1..=spec.d as u64).map(|j| sample_sgrm_component(spec, trial, j)).collect())
}

/// `(‖‖T‖²I − T*T‖, ‖T‖², ‖‖T‖²I − T*T‖ < ‖T‖²)`: the last entry holds
/// exactly when `T` is invertible.
pub fn invertibility_margin(t: &CMatrix) -> (f64, f64, bool) {
    let norm_sq = linalg::operator_norm(t).powi(2);
    let gram = t.adjoint() * t;
    let shifted = CMatrix::identity(t.ncols(), t.ncols()) * c(norm_sq) - gram;
    let margin = linalg::operator_norm(&shifted);
    (margin, norm_sq, margin < norm_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// Operator norm of `f(X)`.
    Norm,
    /// Real part of the normalized trace `(1/n) tr f(X)`.
    Trace,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub observable: Observable,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub fock_n: usize,
    /// Tuple length; must cover every variable of the expression.
    pub d: usize,
    pub master_seed: u64,
    /// Per-entry variance as a multiple of `1/n`.
    pub variance_scale: f64,
    pub parallel: bool,
    pub eval: EvalOptions,
}

impl ExperimentConfig {
    pub fn new(observable: Observable, n_list: Vec<usize>, trials: usize, fock_n: usize, d: usize, master_seed: u64) -> Self {
        ExperimentConfig { observable, n_list, trials, fock_n, d, master_seed, variance_scale: 1.0, parallel: true, eval: EvalOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: u64,
    pub seed: u64,
    /// `NaN` when the trial fell outside the domain.
    pub value: f64,
    pub reference: f64,
    pub gap: f64,
    pub in_domain: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NSummary {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub sd: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    pub fraction_in_domain: f64,
    /// Mean of the per-trial gaps `|value − reference|`.
    pub mean_gap: f64,
    /// `|mean − reference|`.
    pub gap_of_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub observable: Observable,
    pub reference: f64,
    pub reference_rcond: f64,
    pub fock_n: usize,
    pub generator: &'static str,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<NSummary>,
}

fn observe(out: &MeroEval, observable: Observable) -> f64 {
    match (&out.spectral, observable) {
        (Some(diag), Observable::Norm) => diag.iter().fold(0.0, |a, z| a.max(z.norm())),
        (Some(diag), Observable::Trace) => diag.iter().map(|z| z.re).sum::<f64>() / diag.len() as f64,
        (None, Observable::Norm) => linalg::operator_norm(&out.value),
        (None, Observable::Trace) => out.value.trace().re / out.value.nrows() as f64,
    }
}

/// Value of the expression at the truncated semicircular tuple: operator
/// norm, or the vacuum state `⟨Ω, f(s) Ω⟩`.
pub fn reference_value(real: &Realization, d: usize, fock_n: usize, observable: Observable, opts: &EvalOptions) -> Result<(f64, f64)> {
    let basis = FockBasis::new(d, fock_n)?;
    let s = semicircular_tuple(&basis)?;
    let out = match real.eval_unchecked(&s, opts) {
        Ok(v) if v.domain.in_domain() => v,
        Ok(v) => return Err(Error::ReferenceOutOfDomain { rcond: v.domain.rcond }),
        Err(Error::SingularPencil { rcond }) => return Err(Error::ReferenceOutOfDomain { rcond }),
        Err(e) => return Err(e),
    };
    let value = match observable {
        Observable::Norm => observe(&out, Observable::Norm),
        Observable::Trace => out.value[(0, 0)].re,
    };
    Ok((value, out.domain.rcond))
}

/// Sample `trials` tuples per `n`, evaluate the expression, and compare with
/// the Fock-space reference. Trials outside the domain are recorded with
/// `in_domain = false`. The output is identical for serial and parallel runs.
pub fn run_experiment(expr: &RationalExpr, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.n_list.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one n and one trial".into()));
    }
    if expr.num_vars() > cfg.d {
        return Err(Error::InvalidArgument(format!("expression uses {} variables but d = {}", expr.num_vars(), cfg.d)));
    }
    if let Some(leaf) = expr.leaves().first() {
        if leaf.alphabet() != cfg.d {
            return Err(Error::AlphabetMismatch { left: cfg.d, right: leaf.alphabet() });
        }
    }
    if !(cfg.variance_scale > 0.0 && cfg.variance_scale.is_finite()) {
        return Err(Error::InvalidArgument("variance scale must be positive".into()));
    }
    let real = realize(expr);
    let (reference, reference_rcond) = reference_value(&real, cfg.d, cfg.fock_n, cfg.observable, &cfg.eval)?;

    let jobs: Vec<(usize, u64)> = cfg.n_list.iter().flat_map(|&n| (0..cfg.trials as u64).map(move |t| (n, t))).collect();
    let run = |&(n, trial): &(usize, u64)| -> Result<TrialRecord> {
        let spec = EnsembleSpec { n, d: cfg.d, variance: cfg.variance_scale / n as f64, master_seed: cfg.master_seed };
        let x = sample_tuple(&spec, trial)?;
        let seed = derive_seed(cfg.master_seed, n as u64, trial, 0);
        let (value, in_domain) = match real.eval_unchecked(&x, &cfg.eval) {
            Ok(out) if out.domain.in_domain() => (observe(&out, cfg.observable), true),
            Ok(_) | Err(Error::SingularPencil { .. }) => (f64::NAN, false),
            Err(e) => return Err(e),
        };
        let gap = if in_domain { (value - reference).abs() } else { f64::NAN };
        Ok(TrialRecord { n, trial, seed, value, reference, gap, in_domain })
    };
    let records: Vec<TrialRecord> = if cfg.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };

    let summary = cfg
        .n_list
        .iter()
        .map(|&n| {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
            let ok: Vec<f64> = rows.iter().filter(|r| r.in_domain).map(|r| r.value).collect();
            let k = ok.len() as f64;
            let mean = ok.iter().sum::<f64>() / k;
            let var = if ok.len() > 1 { ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
            let mean_gap = rows.iter().filter(|r| r.in_domain).map(|r| r.gap).sum::<f64>() / k;
            NSummary {
                n,
                trials: rows.len(),
                mean,
                sd: var.sqrt(),
                stderr: (var / k).sqrt(),
                fraction_in_domain: k / rows.len() as f64,
                mean_gap,
                gap_of_mean: (mean - reference).abs(),
            }
        })
        .collect();
    Ok(ExperimentResult { observable: cfg.observable, reference, reference_rcond, fock_n: cfg.fock_n, generator: GENERATOR_TAG, records, summary })
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// `n,trial,seed,value,reference,gap,in_domain` with 17 significant digits.
pub fn records_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("n,trial,seed,value,reference,gap,in_domain\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.n,
            r.trial,
            r.seed,
            fmt_f(r.value),
            fmt_f(r.reference),
            fmt_f(r.gap),
            r.in_domain
        ));
    }
    out
}
