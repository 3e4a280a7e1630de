//! Subcommand definitions and their mapping onto library operations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde_json::{json, Value};

use freenc::fock::{self, semicircular_matrix, vacuum_moment, FockBasis, DEFAULT_DIM_CAP};
use freenc::freemonoid::Word;
use freenc::hardy::{self, VarietyOptions};
use freenc::linalg;
use freenc::nceval::{eval_series, joint_spectral_radius, parse_complex, MatrixTuple};
use freenc::ncseries::{parse_series, FreeSeries};
use freenc::randmat::{self, ExperimentConfig, Observable};
use freenc::realization::{eval_meromorphic, realize, sampled_agreement, EvalOptions, RationalExpr, DEFAULT_RCOND_THRESHOLD};
use freenc::{Error, Result};

use crate::config::{human, machine, num, parse_f64_list, parse_usize_list};

/// What a command produced: human lines, an optional machine artifact
/// (CSV or text), and the result object for the JSON summary.
pub struct Outcome {
    pub human: Vec<String>,
    pub artifact: Option<String>,
    pub result: Value,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value file with defaults for any flag of this subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable artifact (CSV or tuple file).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary embedding the resolved configuration.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cauchy–Hadamard radius estimate of a series.
    Radius(RadiusArgs),
    /// Certified evaluation of a series, or evaluation of a rational expression, at a tuple.
    Eval(EvalArgs),
    /// Joint spectral radius of a tuple.
    Jsr(JsrArgs),
    /// Agreement of two expressions at a tuple or at random points.
    RealizeCheck(RealizeCheckArgs),
    /// Norm of the truncated semicircular element, or ρ_r of a series.
    FockNorm(FockNormArgs),
    /// Vacuum moment of a word in the semicircular elements.
    Moments(MomentsArgs),
    /// ρ_r(f) over a grid of radii.
    Rho(RhoArgs),
    /// Reproducing identity and norm bound of the Szegő kernel.
    SzegoCheck(SzegoArgs),
    /// Kernel and wandering dimensions of a row multiplier.
    Wandering(WanderingArgs),
    /// Sample points of the variety of a set of polynomials.
    Variety(VarietyArgs),
    /// Check that combinations of generators vanish on their variety.
    Nullstellensatz(NullstellensatzArgs),
    /// Norms of an expression at random matrices against the semicircular reference.
    Strongconv(ExperimentArgs),
    /// Normalized traces of an expression at random matrices against the vacuum state.
    Traceconv(ExperimentArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Radius(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Jsr(a) => &a.common,
            Command::RealizeCheck(a) => &a.common,
            Command::FockNorm(a) => &a.common,
            Command::Moments(a) => &a.common,
            Command::Rho(a) => &a.common,
            Command::SzegoCheck(a) => &a.common,
            Command::Wandering(a) => &a.common,
            Command::Variety(a) => &a.common,
            Command::Nullstellensatz(a) => &a.common,
            Command::Strongconv(a) | Command::Traceconv(a) => &a.common,
        }
    }

    pub fn run(&self) -> Result<Outcome> {
        match self {
            Command::Radius(a) => radius(a),
            Command::Eval(a) => eval(a),
            Command::Jsr(a) => jsr(a),
            Command::RealizeCheck(a) => realize_check(a),
            Command::FockNorm(a) => fock_norm(a),
            Command::Moments(a) => moments(a),
            Command::Rho(a) => rho(a),
            Command::SzegoCheck(a) => szego(a),
            Command::Wandering(a) => wandering(a),
            Command::Variety(a) => variety(a),
            Command::Nullstellensatz(a) => nullstellensatz(a),
            Command::Strongconv(a) => experiment(a, Observable::Norm),
            Command::Traceconv(a) => experiment(a, Observable::Trace),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn load_series(path: &Path) -> Result<FreeSeries> {
    parse_series(&read(path)?)
}

fn load_tuple(path: &Path) -> Result<MatrixTuple> {
    MatrixTuple::parse(&read(path)?)
}

/// Expression text, with `(leaf FILE)` read as a series file.
pub fn parse_expr(text: &str) -> Result<RationalExpr> {
    RationalExpr::parse_with(text, &mut |name| load_series(Path::new(name)))
}

/// A row of polynomials: entries separated by `;`, terms `word:coef`
/// separated by `,`. An empty entry is the zero polynomial. Example:
/// `1:1;1:-1` is `(z1, −z1)`, `e:1;` is `(1, 0)`.
pub fn parse_row(text: &str, d: usize) -> Result<Vec<FreeSeries>> {
    text.split(';')
        .map(|entry| {
            let entry = entry.trim();
            let mut terms = Vec::new();
            for t in entry.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let (w, x) = t.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("term '{t}' is not word:coef")))?;
                let x = parse_complex(x).ok_or_else(|| Error::InvalidArgument(format!("bad coefficient in '{t}'")))?;
                terms.push((Word::parse(w.trim(), d)?, x));
            }
            let cutoff = terms.iter().map(|(w, _)| w.len()).max().unwrap_or(0);
            FreeSeries::from_terms(d, cutoff, terms)
        })
        .collect()
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {x}")))
    }
}

fn basis(d: usize, n: usize, cap: usize) -> Result<FockBasis> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let dim = FockBasis::dim_for(d, n);
    if dim > cap {
        return Err(Error::BasisTooLarge { dim, cap });
    }
    FockBasis::with_cap(d, n, cap)
}

#[derive(Debug, Args)]
pub struct RadiusArgs {
    #[arg(long)]
    pub series: PathBuf,
    /// Degree window `lo:hi`; defaults to `ceil(cutoff/2):cutoff`.
    #[arg(long)]
    pub window: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

fn radius(a: &RadiusArgs) -> Result<Outcome> {
    let f = load_series(&a.series)?;
    let window = match &a.window {
        None => f.default_window(),
        Some(w) => {
            let (lo, hi) = w.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("window '{w}' is not lo:hi")))?;
            let p = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad window '{w}'")));
            (p(lo)?, p(hi)?)
        }
    };
    let est = f.radius_estimate(window)?;
    Ok(Outcome {
        human: vec![format!("R={}", human(est.radius))],
        artifact: None,
        result: json!({ "radius": num(est.radius), "window": [est.window.0, est.window.1], "argmax": est.argmax }),
    })
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "expr", required_unless_present = "expr")]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub expr: Option<String>,
    #[arg(long)]
    pub tuple: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Reciprocal-condition threshold for the domain test.
    #[arg(long, default_value_t = DEFAULT_RCOND_THRESHOLD)]
    pub rcond: f64,
    #[command(flatten)]
    pub common: Common,
}

fn eval(a: &EvalArgs) -> Result<Outcome> {
    positive("tol", a.tol)?;
    let x = load_tuple(&a.tuple)?;
    if let Some(path) = &a.series {
        let f = load_series(path)?;
        let r = eval_series(&f, &x, a.tol)?;
        let value = MatrixTuple::new(vec![r.value.clone()])?;
        return Ok(Outcome {
            human: vec![
                format!("norm={}", human(linalg::operator_norm(&r.value))),
                format!("bound={} degree={}", human(r.bound), r.degree),
            ],
            artifact: Some(value.write()),
            result: json!({
                "bound": num(r.bound), "degree": r.degree, "rounding": num(r.rounding),
                "growth_rate": num(r.growth_rate), "growth_const": num(r.growth_const),
                "norm": num(linalg::operator_norm(&r.value)),
            }),
        });
    }
    let expr = parse_expr(a.expr.as_deref().unwrap_or_default())?;
    let opts = EvalOptions { leaf_tol: a.tol, rcond_threshold: a.rcond };
    let out = eval_meromorphic(&expr, &x, &opts)?;
    let norm = linalg::operator_norm(&out.value);
    Ok(Outcome {
        human: vec![format!("norm={}", human(norm)), format!("rcond={} status={:?}", human(out.domain.rcond), out.domain.status)],
        artifact: Some(MatrixTuple::new(vec![out.value])?.write()),
        result: json!({ "norm": num(norm), "rcond": num(out.domain.rcond), "status": format!("{:?}", out.domain.status), "leaf_bound": num(out.leaf_bound) }),
    })
}

#[derive(Debug, Args)]
pub struct JsrArgs {
    #[arg(long)]
    pub tuple: PathBuf,
    /// Largest power `m` of the adjunction map.
    #[arg(long = "m-max", default_value_t = 1 << 20)]
    pub m_max: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

fn jsr(a: &JsrArgs) -> Result<Outcome> {
    positive("tol", a.tol)?;
    if a.m_max == 0 {
        return Err(Error::InvalidArgument("m-max must be at least 1".into()));
    }
    let x = load_tuple(&a.tuple)?;
    let rep = joint_spectral_radius(&x, a.m_max, a.tol);
    let mut csv = String::from("m,estimate,upper\n");
    for ((m, e), u) in rep.sequence.iter().zip(&rep.upper) {
        csv.push_str(&format!("{m},{},{}\n", machine(*e), machine(*u)));
    }
    Ok(Outcome {
        human: vec![format!("rho={} m={} converged={}", human(rep.estimate), rep.m, rep.converged)],
        artifact: Some(csv),
        result: json!({ "estimate": num(rep.estimate), "m": rep.m, "converged": rep.converged }),
    })
}

#[derive(Debug, Args)]
pub struct RealizeCheckArgs {
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub expr2: String,
    /// Single evaluation point; without it random points are sampled.
    #[arg(long)]
    pub tuple: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Tuple length for random points; defaults to what the expressions need.
    #[arg(long)]
    pub d: Option<usize>,
    /// Random entries have variance `scale²/n`.
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_RCOND_THRESHOLD)]
    pub rcond: f64,
    #[command(flatten)]
    pub common: Common,
}

fn realize_check(a: &RealizeCheckArgs) -> Result<Outcome> {
    positive("tol", a.tol)?;
    positive("scale", a.scale)?;
    let (e1, e2) = (parse_expr(&a.expr)?, parse_expr(&a.expr2)?);
    let (r1, r2) = (realize(&e1), realize(&e2));
    let opts = EvalOptions { leaf_tol: 1e-12, rcond_threshold: a.rcond };
    if let Some(path) = &a.tuple {
        let x = load_tuple(path)?;
        let ag = freenc::realization::representation_agreement(&r1, &r2, &x, a.tol, &opts)?;
        let (line, result) = match &ag {
            freenc::realization::Agreement::NotApplicable { rcond_first, rcond_second } => (
                format!("status=not_applicable rcond1={} rcond2={}", human(*rcond_first), human(*rcond_second)),
                json!({ "status": "not_applicable", "rcond_first": num(*rcond_first), "rcond_second": num(*rcond_second) }),
            ),
            freenc::realization::Agreement::Compared { difference, pass, .. } => (
                format!("status=compared pass={pass} difference={}", human(*difference)),
                json!({ "status": "compared", "pass": pass, "difference": num(*difference) }),
            ),
        };
        return Ok(Outcome { human: vec![line], artifact: None, result });
    }
    let leaf_d = e1.leaves().iter().chain(e2.leaves().iter()).map(|l| l.alphabet()).max().unwrap_or(0);
    let d = a.d.unwrap_or(e1.num_vars().max(e2.num_vars()).max(leaf_d).max(1));
    let s = sampled_agreement(&r1, &r2, d, a.n, a.points, a.scale, a.seed, a.tol, &opts)?;
    // Agreement on samples is evidence, not a proof of an identity; an
    // expression may vanish wherever it is defined without being zero.
    Ok(Outcome {
        human: vec![format!(
            "pass_rate={} passed={} compared={} not_applicable={} max_difference={} evidence=sampled",
            human(s.pass_rate()),
            s.passed,
            s.compared,
            s.not_applicable,
            human(s.max_difference)
        )],
        artifact: None,
        result: json!({ "points": s.points, "passed": s.passed, "compared": s.compared, "not_applicable": s.not_applicable,
                        "pass_rate": num(s.pass_rate()), "max_difference": num(s.max_difference), "evidence": "sampled" }),
    })
}

#[derive(Debug, Args)]
pub struct FockNormArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Truncation degree; a comma list adds the extrapolated trend.
    #[arg(long = "N")]
    pub big_n: String,
    /// Series whose ρ_r is reported instead of the semicircular norm.
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long = "dim-cap", default_value_t = DEFAULT_DIM_CAP)]
    pub dim_cap: usize,
    #[command(flatten)]
    pub common: Common,
}

fn fock_norm(a: &FockNormArgs) -> Result<Outcome> {
    let f = a.series.as_deref().map(load_series).transpose()?;
    let d = f.as_ref().map_or(a.d, |f| f.alphabet());
    let degrees = parse_usize_list(&a.big_n)?;
    if f.is_some() {
        positive("r", a.r)?;
    }
    let label = if f.is_some() { "rho" } else { "norm" };
    let trend = fock::truncation_trend(&degrees, |n| {
        let b = basis(d, n, a.dim_cap)?;
        match &f {
            Some(f) => fock::seminorm_rho(f, a.r, &b),
            None => Ok(linalg::operator_norm(&semicircular_matrix(&b, 1)?)),
        }
    })?;
    if let [value] = trend.values[..] {
        return Ok(Outcome { human: vec![format!("{label}={}", human(value))], artifact: None, result: json!({ label: num(value), "N": degrees[0] }) });
    }
    let mut lines: Vec<String> = degrees.iter().zip(&trend.values).map(|(n, v)| format!("N={n} {label}={}", human(*v))).collect();
    let mut csv = format!("N,{label}\n");
    for (n, v) in degrees.iter().zip(&trend.values) {
        csv += &format!("{n},{}\n", machine(*v));
    }
    if let Some(x) = trend.extrapolated {
        lines.push(format!("extrapolated={}", human(x)));
    }
    Ok(Outcome {
        human: lines,
        artifact: Some(csv),
        result: json!({ "N": degrees, label: trend.values.iter().map(|&v| num(v)).collect::<Vec<_>>(), "extrapolated": trend.extrapolated.map(num) }),
    })
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long = "N")]
    pub big_n: usize,
    /// Word in the letters `1..d`, e.g. `1212`.
    #[arg(long)]
    pub word: String,
    #[arg(long = "dim-cap", default_value_t = DEFAULT_DIM_CAP)]
    pub dim_cap: usize,
    #[command(flatten)]
    pub common: Common,
}

fn moments(a: &MomentsArgs) -> Result<Outcome> {
    let b = basis(a.d, a.big_n, a.dim_cap)?;
    let w = Word::parse(&a.word, a.d)?;
    let tau = vacuum_moment(&b, &w)?;
    Ok(Outcome {
        human: vec![format!("tau={}", human(tau.re))],
        artifact: None,
        result: json!({ "re": num(tau.re), "im": num(tau.im), "exact": w.len() <= a.big_n }),
    })
}

#[derive(Debug, Args)]
pub struct RhoArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long = "N")]
    pub big_n: usize,
    /// Radii: comma list or `lo:hi:count`.
    #[arg(long, default_value = "0.1:1:10")]
    pub r: String,
    #[arg(long = "dim-cap", default_value_t = DEFAULT_DIM_CAP)]
    pub dim_cap: usize,
    #[command(flatten)]
    pub common: Common,
}

fn rho(a: &RhoArgs) -> Result<Outcome> {
    let f = load_series(&a.series)?;
    let radii = parse_f64_list(&a.r)?;
    for &r in &radii {
        positive("r", r)?;
    }
    let b = basis(f.alphabet(), a.big_n, a.dim_cap)?;
    let mut csv = String::from("r,rho\n");
    let mut rows = Vec::new();
    for &r in &radii {
        let v = fock::seminorm_rho(&f, r, &b)?;
        csv.push_str(&format!("{},{}\n", machine(r), machine(v)));
        rows.push(json!({ "r": num(r), "rho": num(v) }));
    }
    let last = rows.last().cloned().unwrap_or(Value::Null);
    Ok(Outcome { human: vec![format!("points={} last={}", rows.len(), last)], artifact: Some(csv), result: json!({ "profile": rows }) })
}

#[derive(Debug, Args)]
pub struct SzegoArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long = "N", default_value_t = 6)]
    pub big_n: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Row norm of the sampled points.
    #[arg(long, default_value_t = 0.9)]
    pub r: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "dim-cap", default_value_t = DEFAULT_DIM_CAP)]
    pub dim_cap: usize,
    #[command(flatten)]
    pub common: Common,
}

fn szego(a: &SzegoArgs) -> Result<Outcome> {
    let b = basis(a.d, a.big_n, a.dim_cap)?;
    let rep = fock::szego_check(&b, a.n, a.r, a.samples, a.seed)?;
    Ok(Outcome {
        human: vec![format!(
            "max_error={} max_bound_ratio={} bound_holds={}",
            human(rep.max_reproduction_error),
            human(rep.max_bound_ratio),
            rep.max_bound_ratio <= 1.0
        )],
        artifact: None,
        result: json!({ "samples": rep.samples, "max_reproduction_error": num(rep.max_reproduction_error),
                        "max_bound_ratio": num(rep.max_bound_ratio) }),
    })
}

#[derive(Debug, Args)]
pub struct WanderingArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long = "N")]
    pub big_n: usize,
    /// Row entries separated by `;`, terms `word:coef` separated by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub row: String,
    /// Radii: comma list or `lo:hi:count`.
    #[arg(long, default_value = "1")]
    pub r: String,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long = "dim-cap", default_value_t = freenc::fock::DENSE_DIM_CAP)]
    pub dim_cap: usize,
    #[command(flatten)]
    pub common: Common,
}

fn wandering(a: &WanderingArgs) -> Result<Outcome> {
    positive("tol", a.tol)?;
    let row = parse_row(&a.row, a.d)?;
    let radii = parse_f64_list(&a.r)?;
    for &r in &radii {
        positive("r", r)?;
    }
    let b = basis(a.d, a.big_n, a.dim_cap)?;
    let rows = hardy::ell_profile(&row, &radii, &b, a.tol)?;
    let head = hardy::kernel_wandering_dim(&row, radii[0], &b, a.tol)?;
    Ok(Outcome {
        human: vec![format!(
            "ell={} kernel_dim={} gap={} stable={}",
            head.wandering_dim,
            head.kernel_dim,
            human(head.sigma_gap),
            head.stable
        )],
        artifact: Some(hardy::profile_csv(&rows)),
        result: json!({
            "wandering_dim": head.wandering_dim, "kernel_dim": head.kernel_dim, "kernel_dims": head.kernel_dims,
            "window": head.window, "stable": head.stable, "count_formula": head.count_formula,
            "sigma_gap": num(head.sigma_gap),
            "profile": rows.iter().map(|r| json!({ "r": num(r.r), "kernel_dim": r.kernel_dim,
                "wandering_dim": r.wandering_dim, "sigma_gap": num(r.sigma_gap) })).collect::<Vec<_>>(),
        }),
    })
}

#[derive(Debug, Args)]
pub struct VarietyArgs {
    #[arg(long)]
    pub d: usize,
    /// Generators in the row syntax of `wandering`.
    #[arg(long, allow_hyphen_values = true)]
    pub gens: String,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

fn variety(a: &VarietyArgs) -> Result<Outcome> {
    let gens = parse_row(&a.gens, a.d)?;
    let pts = hardy::variety_sample(&gens, a.n, a.trials, a.seed, &VarietyOptions::default())?;
    let mut csv = String::from("point,planted,null_dim,residual\n");
    for (i, p) in pts.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{}\n", p.planted, p.y.ncols(), machine(p.residual)));
    }
    let worst = pts.iter().map(|p| p.residual).fold(0.0, f64::max);
    let planted = pts.iter().filter(|p| p.planted).count();
    Ok(Outcome {
        human: vec![format!("points={} planted={} max_residual={}", pts.len(), planted, human(worst))],
        artifact: Some(csv),
        result: json!({ "points": pts.len(), "planted": planted, "max_residual": num(worst) }),
    })
}

#[derive(Debug, Args)]
pub struct NullstellensatzArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub gens: String,
    /// One multiplier per generator, same syntax.
    #[arg(long, allow_hyphen_values = true)]
    pub mults: String,
    /// Matrix sizes, comma separated.
    #[arg(long, default_value = "2,3")]
    pub n: String,
    #[arg(long, default_value_t = 25)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub probes: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

fn nullstellensatz(a: &NullstellensatzArgs) -> Result<Outcome> {
    let gens = parse_row(&a.gens, a.d)?;
    let mults = parse_row(&a.mults, a.d)?;
    let ns = parse_usize_list(&a.n)?;
    let one = [FreeSeries::one(a.d, 0)];
    let mut csv = String::from("n,point,violation,control\n");
    let (mut worst, mut control_min, mut total) = (0.0f64, f64::INFINITY, 0usize);
    for &n in &ns {
        let pts = hardy::variety_sample(&gens, n, a.trials, a.seed, &VarietyOptions::default())?;
        let rep = hardy::nullstellensatz_check(&gens, &mults, &pts, a.seed, a.probes)?;
        let ctl = hardy::nullstellensatz_check(&one, &one, &pts, a.seed, a.probes)?;
        for (i, (v, cv)) in rep.per_point.iter().zip(&ctl.per_point).enumerate() {
            csv.push_str(&format!("{n},{i},{},{}\n", machine(*v), machine(*cv)));
            control_min = control_min.min(*cv);
        }
        worst = worst.max(rep.max_violation);
        total += pts.len();
    }
    let pass = total > 0 && worst <= a.tol;
    Ok(Outcome {
        human: vec![format!(
            "points={total} max_violation={} control_min={} pass={pass}",
            human(worst),
            human(if total == 0 { f64::NAN } else { control_min })
        )],
        artifact: Some(csv),
        result: json!({ "points": total, "max_violation": num(worst), "control_min": num(control_min), "pass": pass }),
    })
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub expr: String,
    /// Tuple length of the random matrices.
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Matrix sizes, comma separated.
    #[arg(long)]
    pub n: String,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Truncation degree of the Fock-space reference.
    #[arg(long = "fockN", default_value_t = 40)]
    pub fock_n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Entry variance as a multiple of 1/n.
    #[arg(long = "variance-scale", default_value_t = 1.0)]
    pub variance_scale: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub parallel: bool,
    #[arg(long, default_value_t = DEFAULT_RCOND_THRESHOLD)]
    pub rcond: f64,
    #[arg(long = "leaf-tol", default_value_t = 1e-12)]
    pub leaf_tol: f64,
    #[arg(long = "dim-cap", default_value_t = freenc::fock::DENSE_DIM_CAP)]
    pub dim_cap: usize,
    #[command(flatten)]
    pub common: Common,
}

fn experiment(a: &ExperimentArgs, observable: Observable) -> Result<Outcome> {
    let expr = parse_expr(&a.expr)?;
    let n_list = parse_usize_list(&a.n)?;
    if n_list.contains(&0) {
        return Err(Error::InvalidArgument("matrix sizes must be positive".into()));
    }
    positive("variance-scale", a.variance_scale)?;
    let dim = FockBasis::dim_for(a.d, a.fock_n);
    if dim > a.dim_cap {
        return Err(Error::BasisTooLarge { dim, cap: a.dim_cap });
    }
    let mut cfg = ExperimentConfig::new(observable, n_list, a.trials, a.fock_n, a.d, a.seed);
    cfg.variance_scale = a.variance_scale;
    cfg.parallel = a.parallel;
    cfg.eval = EvalOptions { leaf_tol: a.leaf_tol, rcond_threshold: a.rcond };
    let res = randmat::run_experiment(&expr, &cfg)?;
    let mut human_lines = vec![format!("reference={} fockN={}", human(res.reference), res.fock_n)];
    for s in &res.summary {
        human_lines.push(format!(
            "n={} mean={} sd={} mean_gap={} in_domain={}",
            s.n,
            human(s.mean),
            human(s.sd),
            human(s.mean_gap),
            human(s.fraction_in_domain)
        ));
    }
    let summary: Vec<Value> = res
        .summary
        .iter()
        .map(|s| {
            json!({ "n": s.n, "trials": s.trials, "mean": num(s.mean), "sd": num(s.sd), "stderr": num(s.stderr),
                    "fraction_in_domain": num(s.fraction_in_domain), "mean_gap": num(s.mean_gap), "gap_of_mean": num(s.gap_of_mean) })
        })
        .collect();
    Ok(Outcome {
        human: human_lines,
        artifact: Some(randmat::records_csv(&res.records)),
        result: json!({ "observable": res.observable, "reference": num(res.reference), "reference_rcond": num(res.reference_rcond),
                        "fock_n": res.fock_n, "generator": res.generator, "per_n": summary }),
    })
}
