//! NC rational and meromorphic expressions and their linear-pencil realizations.
//!
//! A realization `(A_0, …, A_k, b, c)` represents `f(z) = b* (A_0 + Σ_j A_j z_j)^{-1} c`.
//! At a matrix point the pencil is `Σ_j Z_j ⊗ A_j + I ⊗ A_0` (argument on the
//! left of the Kronecker product) and `f(Z) = (I ⊗ b*) P^{-1} (I ⊗ c)`.
//!
//! Construction is by structural induction:
//!
//! | node      | `A_0`, `A_j`                              | `b`            | `c`             |
//! |-----------|-------------------------------------------|----------------|-----------------|
//! | `c`       | `(1)`                                     | `(1)`          | `(c)`           |
//! | `z_i`     | `I_2`, `A_i = [[0,-1],[0,0]]`             | `e_1`          | `e_2`           |
//! | `f + g`   | block diagonal                            | `(b_f; b_g)`   | `(c_f; c_g)`    |
//! | `f g`     | `[[A_f, -c_f b_g*],[0, A_g]]`             | `(b_f; 0)`     | `(0; c_g)`      |
//! | `f^{-1}`  | `[[A_f, c_f],[b_f*, 0]]`                  | `e_{m+1}`      | `-e_{m+1}`      |
//!
//! For the inverse, the Schur complement of the pencil block is `-b_f* A_f^{-1} c_f = -f`,
//! so the bottom-right entry of the inverse is `-f^{-1}` and `c = -e_{m+1}` fixes the sign.
//! Entire leaves (`h ∈ O_d` stand-ins given as series) become extra pencil
//! arguments, evaluated at the point through certified series evaluation.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, identity, zero};
use crate::nceval::{eval_series, MatrixTuple};
use crate::ncseries::FreeSeries;
use crate::randmat::{derive_seed, GaussianStream};
use crate::{CMatrix, CVector, C64};

/// Default reciprocal-condition threshold below which a point is treated as
/// outside the domain.
pub const DEFAULT_RCOND_THRESHOLD: f64 = 1e-8;

/// Below this reciprocal condition a pencil is reported as singular rather
/// than merely ill-conditioned.
pub const SINGULAR_RCOND: f64 = 1e-13;

#[derive(Debug, Clone)]
pub enum RationalExpr {
    Const(C64),
    /// Coordinate `z_i`, 1-based.
    Var(usize),
    /// Entire series leaf; `name` is what the expression text refers to.
    Leaf { name: String, series: Arc<FreeSeries> },
    Add(Box<RationalExpr>, Box<RationalExpr>),
    Mul(Box<RationalExpr>, Box<RationalExpr>),
    Inv(Box<RationalExpr>),
}

use RationalExpr as E;

impl RationalExpr {
    pub fn constant(x: f64) -> Self {
        E::Const(c(x))
    }

    pub fn var(i: usize) -> Self {
        E::Var(i)
    }

    pub fn leaf(name: impl Into<String>, series: FreeSeries) -> Self {
        E::Leaf { name: name.into(), series: Arc::new(series) }
    }

    pub fn add(a: RationalExpr, b: RationalExpr) -> Self {
        E::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: RationalExpr, b: RationalExpr) -> Self {
        E::Mul(Box::new(a), Box::new(b))
    }

    pub fn inv(a: RationalExpr) -> Self {
        E::Inv(Box::new(a))
    }

    /// `-a`, written as `(-1)·a`.
    pub fn neg(a: RationalExpr) -> Self {
        E::mul(E::Const(c(-1.0)), a)
    }

    pub fn sub(a: RationalExpr, b: RationalExpr) -> Self {
        E::add(a, E::neg(b))
    }

    /// Largest variable index used (the number of formal coordinates).
    pub fn num_vars(&self) -> usize {
        match self {
            E::Const(_) | E::Leaf { .. } => 0,
            E::Var(i) => *i,
            E::Add(a, b) | E::Mul(a, b) => a.num_vars().max(b.num_vars()),
            E::Inv(a) => a.num_vars(),
        }
    }

    /// Leaves in left-to-right order; each occurrence is its own argument.
    pub fn leaves(&self) -> Vec<Arc<FreeSeries>> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Arc<FreeSeries>>) {
        match self {
            E::Leaf { series, .. } => out.push(series.clone()),
            E::Add(a, b) | E::Mul(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
            E::Inv(a) => a.collect_leaves(out),
            E::Const(_) | E::Var(_) => {}
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            E::Const(_) | E::Var(_) | E::Leaf { .. } => 0,
            E::Add(a, b) | E::Mul(a, b) => 1 + a.depth().max(b.depth()),
            E::Inv(a) => 1 + a.depth(),
        }
    }

    /// Direct recursive evaluation with matrix arithmetic.
    /// Serves as an independent check on pencil evaluation.
    pub fn eval_direct(&self, x: &MatrixTuple, leaf_tol: f64) -> Result<CMatrix> {
        let n = x.n();
        Ok(match self {
            E::Const(v) => identity(n) * *v,
            E::Var(i) => {
                if *i == 0 || *i > x.d() {
                    return Err(Error::DimensionMismatch(format!("variable {i} but the tuple has {} components", x.d())));
                }
                x.component(*i).clone()
            }
            E::Leaf { series, .. } => eval_series(series, x, leaf_tol)?.value,
            E::Add(a, b) => a.eval_direct(x, leaf_tol)? + b.eval_direct(x, leaf_tol)?,
            E::Mul(a, b) => a.eval_direct(x, leaf_tol)? * b.eval_direct(x, leaf_tol)?,
            E::Inv(a) => {
                let m = a.eval_direct(x, leaf_tol)?;
                let rc = linalg::rcond(&m);
                if rc < SINGULAR_RCOND {
                    return Err(Error::SingularPencil { rcond: rc });
                }
                linalg::solve(&m, &identity(n)).ok_or(Error::SingularPencil { rcond: rc })?
            }
        })
    }

    /// Parse the prefix S-expression form. Leaves are resolved through `load`.
    ///
    /// ```text
    /// expr := (const <re> [<im>]) | (var <i>) | (leaf <name>)
    ///       | (add expr expr+) | (mul expr expr+) | (sub expr expr)
    ///       | (neg expr) | (inv expr)
    /// ```
    pub fn parse_with(text: &str, load: &mut dyn FnMut(&str) -> Result<FreeSeries>) -> Result<RationalExpr> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let expr = parse_node(&tokens, &mut pos, load)?;
        if pos != tokens.len() {
            return Err(Error::Parse { line: 0, msg: format!("unexpected trailing token '{}'", tokens[pos]) });
        }
        Ok(expr)
    }

    /// Parse an expression without leaves.
    pub fn parse(text: &str) -> Result<RationalExpr> {
        Self::parse_with(text, &mut |name| Err(Error::Parse { line: 0, msg: format!("no loader for leaf '{name}'") }))
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_string).collect()
}

fn parse_node(tokens: &[String], pos: &mut usize, load: &mut dyn FnMut(&str) -> Result<FreeSeries>) -> Result<RationalExpr> {
    let perr = |msg: String| Error::Parse { line: 0, msg };
    let next = |pos: &mut usize| -> Result<String> {
        let t = tokens.get(*pos).cloned().ok_or_else(|| perr("unexpected end of expression".into()))?;
        *pos += 1;
        Ok(t)
    };
    if next(pos)? != "(" {
        return Err(perr(format!("expected '(' at token {}", *pos - 1)));
    }
    let head = next(pos)?;
    let mut children = Vec::new();
    let mut atoms = Vec::new();
    loop {
        match tokens.get(*pos).map(String::as_str) {
            Some(")") => {
                *pos += 1;
                break;
            }
            Some("(") => children.push(parse_node(tokens, pos, load)?),
            Some(_) => atoms.push(next(pos)?),
            None => return Err(perr("unbalanced parentheses".into())),
        }
    }
    let arity = |want: usize, atoms_ok: usize| -> Result<()> {
        if children.len() != want || atoms.len() != atoms_ok {
            return Err(perr(format!("'{head}' takes {want} subexpressions and {atoms_ok} atoms")));
        }
        Ok(())
    };
    let num = |s: &str| s.parse::<f64>().map_err(|_| perr(format!("bad number '{s}'")));
    match head.as_str() {
        "const" => {
            if !children.is_empty() || atoms.is_empty() || atoms.len() > 2 {
                return Err(perr("'const' takes one or two numbers".into()));
            }
            let im = if atoms.len() == 2 { num(&atoms[1])? } else { 0.0 };
            Ok(E::Const(C64::new(num(&atoms[0])?, im)))
        }
        "var" => {
            arity(0, 1)?;
            let i: usize = atoms[0].parse().map_err(|_| perr(format!("bad variable index '{}'", atoms[0])))?;
            if i == 0 {
                return Err(perr("variables are 1-based".into()));
            }
            Ok(E::Var(i))
        }
        "leaf" => {
            arity(0, 1)?;
            let series = load(&atoms[0])?;
            Ok(E::leaf(atoms[0].clone(), series))
        }
        "inv" => {
            arity(1, 0)?;
            Ok(E::inv(children.pop().expect("one child")))
        }
        "neg" => {
            arity(1, 0)?;
            Ok(E::neg(children.pop().expect("one child")))
        }
        "sub" => {
            arity(2, 0)?;
            let b = children.pop().expect("two children");
            let a = children.pop().expect("two children");
            Ok(E::sub(a, b))
        }
        "add" | "mul" => {
            if children.len() < 2 || !atoms.is_empty() {
                return Err(perr(format!("'{head}' takes at least two subexpressions")));
            }
            let mut it = children.into_iter();
            let first = it.next().expect("nonempty");
            Ok(it.fold(first, |acc, e| if head == "add" { E::add(acc, e) } else { E::mul(acc, e) }))
        }
        other => Err(perr(format!("unknown operator '{other}'"))),
    }
}

impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            E::Const(v) if v.im == 0.0 => write!(f, "(const {})", v.re),
            E::Const(v) => write!(f, "(const {} {})", v.re, v.im),
            E::Var(i) => write!(f, "(var {i})"),
            E::Leaf { name, .. } => write!(f, "(leaf {name})"),
            E::Add(a, b) => write!(f, "(add {a} {b})"),
            E::Mul(a, b) => write!(f, "(mul {a} {b})"),
            E::Inv(a) => write!(f, "(inv {a})"),
        }
    }
}

/// Pencil data. `coeffs[j-1]` multiplies argument `j`; arguments `1..=vars`
/// are the coordinates, the rest are the leaves in order.
#[derive(Debug, Clone)]
pub struct Realization {
    pub a0: CMatrix,
    pub coeffs: Vec<CMatrix>,
    pub b: CVector,
    pub c: CVector,
    pub vars: usize,
    pub leaves: Vec<Arc<FreeSeries>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainStatus {
    InDomain,
    /// Invertible, but the reciprocal condition is under the threshold.
    IllConditioned,
    Singular,
}

#[derive(Debug, Clone, Copy)]
pub struct DomainReport {
    pub status: DomainStatus,
    pub rcond: f64,
}

impl DomainReport {
    pub fn in_domain(&self) -> bool {
        self.status == DomainStatus::InDomain
    }

    pub fn invertible(&self) -> bool {
        self.status != DomainStatus::Singular
    }

    fn classify(rcond: f64, threshold: f64) -> DomainReport {
        let status = if !(rcond >= SINGULAR_RCOND) {
            DomainStatus::Singular
        } else if rcond < threshold {
            DomainStatus::IllConditioned
        } else {
            DomainStatus::InDomain
        };
        DomainReport { status, rcond }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Absolute tolerance for each leaf's certified series evaluation.
    pub leaf_tol: f64,
    pub rcond_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { leaf_tol: 1e-12, rcond_threshold: DEFAULT_RCOND_THRESHOLD }
    }
}

#[derive(Debug, Clone)]
pub struct MeroEval {
    pub value: CMatrix,
    pub domain: DomainReport,
    /// Largest certified error among the leaf evaluations.
    pub leaf_bound: f64,
    /// Eigenvalues of `value` when it was produced by diagonalizing a single
    /// Hermitian variable (`value = V diag V*` with `V` unitary).
    pub spectral: Option<CVector>,
}

struct Block {
    a0: CMatrix,
    coeffs: Vec<CMatrix>,
    b: CVector,
    c: CVector,
}

fn stack(a: &CVector, b: &CVector) -> CVector {
    CVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn unit(m: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(m);
    v[i] = c(1.0);
    v
}

fn build(expr: &RationalExpr, k: usize, vars: usize, next_leaf: &mut usize) -> Block {
    match expr {
        E::Const(v) => Block {
            a0: identity(1),
            coeffs: vec![zero(1, 1); k],
            b: unit(1, 0),
            c: CVector::from_element(1, *v),
        },
        E::Var(_) | E::Leaf { .. } => {
            let arg = match expr {
                E::Var(i) => *i,
                _ => {
                    *next_leaf += 1;
                    vars + *next_leaf
                }
            };
            let mut coeffs = vec![zero(2, 2); k];
            coeffs[arg - 1][(0, 1)] = c(-1.0);
            Block { a0: identity(2), coeffs, b: unit(2, 0), c: unit(2, 1) }
        }
        E::Add(f, g) => {
            let (f, g) = (build(f, k, vars, next_leaf), build(g, k, vars, next_leaf));
            Block {
                a0: linalg::direct_sum(&f.a0, &g.a0),
                coeffs: f.coeffs.iter().zip(&g.coeffs).map(|(x, y)| linalg::direct_sum(x, y)).collect(),
                b: stack(&f.b, &g.b),
                c: stack(&f.c, &g.c),
            }
        }
        E::Mul(f, g) => {
            let (f, g) = (build(f, k, vars, next_leaf), build(g, k, vars, next_leaf));
            let (mf, mg) = (f.b.len(), g.b.len());
            let mut a0 = linalg::direct_sum(&f.a0, &g.a0);
            a0.view_mut((0, mf), (mf, mg)).copy_from(&(-(&f.c * g.b.adjoint())));
            Block {
                a0,
                coeffs: f.coeffs.iter().zip(&g.coeffs).map(|(x, y)| linalg::direct_sum(x, y)).collect(),
                b: stack(&f.b, &CVector::zeros(mg)),
                c: stack(&CVector::zeros(mf), &g.c),
            }
        }
        E::Inv(f) => {
            let f = build(f, k, vars, next_leaf);
            let m = f.b.len();
            let mut a0 = zero(m + 1, m + 1);
            a0.view_mut((0, 0), (m, m)).copy_from(&f.a0);
            a0.view_mut((0, m), (m, 1)).copy_from(&f.c);
            a0.view_mut((m, 0), (1, m)).copy_from(&f.b.adjoint());
            let coeffs = f
                .coeffs
                .iter()
                .map(|x| {
                    let mut y = zero(m + 1, m + 1);
                    y.view_mut((0, 0), (m, m)).copy_from(x);
                    y
                })
                .collect();
            Block { a0, coeffs, b: unit(m + 1, m), c: -unit(m + 1, m) }
        }
    }
}

/// Build the pencil realization of an expression.
pub fn realize(expr: &RationalExpr) -> Realization {
    let vars = expr.num_vars();
    let leaves = expr.leaves();
    let k = vars + leaves.len();
    let mut next_leaf = 0;
    let block = build(expr, k, vars, &mut next_leaf);
    Realization { a0: block.a0, coeffs: block.coeffs, b: block.b, c: block.c, vars, leaves }
}

impl Realization {
    /// Pencil size `m`.
    pub fn size(&self) -> usize {
        self.b.len()
    }

    /// Number of pencil arguments (coordinates plus leaves).
    pub fn k(&self) -> usize {
        self.coeffs.len()
    }

    fn check_args(&self, args: &[CMatrix]) -> Result<usize> {
        if args.len() != self.k() {
            return Err(Error::DimensionMismatch(format!("pencil takes {} arguments, got {}", self.k(), args.len())));
        }
        let n = args.first().map_or(1, |a| a.nrows());
        if args.iter().any(|a| a.shape() != (n, n)) {
            return Err(Error::DimensionMismatch("pencil arguments must be square of one size".into()));
        }
        Ok(n)
    }

    /// `Σ_j args_j ⊗ A_j + I_n ⊗ A_0`.
    pub fn pencil_apply(&self, args: &[CMatrix]) -> Result<CMatrix> {
        let n = self.check_args(args)?;
        let mut p = identity(n).kronecker(&self.a0);
        for (z, a) in args.iter().zip(&self.coeffs) {
            if a.iter().any(|v| *v != c(0.0)) {
                p += z.kronecker(a);
            }
        }
        Ok(p)
    }

    pub fn domain_check(&self, args: &[CMatrix], threshold: f64) -> Result<DomainReport> {
        let p = self.pencil_apply(args)?;
        Ok(DomainReport::classify(linalg::rcond(&p), threshold))
    }

    /// `(I ⊗ b*) P^{-1} (I ⊗ c)` at explicit pencil arguments, solved by LU.
    pub fn eval_args(&self, args: &[CMatrix], threshold: f64) -> Result<(CMatrix, DomainReport)> {
        let n = self.check_args(args)?;
        if args.is_empty() || args.iter().all(|a| is_scalar_multiple_of_identity(a)) {
            // Commuting scalars: one m×m pencil.
            let scalars: Vec<C64> = args.iter().map(|a| a[(0, 0)]).collect();
            let (v, rep) = self.eval_scalar(&scalars, threshold)?;
            return Ok((identity(n) * v, rep));
        }
        let p = self.pencil_apply(args)?;
        let report = DomainReport::classify(linalg::rcond(&p), threshold);
        if report.status == DomainStatus::Singular {
            return Err(Error::SingularPencil { rcond: report.rcond });
        }
        let m = self.size();
        let rhs = identity(n).kronecker(&CMatrix::from_column_slice(m, 1, self.c.as_slice()));
        let sol = linalg::solve(&p, &rhs).ok_or(Error::SingularPencil { rcond: report.rcond })?;
        let bstar = CMatrix::from_row_slice(1, m, &self.b.iter().map(|z| z.conj()).collect::<Vec<_>>());
        Ok((identity(n).kronecker(&bstar) * sol, report))
    }

    /// Scalar arguments: returns `b*(A_0 + Σ z_j A_j)^{-1} c` together with
    /// the singular-value extremes of the pencil.
    fn scalar_pencil(&self, z: &[C64]) -> (CMatrix, f64, f64) {
        let mut p = self.a0.clone();
        for (zj, a) in z.iter().zip(&self.coeffs) {
            if *zj != c(0.0) {
                p += a * *zj;
            }
        }
        let sv = linalg::singular_values(&p);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        (p, smin, smax)
    }

    fn eval_scalar(&self, z: &[C64], threshold: f64) -> Result<(C64, DomainReport)> {
        let (p, smin, smax) = self.scalar_pencil(z);
        let report = DomainReport::classify(if smax == 0.0 { 0.0 } else { smin / smax }, threshold);
        if report.status == DomainStatus::Singular {
            return Err(Error::SingularPencil { rcond: report.rcond });
        }
        let x = linalg::solve(&p, &CMatrix::from_column_slice(self.size(), 1, self.c.as_slice()))
            .ok_or(Error::SingularPencil { rcond: report.rcond })?;
        Ok((self.b.dotc(&x.column(0).into_owned()), report))
    }

    /// Evaluate at a tuple: coordinates map to `X_i`, leaves to certified
    /// series values `h(X)`. Points with reciprocal condition under the
    /// threshold are rejected with [`Error::SingularPencil`].
    pub fn eval(&self, x: &MatrixTuple, opts: &EvalOptions) -> Result<MeroEval> {
        let out = self.eval_unchecked(x, opts)?;
        if !out.domain.in_domain() {
            return Err(Error::SingularPencil { rcond: out.domain.rcond });
        }
        Ok(out)
    }

    /// As [`Realization::eval`] but returns ill-conditioned values with their report.
    pub fn eval_unchecked(&self, x: &MatrixTuple, opts: &EvalOptions) -> Result<MeroEval> {
        if self.vars > x.d() {
            return Err(Error::DimensionMismatch(format!("expression uses {} variables, tuple has {}", self.vars, x.d())));
        }
        if x.d() == 1 && linalg::is_hermitian(x.component(1), 1e-14) && x.n() > 1 {
            return self.eval_hermitian_single(x, opts);
        }
        let mut args: Vec<CMatrix> = x.mats()[..self.vars].to_vec();
        let mut leaf_bound = 0.0f64;
        for h in &self.leaves {
            let r = eval_series(h, x, opts.leaf_tol)?;
            leaf_bound = leaf_bound.max(r.bound);
            args.push(r.value);
        }
        let (mut value, domain) = self.eval_args(&args, opts.rcond_threshold)?;
        if args.is_empty() {
            // A constant expression: the scalar pencil gave a 1×1 value.
            value = identity(x.n()) * value[(0, 0)];
        }
        Ok(MeroEval { value, domain, leaf_bound, spectral: None })
    }

    /// One Hermitian variable `H = V Λ V*`: every argument is a function of
    /// `H`, the pencil splits into `n` scalar pencils, and
    /// `f(H) = V diag(f(λ_i)) V*`. Singular values of the full pencil are the
    /// union of the blocks', so the reciprocal condition is exact.
    fn eval_hermitian_single(&self, x: &MatrixTuple, opts: &EvalOptions) -> Result<MeroEval> {
        let h = linalg::hermitian_part(x.component(1));
        let eig = h.symmetric_eigen();
        let mut values = Vec::with_capacity(x.n());
        let (mut smin, mut smax) = (f64::INFINITY, 0.0f64);
        let mut leaf_bound = 0.0f64;
        for &lam in eig.eigenvalues.iter() {
            let point = MatrixTuple::scalars(&[c(lam)])?;
            let mut z: Vec<C64> = vec![c(lam); self.vars];
            for leaf in &self.leaves {
                let r = eval_series(leaf, &point, opts.leaf_tol)?;
                leaf_bound = leaf_bound.max(r.bound);
                z.push(r.value[(0, 0)]);
            }
            let (p, lo, hi) = self.scalar_pencil(&z);
            smin = smin.min(lo);
            smax = smax.max(hi);
            values.push((p, z));
        }
        let domain = DomainReport::classify(if smax == 0.0 { 0.0 } else { smin / smax }, opts.rcond_threshold);
        if domain.status == DomainStatus::Singular {
            return Err(Error::SingularPencil { rcond: domain.rcond });
        }
        let cmat = CMatrix::from_column_slice(self.size(), 1, self.c.as_slice());
        let mut diag = CVector::zeros(x.n());
        for (i, (p, _)) in values.iter().enumerate() {
            let sol = linalg::solve(p, &cmat).ok_or(Error::SingularPencil { rcond: domain.rcond })?;
            diag[i] = self.b.dotc(&sol.column(0).into_owned());
        }
        let v = &eig.eigenvectors;
        let value = v * CMatrix::from_diagonal(&diag) * v.adjoint();
        Ok(MeroEval { value, domain, leaf_bound, spectral: Some(diag) })
    }
}

fn is_scalar_multiple_of_identity(a: &CMatrix) -> bool {
    let d = a[(0, 0)];
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| a[(i, j)] == if i == j { d } else { c(0.0) }))
}

/// Evaluate an expression at a tuple through its realization.
pub fn eval_meromorphic(expr: &RationalExpr, x: &MatrixTuple, opts: &EvalOptions) -> Result<MeroEval> {
    realize(expr).eval(x, opts)
}

#[derive(Debug, Clone)]
pub enum Agreement {
    /// The point lies outside at least one domain; nothing is claimed.
    NotApplicable { rcond_first: f64, rcond_second: f64 },
    Compared { first: CMatrix, second: CMatrix, difference: f64, pass: bool },
}

impl Agreement {
    pub fn passed(&self) -> Option<bool> {
        match self {
            Agreement::NotApplicable { .. } => None,
            Agreement::Compared { pass, .. } => Some(*pass),
        }
    }
}

/// Compare two representations at a point in both domains. The test is
/// `‖F₁ − F₂‖ ≤ tol · max(1, ‖F₁‖, ‖F₂‖)` in the operator norm.
pub fn representation_agreement(r1: &Realization, r2: &Realization, x: &MatrixTuple, tol: f64, opts: &EvalOptions) -> Result<Agreement> {
    // A singular pencil means "outside the domain"; any other failure is an error.
    let outcome = |r: &Realization| match r.eval_unchecked(x, opts) {
        Ok(v) => Ok(Ok(v)),
        Err(Error::SingularPencil { rcond }) => Ok(Err(rcond)),
        Err(e) => Err(e),
    };
    let (first, second) = (outcome(r1)?, outcome(r2)?);
    match (first, second) {
        (Ok(a), Ok(b)) if a.domain.in_domain() && b.domain.in_domain() => {
            let difference = linalg::operator_norm(&(&a.value - &b.value));
            let scale = 1f64.max(linalg::operator_norm(&a.value)).max(linalg::operator_norm(&b.value));
            Ok(Agreement::Compared { pass: difference <= tol * scale, first: a.value, second: b.value, difference })
        }
        (a, b) => {
            let rc = |o: &std::result::Result<MeroEval, f64>| match o {
                Ok(v) => v.domain.rcond,
                Err(r) => *r,
            };
            Ok(Agreement::NotApplicable { rcond_first: rc(&a), rcond_second: rc(&b) })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementSummary {
    pub points: usize,
    pub compared: usize,
    pub passed: usize,
    pub not_applicable: usize,
    pub max_difference: f64,
}

impl AgreementSummary {
    /// Passing points over all sampled points; points outside a domain count
    /// as not passing.
    pub fn pass_rate(&self) -> f64 {
        self.passed as f64 / self.points.max(1) as f64
    }
}

/// [`representation_agreement`] at `points` random tuples of `d` matrices of
/// size `n` with complex Gaussian entries of variance `scale²/n`.
#[allow(clippy::too_many_arguments)]
pub fn sampled_agreement(
    r1: &Realization,
    r2: &Realization,
    d: usize,
    n: usize,
    points: usize,
    scale: f64,
    seed: u64,
    tol: f64,
    opts: &EvalOptions,
) -> Result<AgreementSummary> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("need n ≥ 1 and d ≥ 1".into()));
    }
    let mut out = AgreementSummary { points, compared: 0, passed: 0, not_applicable: 0, max_difference: 0.0 };
    for t in 0..points as u64 {
        let mut g = GaussianStream::new(derive_seed(seed, n as u64, t, 0));
        let x = MatrixTuple::new((0..d).map(|_| g.complex_matrix(n, n, scale * scale / n as f64)).collect())?;
        match representation_agreement(r1, r2, &x, tol, opts)? {
            Agreement::NotApplicable { .. } => out.not_applicable += 1,
            Agreement::Compared { difference, pass, .. } => {
                out.compared += 1;
                out.passed += pass as usize;
                out.max_difference = out.max_difference.max(difference);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(x: f64) -> MatrixTuple {
        MatrixTuple::scalars(&[c(x)]).unwrap()
    }

    fn one_minus(e: RationalExpr) -> RationalExpr {
        E::sub(E::constant(1.0), e)
    }

    #[test]
    fn constant_expression_at_matrix_point() {
        let r = realize(&E::add(E::constant(2.0), E::inv(E::constant(4.0))));
        let x = MatrixTuple::new(vec![CMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64))]).unwrap();
        let out = r.eval(&x, &EvalOptions::default()).unwrap();
        assert_eq!(out.value, identity(3) * c(2.25));
        let x2 = MatrixTuple::new(vec![zero(2, 2), identity(2)]).unwrap();
        assert_eq!(r.eval(&x2, &EvalOptions::default()).unwrap().value, identity(2) * c(2.25));
    }

    #[test]
    fn realize_examples() {
        let opts = EvalOptions::default();
        let five = realize(&E::constant(5.0));
        assert_eq!(five.eval(&scalar(0.3), &opts).unwrap().value[(0, 0)], c(5.0));
        let v = realize(&E::var(1));
        assert!((v.eval(&scalar(0.7), &opts).unwrap().value[(0, 0)] - c(0.7)).norm() < 1e-15);
        let e = E::inv(one_minus(E::var(1)));
        let r = realize(&e);
        let val = r.eval(&scalar(0.5), &opts).unwrap().value[(0, 0)];
        assert!((val - c(2.0)).norm() < 1e-14);
        // Independent check: direct solve with the explicit pencil.
        let p = r.pencil_apply(&[CMatrix::from_element(1, 1, c(0.5))]).unwrap();
        let sol = p.clone().try_inverse().unwrap();
        let direct = (r.b.adjoint() * sol * &r.c)[(0, 0)];
        assert!((direct - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn pencil_apply_examples() {
        let r = realize(&E::var(1));
        assert_eq!(r.pencil_apply(&[zero(1, 1)]).unwrap(), identity(2));
        let x = 0.25;
        let p = r.pencil_apply(&[CMatrix::from_element(1, 1, c(x))]).unwrap();
        assert_eq!(p, CMatrix::from_row_slice(2, 2, &[c(1.0), c(-x), c(0.0), c(1.0)]));
        // n = 2: hand-expanded Kronecker sum.
        let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let p = r.pencil_apply(std::slice::from_ref(&z)).unwrap();
        let mut expected = zero(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                // Block (i, j) = z_ij A_1 + δ_ij A_0
                expected[(2 * i, 2 * j + 1)] = -z[(i, j)];
                if i == j {
                    expected[(2 * i, 2 * j)] = c(1.0);
                    expected[(2 * i + 1, 2 * j + 1)] = c(1.0);
                }
            }
        }
        assert_eq!(p, expected);
        assert!(r.pencil_apply(&[]).is_err());
    }

    #[test]
    fn domain_check_examples() {
        let r = realize(&E::inv(one_minus(E::var(1))));
        let at = |x: f64| r.domain_check(&[CMatrix::from_element(1, 1, c(x))], DEFAULT_RCOND_THRESHOLD).unwrap();
        assert_eq!(at(1.0).status, DomainStatus::Singular);
        assert_eq!(at(0.0).status, DomainStatus::InDomain);
        let near = at(0.999999999);
        assert_eq!(near.status, DomainStatus::IllConditioned);
        assert!(near.invertible() && near.rcond < 1e-8);
    }

    #[test]
    fn size_bookkeeping() {
        let x = E::var(1);
        let k = E::constant(2.0);
        assert_eq!(realize(&k).size(), 1);
        assert_eq!(realize(&x).size(), 2);
        assert_eq!(realize(&E::add(x.clone(), k.clone())).size(), 3);
        assert_eq!(realize(&E::mul(x.clone(), x.clone())).size(), 4);
        assert_eq!(realize(&E::inv(E::add(x.clone(), k.clone()))).size(), 4);
    }

    #[test]
    fn hua_pair_agrees_with_neumann_series() {
        let (x, y) = (E::var(1), E::var(2));
        let lhs = E::mul(x.clone(), E::inv(one_minus(E::mul(y.clone(), x.clone()))));
        let rhs = E::mul(E::inv(one_minus(E::mul(x.clone(), y.clone()))), x.clone());
        let (r1, r2) = (realize(&lhs), realize(&rhs));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let opts = EvalOptions::default();
        for _ in 0..50 {
            let mut mats: Vec<CMatrix> =
                (0..2).map(|_| CMatrix::from_fn(2, 2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))).collect();
            let t = MatrixTuple::new(mats.clone()).unwrap();
            let s = 0.4 * rng.random_range(0.2..1.0) / t.row_norm();
            for m in mats.iter_mut() {
                *m *= c(s);
            }
            let t = MatrixTuple::new(mats).unwrap();
            // Neumann oracle: x Σ (yx)^k
            let yx = t.component(2) * t.component(1);
            let mut term = identity(2);
            let mut acc = zero(2, 2);
            for _ in 0..200 {
                acc += &term;
                term = &term * &yx;
            }
            let oracle = t.component(1) * acc;
            let a = r1.eval(&t, &opts).unwrap().value;
            let b = r2.eval(&t, &opts).unwrap().value;
            assert!((&a - &oracle).norm() < 1e-8);
            assert!((&a - &b).norm() < 1e-8);
            assert_eq!(representation_agreement(&r1, &r2, &t, 1e-8, &opts).unwrap().passed(), Some(true));
        }
    }

    #[test]
    fn agreement_examples() {
        let opts = EvalOptions::default();
        let r = realize(&E::inv(one_minus(E::var(1))));
        match representation_agreement(&r, &r, &scalar(0.3), 1e-12, &opts).unwrap() {
            Agreement::Compared { difference, pass, .. } => assert!(difference == 0.0 && pass),
            other => panic!("{other:?}"),
        }
        let dbl = realize(&E::inv(E::inv(E::var(1))));
        let id = realize(&E::var(1));
        match representation_agreement(&dbl, &id, &scalar(2.0), 1e-10, &opts).unwrap() {
            Agreement::Compared { difference, .. } => assert!(difference <= 1e-10),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            representation_agreement(&r, &id, &scalar(1.0), 1e-10, &opts).unwrap(),
            Agreement::NotApplicable { .. }
        ));
    }

    #[test]
    fn leaves_and_geometric_agreement() {
        let opts = EvalOptions::default();
        let e = E::inv(E::sub(E::sub(E::constant(1.0), E::var(1)), E::var(2)));
        let x = MatrixTuple::scalars(&[c(0.3), c(0.3)]).unwrap();
        let v = eval_meromorphic(&e, &x, &opts).unwrap().value[(0, 0)];
        assert!((v - c(2.5)).norm() < 1e-8);
        let g = crate::nceval::eval_series(&FreeSeries::geometric(2, 400), &x, 1e-12).unwrap();
        assert!((v - g.value[(0, 0)]).norm() < 1e-8);

        let exp_like = FreeSeries::inverse_factorial(2, 40);
        let leaf = E::leaf("exp", exp_like.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = MatrixTuple::new((0..2).map(|_| CMatrix::from_fn(3, 3, |_, _| c(rng.random_range(-0.3..0.3)))).collect()).unwrap();
        let via_pencil = eval_meromorphic(&leaf, &y, &opts).unwrap();
        let direct = crate::nceval::eval_series(&exp_like, &y, 1e-12).unwrap();
        assert!((via_pencil.value - direct.value).norm() < 1e-10);
    }

    #[test]
    fn hermitian_fast_path_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = CMatrix::from_fn(6, 6, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let h = linalg::hermitian_part(&a) * c(0.4);
        let e = E::inv(E::sub(E::constant(3.0), E::mul(E::var(1), E::add(E::var(1), E::constant(0.5)))));
        let r = realize(&e);
        let x = MatrixTuple::new(vec![h.clone()]).unwrap();
        let fast = r.eval(&x, &EvalOptions::default()).unwrap();
        let (dense, rep) = r.eval_args(&[h], DEFAULT_RCOND_THRESHOLD).unwrap();
        assert!((fast.value - dense).norm() < 1e-11);
        assert!((fast.domain.rcond - rep.rcond).abs() < 1e-8 * rep.rcond.max(1e-3));
    }

    #[test]
    fn parse_and_display() {
        let e = RationalExpr::parse("(inv (sub (const 1) (var 1)))").unwrap();
        let r = realize(&e);
        assert!((r.eval(&scalar(0.5), &EvalOptions::default()).unwrap().value[(0, 0)] - c(2.0)).norm() < 1e-14);
        let round = RationalExpr::parse(&e.to_string()).unwrap();
        assert_eq!(round.to_string(), e.to_string());
        let sum = RationalExpr::parse("(add (var 1) (var 2) (const 2 -1))").unwrap();
        assert_eq!(sum.num_vars(), 2);
        assert!(RationalExpr::parse("(inv (var 1)").is_err());
        assert!(RationalExpr::parse("(var 0)").is_err());
        assert!(RationalExpr::parse("(frob (var 1))").is_err());
        assert!(RationalExpr::parse("(leaf f.txt)").is_err());
        let with_leaf = RationalExpr::parse_with("(mul (leaf g) (var 1))", &mut |_| Ok(FreeSeries::geometric(1, 10))).unwrap();
        assert_eq!(with_leaf.leaves().len(), 1);
    }
}
