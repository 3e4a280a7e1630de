//! Text format for series.
//!
//! ```text
//! #ncseries d=2 cutoff=3
//! e,1.0000000000000000e0,0.0000000000000000e0
//! 12,-2.0000000000000000e0,0.0000000000000000e0
//! #tail 4,1.0000000000000000e-3
//! #tail-envelope geometric,1.0000000000000000e0,5.0000000000000000e-1
//! ```
//!
//! Without any `#tail*` line the series is an exact polynomial. `#tail-unknown`
//! declares the tail unknown. `#tail` lines must cover consecutive degrees
//! starting at `cutoff + 1`; an optional `#tail-envelope` (`geometric,scale,ratio`
//! or `factorial,scale,base`) covers every later degree.
//!
//! Series stored through a linear representation use
//! `#linear dim=<s>` followed by `#u i,re,im`, `#v i,re,im`,
//! `#mat j,row,col,re,im` (zero entries omitted), optional `#block start,len`
//! and `#weight block,degree,re,im` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Coefficients, Envelope, FreeSeries, LinearRep, RepBlock, TailBound};
use crate::error::{Error, Result};
use crate::freemonoid::Word;
use crate::linalg::{c, zero};
use crate::{CVector, C64};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| perr(line, format!("bad number '{}'", s.trim())))
}

fn idx(s: &str, line: usize) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| perr(line, format!("bad index '{}'", s.trim())))
}

fn fields(s: &str, n: usize, line: usize) -> Result<Vec<&str>> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != n {
        return Err(perr(line, format!("expected {n} comma-separated fields, found {}", parts.len())));
    }
    Ok(parts)
}

fn header_value(header: &str, key: &str, line: usize) -> Result<usize> {
    header
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| perr(line, format!("header is missing {key}=")))
        .and_then(|v| idx(v, line))
}

#[derive(Default)]
struct LinearParts {
    dim: usize,
    u: Vec<(usize, C64)>,
    v: Vec<(usize, C64)>,
    mats: Vec<(usize, usize, usize, C64)>,
    blocks: Vec<(usize, usize)>,
    weights: Vec<(usize, usize, C64)>,
}

pub fn parse_series(text: &str) -> Result<FreeSeries> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| perr(1, "empty series file"))?;
    let rest = header.strip_prefix("#ncseries").ok_or_else(|| perr(hline, "missing #ncseries header"))?;
    let d = header_value(rest, "d", hline)?;
    let cutoff = header_value(rest, "cutoff", hline)?;
    if d == 0 {
        return Err(perr(hline, "d must be positive"));
    }

    let mut terms: Vec<(Word, C64)> = Vec::new();
    let mut table: BTreeMap<usize, f64> = BTreeMap::new();
    let mut envelope = None;
    let mut unknown = false;
    let mut saw_tail = false;
    let mut linear: Option<LinearParts> = None;

    for (ln, line) in lines {
        if let Some(body) = line.strip_prefix('#') {
            let (tag, args) = body.split_once(|ch: char| ch.is_whitespace()).unwrap_or((body, ""));
            match tag {
                "tail" => {
                    let f = fields(args, 2, ln)?;
                    let degree = idx(f[0], ln)?;
                    if table.insert(degree, num(f[1], ln)?).is_some() {
                        return Err(perr(ln, format!("duplicate tail degree {degree}")));
                    }
                    saw_tail = true;
                }
                "tail-envelope" => {
                    let f = fields(args, 3, ln)?;
                    let (a, b) = (num(f[1], ln)?, num(f[2], ln)?);
                    envelope = Some(match f[0].trim() {
                        "geometric" => Envelope::Geometric { scale: a, ratio: b },
                        "factorial" => Envelope::Factorial { scale: a, base: b },
                        other => return Err(perr(ln, format!("unknown envelope '{other}'"))),
                    });
                    saw_tail = true;
                }
                "tail-unknown" => unknown = true,
                "linear" => {
                    let dim = header_value(args, "dim", ln)?;
                    linear = Some(LinearParts { dim, ..Default::default() });
                }
                "u" | "v" | "mat" | "block" | "weight" => {
                    let lp = linear.as_mut().ok_or_else(|| perr(ln, format!("#{tag} before #linear")))?;
                    match tag {
                        "u" | "v" => {
                            let f = fields(args, 3, ln)?;
                            let entry = (idx(f[0], ln)?, C64::new(num(f[1], ln)?, num(f[2], ln)?));
                            if tag == "u" { lp.u.push(entry) } else { lp.v.push(entry) }
                        }
                        "mat" => {
                            let f = fields(args, 5, ln)?;
                            lp.mats.push((idx(f[0], ln)?, idx(f[1], ln)?, idx(f[2], ln)?, C64::new(num(f[3], ln)?, num(f[4], ln)?)));
                        }
                        "block" => {
                            let f = fields(args, 2, ln)?;
                            lp.blocks.push((idx(f[0], ln)?, idx(f[1], ln)?));
                        }
                        _ => {
                            let f = fields(args, 4, ln)?;
                            lp.weights.push((idx(f[0], ln)?, idx(f[1], ln)?, C64::new(num(f[2], ln)?, num(f[3], ln)?)));
                        }
                    }
                }
                _ => return Err(perr(ln, format!("unknown directive #{tag}"))),
            }
            continue;
        }
        let f = fields(line, 3, ln)?;
        let word = Word::parse(f[0], d).map_err(|e| perr(ln, e.to_string()))?;
        terms.push((word, C64::new(num(f[1], ln)?, num(f[2], ln)?)));
    }

    let tail = if unknown {
        if saw_tail {
            return Err(perr(0, "#tail-unknown conflicts with explicit tail lines"));
        }
        None
    } else if !saw_tail {
        Some(TailBound::zero())
    } else {
        let mut values = Vec::with_capacity(table.len());
        for (k, (&degree, &v)) in table.iter().enumerate() {
            if degree != cutoff + 1 + k {
                return Err(perr(0, format!("tail degrees must run consecutively from {}", cutoff + 1)));
            }
            values.push(v);
        }
        let tb = TailBound { table: values, envelope };
        tb.validate()?;
        Some(tb)
    };

    match linear {
        None => FreeSeries::from_terms(d, cutoff, terms)?.with_tail(tail),
        Some(lp) => {
            if !terms.is_empty() {
                return Err(perr(0, "a series file holds either coefficient lines or a linear representation"));
            }
            let rep = build_linear(d, cutoff, lp)?;
            FreeSeries::from_linear(d, cutoff, rep, tail)
        }
    }
}

fn build_linear(d: usize, cutoff: usize, lp: LinearParts) -> Result<LinearRep> {
    let s = lp.dim;
    let bad = |what: &str| perr(0, format!("{what} index out of range"));
    let mut u = CVector::zeros(s);
    let mut v = CVector::zeros(s);
    for &(i, x) in &lp.u {
        *u.get_mut(i).ok_or_else(|| bad("#u"))? = x;
    }
    for &(i, x) in &lp.v {
        *v.get_mut(i).ok_or_else(|| bad("#v"))? = x;
    }
    let mut mats = vec![zero(s, s); d];
    for &(j, r, col, x) in &lp.mats {
        if j == 0 || j > d || r >= s || col >= s {
            return Err(bad("#mat"));
        }
        mats[j - 1][(r, col)] = x;
    }
    let mut blocks: Vec<RepBlock> = if lp.blocks.is_empty() {
        vec![RepBlock { start: 0, len: s, weights: None }]
    } else {
        lp.blocks.iter().map(|&(start, len)| RepBlock { start, len, weights: None }).collect()
    };
    for &(b, degree, x) in &lp.weights {
        if degree > cutoff {
            continue;
        }
        let block = blocks.get_mut(b).ok_or_else(|| bad("#weight"))?;
        block.weights.get_or_insert_with(|| vec![c(0.0); cutoff + 1])[degree] = x;
    }
    LinearRep::with_blocks(u, mats, v, blocks)
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_c(z: C64) -> String {
    format!("{},{}", fmt_f(z.re), fmt_f(z.im))
}

/// Serialize with 17 significant digits, which round-trips every `f64`.
pub fn write_series(f: &FreeSeries) -> String {
    let mut out = format!("#ncseries d={} cutoff={}\n", f.alphabet(), f.cutoff());
    match f.coefficients() {
        Coefficients::Sparse(map) => {
            for (w, x) in map {
                let _ = writeln!(out, "{},{}", w.encode(), fmt_c(*x));
            }
        }
        Coefficients::Linear(rep) => {
            let _ = writeln!(out, "#linear dim={}", rep.dim());
            for (i, x) in rep.u().iter().enumerate().filter(|(_, x)| **x != c(0.0)) {
                let _ = writeln!(out, "#u {i},{}", fmt_c(*x));
            }
            for (i, x) in rep.v().iter().enumerate().filter(|(_, x)| **x != c(0.0)) {
                let _ = writeln!(out, "#v {i},{}", fmt_c(*x));
            }
            for (j, m) in rep.mats().iter().enumerate() {
                for col in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        if m[(r, col)] != c(0.0) {
                            let _ = writeln!(out, "#mat {},{r},{col},{}", j + 1, fmt_c(m[(r, col)]));
                        }
                    }
                }
            }
            let blocks = rep.blocks();
            if blocks.len() > 1 || blocks.iter().any(|b| b.weights.is_some()) {
                for b in blocks {
                    let _ = writeln!(out, "#block {},{}", b.start, b.len);
                }
                for (k, b) in blocks.iter().enumerate() {
                    if let Some(w) = &b.weights {
                        for (degree, x) in w.iter().enumerate().take(f.cutoff() + 1) {
                            let _ = writeln!(out, "#weight {k},{degree},{}", fmt_c(*x));
                        }
                    }
                }
            }
        }
    }
    match f.tail() {
        None => out.push_str("#tail-unknown\n"),
        Some(t) if t.is_zero() && t.table.is_empty() => {}
        Some(t) => {
            for (k, v) in t.table.iter().enumerate() {
                let _ = writeln!(out, "#tail {},{}", f.cutoff() + 1 + k, fmt_f(*v));
            }
            match t.envelope {
                Some(Envelope::Geometric { scale, ratio }) => {
                    let _ = writeln!(out, "#tail-envelope geometric,{},{}", fmt_f(scale), fmt_f(ratio));
                }
                Some(Envelope::Factorial { scale, base }) => {
                    let _ = writeln!(out, "#tail-envelope factorial,{},{}", fmt_f(scale), fmt_f(base));
                }
                None => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freemonoid::enumerate_words_upto;

    #[test]
    fn sparse_roundtrip_is_bit_exact() {
        let f = FreeSeries::from_terms(
            2,
            3,
            [
                (Word::parse("e", 2).unwrap(), C64::new(0.1, -1.0 / 3.0)),
                (Word::parse("121", 2).unwrap(), C64::new(std::f64::consts::PI, 1e-300)),
            ],
        )
        .unwrap()
        .with_tail(Some(TailBound { table: vec![0.25, 1.0 / 7.0], envelope: Some(Envelope::Geometric { scale: 2.0, ratio: 0.3 }) }))
        .unwrap();
        let text = write_series(&f);
        let g = parse_series(&text).unwrap();
        assert_eq!(write_series(&g), text);
        assert_eq!(g.terms().unwrap(), f.terms().unwrap());
        assert_eq!(g.tail(), f.tail());
    }

    #[test]
    fn linear_roundtrip() {
        let f = FreeSeries::inverse_factorial(3, 6);
        let g = parse_series(&write_series(&f)).unwrap();
        for w in enumerate_words_upto(3, 6) {
            assert_eq!(f.coeff(&w), g.coeff(&w));
        }
        assert_eq!(f.tail(), g.tail());
    }

    #[test]
    fn defaults_and_errors() {
        let p = parse_series("#ncseries d=2 cutoff=2\n1,1,0\n").unwrap();
        assert!(p.is_polynomial());
        let u = parse_series("#ncseries d=2 cutoff=2\n1,1,0\n#tail-unknown\n").unwrap();
        assert!(u.tail().is_none());
        assert!(parse_series("#ncseries d=2 cutoff=2\n3,1,0\n").is_err());
        assert!(parse_series("#ncseries d=2 cutoff=1\n12,1,0\n").is_err());
        assert!(parse_series("#ncseries d=2 cutoff=1\n#tail 3,1\n").is_err());
        assert!(parse_series("#ncseries d=2 cutoff=1\n#tail 2,-1\n").is_err());
        assert!(parse_series("1,1,0\n").is_err());
    }
}
