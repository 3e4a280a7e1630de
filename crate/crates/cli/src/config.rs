//! Config files and argument merging; output formatting and atomic writes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Command};
use serde_json::{json, Value};

use freenc::{Error, Result};

/// Environment variable naming the directory for relative output paths.
pub const OUT_DIR_ENV: &str = "FREENC_OUT_DIR";

/// `key = value` lines; `#` starts a comment. Keys are long flag names.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key=value, got '{line}'") })?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() || k == "config" {
            return Err(Error::Parse { line: i + 1, msg: format!("invalid key '{k}'") });
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splice the settings of `--config FILE` in front of the explicit
/// arguments, so that anything given on the command line wins.
pub fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => {
                path = Some(it.next().ok_or_else(|| Error::InvalidArgument("--config needs a path".into()))?);
            }
            Some(s) if s.starts_with("--config=") => path = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path)?;
    let settings = parse_config(&text)?;
    // rest = [program, subcommand, args…]
    if rest.len() < 2 {
        return Err(Error::InvalidArgument("--config given without a subcommand".into()));
    }
    let mut out: Vec<OsString> = rest[..2].to_vec();
    out.extend(settings.into_iter().map(|(k, v)| OsString::from(format!("--{k}={v}"))));
    out.extend(rest.into_iter().skip(2));
    Ok(out)
}

/// Every argument of the subcommand with its resolved value, defaults
/// included, keyed by long flag name so the map can be replayed as a config
/// file.
pub fn resolved(cmd: &Command, m: &ArgMatches) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for arg in cmd.get_arguments() {
        let (Some(long), id) = (arg.get_long(), arg.get_id().as_str()) else {
            continue;
        };
        if long == "config" {
            continue;
        }
        if let Ok(Some(vals)) = m.try_get_raw(id) {
            let joined: Vec<String> = vals.map(|v| v.to_string_lossy().into_owned()).collect();
            out.insert(long.to_string(), joined.join(","));
        }
    }
    out
}

/// Six significant digits, trailing zeros removed.
pub fn human(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

/// Seventeen significant digits.
pub fn machine(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number, or a string for values JSON cannot represent.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(machine(x))
    }
}

pub fn output_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let path = output_path(path);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, content)?;
    fs::rename(&tmp, &path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Comma-separated list, or `lo:hi:count` for an evenly spaced grid.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::InvalidArgument(format!("bad number list '{s}': {what}"));
    if let [lo, hi, k] = s.split(':').collect::<Vec<_>>()[..] {
        let lo: f64 = lo.trim().parse().map_err(|_| bad("grid start"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad("grid end"))?;
        let k: usize = k.trim().parse().map_err(|_| bad("grid count"))?;
        return match k {
            0 => Err(bad("empty grid")),
            1 => Ok(vec![lo]),
            _ => Ok((0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()),
        };
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad(t))).collect()
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidArgument(format!("bad integer '{t}' in '{s}'"))))
        .collect()
}
