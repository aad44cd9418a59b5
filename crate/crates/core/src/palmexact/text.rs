//! Line-oriented text form of a [`ConfigDistribution`]:
//!
//! ```text
//! atoms 2
//! metric
//! 0.0000000000000000e0 1.0000000000000000e0
//! 1.0000000000000000e0 0.0000000000000000e0
//! truncated 0.0000000000000000e0
//! 0 1 5.0000000000000000e-1
//! 1 0 5.0000000000000000e-1
//! ```
//!
//! Each row after the header is the atom counts followed by the probability.
//! Reals are written with 17 significant digits, which round-trips every `f64`.

use super::{ConfigDistribution, CountConfiguration};
use crate::carrier::DistanceMatrix;
use crate::error::{Error, Result};

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_text(d: &ConfigDistribution) -> String {
    let k = d.atoms();
    let mut out = format!("atoms {k}\nmetric\n");
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| real(d.carrier().get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out.push_str(&format!("truncated {}\n", real(d.truncated_mass())));
    for (c, p) in d.iter() {
        for n in c.counts() {
            out.push_str(&format!("{n} "));
        }
        out.push_str(&real(p));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_real(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|e| parse_err(line, format!("bad number {tok:?}: {e}")))
}

pub fn from_text(s: &str) -> Result<ConfigDistribution> {
    let mut lines = s.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (ln, head) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let k: usize = head
        .strip_prefix("atoms ")
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| parse_err(ln, "expected `atoms <k>`"))?;
    let (ln, m) = lines.next().ok_or_else(|| parse_err(ln + 1, "missing metric block"))?;
    if m != "metric" {
        return Err(parse_err(ln, "expected `metric`"));
    }
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "metric block too short"))?;
        let row: Vec<f64> = l.split_whitespace().map(|t| parse_real(t, ln)).collect::<Result<_>>()?;
        if row.len() != k {
            return Err(parse_err(ln, format!("metric row has {} entries, expected {k}", row.len())));
        }
        rows.push(row);
    }
    let carrier = DistanceMatrix::new(&rows).map_err(|e| parse_err(ln, e.to_string()))?;
    let (ln, t) = lines.next().ok_or_else(|| parse_err(ln, "missing `truncated` line"))?;
    let truncated = t
        .strip_prefix("truncated ")
        .ok_or_else(|| parse_err(ln, "expected `truncated <mass>`"))
        .and_then(|r| parse_real(r.trim(), ln))?;
    let mut entries = Vec::new();
    let mut last = ln;
    for (ln, l) in lines {
        last = ln;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != k + 1 {
            return Err(parse_err(ln, format!("row has {} fields, expected {}", toks.len(), k + 1)));
        }
        let counts: Vec<u32> = toks[..k]
            .iter()
            .map(|t| t.parse::<u32>().map_err(|e| parse_err(ln, format!("bad count {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        entries.push((CountConfiguration::new(counts), parse_real(toks[k], ln)?));
    }
    ConfigDistribution::new(carrier, entries, truncated).map_err(|e| parse_err(last, e.to_string()))
}
