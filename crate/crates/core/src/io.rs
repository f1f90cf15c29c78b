//! Signal files and CSV serialisations.
//!
//! * Text signals: one decimal float per line (blank lines and `#` comments
//!   are skipped).
//! * Binary signals (`.f64`): raw little-endian 64-bit floats.
//! * Pyramids: `level,index,value`; scaling coefficients use level `-1`.
//! * Retention masks: `level,index,kept` with the same level convention.
//!
//! Writers go through a temporary file in the destination directory followed
//! by an atomic rename, so a failed run never leaves a truncated file.

use crate::error::{Error, Result};
use crate::threshold::RetentionMask;
use crate::wavelet::{CoeffPyramid, Signal};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("f64"))
}

pub fn parse_text_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Parse { line: i + 1, msg: format!("not a number: `{t}`") })?;
        out.push(v);
    }
    Ok(out)
}

pub fn decode_binary_samples(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Parse { line: 0, msg: format!("{} bytes is not a whole number of f64", bytes.len()) });
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    let samples = if is_binary(path) {
        decode_binary_samples(&std::fs::read(path)?)?
    } else {
        parse_text_samples(&std::fs::read_to_string(path)?)?
    };
    Signal::new(samples)
}

pub fn encode_signal(samples: &[f64], binary: bool) -> Vec<u8> {
    if binary {
        samples.iter().flat_map(|x| x.to_le_bytes()).collect()
    } else {
        let mut s = String::with_capacity(samples.len() * 20);
        for x in samples {
            let _ = writeln!(s, "{x}");
        }
        s.into_bytes()
    }
}

pub fn write_signal(path: &Path, samples: &[f64]) -> Result<()> {
    write_atomic(path, &encode_signal(samples, is_binary(path)))
}

pub fn pyramid_to_csv(p: &CoeffPyramid) -> String {
    let mut s = String::from("level,index,value\n");
    for (k, v) in p.scaling().iter().enumerate() {
        let _ = writeln!(s, "-1,{k},{v}");
    }
    for j in p.levels() {
        for (k, v) in p.level(j).iter().enumerate() {
            let _ = writeln!(s, "{j},{k},{v}");
        }
    }
    s
}

pub fn pyramid_from_csv(text: &str) -> Result<CoeffPyramid> {
    let mut scaling: Vec<(usize, f64)> = Vec::new();
    let mut levels: std::collections::BTreeMap<usize, Vec<(usize, f64)>> = Default::default();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
        let mut it = line.split(',');
        let (Some(l), Some(k), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(bad("expected three fields"));
        };
        let level: i64 = l.trim().parse().map_err(|_| bad("bad level"))?;
        let index: usize = k.trim().parse().map_err(|_| bad("bad index"))?;
        let value: f64 = v.trim().parse().map_err(|_| bad("bad value"))?;
        if level < 0 {
            scaling.push((index, value));
        } else {
            levels.entry(level as usize).or_default().push((index, value));
        }
    }
    let collect = |mut rows: Vec<(usize, f64)>| -> Result<Vec<f64>> {
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::Shape("pyramid indices are not contiguous".into()));
        }
        Ok(rows.into_iter().map(|r| r.1).collect())
    };
    let j0 = *levels.keys().next().ok_or_else(|| Error::Shape("no detail levels".into()))?;
    let mut details = Vec::new();
    for (expect, (j, rows)) in (j0..).zip(levels) {
        if j != expect {
            return Err(Error::Shape(format!("missing detail level {expect}")));
        }
        details.push(collect(rows)?);
    }
    CoeffPyramid::new(j0, collect(scaling)?, details)
}

pub fn mask_to_csv(mask: &RetentionMask) -> String {
    let mut s = String::from("level,index,kept\n");
    for (k, &b) in mask.scaling().iter().enumerate() {
        let _ = writeln!(s, "-1,{k},{}", b as u8);
    }
    for j in mask.levels() {
        for (k, &b) in mask.level(j).iter().enumerate() {
            let _ = writeln!(s, "{j},{k},{}", b as u8);
        }
    }
    s
}
