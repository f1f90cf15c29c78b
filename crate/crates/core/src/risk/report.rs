//! Risk reports, their CSV form and log-log rate fits.

use crate::error::{invalid, Error, Result};
use std::fmt::Write as _;

pub const CSV_HEADER: &str = "n,estimator,adversary,risk,se,reps";

/// Adversary label of the worst-case row.
pub const SUP: &str = "sup";

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub n: usize,
    pub estimator: String,
    pub adversary: String,
    pub risk: f64,
    pub se: f64,
    pub reps: usize,
}

/// Least squares fit of `log2 risk = slope · log2 n + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub estimator: String,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log2 residuals.
    pub residual: f64,
    /// `-2m / (2m + 1)` when a smoothness is supplied.
    pub target: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    pub fits: Vec<RateFit>,
}

fn check_label(s: &str) -> Result<()> {
    if s.contains([',', '\n', '"']) {
        return Err(invalid(format!("label `{s}` is not CSV-safe")));
    }
    Ok(())
}

impl RiskReport {
    pub fn push(&mut self, row: RiskRow) {
        self.rows.push(row);
    }

    /// Distinct estimator labels in first-seen order.
    pub fn estimators(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.estimator) {
                out.push(r.estimator.clone());
            }
        }
        out
    }

    /// Fits every estimator with at least four sample sizes.
    pub fn fit_all(&mut self, m: Option<f64>) {
        self.fits = self
            .estimators()
            .into_iter()
            .filter_map(|e| {
                let rows: Vec<RiskRow> = self.rows.iter().filter(|r| r.estimator == e).cloned().collect();
                rate_fit(&rows, m).ok()
            })
            .collect();
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            check_label(&r.estimator)?;
            check_label(&r.adversary)?;
            let _ = writeln!(s, "{},{},{},{},{},{}", r.n, r.estimator, r.adversary, r.risk, r.se, r.reps);
        }
        for f in &self.fits {
            check_label(&f.estimator)?;
            let mut fields = vec![("slope", f.slope), ("intercept", f.intercept), ("residual", f.residual)];
            if let Some(t) = f.target {
                fields.push(("target", t));
            }
            for (k, v) in fields {
                let _ = writeln!(s, "fit,{},{k},{v},,{}", f.estimator, f.points);
            }
        }
        Ok(s)
    }

    /// Parses data rows; fit footer rows are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`") }),
        }
        let mut report = RiskReport::default();
        for (i, line) in lines {
            let parse_err = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(parse_err("expected 6 fields"));
            }
            if f[0] == "fit" {
                continue;
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| parse_err("bad number"));
            report.rows.push(RiskRow {
                n: f[0].trim().parse().map_err(|_| parse_err("bad n"))?,
                estimator: f[1].to_string(),
                adversary: f[2].to_string(),
                risk: num(f[3])?,
                se: num(f[4])?,
                reps: f[5].trim().parse().map_err(|_| parse_err("bad reps"))?,
            });
        }
        Ok(report)
    }
}

/// Fits `(log2 n, log2 risk)` over rows of one estimator. When `sup` rows are
/// present only those are used; otherwise each `n` must appear once.
pub fn rate_fit(rows: &[RiskRow], m: Option<f64>) -> Result<RateFit> {
    let Some(first) = rows.first() else {
        return Err(invalid("rate fit needs at least 4 sample sizes, got none"));
    };
    if rows.iter().any(|r| r.estimator != first.estimator) {
        return Err(invalid("rate fit rows mix estimators"));
    }
    let use_sup = rows.iter().any(|r| r.adversary == SUP);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut seen = Vec::new();
    for r in rows.iter().filter(|r| !use_sup || r.adversary == SUP) {
        if seen.contains(&r.n) {
            return Err(invalid(format!("rate fit has several rows for n = {}", r.n)));
        }
        if !(r.risk > 0.0) {
            return Err(Error::Numerical(format!("non-positive risk {} at n = {}", r.risk, r.n)));
        }
        seen.push(r.n);
        pts.push(((r.n as f64).log2(), r.risk.log2()));
    }
    if pts.len() < 4 {
        return Err(invalid(format!("rate fit needs at least 4 sample sizes, got {}", pts.len())));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit {
        estimator: first.estimator.clone(),
        slope,
        intercept,
        residual: (rss / k).sqrt(),
        target: m.map(|m| -2.0 * m / (2.0 * m + 1.0)),
        points: pts.len(),
    })
}
