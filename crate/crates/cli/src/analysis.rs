//! Convergence rates and relative errors.

use std::collections::BTreeMap;
use std::io::Write;

use finapprox::measure::{expectation, DiscreteDistribution, PerformanceFunctional};
use finapprox::{Error, Result};

/// Least-squares line through `(ln(2^r + 1), ln value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub method: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_min: u32,
    pub r_max: u32,
    pub points: usize,
}

pub const MIN_RATE_POINTS: usize = 4;

impl RateFit {
    pub const CSV_HEADER: &'static str = "method,slope,intercept,r_min,r_max,points";

    pub fn csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e},{},{},{}", self.method, self.slope, self.intercept, self.r_min, self.r_max, self.points)
    }
}

pub fn fit_rate(method: &str, residues: &[(u32, f64)]) -> Result<RateFit> {
    if residues.len() < MIN_RATE_POINTS {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least {MIN_RATE_POINTS} points, got {}",
            residues.len()
        )));
    }
    if let Some(&(r, v)) = residues.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Domain(format!("residue {v} at r = {r} is not positive")));
    }
    let pts: Vec<(f64, f64)> = residues.iter().map(|&(r, v)| ((((1u64 << r) + 1) as f64).ln(), v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct levels".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        method: method.to_string(),
        slope,
        intercept: my - slope * mx,
        r_min: residues.iter().map(|p| p.0).min().unwrap_or(0),
        r_max: residues.iter().map(|p| p.0).max().unwrap_or(0),
        points: residues.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeError {
    pub method: String,
    pub functional: String,
    pub value: f64,
    pub reference: f64,
    /// `|m − m_ref| / |m_ref|`, or `|m − m_ref|` when `relative` is false.
    pub error: f64,
    /// False when the reference value is zero.
    pub relative: bool,
}

pub const RELATIVE_ERROR_HEADER: &str = "method,functional,value,reference,error,relative";

impl RelativeError {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{}",
            self.method, self.functional, self.value, self.reference, self.error, self.relative
        )
    }
}

/// One row per method and functional, methods in key order.
pub fn relative_error_table(
    reference: &DiscreteDistribution,
    others: &BTreeMap<String, DiscreteDistribution>,
    functionals: &[PerformanceFunctional],
) -> Vec<RelativeError> {
    let refs: Vec<f64> = functionals.iter().map(|g| expectation(g, reference)).collect();
    let mut rows = Vec::new();
    for (method, p) in others {
        for (g, &m_ref) in functionals.iter().zip(&refs) {
            let value = expectation(g, p);
            let relative = m_ref != 0.0;
            let error = if relative { (value - m_ref).abs() / m_ref.abs() } else { (value - m_ref).abs() };
            rows.push(RelativeError {
                method: method.clone(),
                functional: g.name().to_string(),
                value,
                reference: m_ref,
                error,
                relative,
            });
        }
    }
    rows
}

pub fn write_relative_errors<W: Write>(rows: &[RelativeError], mut out: W) -> Result<()> {
    writeln!(out, "{RELATIVE_ERROR_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}
