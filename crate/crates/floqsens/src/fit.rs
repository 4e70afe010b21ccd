//! Ordinary least-squares line fits with basic diagnostics.

use crate::error::{Error, Result};
use serde::Serialize;

/// y ≈ slope·x + intercept.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r2: f64,
    /// Standard error of the slope (NaN for two points).
    pub slope_stderr: f64,
    pub points: usize,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("fit inputs differ in length".into()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "a line fit needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("fit inputs must be finite".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        points: n,
    })
}

/// Fit log y = x·log t + c; returns the power-law exponent as the slope.
pub fn power_law(ts: &[f64], ys: &[f64]) -> Result<LineFit> {
    if ts.iter().chain(ys).any(|v| *v <= 0.0) {
        return Err(Error::InvalidArgument(
            "power-law fit needs positive data".into(),
        ));
    }
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    ols(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let f = ols(&xs, &ys).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_law_exponent_and_r2() {
        let ts = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = ts.iter().map(|t: &f64| 3.0 * t.powf(-0.75)).collect();
        assert!((power_law(&ts, &ys).unwrap().slope + 0.75).abs() < 1e-12);
        // Noisy data: r² below one, matches hand computation for a three-point set.
        let f = ols(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-14);
        assert!((f.r2 - 0.25).abs() < 1e-12);
        assert!(ols(&[1.0], &[1.0]).is_err());
        assert!(power_law(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
