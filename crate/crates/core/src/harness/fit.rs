//! Power-law fits `y ≈ a·x^b` by least squares on `(ln x, ln y)`.

use super::regret::RegretTable;
use crate::error::{Error, Result};

/// Minimum number of usable points for a fit.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
    /// `ln y − (ln a + b ln x)` for each point used.
    pub residuals: Vec<f64>,
    /// `x` values dropped because their `y` was not positive.
    pub excluded: Vec<f64>,
}

pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<GrowthFit> {
    if xs.len() != ys.len() {
        return Err(Error::Internal("fit inputs differ in length".into()));
    }
    let mut excluded = Vec::new();
    let mut pts = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 && y.is_finite() {
            pts.push((x.ln(), y.ln()));
        } else {
            excluded.push(x);
        }
    }
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_FIT_POINTS {
        return Err(Error::Domain(format!(
            "power-law fit needs {MIN_FIT_POINTS} distinct points with positive values, got {}",
            distinct.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - intercept - exponent * p.0).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(GrowthFit {
        exponent,
        coefficient: intercept.exp(),
        r_squared,
        residuals,
        excluded,
    })
}

/// Fits mean regret against `T` for one policy of a table.
pub fn fit_growth(table: &RegretTable, policy: &str) -> Result<GrowthFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = table
        .rows_for(policy)
        .map(|r| (r.horizon as f64, r.mean))
        .unzip();
    fit_power_law(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [1e3, 2e3, 4e3, 8e3, 1.6e4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.sqrt()).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!((fit.coefficient - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polylog_fits_small_exponent() {
        let xs = [1e3, 1e4, 1e5, 3e3, 3e4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * x.ln().powi(2)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!(fit.exponent <= 0.25, "{}", fit.exponent);
    }

    #[test]
    fn constant_and_excluded_points() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let fit = fit_power_law(&xs, &[5.0; 5]).unwrap();
        assert!(fit.exponent.abs() <= 0.02);
        let fit = fit_power_law(&xs, &[1.0, -1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(fit.excluded, vec![2.0]);
        assert!(fit_power_law(&xs, &[1.0, -1.0, 0.0, 1.0, 1.0]).is_err());
    }
}
