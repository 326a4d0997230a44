use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line with its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points that entered the fit.
    pub used: usize,
    /// Points dropped (nonpositive or non-finite values in a log-log fit).
    pub excluded: usize,
}

/// Least squares of `log y` against `log x`. Points with `y ≤ 0` are
/// excluded and counted.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::param("slope_fit needs as many x as y values"));
    }
    if let Some(x) = xs.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain(format!("slope_fit needs positive x, got {x}")));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    let excluded = xs.len() - lx.len();
    let mut fit = linear_fit(&lx, &ly)?;
    fit.excluded = excluded;
    Ok(fit)
}

/// Ordinary least squares of `y` against `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::param("linear_fit needs as many x as y values"));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::DegenerateFit { usable: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit { usable: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    // A flat series is fitted perfectly.
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(Fit {
        slope,
        intercept,
        r_squared,
        used: n,
        excluded: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let f = slope_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_series() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let f = slope_fit(&xs, &[5.0; 4]).unwrap();
        assert!(f.slope.abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn zeros_are_excluded() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.0, 0.0, 1.0 / 9.0, 1.0 / 16.0, 0.0];
        let f = slope_fit(&xs, &ys).unwrap();
        assert_eq!((f.used, f.excluded), (3, 2));
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!(matches!(
            slope_fit(&xs, &[1.0, 0.0, 0.0, 0.0, 2.0]),
            Err(Error::DegenerateFit { usable: 2 })
        ));
        assert!(slope_fit(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
    }
}
