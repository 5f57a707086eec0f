//! Power-law exponent fitting on log-log scales.

use crate::error::{Error, Result};

/// Least-squares line through (ln x, ln y): y ~ exp(intercept) * x^slope.
#[derive(Clone, Copy, Debug)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Two standard errors of the slope.
    pub half_width: f64,
    pub residual_rms: f64,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Fit y ~ C x^slope by least squares in log-log coordinates.
/// Points with nonpositive y are dropped; at least three must survive.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let m = pts.len();
    if m < 3 {
        return Err(Error::FitFailed(format!(
            "only {m} usable points for a log-log fit"
        )));
    }
    let mf = m as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / mf;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailed("degenerate abscissa".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let dof = (m as f64 - 2.0).max(1.0);
    let se = (ss_res / dof / sxx).sqrt();
    Ok(PowerLawFit {
        slope,
        intercept,
        half_width: 2.0 * se,
        residual_rms: (ss_res / mf).sqrt(),
    })
}

/// Fit the upper envelope of an oscillating decay: take the running maximum
/// of |y| over windows of `window` consecutive samples before fitting.
pub fn fit_loglog_envelope(xs: &[f64], ys: &[f64], window: usize) -> Result<PowerLawFit> {
    assert_eq!(xs.len(), ys.len());
    let w = window.max(1);
    let mut ex = Vec::new();
    let mut ey = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        let j = (i + w).min(xs.len());
        let mut best = 0usize;
        let mut best_v = -1.0;
        for k in i..j {
            let v = ys[k].abs();
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        ex.push(xs[best]);
        ey.push(best_v);
        i = j;
    }
    fit_loglog(&ex, &ey)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_exact_power() {
        let xs: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.7 * x.powf(-1.25)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -1.25, max_relative = 1e-12);
        assert!(fit.half_width < 1e-10);
    }

    #[test]
    fn envelope_handles_oscillation() {
        let xs: Vec<f64> = (1..=400).map(|k| 1.0 + k as f64 * 0.25).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.powf(-0.5) * (7.3 * x).sin())
            .collect();
        let fit = fit_loglog_envelope(&xs, &ys, 10).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn too_few_points_is_error() {
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, -2.0, 0.0]).is_err());
    }
}
