//! Panel-based integration with uniform bisection refinement.

use super::rules::gauss_legendre;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct PanelOptions {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Relative tolerance between successive refinement levels.
    pub tol: f64,
    /// Maximum number of bisection levels.
    pub max_levels: usize,
}

impl Default for PanelOptions {
    fn default() -> Self {
        PanelOptions {
            nodes: 64,
            tol: 1e-10,
            max_levels: 13,
        }
    }
}

/// Integrate f over [a, b], bisecting all panels until two successive
/// refinement levels agree to the relative tolerance.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: PanelOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gauss_legendre(opts.nodes);
    let fmax = std::cell::Cell::new(0.0f64);
    let level_value = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let lo = a + i as f64 * h;
            acc += rule.integrate(lo, lo + h, |x| {
                let v = f(x);
                if v.abs() > fmax.get() {
                    fmax.set(v.abs());
                }
                v
            });
        }
        acc
    };

    let mut prev = level_value(1);
    let mut diff = f64::INFINITY;
    for level in 1..=opts.max_levels {
        let cur = level_value(1 << level);
        let scale = cur.abs().max(fmax.get() * (b - a).abs() * 1e-3);
        diff = (cur - prev).abs();
        if diff <= opts.tol * scale || (scale == 0.0 && diff == 0.0) {
            return Ok(cur);
        }
        prev = cur;
    }
    let scale = prev.abs().max(fmax.get() * (b - a).abs() * 1e-3).max(1e-300);
    Err(Error::QuadratureNoConvergence {
        residual: diff / scale,
        tolerance: opts.tol,
        levels: opts.max_levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_integral() {
        let v = integrate_adaptive(|x| x.sin(), 0.0, std::f64::consts::PI, PanelOptions::default())
            .unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_integral_converges() {
        let v = integrate_adaptive(|x| x, -1.0, 1.0, PanelOptions::default()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn oscillatory_integral() {
        // int_0^1 cos(50 x) dx = sin(50)/50
        let v = integrate_adaptive(|x| (50.0 * x).cos(), 0.0, 1.0, PanelOptions::default()).unwrap();
        assert_relative_eq!(v, 50f64.sin() / 50.0, max_relative = 1e-10);
    }
}
