//! Composite quadrature for integrals of the form
//!
//!   integral over [0, T] of  f(s) * (cosh T - cosh s)^alpha  ds,
//!
//! the workhorse behind spherical-function evaluation, radial transforms and
//! multiplier kernels. The endpoint factor vanishes (or blows up) at s = T
//! with a half-power law whenever alpha is not an integer; a Gauss-Jacobi
//! panel at the right end removes that singularity exactly, while the
//! interior is covered by Gauss-Legendre panels sized against the integrand's
//! oscillation. Optional interior features (spikes of a known scale) get
//! geometrically refined panels.

use super::rules::{gauss_jacobi, gauss_legendre};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, Mul};

#[derive(Clone, Copy, Debug)]
pub struct HyperOptions {
    /// Maximum phase advance of the oscillatory factor per panel.
    pub phase_per_panel: f64,
    /// Gauss nodes per panel.
    pub panel_nodes: usize,
    /// Hard budget on the total node count.
    pub max_nodes: usize,
    /// Cap on panel width regardless of oscillation.
    pub h_max: f64,
}

impl Default for HyperOptions {
    fn default() -> Self {
        HyperOptions {
            phase_per_panel: 20.0,
            panel_nodes: 24,
            max_nodes: 1 << 15,
            h_max: 0.5,
        }
    }
}

impl HyperOptions {
    /// Same scheme with every resolution knob doubled (stability checks).
    pub fn doubled(self) -> Self {
        HyperOptions {
            phase_per_panel: self.phase_per_panel / 2.0,
            panel_nodes: self.panel_nodes * 2,
            max_nodes: self.max_nodes * 4,
            h_max: self.h_max / 2.0,
        }
    }
}

/// cosh(t) - cosh(s) evaluated without cancellation as 2 sinh((t+s)/2) sinh((t-s)/2).
pub fn cosh_diff(t: f64, s: f64) -> f64 {
    2.0 * ((t + s) * 0.5).sinh() * ((t - s) * 0.5).sinh()
}

/// (cosh t - cosh s) / (t - s), stable as s -> t.
fn cosh_diff_ratio(t: f64, s: f64) -> f64 {
    let half = (t - s) * 0.5;
    let sinhc = if half.abs() < 1e-8 {
        1.0 + half * half / 6.0
    } else {
        half.sinh() / half
    };
    ((t + s) * 0.5).sinh() * sinhc
}

/// Discretization of the measure (cosh T - cosh s)^alpha ds on [0, T]:
/// sum of w_i * f(s_i) approximates the integral of f against that measure.
#[derive(Clone, Debug)]
pub struct HyperNodes {
    pub s: Vec<f64>,
    pub w: Vec<f64>,
}

impl HyperNodes {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn apply<T, F>(&self, mut f: F) -> T
    where
        T: Accumulate,
        F: FnMut(f64) -> T,
    {
        let mut acc = T::zero();
        for (s, w) in self.s.iter().zip(&self.w) {
            acc = acc + f(*s) * *w;
        }
        acc
    }
}

/// Scalar types the quadrature can accumulate.
pub trait Accumulate: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Accumulate for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Accumulate for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

fn push_feature_breakpoints(breaks: &mut Vec<f64>, loc: f64, scale: f64, lo: f64, hi: f64) {
    if loc >= hi {
        return;
    }
    let mut d = scale.max(1e-300);
    if loc <= lo {
        // one-sided geometric ladder away from the left edge
        while lo + d < hi {
            breaks.push(lo + d);
            d *= 2.0;
        }
        return;
    }
    breaks.push(loc);
    loop {
        let mut advanced = false;
        if loc - d > lo {
            breaks.push(loc - d);
            advanced = true;
        }
        if loc + d < hi {
            breaks.push(loc + d);
            advanced = true;
        }
        if !advanced {
            break;
        }
        d *= 2.0;
    }
}

/// Build nodes for the measure (cosh T - cosh s)^alpha ds on [0, T].
///
/// `osc_freq` bounds |d phase/ds| of the integrand that will be applied;
/// `features` lists interior points needing geometric refinement, as
/// (location, smallest resolved scale) pairs.
pub fn hyper_nodes(
    t_end: f64,
    alpha: f64,
    osc_freq: f64,
    features: &[(f64, f64)],
    opts: &HyperOptions,
) -> Result<HyperNodes> {
    if t_end <= 0.0 {
        return Ok(HyperNodes {
            s: Vec::new(),
            w: Vec::new(),
        });
    }
    let freq = osc_freq.abs().max(1e-12);
    let h_osc = (opts.phase_per_panel / freq).min(opts.h_max);

    // Jacobi end panel absorbing the (T - s)^alpha factor.
    let h_end = h_osc.min(t_end * 0.5).min(t_end);
    let jacobi_lo = t_end - h_end;

    let mut breaks = vec![0.0, jacobi_lo];
    for &(loc, scale) in features {
        push_feature_breakpoints(&mut breaks, loc, scale, 0.0, jacobi_lo);
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * t_end.max(1.0));

    // Count nodes before allocating: each segment splits by the phase limit.
    let mut total = opts.panel_nodes; // end panel
    let mut segment_panels = Vec::with_capacity(breaks.len());
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let panels = (((hi - lo) / h_osc).ceil() as usize).max(1);
        segment_panels.push(panels);
        total += panels * opts.panel_nodes;
    }
    if total > opts.max_nodes {
        return Err(Error::NodeBudgetExceeded {
            required: total,
            budget: opts.max_nodes,
            phase: freq * t_end,
        });
    }

    let gl = gauss_legendre(opts.panel_nodes);
    let gj = gauss_jacobi(opts.panel_nodes, alpha, 0.0)?;
    let mut s = Vec::with_capacity(total);
    let mut w = Vec::with_capacity(total);

    for (win, &panels) in breaks.windows(2).zip(&segment_panels) {
        let (lo, hi) = (win[0], win[1]);
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let a = lo + p as f64 * h;
            let half = 0.5 * h;
            let mid = a + half;
            for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
                let si = mid + half * x;
                s.push(si);
                w.push(wt * half * cosh_diff(t_end, si).powf(alpha));
            }
        }
    }

    // End panel: s = T - h_end (1 - x)/2, weight (T-s)^alpha * q(s)^alpha.
    let half = 0.5 * h_end;
    let scale = half.powf(alpha + 1.0);
    for (x, wt) in gj.nodes.iter().zip(&gj.weights) {
        let si = t_end - half * (1.0 - x);
        s.push(si);
        w.push(wt * scale * cosh_diff_ratio(t_end, si).powf(alpha));
    }

    Ok(HyperNodes { s, w })
}

/// One-shot integral of f against (cosh T - cosh s)^alpha ds on [0, T].
pub fn hyper_integral<T, F>(
    t_end: f64,
    alpha: f64,
    osc_freq: f64,
    features: &[(f64, f64)],
    opts: &HyperOptions,
    f: F,
) -> Result<T>
where
    T: Accumulate,
    F: FnMut(f64) -> T,
{
    Ok(hyper_nodes(t_end, alpha, osc_freq, features, opts)?.apply(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plain_cosine_against_closed_form() {
        // alpha = 0: int_0^T cos(lambda s) ds = sin(lambda T)/lambda
        let opts = HyperOptions::default();
        for &(t, lam) in &[(1.0, 3.0), (2.0, 40.0), (5.0, 311.0), (0.01, 0.5)] {
            let v: f64 = hyper_integral(t, 0.0, lam, &[], &opts, |s| (lam * s).cos()).unwrap();
            assert_relative_eq!(v, (lam * t as f64).sin() / lam, max_relative = 1e-11);
        }
    }

    #[test]
    fn endpoint_singularity_exact() {
        // int_0^T (cosh T - cosh s)^{-1/2} ds, T = 1, against adaptive reference
        // computed by substitution u = cosh s in high precision externally:
        // cross-check here via two different node budgets agreeing.
        let a = hyper_integral::<f64, _>(1.0, -0.5, 1.0, &[], &HyperOptions::default(), |_| 1.0)
            .unwrap();
        let b = hyper_integral::<f64, _>(
            1.0,
            -0.5,
            1.0,
            &[],
            &HyperOptions::default().doubled(),
            |_| 1.0,
        )
        .unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn oscillation_with_singular_end() {
        // Self-consistency under refinement for an oscillatory singular integrand.
        let f = |s: f64| (87.0 * s).cos() * (1.0 + s);
        let a = hyper_integral::<f64, _>(2.0, -0.5, 87.0, &[], &HyperOptions::default(), f).unwrap();
        let b =
            hyper_integral::<f64, _>(2.0, -0.5, 87.0, &[], &HyperOptions::default().doubled(), f)
                .unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-11);
    }

    #[test]
    fn budget_error() {
        let opts = HyperOptions {
            max_nodes: 128,
            ..HyperOptions::default()
        };
        let err = hyper_nodes(10.0, 0.0, 1e4, &[], &opts).unwrap_err();
        match err {
            crate::error::Error::NodeBudgetExceeded { required, .. } => assert!(required > 128),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn feature_refinement_resolves_spike() {
        // int_0^2 eta/(eta^2 + (s-1)^2) ds with eta = 1e-5: arctan mass ~ pi.
        let eta = 1e-5;
        let f = |s: f64| eta / (eta * eta + (s - 1.0) * (s - 1.0));
        let v: f64 =
            hyper_integral(2.0, 0.0, 1.0, &[(1.0, eta)], &HyperOptions::default(), f).unwrap();
        let exact = (1.0f64 / eta).atan() * 2.0;
        assert_relative_eq!(v, exact, max_relative = 1e-9);
    }
}
