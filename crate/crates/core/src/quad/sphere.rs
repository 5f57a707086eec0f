//! Integrals over the unit sphere S^n in R^{n+1}.
//!
//! Zonal integrands (functions of the last coordinate only) reduce to a
//! one-dimensional Jacobi-weighted integral; general integrands are handled
//! by the recursive product construction, which is only needed at small n.

use super::rules::{gauss_jacobi, gauss_legendre};
use crate::error::Result;
use crate::specfun::gamma_real;
use std::f64::consts::PI;

/// Surface area of S^n: 2 pi^{(n+1)/2} / Gamma((n+1)/2); S^0 counts two points.
pub fn sphere_surface(n: usize) -> f64 {
    2.0 * PI.powf((n as f64 + 1.0) / 2.0) / gamma_real((n as f64 + 1.0) / 2.0).unwrap()
}

/// integral over S^n of f(omega_{n+1}) d omega
///   = nu_{n-1} * integral over [-1,1] of f(u) (1-u^2)^{(n-2)/2} du.
pub fn zonal_integral<F: FnMut(f64) -> f64>(n: usize, deg: usize, mut f: F) -> Result<f64> {
    assert!(n >= 1);
    let a = (n as f64 - 2.0) / 2.0;
    let rule = gauss_jacobi(deg, a, a)?;
    let prefactor = if n == 1 { 2.0 } else { sphere_surface(n - 1) };
    Ok(prefactor * rule.integrate_weighted(-1.0, 1.0, |u| f(u)))
}

/// Zonal integral of f with a known kink at u = u0 (the integrand is smooth
/// on each side); the interval is split there with one-sided Jacobi rules.
pub fn zonal_integral_split<F: FnMut(f64) -> f64>(
    n: usize,
    deg: usize,
    u0: f64,
    mut f: F,
) -> Result<f64> {
    if !(-1.0 < u0 && u0 < 1.0) {
        return zonal_integral(n, deg, f);
    }
    let a = (n as f64 - 2.0) / 2.0;
    let prefactor = if n == 1 { 2.0 } else { sphere_surface(n - 1) };
    // [-1, u0]: singular weight only at -1; fold (1-u)^a as a smooth factor.
    let left = gauss_jacobi(deg, 0.0, a)?
        .integrate_weighted(-1.0, u0, |u| f(u) * (1.0 - u).powf(a));
    let right = gauss_jacobi(deg, a, 0.0)?
        .integrate_weighted(u0, 1.0, |u| f(u) * (1.0 + u).powf(a));
    Ok(prefactor * (left + right))
}

/// Zonal integral for integrands with a boundary layer of width `layer`
/// (measured in the 1+u variable) at u = -1, which defeats plain
/// Gauss-Jacobi once layer << 1/deg^2. Geometric panels from the layer scale
/// outward resolve it at logarithmic cost. The integrand receives both u and
/// 1+u (the latter exact near the layer, where forming 1+u from u cancels).
/// An optional kink location (in u) is inserted as a panel boundary.
pub fn zonal_integral_layered<F: FnMut(f64, f64) -> f64>(
    n: usize,
    deg: usize,
    layer: f64,
    kink: Option<f64>,
    mut f: F,
) -> Result<f64> {
    assert!(n >= 1);
    if layer >= 0.05 {
        return match kink {
            Some(u0) => zonal_integral_split(n, deg, u0, |u| f(u, 1.0 + u)),
            None => zonal_integral(n, deg, |u| f(u, 1.0 + u)),
        };
    }
    let a = (n as f64 - 2.0) / 2.0;
    let prefactor = if n == 1 { 2.0 } else { sphere_surface(n - 1) };

    // breakpoints in v = 1 + u over [0, 1]
    let mut breaks = vec![0.0f64];
    let mut v = layer.max(1e-300);
    while v < 1.0 {
        breaks.push(v);
        v *= 2.0;
    }
    breaks.push(1.0);
    if let Some(u0) = kink {
        let v0 = 1.0 + u0;
        if v0 > 0.0 && v0 < 1.0 {
            breaks.push(v0);
        }
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-300);

    let gl = gauss_legendre(deg.min(32));
    let gj_left = gauss_jacobi(deg.min(32), 0.0, a)?;
    let mut acc = 0.0;
    for win in breaks.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        if lo == 0.0 {
            // v^a weight under the rule, (2-v)^a folded
            acc += gj_left.integrate_weighted(lo, hi, |v| f(v - 1.0, v) * (2.0 - v).powf(a));
        } else {
            acc += gl.integrate(lo, hi, |v| f(v - 1.0, v) * (v * (2.0 - v)).powf(a));
        }
    }
    // right half [1, 2] in v: (2-v)^a weight under the rule, split at a kink
    let gj_right = gauss_jacobi(deg.min(32), a, 0.0)?;
    let v0 = kink.map(|u0| 1.0 + u0).filter(|v0| *v0 > 1.0 && *v0 < 2.0);
    if let Some(v0) = v0 {
        acc += gl.integrate(1.0, v0, |v| f(v - 1.0, v) * (v * (2.0 - v)).powf(a));
        acc += gj_right.integrate_weighted(v0, 2.0, |v| f(v - 1.0, v) * v.powf(a));
    } else {
        acc += gj_right.integrate_weighted(1.0, 2.0, |v| f(v - 1.0, v) * v.powf(a));
    }
    Ok(prefactor * acc)
}

/// General integral over S^n by recursion on the last coordinate,
/// omega = (sqrt(1-u^2) * omega', u). Cost grows geometrically with n.
pub fn sphere_integral<F: Fn(&[f64]) -> f64>(n: usize, deg: usize, f: F) -> Result<f64> {
    let mut coords = vec![0.0; n + 1];
    sphere_integral_rec(n, deg, &f, &mut coords, 1.0)
}

fn sphere_integral_rec<F: Fn(&[f64]) -> f64>(
    dim: usize,
    deg: usize,
    f: &F,
    coords: &mut [f64],
    scale: f64,
) -> Result<f64> {
    if dim == 1 {
        // circle occupying the first two slots, radius `scale`
        let rule = gauss_legendre(deg);
        let panels = 8usize;
        let h = 2.0 * PI / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = p as f64 * h;
            acc += rule.integrate(lo, lo + h, |th| {
                coords[0] = scale * th.sin();
                coords[1] = scale * th.cos();
                f(coords)
            });
        }
        return Ok(acc);
    }
    let a = (dim as f64 - 2.0) / 2.0;
    let rule = gauss_jacobi(deg, a, a)?;
    let mut acc = 0.0;
    for i in 0..rule.nodes.len() {
        let (u, w) = (rule.nodes[i], rule.weights[i]);
        coords[dim] = scale * u;
        let inner = sphere_integral_rec(dim - 1, deg, f, coords, scale * (1.0 - u * u).sqrt())?;
        acc += w * inner;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn surface_areas() {
        assert_relative_eq!(sphere_surface(0), 2.0, max_relative = 1e-14);
        assert_relative_eq!(sphere_surface(1), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_surface(2), 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn zonal_constant_gives_surface() {
        for n in 1..=4 {
            let v = zonal_integral(n, 48, |_| 1.0).unwrap();
            assert_relative_eq!(v, sphere_surface(n), max_relative = 1e-12);
        }
    }

    #[test]
    fn circle_reciprocal_closed_form() {
        // int_{S^1} (u sinh r + cosh r)^{-1} domega = 2 pi for every r;
        // the integrand has an e^{-2r}-scale layer at u = -1 and must be
        // evaluated through the cancellation-free base e^{-r} + (1+u) sinh r.
        for &r in &[0.1f64, 1.0, 5.0, 12.0, 20.0] {
            let layer = (-r).exp() / r.sinh();
            let v = zonal_integral_layered(1, 48, layer, None, |_, one_plus_u| {
                1.0 / ((-r).exp() + one_plus_u * r.sinh())
            })
            .unwrap();
            assert_relative_eq!(v, 2.0 * PI, max_relative = 1e-11);
        }
    }

    #[test]
    fn layered_matches_plain_when_smooth() {
        for n in 1..=3 {
            let f = |u: f64| (0.9 * u).exp() + u * u;
            let plain = zonal_integral(n, 48, f).unwrap();
            let layered = zonal_integral_layered(n, 48, 1e-6, None, |u, _| f(u)).unwrap();
            assert_relative_eq!(plain, layered, max_relative = 1e-11);
            let with_kink =
                zonal_integral_layered(n, 48, 1e-6, Some(-0.3), |u, _| f(u)).unwrap();
            assert_relative_eq!(plain, with_kink, max_relative = 1e-11);
        }
    }

    #[test]
    fn split_matches_plain_for_smooth() {
        for n in 1..=3 {
            let f = |u: f64| (1.3 * u).exp();
            let a = zonal_integral(n, 48, f).unwrap();
            let b = zonal_integral_split(n, 48, 0.37, f).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn split_handles_kink() {
        // |u - u0| integrand: split must beat the plain rule comfortably.
        let u0 = 0.21;
        let exact = |n: usize| zonal_integral_split(n, 96, u0, |u| (u - u0).abs()).unwrap();
        for n in 1..=2 {
            let hi = exact(n);
            let again = zonal_integral_split(n, 48, u0, |u| (u - u0).abs()).unwrap();
            assert_relative_eq!(hi, again, max_relative = 1e-10);
        }
    }

    #[test]
    fn general_sphere_constant() {
        for n in 1..=3 {
            let v = sphere_integral(n, 24, |_| 1.0).unwrap();
            assert_relative_eq!(v, sphere_surface(n), max_relative = 1e-10);
        }
    }

    #[test]
    fn general_sphere_matches_zonal() {
        for n in 1..=3 {
            let g = sphere_integral(n, 24, |w: &[f64]| (0.7 * w[n]).exp()).unwrap();
            let z = zonal_integral(n, 48, |u| (0.7 * u).exp()).unwrap();
            assert_relative_eq!(g, z, max_relative = 1e-9);
        }
    }

    #[test]
    fn general_sphere_coordinates_normalized() {
        for n in 1..=3 {
            let v = sphere_integral(n, 24, |w: &[f64]| {
                let norm2: f64 = w.iter().map(|c| c * c).sum();
                (norm2 - 1.0).abs()
            })
            .unwrap();
            assert!(v < 1e-10, "n={n}: coordinates drift off the sphere: {v}");
        }
    }
}
