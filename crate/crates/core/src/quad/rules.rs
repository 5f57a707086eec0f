//! Gauss-Legendre and Gauss-Jacobi rules via the Golub-Welsch algorithm,
//! cached per (degree, alpha, beta).

use crate::error::{Error, Result};
use crate::specfun::gamma_real;
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

/// Nodes and weights on [-1, 1] for the weight (1-x)^alpha (1+x)^beta.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl QuadRule {
    /// Plain integral of f over [a, b]; only meaningful for alpha = beta = 0.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(half * x + mid);
        }
        half * acc
    }

    /// Integral of (b-u)^alpha (u-a)^beta f(u) du over [a, b].
    pub fn integrate_weighted<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(half * x + mid);
        }
        half.powf(self.alpha + self.beta + 1.0) * acc
    }
}

fn compute_jacobi_rule(deg: usize, alpha: f64, beta: f64) -> Result<QuadRule> {
    if deg < 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature degree must be at least 2, got {deg}"
        )));
    }
    if !(alpha.is_finite() && alpha > -1.0 && beta.is_finite() && beta > -1.0) {
        return Err(Error::InvalidArgument(format!(
            "Jacobi exponents must be finite and > -1, got alpha={alpha}, beta={beta}"
        )));
    }

    let mut m = DMatrix::<f64>::zeros(deg, deg);
    let mut diag = (beta - alpha) / (2.0 + beta + alpha);
    for idx in 0..deg - 1 {
        let k = idx as f64 + 1.0;
        let denom = 2.0 * k + alpha + beta;
        // The generic off-diagonal formula is 0/0 at k = 1 when alpha+beta
        // is 0 or -1; the first coefficient has its own closed form.
        let off = if idx == 0 {
            (4.0 * (1.0 + alpha) * (1.0 + beta)
                / ((alpha + beta + 2.0).powi(2) * (alpha + beta + 3.0)))
                .sqrt()
        } else {
            2.0 / denom
                * (k * (k + alpha) * (k + beta) * (k + alpha + beta)
                    / ((denom + 1.0) * (denom - 1.0)))
                    .sqrt()
        };
        m[(idx, idx)] = diag;
        m[(idx, idx + 1)] = off;
        m[(idx + 1, idx)] = off;
        diag = (beta * beta - alpha * alpha) / (denom * (denom + 2.0));
    }
    m[(deg - 1, deg - 1)] = diag;

    let eigen = m.symmetric_eigen();
    // mu_0 = Integral of the bare weight over [-1, 1].
    let mu0 = 2f64.powf(alpha + beta + 1.0) * gamma_real(alpha + 1.0)? * gamma_real(beta + 1.0)?
        / gamma_real(alpha + beta + 2.0)?;

    let mut pairs: Vec<(f64, f64)> = eigen
        .eigenvalues
        .iter()
        .copied()
        .zip(eigen.eigenvectors.row(0).iter().map(|v| v * v * mu0))
        .collect();
    pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // The eigensolver loses the exact central node for symmetric weights.
    if alpha == beta && deg % 2 == 1 {
        pairs[deg / 2].0 = 0.0;
    }

    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(QuadRule {
        nodes,
        weights,
        alpha,
        beta,
    })
}

type RuleCache = RwLock<HashMap<(usize, u64, u64), Arc<QuadRule>>>;

fn cache() -> &'static RuleCache {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached Gauss-Jacobi rule of the given degree.
pub fn gauss_jacobi(deg: usize, alpha: f64, beta: f64) -> Result<Arc<QuadRule>> {
    let key = (deg, alpha.to_bits(), beta.to_bits());
    if let Some(r) = cache().read().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let rule = Arc::new(compute_jacobi_rule(deg, alpha, beta)?);
    cache().write().unwrap().insert(key, rule.clone());
    Ok(rule)
}

/// Cached Gauss-Legendre rule of the given degree.
pub fn gauss_legendre(deg: usize) -> Arc<QuadRule> {
    gauss_jacobi(deg, 0.0, 0.0).expect("Legendre rule construction cannot fail")
}
