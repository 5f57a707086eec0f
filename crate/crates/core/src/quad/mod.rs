//! Quadrature core: Gauss rules, adaptive panels, endpoint-singular
//! oscillatory integrals and Abel-regularized half-line integrals.

pub mod abel;
pub mod hyper;
pub mod panels;
pub mod rules;
pub mod sphere;

pub use abel::{
    abel_halfline, damped_halfline_truncated, damped_power_transform, richardson_extrapolate,
    AbelOptions, TrigKernel,
};
pub use hyper::{cosh_diff, hyper_integral, hyper_nodes, Accumulate, HyperNodes, HyperOptions};
pub use panels::{integrate_adaptive, PanelOptions};
pub use rules::{gauss_jacobi, gauss_legendre, QuadRule};
pub use sphere::{
    sphere_integral, sphere_surface, zonal_integral, zonal_integral_layered, zonal_integral_split,
};
