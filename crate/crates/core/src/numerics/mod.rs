//! Special functions, distribution tails and a bounded simplex optimizer
//! shared by the test statistics and likelihood fits.

pub mod dist;
pub mod optim;
pub mod special;

pub use dist::{f_cdf, f_sf, normal_cdf, normal_sf, t_cdf, t_sf};
pub use optim::{minimize, minimize_with, numerical_hessian, BoundBox, MinimizeOptions, OptimResult, Termination, PENALTY};
pub use special::{erfc, ln_gamma, reg_incomplete_beta};
