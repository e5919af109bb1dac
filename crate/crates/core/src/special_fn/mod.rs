//! Special functions: complex log-gamma, hypergeometric families and
//! Mellin-Barnes contour quadrature.

pub mod foxh;
pub mod gamma;
pub mod hyper;

pub use foxh::{fox_h_bivariate, fox_h_univariate, ContourPolicy, FoxHSpec, GammaFactor, MellinValue};
pub use gamma::{gamma_complex, ln_gamma_complex, upper_gamma};
pub use hyper::{gauss_2f1, kummer_1f1, tricomi_u};
