//! Heine-Stieltjes spectral problems `T S + V S = 0` for higher Lame
//! operators `T = sum Q_i d^i/dz^i`, root-counting measures of their
//! Stieltjes polynomials, and the geometry of the limiting measures.

pub mod error;
pub mod forest;
pub mod linalg;
pub mod measure;
pub mod operator;
pub mod poly;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
