//! Complex WKB toolkit for `Ψ(z+h) = M(z)Ψ(z)` with `M` a unimodular 2×2
//! matrix function.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod matrix;
pub mod momentum;
pub mod oracle;
pub mod phase;
pub mod quad;
pub mod roots;
pub mod scenario;
pub mod wkb;

pub use error::{Result, WkbError};
pub use linalg::{Mat2, C64};
pub use matrix::{FourierMatrix, MatrixModel, PolynomialMatrix, Side};
