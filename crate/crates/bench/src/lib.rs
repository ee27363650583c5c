//! Shared fixtures for the criterion benches under `benches/`.

use pdouglas_core::{BoundaryFunction, Exponent};

/// Boundary data exercised by the benches: smooth, shifted, and Lipschitz.
pub const DATA: [&str; 3] = ["cos", "shifted-cos:0.5", "abs-sin"];

pub fn data(name: &str) -> BoundaryFunction {
    name.parse().expect("bench preset parses")
}

pub fn exponent(p: f64) -> Exponent {
    Exponent::new(p).expect("bench exponent is valid")
}
