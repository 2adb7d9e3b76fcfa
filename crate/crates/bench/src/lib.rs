//! Shared fixtures for the benchmarks.

use surfrd_core::geometry::HeightField;
use surfrd_core::network::{FieldModel, NetworkConfig};

/// The full-size network over the default horizon.
pub fn full_model() -> FieldModel {
    FieldModel::new(&NetworkConfig::default(), 2000.0)
}

pub fn cloth() -> HeightField {
    HeightField::default()
}

/// Deterministic points in the unit cube.
pub fn points(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            let x = i as f64 + 0.5;
            [(x * 0.618_034).fract(), (x * 0.754_878).fract(), (x * 0.569_840).fract()]
        })
        .collect()
}
