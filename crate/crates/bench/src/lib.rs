//! Benchmark fixtures.

use frameless_core::{SlotClass, SystemConfig};

/// Configurations from the reference table, keyed by a short label.
pub fn fixtures() -> Vec<(&'static str, SystemConfig)> {
    let make = |classes: &[(usize, f64)]| {
        SystemConfig::new(
            50,
            classes.iter().map(|&(m, b)| SlotClass::new(m, b)).collect(),
        )
        .unwrap()
    };
    vec![
        ("k1", make(&[(100, 2.9)])),
        ("k2", make(&[(88, 2.4), (12, 12.94)])),
        ("k3", make(&[(88, 2.51), (11, 17.39), (1, 50.0)])),
    ]
}
