//! Shared fixtures and quadrature oracles for unit tests.

use alloc::vec::Vec;

use quadrature::double_exponential;

use crate::NetworkScenario;

pub const TABLE_ONE: [[f64; 4]; 4] = [
    [1.00, 0.50, 0.10, 0.01],
    [0.55, 1.00, 0.45, 0.10],
    [0.10, 0.45, 1.00, 0.55],
    [0.01, 0.10, 0.50, 1.00],
];

/// The 8x8, K = 4, B = 20 scenario with unit noise.
pub fn table_one(power: f64) -> NetworkScenario {
    let flat: Vec<f64> = TABLE_ONE.iter().flatten().copied().collect();
    NetworkScenario::new(4, 8, 8, power, 1.0, flat, 20).unwrap()
}

pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    double_exponential::integrate(f, a, b, 1e-14).integral
}

/// `∫_0^∞ f`, split at the increasing break points; the last piece is
/// mapped onto `[0, 1)`.
pub fn half_line(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut lo = 0.0;
    for &b in breaks {
        total += integrate(&f, lo, b);
        lo = b;
    }
    let tail_from = lo.max(1e-300);
    total
        + integrate(
            |u| {
                if u >= 1.0 {
                    return 0.0;
                }
                let v = f(tail_from + tail_from * u / (1.0 - u)) * tail_from / ((1.0 - u) * (1.0 - u));
                if v.is_finite() { v } else { 0.0 }
            },
            0.0,
            1.0,
        )
}
