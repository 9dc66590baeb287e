//! Special functions for beta-distribution densities and their derivatives.
//!
//! `ln_gamma` and `digamma` come from statrs; trigamma (needed for the
//! derivative of digamma in the backward pass) is implemented here via the
//! standard recurrence plus asymptotic series.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Trigamma function ψ₁(x) = d²/dx² ln Γ(x), for x > 0.
///
/// Uses the recurrence ψ₁(x) = ψ₁(x+1) + 1/x² to shift the argument above 10,
/// then the asymptotic expansion with Bernoulli-number coefficients.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma defined here for positive arguments only");
    let mut acc = 0.0;
    let mut z = x;
    while z < 10.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // 1/z + 1/(2z^2) + 1/(6z^3) - 1/(30z^5) + 1/(42z^7) - 1/(30z^9)
    let series = inv
        + 0.5 * inv2
        + inv2 * inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)));
    acc + series
}

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a+b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}
