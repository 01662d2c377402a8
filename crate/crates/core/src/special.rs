//! Special functions used by the closed-form constants and the builtin laws.
//!
//! Gamma, log-gamma and the regularized incomplete beta function come from
//! `statrs`; `erfc` comes from `libm`. The exponential integral and the
//! log-survival of the standard normal are implemented locally because the
//! deep-tail oracles need them in scaled / log form.

use std::f64::consts::{PI, SQRT_2};

pub use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};
pub use statrs::function::gamma::{gamma, ln_gamma};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `Γ(x)` for `x <= 30`, `exp(ln Γ(x))` beyond.
pub fn gamma_fn(x: f64) -> f64 {
    if x <= 30.0 {
        gamma(x)
    } else {
        ln_gamma(x).exp()
    }
}

/// Exponential integral `E₁(x) = ∫ₓ^∞ e^{-t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 1.0 {
        e1_series(x)
    } else {
        e1_scaled(x) * (-x).exp()
    }
}

/// `eˣ E₁(x)`, finite for all `x > 0` (no underflow for large `x`).
pub fn e1_scaled(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0");
    if x <= 1.0 {
        return e1_series(x) * x.exp();
    }
    // Modified Lentz evaluation of the continued fraction
    // E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `ln P(N > z)` for a standard normal, accurate far into the upper tail.
pub fn normal_log_sf(z: f64) -> f64 {
    if z < 8.0 {
        (0.5 * libm::erfc(z / SQRT_2)).ln()
    } else {
        -0.5 * z * z - 0.5 * (2.0 * PI).ln() - mills_denominator(z).ln()
    }
}

/// Hazard `φ(z) / P(N > z)` of the standard normal.
pub fn normal_hazard(z: f64) -> f64 {
    if z < 8.0 {
        normal_pdf(z) / (0.5 * libm::erfc(z / SQRT_2))
    } else {
        mills_denominator(z)
    }
}

// Continued fraction z + 1/(z + 2/(z + 3/(z + ...))) so that
// P(N > z) = φ(z) / mills_denominator(z).
fn mills_denominator(z: f64) -> f64 {
    let mut acc = z;
    for k in (1..=60).rev() {
        acc = z + k as f64 / acc;
    }
    acc
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -normal_upper_quantile(p)
}

/// Upper quantile: the `z` with `P(N > z) = q`.
pub fn normal_upper_quantile(q: f64) -> f64 {
    if !(q > 0.0 && q < 1.0) {
        return if q <= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let mut z = SQRT_2 * statrs::function::erf::erfc_inv(2.0 * q);
    // Newton polish on ln P(N > z) = ln q
    for _ in 0..3 {
        let step = (normal_log_sf(z) - q.ln()) / normal_hazard(z);
        if !step.is_finite() {
            break;
        }
        z += step;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_reference_values() {
        assert!(rel(gamma_fn(0.5), PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(2.5), 0.75 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(5.0), 24.0) < 1e-14);
        assert!(rel(gamma_fn(30.0), 8.841_761_993_739_701e30) < 1e-12);
        assert!(rel(gamma_fn(31.0), 2.652_528_598_121_910_3e32) < 1e-12);
    }

    #[test]
    fn e1_matches_reference_values() {
        // Abramowitz & Stegun table values.
        assert!(rel(exp_integral_e1(0.5), 0.559_773_594_776_160_8) < 1e-13);
        assert!(rel(exp_integral_e1(1.0), 0.219_383_934_395_520_3) < 1e-13);
        assert!(rel(exp_integral_e1(2.0), 0.048_900_510_708_061_12) < 1e-13);
        assert!(rel(exp_integral_e1(10.0), 4.156_968_929_685_324e-6) < 1e-13);
    }

    #[test]
    fn e1_scaled_agrees_with_asymptotic_series() {
        // e^x E1(x) ~ (1/x) Σ (-1)^k k! / x^k
        let x = 200.0_f64;
        let series = (1.0 - 1.0 / x + 2.0 / x.powi(2) - 6.0 / x.powi(3) + 24.0 / x.powi(4)
            - 120.0 / x.powi(5)
            + 720.0 / x.powi(6)
            - 5040.0 / x.powi(7))
            / x;
        assert!(rel(e1_scaled(x), series) < 1e-13);
        assert!(rel(e1_scaled(x), 4.975_246_323_179_356_6e-3) < 1e-14);
    }

    #[test]
    fn normal_log_sf_is_continuous_across_branch() {
        let a = normal_log_sf(8.0 - 1e-9);
        let b = normal_log_sf(8.0);
        assert!((a - b).abs() < 1e-8);
        assert!(rel(normal_log_sf(1.0).exp(), 0.158_655_253_931_457_05) < 1e-13);
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[1e-10, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
            let z = normal_quantile(p);
            let back = 1.0 - normal_log_sf(z).exp();
            assert!((back - p).abs() < 1e-12 * p.max(1e-3) + 1e-15, "p = {p}");
        }
    }
}
