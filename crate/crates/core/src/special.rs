//! Gamma and Beta functions.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, nine terms),
/// with the reflection formula below 1/2. Poles return NaN; positive
/// integers up to 23 return the exact factorial.
pub fn gamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == x.floor() {
        if x <= 0.0 {
            return f64::NAN;
        }
        if x <= 23.0 {
            return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
        }
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Beta function B(p, q) = Γ(p)Γ(q)/Γ(p+q).
pub fn beta(p: f64, q: f64) -> f64 {
    gamma(p) * gamma(q) / gamma(p + q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn known_values() {
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-13);
        assert!(rel(gamma(1.5), PI.sqrt() / 2.0) < 1e-13);
        assert!(rel(gamma(-0.5), -2.0 * PI.sqrt()) < 1e-13);
        let mut fact = 1.0;
        for n in 1..20 {
            assert_eq!(gamma(n as f64), fact, "n = {n}");
            fact *= n as f64;
        }
    }

    #[test]
    fn matches_statrs_on_working_range() {
        let mut x = 0.05;
        while x < 6.0 {
            let ours = gamma(x);
            let reference = statrs::function::gamma::gamma(x);
            assert!(rel(ours, reference) < 1e-12, "x = {x}: {ours} vs {reference}");
            x += 0.0137;
        }
        for &x in &[-0.25, -0.5, -0.75, -1.5] {
            assert!(rel(gamma(x), statrs::function::gamma::gamma(x)) < 1e-12);
        }
    }

    #[test]
    fn recurrence() {
        for &x in &[0.1, 0.25, 0.75, 1.3, 2.9] {
            assert!(rel(gamma(x + 1.0), x * gamma(x)) < 1e-13);
        }
    }

    #[test]
    fn beta_symmetric_closed_form() {
        // B(1/2, 1/2) = π
        assert!(rel(beta(0.5, 0.5), PI) < 1e-13);
        assert!(rel(beta(2.0, 3.0), 1.0 / 12.0) < 1e-13);
        assert!(gamma(0.0).is_nan());
        assert!(gamma(-2.0).is_nan());
    }
}
