//! The C∞ monotone step built from `f(y) = exp(−1/y)`:
//! `S(y) = f(y) / (f(y) + f(1−y))`, equal to 0 for y ≤ 0 and 1 for y ≥ 1, with
//! every derivative vanishing at both ends.

use crate::quadrature::UnitRule;

/// Below this argument exp(−1/y) underflows to zero.
const UNDERFLOW: f64 = 1.0 / 740.0;

/// (f, f', f'') at y.
fn mollifier(y: f64) -> (f64, f64, f64) {
    if y <= UNDERFLOW {
        return (0.0, 0.0, 0.0);
    }
    let inv = 1.0 / y;
    let f = (-inv).exp();
    let inv2 = inv * inv;
    (f, f * inv2, f * (inv2 * inv2 - 2.0 * inv2 * inv))
}

/// (S, S', S'') at y.
pub fn step_with_derivatives(y: f64) -> (f64, f64, f64) {
    if y <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if y >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = mollifier(y);
    let (b, bm1, b2) = mollifier(1.0 - y);
    let b1 = -bm1;
    let d = a + b;
    let d1 = a1 + b1;
    let n = a1 * b - a * b1;
    let n1 = a2 * b - a * b2;
    (a / d, n / (d * d), (n1 * d - 2.0 * n * d1) / (d * d * d))
}

pub fn step(y: f64) -> f64 {
    step_with_derivatives(y).0
}

pub fn step_d1(y: f64) -> f64 {
    step_with_derivatives(y).1
}

pub fn step_d2(y: f64) -> f64 {
    step_with_derivatives(y).2
}

/// `∫₀^y S` for y ∈ [0, 1]; `∫₀¹ S = 1/2` by the symmetry S(y) + S(1−y) = 1.
pub fn step_integral(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 0.5 + (y - 1.0);
    }
    thread_local! {
        static RULE: UnitRule = UnitRule::new(24);
    }
    RULE.with(|rule| {
        let pieces = 8;
        let h = y / pieces as f64;
        (0..pieces)
            .map(|p| rule.integrate(p as f64 * h, (p + 1) as f64 * h, step))
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_symmetry() {
        assert_eq!(step(0.0), 0.0);
        assert_eq!(step(1.0), 1.0);
        assert_eq!(step(1e-8), 0.0);
        assert!((step(0.5) - 0.5).abs() < 1e-15);
        for i in 1..100 {
            let y = i as f64 / 100.0;
            assert!((step(y) + step(1.0 - y) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn monotone() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let s = step(i as f64 / 1000.0);
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for i in 1..50 {
            let y = i as f64 / 50.0;
            let fd1 = (step(y + h) - step(y - h)) / (2.0 * h);
            let fd2 = (step_d1(y + h) - step_d1(y - h)) / (2.0 * h);
            assert!((fd1 - step_d1(y)).abs() < 1e-7, "{y}");
            assert!((fd2 - step_d2(y)).abs() < 1e-6, "{y}");
        }
    }

    #[test]
    fn integral_of_step() {
        assert!((step_integral(1.0) - 0.5).abs() < 1e-15);
        let y = 0.37;
        let n = 200_000;
        let fine: f64 = (0..n)
            .map(|i| step((i as f64 + 0.5) * y / n as f64) * y / n as f64)
            .sum();
        assert!((step_integral(y) - fine).abs() < 1e-10);
    }
}
