use crate::smooth::step_with_derivatives;
use crate::spectral::{Parity, ScalarField};

use super::ControlError;

/// κ(t): the exp(−1/t) step on [0, 1], flat to all orders at 0 and 1.
pub fn ramp_kappa(t: f64) -> f64 {
    step_with_derivatives(t).0
}

pub fn ramp_kappa_d1(t: f64) -> f64 {
    step_with_derivatives(t).1
}

/// Square spectral truncation `k₁, k₂ ≤ L` with the smallest L such that
/// `‖θ₁ − θ̃₁‖_{m−1} < eps ‖θ₁‖_m`. L is capped at the dealiasing cutoff so the
/// result is representable by the solver.
pub fn smooth_target(theta1: &ScalarField, eps: f64, m: usize) -> Result<ScalarField, ControlError> {
    if m == 0 {
        return Err(ControlError::InvalidArgument(
            "smoothing order m must be at least 1".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(ControlError::InvalidArgument("eps must be positive".into()));
    }
    if theta1.parity() != Parity::Even {
        return Err(ControlError::InvalidArgument(
            "temperature targets must be even in x1".into(),
        ));
    }
    let c = theta1.forward();
    let norm = c.sobolev_norm(m);
    if norm == 0.0 {
        return Ok(ScalarField::zeros(theta1.grid(), Parity::Even));
    }
    let bound = eps * norm;
    let g = theta1.grid();
    let cap = g.cutoff_k1().max(g.cutoff_k2());
    let clipped = |level: usize| {
        let mut k = c.clone();
        k.truncate(level.min(g.cutoff_k1()), level.min(g.cutoff_k2()));
        k
    };
    let err_at = |level: usize| {
        let mut kept = clipped(level);
        kept.scale(-1.0);
        kept.add_scaled(1.0, &c);
        kept.sobolev_norm(m - 1)
    };
    if err_at(cap) >= bound {
        return Err(ControlError::UnderResolved(format!(
            "truncation error {:.3e} at the dealiasing cutoff exceeds {bound:.3e}",
            err_at(cap)
        )));
    }
    let (mut lo, mut hi) = (0usize, cap);
    if err_at(0) < bound {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if err_at(mid) < bound {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(clipped(hi).inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{Grid, SpectralCoeffs};
    use std::f64::consts::PI;

    #[test]
    fn kappa_values() {
        assert_eq!(ramp_kappa(0.0), 0.0);
        assert_eq!(ramp_kappa(1.0), 1.0);
        assert!(ramp_kappa(1e-8) < 1e-30);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = ramp_kappa(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn band_limited_target_is_kept() {
        let g = Grid::new(32, 32).unwrap();
        let th = ScalarField::from_fn(&g, Parity::Even, |x1, x2| {
            (PI * (x1 + 1.0) / 2.0).cos() * (2.0 * x2).cos()
        });
        let s = smooth_target(&th, 0.05, 3).unwrap();
        assert!((&s - &th).max_abs() < 1e-13);
        let z = smooth_target(&ScalarField::zeros(&g, Parity::Even), 0.05, 3).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn algebraic_spectrum_is_truncated() {
        let g = Grid::new(64, 64).unwrap();
        // Coefficients decaying like k^-4 in both directions.
        let mut c = SpectralCoeffs::zeros(&g, Parity::Even);
        for k1 in 1..20 {
            for k2 in 1..20 {
                let r = c.row_of(k1).unwrap();
                c.data_mut()[[r, k2]].re = 1.0 / ((k1 * k1 * k2 * k2) as f64).powi(2);
            }
        }
        let th = c.inverse();
        let s = smooth_target(&th, 0.05, 2).unwrap();
        let diff = (&th - &s).sobolev_norm(1);
        assert!(diff < 0.05 * th.sobolev_norm(2));
        assert!((&th - &s).max_abs() > 0.0);
    }
}
