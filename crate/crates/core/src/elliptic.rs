//! Stream function and velocity recovery from vorticity.
//!
//! For odd vorticity `w`, the stream function solves `Δψ = −w` with ψ = 0 on the
//! walls, and `u = ∇^⊥ψ + c e₂` with `∇^⊥ = (∂₂, −∂₁)`. The constant `c` fixes the
//! mean of the tangential velocity, which the vorticity alone cannot determine.

use crate::spectral::{Axis, Parity, ScalarField, SpectralCoeffs, SpectralError};

#[derive(Clone, Debug)]
pub struct VelocityField {
    /// Wall-normal component, odd.
    pub u1: ScalarField,
    /// Tangential component, even; includes the uniform part `c`.
    pub u2: ScalarField,
    /// Domain mean of `u2`.
    pub mean_coeff: f64,
}

fn require_odd(p: Parity) -> Result<(), SpectralError> {
    if p == Parity::Odd {
        Ok(())
    } else {
        Err(SpectralError::ParityMismatch {
            expected: Parity::Odd,
            found: p,
        })
    }
}

/// Coefficients of ψ with Δψ = −w and ψ|walls = 0.
pub fn streamfunction_coeffs(w: &SpectralCoeffs) -> Result<SpectralCoeffs, SpectralError> {
    require_odd(w.parity())?;
    let g = w.grid().clone();
    let mut psi = w.clone();
    for ((i, k), z) in psi.data_mut().indexed_iter_mut() {
        *z /= g.neg_laplacian(Parity::Odd, i, k);
    }
    Ok(psi)
}

pub fn solve_streamfunction(w: &ScalarField) -> Result<ScalarField, SpectralError> {
    Ok(streamfunction_coeffs(&w.forward())?.inverse())
}

/// Velocity coefficients `(û₁, û₂)` for the given vorticity and mean of u₂.
pub fn velocity_coeffs(
    w: &SpectralCoeffs,
    mean_coeff: f64,
) -> Result<(SpectralCoeffs, SpectralCoeffs), SpectralError> {
    let psi = streamfunction_coeffs(w)?;
    let u1 = psi.differentiate(Axis::X2, 1)?;
    let mut u2 = psi.differentiate(Axis::X1, 1)?;
    u2.scale(-1.0);
    let c = mean_coeff - u2.integrate();
    u2.data_mut()[[0, 0]].re += c;
    Ok((u1, u2))
}

pub fn velocity_from_vorticity(
    w: &ScalarField,
    mean_coeff: f64,
) -> Result<VelocityField, SpectralError> {
    let (u1, u2) = velocity_coeffs(&w.forward(), mean_coeff)?;
    Ok(VelocityField {
        u1: u1.inverse(),
        u2: u2.inverse(),
        mean_coeff,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct DivCurlResidual {
    /// ‖∇·u‖₂.
    pub divergence: f64,
    /// ‖∂₁u₂ − ∂₂u₁ − w‖₂.
    pub curl: f64,
    /// max |u₁| on the walls.
    pub wall_normal: f64,
    /// |∫u₂ − c|.
    pub mean: f64,
}

impl DivCurlResidual {
    pub fn max(&self) -> f64 {
        self.divergence
            .max(self.curl)
            .max(self.wall_normal)
            .max(self.mean)
    }
}

pub fn divcurl_residual(
    u: &VelocityField,
    w: &ScalarField,
) -> Result<DivCurlResidual, SpectralError> {
    let u1 = u.u1.forward();
    let u2 = u.u2.forward();
    let mut div = u1.differentiate(Axis::X1, 1)?;
    div.add_scaled(1.0, &u2.differentiate(Axis::X2, 1)?);
    let mut curl = u2.differentiate(Axis::X1, 1)?;
    curl.add_scaled(-1.0, &u1.differentiate(Axis::X2, 1)?);
    curl.add_scaled(-1.0, &w.forward());
    let g = u.u1.grid();
    let wall_normal = (0..g.nx2())
        .flat_map(|j| [-1.0, 1.0].map(|x1| u1.evaluate(x1, g.x2(j)).abs()))
        .fold(0.0, f64::max);
    Ok(DivCurlResidual {
        divergence: div.sobolev_norm(0),
        curl: curl.sobolev_norm(0),
        wall_normal,
        mean: (u2.integrate() - u.mean_coeff).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    #[test]
    fn single_mode_streamfunction() {
        let g = Grid::new(16, 16).unwrap();
        let w = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| {
            (PI * (x1 + 1.0) / 2.0).sin() * x2.cos()
        });
        let psi = solve_streamfunction(&w).unwrap();
        let lam = PI * PI / 4.0 + 1.0;
        let exact = w.scaled(1.0 / lam);
        assert!((&psi - &exact).max_abs() < 1e-14);
    }

    #[test]
    fn zero_vorticity_gives_uniform_flow() {
        let g = Grid::new(16, 16).unwrap();
        let u = velocity_from_vorticity(&ScalarField::zeros(&g, Parity::Odd), 0.7).unwrap();
        assert!(u.u1.max_abs() < 1e-15);
        assert!((u.u2.values() - 0.7).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rejects_even_vorticity() {
        let g = Grid::new(16, 16).unwrap();
        assert!(solve_streamfunction(&ScalarField::zeros(&g, Parity::Even)).is_err());
    }

    #[test]
    fn residual_of_smooth_vorticity() {
        let g = Grid::new(32, 32).unwrap();
        let w = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| {
            (PI * (x1 + 1.0)).sin() * (2.0 * x2).sin() + 0.3 * (PI * (x1 + 1.0) / 2.0).sin()
        });
        let u = velocity_from_vorticity(&w, -0.4).unwrap();
        let r = divcurl_residual(&u, &w).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
    }
}
