//! Vorticity steering through a large initial temperature.
//!
//! Starting from `(w₀, θ₀ − δ⁻¹ξ)` without control, buoyancy `∂₁θ ≈ −δ⁻¹∂₁ξ`
//! acts for a time δ and moves the vorticity to `w₀ − ∂₁ξ + O(δ)`.

use std::f64::consts::PI;

use crate::elliptic::velocity_from_vorticity;
use crate::smooth::step;
use crate::solver::{
    advect, ControlSchedule, Forcing, NoControl, Solver, SolverConfig, State, TimeStep,
};
use crate::spectral::{Axis, Grid, Parity, ScalarField, SpectralCoeffs};

use super::ControlError;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct XiOptions {
    /// Multiply `w_start − w_target` by a C∞ plateau in x₁ equal to one on
    /// `[−a, a]` and vanishing at the walls before integrating.
    pub taper: Option<f64>,
}

/// Temperature profile ξ (even, mean-free) with `∂₁ξ ≈ w_start − w_target`.
#[derive(Clone, Debug)]
pub struct XiProfile {
    pub xi: ScalarField,
    /// The realized `∂₁ξ`.
    pub h: ScalarField,
    /// `‖(w_start − ∂₁ξ) − w_target‖₁`.
    pub approx_error: f64,
    /// max of |∂₁ξ| and |∂₁₁₁ξ| on the walls.
    pub wall_trace: f64,
}

impl XiProfile {
    pub fn zero(grid: &Grid) -> Self {
        Self {
            xi: ScalarField::zeros(grid, Parity::Even),
            h: ScalarField::zeros(grid, Parity::Odd),
            approx_error: 0.0,
            wall_trace: 0.0,
        }
    }

    pub fn from_xi(xi: ScalarField) -> Result<Self, ControlError> {
        if xi.parity() != Parity::Even {
            return Err(ControlError::InvalidArgument("ξ must be even in x1".into()));
        }
        let h = xi.differentiate(Axis::X1, 1)?;
        let wall_trace = wall_trace(&xi.forward())?;
        Ok(Self {
            xi,
            h,
            approx_error: 0.0,
            wall_trace,
        })
    }
}

fn wall_trace(xi: &SpectralCoeffs) -> Result<f64, ControlError> {
    let d1 = xi.differentiate(Axis::X1, 1)?;
    let d3 = xi.differentiate(Axis::X1, 3)?;
    let g = xi.grid();
    let mut m: f64 = 0.0;
    for j in 0..g.nx2() {
        for x1 in [-1.0, 1.0] {
            m = m
                .max(d1.evaluate(x1, g.x2(j)).abs())
                .max(d3.evaluate(x1, g.x2(j)).abs());
        }
    }
    Ok(m)
}

/// Build ξ by integrating the dealiased difference `h = w_start − w_target` in
/// x₁ term by term: `sin(kπ(x₁+1)/2) ↦ −(2/kπ) cos(kπ(x₁+1)/2)`. Every cosine
/// with k ≥ 1 has zero mean, so ξ is mean-free, and the sine series of ∂₁ξ and
/// ∂₁₁₁ξ vanish on the walls.
pub fn build_xi(
    w_start: &ScalarField,
    w_target: &ScalarField,
    eps: f64,
    opts: XiOptions,
) -> Result<XiProfile, ControlError> {
    if w_start.parity() != Parity::Odd || w_target.parity() != Parity::Odd {
        return Err(ControlError::InvalidArgument(
            "vorticities must be odd in x1".into(),
        ));
    }
    w_start.grid().check_same(w_target.grid())?;
    let g = w_start.grid().clone();
    let diff = w_start - w_target;
    let mut h = match opts.taper {
        None => diff.forward(),
        Some(a) => {
            if !(0.0..1.0).contains(&a) {
                return Err(ControlError::InvalidArgument(format!(
                    "taper plateau {a} must lie in [0, 1)"
                )));
            }
            let mut v = diff.clone();
            for i in 0..g.nx1() {
                let p = step((1.0 - g.x1(i).abs()) / (1.0 - a));
                v.values_mut().row_mut(i).mapv_inplace(|x| x * p);
            }
            v.forward()
        }
    };
    h.dealias();
    let mut xi = SpectralCoeffs::zeros(&g, Parity::Even);
    for k in 1..g.nx1() {
        let factor = -2.0 / (k as f64 * PI);
        let src = h.data().row(k - 1).to_owned();
        let mut dst = xi.data_mut().row_mut(k);
        for (d, s) in dst.iter_mut().zip(src.iter()) {
            *d = s * factor;
        }
    }
    let realized = xi.differentiate(Axis::X1, 1)?;
    let mut resid = diff.forward();
    resid.add_scaled(-1.0, &realized);
    let approx_error = resid.sobolev_norm(1);
    if eps.is_finite() && approx_error >= eps / 3.0 {
        return Err(ControlError::UnderResolved(format!(
            "‖w_start − ∂1ξ − w_target‖₁ = {approx_error:.3e} is not below eps/3 = {:.3e}",
            eps / 3.0
        )));
    }
    Ok(XiProfile {
        wall_trace: wall_trace(&xi)?,
        xi: xi.inverse(),
        h: realized.inverse(),
        approx_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteerVorticityOptions {
    /// Time steps per unit δ; the step is δ/steps.
    pub steps: usize,
}

impl Default for SteerVorticityOptions {
    fn default() -> Self {
        Self { steps: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct VorticitySteering {
    pub state: State,
    /// `‖w(δ) − (w₀ − ∂₁ξ)‖₁`.
    pub error: f64,
    /// max over the run of `‖θ + δ⁻¹ξ‖₂`.
    pub shifted_theta_max: f64,
    /// `‖q_δ(·,δ)‖₁`.
    pub q_norm: f64,
    /// `‖r_δ(·,δ)‖₁`.
    pub r_norm: f64,
}

/// Remainders of the large-temperature ansatz at elapsed time t:
/// `q = w − w₀ + δ⁻¹t∂₁ξ` and `r = θ_δ − θ₀ + δ⁻¹tτΔξ − (U·∇)ξ`, where
/// `θ_δ = θ + δ⁻¹ξ` and U is the velocity of `δ⁻¹t(w₀ − δ⁻¹t∂₁ξ/2)` with zero
/// uniform part.
pub fn lcst_remainders(
    state: &State,
    elapsed: f64,
    w0: &ScalarField,
    theta0: &ScalarField,
    xi: &XiProfile,
    delta: f64,
    tau: f64,
) -> Result<(ScalarField, ScalarField), ControlError> {
    let s = elapsed / delta;
    let q = &(&state.w - w0) + &xi.h.scaled(s);
    let theta_shift = &state.theta + &xi.xi.scaled(1.0 / delta);
    let lap = &xi.xi.differentiate(Axis::X1, 2)? + &xi.xi.differentiate(Axis::X2, 2)?;
    let omega = (w0 - &xi.h.scaled(0.5 * s)).scaled(s);
    let u = velocity_from_vorticity(&omega, 0.0)?;
    let transport = advect(&u, &xi.xi)?;
    let r = &(&(&theta_shift - theta0) + &lap.scaled(s * tau)) - &transport;
    Ok((q, r))
}

/// Run from `(w₀, θ₀ − δ⁻¹ξ)` with zero control for a time δ.
pub fn steer_vorticity(
    cfg: &SolverConfig,
    state0: &State,
    xi: &XiProfile,
    delta: f64,
    forcing: &dyn Forcing,
    opts: SteerVorticityOptions,
) -> Result<VorticitySteering, ControlError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ControlError::InvalidArgument(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    if opts.steps == 0 {
        return Err(ControlError::InvalidArgument("steps must be positive".into()));
    }
    state0.validate()?;
    let mut cfg = cfg.clone();
    cfg.time_step = TimeStep::Fixed(delta / opts.steps as f64);
    let mut solver = Solver::new(cfg.clone())?;
    let shift = xi.xi.scaled(1.0 / delta);
    let init = State {
        theta: &state0.theta - &shift,
        ..state0.clone()
    };
    let mut shifted_theta_max = state0.theta.l2_norm();
    let control: &dyn ControlSchedule = &NoControl;
    let end = solver.run_observed(&init, state0.t + delta, forcing, control, |v| {
        let th = &v.state().theta + &shift;
        shifted_theta_max = shifted_theta_max.max(th.l2_norm());
    })?;
    let target = &state0.w - &xi.h;
    let error = (&end.w - &target).sobolev_norm(1);
    let (q, r) = lcst_remainders(&end, delta, &state0.w, &state0.theta, xi, delta, cfg.tau)?;
    Ok(VorticitySteering {
        error,
        shifted_theta_max,
        q_norm: q.sobolev_norm(1),
        r_norm: r.sobolev_norm(1),
        state: end,
    })
}
