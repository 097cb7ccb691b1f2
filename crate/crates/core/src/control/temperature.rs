//! Temperature steering in a short time δ along the accelerated drift
//! `ȳ_δ(t) = δ⁻¹ȳ(t/δ)`.
//!
//! The linear states solve transport problems on the unit interval:
//! `Θ̃` carries δθ₀ freely, `Θ̂` is driven from zero by δ·g towards δ(θ̃₁ − θ₀),
//! `ϑ̃ = Θ̃ + Θ̂ − δGχ/∫χ` is their mean-free combination driven by δη̃, and ṽ
//! solves `∂ₛṽ + ȳ₂∂₂ṽ = ∂₁ϑ̃` from w₀. The nonlinear control replays δη̃ in
//! time δ and adds the temperature lift `ȳ'_δ χ/∫χ` whose integral drives the
//! uniform flow along ȳ_δ.

use std::sync::Arc;

use crate::return_method::{CutoffChi, DriftProfile};
use crate::solver::{
    ControlSchedule, Forcing, Solver, SolverConfig, Source, State, TemperatureLift, TimeStep,
};
use crate::elliptic::VelocityField;
use crate::spectral::{Axis, Parity, ScalarField, SpectralCoeffs};

use super::target::smooth_target;
use super::transport::{characteristic_integral, solve_transport, FnSource, TransportControl};
use super::ControlError;

/// Linear auxiliary states at unit time s.
#[derive(Clone, Debug)]
pub struct AuxSnapshot {
    pub s: f64,
    /// Θ̃(s) = δθ₀ transported freely.
    pub theta_free: ScalarField,
    /// Θ̂(s), driven by δ·g from zero.
    pub theta_ctrl: ScalarField,
    /// ϑ̃(s), mean-free.
    pub vartheta: ScalarField,
    /// ṽ(s).
    pub v: ScalarField,
}

/// Ingredients of the linear problems for one δ.
#[derive(Clone)]
pub struct LinearAuxStates {
    control: Arc<TransportControl>,
    w0: ScalarField,
    theta0: ScalarField,
    theta1: ScalarField,
    delta: f64,
    nodes: usize,
    /// `‖ϑ̃(1) − δθ₁‖₂`.
    pub final_error: f64,
    /// `eps·δ·‖θ₁ − θ₀‖₃`.
    pub final_bound: f64,
}

impl std::fmt::Debug for LinearAuxStates {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearAuxStates")
            .field("delta", &self.delta)
            .field("final_error", &self.final_error)
            .field("final_bound", &self.final_bound)
            .finish()
    }
}

/// Build the transport control for `θ̃₁ − θ₀` (θ̃₁ the smoothed target) and
/// verify `‖ϑ̃(1) − δθ₁‖₂ < eps·δ·‖θ₁ − θ₀‖₃`.
#[allow(clippy::too_many_arguments)]
pub fn linear_aux_states(
    w0: &ScalarField,
    theta0: &ScalarField,
    theta1: &ScalarField,
    drift: &DriftProfile,
    cutoff: &CutoffChi,
    delta: f64,
    eps: f64,
    nodes: usize,
) -> Result<LinearAuxStates, ControlError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ControlError::InvalidArgument(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    if w0.parity() != Parity::Odd
        || theta0.parity() != Parity::Even
        || theta1.parity() != Parity::Even
    {
        return Err(ControlError::InvalidArgument(
            "expected odd vorticity and even temperatures".into(),
        ));
    }
    let diff = theta1 - theta0;
    let target = smooth_target(&diff, eps, 3)?;
    let control = Arc::new(TransportControl::new(&target, drift, cutoff)?);
    let mut aux = LinearAuxStates {
        control,
        w0: w0.clone(),
        theta0: theta0.clone(),
        theta1: theta1.clone(),
        delta,
        nodes: nodes.max(1),
        final_error: 0.0,
        final_bound: eps * delta * diff.sobolev_norm(3),
    };
    let end = aux.vartheta(1.0);
    aux.final_error = (&end - &theta1.scaled(delta)).sobolev_norm(2);
    if aux.final_error >= aux.final_bound && aux.final_bound > 0.0 {
        return Err(ControlError::BoundNotMet(format!(
            "‖ϑ̃(1) − δθ₁‖₂ = {:.3e} is not below {:.3e}",
            aux.final_error, aux.final_bound
        )));
    }
    Ok(aux)
}

impl LinearAuxStates {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn control(&self) -> &TransportControl {
        &self.control
    }

    pub fn theta1(&self) -> &ScalarField {
        &self.theta1
    }

    fn drift(&self) -> &DriftProfile {
        self.control.drift()
    }

    pub fn theta_free(&self, s: f64) -> ScalarField {
        self.theta0
            .shifted_x2(self.drift().displacement(s, 0.0))
            .scaled(self.delta)
    }

    pub fn theta_ctrl(&self, s: f64) -> ScalarField {
        let zero = ScalarField::zeros(self.theta0.grid(), Parity::Even);
        solve_transport(self.drift(), self.control.as_ref(), &zero, s, self.nodes)
            .scaled(self.delta)
    }

    fn chi_term(&self, s: f64) -> ScalarField {
        let c = &self.control;
        let a = self.delta * c.mean_primitive(s) / c.chi_integral();
        c.chi_coeffs().inverse().scaled(a)
    }

    pub fn vartheta(&self, s: f64) -> ScalarField {
        &(&self.theta_free(s) + &self.theta_ctrl(s)) - &self.chi_term(s)
    }

    pub fn v(&self, s: f64) -> Result<ScalarField, ControlError> {
        let drift = self.drift();
        let back = drift.displacement(s, 0.0);
        let free = self.w0.shifted_x2(back);
        let d1 = self.theta0.differentiate(Axis::X1, 1)?.shifted_x2(back);
        let ctrl = self.control.clone();
        let src = FnSource::new(
            move |t, shift| ctrl.sample_d1(t, shift),
            self.control.time_breakpoints(),
        );
        let forced = characteristic_integral(
            drift,
            &src,
            self.w0.grid(),
            Parity::Odd,
            s,
            self.nodes,
            |mu| s - mu,
        );
        Ok(&(&free + &d1.scaled(s * self.delta)) + &forced.scaled(self.delta))
    }

    pub fn snapshot(&self, s: f64) -> Result<AuxSnapshot, ControlError> {
        let theta_free = self.theta_free(s);
        let theta_ctrl = self.theta_ctrl(s);
        let vartheta = &(&theta_free + &theta_ctrl) - &self.chi_term(s);
        Ok(AuxSnapshot {
            s,
            v: self.v(s)?,
            theta_free,
            theta_ctrl,
            vartheta,
        })
    }

    /// `sup_s (‖ṽ(s) − w₀‖₂ + ‖ϑ̃(s)‖₃)` over the given sample times.
    pub fn sup_norm(&self, samples: &[f64]) -> Result<f64, ControlError> {
        let mut m: f64 = 0.0;
        for &s in samples {
            let snap = self.snapshot(s)?;
            m = m.max((&snap.v - &self.w0).sobolev_norm(2) + snap.vartheta.sobolev_norm(3));
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EtaMode {
    /// The lift `ȳ'_δχ/∫χ` is carried by the solver; the open-loop part is
    /// `δ⁻²η̃_δ(·, t/δ)` only.
    #[default]
    Lifted,
    /// All terms are passed as sources, the advective one as feedback.
    Direct,
}

struct ChiLift {
    profile: SpectralCoeffs,
    drift: DriftProfile,
    delta: f64,
    t0: f64,
}

impl ChiLift {
    fn unit(&self, t: f64) -> f64 {
        (t - self.t0) / self.delta
    }
}

impl TemperatureLift for ChiLift {
    fn profile(&self) -> &SpectralCoeffs {
        &self.profile
    }

    fn coefficient(&self, t: f64) -> f64 {
        self.drift.dy(self.unit(t)) / (self.delta * self.delta)
    }

    fn mean_flow(&self, t: f64) -> f64 {
        self.drift.y(self.unit(t)) / self.delta
    }

    fn displacement(&self, t0: f64, t1: f64) -> f64 {
        self.drift.displacement(self.unit(t0), self.unit(t1))
    }
}

/// The nonlinear temperature control η_δ on `[t0, t0 + δ]`.
pub struct EtaDeltaControl {
    control: Arc<TransportControl>,
    delta: f64,
    t0: f64,
    tau: f64,
    mode: EtaMode,
    chi: SpectralCoeffs,
    dchi: ScalarField,
    lap_chi: SpectralCoeffs,
    lift: ChiLift,
}

/// Assemble η_δ from the auxiliary states, starting at solver time `t0`.
pub fn temperature_control_eta(
    aux: &LinearAuxStates,
    t0: f64,
    tau: f64,
    mode: EtaMode,
) -> Result<EtaDeltaControl, ControlError> {
    let control = aux.control.clone();
    let ic = control.chi_integral();
    let mut chi = control.chi_coeffs();
    chi.scale(1.0 / ic);
    let dchi = chi.differentiate(Axis::X2, 1)?.inverse();
    let lap_chi = chi.differentiate(Axis::X2, 2)?;
    Ok(EtaDeltaControl {
        lift: ChiLift {
            profile: chi.clone(),
            drift: control.drift().clone(),
            delta: aux.delta,
            t0,
        },
        control,
        delta: aux.delta,
        t0,
        tau,
        mode,
        chi,
        dchi,
        lap_chi,
    })
}

impl EtaDeltaControl {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn mode(&self) -> EtaMode {
        self.mode
    }

    fn unit(&self, t: f64) -> f64 {
        (t - self.t0) / self.delta
    }

    /// `δ⁻²η̃_δ(·, t/δ) = δ⁻¹η̃(·, t/δ)` projected on the grid band.
    pub fn base(&self, t: f64) -> Option<SpectralCoeffs> {
        let s = self.unit(t);
        if !(0.0..=1.0).contains(&s) {
            return None;
        }
        let mut c = self.control.mean_free_projected(s)?;
        c.scale(1.0 / self.delta);
        Some(c)
    }

    /// `ȳ_δ(t)`, the uniform flow the control enforces.
    pub fn mean_flow(&self, t: f64) -> f64 {
        self.lift.mean_flow(t)
    }
}

impl ControlSchedule for EtaDeltaControl {
    fn open_loop(&self, t: f64) -> Option<Source> {
        let base = self.base(t);
        match self.mode {
            EtaMode::Lifted => base.map(Source::Coeffs),
            EtaMode::Direct => {
                let s = self.unit(t);
                let d = self.delta;
                let (_, _, dy, ddy) = self.control.drift().eval_all(s);
                let (dy, ddy) = (dy / (d * d), ddy / (d * d * d));
                if base.is_none() && dy == 0.0 && ddy == 0.0 {
                    return None;
                }
                let mut c = base.unwrap_or_else(|| {
                    SpectralCoeffs::zeros(self.control.grid(), Parity::Even)
                });
                c.add_scaled(ddy, &self.chi);
                c.add_scaled(-self.tau * dy, &self.lap_chi);
                Some(Source::Coeffs(c))
            }
        }
    }

    fn has_feedback(&self) -> bool {
        self.mode == EtaMode::Direct
    }

    fn feedback(&self, t: f64, _theta: &ScalarField, u: &VelocityField) -> Option<Source> {
        if self.mode != EtaMode::Direct {
            return None;
        }
        let dy = self.control.drift().dy(self.unit(t)) / (self.delta * self.delta);
        if dy == 0.0 {
            return None;
        }
        let vals = u.u2.values() * self.dchi.values() * dy;
        ScalarField::from_values(self.control.grid(), Parity::Even, vals)
            .ok()
            .map(Source::Samples)
    }

    fn lift(&self) -> Option<&dyn TemperatureLift> {
        match self.mode {
            EtaMode::Lifted => Some(&self.lift),
            EtaMode::Direct => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteerTemperatureOptions {
    /// Accuracy of the linear target, `‖ϑ̃(1) − δθ₁‖₂ < eps·δ·‖θ₁ − θ₀‖₃`.
    pub eps: f64,
    /// Solver steps per unit of rescaled time s = t/δ.
    pub steps: usize,
    /// Gauss nodes per segment in the characteristic quadratures.
    pub nodes: usize,
    /// Gauss nodes per solver step for the open-loop control. The replayed
    /// drift makes the control's x₂ phase rotate quickly inside each window.
    pub source_nodes: usize,
    pub mode: EtaMode,
}

impl Default for SteerTemperatureOptions {
    fn default() -> Self {
        Self {
            eps: 0.05,
            steps: 5000,
            nodes: 8,
            source_nodes: 6,
            mode: EtaMode::Lifted,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TemperatureSteering {
    pub state: State,
    /// `‖w(δ) − w₀‖₁`.
    pub w_error: f64,
    /// `‖θ(δ) − θ₁‖₂`.
    pub theta_error: f64,
    /// `‖w(δ) − ṽ(1)‖₁`.
    pub q_norm: f64,
    /// `‖θ(δ) − δ⁻¹ϑ̃(1)‖₂`.
    pub r_norm: f64,
    /// max over all steps of `|c(t) − ȳ_δ(t)|`.
    pub tracking: f64,
    /// max over the solver's source nodes of `|∫η̃|`.
    pub eta_mean_max: f64,
    pub linear_error: f64,
}

/// Steer θ₀ to θ₁ in time δ while keeping w close to w₀.
#[allow(clippy::too_many_arguments)]
pub fn steer_temperature(
    cfg: &SolverConfig,
    state0: &State,
    theta1: &ScalarField,
    drift: &DriftProfile,
    cutoff: &CutoffChi,
    delta: f64,
    forcing: &dyn Forcing,
    opts: SteerTemperatureOptions,
) -> Result<TemperatureSteering, ControlError> {
    state0.validate()?;
    if opts.steps == 0 {
        return Err(ControlError::InvalidArgument("steps must be positive".into()));
    }
    let aux = linear_aux_states(
        &state0.w,
        &state0.theta,
        theta1,
        drift,
        cutoff,
        delta,
        opts.eps,
        opts.nodes,
    )?;
    let eta = temperature_control_eta(&aux, state0.t, cfg.tau, opts.mode)?;
    let mut cfg = cfg.clone();
    cfg.time_step = TimeStep::Fixed(delta / opts.steps as f64);
    cfg.source_nodes = opts.source_nodes.max(1);
    let mut solver = Solver::new(cfg)?;
    let c0 = state0.mean_coeff;
    let mut tracking = 0.0f64;
    let end = solver.run_observed(state0, state0.t + delta, forcing, &eta, |v| {
        tracking = tracking.max((v.mean_coeff() - c0 - eta.mean_flow(v.t())).abs());
    })?;
    let mut eta_mean_max = 0.0f64;
    for i in 0..=opts.steps.min(2000) {
        let s = i as f64 / opts.steps.min(2000) as f64;
        if let Some(c) = aux.control.mean_free_projected(s) {
            eta_mean_max = eta_mean_max.max(c.data()[[0, 0]].norm());
        }
    }
    let v1 = aux.v(1.0)?;
    let vt1 = aux.vartheta(1.0);
    Ok(TemperatureSteering {
        w_error: (&end.w - &state0.w).sobolev_norm(1),
        theta_error: (&end.theta - theta1).sobolev_norm(2),
        q_norm: (&end.w - &v1).sobolev_norm(1),
        r_norm: (&end.theta - &vt1.scaled(1.0 / delta)).sobolev_norm(2),
        tracking,
        eta_mean_max,
        linear_error: aux.final_error,
        state: end,
    })
}
