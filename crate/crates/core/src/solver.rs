//! Time integration of the controlled Boussinesq system
//!
//! ```text
//! ∂ₜw + (u·∇)w − νΔw = ∂₁θ + φ
//! ∂ₜθ + (u·∇)θ − τΔθ = ψ + η
//! u = ∇^⊥ψ + c e₂,  c' = ∫θ
//! ```
//!
//! Diffusion is Crank–Nicolson; advection by the non-uniform part of the
//! velocity, buoyancy and state-dependent control are second-order
//! Adams–Bashforth (Heun on the first step). Transport by the uniform flow
//! `c(t) e₂` is integrated exactly through an x₂ phase shift, and open-loop
//! sources are integrated over each step by Gauss quadrature against the exact
//! diffusion/transport propagator, so fast-moving controls do not limit the
//! step size. Nonlinear and source terms are dealiased by the 2/3 rule.
//!
//! A control may carry a temperature lift `L(x,t) = ℓ(t) p(x)`: the solver then
//! advances `ρ = θ − L` and the control is understood to contain
//! `∂ₜL + (u·∇)L − τΔL` on top of its remaining parts.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elliptic::{velocity_coeffs, VelocityField};
use crate::quadrature::UnitRule;
use crate::spectral::{Axis, Grid, Parity, ScalarField, SpectralCoeffs, SpectralError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("non-finite value in the solution at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("{0}")]
    Source(String),
}

/// Vorticity, temperature and the uniform-flow coefficient at time `t`.
#[derive(Clone, Debug)]
pub struct State {
    pub w: ScalarField,
    pub theta: ScalarField,
    pub mean_coeff: f64,
    pub t: f64,
}

impl State {
    pub fn new(
        w: ScalarField,
        theta: ScalarField,
        mean_coeff: f64,
        t: f64,
    ) -> Result<Self, SolverError> {
        let s = Self {
            w,
            theta,
            mean_coeff,
            t,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self {
            w: ScalarField::zeros(grid, Parity::Odd),
            theta: ScalarField::zeros(grid, Parity::Even),
            mean_coeff: 0.0,
            t,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.w.grid()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        self.w.grid().check_same(self.theta.grid())?;
        if self.w.parity() != Parity::Odd || self.theta.parity() != Parity::Even {
            return Err(SolverError::InvalidState(format!(
                "vorticity must be odd and temperature even, got {} and {}",
                self.w.parity(),
                self.theta.parity()
            )));
        }
        if !(self.t.is_finite() && self.mean_coeff.is_finite()) {
            return Err(SolverError::InvalidState(
                "non-finite time or mean coefficient".into(),
            ));
        }
        Ok(())
    }

    pub fn velocity(&self) -> Result<VelocityField, SolverError> {
        Ok(crate::elliptic::velocity_from_vorticity(
            &self.w,
            self.mean_coeff,
        )?)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.theta.is_finite() && self.mean_coeff.is_finite()
    }
}

/// A source term given either as grid samples or directly as coefficients.
#[derive(Clone, Debug)]
pub enum Source {
    Samples(ScalarField),
    Coeffs(SpectralCoeffs),
}

impl Source {
    pub fn into_coeffs(self) -> SpectralCoeffs {
        match self {
            Source::Samples(f) => f.forward(),
            Source::Coeffs(c) => c,
        }
    }

    pub fn parity(&self) -> Parity {
        match self {
            Source::Samples(f) => f.parity(),
            Source::Coeffs(c) => c.parity(),
        }
    }
}

/// Uncontrolled body forces φ (vorticity) and ψ (temperature).
pub trait Forcing: Send + Sync {
    fn vorticity(&self, _t: f64) -> Option<Source> {
        None
    }
    fn temperature(&self, _t: f64) -> Option<Source> {
        None
    }
}

pub struct NoForcing;

impl Forcing for NoForcing {}

type FieldFn = Box<dyn Fn(f64) -> ScalarField + Send + Sync>;

/// Forcing built from closures returning grid samples.
#[derive(Default)]
pub struct FieldForcing {
    pub vorticity: Option<FieldFn>,
    pub temperature: Option<FieldFn>,
}

impl Forcing for FieldForcing {
    fn vorticity(&self, t: f64) -> Option<Source> {
        self.vorticity.as_ref().map(|f| Source::Samples(f(t)))
    }
    fn temperature(&self, t: f64) -> Option<Source> {
        self.temperature.as_ref().map(|f| Source::Samples(f(t)))
    }
}

/// Temperature lift `ℓ(t) p(x)`.
pub trait TemperatureLift: Send + Sync {
    /// Coefficients of the even profile `p`.
    fn profile(&self) -> &SpectralCoeffs;
    fn coefficient(&self, t: f64) -> f64;
    /// `∫₀ᵗ ℓ(s) ds · ∫p`, the lift's contribution to the uniform flow.
    fn mean_flow(&self, t: f64) -> f64;
    /// `∫_{t0}^{t1} mean_flow(s) ds`.
    fn displacement(&self, t0: f64, t1: f64) -> f64;
}

/// Temperature control entering the θ equation.
pub trait ControlSchedule: Send + Sync {
    /// State-independent part, integrated exactly in time over each step.
    fn open_loop(&self, _t: f64) -> Option<Source> {
        None
    }
    fn has_feedback(&self) -> bool {
        false
    }
    /// State-dependent part, treated explicitly.
    fn feedback(&self, _t: f64, _theta: &ScalarField, _u: &VelocityField) -> Option<Source> {
        None
    }
    fn lift(&self) -> Option<&dyn TemperatureLift> {
        None
    }
}

pub struct NoControl;

impl ControlSchedule for NoControl {}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Fixed(f64),
    Cfl { cfl: f64, dt_max: f64 },
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub nu: f64,
    pub tau: f64,
    /// Include the buoyancy term ∂₁θ in the vorticity equation.
    pub buoyancy: bool,
    pub time_step: TimeStep,
    /// Gauss nodes per step for open-loop sources.
    pub source_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu: 0.05,
            tau: 0.05,
            buoyancy: true,
            time_step: TimeStep::Fixed(1e-3),
            source_nodes: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.into()));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad("nu must be positive");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if self.source_nodes == 0 {
            return bad("source_nodes must be at least 1");
        }
        match self.time_step {
            TimeStep::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => bad("dt must be positive"),
            TimeStep::Cfl { cfl, dt_max } if !(cfl > 0.0 && dt_max > 0.0) => {
                bad("cfl and dt_max must be positive")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone)]
struct Inner {
    w: SpectralCoeffs,
    r: SpectralCoeffs,
    /// Uniform-flow coefficient minus the lift contribution.
    cb: f64,
    t: f64,
}

struct History {
    t: f64,
    dt: f64,
    nw: SpectralCoeffs,
    nr: SpectralCoeffs,
    w: Array2<f64>,
    theta: Array2<f64>,
}

struct Explicit {
    nw: SpectralCoeffs,
    nr: SpectralCoeffs,
    umax: f64,
}

struct Node {
    t: f64,
    weight: f64,
    w: Option<SpectralCoeffs>,
    r: Option<SpectralCoeffs>,
}

/// Read-only view of the solution after a step.
pub struct StepView<'a> {
    inner: &'a Inner,
    lift: Option<&'a dyn TemperatureLift>,
    pub dt: f64,
}

impl StepView<'_> {
    pub fn t(&self) -> f64 {
        self.inner.t
    }

    pub fn mean_coeff(&self) -> f64 {
        mean_coeff(self.inner, self.lift)
    }

    pub fn state(&self) -> State {
        to_state(self.inner, self.lift)
    }
}

fn mean_coeff(s: &Inner, lift: Option<&dyn TemperatureLift>) -> f64 {
    s.cb + lift.map_or(0.0, |l| l.mean_flow(s.t))
}

fn full_theta_coeffs(s: &Inner, lift: Option<&dyn TemperatureLift>) -> SpectralCoeffs {
    let mut th = s.r.clone();
    if let Some(l) = lift {
        th.add_scaled(l.coefficient(s.t), l.profile());
    }
    th
}

fn to_state(s: &Inner, lift: Option<&dyn TemperatureLift>) -> State {
    State {
        w: s.w.inverse(),
        theta: full_theta_coeffs(s, lift).inverse(),
        mean_coeff: mean_coeff(s, lift),
        t: s.t,
    }
}

fn finite(c: &SpectralCoeffs) -> bool {
    c.data().iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub struct Solver {
    cfg: SolverConfig,
    rule: UnitRule,
    history: Option<History>,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let rule = UnitRule::new(cfg.source_nodes);
        Ok(Self {
            cfg,
            rule,
            history: None,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Forget the multistep history; the next step restarts with Heun.
    pub fn reset(&mut self) {
        self.history = None;
    }

    fn enter(&mut self, state: &State, lift: Option<&dyn TemperatureLift>) -> Inner {
        let keep = self.history.as_ref().is_some_and(|h| {
            h.t == state.t && h.w == *state.w.values() && h.theta == *state.theta.values()
        });
        if !keep {
            self.history = None;
        }
        let mut r = state.theta.forward();
        let mut cb = state.mean_coeff;
        if let Some(l) = lift {
            r.add_scaled(-l.coefficient(state.t), l.profile());
            cb -= l.mean_flow(state.t);
        }
        Inner {
            w: state.w.forward(),
            r,
            cb,
            t: state.t,
        }
    }

    fn explicit(
        &self,
        s: &Inner,
        control: &dyn ControlSchedule,
    ) -> Result<Explicit, SolverError> {
        let lift = control.lift();
        let (u1c, u2c) = velocity_coeffs(&s.w, 0.0)?;
        let u1 = u1c.inverse();
        let u2 = u2c.inverse();
        let umax = u1.max_abs().max(u2.max_abs());

        let advect = |f: &SpectralCoeffs| -> Result<SpectralCoeffs, SolverError> {
            let d1 = f.differentiate(Axis::X1, 1)?.inverse();
            let d2 = f.differentiate(Axis::X2, 1)?.inverse();
            let vals = u1.values() * d1.values() + u2.values() * d2.values();
            let mut out = ScalarField::from_values(f.grid(), f.parity(), vals)?.forward();
            out.scale(-1.0);
            Ok(out)
        };

        let mut nw = advect(&s.w)?;
        if self.cfg.buoyancy {
            nw.add_scaled(1.0, &s.r.differentiate(Axis::X1, 1)?);
            if let Some(l) = lift {
                nw.add_scaled(l.coefficient(s.t), &l.profile().differentiate(Axis::X1, 1)?);
            }
        }
        nw.dealias();

        let mut nr = advect(&s.r)?;
        if control.has_feedback() {
            let theta = full_theta_coeffs(s, lift).inverse();
            let c = mean_coeff(s, lift);
            let u = VelocityField {
                u1: u1.clone(),
                u2: ScalarField::from_values(u2.grid(), Parity::Even, u2.values() + c)?,
                mean_coeff: c,
            };
            if let Some(src) = control.feedback(s.t, &theta, &u) {
                nr.add_scaled(1.0, &checked(src, Parity::Even, "feedback control")?);
            }
        }
        nr.dealias();
        Ok(Explicit { nw, nr, umax })
    }

    fn sources(
        &self,
        t0: f64,
        dt: f64,
        forcing: &dyn Forcing,
        control: &dyn ControlSchedule,
    ) -> Result<Vec<Node>, SolverError> {
        let mut nodes = Vec::with_capacity(self.rule.len());
        for (t, weight) in self.rule.on(t0, t0 + dt) {
            let w = forcing
                .vorticity(t)
                .map(|s| checked(s, Parity::Odd, "vorticity forcing"))
                .transpose()?;
            let mut r: Option<SpectralCoeffs> = None;
            for src in [forcing.temperature(t), control.open_loop(t)].into_iter().flatten() {
                let c = checked(src, Parity::Even, "temperature source")?;
                match r.as_mut() {
                    Some(acc) => acc.add_scaled(1.0, &c),
                    None => r = Some(c),
                }
            }
            let dealiased = |mut c: SpectralCoeffs| {
                c.dealias();
                c
            };
            nodes.push(Node {
                t,
                weight,
                w: w.map(dealiased),
                r: r.map(dealiased),
            });
        }
        Ok(nodes)
    }

    /// Combine old state, explicit increments and sources into the new state.
    /// Returns the state and the uniform-flow displacement over the step.
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        s: &Inner,
        dt: f64,
        ew: &SpectralCoeffs,
        er: &SpectralCoeffs,
        implicit_new: Option<(&SpectralCoeffs, &SpectralCoeffs)>,
        nodes: &[Node],
        lift: Option<&dyn TemperatureLift>,
    ) -> (Inner, f64) {
        let g = s.w.grid().clone();
        let t1 = s.t + dt;

        let mut r00 = s.r.data()[[0, 0]].re + er.data()[[0, 0]].re;
        if let Some((_, nr)) = implicit_new {
            r00 += nr.data()[[0, 0]].re;
        }
        for n in nodes {
            if let Some(r) = &n.r {
                r00 += n.weight * r.data()[[0, 0]].re;
            }
        }
        let cb1 = s.cb + 0.5 * dt * (s.r.data()[[0, 0]].re + r00);
        let lift_disp = |a: f64, b: f64| lift.map_or(0.0, |l| l.displacement(a, b));
        let disp = 0.5 * dt * (s.cb + cb1) + lift_disp(s.t, t1);
        let node_disp: Vec<f64> = nodes
            .iter()
            .map(|n| {
                let cq = s.cb + (cb1 - s.cb) * (n.t - s.t) / dt;
                0.5 * (t1 - n.t) * (cq + cb1) + lift_disp(n.t, t1)
            })
            .collect();

        let nyq = g.nx2() / 2;
        // Transport by the uniform flow over a displacement d: f(x₂) → f(x₂ − d).
        let phase = |k: usize, d: f64| -> Complex64 {
            if k == nyq {
                Complex64::new((k as f64 * d).cos(), 0.0)
            } else {
                Complex64::from_polar(1.0, -(k as f64) * d)
            }
        };

        let update = |old: &SpectralCoeffs,
                      e: &SpectralCoeffs,
                      enew: Option<&SpectralCoeffs>,
                      diff: f64,
                      pick: &dyn Fn(&Node) -> Option<&SpectralCoeffs>|
         -> SpectralCoeffs {
            let parity = old.parity();
            let mut out = old.clone();
            let od = old.data();
            let ed = e.data();
            for ((i, k), z) in out.data_mut().indexed_iter_mut() {
                let lam = diff * g.neg_laplacian(parity, i, k);
                let a = 0.5 * lam * dt;
                let mut v = phase(k, disp) * ((1.0 - a) * od[[i, k]] + ed[[i, k]]) / (1.0 + a);
                if let Some(en) = enew {
                    v += en.data()[[i, k]] / (1.0 + a);
                }
                for (n, d) in nodes.iter().zip(&node_disp) {
                    if let Some(src) = pick(n) {
                        let decay = (-lam * (t1 - n.t)).exp();
                        v += phase(k, *d) * src.data()[[i, k]] * (n.weight * decay);
                    }
                }
                *z = v;
            }
            out
        };

        let w = update(
            &s.w,
            ew,
            implicit_new.map(|x| x.0),
            self.cfg.nu,
            &|n: &Node| n.w.as_ref(),
        );
        let mut r = update(
            &s.r,
            er,
            implicit_new.map(|x| x.1),
            self.cfg.tau,
            &|n: &Node| n.r.as_ref(),
        );
        r.data_mut()[[0, 0]] = Complex64::new(r00, 0.0);
        (
            Inner {
                w,
                r,
                cb: cb1,
                t: t1,
            },
            disp,
        )
    }

    fn advance(
        &mut self,
        s: &Inner,
        ex: Explicit,
        dt: f64,
        forcing: &dyn Forcing,
        control: &dyn ControlSchedule,
    ) -> Result<Inner, SolverError> {
        let lift = control.lift();
        let nodes = self.sources(s.t, dt, forcing, control)?;
        let hist = self
            .history
            .as_ref()
            .filter(|h| h.t == s.t)
            .map(|h| (h.dt, &h.nw, &h.nr));
        let (next, disp) = match hist {
            Some((dt_prev, nw_prev, nr_prev)) => {
                let rr = dt / dt_prev;
                let mut ew = ex.nw.clone();
                ew.scale(dt * (1.0 + 0.5 * rr));
                ew.add_scaled(-dt * 0.5 * rr, nw_prev);
                let mut er = ex.nr.clone();
                er.scale(dt * (1.0 + 0.5 * rr));
                er.add_scaled(-dt * 0.5 * rr, nr_prev);
                self.assemble(s, dt, &ew, &er, None, &nodes, lift)
            }
            None => {
                let mut ew = ex.nw.clone();
                ew.scale(dt);
                let mut er = ex.nr.clone();
                er.scale(dt);
                let (pred, _) = self.assemble(s, dt, &ew, &er, None, &nodes, lift);
                let exp = self.explicit(&pred, control)?;
                let (mut nw1, mut nr1) = (exp.nw, exp.nr);
                nw1.scale(0.5 * dt);
                nr1.scale(0.5 * dt);
                ew.scale(0.5);
                er.scale(0.5);
                self.assemble(s, dt, &ew, &er, Some((&nw1, &nr1)), &nodes, lift)
            }
        };
        if !(finite(&next.w) && finite(&next.r) && next.cb.is_finite()) {
            self.history = None;
            return Err(SolverError::NonFinite { t: next.t });
        }
        let mut nw = ex.nw;
        let mut nr = ex.nr;
        nw.shift_x2(-disp);
        nr.shift_x2(-disp);
        self.history = Some(History {
            t: next.t,
            dt,
            nw,
            nr,
            w: Array2::zeros((0, 0)),
            theta: Array2::zeros((0, 0)),
        });
        Ok(next)
    }

    fn remember(&mut self, state: &State) {
        if let Some(h) = self.history.as_mut() {
            if h.t == state.t {
                h.w = state.w.values().clone();
                h.theta = state.theta.values().clone();
            }
        }
    }

    fn choose_dt(&self, umax: f64, grid: &Grid) -> f64 {
        match self.cfg.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl { cfl, dt_max } => {
                let h = grid.h1().min(grid.h2());
                if umax > 0.0 {
                    dt_max.min(cfl * h / umax)
                } else {
                    dt_max
                }
            }
        }
    }

    /// One step of size `dt`.
    pub fn step(
        &mut self,
        state: &State,
        forcing: &dyn Forcing,
        control: &dyn ControlSchedule,
        dt: f64,
    ) -> Result<State, SolverError> {
        state.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("invalid step {dt}")));
        }
        let lift = control.lift();
        let s = self.enter(state, lift);
        let ex = self.explicit(&s, control)?;
        let next = self.advance(&s, ex, dt, forcing, control)?;
        let out = to_state(&next, lift);
        self.remember(&out);
        Ok(out)
    }

    /// Integrate from `state.t` to `t_end`, landing exactly on `t_end`.
    pub fn run(
        &mut self,
        state: &State,
        t_end: f64,
        forcing: &dyn Forcing,
        control: &dyn ControlSchedule,
    ) -> Result<State, SolverError> {
        self.run_observed(state, t_end, forcing, control, |_| {})
    }

    /// As [`Solver::run`], calling `observe` after every step.
    pub fn run_observed(
        &mut self,
        state: &State,
        t_end: f64,
        forcing: &dyn Forcing,
        control: &dyn ControlSchedule,
        mut observe: impl FnMut(&StepView),
    ) -> Result<State, SolverError> {
        state.validate()?;
        if !(t_end >= state.t) {
            return Err(SolverError::InvalidConfig(format!(
                "end time {t_end} precedes start time {}",
                state.t
            )));
        }
        let lift = control.lift();
        let grid = state.grid().clone();
        let mut s = self.enter(state, lift);
        let tol = 1e-12 * t_end.abs().max(1.0);
        while t_end - s.t > tol {
            let ex = self.explicit(&s, control)?;
            let mut dt = self.choose_dt(ex.umax, &grid);
            let remaining = t_end - s.t;
            if remaining <= dt * (1.0 + 1e-9) {
                dt = remaining;
            } else if remaining < 1.5 * dt {
                dt = 0.5 * remaining;
            }
            let mut next = self.advance(&s, ex, dt, forcing, control)?;
            if (t_end - next.t).abs() <= tol {
                next.t = t_end;
                if let Some(h) = self.history.as_mut() {
                    h.t = t_end;
                }
            }
            s = next;
            observe(&StepView {
                inner: &s,
                lift,
                dt,
            });
        }
        let out = to_state(&s, lift);
        self.remember(&out);
        Ok(out)
    }
}

/// Pseudospectral `(u·∇)f` on the grid, with the 2/3 rule applied to the product.
pub fn advect(u: &VelocityField, f: &ScalarField) -> Result<ScalarField, SolverError> {
    let d1 = f.differentiate(Axis::X1, 1)?;
    let d2 = f.differentiate(Axis::X2, 1)?;
    let vals = u.u1.values() * d1.values() + u.u2.values() * d2.values();
    Ok(ScalarField::from_values(f.grid(), f.parity(), vals)?.dealias())
}

fn checked(src: Source, parity: Parity, what: &str) -> Result<SpectralCoeffs, SolverError> {
    if src.parity() != parity {
        return Err(SolverError::Source(format!(
            "{what} must be {parity}, got {}",
            src.parity()
        )));
    }
    Ok(src.into_coeffs())
}

/// Norms reported alongside trajectories.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub w_l2: f64,
    pub w_h1: f64,
    pub theta_l2: f64,
    pub theta_h2: f64,
    pub mean_coeff: f64,
}

pub fn diagnostics(state: &State) -> Diagnostics {
    let w = state.w.forward();
    let th = state.theta.forward();
    Diagnostics {
        t: state.t,
        w_l2: w.sobolev_norm(0),
        w_h1: w.sobolev_norm(1),
        theta_l2: th.sobolev_norm(0),
        theta_h2: th.sobolev_norm(2),
        mean_coeff: state.mean_coeff,
    }
}
