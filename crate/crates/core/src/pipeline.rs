//! Four-stage global steering of (w₀, θ₀) towards (w_T, θ_T) with temperature
//! control only:
//!
//! 1. free run to T₁ (smoothing);
//! 2. temperature steering to the large state −γ⁻¹ξ, where ∂₁ξ ≈ w(T₁) − w_T;
//! 3. free run of length γ, during which buoyancy turns w(T₁) into ≈ w_T;
//! 4. temperature steering to θ_T, followed by a free run up to T.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::control::{
    build_xi, steer_temperature, steer_vorticity, ControlError, SteerTemperatureOptions,
    SteerVorticityOptions, TemperatureSteering, XiOptions,
};
use crate::elliptic::velocity_from_vorticity;
use crate::return_method::{BumpShape, CutoffChi, DriftProfile, PartitionTimes};
use crate::solver::{
    Forcing, NoControl, Solver, SolverConfig, SolverError, State, TimeStep,
};
use crate::spectral::{ScalarField, SpectralError};

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Final time T.
    pub horizon: f64,
    /// Target accuracy ε.
    pub eps: f64,
    /// T₁ = t1_fraction·T.
    pub t1_fraction: f64,
    /// Candidate lengths γ of the free vorticity stage, tried in order.
    pub gamma_schedule: Vec<f64>,
    /// Initial δ values for the temperature stages; halved further down to
    /// `delta_min` until both stage tolerances are met.
    pub delta_schedule: Vec<f64>,
    pub delta_min: f64,
    pub solver: SolverConfig,
    pub cutoff: CutoffChi,
    pub bump: BumpShape,
    pub vorticity: SteerVorticityOptions,
    pub temperature: SteerTemperatureOptions,
    pub xi: XiOptions,
}

impl PipelineConfig {
    /// Defaults for a given geometry: T₁ = 0.2T and the schedule
    /// {0.2, 0.1, 0.05, 0.025} for both γ and δ.
    pub fn new(horizon: f64, eps: f64, solver: SolverConfig, cutoff: CutoffChi) -> Self {
        let schedule = vec![0.2, 0.1, 0.05, 0.025];
        Self {
            horizon,
            eps,
            t1_fraction: 0.2,
            gamma_schedule: schedule.clone(),
            delta_schedule: schedule,
            delta_min: 1e-5,
            solver,
            cutoff,
            bump: BumpShape::Polynomial,
            vorticity: SteerVorticityOptions::default(),
            temperature: SteerTemperatureOptions {
                steps: 2000,
                ..Default::default()
            },
            xi: XiOptions::default(),
        }
    }

    /// Tolerance β on the vorticity change during a temperature stage.
    pub fn beta(&self) -> f64 {
        self.eps / 10.0
    }

    /// Tolerance κ on the temperature error of a temperature stage.
    pub fn kappa(&self) -> f64 {
        self.eps / 10.0
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon {} must be positive", self.horizon));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps {} must be positive", self.eps));
        }
        if !(self.t1_fraction > 0.0 && self.t1_fraction < 1.0) {
            return bad(format!("t1_fraction {} must lie in (0, 1)", self.t1_fraction));
        }
        let in_unit = |v: &[f64]| !v.is_empty() && v.iter().all(|&d| d > 0.0 && d < 1.0);
        if !in_unit(&self.gamma_schedule) || !in_unit(&self.delta_schedule) {
            return bad("schedules must be non-empty with entries in (0, 1)".into());
        }
        if !(self.delta_min > 0.0) {
            return bad("delta_min must be positive".into());
        }
        self.solver.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("stage {stage} exceeded its budget: {detail}")]
    Budget {
        stage: &'static str,
        detail: String,
        report: Box<PipelineReport>,
    },
}

/// One stage of the run.
#[derive(Clone, Debug, Serialize)]
pub struct StageRow {
    pub stage: &'static str,
    pub t_start: f64,
    pub t_end: f64,
    /// δ or γ used by the stage (0 for free runs without a parameter).
    pub delta: f64,
    /// The quantity checked against the stage budget.
    pub stage_error: f64,
    pub stage_budget: f64,
    /// `‖w − w_T‖₁` at the end of the stage.
    pub w_error: f64,
    /// `‖θ − θ_T‖₂` at the end of the stage.
    pub theta_error: f64,
    pub mean_coeff: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineReport {
    pub stages: Vec<StageRow>,
    pub gamma: Option<f64>,
    pub delta_xi: Option<f64>,
    pub delta_target: Option<f64>,
    pub final_w_error: f64,
    pub final_theta_error: f64,
    pub final_mean_coeff: f64,
    /// `‖w(T) − w_T‖₁ + ‖θ(T) − θ_T‖₂ + |c(T)|`.
    pub total_error: f64,
    /// `‖u(T) − u_T‖₂`, with u_T carrying no uniform flow.
    pub velocity_error: f64,
    /// Change of the state over the trailing free run [T₄, T].
    pub trailing_drift: f64,
    pub final_state: Option<State>,
}

struct Targets<'a> {
    w: &'a ScalarField,
    theta: &'a ScalarField,
}

impl Targets<'_> {
    fn row(
        &self,
        stage: &'static str,
        t_start: f64,
        end: &State,
        delta: f64,
        err: (f64, f64),
        clock: Instant,
    ) -> StageRow {
        StageRow {
            stage,
            t_start,
            t_end: end.t,
            delta,
            stage_error: err.0,
            stage_budget: err.1,
            w_error: (&end.w - self.w).sobolev_norm(1),
            theta_error: (&end.theta - self.theta).sobolev_norm(2),
            mean_coeff: end.mean_coeff,
            wall_seconds: clock.elapsed().as_secs_f64(),
        }
    }
}

fn free_run(
    cfg: &SolverConfig,
    state: &State,
    t_end: f64,
    forcing: &dyn Forcing,
) -> Result<State, SolverError> {
    let mut solver = Solver::new(cfg.clone())?;
    solver.run(state, t_end, forcing, &NoControl)
}

/// Temperature steering with δ taken from the schedule and then halved until
/// `‖w(δ) − w₀‖₁ < β` and `‖θ(δ) − θ₁‖₂ < κ`.
fn steer_within(
    cfg: &PipelineConfig,
    state: &State,
    theta1: &ScalarField,
    drift: &DriftProfile,
    forcing: &dyn Forcing,
) -> Result<(TemperatureSteering, f64), String> {
    let mut deltas = cfg.delta_schedule.clone();
    let mut d = deltas.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    while d >= cfg.delta_min {
        deltas.push(d);
        d /= 2.0;
    }
    // The linear target error must sit well inside κ.
    let scale = (theta1 - &state.theta).sobolev_norm(3);
    let mut opts = cfg.temperature;
    if scale > 0.0 {
        opts.eps = opts.eps.min(0.25 * cfg.kappa() / scale);
    }
    let mut last = None;
    for &delta in &deltas {
        let res = steer_temperature(
            &cfg.solver,
            state,
            theta1,
            drift,
            &cfg.cutoff,
            delta,
            forcing,
            opts,
        );
        match res {
            Ok(r) if r.w_error < cfg.beta() && r.theta_error < cfg.kappa() => {
                return Ok((r, delta));
            }
            Ok(r) => last = Some(r),
            Err(ControlError::Solver(SolverError::NonFinite { .. })) => continue,
            Err(e) => return Err(e.to_string()),
        }
    }
    let detail = match &last {
        Some(r) => format!(
            "smallest δ gave ‖w − w0‖₁ = {:.3e}, ‖θ − θ1‖₂ = {:.3e} (tolerances {:.3e}, {:.3e})",
            r.w_error,
            r.theta_error,
            cfg.beta(),
            cfg.kappa()
        ),
        None => "every δ in the schedule failed".into(),
    };
    Err(detail)
}

/// Run the four stages and the trailing free run.
pub fn run_pipeline(
    w0: &ScalarField,
    theta0: &ScalarField,
    w_target: &ScalarField,
    theta_target: &ScalarField,
    forcing: &dyn Forcing,
    cfg: &PipelineConfig,
) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let targets = Targets {
        w: w_target,
        theta: theta_target,
    };
    let mut report = PipelineReport::default();
    let budget = |report: &PipelineReport, stage, detail: String| PipelineError::Budget {
        stage,
        detail,
        report: Box::new(report.clone()),
    };
    let drift = DriftProfile::new(
        PartitionTimes::new(cfg.cutoff.k()).map_err(ControlError::from)?,
        &cfg.cutoff,
        cfg.bump,
    );

    // Stage 1: smoothing.
    let clock = Instant::now();
    let s0 = State::new(w0.clone(), theta0.clone(), 0.0, 0.0)?;
    let t1 = cfg.t1_fraction * cfg.horizon;
    let s1 = free_run(&cfg.solver, &s0, t1, forcing)?;
    report
        .stages
        .push(targets.row("smoothing", 0.0, &s1, 0.0, (0.0, 0.0), clock));

    // Stage 2: choose γ, then reach −γ⁻¹ξ.
    let clock = Instant::now();
    let xi = build_xi(&s1.w, w_target, cfg.eps, cfg.xi)?;
    let probe = State {
        theta: ScalarField::zeros(s1.theta.grid(), s1.theta.parity()),
        ..s1.clone()
    };
    let mut gamma = None;
    let mut tried = Vec::new();
    for &g in &cfg.gamma_schedule {
        let r = steer_vorticity(&cfg.solver, &probe, &xi, g, forcing, cfg.vorticity)?;
        tried.push(format!("e({g}) = {:.3e}", r.error));
        if r.error < cfg.eps / 2.0 {
            gamma = Some(g);
            break;
        }
    }
    let Some(gamma) = gamma else {
        return Err(budget(
            &report,
            "free_vorticity",
            format!("no γ meets eps/2 = {:.3e}: {}", cfg.eps / 2.0, tried.join(", ")),
        ));
    };
    report.gamma = Some(gamma);
    let theta_xi = xi.xi.scaled(-1.0 / gamma);
    let (steer2, d2) = match steer_within(cfg, &s1, &theta_xi, &drift, forcing) {
        Ok(v) => v,
        Err(detail) => return Err(budget(&report, "temperature_to_xi", detail)),
    };
    report.delta_xi = Some(d2);
    let s2 = steer2.state.clone();
    report.stages.push(targets.row(
        "temperature_to_xi",
        s1.t,
        &s2,
        d2,
        (steer2.theta_error, cfg.kappa()),
        clock,
    ));

    // Stage 3: free run of length γ.
    let clock = Instant::now();
    let mut vcfg = cfg.solver.clone();
    vcfg.time_step = TimeStep::Fixed(gamma / cfg.vorticity.steps as f64);
    let s3 = free_run(&vcfg, &s2, s2.t + gamma, forcing)?;
    let e3 = (&s3.w - w_target).sobolev_norm(1);
    report.stages.push(targets.row(
        "free_vorticity",
        s2.t,
        &s3,
        gamma,
        (e3, cfg.eps / 2.0),
        clock,
    ));
    if e3 >= cfg.eps / 2.0 {
        return Err(budget(
            &report,
            "free_vorticity",
            format!("‖w − w_T‖₁ = {e3:.3e} after the free run"),
        ));
    }

    // Stage 4: temperature correction.
    let clock = Instant::now();
    let (steer4, d4) = match steer_within(cfg, &s3, theta_target, &drift, forcing) {
        Ok(v) => v,
        Err(detail) => return Err(budget(&report, "temperature_to_target", detail)),
    };
    report.delta_target = Some(d4);
    let s4 = steer4.state.clone();
    report.stages.push(targets.row(
        "temperature_to_target",
        s3.t,
        &s4,
        d4,
        (steer4.theta_error, cfg.kappa()),
        clock,
    ));
    if s4.t > cfg.horizon {
        return Err(budget(
            &report,
            "temperature_to_target",
            format!("stages end at {:.6} beyond the horizon {}", s4.t, cfg.horizon),
        ));
    }

    // Trailing free run over [T₄, T].
    let clock = Instant::now();
    let s5 = free_run(&cfg.solver, &s4, cfg.horizon, forcing)?;
    let drift_norm = (&s5.w - &s4.w).sobolev_norm(1)
        + (&s5.theta - &s4.theta).sobolev_norm(2)
        + (s5.mean_coeff - s4.mean_coeff).abs();
    report.trailing_drift = drift_norm;
    report.stages.push(targets.row(
        "trailing",
        s4.t,
        &s5,
        0.0,
        (drift_norm, cfg.eps / 3.0),
        clock,
    ));
    report.final_w_error = (&s5.w - w_target).sobolev_norm(1);
    report.final_theta_error = (&s5.theta - theta_target).sobolev_norm(2);
    report.final_mean_coeff = s5.mean_coeff;
    report.total_error =
        report.final_w_error + report.final_theta_error + report.final_mean_coeff.abs();
    let u = velocity_from_vorticity(&s5.w, s5.mean_coeff)?;
    let ut = velocity_from_vorticity(w_target, 0.0)?;
    report.velocity_error = ((&u.u1 - &ut.u1).sobolev_norm(2).powi(2)
        + (&u.u2 - &ut.u2).sobolev_norm(2).powi(2))
    .sqrt();
    report.final_state = Some(s5);
    if drift_norm > cfg.eps / 3.0 {
        return Err(budget(
            &report,
            "trailing",
            format!("drift {drift_norm:.3e} over [T4, T] exceeds eps/3"),
        ));
    }
    Ok(report)
}

const STAGE_HEADER: &str =
    "stage,t_start,t_end,delta,stage_error,stage_budget,w_error,theta_error,mean_coeff";

/// One CSV row per stage. Wall-clock times are left out so reruns are
/// byte-identical; see [`stage_timings`].
pub fn stage_report(report: &PipelineReport) -> String {
    let mut out = String::from(STAGE_HEADER);
    out.push('\n');
    for r in &report.stages {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.stage,
            r.t_start,
            r.t_end,
            r.delta,
            r.stage_error,
            r.stage_budget,
            r.w_error,
            r.theta_error,
            r.mean_coeff
        );
    }
    out
}

pub fn stage_timings(report: &PipelineReport) -> String {
    let mut out = String::from("stage,wall_seconds\n");
    for r in &report.stages {
        let _ = writeln!(out, "{},{:.6}", r.stage, r.wall_seconds);
    }
    out
}
