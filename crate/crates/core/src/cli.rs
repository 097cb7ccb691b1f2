//! The `bqch` command line: experiment drivers that write CSV diagnostics and
//! snapshots to the configured output directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{
    build_xi, smooth_target, solve_transport, steer_temperature, steer_vorticity,
    verify_equal_integrals, TransportControl, TransportSource,
};
use crate::elliptic::divcurl_residual;
use crate::io::{
    load_config, parse_config, snapshot_from_bytes, snapshot_to_bytes, write_csv,
    write_snapshot, ExperimentConfig,
};
use crate::pipeline::{run_pipeline, stage_report, stage_timings, PipelineError};
use crate::return_method::{residual_inviscid, ReferenceTrajectory};
use crate::solver::{diagnostics, NoControl, NoForcing, Solver, State};
use crate::spectral::{Grid, Parity, ScalarField};

#[derive(Parser)]
#[command(
    name = "bqch",
    version,
    about = "Boussinesq channel simulation and temperature-only control synthesis",
    arg_required_else_help = true
)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured output directory.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and run quick property checks on its grid.
    Validate,
    /// Uncontrolled run from the initial state to time.t_end.
    Simulate,
    /// Build the localized transport control for the smoothed temperature
    /// target and check that the characteristic solution reaches it.
    TransportControl,
    /// Large-temperature vorticity steering over the δ schedule.
    SteerVorticity,
    /// Small-time temperature steering over the δ schedule.
    SteerTemperature,
    /// Four-stage steering from the initial state to the target state.
    Pipeline,
    /// Discrete residual of the reference trajectory under time refinement.
    ReferenceResidual,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    Failed,
}

/// Parse `args` (program name first), run the command and return the exit code:
/// 0 on success, 1 when a check, budget or solve fails, 2 on usage or
/// configuration errors.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let out = cli.output.clone().unwrap_or_else(|| cfg.output_path());
    match run(&cli.command, &cfg, &out) {
        Ok(Outcome::Ok) => 0,
        Ok(Outcome::Failed) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    match &cli.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(parse_config("")?),
    }
}

fn run(cmd: &Command, cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cmd {
        Command::Validate => validate(cfg, out),
        Command::Simulate => simulate(cfg, out),
        Command::TransportControl => transport(cfg, out),
        Command::SteerVorticity => vorticity_sweep(cfg, out),
        Command::SteerTemperature => temperature_sweep(cfg, out),
        Command::Pipeline => pipeline(cfg, out),
        Command::ReferenceResidual => reference(cfg, out),
    }
}

fn initial_state(cfg: &ExperimentConfig) -> Result<State> {
    let w = cfg.field(&cfg.fields.w0, Parity::Odd, 0)?;
    let theta = cfg.field(&cfg.fields.theta0, Parity::Even, 1)?;
    Ok(State::new(w, theta, 0.0, 0.0)?)
}

fn targets(cfg: &ExperimentConfig) -> Result<(ScalarField, ScalarField)> {
    let w = cfg.field(&cfg.fields.w_target, Parity::Odd, 2)?;
    let theta = cfg.field(&cfg.fields.theta_target, Parity::Even, 3)?;
    Ok((w, theta))
}

struct Check {
    name: String,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
        }
    }

    fn passed(&self) -> bool {
        self.value < self.tolerance
    }
}

/// Print one PASS/FAIL line per check and write them as CSV.
fn report_checks(path: &Path, checks: &[Check]) -> Result<Outcome> {
    let mut ok = true;
    for c in checks {
        let tag = if c.passed() { "PASS" } else { "FAIL" };
        println!("{tag} {}: {:.3e} (tolerance {:.1e})", c.name, c.value, c.tolerance);
        ok &= c.passed();
    }
    let labels: Vec<String> = checks.iter().map(|c| c.name.clone()).collect();
    let rows: Vec<Vec<f64>> = checks
        .iter()
        .map(|c| vec![c.value, c.tolerance, if c.passed() { 1.0 } else { 0.0 }])
        .collect();
    write_csv(path, &["check", "value", "tolerance", "pass"], Some(&labels), &rows)?;
    Ok(if ok { Outcome::Ok } else { Outcome::Failed })
}

fn random_odd(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let g = cfg.grid();
    let mut c = ScalarField::zeros(&g, Parity::Odd).forward();
    let (m1, m2) = (g.cutoff_k1().min(12), g.cutoff_k2().min(12));
    for k1 in 1..=m1 {
        for k2 in 0..=m2 {
            let re = rng.random_range(-1.0..1.0);
            let im = if k2 == 0 { 0.0 } else { rng.random_range(-1.0..1.0) };
            let row = c.row_of(k1).expect("retained mode");
            c.data_mut()[[row, k2]] = num_complex::Complex64::new(re, im);
        }
    }
    Ok(c.inverse())
}

fn validate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let mut divcurl: f64 = 0.0;
    for _ in 0..10 {
        let w = random_odd(cfg, &mut rng)?;
        let c = rng.random_range(-1.0..1.0);
        let s = State::new(w.clone(), ScalarField::zeros(w.grid(), Parity::Even), c, 0.0)?;
        divcurl = divcurl.max(divcurl_residual(&s.velocity()?, &w)?.max());
    }
    checks.push(Check::new("div_curl_residual", divcurl, 1e-10));

    let cutoff = cfg.cutoff()?;
    let drift = cfg.drift()?;
    let p = *drift.partition();
    let mut visits: f64 = drift.primitive(1.0).abs();
    for i in 1..=p.k() {
        for j in 0..=10 {
            let t = p.t_a(i) + (p.t_b(i) - p.t_a(i)) * j as f64 / 10.0;
            visits = visits.max((drift.primitive(t) - cutoff.displacement(i)).abs());
        }
    }
    checks.push(Check::new("closed_curves_and_visits", visits, 1e-12));
    let mut pou: f64 = 0.0;
    for i in 0..10_000 {
        let x2 = std::f64::consts::TAU * i as f64 / 10_000.0;
        pou = pou.max((cutoff.partition_sum(x2) - 1.0).abs());
    }
    checks.push(Check::new("partition_of_unity", pou, 1e-10));

    let (_, theta_t) = targets(cfg)?;
    let theta1 = smooth_target(&theta_t, cfg.steering.eps_target, 3)?;
    let ctrl = TransportControl::new(&theta1, &drift, &cutoff)?;
    let pts: Vec<(f64, f64)> = (0..16)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    checks.push(Check::new(
        "equal_integrals",
        verify_equal_integrals(&ctrl, &pts, 16),
        1e-8,
    ));
    let mut mean_free: f64 = 0.0;
    for i in 0..64 {
        let t = (i as f64 + 0.5) / 64.0;
        if let Some(c) = ctrl.mean_free_projected(t) {
            mean_free = mean_free.max(c.integrate().abs());
        }
    }
    checks.push(Check::new("control_mean_free", mean_free, 1e-12));

    let s0 = initial_state(cfg)?;
    let bytes = snapshot_to_bytes(&s0);
    let again = snapshot_to_bytes(&snapshot_from_bytes(&bytes)?);
    checks.push(Check::new(
        "snapshot_round_trip",
        if again == bytes { 0.0 } else { 1.0 },
        0.5,
    ));
    report_checks(&out.join("validate.csv"), &checks)
}

fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let s0 = initial_state(cfg)?;
    let mut solver = Solver::new(cfg.solver_config())?;
    let diag_row = |s: &State| {
        let d = diagnostics(s);
        vec![d.t, d.w_l2, d.w_h1, d.theta_l2, d.theta_h2, d.mean_coeff]
    };
    let mut rows = vec![diag_row(&s0)];
    let mut step = 0usize;
    let every = cfg.time.output_every;
    let end = solver.run_observed(&s0, cfg.time.t_end, &NoForcing, &NoControl, |v| {
        step += 1;
        if step.is_multiple_of(every) {
            rows.push(diag_row(&v.state()));
        }
    })?;
    if !step.is_multiple_of(every) {
        rows.push(diag_row(&end));
    }
    write_csv(
        &out.join("simulate.csv"),
        &["t", "w_l2", "w_h1", "theta_l2", "theta_h2", "mean_coeff"],
        None,
        &rows,
    )?;
    write_snapshot(&out.join("final.bqch"), &end)?;
    println!("simulated to t = {} in {step} steps", end.t);
    Ok(Outcome::Ok)
}

fn transport(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (_, theta_t) = targets(cfg)?;
    let eps = cfg.steering.eps_target;
    let theta1 = smooth_target(&theta_t, eps, 3)?;
    let drift = cfg.drift()?;
    let ctrl = TransportControl::new(&theta1, &drift, &cfg.cutoff()?)?;

    let samples = 200;
    let rows: Vec<Vec<f64>> = (0..=samples)
        .map(|i| {
            let t = i as f64 / samples as f64;
            let norm = ctrl.sample(t, 0.0).map_or(0.0, |f| f.l2_norm());
            vec![t, drift.y(t), ctrl.mean(t), norm]
        })
        .collect();
    write_csv(
        &out.join("transport_control.csv"),
        &["t", "drift", "control_mean", "control_l2"],
        None,
        &rows,
    )?;

    let zero = ScalarField::zeros(theta1.grid(), Parity::Even);
    let reached = solve_transport(&drift, &ctrl, &zero, 1.0, 24);
    let identity = (&reached - &theta1).forward().sobolev_norm(0);
    let bound = (&reached - &theta_t).forward().sobolev_norm(2);
    let scale = theta_t.forward().sobolev_norm(3);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts: Vec<(f64, f64)> = (0..16)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect();
    let checks = [
        Check::new("characteristic_solution_reaches_target", identity, 1e-6),
        Check::new(
            "target_bound_relative",
            if scale > 0.0 { bound / scale } else { bound },
            eps,
        ),
        Check::new("equal_integrals", verify_equal_integrals(&ctrl, &pts, 16), 1e-8),
    ];
    report_checks(&out.join("transport_identity.csv"), &checks)
}

fn vorticity_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let s0 = initial_state(cfg)?;
    let (w_t, _) = targets(cfg)?;
    let xi = build_xi(&s0.w, &w_t, f64::INFINITY, cfg.xi_options())?;
    let solver = cfg.solver_config();
    let mut rows = Vec::new();
    for &delta in &cfg.steering.delta_schedule {
        let r = steer_vorticity(&solver, &s0, &xi, delta, &NoForcing, cfg.vorticity_options())?;
        println!("delta {delta}: error {:.6e}", r.error);
        rows.push(vec![delta, r.error, r.shifted_theta_max, r.q_norm, r.r_norm]);
    }
    write_csv(
        &out.join("steer_vorticity.csv"),
        &["delta", "error", "shifted_theta_max", "q_norm", "r_norm"],
        None,
        &rows,
    )?;
    let mut sorted: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let decreasing = sorted.windows(2).all(|p| p[1].1 < p[0].1);
    Ok(if decreasing || xi.xi.max_abs() == 0.0 {
        Outcome::Ok
    } else {
        println!("error is not strictly decreasing in delta");
        Outcome::Failed
    })
}

fn temperature_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let s0 = initial_state(cfg)?;
    let (_, theta1) = targets(cfg)?;
    let drift = cfg.drift()?;
    let cutoff = cfg.cutoff()?;
    let solver = cfg.solver_config();
    let mut rows = Vec::new();
    for &delta in &cfg.steering.delta_schedule {
        let r = steer_temperature(
            &solver,
            &s0,
            &theta1,
            &drift,
            &cutoff,
            delta,
            &NoForcing,
            cfg.temperature_options(),
        )?;
        println!(
            "delta {delta}: w error {:.6e}, theta error {:.6e}",
            r.w_error, r.theta_error
        );
        rows.push(vec![
            delta,
            r.w_error,
            r.theta_error,
            r.q_norm,
            r.r_norm,
            r.tracking,
            r.eta_mean_max,
            r.linear_error,
        ]);
    }
    write_csv(
        &out.join("steer_temperature.csv"),
        &[
            "delta",
            "w_error",
            "theta_error",
            "q_norm",
            "r_norm",
            "tracking",
            "eta_mean_max",
            "linear_error",
        ],
        None,
        &rows,
    )?;
    Ok(Outcome::Ok)
}

fn pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let s0 = initial_state(cfg)?;
    let (w_t, theta_t) = targets(cfg)?;
    let pcfg = cfg.pipeline_config()?;
    let (report, outcome) =
        match run_pipeline(&s0.w, &s0.theta, &w_t, &theta_t, &NoForcing, &pcfg) {
            Ok(r) => (r, Outcome::Ok),
            Err(PipelineError::Budget {
                stage,
                detail,
                report,
            }) => {
                eprintln!("stage {stage} exceeded its budget: {detail}");
                (*report, Outcome::Failed)
            }
            Err(e) => bail!(e),
        };
    fs::write(out.join("pipeline_stages.csv"), stage_report(&report))?;
    fs::write(out.join("pipeline_timings.csv"), stage_timings(&report))?;
    if let Some(s) = &report.final_state {
        write_snapshot(&out.join("final.bqch"), s)?;
    }
    let mut outcome = outcome;
    if matches!(outcome, Outcome::Ok) {
        let rows = vec![vec![
            report.total_error,
            cfg.pipeline.eps,
            report.final_w_error,
            report.final_theta_error,
            report.final_mean_coeff,
            report.velocity_error,
            report.trailing_drift,
            report.gamma.unwrap_or(0.0),
            report.delta_xi.unwrap_or(0.0),
            report.delta_target.unwrap_or(0.0),
        ]];
        write_csv(
            &out.join("pipeline_summary.csv"),
            &[
                "total_error",
                "eps",
                "w_error",
                "theta_error",
                "mean_coeff",
                "velocity_error",
                "trailing_drift",
                "gamma",
                "delta_xi",
                "delta_target",
            ],
            None,
            &rows,
        )?;
        println!(
            "total error {:.6e} (eps {}), trailing drift {:.6e}",
            report.total_error, cfg.pipeline.eps, report.trailing_drift
        );
        if !(report.total_error < cfg.pipeline.eps) {
            outcome = Outcome::Failed;
        }
    }
    Ok(outcome)
}

fn reference(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let drift = cfg.drift()?;
    // Interior points of every partition interval, clear of the kinks of ȳ''.
    let nodes = drift.partition().grid_points();
    let times: Vec<f64> = nodes
        .windows(2)
        .flat_map(|w| [0.25, 0.5, 0.75].map(|f| w[0] + f * (w[1] - w[0])))
        .collect();
    let traj = ReferenceTrajectory::new(drift, cfg.cutoff()?);
    // The fields do not depend on x₁, and χ needs a finer x₂ grid than the flow.
    let grid = Grid::new(8, cfg.grid.nx2.max(1024))?;
    let mut rows = Vec::new();
    for h in [2e-4, 1e-4, 5e-5, 2.5e-5] {
        let r = residual_inviscid(&traj, &times, h, &grid)?;
        println!(
            "h {h:.2e}: relative momentum {:.3e}, relative temperature {:.3e}",
            r.momentum_relative, r.temperature_relative
        );
        rows.push(vec![
            h,
            r.momentum,
            r.temperature,
            r.momentum_relative,
            r.temperature_relative,
        ]);
    }
    write_csv(
        &out.join("reference_residual.csv"),
        &[
            "h",
            "momentum",
            "temperature",
            "momentum_relative",
            "temperature_relative",
        ],
        None,
        &rows,
    )?;
    Ok(Outcome::Ok)
}
