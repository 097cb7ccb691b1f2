//! TOML experiment configuration. Unknown keys are rejected and the geometry
//! is validated on load.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::control::{EtaMode, SteerTemperatureOptions, SteerVorticityOptions, XiOptions};
use crate::pipeline::PipelineConfig;
use crate::return_method::{
    BumpShape, CutoffChi, DriftProfile, GeometryError, PartitionTimes,
};
use crate::solver::{SolverConfig, TimeStep};
use crate::spectral::{Grid, Parity, ScalarField, SpectralError};

use super::snapshot::{read_snapshot, SnapshotError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("grid: {0}")]
    Grid(#[from] SpectralError),
    #[error("snapshot: {0}")]
    Snapshot(#[from] SnapshotError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx1: usize,
    pub nx2: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nx1: 64, nx2: 64 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub nu: f64,
    pub tau: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            nu: 0.05,
            tau: 0.05,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    /// Fixed step, or the maximal step when `cfl` is set.
    pub dt: f64,
    pub cfl: Option<f64>,
    /// End time of `simulate`.
    pub t_end: f64,
    /// Write a diagnostics row every this many steps.
    pub output_every: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            cfl: None,
            t_end: 1.0,
            output_every: 10,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    /// Control region ω = (a, b) in x₂.
    pub region: [f64; 2],
    /// Band (H₁, H₂) inside the region.
    pub band: [f64; 2],
    /// Number of windows K; the smallest admissible value when omitted.
    pub windows: Option<usize>,
    pub bump: BumpShape,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            region: [0.2, 6.0],
            band: [0.3, 5.9],
            windows: None,
            bump: BumpShape::Polynomial,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteeringSection {
    pub delta_schedule: Vec<f64>,
    pub vorticity_steps: usize,
    pub temperature_steps: usize,
    pub source_nodes: usize,
    pub quadrature_nodes: usize,
    /// Target accuracy of the linear transport problem.
    pub eps_target: f64,
    pub direct_eta: bool,
    /// x₁ plateau of the optional ξ taper.
    pub xi_taper: Option<f64>,
}

impl Default for SteeringSection {
    fn default() -> Self {
        let t = SteerTemperatureOptions::default();
        Self {
            delta_schedule: vec![0.2, 0.1, 0.05, 0.025],
            vorticity_steps: SteerVorticityOptions::default().steps,
            temperature_steps: 2000,
            source_nodes: t.source_nodes,
            quadrature_nodes: t.nodes,
            eps_target: t.eps,
            direct_eta: false,
            xi_taper: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub horizon: f64,
    pub eps: f64,
    pub t1_fraction: f64,
    pub gamma_schedule: Vec<f64>,
    pub delta_min: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            horizon: 0.6,
            eps: 0.1,
            t1_fraction: 0.2,
            gamma_schedule: vec![0.2, 0.1, 0.05, 0.025],
            delta_min: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Cos,
    Sin,
}

/// One term `amp · b_{k₁}(x₁) · cos/sin(k₂x₂)`, with b the sine basis for
/// vorticities and the cosine basis for temperatures.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k1: usize,
    pub k2: usize,
    pub amp: f64,
    #[serde(default)]
    pub phase: Phase,
}

#[derive(Clone, Debug, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "kind")]
pub enum FieldSpec {
    #[default]
    Zero,
    Modes {
        modes: Vec<ModeSpec>,
    },
    Snapshot {
        path: PathBuf,
    },
    /// Random modes with k₁, k₂ ≤ max_mode and amplitudes decaying like
    /// (1 + k₁² + k₂²)⁻¹, drawn from the configured seed.
    Random {
        amplitude: f64,
        max_mode: usize,
    },
}

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FieldsSection {
    pub w0: FieldSpec,
    pub theta0: FieldSpec,
    pub w_target: FieldSpec,
    pub theta_target: FieldSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub time: TimeSection,
    pub geometry: GeometrySection,
    pub steering: SteeringSection,
    pub pipeline: PipelineSection,
    pub fields: FieldsSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            grid: GridSection::default(),
            physics: PhysicsSection::default(),
            time: TimeSection::default(),
            geometry: GeometrySection::default(),
            steering: SteeringSection::default(),
            pipeline: PipelineSection::default(),
            fields: FieldsSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read and validate a configuration; relative snapshot paths resolve against
/// the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(cfg)
}

fn check_schedule(name: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() || v.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(ConfigError::Invalid(format!(
            "{name} must be non-empty with entries in (0, 1)"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        Grid::new(self.grid.nx1, self.grid.nx2)?;
        self.solver_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.time.t_end >= 0.0) {
            return bad("time.t_end must be non-negative");
        }
        if self.time.output_every == 0 {
            return bad("time.output_every must be positive");
        }
        self.cutoff()?;
        check_schedule("steering.delta_schedule", &self.steering.delta_schedule)?;
        check_schedule("pipeline.gamma_schedule", &self.pipeline.gamma_schedule)?;
        if self.steering.vorticity_steps == 0
            || self.steering.temperature_steps == 0
            || self.steering.source_nodes == 0
            || self.steering.quadrature_nodes == 0
        {
            return bad("steering step and node counts must be positive");
        }
        if !(self.steering.eps_target > 0.0) {
            return bad("steering.eps_target must be positive");
        }
        if let Some(a) = self.steering.xi_taper {
            if !(0.0..1.0).contains(&a) {
                return bad("steering.xi_taper must lie in [0, 1)");
            }
        }
        let p = &self.pipeline;
        if !(p.horizon > 0.0 && p.eps > 0.0 && p.delta_min > 0.0) {
            return bad("pipeline.horizon, eps and delta_min must be positive");
        }
        if !(p.t1_fraction > 0.0 && p.t1_fraction < 1.0) {
            return bad("pipeline.t1_fraction must lie in (0, 1)");
        }
        for (name, f) in [
            ("w0", &self.fields.w0),
            ("theta0", &self.fields.theta0),
            ("w_target", &self.fields.w_target),
            ("theta_target", &self.fields.theta_target),
        ] {
            match f {
                FieldSpec::Modes { modes } => {
                    for m in modes {
                        let odd = name.starts_with('w');
                        if (odd && m.k1 == 0) || m.k1 >= self.grid.nx1 || 2 * m.k2 >= self.grid.nx2 {
                            return Err(ConfigError::Invalid(format!(
                                "fields.{name}: mode ({}, {}) is not representable",
                                m.k1, m.k2
                            )));
                        }
                    }
                }
                FieldSpec::Random { max_mode, .. } if 2 * max_mode >= self.grid.nx2 => {
                    return Err(ConfigError::Invalid(format!(
                        "fields.{name}: max_mode too large for the grid"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.nx1, self.grid.nx2).expect("validated grid")
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            nu: self.physics.nu,
            tau: self.physics.tau,
            buoyancy: true,
            time_step: match self.time.cfl {
                Some(cfl) => TimeStep::Cfl {
                    cfl,
                    dt_max: self.time.dt,
                },
                None => TimeStep::Fixed(self.time.dt),
            },
            source_nodes: self.steering.source_nodes,
        }
    }

    pub fn cutoff(&self) -> Result<CutoffChi, GeometryError> {
        let g = &self.geometry;
        let (h1, h2) = (g.band[0], g.band[1]);
        let k = g.windows.unwrap_or_else(|| CutoffChi::min_windows(h1, h2));
        CutoffChi::new(k, h1, h2, (g.region[0], g.region[1]))
    }

    pub fn drift(&self) -> Result<DriftProfile, GeometryError> {
        let c = self.cutoff()?;
        Ok(DriftProfile::new(
            PartitionTimes::new(c.k())?,
            &c,
            self.geometry.bump,
        ))
    }

    pub fn vorticity_options(&self) -> SteerVorticityOptions {
        SteerVorticityOptions {
            steps: self.steering.vorticity_steps,
        }
    }

    pub fn temperature_options(&self) -> SteerTemperatureOptions {
        SteerTemperatureOptions {
            eps: self.steering.eps_target,
            steps: self.steering.temperature_steps,
            nodes: self.steering.quadrature_nodes,
            source_nodes: self.steering.source_nodes,
            mode: if self.steering.direct_eta {
                EtaMode::Direct
            } else {
                EtaMode::Lifted
            },
        }
    }

    pub fn xi_options(&self) -> XiOptions {
        XiOptions {
            taper: self.steering.xi_taper,
        }
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, ConfigError> {
        let mut p = PipelineConfig::new(
            self.pipeline.horizon,
            self.pipeline.eps,
            self.solver_config(),
            self.cutoff()?,
        );
        p.t1_fraction = self.pipeline.t1_fraction;
        p.gamma_schedule = self.pipeline.gamma_schedule.clone();
        p.delta_schedule = self.steering.delta_schedule.clone();
        p.delta_min = self.pipeline.delta_min;
        p.bump = self.geometry.bump;
        p.vorticity = self.vorticity_options();
        p.temperature = self.temperature_options();
        p.xi = self.xi_options();
        Ok(p)
    }

    /// Output directory, resolved against the configuration file's directory.
    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    /// Build a field; `salt` separates the random streams of different fields.
    pub fn field(&self, spec: &FieldSpec, parity: Parity, salt: u64) -> Result<ScalarField, ConfigError> {
        let grid = self.grid();
        match spec {
            FieldSpec::Zero => Ok(ScalarField::zeros(&grid, parity)),
            FieldSpec::Modes { modes } => Ok(mode_field(&grid, parity, modes)),
            FieldSpec::Random {
                amplitude,
                max_mode,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(salt));
                let mut modes = Vec::new();
                let k1_start = if parity == Parity::Odd { 1 } else { 0 };
                for k1 in k1_start..=*max_mode {
                    for k2 in 0..=*max_mode {
                        if parity == Parity::Even && k1 == 0 && k2 == 0 {
                            continue;
                        }
                        let decay = 1.0 / (1.0 + (k1 * k1 + k2 * k2) as f64);
                        for phase in [Phase::Cos, Phase::Sin] {
                            if k2 == 0 && phase == Phase::Sin {
                                continue;
                            }
                            let amp = amplitude * decay * rng.random_range(-1.0..1.0);
                            modes.push(ModeSpec { k1, k2, amp, phase });
                        }
                    }
                }
                Ok(mode_field(&grid, parity, &modes))
            }
            FieldSpec::Snapshot { path } => {
                let s = read_snapshot(&self.base_dir.join(path))?;
                let f = if parity == Parity::Odd { s.w } else { s.theta };
                if f.grid().nx1() != grid.nx1() || f.grid().nx2() != grid.nx2() {
                    return Err(ConfigError::Invalid(format!(
                        "snapshot {} has a {}×{} grid",
                        path.display(),
                        f.grid().nx1(),
                        f.grid().nx2()
                    )));
                }
                Ok(ScalarField::from_values(&grid, parity, f.into_values())?)
            }
        }
    }
}

fn mode_field(grid: &Grid, parity: Parity, modes: &[ModeSpec]) -> ScalarField {
    ScalarField::from_fn(grid, parity, |x1, x2| {
        modes
            .iter()
            .map(|m| {
                let a = m.k1 as f64 * PI * (x1 + 1.0) / 2.0;
                let b1 = match parity {
                    Parity::Odd => a.sin(),
                    Parity::Even => a.cos(),
                };
                let b2 = match m.phase {
                    Phase::Cos => (m.k2 as f64 * x2).cos(),
                    Phase::Sin => (m.k2 as f64 * x2).sin(),
                };
                m.amp * b1 * b2
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.grid.nx1, 64);
        assert_eq!(c.cutoff().unwrap().k(), 5);
        assert_eq!(c.physics.nu, 0.05);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config("[grid]\nnx1 = 32\nnx3 = 4\n").unwrap_err();
        assert!(e.to_string().contains("nx3"), "{e}");
    }

    #[test]
    fn geometry_rules_are_named() {
        let e = parse_config("[geometry]\nregion = [3.0, 1.0]\n").unwrap_err();
        assert!(matches!(e, ConfigError::Geometry(GeometryError::Region { .. })), "{e}");
        let e = parse_config("[geometry]\nwindows = 2\n").unwrap_err();
        assert!(
            matches!(e, ConfigError::Geometry(GeometryError::WindowTooWide { .. })),
            "{e}"
        );
    }

    #[test]
    fn parse_errors_report_lines() {
        let e = parse_config("seed = 1\n[grid]\nnx1 = \"x\"\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn mode_presets_and_random_fields() {
        let c = parse_config(
            "seed = 3\n[grid]\nnx1 = 16\nnx2 = 16\n\
             [fields.w0]\nkind = \"modes\"\nmodes = [{ k1 = 1, k2 = 1, amp = 0.5, phase = \"sin\" }]\n\
             [fields.theta0]\nkind = \"random\"\namplitude = 1.0\nmax_mode = 3\n",
        )
        .unwrap();
        let w = c.field(&c.fields.w0, Parity::Odd, 0).unwrap();
        let expect = 0.5 * (PI * (c.grid().x1(3) + 1.0) / 2.0).sin() * c.grid().x2(5).sin();
        assert!((w.values()[[3, 5]] - expect).abs() < 1e-15);
        let a = c.field(&c.fields.theta0, Parity::Even, 1).unwrap();
        let b = c.field(&c.fields.theta0, Parity::Even, 1).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(a.integrate().abs() < 1e-14);
    }
}
