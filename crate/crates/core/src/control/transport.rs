//! Localized control for the transport equation `∂ₜθ + ȳ₂ ∂₂θ = g` on [0, 1].
//!
//! The global source `g̃ = ∂ₜθ̃ + ȳ₂∂₂θ̃` with `θ̃(·,t) = κ(t)θ̃₁` would steer zero
//! data to θ̃₁. The localized control replays g̃ in compressed time inside each
//! transport window `[t^k_a, t^k_b]`, multiplied by χ; while the drift parks
//! 𝒪_k on 𝒪, the translates of χ sum to one along every characteristic, so
//! both sources produce the same state at t = 1.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::quadrature::{composite_nodes, UnitRule};
use crate::return_method::{CutoffChi, DriftProfile};
use crate::spectral::{Axis, Grid, Parity, ScalarField, SpectralCoeffs};

use super::target::{ramp_kappa, ramp_kappa_d1};
use super::ControlError;

/// A source that can be sampled along vertically translated grids.
pub trait TransportSource: Sync {
    /// Samples of `x ↦ source(x + shift·e₂, t)` on the grid; `None` where the
    /// source vanishes identically.
    fn sample(&self, t: f64, shift: f64) -> Option<ScalarField>;

    /// Times where the source is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Source given by a closure `(t, shift) → samples`.
pub struct FnSource<F> {
    f: F,
    breaks: Vec<f64>,
}

impl<F> FnSource<F>
where
    F: Fn(f64, f64) -> Option<ScalarField> + Sync,
{
    pub fn new(f: F, breaks: Vec<f64>) -> Self {
        Self { f, breaks }
    }
}

impl<F> TransportSource for FnSource<F>
where
    F: Fn(f64, f64) -> Option<ScalarField> + Sync,
{
    fn sample(&self, t: f64, shift: f64) -> Option<ScalarField> {
        (self.f)(t, shift)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

fn merged_breaks(drift: &DriftProfile, source: &dyn TransportSource) -> Vec<f64> {
    let mut b = drift.breakpoints();
    b.extend(source.breakpoints());
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Weighted characteristic integral `∫₀ᵗ w(s) source(x + B(t,s)e₂, s) ds`.
pub(crate) fn characteristic_integral(
    drift: &DriftProfile,
    source: &dyn TransportSource,
    grid: &Grid,
    parity: Parity,
    t_end: f64,
    nodes_per_segment: usize,
    weight: impl Fn(f64) -> f64 + Sync,
) -> ScalarField {
    let rule = UnitRule::new(nodes_per_segment);
    let nodes = composite_nodes(&rule, 0.0, t_end, &merged_breaks(drift, source));
    let pieces: Vec<Option<ScalarField>> = nodes
        .par_iter()
        .map(|&(s, w)| {
            source
                .sample(s, drift.displacement(t_end, s))
                .map(|f| f.scaled(w * weight(s)))
        })
        .collect();
    let mut acc = ScalarField::zeros(grid, parity);
    for f in pieces.into_iter().flatten() {
        *acc.values_mut() += f.values();
    }
    acc
}

/// Characteristic solution
/// `θ(x,t) = init(x + B(t,0)e₂) + ∫₀ᵗ source(x + B(t,s)e₂, s) ds`,
/// with composite Gauss quadrature split at every breakpoint of the drift and
/// the source.
pub fn solve_transport(
    drift: &DriftProfile,
    source: &dyn TransportSource,
    init: &ScalarField,
    t_end: f64,
    nodes_per_segment: usize,
) -> ScalarField {
    let free = init.shifted_x2(drift.displacement(t_end, 0.0));
    let forced = characteristic_integral(
        drift,
        source,
        init.grid(),
        init.parity(),
        t_end,
        nodes_per_segment,
        |_| 1.0,
    );
    &free + &forced
}

/// χ on an oversampled x₂ grid, used to form exact-to-roundoff projections of
/// products χ·F onto the retained Fourier band.
struct FineCutoff {
    n: usize,
    chi: Vec<f64>,
    /// Normalized half spectrum of χ on the fine grid.
    hat: Vec<Complex64>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

impl FineCutoff {
    fn new(cutoff: &CutoffChi, nx2: usize) -> Self {
        let n = (16 * nx2).max(1024);
        let mut planner = RealFftPlanner::<f64>::new();
        let r2c = planner.plan_fft_forward(n);
        let c2r = planner.plan_fft_inverse(n);
        let chi: Vec<f64> = (0..n)
            .map(|j| cutoff.eval(std::f64::consts::TAU * j as f64 / n as f64))
            .collect();
        let mut input = chi.clone();
        let mut hat = r2c.make_output_vec();
        r2c.process(&mut input, &mut hat).expect("fft length");
        hat.iter_mut().for_each(|z| *z /= n as f64);
        Self {
            n,
            chi,
            hat,
            r2c,
            c2r,
        }
    }

    /// Project χ(x₂)·F(x₂) onto Fourier modes 0..nh−1 (coarse Nyquist dropped).
    fn project_row(&self, row: &[Complex64]) -> Vec<Complex64> {
        let nh = row.len();
        let mut spec = self.c2r.make_input_vec();
        spec[..nh - 1].copy_from_slice(&row[..nh - 1]);
        spec[0].im = 0.0;
        let mut vals = self.c2r.make_output_vec();
        self.c2r.process(&mut spec, &mut vals).expect("fft length");
        for (v, c) in vals.iter_mut().zip(&self.chi) {
            *v *= c;
        }
        let mut out = self.r2c.make_output_vec();
        self.r2c.process(&mut vals, &mut out).expect("fft length");
        let inv = 1.0 / self.n as f64;
        let mut res: Vec<Complex64> = out[..nh].iter().map(|z| z * inv).collect();
        res[nh - 1] = Complex64::new(0.0, 0.0);
        res
    }

    /// Domain mean of χ·F for a row-0 (x₁-constant) Fourier row F.
    fn mean_of_product(&self, row: &[Complex64]) -> f64 {
        let nh = row.len();
        let mut m = row[0].re * self.hat[0].re;
        for (r, h) in row[1..nh - 1].iter().zip(&self.hat[1..]) {
            m += 2.0 * (r * h.conj()).re;
        }
        m
    }

    fn mean(&self) -> f64 {
        self.hat[0].re
    }
}

/// The localized transport control g built from a smoothed target θ̃₁.
pub struct TransportControl {
    grid: Grid,
    target: SpectralCoeffs,
    target_d2: SpectralCoeffs,
    drift: DriftProfile,
    cutoff: CutoffChi,
    fine: FineCutoff,
    rule: UnitRule,
    window_mass: Vec<f64>,
}

impl std::fmt::Debug for TransportControl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransportControl")
            .field("grid", &self.grid)
            .field("drift", &self.drift)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

/// Build the localized control g for the smoothed target θ̃₁ (even, band-limited).
pub fn transport_control_g(
    theta_tilde1: &ScalarField,
    drift: &DriftProfile,
    cutoff: &CutoffChi,
) -> Result<TransportControl, ControlError> {
    TransportControl::new(theta_tilde1, drift, cutoff)
}

impl TransportControl {
    pub fn new(
        theta_tilde1: &ScalarField,
        drift: &DriftProfile,
        cutoff: &CutoffChi,
    ) -> Result<Self, ControlError> {
        if theta_tilde1.parity() != Parity::Even {
            return Err(ControlError::InvalidArgument(
                "transport targets must be even in x1".into(),
            ));
        }
        if drift.partition().k() != cutoff.k() {
            return Err(ControlError::InvalidArgument(format!(
                "drift has {} windows but the cutoff has {}",
                drift.partition().k(),
                cutoff.k()
            )));
        }
        let grid = theta_tilde1.grid().clone();
        let mut target = theta_tilde1.forward();
        target.data_mut()[[0, 0]] = Complex64::new(target.data()[[0, 0]].re, 0.0);
        let nyq = grid.nh() - 1;
        for r in 0..grid.nx1() {
            target.data_mut()[[r, nyq]] = Complex64::new(0.0, 0.0);
        }
        let target_d2 = target.differentiate(Axis::X2, 1)?;
        let mut ctrl = Self {
            fine: FineCutoff::new(cutoff, grid.nx2()),
            grid,
            target,
            target_d2,
            drift: drift.clone(),
            cutoff: cutoff.clone(),
            rule: UnitRule::new(8),
            window_mass: Vec::new(),
        };
        ctrl.window_mass = (1..=cutoff.k()).map(|k| ctrl.partial_mass(k, 1.0)).collect();
        Ok(ctrl)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn drift(&self) -> &DriftProfile {
        &self.drift
    }

    pub fn cutoff(&self) -> &CutoffChi {
        &self.cutoff
    }

    pub fn target(&self) -> ScalarField {
        self.target.inverse()
    }

    /// Window length t^k_b − t^k_a.
    pub fn window_length(&self) -> f64 {
        self.drift.partition().tbar()
    }

    /// Coefficients of g̃(·, r) = κ'(r)θ̃₁ + κ(r)ȳ₂(r)∂₂θ̃₁.
    pub fn g_tilde_coeffs(&self, r: f64) -> SpectralCoeffs {
        let mut c = self.target.clone();
        c.scale(ramp_kappa_d1(r));
        c.add_scaled(ramp_kappa(r) * self.drift.y(r), &self.target_d2);
        c
    }

    /// g̃ at a point.
    pub fn g_tilde_at(&self, x1: f64, x2: f64, r: f64) -> f64 {
        self.g_tilde_coeffs(r).evaluate(x1, x2)
    }

    /// (window, r, B(t, r)) when t lies in a transport window.
    fn locate(&self, t: f64) -> Option<(usize, f64, f64)> {
        let (k, r) = self.drift.partition().transport_window(t)?;
        Some((k, r, self.drift.displacement(t, r)))
    }

    /// g̃(· + b e₂, r) as coefficients.
    fn shifted_g_tilde(&self, r: f64, b: f64) -> SpectralCoeffs {
        let mut c = self.g_tilde_coeffs(r);
        c.shift_x2(b);
        c
    }

    fn times_chi(&self, mut f: ScalarField, shift: f64, scale: f64) -> ScalarField {
        let g = self.grid.clone();
        for j in 0..g.nx2() {
            let c = self.cutoff.eval(g.x2(j) + shift) * scale;
            f.values_mut().column_mut(j).mapv_inplace(|v| v * c);
        }
        f
    }

    /// g at a point.
    pub fn eval_point(&self, x1: f64, x2: f64, t: f64) -> f64 {
        match self.locate(t) {
            Some((_, r, b)) => {
                let chi = self.cutoff.eval(x2);
                if chi == 0.0 {
                    0.0
                } else {
                    chi / self.window_length() * self.g_tilde_coeffs(r).evaluate(x1, x2 + b)
                }
            }
            None => 0.0,
        }
    }

    /// Samples of ∂₁g(x + shift e₂, t).
    pub fn sample_d1(&self, t: f64, shift: f64) -> Option<ScalarField> {
        let (_, r, b) = self.locate(t)?;
        let c = self
            .shifted_g_tilde(r, b + shift)
            .differentiate(Axis::X1, 1)
            .expect("order 1");
        Some(self.times_chi(c.inverse(), shift, 1.0 / self.window_length()))
    }

    /// Galerkin projection of g(·, t) onto the grid's Fourier band.
    pub fn projected(&self, t: f64) -> Option<SpectralCoeffs> {
        let (_, r, b) = self.locate(t)?;
        let f = self.shifted_g_tilde(r, b);
        Some(self.project_times_chi(&f, 1.0 / self.window_length()))
    }

    fn project_times_chi(&self, f: &SpectralCoeffs, scale: f64) -> SpectralCoeffs {
        let mut out = SpectralCoeffs::zeros(&self.grid, f.parity());
        for (i, row) in f.data().outer_iter().enumerate() {
            if row.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            let p = self.fine.project_row(row.as_slice().expect("contiguous row"));
            for (k, z) in p.into_iter().enumerate() {
                out.data_mut()[[i, k]] = z * scale;
            }
        }
        out
    }

    /// Coefficients of χ projected onto the grid band (x₁-constant, even).
    pub fn chi_coeffs(&self) -> SpectralCoeffs {
        let mut c = SpectralCoeffs::zeros(&self.grid, Parity::Even);
        let nh = self.grid.nh();
        for k in 0..nh - 1 {
            c.data_mut()[[0, k]] = self.fine.hat[k];
        }
        c.data_mut()[[0, 0]].im = 0.0;
        c
    }

    /// ∫_𝒞 χ as seen by the projected controls (the fine-grid mean).
    pub fn chi_integral(&self) -> f64 {
        self.fine.mean()
    }

    /// Mass of window k up to rescaled time r: ∫ over [t^k_a, t^k_a + rΔ] of ∫_𝒞 g.
    fn partial_mass(&self, k: usize, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let p = self.drift.partition();
        let t_a = p.t_a(k);
        let dt = self.window_length();
        let nodes = composite_nodes(&self.rule, 0.0, r, &p.grid_points());
        nodes
            .iter()
            .map(|&(rho, w)| w * self.window_density(t_a + rho * dt, rho))
            .sum()
    }

    /// Δ·m(t) for t = t_a + rΔ inside a window.
    fn window_density(&self, t: f64, r: f64) -> f64 {
        let b = self.drift.displacement(t, r);
        let (a, c) = (ramp_kappa_d1(r), ramp_kappa(r) * self.drift.y(r));
        let nyq = self.grid.nh() - 1;
        let row: Vec<Complex64> = self
            .target
            .data()
            .row(0)
            .iter()
            .zip(self.target_d2.data().row(0))
            .enumerate()
            .map(|(k, (z, d))| {
                if k == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    (z * a + d * c) * Complex64::from_polar(1.0, k as f64 * b)
                }
            })
            .collect();
        self.fine.mean_of_product(&row)
    }

    /// m(t) = ∫_𝒞 g(·, t), consistent with [`TransportControl::projected`].
    pub fn mean(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some((_, r, _)) => self.window_density(t, r) / self.window_length(),
            None => 0.0,
        }
    }

    /// G(t) = ∫₀ᵗ m.
    pub fn mean_primitive(&self, t: f64) -> f64 {
        let p = self.drift.partition();
        let mut acc = 0.0;
        for k in 1..=p.k() {
            if t >= p.t_b(k) {
                acc += self.window_mass[k - 1];
            } else if t > p.t_a(k) {
                acc += self.partial_mass(k, (t - p.t_a(k)) / self.window_length());
            }
        }
        acc
    }

    /// Breakpoints of g in time: partition nodes and, inside each window, the
    /// images of the partition nodes under the window's time compression.
    pub fn time_breakpoints(&self) -> Vec<f64> {
        let p = self.drift.partition();
        let mut b = p.grid_points();
        for k in 1..=p.k() {
            for r in p.grid_points() {
                b.push(p.t_a(k) + r * self.window_length());
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// Samples of `x ↦ η̃(x + shift e₂, t)` with
    /// `η̃ = g − (ȳ₂ G χ' + m χ)/∫χ`, which has zero mean.
    pub fn mean_free_sample(&self, t: f64, shift: f64) -> Option<ScalarField> {
        let g = self.sample(t, shift);
        let (y, gp, m) = (self.drift.y(t), self.mean_primitive(t), self.mean(t));
        if g.is_none() && y * gp == 0.0 && m == 0.0 {
            return None;
        }
        let ic = self.chi_integral();
        let grid = self.grid.clone();
        let mut out = g.unwrap_or_else(|| ScalarField::zeros(&grid, Parity::Even));
        for j in 0..grid.nx2() {
            let (c, c1, _) = self.cutoff.eval_with_derivatives(grid.x2(j) + shift);
            let corr = (y * gp * c1 + m * c) / ic;
            out.values_mut().column_mut(j).mapv_inplace(|v| v - corr);
        }
        Some(out)
    }

    /// Galerkin projection of η̃(·, t); its (0,0) coefficient vanishes.
    pub fn mean_free_projected(&self, t: f64) -> Option<SpectralCoeffs> {
        let y = self.drift.y(t);
        let gp = self.mean_primitive(t);
        let m = self.mean(t);
        let base = self.projected(t);
        if base.is_none() && y * gp == 0.0 && m == 0.0 {
            return None;
        }
        let mut out = base.unwrap_or_else(|| SpectralCoeffs::zeros(&self.grid, Parity::Even));
        let chi = self.chi_coeffs();
        let dchi = chi.differentiate(Axis::X2, 1).expect("order 1");
        let ic = self.chi_integral();
        out.add_scaled(-y * gp / ic, &dchi);
        out.add_scaled(-m / ic, &chi);
        Some(out)
    }
}

impl TransportSource for TransportControl {
    fn sample(&self, t: f64, shift: f64) -> Option<ScalarField> {
        let (_, r, b) = self.locate(t)?;
        let f = self.shifted_g_tilde(r, b + shift).inverse();
        Some(self.times_chi(f, shift, 1.0 / self.window_length()))
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.time_breakpoints()
    }
}

/// g convolved in time with a compactly supported C∞ mollifier.
pub struct MollifiedControl<'a> {
    base: &'a TransportControl,
    width: f64,
    rule: UnitRule,
    norm: f64,
}

impl<'a> MollifiedControl<'a> {
    /// Mollifier supported on [−width/2, width/2].
    pub fn new(base: &'a TransportControl, width: f64) -> Self {
        let rule = UnitRule::new(12);
        let mut s = Self {
            base,
            width,
            rule,
            norm: 1.0,
        };
        let half = 0.5 * width;
        let raw: f64 = composite_nodes(&s.rule, -half, half, &[0.0])
            .iter()
            .map(|&(x, w)| w * s.kernel(x))
            .sum();
        s.norm = raw;
        s
    }

    fn kernel(&self, tau: f64) -> f64 {
        let z = 2.0 * tau / self.width;
        if z.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - z * z)).exp()
        }
    }
}

impl TransportSource for MollifiedControl<'_> {
    fn sample(&self, t: f64, shift: f64) -> Option<ScalarField> {
        let half = 0.5 * self.width;
        let breaks: Vec<f64> = self
            .base
            .time_breakpoints()
            .into_iter()
            .map(|b| t - b)
            .collect();
        let mut acc: Option<ScalarField> = None;
        for (tau, w) in composite_nodes(&self.rule, -half, half, &breaks) {
            if let Some(f) = self.base.sample(t - tau, shift) {
                let f = f.scaled(w * self.kernel(tau) / self.norm);
                acc = Some(match acc {
                    Some(a) => &a + &f,
                    None => f,
                });
            }
        }
        acc
    }

    fn breakpoints(&self) -> Vec<f64> {
        let half = 0.5 * self.width;
        self.base
            .time_breakpoints()
            .into_iter()
            .flat_map(|b| [b - half, b, b + half])
            .collect()
    }
}

/// max over points x of |∫₀¹ g(𝒴(x,0,s), s) ds − ∫₀¹ g̃(𝒴(x,0,r), r) dr|.
pub fn verify_equal_integrals(
    control: &TransportControl,
    points: &[(f64, f64)],
    nodes_per_segment: usize,
) -> f64 {
    let rule = UnitRule::new(nodes_per_segment);
    let drift = control.drift();
    let g_nodes = composite_nodes(&rule, 0.0, 1.0, &control.time_breakpoints());
    let gt_nodes = composite_nodes(&rule, 0.0, 1.0, &drift.breakpoints());
    let gt: Vec<(f64, SpectralCoeffs)> = gt_nodes
        .iter()
        .map(|&(r, w)| (w, control.g_tilde_coeffs(r)))
        .collect();
    points
        .par_iter()
        .map(|&(x1, x2)| {
            let lhs: f64 = g_nodes
                .iter()
                .map(|&(s, w)| w * control.eval_point(x1, x2 + drift.primitive(s), s))
                .sum();
            let rhs: f64 = gt
                .iter()
                .zip(&gt_nodes)
                .map(|((w, c), &(r, _))| w * c.evaluate(x1, x2 + drift.primitive(r)))
                .sum();
            (lhs - rhs).abs()
        })
        .reduce(|| 0.0, f64::max)
}
