//! Return-method ingredients on the reference interval [0, 1]: the equidistant
//! partition, the cutoff χ with its vertical partition of unity, the
//! space-constant drift `ȳ = (0, ȳ₂(t))` whose flow is a vertical translation,
//! and the explicit inviscid reference trajectory driven by that drift.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smooth::{step_integral, step_with_derivatives};
use crate::spectral::{Axis, Grid, Parity, ScalarField, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("the number of windows K must be at least 1")]
    ZeroWindows,
    #[error("control region needs 0 <= a < b < 2π, got a = {a}, b = {b}")]
    Region { a: f64, b: f64 },
    #[error("cutoff band needs 0 < H1 < H2 < 2π, got H1 = {h1}, H2 = {h2}")]
    Band { h1: f64, h2: f64 },
    #[error("cutoff band [{h1}, {h2}] is not inside the control region [{a}, {b}]")]
    BandOutsideRegion { h1: f64, h2: f64, a: f64, b: f64 },
    #[error(
        "window width l_K = 8π/(3K) = {l} must satisfy l_K < (H2 − H1)/3 = {limit} \
         (the constraint is read with H2 − H1 grouped; increase K to at least {k_min})"
    )]
    WindowTooWide { l: f64, limit: f64, k_min: usize },
}

/// Equidistant nodes `t⁰_c < t¹_a < t¹_b < t¹_c < … < t^K_c < 1` with spacing
/// `t̄ = 1/(3K+2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionTimes {
    k: usize,
    tbar: f64,
}

impl PartitionTimes {
    pub fn new(k: usize) -> Result<Self, GeometryError> {
        if k == 0 {
            return Err(GeometryError::ZeroWindows);
        }
        Ok(Self {
            k,
            tbar: 1.0 / (3 * k + 2) as f64,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tbar(&self) -> f64 {
        self.tbar
    }

    fn node(&self, j: usize) -> f64 {
        j as f64 / (3 * self.k + 2) as f64
    }

    pub fn t_c0(&self) -> f64 {
        self.node(1)
    }

    pub fn t_a(&self, i: usize) -> f64 {
        self.node(3 * i - 1)
    }

    pub fn t_b(&self, i: usize) -> f64 {
        self.node(3 * i)
    }

    pub fn t_c(&self, i: usize) -> f64 {
        self.node(3 * i + 1)
    }

    /// All named nodes in increasing order (3K + 1 of them).
    pub fn nodes(&self) -> Vec<f64> {
        (1..=3 * self.k + 1).map(|j| self.node(j)).collect()
    }

    /// Every multiple of t̄ in [0, 1], including both ends.
    pub fn grid_points(&self) -> Vec<f64> {
        (0..=3 * self.k + 2).map(|j| self.node(j)).collect()
    }

    /// Window i with t ∈ (t^{i−1}_c, t^i_c], and the offset t − t^{i−1}_c.
    pub fn drift_window(&self, t: f64) -> Option<(usize, f64)> {
        let start = self.t_c0();
        if t <= start || t > self.t_c(self.k) {
            return None;
        }
        let i = (((t - start) / (3.0 * self.tbar)).ceil() as usize).clamp(1, self.k);
        Some((i, t - self.t_c(i - 1)))
    }

    /// Transport window i with t ∈ [t^i_a, t^i_b], and the rescaled time
    /// r = (t − t^i_a)/(t^i_b − t^i_a).
    pub fn transport_window(&self, t: f64) -> Option<(usize, f64)> {
        for i in 1..=self.k {
            let (a, b) = (self.t_a(i), self.t_b(i));
            if t >= a && t <= b {
                return Some((i, ((t - a) / (b - a)).clamp(0.0, 1.0)));
            }
        }
        None
    }
}

/// Smooth cutoff in x₂ whose translates by multiples of 3l_K/4 sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    k: usize,
    h1: f64,
    h2: f64,
    l: f64,
}

impl CutoffChi {
    pub fn window_width(k: usize) -> f64 {
        8.0 * PI / (3 * k) as f64
    }

    /// Smallest K with l_K < (H2 − H1)/3.
    pub fn min_windows(h1: f64, h2: f64) -> usize {
        let limit = (h2 - h1) / 3.0;
        if limit <= 0.0 {
            return usize::MAX;
        }
        let mut k = ((8.0 * PI / (3.0 * limit)).floor() as usize).max(1);
        while Self::window_width(k) >= limit {
            k += 1;
        }
        k
    }

    /// Cutoff for K windows on the band [H1, H2] inside the region [a, b].
    pub fn new(k: usize, h1: f64, h2: f64, region: (f64, f64)) -> Result<Self, GeometryError> {
        let (a, b) = region;
        if k == 0 {
            return Err(GeometryError::ZeroWindows);
        }
        if !(a >= 0.0 && a < b && b < TAU) {
            return Err(GeometryError::Region { a, b });
        }
        if !(h1 > 0.0 && h1 < h2 && h2 < TAU) {
            return Err(GeometryError::Band { h1, h2 });
        }
        if h1 < a || h2 > b {
            return Err(GeometryError::BandOutsideRegion { h1, h2, a, b });
        }
        let l = Self::window_width(k);
        let limit = (h2 - h1) / 3.0;
        if l >= limit {
            return Err(GeometryError::WindowTooWide {
                l,
                limit,
                k_min: Self::min_windows(h1, h2),
            });
        }
        Ok(Self { k, h1, h2, l })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// l_K = 8π/(3K).
    pub fn l(&self) -> f64 {
        self.l
    }

    /// (χ̃, χ̃', χ̃'') at s, taken modulo 2π.
    pub fn profile_with_derivatives(&self, s: f64) -> (f64, f64, f64) {
        let s = s.rem_euclid(TAU);
        let l = self.l;
        let q = l / 4.0;
        if s >= l {
            (0.0, 0.0, 0.0)
        } else if s <= q {
            let (v, d1, d2) = step_with_derivatives(s / q);
            (v, d1 / q, d2 / (q * q))
        } else if s < 3.0 * q {
            (1.0, 0.0, 0.0)
        } else {
            let (v, d1, d2) = step_with_derivatives((s - 3.0 * q) / q);
            (1.0 - v, -d1 / q, -d2 / (q * q))
        }
    }

    /// χ̃(s).
    pub fn profile(&self, s: f64) -> f64 {
        self.profile_with_derivatives(s).0
    }

    fn offset(&self) -> f64 {
        self.h1 + self.l
    }

    /// (χ, χ', χ'') at x₂, with χ(x₂) = χ̃(x₂ − H1 − l_K).
    pub fn eval_with_derivatives(&self, x2: f64) -> (f64, f64, f64) {
        self.profile_with_derivatives(x2 - self.offset())
    }

    pub fn eval(&self, x2: f64) -> f64 {
        self.eval_with_derivatives(x2).0
    }

    /// ∫_𝒞 χ under the normalized measure, exactly 1/K.
    pub fn integral(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// Primitive of χ̃ on [0, 2π).
    fn profile_primitive(&self, s: f64) -> f64 {
        let l = self.l;
        let q = l / 4.0;
        if s <= 0.0 {
            0.0
        } else if s <= q {
            q * step_integral(s / q)
        } else if s <= 3.0 * q {
            0.5 * q + (s - q)
        } else if s <= l {
            let y = (s - 3.0 * q) / q;
            0.5 * q + 2.0 * q + q * (y - step_integral(y))
        } else {
            3.0 * q
        }
    }

    /// `∫₀^{x₂} χ(s) ds` for x₂ ∈ [0, 2π].
    pub fn primitive(&self, x2: f64) -> f64 {
        let s0 = (-self.offset()).rem_euclid(TAU);
        let s1 = s0 + x2;
        if s1 < TAU {
            self.profile_primitive(s1) - self.profile_primitive(s0)
        } else {
            3.0 * self.l / 4.0 - self.profile_primitive(s0) + self.profile_primitive(s1 - TAU)
        }
    }

    /// Vertical offset 3(i−1)l_K/4 of the rectangle 𝒪_i.
    pub fn rect_offset(&self, i: usize) -> f64 {
        3.0 * (i - 1) as f64 * self.l / 4.0
    }

    /// x₂-extent (H1 + l_K, H1 + 2l_K) of the reference rectangle 𝒪.
    pub fn reference_rect(&self) -> (f64, f64) {
        (self.h1 + self.l, self.h1 + 2.0 * self.l)
    }

    /// Minimal vertical translation (in (−π, π]) carrying 𝒪_i onto 𝒪.
    pub fn displacement(&self, i: usize) -> f64 {
        minimal_rep(self.reference_rect().0 - self.rect_offset(i))
    }

    /// `Σ_i χ(x₂ + 3(i−1)l_K/4)`.
    pub fn partition_sum(&self, x2: f64) -> f64 {
        (1..=self.k).map(|i| self.eval(x2 + self.rect_offset(i))).sum()
    }

    /// Samples of χ on the grid, as an even field.
    pub fn field(&self, grid: &Grid) -> ScalarField {
        ScalarField::from_fn(grid, Parity::Even, |_, x2| self.eval(x2))
    }
}

/// Representative of x modulo 2π in (−π, π].
pub fn minimal_rep(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BumpShape {
    /// `30 u²(1−u)²` on u ∈ [0,1]; its primitive is the quintic smoothstep.
    #[default]
    Polynomial,
    /// Derivative of the exp(−1/y) step: C∞ with compact support.
    Mollified,
}

impl BumpShape {
    /// (primitive, value, first, second derivative) of the unit-mass bump on [0,1].
    fn eval(self, u: f64) -> (f64, f64, f64, f64) {
        if u <= 0.0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        if u >= 1.0 {
            return (1.0, 0.0, 0.0, 0.0);
        }
        match self {
            BumpShape::Polynomial => {
                let u2 = u * u;
                let prim = u2 * u * (10.0 - 15.0 * u + 6.0 * u2);
                let val = 30.0 * u2 * (1.0 - u) * (1.0 - u);
                let d1 = 30.0 * (2.0 * u - 6.0 * u2 + 4.0 * u2 * u);
                let d2 = 30.0 * (2.0 - 12.0 * u + 12.0 * u2);
                (prim, val, d1, d2)
            }
            BumpShape::Mollified => {
                let (s, s1, s2) = step_with_derivatives(u);
                let h = 1e-3;
                let f = |x: f64| step_with_derivatives(x).2;
                let s3 = (f(u - 2.0 * h) - 8.0 * f(u - h) + 8.0 * f(u + h) - f(u + 2.0 * h))
                    / (12.0 * h);
                (s, s1, s2, s3)
            }
        }
    }
}

/// Drift `ȳ₂(t)` on [0,1]: in window i a bump of mass A_i on its first
/// t̄-interval, zero on the second, and the reversed bump on the third.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftProfile {
    partition: PartitionTimes,
    shape: BumpShape,
    amplitudes: Vec<f64>,
}

impl DriftProfile {
    /// Drift carrying each 𝒪_i onto 𝒪 during its transport window.
    pub fn new(partition: PartitionTimes, cutoff: &CutoffChi, shape: BumpShape) -> Self {
        let amplitudes = (1..=partition.k()).map(|i| cutoff.displacement(i)).collect();
        Self {
            partition,
            shape,
            amplitudes,
        }
    }

    pub fn with_amplitudes(partition: PartitionTimes, shape: BumpShape, amplitudes: Vec<f64>) -> Self {
        assert_eq!(amplitudes.len(), partition.k(), "one amplitude per window");
        Self {
            partition,
            shape,
            amplitudes,
        }
    }

    /// The identically zero drift.
    pub fn zero(partition: PartitionTimes) -> Self {
        Self::with_amplitudes(partition, BumpShape::Polynomial, vec![0.0; partition.k()])
    }

    pub fn partition(&self) -> &PartitionTimes {
        &self.partition
    }

    pub fn shape(&self) -> BumpShape {
        self.shape
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// (B(0,t), ȳ₂, ȳ₂', ȳ₂'') at t.
    pub fn eval_all(&self, t: f64) -> (f64, f64, f64, f64) {
        let Some((i, off)) = self.partition.drift_window(t) else {
            return (0.0, 0.0, 0.0, 0.0);
        };
        let tb = self.partition.tbar();
        let a = self.amplitudes[i - 1];
        if off <= tb {
            let (p, v, d1, d2) = self.shape.eval(off / tb);
            (a * p, a * v / tb, a * d1 / (tb * tb), a * d2 / (tb * tb * tb))
        } else if off < 2.0 * tb {
            (a, 0.0, 0.0, 0.0)
        } else {
            let (p, v, d1, d2) = self.shape.eval((off - 2.0 * tb) / tb);
            (a * (1.0 - p), -a * v / tb, -a * d1 / (tb * tb), -a * d2 / (tb * tb * tb))
        }
    }

    pub fn y(&self, t: f64) -> f64 {
        self.eval_all(t).1
    }

    pub fn dy(&self, t: f64) -> f64 {
        self.eval_all(t).2
    }

    pub fn ddy(&self, t: f64) -> f64 {
        self.eval_all(t).3
    }

    /// B(0, t) = ∫₀ᵗ ȳ₂.
    pub fn primitive(&self, t: f64) -> f64 {
        self.eval_all(t).0
    }

    /// B(s, t) = ∫ₛᵗ ȳ₂.
    pub fn displacement(&self, s: f64, t: f64) -> f64 {
        self.primitive(t) - self.primitive(s)
    }

    /// 𝒴(x, s, t) = x + B(s,t) e₂, with x₂ reduced modulo 2π.
    pub fn flow_map(&self, x: (f64, f64), s: f64, t: f64) -> (f64, f64) {
        (x.0, (x.1 + self.displacement(s, t)).rem_euclid(TAU))
    }

    /// Times where ȳ₂ is not smooth (multiples of t̄).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.partition.grid_points()
    }
}

/// The inviscid reference trajectory (ū, θ̄, p̄, η̄) generated by the drift.
#[derive(Clone, Debug)]
pub struct ReferenceTrajectory {
    pub drift: DriftProfile,
    pub cutoff: CutoffChi,
}

impl ReferenceTrajectory {
    pub fn new(drift: DriftProfile, cutoff: CutoffChi) -> Self {
        Self { drift, cutoff }
    }

    /// ū₂(t) = ȳ₂(t); ū₁ = 0.
    pub fn velocity(&self, t: f64) -> f64 {
        self.drift.y(t)
    }

    /// θ̄ = ȳ₂'χ/∫χ.
    pub fn temperature(&self, x2: f64, t: f64) -> f64 {
        self.drift.dy(t) * self.cutoff.eval(x2) / self.cutoff.integral()
    }

    /// p̄ = ∫₀^{x₂} (ȳ₂'χ/∫χ − ȳ₂').
    pub fn pressure(&self, x2: f64, t: f64) -> f64 {
        let x2 = x2.rem_euclid(TAU);
        self.drift.dy(t) * (self.cutoff.primitive(x2) / self.cutoff.integral() - x2)
    }

    /// η̄ = (ȳ₂''χ + ȳ₂'ȳ₂χ')/∫χ.
    pub fn control(&self, x2: f64, t: f64) -> f64 {
        let (_, y, dy, ddy) = self.drift.eval_all(t);
        let (c, c1, _) = self.cutoff.eval_with_derivatives(x2);
        (ddy * c + dy * y * c1) / self.cutoff.integral()
    }

    fn sampled(&self, grid: &Grid, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_fn(grid, Parity::Even, |_, x2| f(x2))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InviscidResidual {
    /// max over times of ‖∂ₜū + ∇p̄ − θ̄e₂‖₂ (central differences in t).
    pub momentum: f64,
    /// max over times of ‖∂ₜθ̄ + (ū·∇)θ̄ − η̄‖₂.
    pub temperature: f64,
    /// Momentum residual over max_t ‖∂ₜū‖₂.
    pub momentum_relative: f64,
    /// Temperature residual over max_t ‖η̄‖₂.
    pub temperature_relative: f64,
}

impl InviscidResidual {
    pub fn max_relative(&self) -> f64 {
        self.momentum_relative.max(self.temperature_relative)
    }
}

/// Discrete residual of the inviscid controlled system along the reference
/// trajectory, with spectral derivatives in x₂ and central differences of
/// step `h` in time. The fields do not depend on x₁.
pub fn residual_inviscid(
    traj: &ReferenceTrajectory,
    times: &[f64],
    h: f64,
    grid: &Grid,
) -> Result<InviscidResidual, SpectralError> {
    let mut mom: f64 = 0.0;
    let mut temp: f64 = 0.0;
    let mut mom_scale: f64 = 0.0;
    let mut temp_scale: f64 = 0.0;
    for &t in times {
        let du = (traj.velocity(t + h) - traj.velocity(t - h)) / (2.0 * h);
        let p = traj.sampled(grid, |x2| traj.pressure(x2, t));
        let th = traj.sampled(grid, |x2| traj.temperature(x2, t));
        let dp = p.differentiate(Axis::X2, 1)?;
        let r_mom = ScalarField::from_values(grid, Parity::Even, dp.values() + du - th.values())?;
        mom = mom.max(r_mom.l2_norm());
        mom_scale = mom_scale.max(du.abs());

        let th_p = traj.sampled(grid, |x2| traj.temperature(x2, t + h));
        let th_m = traj.sampled(grid, |x2| traj.temperature(x2, t - h));
        let dth = th.differentiate(Axis::X2, 1)?;
        let eta = traj.sampled(grid, |x2| traj.control(x2, t));
        let vals = (th_p.values() - th_m.values()) / (2.0 * h) + dth.values() * traj.velocity(t)
            - eta.values();
        let r_temp = ScalarField::from_values(grid, Parity::Even, vals)?;
        temp = temp.max(r_temp.l2_norm());
        temp_scale = temp_scale.max(eta.l2_norm());
    }
    let rel = |r: f64, s: f64| if s > 0.0 { r / s } else { r };
    Ok(InviscidResidual {
        momentum: mom,
        temperature: temp,
        momentum_relative: rel(mom, mom_scale),
        temperature_relative: rel(temp, temp_scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cutoff() -> CutoffChi {
        let k = CutoffChi::min_windows(0.5, 2.5);
        CutoffChi::new(k, 0.5, 2.5, (0.0, PI)).unwrap()
    }

    #[test]
    fn partition_nodes() {
        let p = PartitionTimes::new(1).unwrap();
        let n = p.nodes();
        assert_eq!(n.len(), 4);
        assert!((p.tbar() - 0.2).abs() < 1e-15);
        let p4 = PartitionTimes::new(4).unwrap();
        let n4 = p4.nodes();
        assert_eq!(n4.len(), 13);
        for w in n4.windows(2) {
            assert!((w[1] - w[0] - p4.tbar()).abs() < 1e-15);
        }
        assert!(p4.t_c(4) < 1.0);
        assert!(PartitionTimes::new(0).is_err());
    }

    #[test]
    fn cutoff_geometry_errors() {
        assert!(matches!(
            CutoffChi::new(2, 0.5, 2.5, (0.0, PI)),
            Err(GeometryError::WindowTooWide { .. })
        ));
        assert!(matches!(
            CutoffChi::new(20, 0.5, 2.5, (1.0, PI)),
            Err(GeometryError::BandOutsideRegion { .. })
        ));
        assert!(matches!(
            CutoffChi::new(20, 0.5, 2.5, (2.0, 1.0)),
            Err(GeometryError::Region { .. })
        ));
    }

    #[test]
    fn min_windows_for_example_band() {
        // (H2 − H1)/3 = 2/3 needs 8π/(3K) < 2/3, i.e. K > 4π.
        assert_eq!(CutoffChi::min_windows(0.5, 2.5), 13);
    }

    #[test]
    fn profile_plateau_and_support() {
        let c = cutoff();
        let l = c.l();
        for i in 0..=100 {
            let s = l / 4.0 + (l / 2.0) * i as f64 / 100.0;
            assert_eq!(c.profile(s), 1.0);
        }
        for i in 0..100 {
            let s = l + (TAU - l) * i as f64 / 100.0;
            assert_eq!(c.profile(s), 0.0);
        }
        for i in 1..100 {
            let x = (l / 4.0) * i as f64 / 100.0;
            assert!((c.profile(x) + c.profile(x + 0.75 * l) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn primitive_matches_quadrature() {
        let c = cutoff();
        let n = 400_000;
        let h = TAU / n as f64;
        let mut acc = 0.0;
        let mut checks = 0;
        for j in 0..n {
            acc += c.eval((j as f64 + 0.5) * h) * h;
            if (j + 1) % 40_000 == 0 {
                let x = (j + 1) as f64 * h;
                assert!((c.primitive(x) - acc).abs() < 1e-9, "{x}");
                checks += 1;
            }
        }
        assert_eq!(checks, 10);
        assert!((acc / TAU - c.integral()).abs() < 1e-10);
    }

    #[test]
    fn drift_properties() {
        let c = cutoff();
        let p = PartitionTimes::new(c.k()).unwrap();
        let d = DriftProfile::new(p, &c, BumpShape::Polynomial);
        assert!(d.primitive(1.0).abs() < 1e-12);
        for i in 1..=p.k() {
            let target = c.displacement(i);
            for j in 0..=10 {
                let t = p.t_a(i) + (p.t_b(i) - p.t_a(i)) * j as f64 / 10.0;
                assert!((d.primitive(t) - target).abs() < 1e-12);
            }
        }
        assert_eq!(d.y(0.5 * p.t_c0()), 0.0);
        assert_eq!(d.y(0.5 * (p.t_c(p.k()) + 1.0)), 0.0);
    }

    #[test]
    fn flow_map_group_property() {
        let c = cutoff();
        let p = PartitionTimes::new(c.k()).unwrap();
        let d = DriftProfile::new(p, &c, BumpShape::Mollified);
        let x = (0.3, 5.0);
        assert_eq!(d.flow_map(x, 0.4, 0.4), x);
        let y = d.flow_map(x, 0.0, 1.0);
        assert!((y.1 - x.1).abs() < 1e-12);
        let a = d.flow_map(d.flow_map(x, 0.1, 0.55), 0.55, 0.8);
        let b = d.flow_map(x, 0.1, 0.8);
        assert!(minimal_rep(a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_has_zero_residual() {
        let c = cutoff();
        let p = PartitionTimes::new(c.k()).unwrap();
        let traj = ReferenceTrajectory::new(DriftProfile::zero(p), c);
        let g = Grid::new(8, 64).unwrap();
        let r = residual_inviscid(&traj, &[0.2, 0.5], 1e-3, &g).unwrap();
        assert_eq!(r.momentum, 0.0);
        assert_eq!(r.temperature, 0.0);
    }
}
