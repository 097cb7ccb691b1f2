//! Mixed sine/cosine × Fourier spectral machinery on the channel (−1,1)×𝕋.
//!
//! Fields are sampled on a uniform midpoint grid in x₁ (no points on the walls)
//! and a uniform periodic grid in x₂. In x₁ an odd field is a sine series
//! `sin(k π (x₁+1)/2)`, k = 1..=nx1, and an even field a cosine series
//! `cos(k π (x₁+1)/2)`, k = 0..nx1. Both are diagonalised by DST-II/DCT-II on the
//! same grid, so products of odd and even fields can be formed pointwise.
//!
//! Integrals use the normalized measure: `∫ 1 = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid {nx1}x{nx2}: need nx1 >= 8, nx2 >= 8 and nx2 even")]
    InvalidGrid { nx1: usize, nx2: usize },
    #[error("grid mismatch: {0}x{1} vs {2}x{3}")]
    GridMismatch(usize, usize, usize, usize),
    #[error("array of shape {got:?} does not fit a {nx1}x{nx2} grid")]
    ShapeMismatch { got: Vec<usize>, nx1: usize, nx2: usize },
    #[error("parity mismatch: expected {expected}, found {found}")]
    ParityMismatch { expected: Parity, found: Parity },
    #[error("derivative order must be at least 1")]
    InvalidOrder,
}

/// Parity of a field in x₁ about the channel walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Sine series; vanishes at x₁ = ±1 (Dirichlet).
    Odd,
    /// Cosine series; ∂₁ vanishes at x₁ = ±1 (Neumann).
    Even,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }

    /// x₁ wavenumber stored at row `i` of a coefficient array.
    #[inline]
    pub fn k1(self, i: usize) -> usize {
        match self {
            Parity::Odd => i + 1,
            Parity::Even => i,
        }
    }

    /// Basis function in x₁ for wavenumber `k`.
    #[inline]
    pub fn basis(self, k: usize, x1: f64) -> f64 {
        let arg = k as f64 * PI * (x1 + 1.0) / 2.0;
        match self {
            Parity::Odd => arg.sin(),
            Parity::Even => arg.cos(),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Parity::Odd => 1,
            Parity::Even => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Parity::Odd),
            0 => Some(Parity::Even),
            _ => None,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Odd => write!(f, "odd"),
            Parity::Even => write!(f, "even"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

struct Plans {
    x1: Arc<dyn TransformType2And3<f64>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
}

/// Collocation grid with cached transform plans. Cloning is cheap.
#[derive(Clone)]
pub struct Grid {
    nx1: usize,
    nx2: usize,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx1", &self.nx1)
            .field("nx2", &self.nx2)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.nx1 == other.nx1 && self.nx2 == other.nx2
    }
}

impl Grid {
    pub fn new(nx1: usize, nx2: usize) -> Result<Self, SpectralError> {
        if nx1 < 8 || nx2 < 8 || !nx2.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid { nx1, nx2 });
        }
        let mut dct = DctPlanner::new();
        let mut fft = RealFftPlanner::<f64>::new();
        let plans = Plans {
            x1: dct.plan_dct2(nx1),
            r2c: fft.plan_fft_forward(nx2),
            c2r: fft.plan_fft_inverse(nx2),
        };
        Ok(Self {
            nx1,
            nx2,
            plans: Arc::new(plans),
        })
    }

    pub fn nx1(&self) -> usize {
        self.nx1
    }

    pub fn nx2(&self) -> usize {
        self.nx2
    }

    /// Number of stored x₂ wavenumbers (0..=nx2/2).
    pub fn nh(&self) -> usize {
        self.nx2 / 2 + 1
    }

    pub fn x1(&self, i: usize) -> f64 {
        -1.0 + (2 * i + 1) as f64 / self.nx1 as f64
    }

    pub fn x2(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.nx2 as f64
    }

    pub fn h1(&self) -> f64 {
        2.0 / self.nx1 as f64
    }

    pub fn h2(&self) -> f64 {
        2.0 * PI / self.nx2 as f64
    }

    /// Largest x₁ wavenumber kept by the 2/3 rule (k₁ < 2·nx1/3).
    pub fn cutoff_k1(&self) -> usize {
        (2 * self.nx1 - 1) / 3
    }

    /// Largest x₂ wavenumber kept by the 2/3 rule (|k₂| < nx2/3).
    pub fn cutoff_k2(&self) -> usize {
        (self.nx2 - 1) / 3
    }

    /// Weight of one grid point in the normalized midpoint rule. Exact for
    /// even (cosine) fields.
    pub fn quadrature_weight(&self) -> f64 {
        1.0 / (self.nx1 * self.nx2) as f64
    }

    pub fn check_same(&self, other: &Grid) -> Result<(), SpectralError> {
        if self == other {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch(
                self.nx1, self.nx2, other.nx1, other.nx2,
            ))
        }
    }

    /// Real factor for ∂₂ at stored x₂ index `k` (zero at the Nyquist mode).
    #[inline]
    pub(crate) fn d2_factor(&self, k: usize) -> f64 {
        if k == self.nx2 / 2 {
            0.0
        } else {
            k as f64
        }
    }

    /// Eigenvalue of −Δ for stored mode (row, k2).
    #[inline]
    pub fn neg_laplacian(&self, parity: Parity, row: usize, k2: usize) -> f64 {
        let a = parity.k1(row) as f64 * PI / 2.0;
        let b = k2 as f64;
        a * a + b * b
    }

    /// Weight of x₂ index `k` in a Parseval sum over the half spectrum.
    #[inline]
    pub(crate) fn half_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.nx2 / 2 {
            1.0
        } else {
            2.0
        }
    }
}

/// Grid samples of a scalar on the channel, row index = x₁, column = x₂.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
    parity: Parity,
}

impl ScalarField {
    pub fn zeros(grid: &Grid, parity: Parity) -> Self {
        Self {
            grid: grid.clone(),
            values: Array2::zeros((grid.nx1, grid.nx2)),
            parity,
        }
    }

    pub fn from_fn(grid: &Grid, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((grid.nx1, grid.nx2), |(i, j)| f(grid.x1(i), grid.x2(j)));
        Self {
            grid: grid.clone(),
            values,
            parity,
        }
    }

    pub fn from_values(
        grid: &Grid,
        parity: Parity,
        values: Array2<f64>,
    ) -> Result<Self, SpectralError> {
        if values.dim() != (grid.nx1, grid.nx2) {
            return Err(SpectralError::ShapeMismatch {
                got: values.shape().to_vec(),
                nx1: grid.nx1,
                nx2: grid.nx2,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            parity,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn forward(&self) -> SpectralCoeffs {
        transform_forward(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: &self.values * a,
            parity: self.parity,
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Result<Self, SpectralError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        Zip::from(&mut out.values)
            .and(&other.values)
            .for_each(|o, &v| *o += a * v);
        Ok(out)
    }

    /// Pointwise product; the parity of the result follows the parity algebra.
    pub fn product(&self, other: &ScalarField) -> Result<Self, SpectralError> {
        self.grid.check_same(&other.grid)?;
        let parity = if self.parity == other.parity {
            Parity::Even
        } else {
            Parity::Odd
        };
        Ok(Self {
            grid: self.grid.clone(),
            values: &self.values * &other.values,
            parity,
        })
    }

    fn check_compatible(&self, other: &ScalarField) -> Result<(), SpectralError> {
        self.grid.check_same(&other.grid)?;
        if self.parity != other.parity {
            return Err(SpectralError::ParityMismatch {
                expected: self.parity,
                found: other.parity,
            });
        }
        Ok(())
    }

    pub fn differentiate(&self, axis: Axis, order: usize) -> Result<Self, SpectralError> {
        Ok(self.forward().differentiate(axis, order)?.inverse())
    }

    pub fn integrate(&self) -> f64 {
        self.forward().integrate()
    }

    pub fn sobolev_norm(&self, m: usize) -> f64 {
        self.forward().sobolev_norm(m)
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0)
    }

    /// Subtract the domain mean. Only even fields carry constants.
    pub fn project_mean_free(&self) -> Result<Self, SpectralError> {
        let mut c = self.forward();
        c.project_mean_free()?;
        Ok(c.inverse())
    }

    pub fn dealias(&self) -> Self {
        let mut c = self.forward();
        c.dealias();
        c.inverse()
    }

    /// Spectral interpolation at an arbitrary point.
    pub fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        self.forward().evaluate(x1, x2)
    }

    /// Samples of `x ↦ f(x₁, x₂ + shift)` by spectral interpolation.
    pub fn shifted_x2(&self, shift: f64) -> Self {
        let mut c = self.forward();
        c.shift_x2(shift);
        c.inverse()
    }
}

impl std::ops::Add<&ScalarField> for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(1.0, rhs).expect("incompatible fields in addition")
    }
}

impl std::ops::Sub<&ScalarField> for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(-1.0, rhs).expect("incompatible fields in subtraction")
    }
}

/// Coefficients in (x₁ sine/cosine index, x₂ Fourier index 0..=nx2/2).
///
/// With `a[i, k]` the stored value, the field is
/// `Σ_i φ_{k₁(i)}(x₁) Σ_k w_k Re(a[i,k] e^{i k x₂})` where `w_k` is 1 at k = 0 and
/// at the Nyquist index and 2 otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    grid: Grid,
    data: Array2<Complex64>,
    parity: Parity,
}

impl SpectralCoeffs {
    pub fn zeros(grid: &Grid, parity: Parity) -> Self {
        Self {
            grid: grid.clone(),
            data: Array2::zeros((grid.nx1, grid.nh())),
            parity,
        }
    }

    pub fn from_data(
        grid: &Grid,
        parity: Parity,
        data: Array2<Complex64>,
    ) -> Result<Self, SpectralError> {
        if data.dim() != (grid.nx1, grid.nh()) {
            return Err(SpectralError::ShapeMismatch {
                got: data.shape().to_vec(),
                nx1: grid.nx1,
                nx2: grid.nx2,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            data,
            parity,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    /// Row index holding x₁ wavenumber `k1`, if that mode exists for this parity.
    pub fn row_of(&self, k1: usize) -> Option<usize> {
        let row = match self.parity {
            Parity::Odd => k1.checked_sub(1)?,
            Parity::Even => k1,
        };
        (row < self.grid.nx1).then_some(row)
    }

    pub fn get(&self, k1: usize, k2: usize) -> Complex64 {
        match self.row_of(k1) {
            Some(r) if k2 < self.grid.nh() => self.data[[r, k2]],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn inverse(&self) -> ScalarField {
        transform_inverse(self)
    }

    pub fn scale(&mut self, a: f64) {
        self.data.mapv_inplace(|z| z * a);
    }

    pub fn add_scaled(&mut self, a: f64, other: &SpectralCoeffs) {
        assert!(
            self.grid == other.grid && self.parity == other.parity,
            "incompatible coefficient arrays"
        );
        Zip::from(&mut self.data)
            .and(&other.data)
            .for_each(|o, &v| *o += v * a);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn differentiate(&self, axis: Axis, order: usize) -> Result<Self, SpectralError> {
        if order == 0 {
            return Err(SpectralError::InvalidOrder);
        }
        let mut out = self.clone();
        for _ in 0..order {
            out = match axis {
                Axis::X1 => out.d1(),
                Axis::X2 => out.d2(),
            };
        }
        Ok(out)
    }

    fn d1(&self) -> Self {
        let n = self.grid.nx1;
        let nh = self.grid.nh();
        let mut out = Array2::<Complex64>::zeros((n, nh));
        match self.parity {
            // cos k → −(kπ/2) sin k, stored at row k−1.
            Parity::Even => {
                for k in 1..n {
                    let f = -(k as f64) * PI / 2.0;
                    for j in 0..nh {
                        out[[k - 1, j]] = self.data[[k, j]] * f;
                    }
                }
            }
            // sin m → (mπ/2) cos m; cos n is not representable on the grid.
            Parity::Odd => {
                for m in 1..n {
                    let f = m as f64 * PI / 2.0;
                    for j in 0..nh {
                        out[[m, j]] = self.data[[m - 1, j]] * f;
                    }
                }
            }
        }
        Self {
            grid: self.grid.clone(),
            data: out,
            parity: self.parity.flip(),
        }
    }

    fn d2(&self) -> Self {
        let mut out = self.clone();
        for ((_, k), z) in out.data.indexed_iter_mut() {
            *z *= Complex64::new(0.0, self.grid.d2_factor(k));
        }
        out
    }

    /// −Δ applied mode by mode.
    pub fn neg_laplacian(&self) -> Self {
        let mut out = self.clone();
        for ((i, k), z) in out.data.indexed_iter_mut() {
            *z *= self.grid.neg_laplacian(self.parity, i, k);
        }
        out
    }

    /// Zero every mode above the 2/3 cutoff in either direction.
    pub fn dealias(&mut self) {
        let c1 = self.grid.cutoff_k1();
        let c2 = self.grid.cutoff_k2();
        let parity = self.parity;
        for ((i, k), z) in self.data.indexed_iter_mut() {
            if parity.k1(i) > c1 || k > c2 {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Keep modes with k₁ ≤ `max_k1` and k₂ ≤ `max_k2`.
    pub fn truncate(&mut self, max_k1: usize, max_k2: usize) {
        let parity = self.parity;
        for ((i, k), z) in self.data.indexed_iter_mut() {
            if parity.k1(i) > max_k1 || k > max_k2 {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn integrate(&self) -> f64 {
        match self.parity {
            Parity::Even => self.data[[0, 0]].re,
            // ∫₀¹ sin(mπs) ds = 2/(mπ) for odd m, 0 for even m.
            Parity::Odd => (0..self.grid.nx1)
                .filter(|i| (i + 1) % 2 == 1)
                .map(|i| self.data[[i, 0]].re * 2.0 / ((i + 1) as f64 * PI))
                .sum(),
        }
    }

    pub fn project_mean_free(&mut self) -> Result<(), SpectralError> {
        match self.parity {
            Parity::Even => {
                self.data[[0, 0]] = Complex64::new(0.0, 0.0);
                Ok(())
            }
            Parity::Odd => Err(SpectralError::ParityMismatch {
                expected: Parity::Even,
                found: Parity::Odd,
            }),
        }
    }

    /// Squared Sobolev norm `Σ_{|α|≤m} ‖∂^α f‖²` by Parseval.
    pub fn sobolev_norm_sq(&self, m: usize) -> f64 {
        let g = &self.grid;
        let n = g.nx1;
        let mut total = 0.0;
        for ((i, k), z) in self.data.indexed_iter() {
            let amp = z.norm_sqr();
            if amp == 0.0 {
                continue;
            }
            let k1 = self.parity.k1(i);
            let x1_weight = if k1 == 0 { 1.0 } else { 0.5 };
            // x₁ derivatives of the top sine mode leave the representable space.
            let a = if self.parity == Parity::Odd && k1 == n {
                0.0
            } else {
                (k1 as f64 * PI / 2.0).powi(2)
            };
            let b = g.d2_factor(k).powi(2);
            let mut factor = 0.0;
            for p in 0..=m {
                let ap = if p == 0 { 1.0 } else { a.powi(p as i32) };
                for q in 0..=(m - p) {
                    let bq = if q == 0 { 1.0 } else { b.powi(q as i32) };
                    factor += ap * bq;
                }
            }
            total += amp * x1_weight * g.half_weight(k) * factor;
        }
        total
    }

    pub fn sobolev_norm(&self, m: usize) -> f64 {
        self.sobolev_norm_sq(m).sqrt()
    }

    /// Replace f(x₁, x₂) by f(x₁, x₂ + shift).
    pub fn shift_x2(&mut self, shift: f64) {
        if shift == 0.0 {
            return;
        }
        let nyq = self.grid.nx2 / 2;
        for ((_, k), z) in self.data.indexed_iter_mut() {
            if k == nyq {
                *z *= (k as f64 * shift).cos();
            } else {
                *z *= Complex64::from_polar(1.0, k as f64 * shift);
            }
        }
    }

    pub fn evaluate(&self, x1: f64, x2: f64) -> f64 {
        let g = &self.grid;
        let mut sum = 0.0;
        let phases: Vec<Complex64> = (0..g.nh())
            .map(|k| Complex64::from_polar(g.half_weight(k), k as f64 * x2))
            .collect();
        for i in 0..g.nx1 {
            let phi = self.parity.basis(self.parity.k1(i), x1);
            if phi == 0.0 {
                continue;
            }
            let row: f64 = (0..g.nh()).map(|k| (self.data[[i, k]] * phases[k]).re).sum();
            sum += phi * row;
        }
        sum
    }
}

pub fn transform_forward(f: &ScalarField) -> SpectralCoeffs {
    let g = &f.grid;
    let (n1, n2, nh) = (g.nx1, g.nx2, g.nh());
    let plans = &g.plans;
    let mut half = Array2::<Complex64>::zeros((n1, nh));
    let mut row_in = vec![0.0; n2];
    let mut row_out = plans.r2c.make_output_vec();
    let inv_n2 = 1.0 / n2 as f64;
    for i in 0..n1 {
        row_in
            .iter_mut()
            .zip(f.values.row(i).iter())
            .for_each(|(d, s)| *d = *s);
        plans
            .r2c
            .process(&mut row_in, &mut row_out)
            .expect("forward FFT length");
        for k in 0..nh {
            half[[i, k]] = row_out[k] * inv_n2;
        }
    }

    let mut re = vec![0.0; n1];
    let mut im = vec![0.0; n1];
    let inv_n1 = 1.0 / n1 as f64;
    for k in 0..nh {
        for i in 0..n1 {
            re[i] = half[[i, k]].re;
            im[i] = half[[i, k]].im;
        }
        match f.parity {
            Parity::Even => {
                plans.x1.process_dct2(&mut re);
                plans.x1.process_dct2(&mut im);
                for i in 0..n1 {
                    let s = if i == 0 { inv_n1 } else { 2.0 * inv_n1 };
                    half[[i, k]] = Complex64::new(re[i] * s, im[i] * s);
                }
            }
            Parity::Odd => {
                plans.x1.process_dst2(&mut re);
                plans.x1.process_dst2(&mut im);
                for i in 0..n1 {
                    let s = if i == n1 - 1 { inv_n1 } else { 2.0 * inv_n1 };
                    half[[i, k]] = Complex64::new(re[i] * s, im[i] * s);
                }
            }
        }
    }
    SpectralCoeffs {
        grid: g.clone(),
        data: half,
        parity: f.parity,
    }
}

pub fn transform_inverse(c: &SpectralCoeffs) -> ScalarField {
    let g = &c.grid;
    let (n1, n2, nh) = (g.nx1, g.nx2, g.nh());
    let plans = &g.plans;
    let mut half = Array2::<Complex64>::zeros((n1, nh));
    let mut re = vec![0.0; n1];
    let mut im = vec![0.0; n1];
    for k in 0..nh {
        for i in 0..n1 {
            let z = c.data[[i, k]];
            let s = match c.parity {
                Parity::Even if i == 0 => 2.0,
                Parity::Odd if i == n1 - 1 => 2.0,
                _ => 1.0,
            };
            re[i] = z.re * s;
            im[i] = z.im * s;
        }
        match c.parity {
            Parity::Even => {
                plans.x1.process_dct3(&mut re);
                plans.x1.process_dct3(&mut im);
            }
            Parity::Odd => {
                plans.x1.process_dst3(&mut re);
                plans.x1.process_dst3(&mut im);
            }
        }
        for i in 0..n1 {
            half[[i, k]] = Complex64::new(re[i], im[i]);
        }
    }

    let mut values = Array2::<f64>::zeros((n1, n2));
    let mut spec = plans.c2r.make_input_vec();
    let mut out = vec![0.0; n2];
    for i in 0..n1 {
        for k in 0..nh {
            spec[k] = half[[i, k]];
        }
        spec[0].im = 0.0;
        spec[nh - 1].im = 0.0;
        plans
            .c2r
            .process(&mut spec, &mut out)
            .expect("inverse FFT length");
        for j in 0..n2 {
            values[[i, j]] = out[j];
        }
    }
    ScalarField {
        grid: g.clone(),
        values,
        parity: c.parity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16, 16).unwrap()
    }

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(Grid::new(4, 16).is_err());
        assert!(Grid::new(16, 15).is_err());
        assert!(Grid::new(8, 8).is_ok());
    }

    #[test]
    fn zero_round_trip() {
        let g = grid();
        for p in [Parity::Odd, Parity::Even] {
            let f = ScalarField::zeros(&g, p);
            let c = f.forward();
            assert_eq!(c.max_abs(), 0.0);
            assert_eq!(c.inverse().max_abs(), 0.0);
        }
    }

    #[test]
    fn even_basis_function_has_single_coefficient() {
        let g = grid();
        let f = ScalarField::from_fn(&g, Parity::Even, |x1, x2| {
            (PI * (x1 + 1.0) / 2.0).cos() * x2.cos()
        });
        let c = f.forward();
        for ((i, k), z) in c.data().indexed_iter() {
            let expected = if (i, k) == (1, 1) { 0.5 } else { 0.0 };
            assert!((z.re - expected).abs() < 1e-14 && z.im.abs() < 1e-14, "{i},{k}: {z}");
        }
        let back = c.inverse();
        assert!((&back - &f).max_abs() < 1e-12 * f.max_abs());
    }

    #[test]
    fn odd_basis_function_has_single_coefficient() {
        let g = grid();
        let f = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| {
            (PI * (x1 + 1.0)).sin() * (2.0 * x2).sin()
        });
        let c = f.forward();
        // sin(2x₂) = Im e^{2ix₂} → stored coefficient −i/2 at k₂ = 2.
        let z = c.get(2, 2);
        assert!(z.re.abs() < 1e-14 && (z.im + 0.5).abs() < 1e-14);
        let others: f64 = c
            .data()
            .indexed_iter()
            .filter(|((i, k), _)| (*i, *k) != (1, 2))
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        assert!(others < 1e-14);
    }

    #[test]
    fn top_sine_mode_round_trips() {
        let g = grid();
        let n = g.nx1() as f64;
        let f = ScalarField::from_fn(&g, Parity::Odd, |x1, _| (n * PI * (x1 + 1.0) / 2.0).sin());
        let back = f.forward().inverse();
        assert!((&back - &f).max_abs() < 1e-12);
    }

    #[test]
    fn derivatives_of_basis_functions() {
        let g = grid();
        let f = ScalarField::from_fn(&g, Parity::Even, |_, x2| x2.sin());
        let d = f.differentiate(Axis::X2, 1).unwrap();
        let exact = ScalarField::from_fn(&g, Parity::Even, |_, x2| x2.cos());
        assert!((&d - &exact).max_abs() < 1e-12);

        let c = ScalarField::from_fn(&g, Parity::Even, |_, _| 3.0);
        assert!(c.differentiate(Axis::X1, 1).unwrap().max_abs() < 1e-14);

        let f = ScalarField::from_fn(&g, Parity::Even, |x1, _| (PI * (x1 + 1.0) / 2.0).cos());
        let d = f.differentiate(Axis::X1, 1).unwrap();
        assert_eq!(d.parity(), Parity::Odd);
        let exact = ScalarField::from_fn(&g, Parity::Odd, |x1, _| {
            -(PI / 2.0) * (PI * (x1 + 1.0) / 2.0).sin()
        });
        assert!((&d - &exact).max_abs() < 1e-12);
        assert_eq!(
            f.differentiate(Axis::X1, 0).unwrap_err(),
            SpectralError::InvalidOrder
        );
    }

    #[test]
    fn integrals_under_normalized_measure() {
        let g = grid();
        assert!((ScalarField::from_fn(&g, Parity::Even, |_, _| 1.0).integrate() - 1.0).abs() < 1e-15);
        assert!(ScalarField::from_fn(&g, Parity::Even, |_, x2| x2.sin()).integrate().abs() < 1e-15);
        let c = ScalarField::from_fn(&g, Parity::Even, |x1, _| (PI * (x1 + 1.0) / 2.0).cos());
        assert!(c.integrate().abs() < 1e-15);
        // ∫₀¹ sin(πs) ds = 2/π.
        let s = ScalarField::from_fn(&g, Parity::Odd, |x1, _| (PI * (x1 + 1.0) / 2.0).sin());
        assert!((s.integrate() - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn sobolev_norms_of_sin_x2() {
        let g = grid();
        let f = ScalarField::from_fn(&g, Parity::Even, |_, x2| x2.sin());
        assert!((f.sobolev_norm(0) - 0.5_f64.sqrt()).abs() < 1e-14);
        assert!((f.sobolev_norm(1) - 1.0).abs() < 1e-14);
        assert_eq!(ScalarField::zeros(&g, Parity::Odd).sobolev_norm(3), 0.0);
    }

    #[test]
    fn mean_free_projection() {
        let g = grid();
        let five = ScalarField::from_fn(&g, Parity::Even, |_, _| 5.0);
        assert!(five.project_mean_free().unwrap().max_abs() < 1e-14);
        let f = ScalarField::from_fn(&g, Parity::Even, |_, x2| 2.0 + x2.sin());
        let p = f.project_mean_free().unwrap();
        let exact = ScalarField::from_fn(&g, Parity::Even, |_, x2| x2.sin());
        assert!((&p - &exact).max_abs() < 1e-14);
        let again = p.project_mean_free().unwrap();
        assert!((&again - &p).max_abs() < 1e-15);
        assert!(ScalarField::zeros(&g, Parity::Odd).project_mean_free().is_err());
    }

    #[test]
    fn dealias_cutoffs() {
        let g = grid();
        let low = ScalarField::from_fn(&g, Parity::Even, |x1, x2| {
            (PI * (x1 + 1.0)).cos() * (3.0 * x2).cos()
        });
        assert!((&low.dealias() - &low).max_abs() < 1e-13);
        let high = ScalarField::from_fn(&g, Parity::Even, |_, x2| (7.0 * x2).cos());
        assert!(high.dealias().max_abs() < 1e-13);
    }

    #[test]
    fn shift_and_evaluate() {
        let g = grid();
        let f = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| {
            (PI * (x1 + 1.0) / 2.0).sin() * (x2 + 0.3).cos()
        });
        let s = f.shifted_x2(0.7);
        let exact = ScalarField::from_fn(&g, Parity::Odd, |x1, x2| {
            (PI * (x1 + 1.0) / 2.0).sin() * (x2 + 1.0).cos()
        });
        assert!((&s - &exact).max_abs() < 1e-13);
        let v = f.evaluate(0.123, 4.5);
        let e = (PI * 1.123 / 2.0).sin() * 4.8_f64.cos();
        assert!((v - e).abs() < 1e-13);
    }
}
