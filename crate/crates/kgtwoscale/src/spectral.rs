//! Fourier pseudo-spectral machinery on the periodic interval (−π, π).
//!
//! Fields are stored as Fourier coefficients in FFT bin order: bin `b` holds
//! wavenumber `b` for `b < n/2` and `b − n` otherwise, and the coefficients
//! satisfy `u(x) = Σ û_k e^{ikx}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
// 2π split into a leading double and its rounding remainder.
const TWO_PI_HI: f64 = 6.283_185_307_179_586;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Product `a·b` reduced to (−π, π], keeping the rounding error of the
/// product and of 2π so that large phases stay accurate.
pub fn reduce_phase(a: f64, b: f64) -> f64 {
    let p = a * b;
    let p_lo = a.mul_add(b, -p);
    let n = (p / TWO_PI).round();
    let r = (-n).mul_add(TWO_PI_HI, p);
    let r = (-n).mul_add(TWO_PI_LO, r) + p_lo;
    if r > PI {
        r - TWO_PI
    } else if r <= -PI {
        r + TWO_PI
    } else {
        r
    }
}

/// Largest modulus, NaN if any entry is NaN.
pub fn sup_norm(values: &[Complex64]) -> f64 {
    values.iter().map(|c| c.norm()).fold(0.0, |acc: f64, x| {
        if acc.is_nan() || x.is_nan() {
            f64::NAN
        } else {
            acc.max(x)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    n_x: usize,
    points: Vec<f64>,
    wavenumbers: Vec<i64>,
}

impl SpatialGrid {
    pub fn new(n_x: usize) -> Result<Self> {
        if n_x < 4 || n_x % 2 != 0 {
            return Err(Error::invalid(format!(
                "n_x must be even and at least 4, got {n_x}"
            )));
        }
        let dx = TWO_PI / n_x as f64;
        let points = (0..n_x).map(|j| -PI + dx * j as f64).collect();
        let half = (n_x / 2) as i64;
        let wavenumbers = (0..n_x as i64)
            .map(|b| if b < half { b } else { b - n_x as i64 })
            .collect();
        Ok(Self {
            n_x,
            points,
            wavenumbers,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Wavenumber of each FFT bin.
    pub fn wavenumbers(&self) -> &[i64] {
        &self.wavenumbers
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n_x as f64
    }

    /// Trapezoidal quadrature of grid values over one period.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.spacing() * values.into_iter().sum::<f64>()
    }

    pub fn sample<F: Fn(f64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        self.points.iter().map(|&x| f(x)).collect()
    }
}

/// Forward/inverse discrete Fourier transform between grid values and
/// coefficients of `Σ û_k e^{ikx}`.
#[derive(Clone)]
pub struct SpectralTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralTransform")
            .field("n", &self.n)
            .finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n: grid.n_x(),
            forward: planner.plan_fft_forward(grid.n_x()),
            inverse: planner.plan_fft_inverse(grid.n_x()),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Grid values to coefficients, in place.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.forward.process(data);
        let scale = 1.0 / self.n as f64;
        // x_0 = −π contributes the factor e^{ikπ} = (−1)^k.
        for (b, c) in data.iter_mut().enumerate() {
            *c *= if b % 2 == 0 { scale } else { -scale };
        }
    }

    /// Coefficients to grid values, in place.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        for c in data.iter_mut().skip(1).step_by(2) {
            *c = -*c;
        }
        self.inverse.process(data);
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut out = values.to_vec();
        self.forward_in_place(&mut out);
        out
    }

    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = coeffs.to_vec();
        self.inverse_in_place(&mut out);
        out
    }
}

/// Second-order Fourier differentiation matrix, approximating −Δ on the grid.
pub fn fourier_diff_matrix(n_x: usize) -> Result<DMatrix<f64>> {
    if n_x < 4 || n_x % 2 != 0 {
        return Err(Error::invalid(format!(
            "n_x must be even and at least 4, got {n_x}"
        )));
    }
    let n = n_x as f64;
    Ok(DMatrix::from_fn(n_x, n_x, |k, j| {
        if k == j {
            n * n / 12.0 + 1.0 / 6.0
        } else {
            let sign = if (k + j) % 2 == 0 { 1.0 } else { -1.0 };
            let s = ((k as f64 - j as f64) * PI / n).sin();
            sign / (2.0 * s * s)
        }
    }))
}

/// Spectral derivative ∂_x in coefficient space.
pub fn derivative(grid: &SpatialGrid, coeffs: &[Complex64]) -> Vec<Complex64> {
    grid.wavenumbers()
        .iter()
        .zip(coeffs)
        .map(|(&k, &c)| c * Complex64::new(0.0, k as f64))
        .collect()
}

/// How the frequency multipliers are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyMode {
    /// φ_m = √(1 + ε^a k_m²).
    Exact,
    /// φ_m rounded to the nearest integer (at least 1), so every propagator
    /// e^{iτΦ} is 2π-periodic in τ.
    #[default]
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOperator {
    freqs: Vec<f64>,
    eps: f64,
    exponent: u32,
    mode: FrequencyMode,
}

/// Diagonal frequency operator Φ = √(1 + ε^a k²) with exact multipliers.
pub fn phase_operator(grid: &SpatialGrid, eps: f64, exponent: u32) -> Result<PhaseOperator> {
    PhaseOperator::new(grid, eps, exponent, FrequencyMode::Exact)
}

impl PhaseOperator {
    pub fn new(grid: &SpatialGrid, eps: f64, exponent: u32, mode: FrequencyMode) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
        }
        if exponent != 1 && exponent != 2 {
            return Err(Error::invalid(format!(
                "frequency exponent must be 1 or 2, got {exponent}"
            )));
        }
        let scale = eps.powi(exponent as i32);
        let freqs = grid
            .wavenumbers()
            .iter()
            .map(|&k| {
                let phi = (1.0 + scale * (k * k) as f64).sqrt();
                match mode {
                    FrequencyMode::Exact => phi,
                    FrequencyMode::Periodic => phi.round().max(1.0),
                }
            })
            .collect();
        Ok(Self {
            freqs,
            eps,
            exponent,
            mode,
        })
    }

    /// Build directly from multipliers (each must be ≥ 1).
    pub fn from_freqs(freqs: Vec<f64>, eps: f64, exponent: u32) -> Result<Self> {
        if freqs.iter().any(|&f| !(f >= 1.0) || !f.is_finite()) {
            return Err(Error::invalid("frequencies must be finite and ≥ 1"));
        }
        Ok(Self {
            freqs,
            eps,
            exponent,
            mode: FrequencyMode::Exact,
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn mode(&self) -> FrequencyMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// cos and sin of `phase·φ_m` for every mode.
    pub fn cos_sin(&self, phase: f64) -> (Vec<f64>, Vec<f64>) {
        self.freqs
            .iter()
            .map(|&f| {
                let (s, c) = reduce_phase(phase, f).sin_cos();
                (c, s)
            })
            .unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Cos,
    Sin,
    Inv,
    Id,
}

/// Mode-wise multiplication by cos(phase·φ), sin(phase·φ), 1/φ or 1.
pub fn apply_trig(
    op: &PhaseOperator,
    kind: TrigKind,
    phase: f64,
    field: &[Complex64],
) -> Vec<Complex64> {
    field
        .iter()
        .zip(op.freqs())
        .map(|(&c, &f)| match kind {
            TrigKind::Cos => c * reduce_phase(phase, f).cos(),
            TrigKind::Sin => c * reduce_phase(phase, f).sin(),
            TrigKind::Inv => c / f,
            TrigKind::Id => c,
        })
        .collect()
}

/// Discrete H^s norm `(Σ (1+k²)^s |û_k|²)^{1/2}` of Fourier coefficients.
pub fn sobolev_norm(grid: &SpatialGrid, coeffs: &[Complex64], s: u32) -> f64 {
    grid.wavenumbers()
        .iter()
        .zip(coeffs)
        .map(|(&k, c)| (1.0 + (k * k) as f64).powi(s as i32) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(SpatialGrid::new(3).is_err());
        assert!(SpatialGrid::new(2).is_err());
        assert!(SpatialGrid::new(7).is_err());
        let g = SpatialGrid::new(8).unwrap();
        assert_eq!(g.wavenumbers(), &[0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(close(g.points()[0], -PI, 1e-15));
    }

    #[test]
    fn transform_matches_brute_force_dft() {
        let g = SpatialGrid::new(8).unwrap();
        let t = SpectralTransform::new(&g);
        let vals: Vec<Complex64> = (0..8)
            .map(|j| Complex64::new((j as f64).sin() + 0.3, (j as f64 * 0.7).cos()))
            .collect();
        let fast = t.forward(&vals);
        for (b, &k) in g.wavenumbers().iter().enumerate() {
            let brute: Complex64 = g
                .points()
                .iter()
                .zip(&vals)
                .map(|(&x, &u)| u * Complex64::from_polar(1.0, -(k as f64) * x))
                .sum::<Complex64>()
                / 8.0;
            assert!((fast[b] - brute).norm() < 1e-14);
        }
        let back = t.inverse(&fast);
        for (a, b) in back.iter().zip(&vals) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn diff_matrix_entries() {
        let a = fourier_diff_matrix(32).unwrap();
        assert!(close(a[(0, 0)], 85.5, 1e-14));
        let a4 = fourier_diff_matrix(4).unwrap();
        assert!(close(a4[(0, 1)], -1.0, 1e-14));
        assert!(close(a4[(2, 1)], -1.0, 1e-14));
        assert!(fourier_diff_matrix(5).is_err());
        assert!(fourier_diff_matrix(2).is_err());
    }

    #[test]
    fn diff_matrix_eigenvalues_are_squared_wavenumbers() {
        for n in [4usize, 8, 16, 32] {
            let g = SpatialGrid::new(n).unwrap();
            let eig = fourier_diff_matrix(n).unwrap().symmetric_eigen();
            let mut got: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            got.sort_by(f64::total_cmp);
            let mut want: Vec<f64> = g.wavenumbers().iter().map(|&k| (k * k) as f64).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn phase_operator_values() {
        let g = SpatialGrid::new(8).unwrap();
        let op = phase_operator(&g, 0.25, 1).unwrap();
        assert_eq!(op.freqs()[0], 1.0);
        assert!(close(op.freqs()[2], 2f64.sqrt(), 1e-15));
        let op2 = phase_operator(&g, 0.5, 2).unwrap();
        assert!(close(op2.freqs()[1], 1.25f64.sqrt(), 1e-15));
        assert_eq!(op.freqs()[1], op.freqs()[7]);
        assert!(phase_operator(&g, 0.0, 1).is_err());
        assert!(phase_operator(&g, 0.5, 3).is_err());
        let per = PhaseOperator::new(&g, 0.25, 1, FrequencyMode::Periodic).unwrap();
        assert!(per.freqs().iter().all(|f| f.fract() == 0.0 && *f >= 1.0));
    }

    #[test]
    fn phase_operator_matches_matrix_square_root() {
        let n = 16;
        let g = SpatialGrid::new(n).unwrap();
        let t = SpectralTransform::new(&g);
        for (eps, a) in [(0.5, 2u32), (0.25, 1)] {
            let op = phase_operator(&g, eps, a).unwrap();
            let mut m = fourier_diff_matrix(n).unwrap() * eps.powi(a as i32);
            for i in 0..n {
                m[(i, i)] += 1.0;
            }
            let eig = m.symmetric_eigen();
            let sqrt = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
                * eig.eigenvectors.transpose();
            let u: Vec<f64> = g
                .points()
                .iter()
                .map(|x| (x.cos() * 2.0).exp() - x.sin())
                .collect();
            let direct = &sqrt * nalgebra::DVector::from_vec(u.clone());
            let uc: Vec<Complex64> = u.iter().map(|&r| Complex64::new(r, 0.0)).collect();
            let coeffs = t.forward(&uc);
            let scaled: Vec<Complex64> =
                coeffs.iter().zip(op.freqs()).map(|(c, f)| c * f).collect();
            let spectral = t.inverse(&scaled);
            for (d, s) in direct.iter().zip(&spectral) {
                assert!((d - s.re).abs() < 1e-10 && s.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trig_examples() {
        let g = SpatialGrid::new(8).unwrap();
        let op = phase_operator(&g, 0.5, 1).unwrap();
        let field: Vec<Complex64> = (0..8).map(|j| Complex64::new(j as f64, 1.0)).collect();
        assert!(apply_trig(&op, TrigKind::Sin, 0.0, &field)
            .iter()
            .all(|c| c.norm() == 0.0));
        assert_eq!(apply_trig(&op, TrigKind::Cos, 0.0, &field), field);
        let ints = PhaseOperator::from_freqs(vec![1.0, 2.0, 3.0, 5.0, 7.0, 3.0, 2.0, 1.0], 0.5, 1)
            .unwrap();
        let rot = apply_trig(&ints, TrigKind::Cos, TWO_PI, &field);
        for (a, b) in rot.iter().zip(&field) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_reduction_is_accurate_for_large_arguments() {
        // 1e6·(2π) should reduce to a tiny remainder, not to rounding noise of size 1e-10.
        let r = reduce_phase(1.0e6, TWO_PI);
        assert!(r.abs() < 1e-9);
        let r = reduce_phase(3.0, 1.0);
        assert!(close(r, 3.0, 1e-16));
        let r = reduce_phase(4.0, 1.0);
        assert!(close(r, 4.0 - TWO_PI, 1e-15));
    }

    #[test]
    fn sobolev_examples() {
        let g = SpatialGrid::new(16).unwrap();
        let t = SpectralTransform::new(&g);
        let c = Complex64::new(0.3, -0.4);
        let constant = t.forward(&vec![c; 16]);
        assert!(close(sobolev_norm(&g, &constant, 3), 0.5, 1e-14));
        let wave = t.forward(&g.sample(|x| Complex64::from_polar(1.0, x)));
        assert!(close(sobolev_norm(&g, &wave, 1), 2f64.sqrt(), 1e-14));
    }

    #[test]
    fn derivative_of_sine() {
        let g = SpatialGrid::new(16).unwrap();
        let t = SpectralTransform::new(&g);
        let u = t.forward(&g.sample(|x| Complex64::new((2.0 * x).sin(), 0.0)));
        let du = t.inverse(&derivative(&g, &u));
        for (d, &x) in du.iter().zip(g.points()) {
            assert!((d.re - 2.0 * (2.0 * x).cos()).abs() < 1e-13);
        }
    }
}
