//! Calculus of 2π-periodic functions of the fast variable τ.
//!
//! A [`TauField`] holds modes k = −N/2..=N/2 for each of `width` slots. The
//! two endpoint modes share the aliased collocation content and are stored
//! halved, as in a trapezoidal truncation of the Fourier series.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectral::reduce_phase;

#[derive(Debug, Clone, PartialEq)]
pub struct TauField {
    n_tau: usize,
    width: usize,
    // Slot-major: coeffs[l * (n_tau + 1) + (k + n_tau/2)].
    coeffs: Vec<Complex64>,
}

impl TauField {
    pub fn zeros(n_tau: usize, width: usize) -> Self {
        assert!(n_tau >= 2 && n_tau % 2 == 0, "n_tau must be even and ≥ 2");
        Self {
            n_tau,
            width,
            coeffs: vec![Complex64::new(0.0, 0.0); (n_tau + 1) * width],
        }
    }

    /// A τ-independent field (only mode 0).
    pub fn constant(n_tau: usize, slots: &[Complex64]) -> Self {
        let mut f = Self::zeros(n_tau, slots.len());
        for (l, &v) in slots.iter().enumerate() {
            f.set(0, l, v);
        }
        f
    }

    pub fn from_fn(n_tau: usize, width: usize, mut f: impl FnMut(i64, usize) -> Complex64) -> Self {
        let mut out = Self::zeros(n_tau, width);
        for l in 0..width {
            for k in out.modes() {
                let v = f(k, l);
                out.set(k, l, v);
            }
        }
        out
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn half(&self) -> i64 {
        (self.n_tau / 2) as i64
    }

    /// Mode numbers −N/2..=N/2.
    pub fn modes(&self) -> std::ops::RangeInclusive<i64> {
        -self.half()..=self.half()
    }

    fn index(&self, k: i64, l: usize) -> usize {
        debug_assert!(k.abs() <= self.half() && l < self.width);
        l * (self.n_tau + 1) + (k + self.half()) as usize
    }

    pub fn get(&self, k: i64, l: usize) -> Complex64 {
        self.coeffs[self.index(k, l)]
    }

    pub fn set(&mut self, k: i64, l: usize, v: Complex64) {
        let i = self.index(k, l);
        self.coeffs[i] = v;
    }

    /// Modes of slot `l`, ordered from −N/2 to N/2.
    pub fn slot(&self, l: usize) -> &[Complex64] {
        let m = self.n_tau + 1;
        &self.coeffs[l * m..(l + 1) * m]
    }

    pub fn slot_mut(&mut self, l: usize) -> &mut [Complex64] {
        let m = self.n_tau + 1;
        &mut self.coeffs[l * m..(l + 1) * m]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Mode-0 content of every slot.
    pub fn mean(&self) -> Vec<Complex64> {
        (0..self.width).map(|l| self.get(0, l)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &TauField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Multiply mode k of every slot by `m(k)`.
    pub fn map_modes(&self, m: impl Fn(i64) -> Complex64) -> TauField {
        let half = self.half();
        let mults: Vec<Complex64> = (-half..=half).map(m).collect();
        let mut out = self.clone();
        for l in 0..self.width {
            for (c, &w) in out.slot_mut(l).iter_mut().zip(&mults) {
                *c *= w;
            }
        }
        out
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: Complex64, x: &TauField) {
        for (c, &v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += a * v;
        }
    }

    fn check_same_shape(&self, other: &TauField) {
        assert!(
            self.n_tau == other.n_tau && self.width == other.width,
            "TauField shape mismatch"
        );
    }
}

impl Add for &TauField {
    type Output = TauField;
    fn add(self, rhs: &TauField) -> TauField {
        self.check_same_shape(rhs);
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), rhs);
        out
    }
}

impl Sub for &TauField {
    type Output = TauField;
    fn sub(self, rhs: &TauField) -> TauField {
        self.check_same_shape(rhs);
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), rhs);
        out
    }
}

impl Mul<&TauField> for Complex64 {
    type Output = TauField;
    fn mul(self, rhs: &TauField) -> TauField {
        let mut out = rhs.clone();
        for c in out.coeffs.iter_mut() {
            *c *= self;
        }
        out
    }
}

impl Mul<&TauField> for f64 {
    type Output = TauField;
    fn mul(self, rhs: &TauField) -> TauField {
        Complex64::new(self, 0.0) * rhs
    }
}

/// Π: keep only the τ-mean.
pub fn tau_project(field: &TauField) -> TauField {
    field.map_modes(|k| Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0))
}

/// L = ∂_τ.
pub fn tau_derivative(field: &TauField) -> TauField {
    field.map_modes(|k| Complex64::new(0.0, k as f64))
}

/// A = L⁻¹(I − Π): the zero-mean antiderivative.
pub fn tau_antiderivative(field: &TauField) -> TauField {
    field.map_modes(|k| {
        if k == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / k as f64)
        }
    })
}

/// Values at τ_j = 2πj/N, stored τ-major: `values[j * width + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    pub n_tau: usize,
    pub width: usize,
    pub values: Vec<Complex64>,
}

impl Collocation {
    pub fn zeros(n_tau: usize, width: usize) -> Self {
        Self {
            n_tau,
            width,
            values: vec![Complex64::new(0.0, 0.0); n_tau * width],
        }
    }

    pub fn point(&self, j: usize) -> &[Complex64] {
        &self.values[j * self.width..(j + 1) * self.width]
    }

    pub fn point_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.values[j * self.width..(j + 1) * self.width]
    }

    pub fn tau(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_tau as f64
    }
}

/// FFT plans for moving between τ-modes and τ-collocation values.
#[derive(Clone)]
pub struct TauTransform {
    n_tau: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TauTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TauTransform")
            .field("n_tau", &self.n_tau)
            .finish()
    }
}

impl TauTransform {
    pub fn new(n_tau: usize) -> Result<Self> {
        if n_tau < 2 || n_tau % 2 != 0 {
            return Err(Error::invalid(format!(
                "n_tau must be even and ≥ 2, got {n_tau}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_tau,
            forward: planner.plan_fft_forward(n_tau),
            inverse: planner.plan_fft_inverse(n_tau),
        })
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn to_collocation(&self, field: &TauField) -> Result<Collocation> {
        if field.n_tau() != self.n_tau {
            return Err(Error::invalid(
                "TauField resolution does not match transform",
            ));
        }
        let n = self.n_tau;
        let half = n / 2;
        let mut out = Collocation::zeros(n, field.width());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for l in 0..field.width() {
            let modes = field.slot(l);
            // Bin b ↔ mode b (b < N/2) or b − N; both endpoint modes alias to bin N/2.
            buf[..half].copy_from_slice(&modes[half..n]);
            buf[half] = modes[0] + modes[n];
            buf[half + 1..].copy_from_slice(&modes[1..half]);
            self.inverse.process(&mut buf);
            for (j, &v) in buf.iter().enumerate() {
                out.values[j * field.width() + l] = v;
            }
        }
        Ok(out)
    }

    pub fn from_collocation(&self, values: &Collocation) -> Result<TauField> {
        if values.n_tau != self.n_tau || values.values.len() != values.n_tau * values.width {
            return Err(Error::invalid("collocation array does not match transform"));
        }
        let n = self.n_tau;
        let half = n / 2;
        let scale = 1.0 / n as f64;
        let mut out = TauField::zeros(n, values.width);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for l in 0..values.width {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = values.values[j * values.width + l];
            }
            self.forward.process(&mut buf);
            let modes = out.slot_mut(l);
            for b in 0..half {
                modes[half + b] = buf[b] * scale;
            }
            for b in half + 1..n {
                modes[b - half] = buf[b] * scale;
            }
            let edge = buf[half] * (0.5 * scale);
            modes[0] = edge;
            modes[n] = edge;
        }
        Ok(out)
    }
}

/// Evaluate the τ-Fourier series of every slot at `tau`.
pub fn tau_eval(field: &TauField, tau: f64) -> Vec<Complex64> {
    let half = field.half();
    let phases: Vec<Complex64> = (-half..=half)
        .map(|k| {
            let (s, c) = reduce_phase(k as f64, tau).sin_cos();
            Complex64::new(c, s)
        })
        .collect();
    (0..field.width())
        .map(|l| field.slot(l).iter().zip(&phases).map(|(c, e)| c * e).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, n_tau: usize, width: usize) -> TauField {
        TauField::from_fn(n_tau, width, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn projection_examples() {
        let mut f = TauField::zeros(8, 2);
        f.set(0, 0, Complex64::new(3.0, 0.0));
        f.set(2, 0, Complex64::new(2.0, 0.0));
        f.set(0, 1, Complex64::new(-1.0, 1.0));
        let p = tau_project(&f);
        assert_eq!(p.get(0, 0), Complex64::new(3.0, 0.0));
        assert_eq!(p.get(2, 0), Complex64::new(0.0, 0.0));
        assert_eq!(p.get(0, 1), Complex64::new(-1.0, 1.0));
    }

    #[test]
    fn antiderivative_of_cosine_is_sine() {
        let n = 8;
        let t = TauTransform::new(n).unwrap();
        let mut c = Collocation::zeros(n, 1);
        for j in 0..n {
            c.values[j] = Complex64::new(c.tau(j).cos(), 0.0);
        }
        let a = tau_antiderivative(&t.from_collocation(&c).unwrap());
        for tau in [0.0, 0.3, 1.7, 5.0] {
            assert!((tau_eval(&a, tau)[0] - Complex64::new(tau.sin(), 0.0)).norm() < 1e-14);
        }
        let constant = TauField::constant(n, &[Complex64::new(2.0, 1.0)]);
        assert_eq!(tau_antiderivative(&constant).sup_norm(), 0.0);
        assert_eq!(tau_derivative(&constant).sup_norm(), 0.0);
    }

    #[test]
    fn collocation_matches_brute_force() {
        let n = 8;
        let t = TauTransform::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = random_field(&mut rng, n, 3);
        for l in 0..3 {
            // Degree < N/2: no endpoint content.
            f.set(4, l, Complex64::new(0.0, 0.0));
            f.set(-4, l, Complex64::new(0.0, 0.0));
        }
        let c = t.to_collocation(&f).unwrap();
        for j in 0..n {
            let tau = c.tau(j);
            for l in 0..3 {
                let brute: Complex64 = f
                    .modes()
                    .map(|k| f.get(k, l) * Complex64::from_polar(1.0, k as f64 * tau))
                    .sum();
                assert!((c.point(j)[l] - brute).norm() < 1e-14);
            }
        }
        let back = t.from_collocation(&c).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn tau_eval_examples() {
        let mut f = TauField::zeros(8, 1);
        f.set(1, 0, Complex64::new(1.0, 0.0));
        assert!((tau_eval(&f, 0.0)[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let a = tau_eval(&f, 1.234)[0];
        let b = tau_eval(&f, 1.234 + 2.0 * PI)[0];
        assert!((a - b).norm() < 1e-13);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let t = TauTransform::new(8).unwrap();
        assert!(t.to_collocation(&TauField::zeros(16, 1)).is_err());
        assert!(TauTransform::new(7).is_err());
    }
}
