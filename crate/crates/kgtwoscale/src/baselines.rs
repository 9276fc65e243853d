//! A trigonometric (Gautschi-type) one-step integrator applied directly to
//! the oscillatory second-order system
//!
//!   Z'' + Ω² Z = −λ f(Z),   Ω = Φ/ε,   Z(0) = ψ₁,  Z'(0) = ψ₂/ε,
//!
//! written in the rescaled time t̃. It serves as the improved Störmer–Verlet
//! style baseline: it is exact for λ = 0 and symmetric, but its accuracy is
//! not uniform in ε.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{sup_norm, SpatialGrid, SpectralTransform};
use crate::twoscale::ProblemSpec;

/// Position and velocity in spatial Fourier space.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderState {
    pub z: Vec<Complex64>,
    pub zt: Vec<Complex64>,
    pub t: f64,
}

impl SecondOrderState {
    pub fn is_finite(&self) -> bool {
        self.z
            .iter()
            .chain(&self.zt)
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone)]
pub struct Isv {
    spec: ProblemSpec,
    grid: SpatialGrid,
    transform: SpectralTransform,
    omega: Vec<f64>,
}

/// Samples of a trajectory at the output cadence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SecondOrderState>,
}

impl Isv {
    pub fn new(spec: &ProblemSpec, grid: &SpatialGrid) -> Result<Self> {
        spec.validate()?;
        let phase = spec.phase_operator(grid)?;
        Ok(Self {
            omega: phase.freqs().iter().map(|f| f / spec.eps).collect(),
            spec: spec.clone(),
            grid: grid.clone(),
            transform: SpectralTransform::new(grid),
        })
    }

    /// Build with explicit frequencies Ω (one per Fourier bin).
    pub fn with_frequencies(
        spec: &ProblemSpec,
        grid: &SpatialGrid,
        omega: Vec<f64>,
    ) -> Result<Self> {
        if omega.len() != grid.n_x() || omega.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid(
                "need one positive frequency per Fourier bin",
            ));
        }
        Ok(Self {
            omega,
            spec: spec.clone(),
            grid: grid.clone(),
            transform: SpectralTransform::new(grid),
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn initial_state(&self) -> SecondOrderState {
        let eps = self.spec.eps;
        let z = self
            .transform
            .forward(&self.grid.sample(|x| (self.spec.psi1)(x)));
        let zt = self
            .transform
            .forward(&self.grid.sample(|x| (self.spec.psi2)(x) / eps));
        SecondOrderState { z, zt, t: 0.0 }
    }

    /// ĝ(Z) for g = −λ f(Z).
    fn force(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut phys = self.transform.inverse(z);
        let norm = sup_norm(&phys);
        if !norm.is_finite() || norm > self.spec.divergence_bound {
            return Err(Error::Divergence { step: None, norm });
        }
        let f = self.spec.nonlinearity;
        for u in phys.iter_mut() {
            *u = -self.spec.lambda * f.value(*u);
        }
        self.transform.forward_in_place(&mut phys);
        Ok(phys)
    }

    /// One step of size `h` (negative `h` steps backwards).
    pub fn step(&self, state: &SecondOrderState, h: f64) -> Result<SecondOrderState> {
        let g0 = self.force(&state.z)?;
        let n = self.omega.len();
        let mut z = Vec::with_capacity(n);
        for m in 0..n {
            let xi = h * self.omega[m];
            let c = xi.cos();
            let sc = sinc(xi);
            // Ω⁻¹ sin(hΩ) = h sinc(hΩ).
            z.push(c * state.z[m] + h * sc * state.zt[m] + 0.5 * h * h * sc * sc * g0[m]);
        }
        let g1 = self.force(&z)?;
        let zt = (0..n)
            .map(|m| {
                let w = self.omega[m];
                let xi = h * w;
                let (s, c) = xi.sin_cos();
                let sc = sinc(xi);
                -w * s * state.z[m] + c * state.zt[m] + 0.5 * h * (c * sc * g0[m] + sc * g1[m])
            })
            .collect();
        Ok(SecondOrderState {
            z,
            zt,
            t: state.t + h,
        })
    }

    /// Integrate from the initial data to `t_end`, sampling every
    /// `output_every` steps and at the end.
    pub fn solve(&self, h: f64, t_end: f64, output_every: usize) -> Result<Trajectory> {
        let steps = (t_end / h).round() as usize;
        let every = output_every.max(1);
        let mut state = self.initial_state();
        let mut out = Trajectory {
            times: vec![0.0],
            states: vec![state.clone()],
        };
        for n in 1..=steps {
            state = self.step(&state, h).map_err(|e| e.at_step(n))?;
            state.t = n as f64 * h;
            if n % every == 0 || n == steps {
                out.times.push(state.t);
                out.states.push(state.clone());
            }
        }
        Ok(out)
    }
}

pub fn isv_step(isv: &Isv, state: &SecondOrderState, h: f64) -> Result<SecondOrderState> {
    isv.step(state, h)
}

pub fn isv_solve(spec: &ProblemSpec, grid: &SpatialGrid, h: f64, t_end: f64) -> Result<Trajectory> {
    Isv::new(spec, grid)?.solve(h, t_end, 1)
}
