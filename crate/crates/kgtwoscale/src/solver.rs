//! The fully discrete scheme: stepping the τ-Fourier coefficients,
//! reconstructing (u, v), and the observables built on top.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;

use crate::baselines::Isv;
use crate::error::{Error, Result};
use crate::expint::{
    step_with, tableau_nsm, tableau_s2o2, tableau_s3o4, StepCoefficients, StepOptions, Tableau,
};
use crate::spectral::{sobolev_norm, PhaseOperator, SpatialGrid, SpectralTransform};
use crate::taucalc::{tau_eval, TauField};
use crate::twoscale::{ProblemSpec, TwoScaleModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    S2o2,
    S3o4,
    Nsm,
    Isv,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::S2o2, Method::S3o4, Method::Nsm, Method::Isv];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::S2o2 => "s2o2",
            Method::S3o4 => "s3o4",
            Method::Nsm => "nsm",
            Method::Isv => "isv",
        }
    }

    /// The exponential-integrator tableau, if the method is one.
    pub fn tableau(self) -> Option<Tableau> {
        match self {
            Method::S2o2 => Some(tableau_s2o2()),
            Method::S3o4 => Some(tableau_s3o4()),
            Method::Nsm => Some(tableau_nsm()),
            Method::Isv => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub h: f64,
    pub t_end: f64,
    pub n_x: usize,
    pub n_tau: usize,
    pub method: Method,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub kappa_trunc: usize,
    pub output_every: usize,
    pub dump_tau: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            h: 1.0 / 64.0,
            t_end: 1.0,
            n_x: 32,
            n_tau: 64,
            method: Method::S3o4,
            fp_tol: 1e-12,
            fp_max_iter: 200,
            kappa_trunc: 3,
            output_every: 1,
            dump_tau: false,
        }
    }
}

impl RunConfig {
    pub fn steps(&self) -> usize {
        (self.t_end / self.h).round() as usize
    }

    /// Store only the initial and final states.
    pub fn final_only(mut self) -> Self {
        self.output_every = self.steps().max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::invalid(format!(
                "h must be positive, got {}",
                self.h
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        let ratio = self.t_end / self.h;
        if (ratio - ratio.round()).abs() > 1e-8 * ratio.max(1.0) {
            return Err(Error::invalid(format!(
                "t_end = {} is not an integer multiple of h = {}",
                self.t_end, self.h
            )));
        }
        if self.n_x < 4 || self.n_x % 2 != 0 || self.n_tau < 2 || self.n_tau % 2 != 0 {
            return Err(Error::invalid("n_x and n_tau must be even (n_x ≥ 4)"));
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return Err(Error::invalid(
                "fixed-point tolerance and iteration cap must be positive",
            ));
        }
        if self.kappa_trunc > 3 {
            return Err(Error::invalid("kappa truncation must be ≤ 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationStats {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub gamma_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub method: Method,
    pub eps: f64,
    pub h: f64,
    pub times: Vec<f64>,
    /// Fourier coefficients of u at each output time.
    pub u: Vec<Vec<Complex64>>,
    /// Fourier coefficients of v = ∂_t u at each output time.
    pub v: Vec<Vec<Complex64>>,
    pub energies: Vec<f64>,
    pub iterations: IterationStats,
    pub wall_seconds: f64,
    pub reference_grade: bool,
    /// Raw τ-coefficients at each output time, when requested.
    pub tau_dumps: Vec<TauField>,
}

impl RunResult {
    fn empty(method: Method, eps: f64, h: f64) -> Self {
        Self {
            method,
            eps,
            h,
            times: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
            energies: Vec::new(),
            iterations: IterationStats::default(),
            wall_seconds: 0.0,
            reference_grade: false,
            tau_dumps: Vec::new(),
        }
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// |H(t) − H(0)| / |H(0)| for each output.
    pub fn energy_errors(&self) -> Vec<f64> {
        let h0 = self.energies.first().copied().unwrap_or(f64::NAN);
        self.energies
            .iter()
            .map(|h| ((h - h0) / h0).abs())
            .collect()
    }
}

/// Diagonal of M on the τ-modes −N/2..=N/2: entry −ik/ε.
pub fn build_m(n_tau: usize, eps: f64) -> Vec<Complex64> {
    let half = (n_tau / 2) as i64;
    (-half..=half)
        .map(|k| Complex64::new(0.0, -(k as f64) / eps))
        .collect()
}

/// Energy and reconstruction for one problem on one grid.
#[derive(Debug, Clone)]
pub struct Observables {
    spec: ProblemSpec,
    grid: SpatialGrid,
    transform: SpectralTransform,
    phase: PhaseOperator,
}

impl Observables {
    pub fn new(spec: &ProblemSpec, grid: &SpatialGrid) -> Result<Self> {
        Ok(Self {
            phase: spec.phase_operator(grid)?,
            spec: spec.clone(),
            grid: grid.clone(),
            transform: SpectralTransform::new(grid),
        })
    }

    /// H = 2π[ε²Σ|v̂|² + ε⁻²Σφ²|û|²] + (2π/n)Σ_j λH₁(u_j).
    ///
    /// With exact multipliers this is ε²|v|² + ε^{a−2}|∇u|² + |u|²/ε² + λH₁
    /// integrated over the period.
    pub fn energy(&self, u: &[Complex64], v: &[Complex64]) -> f64 {
        let eps = self.spec.eps;
        let two_pi = 2.0 * std::f64::consts::PI;
        let kinetic: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let quadratic: f64 = u
            .iter()
            .zip(self.phase.freqs())
            .map(|(c, f)| f * f * c.norm_sqr())
            .sum();
        let phys = self.transform.inverse(u);
        let f = self.spec.nonlinearity;
        let potential = self
            .grid
            .integrate(phys.iter().map(|&w| self.spec.lambda * f.potential(w)));
        two_pi * (eps * eps * kinetic + quadratic / (eps * eps)) + potential
    }

    /// (u, v) from the filtered unknown Z = [Z_U; Z_V] at time t̃.
    pub fn reconstruct(&self, z: &[Complex64], t: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let eps = self.spec.eps;
        let n = self.grid.n_x();
        let (c, s) = self.phase.cos_sin(t / eps);
        let u = (0..n)
            .map(|m| (c[m] * z[m] + s[m] * z[n + m]) / self.phase.freqs()[m])
            .collect();
        let v = (0..n)
            .map(|m| (-s[m] * z[m] + c[m] * z[n + m]) / (eps * eps))
            .collect();
        (u, v)
    }

    /// Inverse of [`Observables::reconstruct`].
    pub fn filter(&self, u: &[Complex64], v: &[Complex64], t: f64) -> Vec<Complex64> {
        let eps = self.spec.eps;
        let n = self.grid.n_x();
        let (c, s) = self.phase.cos_sin(t / eps);
        let f = self.phase.freqs();
        let mut z = vec![Complex64::new(0.0, 0.0); 2 * n];
        for m in 0..n {
            let a = f[m] * u[m];
            let b = eps * eps * v[m];
            z[m] = c[m] * a - s[m] * b;
            z[n + m] = s[m] * a + c[m] * b;
        }
        z
    }
}

pub fn energy(
    u: &[Complex64],
    v: &[Complex64],
    spec: &ProblemSpec,
    grid: &SpatialGrid,
) -> Result<f64> {
    Ok(Observables::new(spec, grid)?.energy(u, v))
}

/// Run to completion, returning what was computed before any failure.
pub fn solve_partial(spec: &ProblemSpec, config: &RunConfig) -> (RunResult, Option<Error>) {
    let mut out = RunResult::empty(config.method, spec.eps, config.h);
    if let Err(e) = config.validate().and_then(|_| spec.validate()) {
        return (out, Some(e));
    }
    let start = Instant::now();
    let failure = match config.method {
        Method::Isv => run_isv(spec, config, &mut out),
        _ => run_two_scale(spec, config, &mut out),
    }
    .err();
    out.wall_seconds = start.elapsed().as_secs_f64();
    (out, failure)
}

pub fn solve(spec: &ProblemSpec, config: &RunConfig) -> Result<RunResult> {
    match solve_partial(spec, config) {
        (out, None) => Ok(out),
        (_, Some(e)) => Err(e),
    }
}

fn record(
    out: &mut RunResult,
    obs: &Observables,
    t: f64,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
) -> Result<()> {
    let h = obs.energy(&u, &v);
    if !h.is_finite() {
        return Err(Error::Divergence {
            step: None,
            norm: h,
        });
    }
    out.times.push(t);
    out.u.push(u);
    out.v.push(v);
    out.energies.push(h);
    Ok(())
}

fn run_two_scale(spec: &ProblemSpec, config: &RunConfig, out: &mut RunResult) -> Result<()> {
    let grid = SpatialGrid::new(config.n_x)?;
    let model = TwoScaleModel::new(spec.clone(), grid.clone(), config.n_tau)?;
    let obs = Observables::new(spec, &grid)?;
    let tab = config.method.tableau().expect("two-scale method");
    let coeffs = StepCoefficients::new(&tab, config.h, &build_m(config.n_tau, spec.eps));
    let opts = StepOptions {
        tol: config.fp_tol,
        max_iter: config.fp_max_iter,
    };
    let steps = config.steps();
    let every = config.output_every.max(1);
    let mut z = model.prepared_initial_data(config.kappa_trunc)?;
    let emit = |out: &mut RunResult, z: &TauField, n: usize| -> Result<()> {
        let t = n as f64 * config.h;
        let (u, v) = obs.reconstruct(&tau_eval(z, t / spec.eps), t);
        record(out, &obs, t, u, v).map_err(|e| e.at_step(n))?;
        if config.dump_tau {
            out.tau_dumps.push(z.clone());
        }
        Ok(())
    };
    emit(out, &z, 0)?;
    for n in 1..=steps {
        let (next, stats) = step_with(&z, &coeffs, &model, opts).map_err(|e| e.at_step(n))?;
        z = next;
        let it = &mut out.iterations;
        it.steps += 1;
        it.total_iterations += stats.iterations;
        it.max_iterations = it.max_iterations.max(stats.iterations);
        it.gamma_evals += stats.gamma_evals;
        if n % every == 0 || n == steps {
            emit(out, &z, n)?;
        }
    }
    Ok(())
}

fn run_isv(spec: &ProblemSpec, config: &RunConfig, out: &mut RunResult) -> Result<()> {
    let grid = SpatialGrid::new(config.n_x)?;
    let isv = Isv::new(spec, &grid)?;
    let obs = Observables::new(spec, &grid)?;
    let steps = config.steps();
    let every = config.output_every.max(1);
    let mut state = isv.initial_state();
    let emit = |out: &mut RunResult, zs: &crate::baselines::SecondOrderState, n: usize| {
        let v = zs.zt.iter().map(|c| c / spec.eps).collect();
        record(out, &obs, n as f64 * config.h, zs.z.clone(), v).map_err(|e| e.at_step(n))
    };
    emit(out, &state, 0)?;
    for n in 1..=steps {
        state = isv.step(&state, config.h).map_err(|e| e.at_step(n))?;
        out.iterations.steps += 1;
        if n % every == 0 || n == steps {
            emit(out, &state, n)?;
        }
    }
    Ok(())
}

/// Relative H¹ error of u and L² error of v against a reference at time `at`.
pub fn relative_errors(num: &RunResult, reference: &RunResult, at: f64) -> Result<(f64, f64)> {
    let (i, j) = match (num.index_of(at), reference.index_of(at)) {
        (Some(i), Some(j)) => (i, j),
        _ => {
            return Err(Error::invalid(format!(
                "time {at} not present in both results"
            )))
        }
    };
    let n_x = reference.u[j].len();
    if num.u[i].len() != n_x {
        return Err(Error::invalid("results use different spatial grids"));
    }
    let grid = SpatialGrid::new(n_x)?;
    let du: Vec<Complex64> = num.u[i]
        .iter()
        .zip(&reference.u[j])
        .map(|(a, b)| a - b)
        .collect();
    let dv: Vec<Complex64> = num.v[i]
        .iter()
        .zip(&reference.v[j])
        .map(|(a, b)| a - b)
        .collect();
    Ok((
        sobolev_norm(&grid, &du, 1) / sobolev_norm(&grid, &reference.u[j], 1),
        sobolev_norm(&grid, &dv, 0) / sobolev_norm(&grid, &reference.v[j], 0),
    ))
}

/// Subdivision factor of the reference step: h_ref = h/m ≤ min(h/32, 2⁻¹¹),
/// with m an integer so that the output times coincide.
pub fn reference_subdivision(h: f64) -> usize {
    32usize.max((h * 2048.0 - 1e-9).ceil() as usize)
}

/// S3O4 with a fine step on the same grids, sampled at the times of `config`.
pub fn reference_solution(spec: &ProblemSpec, config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let m = reference_subdivision(config.h);
    let cfg = RunConfig {
        h: config.h / m as f64,
        method: Method::S3o4,
        output_every: config.output_every.max(1) * m,
        dump_tau: false,
        ..config.clone()
    };
    let mut out = solve(spec, &cfg)?;
    out.reference_grade = true;
    Ok(out)
}
