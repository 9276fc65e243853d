//! One exponential-integrator step for Ż = MZ + εΓ(Z), with M diagonal in
//! the τ-modes and the implicit stages solved by joint fixed-point iteration.

use num_complex::Complex64;

use super::tableau::{tableau_nsm, Tableau};
use crate::error::{Error, Result};
use crate::taucalc::TauField;
use crate::twoscale::TwoScaleModel;

/// The nonlinear part of the semi-discrete system.
pub trait Nonlinear {
    /// Γ(Z), without the ε prefactor.
    fn gamma(&self, z: &TauField) -> Result<TauField>;
    fn eps(&self) -> f64;
}

impl Nonlinear for TwoScaleModel {
    fn gamma(&self, z: &TauField) -> Result<TauField> {
        self.gamma_eval(z)
    }

    fn eps(&self) -> f64 {
        self.spec().eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepStats {
    pub iterations: usize,
    pub gamma_evals: usize,
    /// Sup-norm change of the stage vector at each iteration.
    pub residuals: Vec<f64>,
}

/// Coefficient functions evaluated on the diagonal of hM.
#[derive(Debug, Clone)]
pub struct StepCoefficients {
    h: f64,
    exp_full: Vec<Complex64>,
    exp_stage: Vec<Vec<Complex64>>,
    a: Vec<Vec<Option<Vec<Complex64>>>>,
    b: Vec<Vec<Complex64>>,
    explicit: Vec<bool>,
}

impl StepCoefficients {
    /// `m` holds the diagonal of M, one entry per τ-mode.
    pub fn new(tab: &Tableau, h: f64, m: &[Complex64]) -> Self {
        let s = tab.stages();
        let zs: Vec<Complex64> = m.iter().map(|&mk| h * mk).collect();
        let eval =
            |f: &dyn Fn(Complex64) -> Complex64| zs.iter().map(|&z| f(z)).collect::<Vec<_>>();
        Self {
            h,
            exp_full: eval(&|z: Complex64| z.exp()),
            exp_stage: tab
                .c()
                .iter()
                .map(|&c| eval(&|z: Complex64| (c * z).exp()))
                .collect(),
            a: (0..s)
                .map(|i| {
                    (0..s)
                        .map(|r| (!tab.a_is_zero(i, r)).then(|| eval(&|z| tab.a(i, r, z))))
                        .collect()
                })
                .collect(),
            b: (0..s).map(|r| eval(&|z| tab.b(r, z))).collect(),
            explicit: (0..s).map(|i| tab.is_explicit_stage(i)).collect(),
        }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn stages(&self) -> usize {
        self.explicit.len()
    }
}

fn scale_modes(z: &TauField, d: &[Complex64]) -> TauField {
    let mut out = z.clone();
    for l in 0..z.width() {
        for (c, &w) in out.slot_mut(l).iter_mut().zip(d) {
            *c *= w;
        }
    }
    out
}

fn add_scaled_modes(acc: &mut TauField, x: &TauField, d: &[Complex64], s: f64) {
    for l in 0..acc.width() {
        for ((c, &v), &w) in acc.slot_mut(l).iter_mut().zip(x.slot(l)).zip(d) {
            *c += s * w * v;
        }
    }
}

/// Advance `z` by one step of size `coeffs.h()`.
pub fn step_with(
    z: &TauField,
    coeffs: &StepCoefficients,
    problem: &impl Nonlinear,
    opts: StepOptions,
) -> Result<(TauField, StepStats)> {
    let s = coeffs.stages();
    let eh = problem.eps() * coeffs.h;
    let base: Vec<TauField> = coeffs.exp_stage.iter().map(|e| scale_modes(z, e)).collect();
    let mut stages = base.clone();
    let mut gam = stages
        .iter()
        .map(|x| problem.gamma(x))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = StepStats {
        gamma_evals: s,
        ..Default::default()
    };
    let implicit: Vec<usize> = (0..s).filter(|&i| !coeffs.explicit[i]).collect();
    if !implicit.is_empty() {
        let mut converged = false;
        while stats.iterations < opts.max_iter {
            stats.iterations += 1;
            let mut diff = 0.0f64;
            for &i in &implicit {
                let mut next = base[i].clone();
                for (r, g) in gam.iter().enumerate() {
                    if let Some(a) = &coeffs.a[i][r] {
                        add_scaled_modes(&mut next, g, a, eh);
                    }
                }
                diff = diff.max(next.max_abs_diff(&stages[i]));
                stages[i] = next;
            }
            if !diff.is_finite() {
                return Err(Error::Divergence {
                    step: None,
                    norm: diff,
                });
            }
            stats.residuals.push(diff);
            for &i in &implicit {
                gam[i] = problem.gamma(&stages[i])?;
                stats.gamma_evals += 1;
            }
            if diff <= opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                step: None,
                iterations: stats.iterations,
                residual: stats.residuals.last().copied().unwrap_or(f64::NAN),
            });
        }
    }
    let mut next = scale_modes(z, &coeffs.exp_full);
    for (r, g) in gam.iter().enumerate() {
        add_scaled_modes(&mut next, g, &coeffs.b[r], eh);
    }
    Ok((next, stats))
}

/// One step of `tab` with step size `h` and diagonal operator `m`.
pub fn step(
    z: &TauField,
    h: f64,
    m: &[Complex64],
    tab: &Tableau,
    problem: &impl Nonlinear,
    opts: StepOptions,
) -> Result<TauField> {
    step_with(z, &StepCoefficients::new(tab, h, m), problem, opts).map(|(z, _)| z)
}

/// The non-symmetric one-stage midpoint scheme.
pub fn nsm_step(
    z: &TauField,
    h: f64,
    m: &[Complex64],
    problem: &impl Nonlinear,
    opts: StepOptions,
) -> Result<TauField> {
    step(z, h, m, &tableau_nsm(), problem, opts)
}
