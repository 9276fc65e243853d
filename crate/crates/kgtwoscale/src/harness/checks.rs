//! Self-checks of the building blocks against independent references.
//!
//! Each check prints one machine-readable line
//! `check,<category>,<name>,<value>,<tolerance>,<pass|fail>`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::csv::fmt_float;
use super::oracle::phi_quadrature;
use crate::error::Result;
use crate::expint::{
    check_symmetry, imaginary_samples, phi, step, stiff_order_residuals, tableau_nsm, tableau_s2o2,
    tableau_s3o4, tableau_two_stage, StepOptions, Tableau,
};
use crate::solver::{build_m, solve, Method, RunConfig};
use crate::spectral::{derivative, SpatialGrid, SpectralTransform};
use crate::taucalc::{tau_derivative, tau_eval, TauField, TauTransform};
use crate::twoscale::{FilteredState, ProblemSpec, TwoScaleModel};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CheckOptions {
    /// Add this constant to b̄₂ of S2O2 before the tableau checks.
    pub corrupt_b2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub category: &'static str,
    pub name: String,
    pub value: f64,
    pub tol: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.value <= self.tol
    }

    pub fn render(&self) -> String {
        format!(
            "check,{},{},{},{},{}",
            self.category,
            self.name,
            fmt_float(self.value),
            fmt_float(self.tol),
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    fn push(&mut self, category: &'static str, name: impl Into<String>, value: f64, tol: f64) {
        // NaN never passes.
        let value = if value.is_nan() { f64::INFINITY } else { value };
        self.lines.push(CheckLine {
            category,
            name: name.into(),
            value,
            tol,
        });
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(CheckLine::passed)
    }

    /// (passed, total) per category.
    pub fn counts(&self) -> BTreeMap<&'static str, (usize, usize)> {
        let mut out = BTreeMap::new();
        for l in &self.lines {
            let e = out.entry(l.category).or_insert((0, 0));
            e.0 += l.passed() as usize;
            e.1 += 1;
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s: String = self.lines.iter().map(|l| l.render() + "\n").collect();
        for (cat, (ok, total)) in self.counts() {
            s.push_str(&format!("summary,{cat},{ok},{total}\n"));
        }
        s
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_field(rng: &mut ChaCha8Rng, n_tau: usize, width: usize) -> TauField {
    // Smooth in τ so spectral differentiation is meaningful.
    TauField::from_fn(n_tau, width, |k, _| {
        let decay = (-(k.abs() as f64) / 3.0).exp();
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay
    })
}

fn operator_checks(report: &mut CheckReport, rng: &mut ChaCha8Rng) -> Result<()> {
    let grid = SpatialGrid::new(32)?;
    let tr = SpectralTransform::new(&grid);
    let u = grid.sample(|x| c((x.sin()).exp(), (2.0 * x).cos()));
    let back = tr.inverse(&tr.forward(&u));
    let rt = back
        .iter()
        .zip(&u)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    report.push("operators", "fft_round_trip", rt, 1e-14);

    let du = tr.inverse(&derivative(&grid, &tr.forward(&u)));
    let exact = grid.sample(|x| c(x.cos() * x.sin().exp(), -2.0 * (2.0 * x).sin()));
    let err = du
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    report.push("operators", "spectral_derivative", err, 1e-12);

    let spec = ProblemSpec::new(0.25);
    let phase = spec.phase_operator(&grid)?;
    let (cs, sn) = phase.cos_sin(0.37 / 0.25);
    let pyth = cs
        .iter()
        .zip(&sn)
        .map(|(a, b)| (a * a + b * b - 1.0).abs())
        .fold(0.0, f64::max);
    report.push("operators", "cos2_plus_sin2", pyth, 1e-15);

    let n_tau = 16;
    let tt = TauTransform::new(n_tau)?;
    let f = random_field(rng, n_tau, 3);
    // Round trip is the identity once the ±N/2 endpoint pair is balanced.
    let f = tt.from_collocation(&tt.to_collocation(&f)?)?;
    let again = tt.from_collocation(&tt.to_collocation(&f)?)?;
    report.push("operators", "tau_round_trip", again.max_abs_diff(&f), 1e-14);

    let d = tau_derivative(&f);
    let tau = 0.7;
    let h = 1e-5;
    let fd: Vec<Complex64> = tau_eval(&f, tau + h)
        .iter()
        .zip(tau_eval(&f, tau - h))
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let err = tau_eval(&d, tau)
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    report.push("operators", "tau_derivative_vs_difference", err, 1e-7);
    Ok(())
}

fn phi_checks(report: &mut CheckReport) {
    let zs = [
        c(0.0, 0.0),
        c(1e-3, 0.0),
        c(0.0, 0.05),
        c(0.0, -0.5),
        c(0.0, 0.999),
        c(0.0, 1.001),
        c(-1.5, 0.5),
        c(0.0, 3.0),
        c(0.0, -17.0),
        c(0.0, 120.0),
        c(0.0, -1000.0),
    ];
    for rho in 0..=5 {
        let worst = zs
            .iter()
            .map(|&z| {
                let q = phi_quadrature(rho, z);
                (phi(rho, z) - q).norm() / q.norm().max(1e-300)
            })
            .fold(0.0, f64::max);
        report.push("phi", format!("phi{rho}_vs_quadrature"), worst, 1e-12);
    }
}

fn tableau_checks(report: &mut CheckReport, opts: CheckOptions) {
    let zs = imaginary_samples(40, 1e4);
    let mut s2o2 = tableau_s2o2();
    if let Some(delta) = opts.corrupt_b2 {
        s2o2.perturb_b(1, delta);
    }
    let symmetric: [(Tableau, usize); 4] = [
        (s2o2, 2),
        (tableau_s3o4(), 4),
        (tableau_two_stage(0.2), 2),
        (tableau_two_stage(0.0), 2),
    ];
    for (tab, order) in &symmetric {
        let sym = check_symmetry(tab, &zs);
        report.push(
            "tableau",
            format!("{}_symmetry", tab.name()),
            sym.max(),
            1e-12,
        );
        let res = stiff_order_residuals(tab, *order, &zs);
        report.push(
            "tableau",
            format!("{}_stiff_order", tab.name()),
            res.order_conditions_max(),
            1e-12,
        );
    }
    let nsm = stiff_order_residuals(&tableau_nsm(), 1, &zs);
    report.push(
        "tableau",
        "nsm_stiff_order",
        nsm.order_conditions_max(),
        1e-12,
    );
}

fn kappa_checks(report: &mut CheckReport, rng: &mut ChaCha8Rng) -> Result<()> {
    let spec = ProblemSpec::new(0.25);
    let grid = SpatialGrid::new(16)?;
    let model = TwoScaleModel::new(spec, grid, 32)?;
    let x = model.initial_qp();
    let n = model.n_x();
    let w = FilteredState::from_stacked(
        &(0..2 * n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.1)
            .collect::<Vec<_>>(),
    );
    let tau = 1.3;
    let h = 1e-6;
    let shift = |s: f64| {
        FilteredState::from_stacked(
            &x.stacked()
                .iter()
                .zip(w.stacked())
                .map(|(a, b)| a + s * b)
                .collect::<Vec<_>>(),
        )
    };
    let gp = model.g_tau(&shift(h), tau)?;
    let gm = model.g_tau(&shift(-h), tau)?;
    let jv = model.g_tau_jacvec(&x, tau, &w)?;
    let fd: Vec<Complex64> = gp
        .stacked()
        .iter()
        .zip(gm.stacked())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let err = jv
        .stacked()
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    report.push("kappa", "jacobian_vs_difference", err, 1e-7);

    let jp = model.g_tau_jacvec(&shift(h), tau, &w)?;
    let jm = model.g_tau_jacvec(&shift(-h), tau, &w)?;
    let bl = model.g_tau_bilinear(&x, tau, &w, &w)?;
    let fd: Vec<Complex64> = jp
        .stacked()
        .iter()
        .zip(jm.stacked())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    let err = bl
        .stacked()
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    report.push("kappa", "bilinear_vs_difference", err, 1e-7);

    // κ₁ has zero τ-average.
    let k1 = model.kappa(1, &x)?;
    let avg = k1.mean().iter().map(|v| v.norm()).fold(0.0, f64::max);
    report.push("kappa", "kappa1_zero_mean", avg, 1e-14);

    // With λ = 0 every correction vanishes.
    let lin = TwoScaleModel::new(
        ProblemSpec::new(0.25).with_lambda(0.0),
        SpatialGrid::new(16)?,
        32,
    )?;
    let ks = lin.kappas(&x, 3)?;
    let worst = ks.iter().map(TauField::sup_norm).fold(0.0, f64::max);
    report.push("kappa", "linear_corrections_vanish", worst, 0.0);
    Ok(())
}

fn linear_checks(report: &mut CheckReport) -> Result<()> {
    let spec = ProblemSpec::new(0.125).with_lambda(0.0);
    for method in [Method::S2o2, Method::S3o4, Method::Nsm] {
        let cfg = RunConfig {
            h: 0.25,
            t_end: 1.0,
            n_x: 16,
            n_tau: 16,
            method,
            kappa_trunc: 3,
            ..RunConfig::default()
        };
        let num = solve(&spec, &cfg.clone().final_only())?;
        let isv = solve(
            &spec,
            &RunConfig {
                method: Method::Isv,
                ..cfg
            }
            .final_only(),
        )?;
        let (a, b) = (num.u.last().expect("output"), isv.u.last().expect("output"));
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
            / scale;
        report.push("linear", format!("{method}_exact_linear_flow"), err, 1e-12);
    }
    Ok(())
}

fn reversibility_checks(report: &mut CheckReport) -> Result<()> {
    let eps = 0.25;
    let n_tau = 32;
    let model = TwoScaleModel::new(ProblemSpec::new(eps), SpatialGrid::new(16)?, n_tau)?;
    let z0 = model.prepared_initial_data(3)?;
    let m = build_m(n_tau, eps);
    let opts = StepOptions {
        tol: 1e-14,
        max_iter: 200,
    };
    let h = 2.0 * PI * eps / 7.0;
    for tab in [tableau_s2o2(), tableau_s3o4()] {
        let fwd = step(&z0, h, &m, &tab, &model, opts)?;
        let back = step(&fwd, -h, &m, &tab, &model, opts)?;
        report.push(
            "reversibility",
            format!("{}_forward_backward", tab.name()),
            back.max_abs_diff(&z0) / z0.sup_norm(),
            1e-12,
        );
    }
    Ok(())
}

/// Run every check. Only setup failures are returned as errors; failed
/// comparisons are recorded in the report.
pub fn run_checks(opts: CheckOptions) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_917);
    let mut report = CheckReport::default();
    operator_checks(&mut report, &mut rng)?;
    phi_checks(&mut report);
    tableau_checks(&mut report, opts);
    kappa_checks(&mut report, &mut rng)?;
    linear_checks(&mut report)?;
    reversibility_checks(&mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corruption_is_detected() {
        let mut report = CheckReport::default();
        tableau_checks(
            &mut report,
            CheckOptions {
                corrupt_b2: Some(1e-6),
            },
        );
        let sym = report
            .lines
            .iter()
            .find(|l| l.name == "s2o2_symmetry")
            .unwrap();
        assert!(!sym.passed());
        let mut clean = CheckReport::default();
        tableau_checks(&mut clean, CheckOptions::default());
        assert!(clean.passed(), "{}", clean.render());
    }

    #[test]
    fn nan_values_fail() {
        let mut r = CheckReport::default();
        r.push("x", "y", f64::NAN, 1.0);
        assert!(!r.passed());
        assert_eq!(r.counts()["x"], (0, 1));
    }
}
