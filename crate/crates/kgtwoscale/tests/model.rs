use num_complex::Complex64;
use proptest::prelude::*;

use kgtwoscale::expint::{
    phi, phis, step, tableau_s2o2, tableau_s3o4, tableau_two_stage, StepOptions,
};
use kgtwoscale::harness::oracle::phi_quadrature;
use kgtwoscale::solver::build_m;
use kgtwoscale::spectral::SpatialGrid;
use kgtwoscale::taucalc::TauField;
use kgtwoscale::twoscale::{Nonlinearity, ProblemSpec, TwoScaleModel};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn model(eps: f64, lambda: f64) -> TwoScaleModel {
    TwoScaleModel::new(
        ProblemSpec::new(eps).with_lambda(lambda),
        SpatialGrid::new(16).unwrap(),
        32,
    )
    .unwrap()
}

/// Translate every spatial slot of a τ-field by `shift`.
fn translate(z: &TauField, grid: &SpatialGrid, shift: f64) -> TauField {
    let n = grid.n_x();
    let mut out = z.clone();
    for l in 0..z.width() {
        let k = grid.wavenumbers()[l % n] as f64;
        let rot = c(0.0, k * shift).exp();
        for v in out.slot_mut(l) {
            *v *= rot;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potential_gradient_is_the_nonlinearity(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        // ∂H₁/∂ū = ½(∂_x + i∂_y)H₁ by central differences.
        let f = Nonlinearity::CubicModulus;
        let u = c(re, im);
        let d = 1e-6;
        let gx = (f.potential(u + d) - f.potential(u - d)) / (2.0 * d);
        let gy = (f.potential(u + c(0.0, d)) - f.potential(u - c(0.0, d))) / (2.0 * d);
        let grad = 0.5 * c(gx, gy);
        prop_assert!((grad - f.value(u)).norm() <= 1e-7 * (1.0 + f.value(u).norm()));

        let g = Nonlinearity::CubicReal;
        let r = c(re, 0.0);
        let gx = (g.potential(r + d) - g.potential(r - d)) / (2.0 * d);
        prop_assert!((0.5 * gx - g.value(r).re).abs() <= 1e-7 * (1.0 + re.abs().powi(3)));
    }

    #[test]
    fn phi_recurrence_and_quadrature_agree(y in -200.0f64..200.0, x in -3.0f64..0.5) {
        let z = c(x, y);
        let all = phis(5, z);
        for rho in 0..=5 {
            prop_assert!((all[rho] - phi(rho, z)).norm() <= 1e-15 * all[rho].norm().max(1.0));
            let q = phi_quadrature(rho, z);
            prop_assert!((all[rho] - q).norm() <= 1e-12 * q.norm().max(1e-300));
        }
    }

    #[test]
    fn gamma_commutes_with_translation(cells in 1i32..16) {
        let m = model(0.25, -1.0);
        let grid = m.grid().clone();
        let shift = cells as f64 * grid.spacing();
        let z = m.prepared_initial_data(2).unwrap();
        let a = m.gamma_eval(&translate(&z, &grid, shift)).unwrap();
        let b = translate(&m.gamma_eval(&z).unwrap(), &grid, shift);
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
    }

    #[test]
    fn two_stage_family_is_reversible(c1 in 0.05f64..0.45) {
        let eps = 0.25;
        let m = model(eps, -1.0);
        let z0 = m.prepared_initial_data(3).unwrap();
        let mm = build_m(32, eps);
        let tab = tableau_two_stage(c1);
        let opts = StepOptions { tol: 1e-14, max_iter: 200 };
        let fwd = step(&z0, 0.1, &mm, &tab, &m, opts).unwrap();
        let back = step(&fwd, -0.1, &mm, &tab, &m, opts).unwrap();
        prop_assert!(back.max_abs_diff(&z0) <= 1e-12);
    }
}

#[test]
fn kappa_corrections_scale_with_lambda() {
    // κ_j is homogeneous of degree j in λ.
    let base = model(0.25, -1.0);
    let x = base.initial_qp();
    let k1 = base.kappas(&x, 3).unwrap();
    let k2 = model(0.25, -2.0).kappas(&x, 3).unwrap();
    for j in 0..3 {
        let scale = 2f64.powi(j as i32 + 1);
        let diff = (&k2[j] - &(scale * &k1[j])).sup_norm();
        assert!(
            diff <= 1e-12 * k2[j].sup_norm(),
            "j={} diff={diff:e}",
            j + 1
        );
    }
}

#[test]
fn prepared_data_without_corrections_is_constant_in_tau() {
    let m = model(0.25, -1.0);
    let z = m.prepared_initial_data(0).unwrap();
    let x = m.initial_qp().stacked();
    for k in z.modes() {
        for l in 0..z.width() {
            let want = if k == 0 { x[l] } else { c(0.0, 0.0) };
            assert_eq!(z.get(k, l), want);
        }
    }
}

#[test]
fn linear_problem_is_propagated_exactly() {
    let eps = 0.125;
    let m = model(eps, 0.0);
    let z0 = m.prepared_initial_data(3).unwrap();
    let mm = build_m(32, eps);
    let h = 0.3;
    for tab in [tableau_s2o2(), tableau_s3o4()] {
        let mut z = z0.clone();
        for _ in 0..20 {
            z = step(&z, h, &mm, &tab, &m, StepOptions::default()).unwrap();
        }
        let exact = z0.map_modes(|k| (mm[(k + 16) as usize] * (20.0 * h)).exp());
        assert!(z.max_abs_diff(&exact) <= 1e-13 * z0.sup_norm());
    }
}

#[test]
fn invalid_shapes_are_rejected() {
    let m = model(0.25, -1.0);
    assert!(m.gamma_eval(&TauField::zeros(16, 32)).is_err());
    assert!(m.kappa(4, &m.initial_qp()).is_err());
    assert!(m.prepared_initial_data(4).is_err());
    assert!(TwoScaleModel::new(ProblemSpec::new(0.0), SpatialGrid::new(16).unwrap(), 32).is_err());
}
