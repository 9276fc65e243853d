use num_complex::Complex64;

use kgtwoscale::harness::fit_loglog;
use kgtwoscale::solver::{relative_errors, solve_partial};
use kgtwoscale::spectral::{SpatialGrid, SpectralTransform};
use kgtwoscale::{solve, Error, Method, ProblemSpec, RunConfig};

fn cfg(method: Method, h: f64, t_end: f64) -> RunConfig {
    RunConfig {
        h,
        t_end,
        n_x: 32,
        n_tau: 64,
        method,
        ..RunConfig::default()
    }
}

#[test]
fn linear_solution_matches_closed_form() {
    let eps = 0.125;
    let spec = ProblemSpec::new(eps).with_lambda(0.0);
    let grid = SpatialGrid::new(32).unwrap();
    let tr = SpectralTransform::new(&grid);
    let phase = spec.phase_operator(&grid).unwrap();
    let p1 = tr.forward(&grid.sample(|x| (spec.psi1)(x)));
    let p2 = tr.forward(&grid.sample(|x| (spec.psi2)(x)));
    let t = 1.0;
    let (c, s) = phase.cos_sin(t / eps);
    let f = phase.freqs();
    let u: Vec<Complex64> = (0..32)
        .map(|m| c[m] * p1[m] + s[m] / f[m] * p2[m])
        .collect();
    let v: Vec<Complex64> = (0..32)
        .map(|m| (-f[m] / eps * s[m] * p1[m] + c[m] * p2[m] / eps) / eps)
        .collect();
    for method in Method::ALL {
        let r = solve(&spec, &cfg(method, 0.125, t).final_only()).unwrap();
        let du =
            r.u.last()
                .unwrap()
                .iter()
                .zip(&u)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
        let dv =
            r.v.last()
                .unwrap()
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
        assert!(du <= 1e-12 && dv <= 1e-10, "{method}: {du:e} {dv:e}");
    }
}

#[test]
fn runs_are_deterministic() {
    let spec = ProblemSpec::new(0.25);
    let c = cfg(Method::S3o4, 0.125, 1.0);
    let a = solve(&spec, &c).unwrap();
    let b = solve(&spec, &c).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.v, b.v);
    assert_eq!(a.energies, b.energies);
}

#[test]
fn energy_error_starts_at_zero_and_stays_small_on_fine_steps() {
    let spec = ProblemSpec::new(0.25);
    let r = solve(&spec, &cfg(Method::S3o4, 1.0 / 64.0, 10.0)).unwrap();
    let errs = r.energy_errors();
    assert_eq!(errs[0], 0.0);
    let worst = errs.iter().copied().fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst:e}");
}

/// ISV errors against a fine-step ISV run. The two-scale reference starts
/// from prepared data whose τ = 0 value differs from (ψ₁, ψ₂) by O(ε²), so it
/// cannot resolve the baseline's own discretization error.
fn isv_errors(eps: f64, hs: &[f64]) -> Vec<f64> {
    let spec = ProblemSpec::new(eps);
    let fine = solve(&spec, &cfg(Method::Isv, 1.0 / 8192.0, 1.0).final_only()).unwrap();
    hs.iter()
        .map(|&h| {
            let r = solve(&spec, &cfg(Method::Isv, h, 1.0).final_only()).unwrap();
            relative_errors(&r, &fine, 1.0).unwrap().0
        })
        .collect()
}

#[test]
fn trigonometric_baseline_is_second_order_for_large_eps() {
    let hs: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    let errs = isv_errors(0.5, &hs);
    let (slope, _) = fit_loglog(&hs, &errs).unwrap();
    assert!((slope - 2.0).abs() <= 0.3, "slope {slope} errors {errs:?}");
}

#[test]
fn trigonometric_baseline_degrades_as_eps_decreases() {
    let h = 1.0 / 32.0;
    let errs: Vec<f64> = [0.5, 0.25, 0.125]
        .iter()
        .map(|&e| isv_errors(e, &[h])[0])
        .collect();
    assert!(errs.windows(2).all(|w| w[1] >= w[0]), "{errs:?}");
}

#[test]
fn prepared_data_shifts_initial_value_by_eps_squared() {
    let shift = |eps: f64, trunc: usize| {
        let spec = ProblemSpec::new(eps);
        let grid = SpatialGrid::new(32).unwrap();
        let psi1 = SpectralTransform::new(&grid).forward(&grid.sample(|x| (spec.psi1)(x)));
        let r = solve(
            &spec,
            &RunConfig {
                kappa_trunc: trunc,
                ..cfg(Method::S3o4, 0.125, 0.0)
            },
        )
        .unwrap();
        r.u[0]
            .iter()
            .zip(&psi1)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    };
    assert!(shift(0.25, 0) <= 1e-15);
    let cs: Vec<f64> = [0.25, 0.125, 0.0625]
        .iter()
        .map(|&e| shift(e, 3) / (e * e))
        .collect();
    assert!(cs.iter().all(|c| *c > 0.0));
    assert!(
        cs.windows(2)
            .all(|w| (w[1] / w[0]) > 0.5 && (w[1] / w[0]) < 2.0),
        "{cs:?}"
    );
}

#[test]
fn failure_keeps_partial_output() {
    let spec = ProblemSpec::new(0.25);
    let c = RunConfig {
        fp_max_iter: 1,
        ..cfg(Method::S3o4, 0.25, 1.0)
    };
    let (partial, err) = solve_partial(&spec, &c);
    match err {
        Some(Error::NonConvergence { step: Some(1), .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(partial.times, vec![0.0]);
}

#[test]
fn mismatched_horizon_is_rejected() {
    let spec = ProblemSpec::new(0.25);
    assert!(solve(&spec, &cfg(Method::S2o2, 0.3, 1.0)).is_err());
    assert!(solve(
        &spec,
        &RunConfig {
            n_x: 15,
            ..cfg(Method::S2o2, 0.25, 1.0)
        }
    )
    .is_err());
}

#[test]
fn output_cadence_includes_final_time() {
    let spec = ProblemSpec::new(0.5);
    let r = solve(
        &spec,
        &RunConfig {
            output_every: 3,
            ..cfg(Method::S2o2, 0.125, 1.0)
        },
    )
    .unwrap();
    assert_eq!(r.times, vec![0.0, 0.375, 0.75, 1.0]);
    assert_eq!(r.iterations.steps, 8);
}
