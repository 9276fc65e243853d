//! The sweeps: convergence in h and in ε, long-time energy, efficiency.
//!
//! Sweep points run on a worker pool; rows are assembled afterwards in
//! parameter order so the CSV output does not depend on scheduling.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentPlan, Study};
use super::csv::{fmt_float, write_csv};
use crate::error::{Error, Result};
use crate::solver::{
    reference_solution, relative_errors, solve, solve_partial, Method, RunConfig, RunResult,
};

/// Errors below this level are not used in slope fits.
pub const REFERENCE_FLOOR: f64 = 1e-11;

/// Build the worker pool, honoring `KG_THREADS`.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("KG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

pub fn status_of(err: &Error) -> &'static str {
    match err {
        Error::NonConvergence { .. } => "nonconverged",
        Error::Divergence { .. } => "diverged",
        _ => "error",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvRow {
    pub method: Method,
    pub eps: f64,
    pub h: f64,
    pub err_z: f64,
    pub err_zt: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub method: Method,
    pub metric: &'static str,
    pub eps_or_h: f64,
    pub slope: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub method: Method,
    pub eps: f64,
    pub h: f64,
    pub t: f64,
    pub err_h: f64,
    pub status: String,
}

/// Per-run summary of an energy series.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySummary {
    pub method: Method,
    pub eps: f64,
    pub h: f64,
    /// Mean error over the final quarter divided by the mean over the first.
    pub drift: f64,
    pub max_err: f64,
    pub final_err: f64,
    /// Largest error during the first ten fast periods 2πε.
    pub early_max_err: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyRow {
    pub method: Method,
    pub eps: f64,
    pub h: f64,
    pub err: f64,
    pub wall_seconds: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyReport {
    pub conv: Vec<ConvRow>,
    pub fits: Vec<FitRow>,
    pub energy: Vec<EnergyRow>,
    pub energy_summary: Vec<EnergySummary>,
    pub efficiency: Vec<EfficiencyRow>,
    pub points: usize,
    pub failed_points: usize,
}

impl StudyReport {
    pub fn all_failed(&self) -> bool {
        self.points > 0 && self.failed_points == self.points
    }
}

/// Least-squares slope and r² of log y against log x.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((slope, r2))
}

/// Drift statistic, maxima and early-window maximum of an error series.
pub fn summarize_energy(times: &[f64], errs: &[f64], eps: f64) -> (f64, f64, f64, f64) {
    let n = errs.len();
    let q = (n / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let drift = if n == 0 {
        f64::NAN
    } else {
        mean(&errs[n - q..]) / mean(&errs[..q])
    };
    let max_err = errs.iter().copied().fold(0.0, f64::max);
    let final_err = errs.last().copied().unwrap_or(f64::NAN);
    let window = 10.0 * 2.0 * PI * eps;
    let early = times
        .iter()
        .zip(errs)
        .filter(|(t, _)| **t <= window + 1e-12)
        .map(|(_, e)| *e)
        .fold(0.0, f64::max);
    (drift, max_err, final_err, early)
}

fn references(plan: &ExperimentPlan, pool: &rayon::ThreadPool) -> Vec<Result<RunResult>> {
    let h_min = plan.h.iter().copied().fold(f64::INFINITY, f64::min);
    pool.install(|| {
        plan.eps
            .par_iter()
            .map(|&eps| {
                let cfg = plan.run_config(Method::S3o4, eps, h_min);
                let cfg = RunConfig {
                    dump_tau: false,
                    ..cfg
                }
                .final_only();
                reference_solution(&plan.spec(eps), &cfg)
            })
            .collect()
    })
}

fn sweep_points(plan: &ExperimentPlan) -> Vec<(Method, usize, f64)> {
    let mut pts = Vec::new();
    for &m in &plan.methods {
        for ie in 0..plan.eps.len() {
            for &h in &plan.h {
                pts.push((m, ie, h));
            }
        }
    }
    pts
}

/// errZ, errZt rows for every (method, ε, h) against per-ε references.
pub fn convergence_rows(plan: &ExperimentPlan, pool: &rayon::ThreadPool) -> Result<Vec<ConvRow>> {
    plan.validate()?;
    let refs = references(plan, pool);
    let pts = sweep_points(plan);
    let rows = pool.install(|| {
        pts.par_iter()
            .map(|&(method, ie, h)| {
                let eps = plan.eps[ie];
                let fail = |status: &str| ConvRow {
                    method,
                    eps,
                    h,
                    err_z: f64::NAN,
                    err_zt: f64::NAN,
                    status: status.to_string(),
                };
                let reference = match &refs[ie] {
                    Ok(r) => r,
                    Err(e) => return fail(&format!("reference-{}", status_of(e))),
                };
                let cfg = plan.run_config(method, eps, h);
                let t_end = cfg.t_end;
                match solve(&plan.spec(eps), &cfg.final_only())
                    .and_then(|r| relative_errors(&r, reference, t_end))
                {
                    Ok((err_z, err_zt)) => ConvRow {
                        method,
                        eps,
                        h,
                        err_z,
                        err_zt,
                        status: "ok".into(),
                    },
                    Err(e) => fail(status_of(&e)),
                }
            })
            .collect()
    });
    Ok(rows)
}

fn conv_fits(rows: &[ConvRow], by_h: bool) -> Vec<FitRow> {
    // Group on (method, fixed parameter) keeping first-seen order.
    let mut order: Vec<(Method, u64)> = Vec::new();
    let mut groups: BTreeMap<(Method, u64), Vec<&ConvRow>> = BTreeMap::new();
    for r in rows {
        let fixed = if by_h { r.eps } else { r.h };
        let key = (r.method, fixed.to_bits());
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    let mut fits = Vec::new();
    for key in order {
        let group = &groups[&key];
        for metric in ["errZ", "errZt"] {
            let (xs, ys): (Vec<f64>, Vec<f64>) = group
                .iter()
                .filter(|r| r.status == "ok")
                .map(|r| {
                    let x = if by_h { r.h } else { r.eps };
                    let y = if metric == "errZ" { r.err_z } else { r.err_zt };
                    (x, y)
                })
                .filter(|(_, y)| *y >= REFERENCE_FLOOR)
                .unzip();
            let (slope, r2) = fit_loglog(&xs, &ys).unwrap_or((f64::NAN, f64::NAN));
            fits.push(FitRow {
                method: key.0,
                metric,
                eps_or_h: f64::from_bits(key.1),
                slope,
                r2,
            });
        }
    }
    fits
}

fn conv_csv(rows: &[ConvRow]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    (
        vec!["method", "eps", "h", "errZ", "errZt", "status"],
        rows.iter()
            .map(|r| {
                vec![
                    r.method.to_string(),
                    fmt_float(r.eps),
                    fmt_float(r.h),
                    fmt_float(r.err_z),
                    fmt_float(r.err_zt),
                    r.status.clone(),
                ]
            })
            .collect(),
    )
}

fn fit_csv(fits: &[FitRow]) -> (Vec<&'static str>, Vec<Vec<String>>) {
    (
        vec!["method", "metric", "eps_or_h", "slope", "r2"],
        fits.iter()
            .map(|f| {
                vec![
                    f.method.to_string(),
                    f.metric.to_string(),
                    fmt_float(f.eps_or_h),
                    fmt_float(f.slope),
                    fmt_float(f.r2),
                ]
            })
            .collect(),
    )
}

fn write_pair(
    dir: &Path,
    stem: &str,
    main: (Vec<&str>, Vec<Vec<String>>),
    fit: (Vec<&str>, Vec<Vec<String>>),
    fit_suffix: &str,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join(format!("{stem}.csv")), &main.0, &main.1)?;
    write_csv(
        &dir.join(format!("{stem}.{fit_suffix}.csv")),
        &fit.0,
        &fit.1,
    )
}

fn conv_report(rows: Vec<ConvRow>, by_h: bool) -> StudyReport {
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    StudyReport {
        fits: conv_fits(&rows, by_h),
        points: rows.len(),
        failed_points: failed,
        conv: rows,
        ..Default::default()
    }
}

/// errZ/errZt against h at t̃ = 1, with log-log slopes per (method, ε).
pub fn run_convergence_h(plan: &ExperimentPlan) -> Result<StudyReport> {
    let pool = worker_pool()?;
    let report = conv_report(convergence_rows(plan, &pool)?, true);
    write_pair(
        &plan.out,
        "conv-h",
        conv_csv(&report.conv),
        fit_csv(&report.fits),
        "fit",
    )?;
    Ok(report)
}

/// The same errors with ε on the abscissa, slopes per (method, h).
pub fn run_convergence_eps(plan: &ExperimentPlan) -> Result<StudyReport> {
    let pool = worker_pool()?;
    let report = conv_report(convergence_rows(plan, &pool)?, false);
    write_pair(
        &plan.out,
        "conv-eps",
        conv_csv(&report.conv),
        fit_csv(&report.fits),
        "fit",
    )?;
    Ok(report)
}

/// Energy error series and their summaries.
pub fn energy_runs(
    plan: &ExperimentPlan,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<EnergyRow>, Vec<EnergySummary>, Vec<RunResult>)> {
    plan.validate()?;
    let pts = sweep_points(plan);
    let runs: Vec<(RunResult, Option<Error>)> = pool.install(|| {
        pts.par_iter()
            .map(|&(m, ie, h)| {
                let eps = plan.eps[ie];
                solve_partial(&plan.spec(eps), &plan.run_config(m, eps, h))
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut results = Vec::new();
    for ((m, ie, h), (run, failure)) in pts.into_iter().zip(runs) {
        let eps = plan.eps[ie];
        let errs = run.energy_errors();
        for (&t, &e) in run.times.iter().zip(&errs) {
            rows.push(EnergyRow {
                method: m,
                eps,
                h,
                t,
                err_h: e,
                status: "ok".into(),
            });
        }
        let (mut drift, mut max_err, mut final_err, early) =
            summarize_energy(&run.times, &errs, eps);
        let status = match &failure {
            None => "ok".to_string(),
            Some(e) => {
                // A blown-up run has unbounded energy error from the failure on.
                let t_fail = match e {
                    Error::NonConvergence { step: Some(n), .. }
                    | Error::Divergence { step: Some(n), .. } => *n as f64 * h,
                    _ => f64::NAN,
                };
                rows.push(EnergyRow {
                    method: m,
                    eps,
                    h,
                    t: t_fail,
                    err_h: f64::INFINITY,
                    status: status_of(e).into(),
                });
                drift = f64::INFINITY;
                max_err = f64::INFINITY;
                final_err = f64::INFINITY;
                status_of(e).to_string()
            }
        };
        summaries.push(EnergySummary {
            method: m,
            eps,
            h,
            drift,
            max_err,
            final_err,
            early_max_err: early,
            status,
        });
        results.push(run);
    }
    Ok((rows, summaries, results))
}

pub fn run_energy(plan: &ExperimentPlan) -> Result<StudyReport> {
    let pool = worker_pool()?;
    let (rows, summaries, _) = energy_runs(plan, &pool)?;
    let main = (
        vec!["method", "eps", "h", "t", "errH", "status"],
        rows.iter()
            .map(|r| {
                vec![
                    r.method.to_string(),
                    fmt_float(r.eps),
                    fmt_float(r.h),
                    fmt_float(r.t),
                    fmt_float(r.err_h),
                    r.status.clone(),
                ]
            })
            .collect(),
    );
    let drift = (
        vec![
            "method",
            "eps",
            "h",
            "drift",
            "max_errH",
            "early_max_errH",
            "final_errH",
            "status",
        ],
        summaries
            .iter()
            .map(|s| {
                vec![
                    s.method.to_string(),
                    fmt_float(s.eps),
                    fmt_float(s.h),
                    fmt_float(s.drift),
                    fmt_float(s.max_err),
                    fmt_float(s.early_max_err),
                    fmt_float(s.final_err),
                    s.status.clone(),
                ]
            })
            .collect(),
    );
    write_pair(&plan.out, "energy", main, drift, "drift")?;
    let failed = summaries.iter().filter(|s| s.status != "ok").count();
    Ok(StudyReport {
        points: summaries.len(),
        failed_points: failed,
        energy: rows,
        energy_summary: summaries,
        ..Default::default()
    })
}

/// err = errZ + errZt against wall time; reference time is not counted.
pub fn run_efficiency(plan: &ExperimentPlan) -> Result<StudyReport> {
    plan.validate()?;
    let pool = worker_pool()?;
    let mut rows = Vec::new();
    if !plan.methods.is_empty() {
        let refs = references(plan, &pool);
        let pts = sweep_points(plan);
        // Timed runs go one at a time so they do not compete for cores.
        for (method, ie, h) in pts {
            let eps = plan.eps[ie];
            let cfg = plan.run_config(method, eps, h);
            let t_end = cfg.t_end;
            let row = match (&refs[ie], solve(&plan.spec(eps), &cfg.final_only())) {
                (Err(e), _) => EfficiencyRow {
                    method,
                    eps,
                    h,
                    err: f64::NAN,
                    wall_seconds: f64::NAN,
                    status: format!("reference-{}", status_of(e)),
                },
                (Ok(_), Err(e)) => EfficiencyRow {
                    method,
                    eps,
                    h,
                    err: f64::NAN,
                    wall_seconds: f64::NAN,
                    status: status_of(&e).into(),
                },
                (Ok(reference), Ok(run)) => match relative_errors(&run, reference, t_end) {
                    Ok((a, b)) => EfficiencyRow {
                        method,
                        eps,
                        h,
                        err: a + b,
                        wall_seconds: run.wall_seconds,
                        status: "ok".into(),
                    },
                    Err(e) => EfficiencyRow {
                        method,
                        eps,
                        h,
                        err: f64::NAN,
                        wall_seconds: run.wall_seconds,
                        status: status_of(&e).into(),
                    },
                },
            };
            rows.push(row);
        }
    }
    fs::create_dir_all(&plan.out)?;
    write_csv(
        &plan.out.join("efficiency.csv"),
        &["method", "eps", "h", "err", "wall_seconds", "status"],
        &rows
            .iter()
            .map(|r| {
                vec![
                    r.method.to_string(),
                    fmt_float(r.eps),
                    fmt_float(r.h),
                    fmt_float(r.err),
                    fmt_float(r.wall_seconds),
                    r.status.clone(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    Ok(StudyReport {
        points: rows.len(),
        failed_points: failed,
        efficiency: rows,
        ..Default::default()
    })
}

/// Write raw τ-coefficients of every run in `results` under `dir`.
pub fn dump_tau(dir: &Path, results: &[RunResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in results.iter().filter(|r| !r.tau_dumps.is_empty()) {
        let name = format!(
            "{}_eps{}_h{}.csv",
            r.method,
            fmt_float(r.eps),
            fmt_float(r.h)
        );
        let mut rows = Vec::new();
        for (t, z) in r.times.iter().zip(&r.tau_dumps) {
            for l in 0..z.width() {
                for k in z.modes() {
                    let c = z.get(k, l);
                    rows.push(vec![
                        fmt_float(*t),
                        k.to_string(),
                        l.to_string(),
                        fmt_float(c.re),
                        fmt_float(c.im),
                    ]);
                }
            }
        }
        write_csv(&dir.join(name), &["t", "k", "slot", "re", "im"], &rows)?;
    }
    Ok(())
}

/// Dispatch a plan to its study.
pub fn run_study(plan: &ExperimentPlan) -> Result<StudyReport> {
    match plan.study {
        Study::ConvH => run_convergence_h(plan),
        Study::ConvEps => run_convergence_eps(plan),
        Study::Energy => {
            let report = run_energy(plan)?;
            if plan.dump_tau {
                let pool = worker_pool()?;
                let (_, _, results) = energy_runs(plan, &pool)?;
                dump_tau(&plan.out.join("energy_tau"), &results)?;
            }
            Ok(report)
        }
        Study::Efficiency => run_efficiency(plan),
        Study::Check => Err(Error::Config("the check study is run by run_checks".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = [0.5, 0.25, 0.125, 0.0625];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        let (s, r2) = fit_loglog(&xs, &ys).unwrap();
        assert!((s - 4.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
        assert!(fit_loglog(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn energy_summary_statistics() {
        let times: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let errs = [0.0, 2.0, 1.0, 1.0, 1.0, 1.0, 4.0, 4.0];
        let (drift, max, fin, early) = summarize_energy(&times, &errs, 0.05);
        assert_eq!(drift, 4.0);
        assert_eq!(max, 4.0);
        assert_eq!(fin, 4.0);
        assert_eq!(early, 2.0);
    }

    #[test]
    fn fits_group_by_method_and_parameter() {
        let mk = |m, eps, h: f64| ConvRow {
            method: m,
            eps,
            h,
            err_z: h * h,
            err_zt: h,
            status: "ok".into(),
        };
        let rows = vec![
            mk(Method::S2o2, 0.5, 0.1),
            mk(Method::S2o2, 0.5, 0.05),
            mk(Method::S2o2, 0.5, 0.025),
        ];
        let fits = conv_fits(&rows, true);
        assert_eq!(fits.len(), 2);
        assert!((fits[0].slope - 2.0).abs() < 1e-12);
        assert!((fits[1].slope - 1.0).abs() < 1e-12);
    }
}
