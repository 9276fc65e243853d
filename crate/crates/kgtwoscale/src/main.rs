use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kgtwoscale::harness::{run_checks, run_study, CheckOptions, ExperimentPlan, Study};
use kgtwoscale::Result;

/// Two-scale exponential integrators for the nonrelativistic Klein–Gordon
/// equation: convergence, energy and efficiency studies.
#[derive(Debug, Parser)]
#[command(name = "kgtwoscale", version)]
struct Cli {
    /// conv-h, conv-eps, energy, efficiency or check.
    #[arg(long)]
    study: Option<String>,
    /// s2o2, s3o4, nsm or isv; repeat or comma-separate.
    #[arg(long = "method", value_delimiter = ',')]
    methods: Vec<String>,
    /// ε values, e.g. 1/2,1/4.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<String>,
    /// Step sizes in rescaled time.
    #[arg(long, value_delimiter = ',')]
    h: Vec<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ntau: Option<usize>,
    #[arg(long)]
    t_end: Option<String>,
    #[arg(long)]
    fp_tol: Option<String>,
    #[arg(long)]
    fp_max_iter: Option<usize>,
    #[arg(long)]
    kappa_trunc: Option<usize>,
    #[arg(long)]
    freq_exponent: Option<u32>,
    /// periodic or exact.
    #[arg(long)]
    frequency_mode: Option<String>,
    #[arg(long)]
    output_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the raw τ-coefficients.
    #[arg(long)]
    dump_tau: bool,
    /// File of `key = value` lines; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, hide = true)]
    debug_corrupt_b2: Option<f64>,
}

fn build_plan(cli: &Cli) -> Result<ExperimentPlan> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    // The study decides the defaults, so it is settled before anything else.
    let study: Study = match &cli.study {
        Some(s) => s.parse()?,
        None => text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "study")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(Study::ConvH),
    };
    let mut plan = ExperimentPlan::new(study);
    plan.apply_config_text(&text)?;
    plan.study = study;
    let joined = |v: &[String]| v.join(",");
    let mut set = |k: &str, v: Option<String>| -> Result<()> {
        match v {
            Some(v) => plan.apply(k, &v),
            None => Ok(()),
        }
    };
    set(
        "method",
        (!cli.methods.is_empty()).then(|| joined(&cli.methods)),
    )?;
    set("eps", (!cli.eps.is_empty()).then(|| joined(&cli.eps)))?;
    set("h", (!cli.h.is_empty()).then(|| joined(&cli.h)))?;
    set("nx", cli.nx.map(|v| v.to_string()))?;
    set("ntau", cli.ntau.map(|v| v.to_string()))?;
    set("t_end", cli.t_end.clone())?;
    set("fp_tol", cli.fp_tol.clone())?;
    set("fp_max_iter", cli.fp_max_iter.map(|v| v.to_string()))?;
    set("kappa_trunc", cli.kappa_trunc.map(|v| v.to_string()))?;
    set("freq_exponent", cli.freq_exponent.map(|v| v.to_string()))?;
    set("frequency_mode", cli.frequency_mode.clone())?;
    set("output_every", cli.output_every.map(|v| v.to_string()))?;
    if let Some(out) = &cli.out {
        plan.out = out.clone();
    }
    if cli.dump_tau {
        plan.dump_tau = true;
    }
    plan.validate()?;
    Ok(plan)
}

fn run(cli: &Cli) -> Result<u8> {
    let plan = build_plan(cli)?;
    if plan.study == Study::Check {
        let report = run_checks(CheckOptions {
            corrupt_b2: cli.debug_corrupt_b2,
        })?;
        print!("{}", report.render());
        return Ok(if report.passed() { 0 } else { 1 });
    }
    let report = run_study(&plan)?;
    eprintln!(
        "{}: {} points, {} failed, output in {}",
        plan.study,
        report.points,
        report.failed_points,
        plan.out.display()
    );
    Ok(if report.all_failed() { 2 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
