//! Experiment plans: defaults per study, flat `key=value` config files and
//! command-line overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::solver::{Method, RunConfig};
use crate::spectral::FrequencyMode;
use crate::twoscale::{Nonlinearity, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    ConvH,
    ConvEps,
    Energy,
    Efficiency,
    Check,
}

impl Study {
    pub fn as_str(self) -> &'static str {
        match self {
            Study::ConvH => "conv-h",
            Study::ConvEps => "conv-eps",
            Study::Energy => "energy",
            Study::Efficiency => "efficiency",
            Study::Check => "check",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Study::ConvH,
            Study::ConvEps,
            Study::Energy,
            Study::Efficiency,
            Study::Check,
        ]
        .into_iter()
        .find(|k| k.as_str() == s.trim())
        .ok_or_else(|| Error::Config(format!("unknown study '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub study: Study,
    pub methods: Vec<Method>,
    pub eps: Vec<f64>,
    pub h: Vec<f64>,
    /// Horizon in t̃; `None` selects the study default.
    pub t_end: Option<f64>,
    pub n_x: usize,
    pub n_tau: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub kappa_trunc: usize,
    pub output_every: usize,
    pub freq_exponent: u32,
    pub frequency_mode: FrequencyMode,
    pub lambda: f64,
    pub nonlinearity: Nonlinearity,
    pub out: PathBuf,
    pub dump_tau: bool,
}

fn dyadic(ks: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    ks.map(|k| 0.5f64.powi(k)).collect()
}

impl ExperimentPlan {
    pub fn new(study: Study) -> Self {
        let (methods, h) = match study {
            Study::Energy => (vec![Method::S2o2, Method::S3o4, Method::Nsm], vec![0.2]),
            Study::Efficiency => (Method::ALL.to_vec(), dyadic(6..=10)),
            _ => (vec![Method::S2o2, Method::S3o4], dyadic(6..=10)),
        };
        Self {
            study,
            methods,
            eps: dyadic(1..=5),
            h,
            t_end: None,
            n_x: 32,
            n_tau: 64,
            fp_tol: 1e-12,
            fp_max_iter: 200,
            kappa_trunc: 3,
            output_every: 1,
            freq_exponent: 1,
            frequency_mode: FrequencyMode::Periodic,
            lambda: -1.0,
            nonlinearity: Nonlinearity::CubicModulus,
            out: PathBuf::from("results"),
            dump_tau: false,
        }
    }

    /// Horizon for a given ε.
    pub fn horizon(&self, eps: f64) -> f64 {
        self.t_end.unwrap_or(match self.study {
            Study::Energy => 1000.0,
            Study::Efficiency => 1.0 / eps,
            _ => 1.0,
        })
    }

    pub fn spec(&self, eps: f64) -> ProblemSpec {
        ProblemSpec::new(eps)
            .with_lambda(self.lambda)
            .with_nonlinearity(self.nonlinearity)
            .with_freq_exponent(self.freq_exponent)
            .with_frequency_mode(self.frequency_mode)
    }

    pub fn run_config(&self, method: Method, eps: f64, h: f64) -> RunConfig {
        RunConfig {
            h,
            t_end: self.horizon(eps),
            n_x: self.n_x,
            n_tau: self.n_tau,
            method,
            fp_tol: self.fp_tol,
            fp_max_iter: self.fp_max_iter,
            kappa_trunc: self.kappa_trunc,
            output_every: self.output_every,
            dump_tau: self.dump_tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.study != Study::Check && (self.eps.is_empty() || self.h.is_empty()) {
            return Err(Error::Config("eps and h lists must be non-empty".into()));
        }
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::Config("every eps must lie in (0, 1]".into()));
        }
        if self.h.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Config("every h must be positive".into()));
        }
        Ok(())
    }

    /// Set one option from its textual form. Keys accept `-` or `_`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {what}"));
        match key.as_str() {
            "study" => self.study = value.parse()?,
            "method" | "methods" => {
                self.methods = split(value).map(str::parse).collect::<Result<_>>()?;
            }
            "eps" => self.eps = split(value).map(parse_number).collect::<Result<_>>()?,
            "h" => self.h = split(value).map(parse_number).collect::<Result<_>>()?,
            "t_end" => self.t_end = Some(parse_number(value)?),
            "nx" | "n_x" => self.n_x = value.parse().map_err(|_| bad("nx"))?,
            "ntau" | "n_tau" => self.n_tau = value.parse().map_err(|_| bad("ntau"))?,
            "fp_tol" => self.fp_tol = parse_number(value)?,
            "fp_max_iter" => self.fp_max_iter = value.parse().map_err(|_| bad("fp_max_iter"))?,
            "kappa_trunc" => self.kappa_trunc = value.parse().map_err(|_| bad("kappa_trunc"))?,
            "output_every" => self.output_every = value.parse().map_err(|_| bad("output_every"))?,
            "freq_exponent" => {
                self.freq_exponent = value.parse().map_err(|_| bad("freq_exponent"))?
            }
            "frequency_mode" => {
                self.frequency_mode = match value {
                    "periodic" => FrequencyMode::Periodic,
                    "exact" => FrequencyMode::Exact,
                    _ => return Err(bad("frequency_mode")),
                }
            }
            "lambda" => self.lambda = parse_number(value)?,
            "nonlinearity" => {
                self.nonlinearity = match value {
                    "cubic_modulus" => Nonlinearity::CubicModulus,
                    "cubic_real" => Nonlinearity::CubicReal,
                    _ => return Err(bad("nonlinearity")),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "dump_tau" => {
                self.dump_tau = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("dump_tau")),
                }
            }
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Apply every `key = value` line of a config file. `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.apply(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }
}

fn split(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// A decimal number or a fraction such as `1/8`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse number '{s}'"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let p = ExperimentPlan::new(Study::ConvH);
        assert_eq!(p.eps, vec![0.5, 0.25, 0.125, 0.0625, 0.03125]);
        assert_eq!(p.h.len(), 5);
        assert_eq!(p.h[0], 1.0 / 64.0);
        assert_eq!(p.horizon(0.5), 1.0);
        let e = ExperimentPlan::new(Study::Energy);
        assert_eq!(e.h, vec![0.2]);
        assert_eq!(e.horizon(0.125), 1000.0);
        assert_eq!(ExperimentPlan::new(Study::Efficiency).horizon(0.125), 8.0);
    }

    #[test]
    fn config_text() {
        let mut p = ExperimentPlan::new(Study::ConvH);
        p.apply_config_text(
            "# comment\nstudy = energy\nmethod = s2o2, nsm\neps = 1/8,1/16\nt-end = 50 # inline\ndump_tau=true\n",
        )
        .unwrap();
        assert_eq!(p.study, Study::Energy);
        assert_eq!(p.methods, vec![Method::S2o2, Method::Nsm]);
        assert_eq!(p.eps, vec![0.125, 0.0625]);
        assert_eq!(p.t_end, Some(50.0));
        assert!(p.dump_tau);
        assert!(p.apply_config_text("bogus = 1").is_err());
        assert!(p.apply_config_text("no equals sign").is_err());
        assert!(p.apply("nx", "abc").is_err());
    }
}
