//! Exponential Runge–Kutta tableaux with φ-function coefficients, and
//! residual checks for the symmetry and stiff order conditions.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::phi::phi;

pub type Coefficient = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

fn coef(f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Coefficient {
    Arc::new(f)
}

#[derive(Clone)]
pub struct Tableau {
    name: String,
    c: Vec<f64>,
    // None marks an identically zero coefficient.
    a: Vec<Vec<Option<Coefficient>>>,
    b: Vec<Coefficient>,
}

impl fmt::Debug for Tableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tableau")
            .field("name", &self.name)
            .field("c", &self.c)
            .finish_non_exhaustive()
    }
}

impl Tableau {
    pub fn new(
        name: impl Into<String>,
        c: Vec<f64>,
        a: Vec<Vec<Option<Coefficient>>>,
        b: Vec<Coefficient>,
    ) -> Self {
        let s = c.len();
        assert!(s > 0 && a.len() == s && b.len() == s && a.iter().all(|r| r.len() == s));
        Self {
            name: name.into(),
            c,
            a,
            b,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self, i: usize, rho: usize, z: Complex64) -> Complex64 {
        self.a[i][rho]
            .as_ref()
            .map_or(Complex64::new(0.0, 0.0), |f| f(z))
    }

    pub fn b(&self, rho: usize, z: Complex64) -> Complex64 {
        (self.b[rho])(z)
    }

    pub fn a_is_zero(&self, i: usize, rho: usize) -> bool {
        self.a[i][rho].is_none()
    }

    /// A stage with an identically zero row needs no solve.
    pub fn is_explicit_stage(&self, i: usize) -> bool {
        self.a[i].iter().all(Option::is_none)
    }

    /// Add a constant to b̄_ρ. Used to check that the residual checks catch
    /// a corrupted tableau.
    pub fn perturb_b(&mut self, rho: usize, delta: f64) {
        let old = self.b[rho].clone();
        self.b[rho] = coef(move |z| old(z) + delta);
    }
}

/// S2O2: c = (0, 1).
pub fn tableau_s2o2() -> Tableau {
    let b1 = coef(|z| phi(1, z) - phi(2, z));
    let b2 = coef(|z| phi(2, z));
    Tableau::new(
        "s2o2",
        vec![0.0, 1.0],
        vec![vec![None, None], vec![Some(b1.clone()), Some(b2.clone())]],
        vec![b1, b2],
    )
}

/// Symmetric two-stage family with nodes (c₁, 1 − c₁), c₁ ≠ ½.
pub fn tableau_two_stage(c1: f64) -> Tableau {
    let c2 = 1.0 - c1;
    let d = c1 - c2;
    let b1 = coef(move |z| (-c2 * phi(1, z) + phi(2, z)) / d);
    let b2 = coef(move |z| (c1 * phi(1, z) - phi(2, z)) / d);
    let a21 = coef(move |z| c2 * c2 * (-phi(1, c2 * z) + phi(2, c2 * z)) / d);
    let a12 = {
        let (a21, b1) = (a21.clone(), b1.clone());
        coef(move |z| -a21(-z) + phi(0, c1 * z) * b1(-z))
    };
    let a11 = {
        let a12 = a12.clone();
        coef(move |z| -a12(z) + c1 * phi(1, c1 * z))
    };
    let a22 = {
        let a21 = a21.clone();
        coef(move |z| -a21(z) + c2 * phi(1, c2 * z))
    };
    Tableau::new(
        format!("two-stage(c1={c1})"),
        vec![c1, c2],
        vec![vec![Some(a11), Some(a12)], vec![Some(a21), Some(a22)]],
        vec![b1, b2],
    )
}

/// S3O4: c = (1, ½, 0).
pub fn tableau_s3o4() -> Tableau {
    let b1 = coef(|z| 4.0 * phi(3, z) - phi(2, z));
    let b2 = coef(|z| 4.0 * phi(2, z) - 8.0 * phi(3, z));
    let b3 = coef(|z| phi(1, z) - 3.0 * phi(2, z) + 4.0 * phi(3, z));
    let a21 = coef(|z| -0.25 * phi(2, 0.5 * z) + 0.5 * phi(3, 0.5 * z));
    let a22 = coef(|z| phi(2, 0.5 * z) - phi(3, 0.5 * z));
    let a23 = coef(|z| 0.5 * phi(1, 0.5 * z) - 0.75 * phi(2, 0.5 * z) + 0.5 * phi(3, 0.5 * z));
    Tableau::new(
        "s3o4",
        vec![1.0, 0.5, 0.0],
        vec![
            vec![Some(b1.clone()), Some(b2.clone()), Some(b3.clone())],
            vec![Some(a21), Some(a22), Some(a23)],
            vec![None, None, None],
        ],
        vec![b1, b2, b3],
    )
}

/// One-stage midpoint exponential integrator (not symmetric).
pub fn tableau_nsm() -> Tableau {
    Tableau::new(
        "nsm",
        vec![0.5],
        vec![vec![Some(coef(|_| Complex64::new(0.5, 0.0)))]],
        vec![coef(|z| phi(1, z))],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymmetryResiduals {
    pub nodes: f64,
    pub weights: f64,
    pub coefficients: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.nodes.max(self.weights).max(self.coefficients)
    }
}

/// Suprema over `z_samples` of the three symmetry conditions.
pub fn check_symmetry(tab: &Tableau, z_samples: &[Complex64]) -> SymmetryResiduals {
    let s = tab.stages();
    let c = tab.c();
    let nodes = (0..s)
        .map(|i| (c[i] - (1.0 - c[s - 1 - i])).abs())
        .fold(0.0, f64::max);
    let mut weights = 0.0f64;
    let mut coefficients = 0.0f64;
    for &z in z_samples {
        for rho in 0..s {
            let r = tab.b(rho, z) - z.exp() * tab.b(s - 1 - rho, -z);
            weights = weights.max(r.norm());
        }
        for i in 0..s {
            for rho in 0..s {
                let r = tab.a(i, rho, z) - (c[i] * z).exp() * tab.b(s - 1 - rho, -z)
                    + tab.a(s - 1 - i, s - 1 - rho, -z);
                coefficients = coefficients.max(r.norm());
            }
        }
    }
    SymmetryResiduals {
        nodes,
        weights,
        coefficients,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StiffOrderResiduals {
    /// sup_z |ψ_ρ(z)| for ρ = 1..=r (index ρ−1).
    pub psi: Vec<f64>,
    /// sup_z |ψ_{ρ,i}(z)| for ρ = 1..=r, indexed `[ρ−1][i]`.
    pub psi_stage: Vec<Vec<f64>>,
    /// |ψ_r(0)|, the weakened top-order condition.
    pub psi_top_at_zero: f64,
}

impl StiffOrderResiduals {
    /// Largest residual among the conditions a method of order `r` must
    /// satisfy: ψ_ρ for ρ < r, ψ_r(0), and ψ_{ρ,i} for ρ < r.
    pub fn order_conditions_max(&self) -> f64 {
        let r = self.psi.len();
        let below = self.psi[..r.saturating_sub(1)]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let stage = self.psi_stage[..r.saturating_sub(1)]
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max);
        below.max(stage).max(self.psi_top_at_zero)
    }
}

fn inv_factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc / k as f64)
}

fn psi(tab: &Tableau, rho: usize, z: Complex64) -> Complex64 {
    let f = inv_factorial(rho - 1);
    let sum: Complex64 = (0..tab.stages())
        .map(|i| tab.b(i, z) * tab.c()[i].powi(rho as i32 - 1) * f)
        .sum();
    phi(rho, z) - sum
}

fn psi_stage(tab: &Tableau, rho: usize, i: usize, z: Complex64) -> Complex64 {
    let c = tab.c();
    let f = inv_factorial(rho - 1);
    let sum: Complex64 = (0..tab.stages())
        .map(|k| tab.a(i, k, z) * c[k].powi(rho as i32 - 1) * f)
        .sum();
    phi(rho, c[i] * z) * c[i].powi(rho as i32) - sum
}

/// ψ_ρ and ψ_{ρ,i} residuals for ρ ≤ r over `z_samples`.
pub fn stiff_order_residuals(
    tab: &Tableau,
    r: usize,
    z_samples: &[Complex64],
) -> StiffOrderResiduals {
    let s = tab.stages();
    let mut out = StiffOrderResiduals {
        psi: vec![0.0; r],
        psi_stage: vec![vec![0.0; s]; r],
        psi_top_at_zero: 0.0,
    };
    for &z in z_samples {
        for rho in 1..=r {
            out.psi[rho - 1] = out.psi[rho - 1].max(psi(tab, rho, z).norm());
            for i in 0..s {
                let v = psi_stage(tab, rho, i, z).norm();
                out.psi_stage[rho - 1][i] = out.psi_stage[rho - 1][i].max(v);
            }
        }
    }
    if r > 0 {
        out.psi_top_at_zero = psi(tab, r, Complex64::new(0.0, 0.0)).norm();
    }
    out
}

/// z = iy with y log-spaced over [1e−3, y_max] (both signs) plus z = 0.
pub fn imaginary_samples(count: usize, y_max: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0)];
    let (lo, hi) = (1e-3f64.ln(), y_max.ln());
    for k in 0..count {
        let t = if count > 1 {
            k as f64 / (count - 1) as f64
        } else {
            0.0
        };
        let y = (lo + t * (hi - lo)).exp();
        out.push(Complex64::new(0.0, y));
        out.push(Complex64::new(0.0, -y));
    }
    out
}
