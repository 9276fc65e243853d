//! The two-scale nonlinearity G_τ, its derivatives, the Chapman–Enskog
//! corrections and the discrete nonlinearity Γ acting on τ-Fourier data.
//!
//! The filtered unknown X = [U; V] is stored in spatial Fourier space, U first.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{sup_norm, FrequencyMode, PhaseOperator, SpatialGrid, SpectralTransform};
use crate::taucalc::{
    tau_antiderivative as a_op, tau_project as pi_op, Collocation, TauField, TauTransform,
};

/// Pointwise nonlinearity f with its directional derivatives and potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nonlinearity {
    /// f(u) = |u|²u, H₁(u) = |u|⁴/2.
    #[default]
    CubicModulus,
    /// f(u) = u³, H₁(u) = u⁴/2 for real u.
    CubicReal,
}

impl Nonlinearity {
    pub fn value(self, u: Complex64) -> Complex64 {
        match self {
            Nonlinearity::CubicModulus => u * u.norm_sqr(),
            Nonlinearity::CubicReal => u * u * u,
        }
    }

    /// `f′(u)[w]`, treating u and ū as independent.
    pub fn derivative(self, u: Complex64, w: Complex64) -> Complex64 {
        match self {
            Nonlinearity::CubicModulus => 2.0 * u.norm_sqr() * w + u * u * w.conj(),
            Nonlinearity::CubicReal => 3.0 * u * u * w,
        }
    }

    /// f″(u)[w₁, w₂], symmetric in w₁, w₂.
    pub fn second_derivative(self, u: Complex64, w1: Complex64, w2: Complex64) -> Complex64 {
        match self {
            Nonlinearity::CubicModulus => {
                2.0 * (u.conj() * w1 * w2 + u * w1.conj() * w2 + u * w1 * w2.conj())
            }
            Nonlinearity::CubicReal => 6.0 * u * w1 * w2,
        }
    }

    /// Potential H₁ with f = ∂H₁/∂ū in the Wirtinger sense.
    pub fn potential(self, u: Complex64) -> f64 {
        match self {
            Nonlinearity::CubicModulus => 0.5 * u.norm_sqr() * u.norm_sqr(),
            Nonlinearity::CubicReal => 0.5 * u.re.powi(4),
        }
    }
}

pub type Profile = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub eps: f64,
    pub lambda: f64,
    pub nonlinearity: Nonlinearity,
    pub psi1: Profile,
    pub psi2: Profile,
    pub freq_exponent: u32,
    pub frequency_mode: FrequencyMode,
    /// Largest admissible sup-norm of the physical field before a run is
    /// declared divergent.
    pub divergence_bound: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("eps", &self.eps)
            .field("lambda", &self.lambda)
            .field("nonlinearity", &self.nonlinearity)
            .field("freq_exponent", &self.freq_exponent)
            .field("frequency_mode", &self.frequency_mode)
            .finish_non_exhaustive()
    }
}

/// ψ₁(x) = 3 sin x / (e^{x²/2} + e^{−x²/2}).
pub fn default_psi1(x: f64) -> Complex64 {
    let e = (0.5 * x * x).exp();
    Complex64::new(3.0 * x.sin() / (e + 1.0 / e), 0.0)
}

/// ψ₂(x) = 2 e^{−x²} / √π.
pub fn default_psi2(x: f64) -> Complex64 {
    Complex64::new(2.0 * (-x * x).exp() / PI.sqrt(), 0.0)
}

impl ProblemSpec {
    /// The standard test problem with cubic modulus nonlinearity, λ = −1.
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            lambda: -1.0,
            nonlinearity: Nonlinearity::CubicModulus,
            psi1: Arc::new(default_psi1),
            psi2: Arc::new(default_psi2),
            freq_exponent: 1,
            frequency_mode: FrequencyMode::Periodic,
            divergence_bound: 1e8,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_nonlinearity(mut self, f: Nonlinearity) -> Self {
        self.nonlinearity = f;
        self
    }

    pub fn with_freq_exponent(mut self, a: u32) -> Self {
        self.freq_exponent = a;
        self
    }

    pub fn with_frequency_mode(mut self, mode: FrequencyMode) -> Self {
        self.frequency_mode = mode;
        self
    }

    pub fn with_initial_data(mut self, psi1: Profile, psi2: Profile) -> Self {
        self.psi1 = psi1;
        self.psi2 = psi2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be finite"));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::invalid("divergence bound must be positive"));
        }
        Ok(())
    }

    pub fn phase_operator(&self, grid: &SpatialGrid) -> Result<PhaseOperator> {
        PhaseOperator::new(grid, self.eps, self.freq_exponent, self.frequency_mode)
    }
}

/// Filtered unknowns (U, V) in spatial Fourier space.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredState {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl FilteredState {
    pub fn zeros(n_x: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); n_x],
            v: vec![Complex64::new(0.0, 0.0); n_x],
        }
    }

    /// [U; V] as one vector of length 2n_x.
    pub fn stacked(&self) -> Vec<Complex64> {
        self.u.iter().chain(&self.v).copied().collect()
    }

    pub fn from_stacked(x: &[Complex64]) -> Self {
        let n = x.len() / 2;
        Self {
            u: x[..n].to_vec(),
            v: x[n..].to_vec(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &FilteredState) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .zip(other.u.iter().chain(&other.v))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Everything needed to evaluate G_τ, its derivatives and Γ for one problem
/// on one grid.
#[derive(Debug, Clone)]
pub struct TwoScaleModel {
    spec: ProblemSpec,
    grid: SpatialGrid,
    transform: SpectralTransform,
    phase: PhaseOperator,
    tau: TauTransform,
    // cos/sin(τ_j φ_m), row-major in j.
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

enum PointOp<'a> {
    Value,
    Jacobian(&'a [Complex64]),
    Bilinear(&'a [Complex64], &'a [Complex64]),
}

impl TwoScaleModel {
    pub fn new(spec: ProblemSpec, grid: SpatialGrid, n_tau: usize) -> Result<Self> {
        spec.validate()?;
        let phase = spec.phase_operator(&grid)?;
        let tau = TauTransform::new(n_tau)?;
        let n_x = grid.n_x();
        let mut cos_table = Vec::with_capacity(n_tau * n_x);
        let mut sin_table = Vec::with_capacity(n_tau * n_x);
        for j in 0..n_tau {
            let (c, s) = phase.cos_sin(2.0 * PI * j as f64 / n_tau as f64);
            cos_table.extend(c);
            sin_table.extend(s);
        }
        Ok(Self {
            transform: SpectralTransform::new(&grid),
            spec,
            grid,
            phase,
            tau,
            cos_table,
            sin_table,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn transform(&self) -> &SpectralTransform {
        &self.transform
    }

    pub fn phase(&self) -> &PhaseOperator {
        &self.phase
    }

    pub fn tau_transform(&self) -> &TauTransform {
        &self.tau
    }

    pub fn n_x(&self) -> usize {
        self.grid.n_x()
    }

    pub fn n_tau(&self) -> usize {
        self.tau.n_tau()
    }

    /// q₀ = Φψ̂₁, p₀ = ψ̂₂.
    pub fn initial_qp(&self) -> FilteredState {
        let psi1 = self
            .transform
            .forward(&self.grid.sample(|x| (self.spec.psi1)(x)));
        let psi2 = self
            .transform
            .forward(&self.grid.sample(|x| (self.spec.psi2)(x)));
        FilteredState {
            u: psi1
                .iter()
                .zip(self.phase.freqs())
                .map(|(c, f)| c * f)
                .collect(),
            v: psi2,
        }
    }

    /// Physical values of Φ⁻¹(cU + sV).
    fn to_physical(&self, c: &[f64], s: &[f64], x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_x();
        let mut g: Vec<Complex64> = (0..n)
            .map(|m| (x[m] * c[m] + x[n + m] * s[m]) / self.phase.freqs()[m])
            .collect();
        self.transform.inverse_in_place(&mut g);
        g
    }

    fn guard(&self, g: &[Complex64]) -> Result<()> {
        let norm = sup_norm(&g);
        if !norm.is_finite() || norm > self.spec.divergence_bound {
            return Err(Error::Divergence { step: None, norm });
        }
        Ok(())
    }

    /// One τ-point of G (scaled by `prefactor`), its Jacobian or its Hessian.
    fn point(
        &self,
        c: &[f64],
        s: &[f64],
        x: &[Complex64],
        op: PointOp<'_>,
        prefactor: f64,
        out: &mut [Complex64],
    ) -> Result<()> {
        let n = self.n_x();
        let f = self.spec.nonlinearity;
        let lam = -self.spec.lambda;
        let g = self.to_physical(c, s, x);
        self.guard(&g)?;
        let mut w: Vec<Complex64> = match op {
            PointOp::Value => g.iter().map(|&u| lam * f.value(u)).collect(),
            PointOp::Jacobian(d) => {
                let gd = self.to_physical(c, s, d);
                g.iter()
                    .zip(&gd)
                    .map(|(&u, &w)| lam * f.derivative(u, w))
                    .collect()
            }
            PointOp::Bilinear(d1, d2) => {
                let g1 = self.to_physical(c, s, d1);
                let g2 = self.to_physical(c, s, d2);
                g.iter()
                    .zip(g1.iter().zip(&g2))
                    .map(|(&u, (&w1, &w2))| lam * f.second_derivative(u, w1, w2))
                    .collect()
            }
        };
        self.transform.forward_in_place(&mut w);
        for m in 0..n {
            out[m] = -prefactor * s[m] * w[m];
            out[n + m] = prefactor * c[m] * w[m];
        }
        Ok(())
    }

    fn single(&self, tau: f64, x: &FilteredState, op: PointOp<'_>) -> Result<FilteredState> {
        let (c, s) = self.phase.cos_sin(tau);
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * self.n_x()];
        self.point(&c, &s, &x.stacked(), op, self.spec.eps, &mut out)?;
        Ok(FilteredState::from_stacked(&out))
    }

    /// G_τ(X) = ε[−sin(τΦ)ŵ; cos(τΦ)ŵ] with w = −λ f(Φ⁻¹(cos(τΦ)U + sin(τΦ)V)).
    pub fn g_tau(&self, x: &FilteredState, tau: f64) -> Result<FilteredState> {
        self.single(tau, x, PointOp::Value)
    }

    /// ∂_X G_τ(X)·W.
    pub fn g_tau_jacvec(
        &self,
        x: &FilteredState,
        tau: f64,
        w: &FilteredState,
    ) -> Result<FilteredState> {
        let w = w.stacked();
        self.single(tau, x, PointOp::Jacobian(&w))
    }

    /// ∂²_X G_τ(X)(W₁, W₂).
    pub fn g_tau_bilinear(
        &self,
        x: &FilteredState,
        tau: f64,
        w1: &FilteredState,
        w2: &FilteredState,
    ) -> Result<FilteredState> {
        let (w1, w2) = (w1.stacked(), w2.stacked());
        self.single(tau, x, PointOp::Bilinear(&w1, &w2))
    }

    fn collocated(
        &self,
        x: &Collocation,
        dirs: &[&Collocation],
        prefactor: f64,
    ) -> Result<Collocation> {
        let n = self.n_x();
        let mut out = Collocation::zeros(x.n_tau, x.width);
        for j in 0..x.n_tau {
            let c = &self.cos_table[j * n..(j + 1) * n];
            let s = &self.sin_table[j * n..(j + 1) * n];
            let op = match dirs {
                [] => PointOp::Value,
                [d] => PointOp::Jacobian(d.point(j)),
                [d1, d2] => PointOp::Bilinear(d1.point(j), d2.point(j)),
                _ => unreachable!("at most two directions"),
            };
            self.point(c, s, x.point(j), op, prefactor, out.point_mut(j))?;
        }
        Ok(out)
    }

    fn check_field(&self, z: &TauField) -> Result<()> {
        if z.n_tau() != self.n_tau() || z.width() != 2 * self.n_x() {
            return Err(Error::invalid(format!(
                "TauField shape ({}, {}) does not match model ({}, {})",
                z.n_tau(),
                z.width(),
                self.n_tau(),
                2 * self.n_x()
            )));
        }
        Ok(())
    }

    /// Γ(Z): the ε-stripped two-scale nonlinearity sampled at τ_j and
    /// transformed back to τ-modes.
    pub fn gamma_eval(&self, z: &TauField) -> Result<TauField> {
        self.check_field(z)?;
        let zc = self.tau.to_collocation(z)?;
        let out = self.collocated(&zc, &[], 1.0)?;
        self.tau.from_collocation(&out)
    }

    /// Chapman–Enskog correction κ_order(τ, X̲) for a τ-independent X̲.
    pub fn kappa(&self, order: usize, xbar: &FilteredState) -> Result<TauField> {
        if !(1..=3).contains(&order) {
            return Err(Error::invalid(format!(
                "kappa order must be 1, 2 or 3, got {order}"
            )));
        }
        Ok(self.kappas(xbar, order)?.pop().expect("non-empty"))
    }

    /// κ₁..κ_upto, sharing the evaluation of common terms.
    pub fn kappas(&self, xbar: &FilteredState, upto: usize) -> Result<Vec<TauField>> {
        let n_tau = self.n_tau();
        let eps = self.spec.eps;
        let xc = self
            .tau
            .to_collocation(&TauField::constant(n_tau, &xbar.stacked()))?;
        let g = self
            .tau
            .from_collocation(&self.collocated(&xc, &[], eps)?)?;
        let jac = |w: &TauField| -> Result<TauField> {
            let wc = self.tau.to_collocation(w)?;
            self.tau
                .from_collocation(&self.collocated(&xc, &[&wc], eps)?)
        };
        let bil = |w1: &TauField, w2: &TauField| -> Result<TauField> {
            let c1 = self.tau.to_collocation(w1)?;
            let c2 = self.tau.to_collocation(w2)?;
            self.tau
                .from_collocation(&self.collocated(&xc, &[&c1, &c2], eps)?)
        };
        let a2 = |f: &TauField| a_op(&a_op(f));
        let a3 = |f: &TauField| a_op(&a_op(&a_op(f)));

        let ag = a_op(&g);
        let pg = pi_op(&g);
        let mut out = vec![ag.clone()];
        if upto >= 2 {
            let j_ag = jac(&ag)?;
            let j_pg = jac(&pg)?;
            out.push(&a_op(&j_ag) - &a2(&j_pg));
            if upto >= 3 {
                let t1 = a_op(&jac(&a_op(&j_ag))?);
                let t2 = a_op(&jac(&a2(&j_pg))?);
                let t3 = a_op(&bil(&ag, &ag)?);
                let t4 = a2(&bil(&pg, &ag)?);
                let t5 = a2(&jac(&a_op(&j_pg))?);
                let t6 = a3(&bil(&pg, &pg)?);
                let t7 = a3(&jac(&pi_op(&j_pg))?);
                let t8 = a2(&jac(&pi_op(&j_ag))?);
                let mut k3 = &t1 - &t2;
                k3.axpy(Complex64::new(0.5, 0.0), &t3);
                k3 = &k3 - &t4;
                k3 = &k3 - &t5;
                k3 = &k3 + &t6;
                k3 = &k3 + &t7;
                k3 = &k3 - &t8;
                out.push(k3);
            }
        }
        Ok(out)
    }

    /// Z₀(τ) = X̲ + Σ_{j ≤ trunc} ε^j κ_j(τ, X̲) with X̲ = [q₀; p₀].
    pub fn prepared_initial_data(&self, trunc: usize) -> Result<TauField> {
        if trunc > 3 {
            return Err(Error::invalid(format!(
                "kappa truncation must be ≤ 3, got {trunc}"
            )));
        }
        let xbar = self.initial_qp();
        let mut z = TauField::constant(self.n_tau(), &xbar.stacked());
        if trunc > 0 {
            let eps = self.spec.eps;
            for (j, k) in self.kappas(&xbar, trunc)?.iter().enumerate() {
                z.axpy(Complex64::new(eps.powi(j as i32 + 1), 0.0), k);
            }
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(eps: f64, n_x: usize, n_tau: usize) -> TwoScaleModel {
        TwoScaleModel::new(ProblemSpec::new(eps), SpatialGrid::new(n_x).unwrap(), n_tau).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, n: usize) -> FilteredState {
        // Smooth: coefficients decay with |k|.
        let g = SpatialGrid::new(n).unwrap();
        let mut mk = || -> Vec<Complex64> {
            g.wavenumbers()
                .iter()
                .map(|&k| {
                    let d = 1.0 / (1.0 + (k * k) as f64);
                    Complex64::new(rng.gen_range(-1.0..1.0) * d, rng.gen_range(-1.0..1.0) * d)
                })
                .collect()
        };
        FilteredState { u: mk(), v: mk() }
    }

    #[test]
    fn nonlinearity_basics() {
        for f in [Nonlinearity::CubicModulus, Nonlinearity::CubicReal] {
            let z = Complex64::new(0.0, 0.0);
            assert_eq!(f.value(z), z);
            assert_eq!(f.derivative(z, Complex64::new(1.0, 2.0)), z);
        }
        let u = Complex64::new(0.5, -0.25);
        assert!((Nonlinearity::CubicModulus.value(u) - u * u * u.conj()).norm() < 1e-15);
    }

    #[test]
    fn zero_lambda_gives_zero() {
        let m = TwoScaleModel::new(
            ProblemSpec::new(0.25).with_lambda(0.0),
            SpatialGrid::new(8).unwrap(),
            8,
        )
        .unwrap();
        let x = m.initial_qp();
        assert_eq!(m.g_tau(&x, 0.7).unwrap().norm(), 0.0);
        assert_eq!(
            m.prepared_initial_data(3).unwrap(),
            m.prepared_initial_data(0).unwrap()
        );
    }

    #[test]
    fn g_tau_at_zero_phase() {
        let m = model(0.25, 8, 8);
        let x = m.initial_qp();
        let g = m.g_tau(&x, 0.0).unwrap();
        assert!(g.u.iter().all(|c| c.norm() == 0.0));
        let phys: Vec<Complex64> = m.transform().inverse(
            &x.u.iter()
                .zip(m.phase().freqs())
                .map(|(c, f)| c / f)
                .collect::<Vec<_>>(),
        );
        let w: Vec<Complex64> = phys.iter().map(|&u| u * u.norm_sqr()).collect();
        let wh = m.transform().forward(&w);
        for (a, b) in g.v.iter().zip(&wh) {
            assert!((a - 0.25 * b).norm() < 1e-15);
        }
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let m = model(0.5, 16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_state(&mut rng, 16);
        let w = random_state(&mut rng, 16);
        let d = 1e-5;
        let shift = |s: f64| FilteredState {
            u: x.u.iter().zip(&w.u).map(|(a, b)| a + s * b).collect(),
            v: x.v.iter().zip(&w.v).map(|(a, b)| a + s * b).collect(),
        };
        let plus = m.g_tau(&shift(d), 0.9).unwrap().stacked();
        let minus = m.g_tau(&shift(-d), 0.9).unwrap().stacked();
        let exact = m.g_tau_jacvec(&x, 0.9, &w).unwrap().stacked();
        let num: f64 = exact
            .iter()
            .zip(plus.iter().zip(&minus))
            .map(|(e, (p, q))| (e - (p - q) / (2.0 * d)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = exact.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-6, "{}", num / den);
    }

    #[test]
    fn kappas_have_zero_mean() {
        let m = model(0.25, 16, 16);
        let x = m.initial_qp();
        for k in m.kappas(&x, 3).unwrap() {
            assert!(pi_op(&k).sup_norm() <= 1e-13);
        }
        assert!(m.kappa(0, &x).is_err());
        assert!(m.kappa(4, &x).is_err());
    }

    #[test]
    fn prepared_data_mean_is_initial_state() {
        let m = model(0.25, 16, 16);
        let z = m.prepared_initial_data(3).unwrap();
        let x = m.initial_qp().stacked();
        for (a, b) in z.mean().iter().zip(&x) {
            assert_eq!(a, b);
        }
        assert!(m.prepared_initial_data(4).is_err());
    }

    #[test]
    fn divergence_guard_fires() {
        let m = model(0.25, 8, 8);
        let mut x = m.initial_qp();
        x.u[1] = Complex64::new(1e12, 0.0);
        assert!(matches!(m.g_tau(&x, 0.1), Err(Error::Divergence { .. })));
        x.u[1] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(m.g_tau(&x, 0.1), Err(Error::Divergence { .. })));
    }
}
