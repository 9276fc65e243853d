//! Quadrature reference values for φ_ρ, independent of the series and
//! recurrence used by the integrators.
//!
//! φ_ρ(z) = ∫₀¹ (1−s)^{ρ−1} e^{zs} ds / (ρ−1)!. For moderate |z| the
//! integral is done directly by adaptive Gauss–Kronrod. When z is large and
//! mostly imaginary the integrand oscillates, so the path [0, 1] is replaced
//! by two vertical rays from 0 and from 1 along which e^{zs} decays.

#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

// Kronrod 15-point nodes on [−1, 1] (non-negative half) and weights.
const XGK: [f64; 8] = [
    0.991455371120812639,
    0.949107912342758525,
    0.864864423359769073,
    0.741531185599394440,
    0.586087235467691130,
    0.405845151377397167,
    0.207784955007898468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529225,
    0.063092092629978553,
    0.104790010322250184,
    0.140653259715525919,
    0.169004726639267903,
    0.190350578064785410,
    0.204432940075298892,
    0.209482141084727828,
];
// Embedded 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693,
    0.279705391489276668,
    0.381830050505118945,
    0.417959183673469388,
];

const MAX_DEPTH: u32 = 40;

fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * half, ((kron - gauss) * half).norm())
}

fn adapt(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64, depth: u32) -> Complex64 {
    let (val, err) = gk15(f, a, b);
    if err <= tol || depth >= MAX_DEPTH {
        return val;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth + 1) + adapt(f, m, b, 0.5 * tol, depth + 1)
}

/// Adaptive G7–K15 quadrature of a complex integrand on [a, b].
pub fn integrate(f: impl Fn(f64) -> Complex64, a: f64, b: f64, abs_tol: f64) -> Complex64 {
    adapt(&f, a, b, abs_tol, 0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// φ_ρ(z) by quadrature, to roughly 1e−14 relative accuracy.
pub fn phi_quadrature(rho: usize, z: Complex64) -> Complex64 {
    if rho == 0 {
        return z.exp();
    }
    let p = rho as i32 - 1;
    let norm = factorial(rho - 1);
    let scale = 1.0f64.max(z.re.exp());
    let tol = 1e-15 * scale;
    let y = z.im;
    if y.abs() <= 8.0 || z.re.abs() > y.abs() {
        let g = |s: f64| (1.0 - s).powi(p) * (z * s).exp();
        return integrate(g, 0.0, 1.0, tol) / norm;
    }
    // s = iσd with d = sign(Im z), so that |e^{zs}| = e^{−|y|σ} on the first ray.
    let d = y.signum();
    let i = Complex64::new(0.0, 1.0);
    let dir = i * d;
    let sigma_max = 60.0 / y.abs();
    let from_zero = |sigma: f64| {
        let s = dir * sigma;
        (1.0 - s).powi(p) * (z * s).exp() * dir
    };
    let from_one = |sigma: f64| {
        let s = dir * sigma;
        (-s).powi(p) * (z * (1.0 + s)).exp() * dir
    };
    (integrate(from_zero, 0.0, sigma_max, tol) - integrate(from_one, 0.0, sigma_max, tol)) / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_forms() {
        for z in [
            c(0.3, 0.0),
            c(-2.0, 1.0),
            c(0.0, 5.0),
            c(0.0, -40.0),
            c(0.5, 200.0),
        ] {
            let e = z.exp();
            let p1 = (e - 1.0) / z;
            let p2 = (e - 1.0 - z) / (z * z);
            let q1 = phi_quadrature(1, z);
            let q2 = phi_quadrature(2, z);
            assert!(
                (q1 - p1).norm() <= 1e-13 * p1.norm().max(1.0),
                "{z} {q1} {p1}"
            );
            assert!(
                (q2 - p2).norm() <= 1e-13 * p2.norm().max(1.0),
                "{z} {q2} {p2}"
            );
        }
    }

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| c(x.powi(5), 0.0), 0.0, 1.0, 1e-15);
        assert!((v.re - 1.0 / 6.0).abs() < 1e-16);
    }
}
