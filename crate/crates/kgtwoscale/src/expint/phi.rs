//! φ-functions φ_ρ(z) = ∫₀¹ θ^{ρ−1} e^{(1−θ)z} / (ρ−1)! dθ, φ₀ = e^z.

use num_complex::Complex64;

/// Below this modulus the Taylor series is used. The upward recurrence
/// amplifies rounding by roughly ρ!/|z|^ρ, so it is only used where that
/// factor stays small for ρ ≤ 5.
pub const TAYLOR_RADIUS: f64 = 1.0;

const TAYLOR_TERMS: usize = 24;

fn inv_factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc / k as f64)
}

fn taylor(rho: usize, z: Complex64) -> Complex64 {
    // Σ_j z^j / (j+ρ)!, Horner from the tail.
    (0..TAYLOR_TERMS)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, j| {
            acc * z + inv_factorial(j + rho)
        })
}

/// φ₀(z), …, φ_max(z).
pub fn phis(max_rho: usize, z: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(max_rho + 1);
    out.push(z.exp());
    if z.norm() < TAYLOR_RADIUS {
        out.extend((1..=max_rho).map(|rho| taylor(rho, z)));
    } else {
        for rho in 1..=max_rho {
            let prev = out[rho - 1];
            out.push((prev - inv_factorial(rho - 1)) / z);
        }
    }
    out
}

pub fn phi(rho: usize, z: Complex64) -> Complex64 {
    if rho == 0 {
        z.exp()
    } else if z.norm() < TAYLOR_RADIUS {
        taylor(rho, z)
    } else {
        phis(rho, z)[rho]
    }
}
