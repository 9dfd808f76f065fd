//! Two-level semiclassical model of the `k = 2` star: the centre spin couples to
//! the total leaf spin, treated as a classical vector at angles `(θ, φ)`.

use crate::error::Result;
use crate::permsym::check_q;
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemiclassicalPoint {
    pub theta: f64,
    pub phi: f64,
    pub q: usize,
    /// `(λ₋, λ₊)`.
    pub eigenvalues: (f64, f64),
}

/// Entries `(a, b, c)` of `[[a, b], [b*, c]]`.
pub fn sc_matrix(theta: f64, phi: f64, q: usize) -> (f64, Complex64, f64) {
    let qf = q as f64;
    let den = qf * qf + 1.0;
    let (s, c) = theta.sin_cos();
    let a = 0.5 - qf * (1.0 + c) / (2.0 * den);
    let d = 0.5 + qf * (1.0 - c) / (2.0 * den);
    let b = Complex64::new(-qf * qf * phi.cos(), phi.sin()) * (s / (2.0 * den));
    (a, b, d)
}

pub fn sc_eigenvalues(theta: f64, phi: f64, q: usize) -> Result<SemiclassicalPoint> {
    check_q(q)?;
    let (a, b, d) = sc_matrix(theta, phi, q);
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    Ok(SemiclassicalPoint { theta, phi, q, eigenvalues: (mean - r, mean + r) })
}

/// `θ` of the zero-energy manifold, `cos θ = 1/q`.
pub fn ground_theta(q: usize) -> f64 {
    ((q * q - 1) as f64).sqrt().atan()
}

/// Large-`n` gap of the `k = 2` star, `1 - 1/q²`. A trend annotation, not a bound.
pub fn sc_asymptotic_gap(q: usize) -> Result<f64> {
    check_q(q)?;
    let qf = q as f64;
    Ok(1.0 - 1.0 / (qf * qf))
}

/// Minimum of `λ₋` over a `points x points` grid of `θ ∈ [0, π]`, `φ ∈ [-π, π]`.
pub fn grid_minimum(q: usize, points: usize) -> Result<SemiclassicalPoint> {
    check_q(q)?;
    let steps = points.max(2) - 1;
    let mut best: Option<SemiclassicalPoint> = None;
    for i in 0..=steps {
        let theta = std::f64::consts::PI * i as f64 / steps as f64;
        for j in 0..=steps {
            let phi = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * j as f64 / steps as f64;
            let p = sc_eigenvalues(theta, phi, q)?;
            if best.is_none_or(|b| p.eigenvalues.0 < b.eigenvalues.0) {
                best = Some(p);
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}
