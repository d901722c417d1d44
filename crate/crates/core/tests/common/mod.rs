//! Independent numerical oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Ascending Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// three-term recurrence of the Legendre polynomials.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Product rule on the sphere: Gauss-Legendre in cos(colatitude) times the
/// trapezoid rule in azimuth. Integrates products of real SH up to order
/// `n_gl - 1` (colatitude) and trigonometric degree `n_az - 1` exactly.
pub fn sphere_quadrature(n_gl: usize, n_az: usize) -> Vec<(f64, f64, f64)> {
    let (mu, w) = gauss_legendre(n_gl);
    let mut out = Vec::with_capacity(n_gl * n_az);
    for (m, wm) in mu.iter().zip(&w) {
        for j in 0..n_az {
            let alpha = 2.0 * PI * j as f64 / n_az as f64;
            out.push((m.acos(), alpha, wm * 2.0 * PI / n_az as f64));
        }
    }
    out
}

/// Magnitude in dB.
pub fn db(x: f64) -> f64 {
    20.0 * x.log10()
}
